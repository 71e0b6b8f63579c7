//! JSON and CSV formats for tensors, models, reports and trajectories.
//!
//! Every float is written with 17 significant digits (`{:.16e}`), which
//! round-trips any `f64` exactly. Files are written to a temporary sibling
//! and renamed into place.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::ht::{DimensionTree, HTucker, TreeNode};
use crate::linalg::{Matrix, Vector};
use crate::model::{Dynamics, HpdsModel, Representation, SampleSet};
use crate::tensor::DenseTensor;
use crate::tt::TensorTrain;

/// 17 significant digits in scientific notation.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct Sig17;

impl serde_json::ser::Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        w.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("{what} contains non-finite values")))
    }
}

/// Compact JSON with 17-digit floats and a trailing newline.
pub fn to_json_string(v: &Value) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17);
    serde::Serialize::serialize(v, &mut ser).map_err(|e| Error::Format(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

pub fn parse_json(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::Format(format!("invalid JSON: {e}")))
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| Error::Format(format!("missing field \"{key}\"")))
}

fn as_usize(v: &Value, what: &str) -> Result<usize> {
    v.as_u64().map(|x| x as usize).ok_or_else(|| Error::Format(format!("{what} must be a non-negative integer")))
}

fn usize_list(v: &Value, what: &str) -> Result<Vec<usize>> {
    v.as_array()
        .ok_or_else(|| Error::Format(format!("{what} must be an array")))?
        .iter()
        .map(|x| as_usize(x, what))
        .collect()
}

fn f64_list(v: &Value, what: &str) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| Error::Format(format!("{what} must be an array")))?
        .iter()
        .map(|x| x.as_f64().ok_or_else(|| Error::Format(format!("{what} must hold numbers"))))
        .collect()
}

fn floats(values: &[f64]) -> Value {
    Value::Array(values.iter().map(|&v| json!(v)).collect())
}

pub fn matrix_to_json(m: &Matrix) -> Result<Value> {
    check_finite(m.as_slice(), "matrix")?;
    Ok(json!({ "rows": m.nrows(), "cols": m.ncols(), "values": floats(m.as_slice()) }))
}

pub fn matrix_from_json(v: &Value) -> Result<Matrix> {
    let rows = as_usize(field(v, "rows")?, "rows")?;
    let cols = as_usize(field(v, "cols")?, "cols")?;
    let values = f64_list(field(v, "values")?, "values")?;
    if values.len() != rows * cols {
        return Err(Error::Format(format!("matrix {rows}x{cols} with {} values", values.len())));
    }
    Ok(Matrix::from_vec(rows, cols, values))
}

pub fn tensor_to_json(t: &DenseTensor) -> Result<Value> {
    check_finite(t.values(), "tensor")?;
    Ok(json!({ "dims": t.dims(), "values": floats(t.values()) }))
}

pub fn tensor_from_json(v: &Value) -> Result<DenseTensor> {
    let dims = usize_list(field(v, "dims")?, "dims")?;
    let values = f64_list(field(v, "values")?, "values")?;
    DenseTensor::new(dims, values).map_err(|e| Error::Format(e.to_string()))
}

pub fn tt_to_json(t: &TensorTrain) -> Result<Value> {
    let cores = t.cores().iter().map(tensor_to_json).collect::<Result<Vec<_>>>()?;
    Ok(json!({ "dims": t.dims(), "ranks": t.ranks(), "cores": cores }))
}

pub fn tt_from_json(v: &Value) -> Result<TensorTrain> {
    let cores = field(v, "cores")?
        .as_array()
        .ok_or_else(|| Error::Format("cores must be an array".into()))?
        .iter()
        .map(tensor_from_json)
        .collect::<Result<Vec<_>>>()?;
    let t = TensorTrain::new(cores).map_err(|e| Error::Format(e.to_string()))?;
    if let Some(d) = v.get("dims") {
        if usize_list(d, "dims")? != t.dims() {
            return Err(Error::Format("dims do not match the cores".into()));
        }
    }
    if let Some(r) = v.get("ranks") {
        if usize_list(r, "ranks")? != t.ranks() {
            return Err(Error::Format("ranks do not match the cores".into()));
        }
    }
    Ok(t)
}

pub fn ht_to_json(h: &HTucker) -> Result<Value> {
    fn node(h: &HTucker, i: usize) -> Result<Value> {
        let n = h.tree().node(i);
        let mut obj = Map::new();
        obj.insert("modes".into(), json!(n.modes));
        match n.children {
            None => {
                obj.insert("factor".into(), matrix_to_json(&h.blocks()[i])?);
            }
            Some((l, r)) => {
                obj.insert("transfer".into(), matrix_to_json(&h.blocks()[i])?);
                obj.insert("left".into(), node(h, l)?);
                obj.insert("right".into(), node(h, r)?);
            }
        }
        Ok(Value::Object(obj))
    }
    node(h, 0)
}

pub fn ht_from_json(v: &Value) -> Result<HTucker> {
    fn walk(v: &Value, nodes: &mut Vec<TreeNode>, blocks: &mut Vec<Matrix>) -> Result<usize> {
        let modes = usize_list(field(v, "modes")?, "modes")?;
        let idx = nodes.len();
        nodes.push(TreeNode { modes, children: None });
        if let Some(f) = v.get("factor") {
            blocks.push(matrix_from_json(f)?);
        } else {
            blocks.push(matrix_from_json(field(v, "transfer")?)?);
            let l = walk(field(v, "left")?, nodes, blocks)?;
            let r = walk(field(v, "right")?, nodes, blocks)?;
            nodes[idx].children = Some((l, r));
        }
        Ok(idx)
    }
    let (mut nodes, mut blocks) = (Vec::new(), Vec::new());
    walk(v, &mut nodes, &mut blocks)?;
    let k = nodes[0].modes.len();
    let mut dims = vec![0; k];
    for (node, b) in nodes.iter().zip(&blocks) {
        if node.children.is_none() {
            let p = node.modes.first().copied().filter(|&p| (1..=k).contains(&p));
            let p = p.ok_or_else(|| Error::Format(format!("leaf with modes {:?}", node.modes)))?;
            dims[p - 1] = b.nrows();
        }
    }
    let tree = DimensionTree::from_nodes(nodes).map_err(|e| Error::Format(e.to_string()))?;
    HTucker::new(tree, dims, blocks).map_err(|e| Error::Format(e.to_string()))
}

pub fn dynamics_to_json(d: &Dynamics) -> Result<Value> {
    match d {
        Dynamics::Full(t) => tensor_to_json(t),
        Dynamics::Tt(t) => tt_to_json(t),
        Dynamics::Ht(h) => ht_to_json(h),
    }
}

pub fn model_to_json(m: &HpdsModel) -> Result<Value> {
    let opt = |x: &Option<Matrix>| -> Result<Value> { x.as_ref().map_or(Ok(Value::Null), matrix_to_json) };
    Ok(json!({
        "k": m.k,
        "n": m.n,
        "repr": m.dynamics.representation().as_str(),
        "A": dynamics_to_json(&m.dynamics)?,
        "B": opt(&m.b)?,
        "C": opt(&m.c)?,
    }))
}

pub fn model_from_json(v: &Value) -> Result<HpdsModel> {
    let repr: Representation = field(v, "repr")?
        .as_str()
        .ok_or_else(|| Error::Format("repr must be a string".into()))?
        .parse()
        .map_err(|e: Error| Error::Format(e.to_string()))?;
    let a = field(v, "A")?;
    let dynamics = match repr {
        Representation::Full => Dynamics::Full(tensor_from_json(a)?),
        Representation::Tt => Dynamics::Tt(tt_from_json(a)?),
        Representation::Ht => Dynamics::Ht(ht_from_json(a)?),
    };
    let opt = |key: &str| -> Result<Option<Matrix>> {
        match v.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(m) => matrix_from_json(m).map(Some),
        }
    };
    let m = HpdsModel::new(dynamics, opt("B")?, opt("C")?)?;
    for (key, want) in [("k", m.k), ("n", m.n)] {
        if let Some(x) = v.get(key) {
            if as_usize(x, key)? != want {
                return Err(Error::Format(format!("\"{key}\" does not match the dynamics tensor")));
            }
        }
    }
    Ok(m)
}

/// Trajectory CSV: `t,x1..xn[,dx1..dxn][,u1..um][,y1..yl]`, one row per sample.
pub fn trajectory_to_csv(s: &SampleSet) -> Result<String> {
    s.validate()?;
    let mut header = vec!["t".to_string()];
    let mut blocks: Vec<&Matrix> = vec![&s.x0];
    header.extend((1..=s.x0.nrows()).map(|i| format!("x{i}")));
    for (prefix, m) in [("dx", &s.x1), ("u", &s.u0), ("y", &s.y0)] {
        if let Some(m) = m {
            header.extend((1..=m.nrows()).map(|i| format!("{prefix}{i}")));
            blocks.push(m);
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).map_err(|e| Error::Format(e.to_string()))?;
    for j in 0..s.len() {
        let mut row = vec![format_f64(j as f64 * s.tau)];
        for m in &blocks {
            for &v in m.column(j).iter() {
                if !v.is_finite() {
                    return Err(Error::Numeric(format!("non-finite value in sample {j}")));
                }
                row.push(format_f64(v));
            }
        }
        w.write_record(&row).map_err(|e| Error::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

fn parse_f64(s: &str, row: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Format(format!("row {row}: cannot parse \"{s}\" as a number")))
}

pub fn trajectory_from_csv(text: &str) -> Result<SampleSet> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(|e| Error::Format(e.to_string()))?.iter().map(|h| h.trim().to_string()).collect();
    if header.first().map(String::as_str) != Some("t") {
        return Err(Error::Format("trajectory header must start with \"t\"".into()));
    }
    // Column positions per block, in 1..=count order.
    let mut cols: [Vec<usize>; 4] = Default::default();
    for (c, h) in header.iter().enumerate().skip(1) {
        let (block, rest) = if let Some(r) = h.strip_prefix("dx") {
            (1, r)
        } else if let Some(r) = h.strip_prefix('x') {
            (0, r)
        } else if let Some(r) = h.strip_prefix('u') {
            (2, r)
        } else if let Some(r) = h.strip_prefix('y') {
            (3, r)
        } else {
            return Err(Error::Format(format!("unknown trajectory column \"{h}\"")));
        };
        let idx: usize = rest.parse().map_err(|_| Error::Format(format!("bad column name \"{h}\"")))?;
        if idx != cols[block].len() + 1 {
            return Err(Error::Format(format!("column \"{h}\" out of order")));
        }
        cols[block].push(c);
    }
    if cols[0].is_empty() {
        return Err(Error::Format("trajectory has no state columns".into()));
    }
    let mut times = Vec::new();
    let mut data: [Vec<f64>; 4] = Default::default();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        if rec.len() != header.len() {
            return Err(Error::Format(format!("row {} has {} fields, expected {}", row + 1, rec.len(), header.len())));
        }
        times.push(parse_f64(&rec[0], row + 1)?);
        for b in 0..4 {
            for &c in &cols[b] {
                data[b].push(parse_f64(&rec[c], row + 1)?);
            }
        }
    }
    let t = times.len();
    if t == 0 {
        return Err(Error::Format("trajectory has no samples".into()));
    }
    let tau = if t > 1 { (times[t - 1] - times[0]) / (t - 1) as f64 } else { 1.0 };
    let block = |b: usize| -> Option<Matrix> {
        (!cols[b].is_empty()).then(|| Matrix::from_column_slice(cols[b].len(), t, &data[b]))
    };
    let s = SampleSet { tau, x0: block(0).expect("state block"), x1: block(1), u0: block(2), y0: block(3) };
    s.validate()?;
    Ok(s)
}

/// Plain numeric CSV as a matrix with the file's row layout. A leading
/// non-numeric row is treated as a header.
pub fn numeric_csv(text: &str) -> Result<Matrix> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => return Err(Error::Format(format!("row {}: non-numeric field", i + 1))),
        }
    }
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err(Error::Format("CSV holds no numbers".into()));
    }
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Format("CSV rows have different lengths".into()));
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// A vector stored as one row or one column.
pub fn vector_csv(text: &str) -> Result<Vector> {
    let m = numeric_csv(text)?;
    if m.nrows() != 1 && m.ncols() != 1 {
        return Err(Error::Format(format!("expected a single row or column, got {}x{}", m.nrows(), m.ncols())));
    }
    Ok(Vector::from_column_slice(m.as_slice()))
}

/// One CSV row per vector.
pub fn rows_to_csv(rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&r.iter().map(|&v| format_f64(v)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}
