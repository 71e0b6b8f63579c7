//! Dense tensors in ψ-order (first index fastest), unfoldings and the
//! Kronecker-family products used throughout the crate.
//!
//! Public multi-indices are 1-based. Mode numbers passed to [`unfold`],
//! [`fold`] and [`mode_vec_product`] are 1-based as well.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// 1-based multi-index `(j_1, .., j_k)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiIndex(pub Vec<usize>);

impl From<Vec<usize>> for MultiIndex {
    fn from(v: Vec<usize>) -> Self {
        MultiIndex(v)
    }
}

/// Column-major position of a 1-based multi-index, itself 1-based:
/// `j_1 + Σ_{i≥2} (j_i − 1) Π_{l<i} n_l`.
pub fn psi_index(indices: &MultiIndex, dims: &[usize]) -> Result<usize> {
    if indices.0.len() != dims.len() {
        return Err(Error::Index(format!(
            "multi-index has {} entries but tensor has order {}",
            indices.0.len(),
            dims.len()
        )));
    }
    let mut pos = 0usize;
    let mut stride = 1usize;
    for (p, (&j, &n)) in indices.0.iter().zip(dims).enumerate() {
        if j < 1 || j > n {
            return Err(Error::Index(format!("index {j} out of range 1..={n} in mode {}", p + 1)));
        }
        pos += (j - 1) * stride;
        stride *= n;
    }
    Ok(pos + 1)
}

/// Visit every 0-based multi-index of `dims` in ψ-order.
pub(crate) fn for_each_index(dims: &[usize], mut f: impl FnMut(usize, &[usize])) {
    let total: usize = dims.iter().product();
    let mut idx = vec![0usize; dims.len()];
    for flat in 0..total {
        f(flat, &idx);
        for (p, j) in idx.iter_mut().enumerate() {
            *j += 1;
            if *j < dims[p] {
                break;
            }
            *j = 0;
        }
    }
}

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(Error::Shape("tensor order must be at least 1".into()));
    }
    if dims.iter().any(|&n| n == 0) {
        return Err(Error::Shape(format!("tensor dimensions must be positive, got {dims:?}")));
    }
    dims.iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .ok_or_else(|| Error::Scale(format!("tensor with dims {dims:?} overflows the address space")))
}

/// Order-k array with values stored in ψ-order.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let len = check_dims(&dims)?;
        if values.len() != len {
            return Err(Error::Shape(format!(
                "tensor with dims {dims:?} needs {len} values, got {}",
                values.len()
            )));
        }
        Ok(DenseTensor { dims, values })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let len = check_dims(&dims)?;
        Ok(DenseTensor { dims, values: vec![0.0; len] })
    }

    /// Build from a function of the 0-based multi-index.
    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = check_dims(&dims)?;
        let mut values = Vec::with_capacity(len);
        for_each_index(&dims, |_, idx| values.push(f(idx)));
        Ok(DenseTensor { dims, values })
    }

    /// Cubical tensor of order `k` and dimension `n`.
    pub fn cubical_zeros(n: usize, k: usize) -> Result<Self> {
        Self::zeros(vec![n; k])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Common mode size when every mode has the same size.
    pub fn cubical_dim(&self) -> Option<usize> {
        let n = self.dims[0];
        self.dims.iter().all(|&d| d == n).then_some(n)
    }

    fn require_cubical(&self) -> Result<usize> {
        self.cubical_dim()
            .ok_or_else(|| Error::Shape(format!("tensor with dims {:?} is not cubical", self.dims)))
    }

    pub fn entry(&self, idx: &MultiIndex) -> Result<f64> {
        Ok(self.values[psi_index(idx, &self.dims)? - 1])
    }

    pub(crate) fn offset(&self, idx: &[usize]) -> usize {
        let mut pos = 0;
        let mut stride = 1;
        for (&j, &n) in idx.iter().zip(&self.dims) {
            pos += j * stride;
            stride *= n;
        }
        pos
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `vec(𝒜)` as a column vector.
    pub fn to_vector(&self) -> Vector {
        Vector::from_column_slice(&self.values)
    }

    pub fn max_abs_diff(&self, other: &DenseTensor) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!("dims differ: {:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// `‖self − other‖_F / ‖other‖_F` (absolute error when `other` is zero).
    pub fn relative_error(&self, other: &DenseTensor) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!("dims differ: {:?} vs {:?}", self.dims, other.dims)));
        }
        let diff: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let norm = other.frobenius_norm();
        Ok(if norm > 0.0 { diff / norm } else { diff })
    }
}

/// Kronecker product `A ⊗ B` (blocks `A_ij B`).
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (n, m) = a.shape();
    let (s, r) = b.shape();
    let mut out = Matrix::zeros(n * s, m * r);
    for j in 0..m {
        for i in 0..n {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for q in 0..r {
                for p in 0..s {
                    out[(i * s + p, j * r + q)] = aij * b[(p, q)];
                }
            }
        }
    }
    out
}

/// `x^[m] = x ⊗ x ⊗ ⋯ ⊗ x` (m factors); `x^[0]` is the scalar 1.
pub fn kron_power(x: &Matrix, m: usize) -> Matrix {
    let mut out = Matrix::from_element(1, 1, 1.0);
    for _ in 0..m {
        out = kron(&out, x);
    }
    out
}

/// Kronecker power of a vector, returned as a vector.
pub fn kron_power_vec(x: &Vector, m: usize) -> Vector {
    let mut out = vec![1.0];
    for _ in 0..m {
        let mut next = Vec::with_capacity(out.len() * x.len());
        for &a in &out {
            next.extend(x.iter().map(|b| a * b));
        }
        out = next;
    }
    Vector::from_vec(out)
}

/// Column-wise Kronecker product.
pub fn khatri_rao(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::Shape(format!(
            "Khatri-Rao product needs equal column counts, got {} and {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let (n, s) = a.shape();
    let m = b.nrows();
    let mut out = Matrix::zeros(n * m, s);
    for j in 0..s {
        for i in 0..n {
            let aij = a[(i, j)];
            for p in 0..m {
                out[(i * m + p, j)] = aij * b[(p, j)];
            }
        }
    }
    Ok(out)
}

/// `X ⊙ X ⊙ ⋯ ⊙ X` with `m` factors.
pub fn khatri_rao_power(x: &Matrix, m: usize) -> Result<Matrix> {
    if m < 1 {
        return Err(Error::Argument("Khatri-Rao power needs m >= 1".into()));
    }
    let mut out = x.clone();
    for _ in 1..m {
        out = khatri_rao(&out, x)?;
    }
    Ok(out)
}

fn check_modes(row_modes: &[usize], k: usize) -> Result<()> {
    if row_modes.is_empty() {
        return Err(Error::Argument("row mode set must be non-empty".into()));
    }
    if row_modes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument(format!("row modes must be strictly increasing, got {row_modes:?}")));
    }
    if row_modes[0] < 1 || *row_modes.last().unwrap() > k {
        return Err(Error::Argument(format!("row modes {row_modes:?} outside 1..={k}")));
    }
    Ok(())
}

/// Per-mode strides into the column-major buffer of the `R`-unfolding, plus
/// its shape.
fn unfolding_strides(dims: &[usize], row_modes: &[usize]) -> (Vec<usize>, usize, usize) {
    let k = dims.len();
    let is_row: Vec<bool> = (1..=k).map(|p| row_modes.contains(&p)).collect();
    let rows: usize = (0..k).filter(|&p| is_row[p]).map(|p| dims[p]).product();
    let cols: usize = (0..k).filter(|&p| !is_row[p]).map(|p| dims[p]).product();
    let mut strides = vec![0; k];
    let (mut rs, mut cs) = (1, rows);
    for p in 0..k {
        if is_row[p] {
            strides[p] = rs;
            rs *= dims[p];
        } else {
            strides[p] = cs;
            cs *= dims[p];
        }
    }
    (strides, rows, cols)
}

/// `A_(R)`: modes in `row_modes` (1-based, increasing) index rows, the rest
/// index columns, both in ψ-order.
pub fn unfold(t: &DenseTensor, row_modes: &[usize]) -> Result<Matrix> {
    check_modes(row_modes, t.order())?;
    let (strides, rows, cols) = unfolding_strides(&t.dims, row_modes);
    let mut out = vec![0.0; rows * cols];
    for_each_index(&t.dims, |flat, idx| {
        let pos: usize = idx.iter().zip(&strides).map(|(j, s)| j * s).sum();
        out[pos] = t.values[flat];
    });
    Ok(Matrix::from_vec(rows, cols, out))
}

/// Inverse of [`unfold`].
pub fn fold(m: &Matrix, row_modes: &[usize], dims: &[usize]) -> Result<DenseTensor> {
    check_dims(dims)?;
    check_modes(row_modes, dims.len())?;
    let (strides, rows, cols) = unfolding_strides(dims, row_modes);
    if m.shape() != (rows, cols) {
        return Err(Error::Shape(format!(
            "matrix is {}x{} but unfolding of {dims:?} over {row_modes:?} is {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )));
    }
    let src = m.as_slice();
    DenseTensor::from_fn(dims.to_vec(), |idx| {
        let pos: usize = idx.iter().zip(&strides).map(|(j, s)| j * s).sum();
        src[pos]
    })
}

/// `𝒜 ×_p v`, contracting mode `p` (1-based).
pub fn mode_vec_product(t: &DenseTensor, v: &Vector, p: usize) -> Result<DenseTensor> {
    let k = t.order();
    if p < 1 || p > k {
        return Err(Error::Argument(format!("mode {p} outside 1..={k}")));
    }
    if k < 2 {
        return Err(Error::Argument("contracting the only mode leaves a scalar".into()));
    }
    if v.len() != t.dims[p - 1] {
        return Err(Error::Shape(format!("vector length {} != mode size {}", v.len(), t.dims[p - 1])));
    }
    let out_dims: Vec<usize> = t.dims.iter().enumerate().filter(|&(q, _)| q != p - 1).map(|(_, &n)| n).collect();
    // Mode p splits the buffer into [inner | n_p | outer] blocks.
    let inner: usize = t.dims[..p - 1].iter().product();
    let np = t.dims[p - 1];
    let outer: usize = t.dims[p..].iter().product();
    let mut out = vec![0.0; inner * outer];
    for o in 0..outer {
        for (j, &vj) in v.iter().enumerate() {
            let base = (o * np + j) * inner;
            let dst = &mut out[o * inner..(o + 1) * inner];
            for (d, s) in dst.iter_mut().zip(&t.values[base..base + inner]) {
                *d += s * vj;
            }
        }
    }
    DenseTensor::new(out_dims, out)
}

/// Contract modes `1..=vs.len()` of `t` with `vs[0], vs[1], …` and return the
/// remaining entries in ψ-order. With `k − 1` vectors this is `𝒜 v_1 ⋯ v_{k−1}`.
pub fn contract_leading(t: &DenseTensor, vs: &[&[f64]]) -> Result<Vec<f64>> {
    if vs.len() >= t.order() {
        return Err(Error::Argument(format!(
            "cannot contract {} modes of an order-{} tensor",
            vs.len(),
            t.order()
        )));
    }
    let mut cur: Vec<f64> = t.values.clone();
    for (p, v) in vs.iter().enumerate() {
        let n = t.dims[p];
        if v.len() != n {
            return Err(Error::Shape(format!("vector {} has length {} but mode size is {n}", p + 1, v.len())));
        }
        cur = cur.chunks_exact(n).map(|chunk| chunk.iter().zip(v.iter()).map(|(a, b)| a * b).sum()).collect();
    }
    Ok(cur)
}

/// `A_(k) x^[k−1]` for a cubical order-k tensor.
pub fn hpds_eval_full(a: &DenseTensor, x: &Vector) -> Result<Vector> {
    let n = a.require_cubical()?;
    if x.len() != n {
        return Err(Error::Shape(format!("state has length {} but tensor dimension is {n}", x.len())));
    }
    let k = a.order();
    let xs: Vec<&[f64]> = vec![x.as_slice(); k - 1];
    Ok(Vector::from_vec(contract_leading(a, &xs)?))
}

/// Offset of the entry whose first `lead` indices are sorted; every index in
/// the same permutation class maps to the same offset.
fn canonical_offset(t: &DenseTensor, idx: &[usize], lead: usize, scratch: &mut Vec<usize>) -> usize {
    scratch.clear();
    scratch.extend_from_slice(idx);
    scratch[..lead].sort_unstable();
    t.offset(scratch)
}

fn average_over_classes(t: &DenseTensor, lead: usize) -> DenseTensor {
    let mut sum = vec![0.0; t.len()];
    let mut count = vec![0usize; t.len()];
    let mut scratch = Vec::with_capacity(t.order());
    for_each_index(&t.dims, |flat, idx| {
        let c = canonical_offset(t, idx, lead, &mut scratch);
        sum[c] += t.values[flat];
        count[c] += 1;
    });
    let mut out = t.clone();
    for_each_index(&t.dims, |flat, idx| {
        let c = canonical_offset(t, idx, lead, &mut scratch);
        out.values[flat] = sum[c] / count[c] as f64;
    });
    out
}

fn class_deviation(t: &DenseTensor, lead: usize) -> f64 {
    let mut lo = vec![f64::INFINITY; t.len()];
    let mut hi = vec![f64::NEG_INFINITY; t.len()];
    let mut scratch = Vec::with_capacity(t.order());
    for_each_index(&t.dims, |flat, idx| {
        let c = canonical_offset(t, idx, lead, &mut scratch);
        lo[c] = lo[c].min(t.values[flat]);
        hi[c] = hi[c].max(t.values[flat]);
    });
    lo.iter().zip(&hi).filter(|(l, _)| l.is_finite()).map(|(l, h)| h - l).fold(0.0, f64::max)
}

/// Average every entry over all permutations of its first `k − 1` indices.
///
/// The average over all `(k−1)!` permutations equals the mean over the
/// distinct rearrangements of the index multiset, so this runs in `O(n^k)`.
pub fn almost_symmetrize(t: &DenseTensor) -> Result<DenseTensor> {
    t.require_cubical()?;
    Ok(average_over_classes(t, t.order() - 1))
}

/// Largest difference between two entries related by a permutation of the
/// first `k − 1` indices is at most `tol`.
pub fn is_almost_symmetric(t: &DenseTensor, tol: f64) -> Result<bool> {
    t.require_cubical()?;
    Ok(class_deviation(t, t.order() - 1) <= tol)
}

/// Average over all permutations of all `k` indices.
pub fn symmetrize(t: &DenseTensor) -> Result<DenseTensor> {
    t.require_cubical()?;
    Ok(average_over_classes(t, t.order()))
}

pub fn is_symmetric(t: &DenseTensor, tol: f64) -> Result<bool> {
    t.require_cubical()?;
    Ok(class_deviation(t, t.order()) <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use itertools::Itertools;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(dims: Vec<usize>, seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseTensor::from_fn(dims, |_| rng.random_range(-1.0..1.0)).unwrap()
    }

    fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> Vector {
        Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi_index(&vec![1, 1, 1].into(), &[3, 3, 3]).unwrap(), 1);
        // Column-major enumeration of a 4x5 grid: (2,3) is the 10th cell.
        let mut count = 0;
        let mut found = 0;
        for j2 in 1..=5 {
            for j1 in 1..=4 {
                count += 1;
                if (j1, j2) == (2, 3) {
                    found = count;
                }
            }
        }
        assert_eq!(found, 10);
        assert_eq!(psi_index(&vec![2, 3].into(), &[4, 5]).unwrap(), 10);
        assert_eq!(psi_index(&vec![3, 4, 2].into(), &[3, 4, 2]).unwrap(), 24);
        assert!(matches!(psi_index(&vec![0, 1].into(), &[2, 2]), Err(Error::Index(_))));
        assert!(matches!(psi_index(&vec![1, 3].into(), &[2, 2]), Err(Error::Index(_))));
    }

    #[test]
    fn psi_is_a_bijection() {
        for dims in [vec![2, 3, 4], vec![5, 1, 3, 2], vec![7], vec![3, 3, 3, 3, 3]] {
            let total: usize = dims.iter().product();
            let mut seen = vec![false; total];
            for idx in dims.iter().map(|&n| 1..=n).multi_cartesian_product() {
                let p = psi_index(&MultiIndex(idx), &dims).unwrap();
                assert!(!seen[p - 1]);
                seen[p - 1] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn kron_examples() {
        assert_eq!(kron(&Matrix::identity(2, 2), &Matrix::identity(2, 2)), Matrix::identity(4, 4));
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        #[rustfmt::skip]
        let expected = Matrix::from_row_slice(4, 4, &[
            0.0, 1.0, 0.0, 2.0,
            1.0, 0.0, 2.0, 0.0,
            0.0, 3.0, 0.0, 4.0,
            3.0, 0.0, 4.0, 0.0,
        ]);
        assert_eq!(kron(&a, &b), expected);
    }

    #[test]
    fn kron_matches_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Matrix::from_fn(2, 3, |_, _| rng.random_range(-1.0..1.0));
        let b = Matrix::from_fn(4, 2, |_, _| rng.random_range(-1.0..1.0));
        assert_eq!(kron(&a, &b), a.kronecker(&b));
    }

    #[test]
    fn khatri_rao_examples() {
        let a = Matrix::identity(2, 2);
        let b = Matrix::from_row_slice(2, 2, &[2.0, 3.0, 4.0, 5.0]);
        let expected = Matrix::from_row_slice(4, 2, &[2.0, 0.0, 4.0, 0.0, 0.0, 3.0, 0.0, 5.0]);
        assert_eq!(khatri_rao(&a, &b).unwrap(), expected);

        let u = Matrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let v = Matrix::from_column_slice(2, 1, &[4.0, 5.0]);
        assert_eq!(khatri_rao(&u, &v).unwrap(), kron(&u, &v));
        assert!(matches!(khatri_rao(&u, &Matrix::zeros(2, 2)), Err(Error::Shape(_))));
    }

    #[test]
    fn khatri_rao_power_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Matrix::from_fn(3, 5, |_, _| rng.random_range(-1.0..1.0));
        assert_eq!(khatri_rao_power(&x, 1).unwrap(), x);
        let x2 = khatri_rao_power(&x, 2).unwrap();
        assert_eq!(x2.nrows(), 9);
        for j in 0..5 {
            let col = x.column(j).into_owned();
            assert_eq!(x2.column(j).into_owned(), kron_power_vec(&col, 2));
        }
        let x3 = khatri_rao_power(&x, 3).unwrap();
        let other = khatri_rao(&x, &khatri_rao(&x, &x).unwrap()).unwrap();
        assert!((x3 - other).amax() < 1e-15);
        assert!(matches!(khatri_rao_power(&x, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn unfold_examples() {
        let t = random_tensor(vec![3, 4], 1);
        assert_eq!(unfold(&t, &[1]).unwrap(), Matrix::from_column_slice(3, 4, t.values()));
        let t = random_tensor(vec![2, 3, 2], 2);
        assert_eq!(unfold(&t, &[1, 2, 3]).unwrap(), Matrix::from_column_slice(12, 1, t.values()));

        // 2x2x2 with values 1..8 in ψ-order: entry (j1,j2,j3) = j1 + 2(j2-1) + 4(j3-1).
        let t = DenseTensor::new(vec![2, 2, 2], (1..=8).map(f64::from).collect()).unwrap();
        let m = unfold(&t, &[2]).unwrap();
        assert_eq!(m.shape(), (2, 4));
        for j1 in 1..=2 {
            for j2 in 1..=2 {
                for j3 in 1..=2 {
                    let value = (j1 + 2 * (j2 - 1) + 4 * (j3 - 1)) as f64;
                    let col = j1 + 2 * (j3 - 1);
                    assert_eq!(m[(j2 - 1, col - 1)], value);
                }
            }
        }
        assert!(matches!(unfold(&t, &[2, 1]), Err(Error::Argument(_))));
        assert!(matches!(unfold(&t, &[]), Err(Error::Argument(_))));
        assert!(matches!(unfold(&t, &[4]), Err(Error::Argument(_))));
    }

    #[test]
    fn unfold_entrywise_general() {
        let t = random_tensor(vec![2, 3, 4, 2], 5);
        for modes in [vec![1, 3], vec![2, 4], vec![4], vec![1, 2, 3]] {
            let m = unfold(&t, &modes).unwrap();
            let rest: Vec<usize> = (1..=4).filter(|p| !modes.contains(p)).collect();
            for idx in t.dims().iter().map(|&n| 1..=n).multi_cartesian_product() {
                let ri: Vec<usize> = modes.iter().map(|&p| idx[p - 1]).collect();
                let rd: Vec<usize> = modes.iter().map(|&p| t.dims()[p - 1]).collect();
                let ci: Vec<usize> = rest.iter().map(|&p| idx[p - 1]).collect();
                let cd: Vec<usize> = rest.iter().map(|&p| t.dims()[p - 1]).collect();
                let r = psi_index(&MultiIndex(ri), &rd).unwrap();
                let c = psi_index(&MultiIndex(ci), &cd).unwrap();
                assert_eq!(m[(r - 1, c - 1)], t.entry(&MultiIndex(idx)).unwrap());
            }
        }
    }

    #[test]
    fn fold_round_trip_and_edge_cases() {
        let t = random_tensor(vec![2, 3, 4], 6);
        for modes in [vec![1], vec![2], vec![3], vec![1, 2], vec![1, 3], vec![2, 3], vec![1, 2, 3]] {
            let back = fold(&unfold(&t, &modes).unwrap(), &modes, t.dims()).unwrap();
            assert_eq!(back, t);
        }
        let v = Matrix::from_column_slice(24, 1, t.values());
        assert_eq!(fold(&v, &[1, 2, 3], &[2, 3, 4]).unwrap(), t);
        let z = fold(&Matrix::zeros(3, 8), &[2], &[2, 3, 4]).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        assert!(matches!(fold(&Matrix::zeros(3, 7), &[2], &[2, 3, 4]), Err(Error::Shape(_))));
    }

    #[test]
    fn mode_vec_product_examples() {
        // Diagonal cube: slice extraction with e_1.
        let n = 3;
        let t = DenseTensor::from_fn(vec![n; 3], |i| if i[0] == i[1] && i[1] == i[2] { (i[0] + 1) as f64 } else { 0.0 })
            .unwrap();
        let e1 = Vector::from_vec(vec![1.0, 0.0, 0.0]);
        let s = mode_vec_product(&t, &e1, 2).unwrap();
        assert_eq!(s.dims(), &[3, 3]);
        for i in 0..3 {
            for j in 0..3 {
                let expected = t.values()[t.offset(&[i, 0, j])];
                assert_eq!(s.values()[s.offset(&[i, j])], expected);
            }
        }
        let zero = mode_vec_product(&t, &Vector::zeros(3), 1).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        assert!(matches!(mode_vec_product(&t, &Vector::zeros(2), 1), Err(Error::Shape(_))));
    }

    #[test]
    fn mode_product_matches_unfolding() {
        let t = random_tensor(vec![2, 3, 4], 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for p in 1..=3 {
            let v = random_vector(t.dims()[p - 1], &mut rng);
            let direct = mode_vec_product(&t, &v, p).unwrap();
            let via_unfold = unfold(&t, &[p]).unwrap().transpose() * &v;
            assert!((Vector::from_column_slice(direct.values()) - via_unfold).amax() < 1e-14);
        }
    }

    #[test]
    fn all_modes_contraction_matches_unfolded_form() {
        let t = symmetrize(&random_tensor(vec![3; 4], 9)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let v = random_vector(3, &mut rng);
        let mut cur = t.clone();
        for _ in 0..3 {
            cur = mode_vec_product(&cur, &v, 1).unwrap();
        }
        let scalar = Vector::from_column_slice(cur.values()).dot(&v);
        let unfolded = unfold(&t, &[4]).unwrap() * kron_power_vec(&v, 3);
        assert!((scalar - v.dot(&unfolded)).abs() < 1e-12);
    }

    #[test]
    fn eval_examples() {
        let a = random_tensor(vec![3, 3], 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = random_vector(3, &mut rng);
        let m = Matrix::from_column_slice(3, 3, a.values());
        assert!((hpds_eval_full(&a, &x).unwrap() - m.transpose() * &x).amax() < 1e-15);

        let a3 = random_tensor(vec![3, 3, 3], 13);
        assert_eq!(hpds_eval_full(&a3, &Vector::zeros(3)).unwrap(), Vector::zeros(3));

        // n=2, k=3: explicit double loop over the first two indices.
        let a = random_tensor(vec![2, 2, 2], 14);
        let x = random_vector(2, &mut rng);
        let y = hpds_eval_full(&a, &x).unwrap();
        for j3 in 0..2 {
            let mut acc = 0.0;
            for j1 in 0..2 {
                for j2 in 0..2 {
                    acc += a.values()[a.offset(&[j1, j2, j3])] * x[j1] * x[j2];
                }
            }
            assert!((y[j3] - acc).abs() < 1e-14);
        }
        let unfolded = unfold(&a, &[3]).unwrap() * kron_power_vec(&x, 2);
        assert!((y - unfolded).amax() < 1e-14);

        assert!(matches!(hpds_eval_full(&random_tensor(vec![2, 3], 1), &x), Err(Error::Shape(_))));
    }

    #[test]
    fn almost_symmetry_examples() {
        let t = random_tensor(vec![3; 4], 15);
        let s = almost_symmetrize(&t).unwrap();
        assert!(is_almost_symmetric(&s, 1e-14).unwrap());
        assert!(!is_almost_symmetric(&t, 1e-9).unwrap());
        // Fixed point.
        let again = almost_symmetrize(&s).unwrap();
        assert!(again.max_abs_diff(&s).unwrap() < 1e-15);
        // k = 2: nothing to permute.
        let m = random_tensor(vec![3, 3], 16);
        assert_eq!(almost_symmetrize(&m).unwrap(), m);

        // Enumerate the six permutations of the first three indices explicitly.
        for idx in (0..3).map(|_| 0..3usize).multi_cartesian_product() {
            for j4 in 0..3 {
                let base = s.values()[s.offset(&[idx[0], idx[1], idx[2], j4])];
                for perm in idx.iter().permutations(3) {
                    let v = s.values()[s.offset(&[*perm[0], *perm[1], *perm[2], j4])];
                    assert!((v - base).abs() < 1e-14);
                }
            }
        }

        // Perturb one asymmetric entry.
        let mut p = s.clone();
        let off = p.offset(&[0, 1, 2, 0]);
        p.values_mut()[off] += 1.0;
        assert!(!is_almost_symmetric(&p, 1e-9).unwrap());
    }

    #[test]
    fn symmetrization_preserves_the_polynomial() {
        let t = random_tensor(vec![2, 2, 2], 17);
        let s = almost_symmetrize(&t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..10 {
            let x = random_vector(2, &mut rng);
            let d = hpds_eval_full(&t, &x).unwrap() - hpds_eval_full(&s, &x).unwrap();
            assert!(d.amax() <= 1e-12);
        }
    }

    #[test]
    fn symmetric_matricizations_share_singular_values() {
        let t = symmetrize(&random_tensor(vec![3; 4], 19)).unwrap();
        assert!(is_symmetric(&t, 1e-14).unwrap());
        let reference = unfold(&t, &[1]).unwrap().singular_values();
        for p in 2..=4 {
            let s = unfold(&t, &[p]).unwrap().singular_values();
            let mut a: Vec<f64> = reference.iter().cloned().collect();
            let mut b: Vec<f64> = s.iter().cloned().collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn constructors_validate() {
        assert!(matches!(DenseTensor::new(vec![2, 2], vec![0.0; 3]), Err(Error::Shape(_))));
        assert!(matches!(DenseTensor::zeros(vec![]), Err(Error::Shape(_))));
        assert!(matches!(DenseTensor::zeros(vec![2, 0]), Err(Error::Shape(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, Strategy};

        fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
            proptest::collection::vec(1usize..5, 1..5)
        }

        proptest! {
            #[test]
            fn unfold_fold_round_trip(dims in dims_strategy(), seed in any::<u64>(), mask in any::<u8>()) {
                let t = random_tensor(dims.clone(), seed);
                let k = dims.len();
                let mut modes: Vec<usize> = (1..=k).filter(|p| mask & (1 << (p - 1)) != 0).collect();
                if modes.is_empty() {
                    modes.push(1);
                }
                let back = fold(&unfold(&t, &modes).unwrap(), &modes, &dims).unwrap();
                prop_assert_eq!(back, t);
            }

            #[test]
            fn mixed_product(seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut m = |r: usize, c: usize| Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
                let (a, b, c, d) = (m(2, 3), m(3, 2), m(3, 4), m(2, 2));
                let lhs = kron(&a, &b) * kron(&c, &d);
                let rhs = kron(&(&a * &c), &(&b * &d));
                prop_assert!((&lhs - &rhs).norm() <= 1e-12 * rhs.norm().max(1.0));
            }

            #[test]
            fn eval_invariant_under_almost_symmetrization(seed in any::<u64>(), n in 1usize..4, k in 2usize..5) {
                let t = random_tensor(vec![n; k], seed);
                let s = almost_symmetrize(&t).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
                let x = random_vector(n, &mut rng);
                let d = hpds_eval_full(&t, &x).unwrap() - hpds_eval_full(&s, &x).unwrap();
                prop_assert!(d.amax() <= 1e-12);
            }
        }
    }
}
