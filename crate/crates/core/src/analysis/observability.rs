//! Local weak observability through the state-dependent observability matrix
//!
//! ```text
//! O(x) = [C; C A_(k) S_{m_1}(x); C A_(k) F_2 S_{m_2}(x); …],   m_j = j(k−2) + 1
//! ```
//!
//! where `S_m(x) = Σ_q x^[q−1] ⊗ I ⊗ x^[m−q]` and `F_j` lifts `A_(k)` through
//! the Kronecker chain. The TT and HT paths never form `F_j`; they evaluate
//! each block by recursively merging windows of `k − 1` Kronecker factors.

use crate::error::{Error, Result};
use crate::ht::{htd_contract, HTucker};
use crate::linalg::{compact_svd, Matrix, RankTolerance, Vector};
use crate::model::Dynamics;
use crate::tensor::{kron, kron_power, kron_power_vec, unfold, DenseTensor};
use crate::tt::{tt_contract, TensorTrain};

/// Largest dense operator the full path will materialise.
pub const MAX_DENSE_ENTRIES: usize = 10_000_000;

#[derive(Clone, Debug)]
pub struct ObservabilityResult {
    /// Largest rank over the probe states.
    pub matrix_rank: usize,
    pub n: usize,
    /// Full rank at some probe.
    pub verdict: bool,
    pub probe_states: Vec<Vector>,
    pub ranks: Vec<usize>,
    /// Number of Lie-derivative blocks after `C`.
    pub depth: usize,
}

impl ObservabilityResult {
    pub fn verdict_str(&self) -> &'static str {
        if self.verdict {
            "locally_weakly_observable"
        } else {
            "not_observed_at_probes"
        }
    }
}

fn m_of(j: usize, k: usize) -> usize {
    j * (k - 2) + 1
}

fn checked_pow(n: usize, m: usize) -> Result<usize> {
    n.checked_pow(m as u32).ok_or_else(|| Error::Scale(format!("{n}^{m} overflows")))
}

fn guard(rows: usize, cols: usize) -> Result<()> {
    match rows.checked_mul(cols) {
        Some(e) if e <= MAX_DENSE_ENTRIES => Ok(()),
        _ => Err(Error::Scale(format!(
            "dense operator of size {rows}x{cols} exceeds {MAX_DENSE_ENTRIES} entries; use the TT or HT representation"
        ))),
    }
}

/// `Σ_{q=1}^{m} x^[q−1] ⊗ I_n ⊗ x^[m−q]`, an `n^m × n` matrix.
pub fn gradient_sum(x: &Vector, m: usize) -> Result<Matrix> {
    if m < 1 {
        return Err(Error::Argument("gradient sum needs m >= 1".into()));
    }
    let n = x.len();
    guard(checked_pow(n, m)?, n)?;
    let xm = Matrix::from_column_slice(n, 1, x.as_slice());
    let eye = Matrix::identity(n, n);
    let mut out = Matrix::zeros(n.pow(m as u32), n);
    for q in 1..=m {
        let left = kron_power(&xm, q - 1);
        let right = kron_power(&xm, m - q);
        out += kron(&kron(&left, &eye), &right);
    }
    Ok(out)
}

/// `F_j = Σ_{i=1}^{m_{j−1}} I^[i−1] ⊗ A_(k) ⊗ I^[m_{j−1}−i]`, of size
/// `n^{m_{j−1}} × n^{m_j}`.
pub fn lift_operator(a_k: &Matrix, j: usize, k: usize) -> Result<Matrix> {
    if j < 2 {
        return Err(Error::Argument(format!("lift operator is defined for j >= 2, got {j}")));
    }
    if k < 2 {
        return Err(Error::Argument(format!("order k must be at least 2, got {k}")));
    }
    let n = a_k.nrows();
    if a_k.ncols() != checked_pow(n, k - 1)? {
        return Err(Error::Shape(format!("A_(k) is {}x{}, expected {n}x{}", n, a_k.ncols(), n.pow(k as u32 - 1))));
    }
    let m_prev = m_of(j - 1, k);
    let rows = checked_pow(n, m_prev)?;
    let cols = checked_pow(n, m_of(j, k))?;
    guard(rows, cols)?;
    let mut out = Matrix::zeros(rows, cols);
    for i in 1..=m_prev {
        let left = Matrix::identity(n.pow(i as u32 - 1), n.pow(i as u32 - 1));
        let right = Matrix::identity(n.pow((m_prev - i) as u32), n.pow((m_prev - i) as u32));
        out += kron(&kron(&left, a_k), &right);
    }
    debug_assert_eq!(out.shape(), (rows, cols));
    Ok(out)
}

fn check_inputs(n: usize, c: &Matrix, x: &Vector) -> Result<()> {
    if c.ncols() != n {
        return Err(Error::Shape(format!("C has {} columns, expected {n}", c.ncols())));
    }
    if x.len() != n {
        return Err(Error::Shape(format!("state has length {}, expected {n}", x.len())));
    }
    Ok(())
}

fn stack(blocks: Vec<Matrix>, n: usize) -> Matrix {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Matrix::zeros(rows, n);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), n)).copy_from(&b);
        r += b.nrows();
    }
    out
}

fn cubical(dims: &[usize]) -> Result<(usize, usize)> {
    let n = dims[0];
    if dims.len() < 2 || dims.iter().any(|&d| d != n) {
        return Err(Error::Shape(format!("dynamics with dims {dims:?} is not cubical of order >= 2")));
    }
    Ok((n, dims.len()))
}

/// Dense `O(x)` with blocks `0..=depth`.
pub fn observability_matrix_full(a: &DenseTensor, c: &Matrix, x: &Vector, depth: usize) -> Result<Matrix> {
    let (n, k) = cubical(a.dims())?;
    check_inputs(n, c, x)?;
    let a_k = unfold(a, &[k])?;
    let mut blocks = vec![c.clone()];
    for j in 1..=depth {
        let mut g = gradient_sum(x, m_of(j, k))?;
        for jj in (2..=j).rev() {
            g = lift_operator(&a_k, jj, k)? * g;
        }
        blocks.push(c * (&a_k * g));
    }
    Ok(stack(blocks, n))
}

/// Merge-window recursion shared by the TT and HT paths. `j1` evaluates
/// `A_(k)(z_1 ⊗ ⋯ ⊗ z_{k−1})`.
fn recursive_j(j: usize, k: usize, z: &[Matrix], j1: &dyn Fn(&[Matrix]) -> Result<Matrix>) -> Result<Matrix> {
    if j < 1 {
        return Err(Error::Argument("recursion level must be at least 1".into()));
    }
    if z.len() != m_of(j, k) {
        return Err(Error::Argument(format!("level {j} needs {} factors, got {}", m_of(j, k), z.len())));
    }
    if j == 1 {
        return j1(z);
    }
    let mut total: Option<Matrix> = None;
    for i in 0..m_of(j - 1, k) {
        let merged = j1(&z[i..i + k - 1])?;
        let mut next: Vec<Matrix> = Vec::with_capacity(m_of(j - 1, k));
        next.extend_from_slice(&z[..i]);
        next.push(merged);
        next.extend_from_slice(&z[i + k - 1..]);
        let term = recursive_j(j - 1, k, &next, j1)?;
        total = Some(match total {
            Some(t) => t + term,
            None => term,
        });
    }
    Ok(total.expect("at least one window"))
}

fn reversed(z: &[Matrix]) -> Vec<Matrix> {
    z.iter().rev().cloned().collect()
}

/// Level-`j` term `A_(k) F_2 ⋯ F_j (z_1 ⊗ ⋯ ⊗ z_{m_j})` from the train.
pub fn recursive_j_tt(t: &TensorTrain, j: usize, z: &[Matrix]) -> Result<Matrix> {
    let (_, k) = cubical(t.dims())?;
    recursive_j(j, k, z, &|w| tt_contract(t, &reversed(w)))
}

/// Level-`j` term from the hierarchical Tucker form.
pub fn recursive_j_ht(h: &HTucker, j: usize, z: &[Matrix]) -> Result<Matrix> {
    let (_, k) = cubical(h.dims())?;
    recursive_j(j, k, z, &|w| htd_contract(h, &reversed(w)))
}

fn factor_list(x: &Vector, m: usize, q: usize) -> Vec<Matrix> {
    let n = x.len();
    let xm = Matrix::from_column_slice(n, 1, x.as_slice());
    let mut z = vec![xm; m];
    z[q] = Matrix::identity(n, n);
    z
}

fn recursive_matrix(
    n: usize,
    k: usize,
    c: &Matrix,
    x: &Vector,
    depth: usize,
    level: &dyn Fn(usize, &[Matrix]) -> Result<Matrix>,
) -> Result<Matrix> {
    check_inputs(n, c, x)?;
    let mut blocks = vec![c.clone()];
    for j in 1..=depth {
        let m = m_of(j, k);
        let mut sum = Matrix::zeros(n, n);
        for q in 0..m {
            sum += level(j, &factor_list(x, m, q))?;
        }
        blocks.push(c * sum);
    }
    Ok(stack(blocks, n))
}

pub fn observability_matrix_tt(t: &TensorTrain, c: &Matrix, x: &Vector, depth: usize) -> Result<Matrix> {
    let (n, k) = cubical(t.dims())?;
    recursive_matrix(n, k, c, x, depth, &|j, z| recursive_j_tt(t, j, z))
}

pub fn observability_matrix_ht(h: &HTucker, c: &Matrix, x: &Vector, depth: usize) -> Result<Matrix> {
    let (n, k) = cubical(h.dims())?;
    recursive_matrix(n, k, c, x, depth, &|j, z| recursive_j_ht(h, j, z))
}

fn evaluate(
    n: usize,
    probes: &[Vector],
    depth: usize,
    tol: RankTolerance,
    build: &dyn Fn(&Vector) -> Result<Matrix>,
) -> Result<ObservabilityResult> {
    if probes.is_empty() {
        return Err(Error::Argument("need at least one probe state".into()));
    }
    let mut ranks = Vec::with_capacity(probes.len());
    for x in probes {
        let o = build(x)?;
        ranks.push(compact_svd(&o, tol)?.rank());
    }
    let matrix_rank = ranks.iter().copied().max().unwrap_or(0);
    Ok(ObservabilityResult {
        matrix_rank,
        n,
        verdict: matrix_rank == n,
        probe_states: probes.to_vec(),
        ranks,
        depth,
    })
}

pub fn observability_full(
    a: &DenseTensor,
    c: &Matrix,
    probes: &[Vector],
    depth: usize,
    tol: RankTolerance,
) -> Result<ObservabilityResult> {
    let (n, _) = cubical(a.dims())?;
    evaluate(n, probes, depth, tol, &|x| observability_matrix_full(a, c, x, depth))
}

pub fn observability_tt(
    t: &TensorTrain,
    c: &Matrix,
    probes: &[Vector],
    depth: usize,
    tol: RankTolerance,
) -> Result<ObservabilityResult> {
    let (n, _) = cubical(t.dims())?;
    evaluate(n, probes, depth, tol, &|x| observability_matrix_tt(t, c, x, depth))
}

pub fn observability_ht(
    h: &HTucker,
    c: &Matrix,
    probes: &[Vector],
    depth: usize,
    tol: RankTolerance,
) -> Result<ObservabilityResult> {
    let (n, _) = cubical(h.dims())?;
    evaluate(n, probes, depth, tol, &|x| observability_matrix_ht(h, c, x, depth))
}

pub fn observability(
    d: &Dynamics,
    c: &Matrix,
    probes: &[Vector],
    depth: usize,
    tol: RankTolerance,
) -> Result<ObservabilityResult> {
    match d {
        Dynamics::Full(a) => observability_full(a, c, probes, depth, tol),
        Dynamics::Tt(t) => observability_tt(t, c, probes, depth, tol),
        Dynamics::Ht(h) => observability_ht(h, c, probes, depth, tol),
    }
}

/// `A_(k) x^[m]`-style helper used by tests and the finite-difference checks.
pub fn lie_chain_value(a: &DenseTensor, x: &Vector, j: usize) -> Result<Vector> {
    let (_, k) = cubical(a.dims())?;
    let a_k = unfold(a, &[k])?;
    let mut v = kron_power_vec(x, m_of(j, k));
    for jj in (2..=j).rev() {
        v = lift_operator(&a_k, jj, k)? * v;
    }
    Ok(&a_k * v)
}
