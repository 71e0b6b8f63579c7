//! Reachability span of `ẋ = 𝒜 x^{k−1} + B u`.
//!
//! Starting from `col(B)`, each round appends `𝒜 v_1 ⋯ v_{k−1}` for every
//! selection of `k − 1` current basis vectors and re-orthonormalises with a
//! compact SVD. The loop stops at full rank, after `n` rounds, or when a
//! round adds nothing (the candidates depend only on the current span).

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::ht::{htd_contract, HTucker};
use crate::linalg::{compact_svd, Matrix, RankTolerance};
use crate::model::Dynamics;
use crate::tensor::{contract_leading, is_almost_symmetric, DenseTensor};
use crate::tt::{tt_contract, TensorTrain};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    StronglyControllable,
    NotControllable,
    Accessible,
    NotAccessible,
}

impl Verdict {
    fn from_rank(rank: usize, n: usize, k: usize) -> Self {
        match (k % 2 == 0, rank == n) {
            (true, true) => Verdict::StronglyControllable,
            (true, false) => Verdict::NotControllable,
            (false, true) => Verdict::Accessible,
            (false, false) => Verdict::NotAccessible,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::StronglyControllable => "strongly_controllable",
            Verdict::NotControllable => "not_controllable",
            Verdict::Accessible => "accessible",
            Verdict::NotAccessible => "not_accessible",
        }
    }
}

/// How the `k − 1` basis vectors of a candidate are selected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Enumeration {
    /// Multisets; enough when the tensor is almost symmetric.
    Multisets,
    /// All ordered tuples; needed for general tensors.
    Tuples,
}

#[derive(Clone, Debug)]
pub struct ControllabilityResult {
    /// Orthonormal basis of the reachability span.
    pub basis: Matrix,
    pub rank: usize,
    pub verdict: Verdict,
    /// Candidate-generation rounds performed.
    pub iterations: usize,
}

fn selections(r: usize, len: usize, how: Enumeration) -> Vec<Vec<usize>> {
    match how {
        Enumeration::Multisets => (0..r).combinations_with_replacement(len).collect(),
        Enumeration::Tuples => (0..len).map(|_| 0..r).multi_cartesian_product().collect(),
    }
}

fn grow(
    basis: &Matrix,
    k: usize,
    how: Enumeration,
    tol: RankTolerance,
    contract: &dyn Fn(&[Matrix]) -> Result<Matrix>,
) -> Result<Matrix> {
    let n = basis.nrows();
    let r = basis.ncols();
    let picks = selections(r, k - 1, how);
    let cols: Vec<Matrix> = (0..r).map(|j| basis.columns(j, 1).into_owned()).collect();
    let mut stacked = Matrix::zeros(n, r + picks.len());
    stacked.columns_mut(0, r).copy_from(basis);
    for (c, pick) in picks.iter().enumerate() {
        let args: Vec<Matrix> = pick.iter().map(|&j| cols[j].clone()).collect();
        let l = contract(&args)?;
        stacked.set_column(r + c, &l.column(0));
    }
    Ok(compact_svd(&stacked, tol)?.u)
}

fn reachability(
    n: usize,
    k: usize,
    b: &Matrix,
    tol: RankTolerance,
    how: Enumeration,
    contract: &dyn Fn(&[Matrix]) -> Result<Matrix>,
) -> Result<ControllabilityResult> {
    if b.nrows() != n {
        return Err(Error::Shape(format!("B has {} rows, expected {n}", b.nrows())));
    }
    let mut basis = compact_svd(b, tol)?.u;
    let mut iterations = 0;
    while basis.ncols() < n && basis.ncols() > 0 && iterations < n {
        let next = grow(&basis, k, how, tol, contract)?;
        iterations += 1;
        let stalled = next.ncols() == basis.ncols();
        basis = next;
        if stalled {
            if cfg!(debug_assertions) {
                let again = grow(&basis, k, how, tol, contract)?;
                debug_assert_eq!(again.ncols(), basis.ncols(), "reachability span grew after a stagnant round");
            }
            break;
        }
    }
    let rank = basis.ncols();
    Ok(ControllabilityResult { basis, rank, verdict: Verdict::from_rank(rank, n, k), iterations })
}

fn cubical(dims: &[usize]) -> Result<(usize, usize)> {
    let n = dims[0];
    if dims.len() < 2 || dims.iter().any(|&d| d != n) {
        return Err(Error::Shape(format!("dynamics with dims {dims:?} is not cubical of order >= 2")));
    }
    Ok((n, dims.len()))
}

/// Dense path; enumerates multisets when `a` is almost symmetric and ordered
/// tuples otherwise.
pub fn controllability_full(a: &DenseTensor, b: &Matrix, tol: RankTolerance) -> Result<ControllabilityResult> {
    let scale = a.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let how = if is_almost_symmetric(a, 1e-12 * scale)? { Enumeration::Multisets } else { Enumeration::Tuples };
    controllability_full_with(a, b, tol, how)
}

pub fn controllability_full_with(
    a: &DenseTensor,
    b: &Matrix,
    tol: RankTolerance,
    how: Enumeration,
) -> Result<ControllabilityResult> {
    let (n, k) = cubical(a.dims())?;
    let contract = |args: &[Matrix]| -> Result<Matrix> {
        let vs: Vec<&[f64]> = args.iter().map(|m| m.as_slice()).collect();
        Ok(Matrix::from_vec(n, 1, contract_leading(a, &vs)?))
    };
    reachability(n, k, b, tol, how, &contract)
}

pub fn controllability_tt(t: &TensorTrain, b: &Matrix, tol: RankTolerance) -> Result<ControllabilityResult> {
    controllability_tt_with(t, b, tol, Enumeration::Multisets)
}

pub fn controllability_tt_with(
    t: &TensorTrain,
    b: &Matrix,
    tol: RankTolerance,
    how: Enumeration,
) -> Result<ControllabilityResult> {
    let (n, k) = cubical(t.dims())?;
    reachability(n, k, b, tol, how, &|args| tt_contract(t, args))
}

pub fn controllability_ht(h: &HTucker, b: &Matrix, tol: RankTolerance) -> Result<ControllabilityResult> {
    controllability_ht_with(h, b, tol, Enumeration::Multisets)
}

pub fn controllability_ht_with(h: &HTucker, b: &Matrix, tol: RankTolerance, how: Enumeration) -> Result<ControllabilityResult> {
    let (n, k) = cubical(h.dims())?;
    reachability(n, k, b, tol, how, &|args| htd_contract(h, args))
}

/// Dispatch on the model backend. `how = None` keeps each backend's default.
pub fn controllability(
    d: &Dynamics,
    b: &Matrix,
    tol: RankTolerance,
    how: Option<Enumeration>,
) -> Result<ControllabilityResult> {
    match (d, how) {
        (Dynamics::Full(a), None) => controllability_full(a, b, tol),
        (Dynamics::Full(a), Some(h)) => controllability_full_with(a, b, tol, h),
        (Dynamics::Tt(t), h) => controllability_tt_with(t, b, tol, h.unwrap_or(Enumeration::Multisets)),
        (Dynamics::Ht(x), h) => controllability_ht_with(x, b, tol, h.unwrap_or(Enumeration::Multisets)),
    }
}
