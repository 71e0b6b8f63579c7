//! Data-driven identification of HPDS models.
//!
//! The autonomous path needs states `X0` and exact derivatives `X1`. The
//! input/output path recovers the state from the output matrix `Y0` and works
//! on the forward-difference model
//! `x[t+1] = x[t] + τ A_(k) x[t]^[k−1] + B u[t]`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ht::{assemble, unfolding_basis, DimensionTree};
use crate::linalg::{compact_svd, least_squares, pinv_from_svd, CompactSvd, Matrix, RankTolerance};
use crate::model::{Dynamics, HpdsModel, SampleSet};
use crate::tensor::{almost_symmetrize, fold, khatri_rao_power, kron_power, unfold, DenseTensor};
use crate::tt::tt_decompose;

/// Outcome of a rank test on the data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentifiabilityReport {
    pub observed_rank: usize,
    pub required_rank: usize,
    pub satisfied: bool,
    /// Smallest retained singular value of the tested data matrix.
    pub margin: f64,
    /// Set when the margin is below `1e3 · ε · σ_max`.
    pub ill_conditioned: bool,
    /// Rank of `Y0` (input/output tests only).
    pub output_rank: Option<usize>,
}

impl IdentifiabilityReport {
    fn from_svd(svd: &CompactSvd, required: usize) -> Self {
        let observed = svd.rank();
        let margin = svd.margin();
        IdentifiabilityReport {
            observed_rank: observed,
            required_rank: required,
            satisfied: observed == required,
            margin,
            ill_conditioned: observed > 0 && margin < 1e3 * f64::EPSILON * svd.sigma_max,
            output_rank: None,
        }
    }
}

fn binomial(n: u64, r: u64) -> Option<u128> {
    if r > n {
        return Some(0);
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Number of independent entries in a row of `A_(k)` for an almost symmetric
/// tensor: `Σ_{j=1}^{min(n,k−1)} C(n,j) C(k−2,j−1)`.
pub fn required_rank(n: usize, k: usize) -> Result<usize> {
    if n < 1 || k < 2 {
        return Err(Error::Argument(format!("required rank needs n >= 1 and k >= 2, got n={n}, k={k}")));
    }
    let overflow = || Error::Argument(format!("required rank for n={n}, k={k} overflows 64 bits"));
    let mut total: u128 = 0;
    for j in 1..=n.min(k - 1) as u64 {
        let a = binomial(n as u64, j).ok_or_else(overflow)?;
        let b = binomial(k as u64 - 2, j - 1).ok_or_else(overflow)?;
        total = total.checked_add(a.checked_mul(b).ok_or_else(overflow)?).ok_or_else(overflow)?;
    }
    u64::try_from(total).ok().and_then(|t| usize::try_from(t).ok()).ok_or_else(overflow)
}

fn check_order(k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::Argument(format!("model order k must be at least 2, got {k}")));
    }
    Ok(())
}

fn lifted_states(x0: &Matrix, k: usize) -> Result<Matrix> {
    if k == 1 {
        return Ok(x0.clone());
    }
    khatri_rao_power(x0, k - 1)
}

/// Rank test on `X̂0 = X0 ⊙ ⋯ ⊙ X0` (`k − 1` factors).
pub fn check_identifiability_autonomous(s: &SampleSet, k: usize, tol: RankTolerance) -> Result<IdentifiabilityReport> {
    check_order(k)?;
    s.validate()?;
    let n = s.x0.nrows();
    let svd = compact_svd(&lifted_states(&s.x0, k)?, tol)?;
    Ok(IdentifiabilityReport::from_svd(&svd, required_rank(n, k)?))
}

/// How the singular values enter `M = X1 V̂0 Σ̂0^? Û0ᵀ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CoreInit {
    /// `Σ̂0⁺`, the least-squares solution.
    #[default]
    PseudoInverse,
    /// `Σ̂0ᵀ`, kept for comparison only; it does not recover `A_(k)`.
    Transpose,
}

/// `A_(k)` estimate from autonomous data, after the rank test.
fn autonomous_unfolding(s: &SampleSet, k: usize, tol: RankTolerance, init: CoreInit) -> Result<Matrix> {
    check_order(k)?;
    s.validate()?;
    let x1 = s.x1.as_ref().ok_or_else(|| Error::Argument("autonomous identification needs derivative data X1".into()))?;
    let n = s.x0.nrows();
    let svd = compact_svd(&lifted_states(&s.x0, k)?, tol)?;
    let report = IdentifiabilityReport::from_svd(&svd, required_rank(n, k)?);
    if !report.satisfied {
        return Err(Error::Identifiability(Box::new(report)));
    }
    let right = match init {
        CoreInit::PseudoInverse => pinv_from_svd(&svd),
        CoreInit::Transpose => {
            let mut vs = svd.v.clone();
            for (j, sv) in svd.s.iter().enumerate() {
                vs.column_mut(j).scale_mut(*sv);
            }
            vs * svd.u.transpose()
        }
    };
    Ok(x1 * right)
}

/// Full tensor `𝒜` from `A_(k) = X1 V̂0 Σ̂0⁺ Û0ᵀ`.
pub fn identify_full(s: &SampleSet, k: usize, tol: RankTolerance) -> Result<HpdsModel> {
    let ak = autonomous_unfolding(s, k, tol, CoreInit::PseudoInverse)?;
    let n = ak.nrows();
    let a = fold(&ak, &[k], &vec![n; k])?;
    HpdsModel::new(Dynamics::Full(a), None, None)
}

/// Tensor-train model straight from the data matrix.
pub fn identify_tt(s: &SampleSet, k: usize, tol: RankTolerance) -> Result<HpdsModel> {
    identify_tt_with(s, k, tol, CoreInit::PseudoInverse)
}

pub fn identify_tt_with(s: &SampleSet, k: usize, tol: RankTolerance, init: CoreInit) -> Result<HpdsModel> {
    let m = autonomous_unfolding(s, k, tol, init)?;
    let n = m.nrows();
    let tt = tt_decompose(&m, &vec![n; k], tol)?;
    HpdsModel::new(Dynamics::Tt(tt), None, None)
}

/// Hierarchical Tucker model. Leaves `1..k−1` share the mode-1 basis, which
/// is exact for almost symmetric tensors.
pub fn identify_ht(s: &SampleSet, k: usize, tree: &DimensionTree, tol: RankTolerance) -> Result<HpdsModel> {
    if tree.order() != k {
        return Err(Error::Shape(format!("tree has order {} but k = {k}", tree.order())));
    }
    let m = autonomous_unfolding(s, k, tol, CoreInit::PseudoInverse)?;
    let n = m.nrows();
    let a = fold(&m, &[k], &vec![n; k])?;
    let u_k = unfolding_basis(&a, &[k], tol)?;
    let u_1 = unfolding_basis(&a, &[1], tol)?;
    let mut bases = Vec::with_capacity(tree.len());
    for (i, node) in tree.nodes().iter().enumerate() {
        let basis = if i == 0 {
            Matrix::zeros(0, 0)
        } else if node.children.is_none() {
            if node.modes[0] == k { u_k.clone() } else { u_1.clone() }
        } else {
            unfolding_basis(&a, &node.modes, tol)?
        };
        bases.push(basis);
    }
    let h = assemble(&a, tree, bases)?;
    HpdsModel::new(Dynamics::Ht(h), None, None)
}

struct IoData {
    c: Matrix,
    /// Estimated states `n × T`.
    states: Matrix,
    output_rank: usize,
    inputs: Matrix,
}

/// Output basis and states from the compact SVD of `Y0`, truncated to `n`.
fn io_states(s: &SampleSet, n: usize, tol: RankTolerance) -> Result<IoData> {
    s.validate()?;
    let y0 = s.y0.as_ref().ok_or_else(|| Error::Argument("input/output identification needs outputs Y0".into()))?;
    if n < 1 {
        return Err(Error::Argument("state dimension must be at least 1".into()));
    }
    if y0.nrows() < n {
        return Err(Error::Assumption(format!("need at least as many outputs as states, got l={} < n={n}", y0.nrows())));
    }
    if y0.ncols() < 2 {
        return Err(Error::Argument("need at least two samples".into()));
    }
    let svd = compact_svd(y0, tol)?;
    let output_rank = svd.rank();
    let r = output_rank.min(n);
    let mut c = Matrix::zeros(y0.nrows(), n);
    let mut states = Matrix::zeros(n, y0.ncols());
    for j in 0..r {
        c.set_column(j, &svd.u.column(j));
        states.set_row(j, &(svd.v.column(j).transpose() * svd.s[j]));
    }
    let inputs = match &s.u0 {
        Some(u) => u.clone(),
        None => Matrix::zeros(0, y0.ncols()),
    };
    Ok(IoData { c, states, output_rank, inputs })
}

/// `[τ X̂0; U0]` over the first `T − 1` samples.
fn regressor(io: &IoData, k: usize, tau: f64) -> Result<Matrix> {
    let t = io.states.ncols() - 1;
    let lifted = lifted_states(&io.states.columns(0, t).into_owned(), k)? * tau;
    let m = io.inputs.nrows();
    let mut z = Matrix::zeros(lifted.nrows() + m, t);
    z.view_mut((0, 0), (lifted.nrows(), t)).copy_from(&lifted);
    if m > 0 {
        z.view_mut((lifted.nrows(), 0), (m, t)).copy_from(&io.inputs.columns(0, t));
    }
    Ok(z)
}

fn io_report(io: &IoData, z: &Matrix, n: usize, k: usize, tol: RankTolerance, exact_output: bool) -> Result<IdentifiabilityReport> {
    let svd = compact_svd(z, tol)?;
    let mut report = IdentifiabilityReport::from_svd(&svd, required_rank(n, k)? + io.inputs.nrows());
    let output_ok = if exact_output { io.output_rank == n } else { io.output_rank >= n };
    report.satisfied = report.satisfied && output_ok;
    report.output_rank = Some(io.output_rank);
    Ok(report)
}

/// `rank(Y0) = n` and `rank [X̂0; U0] = required_rank(n, k) + m`, with the
/// states taken from the compact SVD of `Y0`.
pub fn check_identifiability_io(s: &SampleSet, k: usize, n: usize, tol: RankTolerance) -> Result<IdentifiabilityReport> {
    check_order(k)?;
    let io = io_states(s, n, tol)?;
    let z = regressor(&io, k, s.tau)?;
    io_report(&io, &z, n, k, tol, true)
}

fn split_model(ab: &Matrix, n: usize, k: usize, c: Matrix, m: usize, symmetrize: bool) -> Result<HpdsModel> {
    let cols = ab.ncols() - m;
    let mut a = fold(&ab.columns(0, cols).into_owned(), &[k], &vec![n; k])?;
    if symmetrize {
        a = almost_symmetrize(&a)?;
    }
    let b = (m > 0).then(|| ab.columns(cols, m).into_owned());
    HpdsModel::new(Dynamics::Full(a), b, Some(c))
}

/// Exact input/output identification in the state basis fixed by `Y0`.
///
/// `[A_(k) B] = (X1 − X0) [τX̂0; U0]⁺`.
pub fn identify_io(s: &SampleSet, k: usize, n: usize, tol: RankTolerance) -> Result<HpdsModel> {
    check_order(k)?;
    let io = io_states(s, n, tol)?;
    let z = regressor(&io, k, s.tau)?;
    let report = io_report(&io, &z, n, k, tol, true)?;
    if !report.satisfied {
        return Err(Error::Identifiability(Box::new(report)));
    }
    let t = io.states.ncols() - 1;
    let diff = io.states.columns(1, t) - io.states.columns(0, t);
    let svd = compact_svd(&z, tol)?;
    let ab = diff * pinv_from_svd(&svd);
    let m = io.inputs.nrows();
    split_model(&ab, n, k, io.c, m, false)
}

/// Least-squares variant for noisy outputs: the output block is regressed
/// onto the rank-`n` state estimate, the dynamics block onto `[τX̂0; U0]`,
/// and the tensor is projected onto almost symmetric tensors.
pub fn identify_io_noisy(s: &SampleSet, k: usize, n: usize, tol: RankTolerance) -> Result<HpdsModel> {
    check_order(k)?;
    let io = io_states(s, n, tol)?;
    let z = regressor(&io, k, s.tau)?;
    let report = io_report(&io, &z, n, k, tol, false)?;
    if !report.satisfied {
        return Err(Error::Identifiability(Box::new(report)));
    }
    let t = io.states.ncols() - 1;
    let diff = io.states.columns(1, t) - io.states.columns(0, t);
    let ab = least_squares(&z.transpose(), &diff.transpose())?.transpose();
    let y0 = s.y0.as_ref().expect("checked in io_states");
    let c = least_squares(&io.states.transpose(), &y0.transpose())?.transpose();
    let m = io.inputs.nrows();
    split_model(&ab, n, k, c, m, true)
}

/// Relative parameter error of an identified input/output model after mapping
/// it into the coordinates of the reference model (`x = P x̂` with
/// `C_ref P = C_id`).
pub fn parameter_error(reference: &HpdsModel, identified: &HpdsModel) -> Result<f64> {
    let (c_ref, c_id) = match (&reference.c, &identified.c) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Argument("both models need an output matrix".into())),
    };
    if reference.k != identified.k || reference.n != identified.n {
        return Err(Error::Shape("models differ in order or dimension".into()));
    }
    let k = reference.k;
    let p = crate::linalg::pinv(c_ref, RankTolerance::Default)? * c_id;
    let p_inv = p
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numeric("state transformation between the models is singular".into()))?;
    let a_id = unfold(&identified.dynamics.to_dense(), &[k])?;
    let a_ref = unfold(&reference.dynamics.to_dense(), &[k])?;
    let a_mapped = &p * a_id * kron_power(&p_inv, k - 1);
    let mut num = (&a_mapped - &a_ref).norm_squared();
    let mut den = a_ref.norm_squared();
    match (&reference.b, &identified.b) {
        (Some(b_ref), Some(b_id)) => {
            num += (&p * b_id - b_ref).norm_squared();
            den += b_ref.norm_squared();
        }
        (None, None) => {}
        _ => return Err(Error::Shape("only one of the models has an input matrix".into())),
    }
    Ok(if den > 0.0 { (num / den).sqrt() } else { num.sqrt() })
}

/// Dense tensor of an identified model, handy for comparisons.
pub fn dense_dynamics(m: &HpdsModel) -> DenseTensor {
    m.dynamics.to_dense()
}
