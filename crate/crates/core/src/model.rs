//! HPDS models with interchangeable dynamics backends, trajectory simulation
//! and measurement noise.

use crate::error::{Error, Result};
use crate::ht::{htd_eval_hpds, htd_reconstruct, HTucker};
use crate::linalg::{Matrix, Vector};
use crate::rng::GaussianStream;
use crate::tensor::{hpds_eval_full, DenseTensor};
use crate::tt::{tt_eval_hpds, tt_reconstruct, TensorTrain};

#[derive(Clone, Debug, PartialEq)]
pub enum Dynamics {
    Full(DenseTensor),
    Tt(TensorTrain),
    Ht(HTucker),
}

/// Which backend a model uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Representation {
    Full,
    Tt,
    Ht,
}

impl Representation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Representation::Full => "full",
            Representation::Tt => "tt",
            Representation::Ht => "ht",
        }
    }
}

impl std::str::FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Representation::Full),
            "tt" => Ok(Representation::Tt),
            "ht" => Ok(Representation::Ht),
            other => Err(Error::Argument(format!("unknown representation {other:?}"))),
        }
    }
}

impl Dynamics {
    pub fn representation(&self) -> Representation {
        match self {
            Dynamics::Full(_) => Representation::Full,
            Dynamics::Tt(_) => Representation::Tt,
            Dynamics::Ht(_) => Representation::Ht,
        }
    }

    pub fn dims(&self) -> &[usize] {
        match self {
            Dynamics::Full(t) => t.dims(),
            Dynamics::Tt(t) => t.dims(),
            Dynamics::Ht(h) => h.dims(),
        }
    }

    /// `𝒜 x^{k−1}`.
    pub fn eval(&self, x: &Vector) -> Result<Vector> {
        match self {
            Dynamics::Full(t) => hpds_eval_full(t, x),
            Dynamics::Tt(t) => tt_eval_hpds(t, x),
            Dynamics::Ht(h) => htd_eval_hpds(h, x),
        }
    }

    /// Expand to a dense tensor.
    pub fn to_dense(&self) -> DenseTensor {
        match self {
            Dynamics::Full(t) => t.clone(),
            Dynamics::Tt(t) => tt_reconstruct(t),
            Dynamics::Ht(h) => htd_reconstruct(h),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HpdsModel {
    pub k: usize,
    pub n: usize,
    pub dynamics: Dynamics,
    /// `n × m` input matrix.
    pub b: Option<Matrix>,
    /// `l × n` output matrix.
    pub c: Option<Matrix>,
}

impl HpdsModel {
    pub fn new(dynamics: Dynamics, b: Option<Matrix>, c: Option<Matrix>) -> Result<Self> {
        let dims = dynamics.dims();
        let k = dims.len();
        if k < 2 {
            return Err(Error::Shape("dynamics tensor must have order k >= 2".into()));
        }
        let n = dims[0];
        if dims.iter().any(|&d| d != n) {
            return Err(Error::Shape(format!("dynamics tensor with dims {dims:?} is not cubical")));
        }
        if let Some(b) = &b {
            if b.nrows() != n {
                return Err(Error::Shape(format!("B has {} rows, expected {n}", b.nrows())));
            }
        }
        if let Some(c) = &c {
            if c.ncols() != n {
                return Err(Error::Shape(format!("C has {} columns, expected {n}", c.ncols())));
            }
        }
        Ok(HpdsModel { k, n, dynamics, b, c })
    }

    pub fn input_dim(&self) -> usize {
        self.b.as_ref().map_or(0, |b| b.ncols())
    }
}

/// `𝒜 x^{k−1} + B u`.
pub fn eval_derivative(m: &HpdsModel, x: &Vector, u: Option<&Vector>) -> Result<Vector> {
    let mut dx = m.dynamics.eval(x)?;
    match (u, &m.b) {
        (Some(u), Some(b)) => {
            if u.len() != b.ncols() {
                return Err(Error::Shape(format!("input has length {} but B has {} columns", u.len(), b.ncols())));
            }
            dx += b * u;
        }
        (Some(_), None) => return Err(Error::Argument("input given for a model without B".into())),
        _ => {}
    }
    Ok(dx)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Integrator {
    Rk4,
    Euler,
}

/// Sampled data. Columns are samples.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub tau: f64,
    /// States, `n × T`.
    pub x0: Matrix,
    /// Derivatives at the states in `x0` (continuous-time data only).
    pub x1: Option<Matrix>,
    /// Inputs, `m × T`.
    pub u0: Option<Matrix>,
    /// Outputs, `l × T`.
    pub y0: Option<Matrix>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.x0.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x0.ncols() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Argument(format!("sampling interval must be positive, got {}", self.tau)));
        }
        let t = self.x0.ncols();
        for (name, m) in [("X1", &self.x1), ("U0", &self.u0), ("Y0", &self.y0)] {
            if let Some(m) = m {
                if m.ncols() != t {
                    return Err(Error::Shape(format!("{name} has {} columns, expected {t}", m.ncols())));
                }
            }
        }
        if let Some(x1) = &self.x1 {
            if x1.nrows() != self.x0.nrows() {
                return Err(Error::Shape("X0 and X1 have different row counts".into()));
            }
        }
        Ok(())
    }
}

fn check_sim_args(m: &HpdsModel, x0: &Vector, u: Option<&Matrix>, tau: f64, steps: usize) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Argument(format!("tau must be positive, got {tau}")));
    }
    if steps < 1 {
        return Err(Error::Argument("need at least one sample".into()));
    }
    if x0.len() != m.n {
        return Err(Error::Shape(format!("initial state has length {}, expected {}", x0.len(), m.n)));
    }
    if let Some(u) = u {
        let b = m.b.as_ref().ok_or_else(|| Error::Argument("input given for a model without B".into()))?;
        if u.nrows() != b.ncols() {
            return Err(Error::Shape(format!("input has {} rows but B has {} columns", u.nrows(), b.ncols())));
        }
        if u.ncols() < steps {
            return Err(Error::Shape(format!("input has {} samples, need {steps}", u.ncols())));
        }
    }
    Ok(())
}

fn input_at(m: &HpdsModel, u: Option<&Matrix>, i: usize) -> Option<Vector> {
    match (u, &m.b) {
        (Some(u), _) => Some(u.column(i).into_owned()),
        (None, Some(b)) => Some(Vector::zeros(b.ncols())),
        (None, None) => None,
    }
}

fn outputs(m: &HpdsModel, states: &Matrix) -> Option<Matrix> {
    m.c.as_ref().map(|c| c * states)
}

/// Fixed-step integration with zero-order-hold inputs. `X0` holds the states
/// at `iτ`, `X1` the exact model derivatives there.
pub fn simulate_continuous(
    m: &HpdsModel,
    x0: &Vector,
    u: Option<&Matrix>,
    tau: f64,
    steps: usize,
    method: Integrator,
) -> Result<SampleSet> {
    check_sim_args(m, x0, u, tau, steps)?;
    let mut states = Matrix::zeros(m.n, steps);
    let mut derivs = Matrix::zeros(m.n, steps);
    let mut x = x0.clone();
    for i in 0..steps {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: i });
        }
        let ui = input_at(m, u, i);
        let f = |s: &Vector| eval_derivative(m, s, ui.as_ref());
        let k1 = f(&x)?;
        if k1.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: i });
        }
        states.set_column(i, &x);
        derivs.set_column(i, &k1);
        if i + 1 == steps {
            break;
        }
        x = match method {
            Integrator::Euler => &x + &k1 * tau,
            Integrator::Rk4 => {
                let k2 = f(&(&x + &k1 * (tau / 2.0)))?;
                let k3 = f(&(&x + &k2 * (tau / 2.0)))?;
                let k4 = f(&(&x + &k3 * tau))?;
                &x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (tau / 6.0)
            }
        };
    }
    Ok(SampleSet {
        tau,
        y0: outputs(m, &states),
        x0: states,
        x1: Some(derivs),
        u0: input_at_all(m, u, steps),
    })
}

fn input_at_all(m: &HpdsModel, u: Option<&Matrix>, steps: usize) -> Option<Matrix> {
    match (u, &m.b) {
        (Some(u), _) => Some(u.columns(0, steps).into_owned()),
        (None, Some(b)) => Some(Matrix::zeros(b.ncols(), steps)),
        _ => None,
    }
}

/// Forward-difference model `x[i+1] = x[i] + τ 𝒜 x[i]^{k−1} + B u[i]`.
/// Returns `T = steps` states with their inputs and outputs.
pub fn simulate_discrete(m: &HpdsModel, x0: &Vector, u: Option<&Matrix>, tau: f64, steps: usize) -> Result<SampleSet> {
    check_sim_args(m, x0, u, tau, steps)?;
    let mut states = Matrix::zeros(m.n, steps);
    let mut x = x0.clone();
    for i in 0..steps {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: i });
        }
        states.set_column(i, &x);
        if i + 1 == steps {
            break;
        }
        let mut next = &x + m.dynamics.eval(&x)? * tau;
        if let (Some(b), Some(ui)) = (&m.b, input_at(m, u, i)) {
            next += b * ui;
        }
        x = next;
    }
    Ok(SampleSet { tau, y0: outputs(m, &states), x0: states, x1: None, u0: input_at_all(m, u, steps) })
}

/// Add i.i.d. `N(0, σ²)` noise to the measured channels `X1` and `Y0`.
pub fn add_noise(s: &SampleSet, sigma: f64, seed: u64) -> Result<SampleSet> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Argument(format!("noise level must be non-negative, got {sigma}")));
    }
    let mut out = s.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let mut g = GaussianStream::new(seed);
    for m in [&mut out.x1, &mut out.y0].into_iter().flatten() {
        for v in m.iter_mut() {
            *v += g.next_normal(sigma);
        }
    }
    Ok(out)
}
