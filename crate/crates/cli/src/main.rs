//! `hpds`: simulate, identify, analyze, decompose and benchmark homogeneous
//! polynomial dynamical systems.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use hpds_bench::{memory_report, records_to_csv, timing_report, BenchError, Scheme};
use hpds_core::io::{
    dynamics_to_json, matrix_from_json, matrix_to_json, model_from_json, model_to_json, numeric_csv, parse_json,
    read_text, tensor_from_json, to_json_string, trajectory_from_csv, trajectory_to_csv, vector_csv, write_atomic,
};
use hpds_core::rng::GaussianStream;
use hpds_core::{
    add_noise, build_tree, controllability, dense_dynamics, htd_decompose, identify_full, identify_ht, identify_io,
    identify_io_noisy, identify_tt, numerical_rank, observability, simulate_continuous, simulate_discrete,
    tt_decompose_tensor, Dynamics, Enumeration, Error, HpdsModel, Integrator, RankTolerance, Representation,
    Vector,
};

#[derive(Parser, Debug)]
#[command(name = "hpds", version, about = "Homogeneous polynomial dynamical systems toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a trajectory of a model
    Simulate(SimulateArgs),
    /// Fit a model to a trajectory
    Identify(IdentifyArgs),
    /// Controllability or observability report
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Tensor-train or hierarchical Tucker decomposition of a dense tensor
    Decompose(DecomposeArgs),
    /// Parameter-count and timing reports on random instances
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Rk4,
    Euler,
    Discrete,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Repr {
    Full,
    Tt,
    Ht,
}

impl From<Repr> for Representation {
    fn from(r: Repr) -> Self {
        match r {
            Repr::Full => Representation::Full,
            Repr::Tt => Representation::Tt,
            Repr::Ht => Representation::Ht,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DecomposeMethod {
    Tt,
    Ht,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EnumArg {
    Multisets,
    Tuples,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SchemeArg {
    Sym,
    Lowtt,
    Lowht,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Sym => Scheme::Symmetric,
            SchemeArg::Lowtt => Scheme::LowTt,
            SchemeArg::Lowht => Scheme::LowHt,
        }
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    x0: PathBuf,
    /// One row per sample, one column per input channel
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    tau: f64,
    #[arg(long)]
    steps: usize,
    #[arg(long, value_enum, default_value = "rk4")]
    method: Method,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct IdentifyArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    order: usize,
    #[arg(long, value_enum, default_value = "full")]
    repr: Repr,
    /// Use inputs and outputs instead of state derivatives
    #[arg(long)]
    io: bool,
    /// Least-squares fit for noisy outputs (with --io)
    #[arg(long, requires = "io")]
    noisy: bool,
    /// State dimension for --io; defaults to the numerical rank of the outputs
    #[arg(long, requires = "io")]
    state_dim: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum AnalyzeCommand {
    Controllability(ControllabilityArgs),
    Observability(ObservabilityArgs),
}

#[derive(Args, Debug)]
struct ControllabilityArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "B")]
    b: PathBuf,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    enumeration: Option<EnumArg>,
    /// Record wall time in the report
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ObservabilityArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "C")]
    c: PathBuf,
    /// Probe states, one per row
    #[arg(long, conflicts_with = "probes")]
    x: Option<PathBuf>,
    /// Number of random probe states
    #[arg(long)]
    probes: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    #[arg(long)]
    tensor: PathBuf,
    #[arg(long, value_enum)]
    method: DecomposeMethod,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum BenchCommand {
    Memory(BenchArgs),
    Time(BenchArgs),
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long)]
    k_max: usize,
    #[arg(long, default_value_t = 3)]
    k_min: usize,
    /// Explicit orders; overrides --k-min/--k-max
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["sym", "lowtt", "lowht"])]
    scheme: Vec<SchemeArg>,
    #[arg(long, default_value_t = 2)]
    rank_cap: usize,
    #[arg(long, default_value_t = 5)]
    m: usize,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Core(Error),
    /// Report already written; exit 2.
    Identifiability(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Core(e) => Failure::Core(e),
            BenchError::RankMismatch { .. } => Failure::Core(Error::Numeric(e.to_string())),
            BenchError::Argument(s) => Failure::Usage(s),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn tolerance(flag: Option<f64>) -> std::result::Result<RankTolerance, Failure> {
    let value = match flag {
        Some(v) => Some(v),
        None => match std::env::var("HPDS_TOL") {
            Ok(s) => Some(s.trim().parse::<f64>().map_err(|_| Failure::Usage(format!("HPDS_TOL={s:?} is not a number")))?),
            Err(_) => None,
        },
    };
    match value {
        None => Ok(RankTolerance::Default),
        Some(v) if v > 0.0 && v.is_finite() => Ok(RankTolerance::Relative(v)),
        Some(v) => Err(Failure::Usage(format!("tolerance must be positive, got {v}"))),
    }
}

fn read_json(path: &Path) -> hpds_core::Result<Value> {
    parse_json(&read_text(path)?)
}

fn write_json(path: &Path, v: &Value) -> hpds_core::Result<()> {
    write_atomic(path, to_json_string(v)?.as_bytes())
}

fn elapsed(start: Instant, enabled: bool) -> Value {
    if enabled {
        json!(start.elapsed().as_secs_f64() * 1e3)
    } else {
        Value::Null
    }
}

fn simulate(a: SimulateArgs) -> Outcome {
    let model = model_from_json(&read_json(&a.model)?)?;
    let x0 = vector_csv(&read_text(&a.x0)?)?;
    let u = a.input.as_deref().map(|p| numeric_csv(&read_text(p)?).map(|m| m.transpose())).transpose()?;
    let mut s = match a.method {
        Method::Rk4 => simulate_continuous(&model, &x0, u.as_ref(), a.tau, a.steps, Integrator::Rk4)?,
        Method::Euler => simulate_continuous(&model, &x0, u.as_ref(), a.tau, a.steps, Integrator::Euler)?,
        Method::Discrete => simulate_discrete(&model, &x0, u.as_ref(), a.tau, a.steps)?,
    };
    if let Some(sigma) = a.noise_std {
        s = add_noise(&s, sigma, a.seed)?;
    }
    write_atomic(&a.out, trajectory_to_csv(&s)?.as_bytes())?;
    Ok(())
}

fn convert(model: HpdsModel, repr: Representation, tol: RankTolerance) -> hpds_core::Result<HpdsModel> {
    if model.dynamics.representation() == repr {
        return Ok(model);
    }
    let dense = dense_dynamics(&model);
    let dynamics = match repr {
        Representation::Full => Dynamics::Full(dense),
        Representation::Tt => Dynamics::Tt(tt_decompose_tensor(&dense, tol)?),
        Representation::Ht => Dynamics::Ht(htd_decompose(&dense, &build_tree(model.k)?, tol)?),
    };
    HpdsModel::new(dynamics, model.b, model.c)
}

fn identify(a: IdentifyArgs) -> Outcome {
    let tol = tolerance(a.tol)?;
    let s = trajectory_from_csv(&read_text(&a.data)?)?;
    let k = a.order;
    let repr: Representation = a.repr.into();
    let result = if a.io {
        let y0 = s.y0.as_ref().ok_or_else(|| Failure::Usage("--io needs output columns y1.. in the data".into()))?;
        let n = match a.state_dim {
            Some(n) => n,
            None => numerical_rank(y0, tol)?,
        };
        let fitted = if a.noisy { identify_io_noisy(&s, k, n, tol) } else { identify_io(&s, k, n, tol) };
        fitted.and_then(|m| convert(m, repr, tol))
    } else {
        match repr {
            Representation::Full => identify_full(&s, k, tol),
            Representation::Tt => identify_tt(&s, k, tol),
            Representation::Ht => build_tree(k).and_then(|tree| identify_ht(&s, k, &tree, tol)),
        }
    };
    match result {
        Ok(model) => Ok(write_json(&a.out, &model_to_json(&model)?)?),
        Err(Error::Identifiability(report)) => {
            let v = json!({
                "status": "identifiability_failed",
                "report": serde_json::to_value(&*report).map_err(|e| Error::Format(e.to_string()))?,
            });
            write_json(&a.out, &v)?;
            Err(Failure::Identifiability(format!(
                "observed rank {} < required rank {}",
                report.observed_rank, report.required_rank
            )))
        }
        Err(e) => Err(e.into()),
    }
}

fn analyze_controllability(a: ControllabilityArgs) -> Outcome {
    let tol = tolerance(a.tol)?;
    let model = model_from_json(&read_json(&a.model)?)?;
    let b = matrix_from_json(&read_json(&a.b)?)?;
    let how = a.enumeration.map(|e| match e {
        EnumArg::Multisets => Enumeration::Multisets,
        EnumArg::Tuples => Enumeration::Tuples,
    });
    let start = Instant::now();
    let r = controllability(&model.dynamics, &b, tol, how)?;
    let ms = elapsed(start, a.timing);
    let v = json!({
        "rank": r.rank,
        "n": model.n,
        "verdict": r.verdict.as_str(),
        "iterations": r.iterations,
        "representation": model.dynamics.representation().as_str(),
        "elapsed_ms": ms,
        "basis": matrix_to_json(&r.basis)?,
    });
    Ok(write_json(&a.out, &v)?)
}

fn probe_states(a: &ObservabilityArgs, n: usize) -> std::result::Result<Vec<Vector>, Failure> {
    if let Some(p) = &a.x {
        let m = numeric_csv(&read_text(p)?)?;
        if m.ncols() == n {
            return Ok(m.row_iter().map(|r| r.transpose()).collect());
        }
        if m.nrows() == n && m.ncols() == 1 {
            return Ok(vec![m.column(0).into_owned()]);
        }
        return Err(Failure::Usage(format!("probe file is {}x{}, expected rows of length {n}", m.nrows(), m.ncols())));
    }
    let count = a.probes.unwrap_or(5);
    if count == 0 {
        return Err(Failure::Usage("--probes must be positive".into()));
    }
    let mut g = GaussianStream::new(a.seed);
    Ok((0..count).map(|_| Vector::from_fn(n, |_, _| g.next_standard())).collect())
}

fn analyze_observability(a: ObservabilityArgs) -> Outcome {
    let tol = tolerance(a.tol)?;
    let model = model_from_json(&read_json(&a.model)?)?;
    let c = matrix_from_json(&read_json(&a.c)?)?;
    let probes = probe_states(&a, model.n)?;
    let start = Instant::now();
    let mut depth = a.depth.unwrap_or(model.n.saturating_sub(1).max(1));
    let r = loop {
        match observability(&model.dynamics, &c, &probes, depth, tol) {
            // A defaulted depth backs off until the dense operators fit.
            Err(Error::Scale(_)) if a.depth.is_none() && depth > 1 => depth -= 1,
            other => break other?,
        }
    };
    let ms = elapsed(start, a.timing);
    let v = json!({
        "rank": r.matrix_rank,
        "n": r.n,
        "verdict": r.verdict_str(),
        "iterations": Value::Null,
        "representation": model.dynamics.representation().as_str(),
        "elapsed_ms": ms,
        "depth": r.depth,
        "probe_ranks": r.ranks,
        "probes": r.probe_states.iter().map(|x| x.iter().map(|&v| json!(v)).collect::<Value>()).collect::<Value>(),
    });
    Ok(write_json(&a.out, &v)?)
}

fn decompose(a: DecomposeArgs) -> Outcome {
    let tol = tolerance(a.tol)?;
    let t = tensor_from_json(&read_json(&a.tensor)?)?;
    let d = match a.method {
        DecomposeMethod::Tt => Dynamics::Tt(tt_decompose_tensor(&t, tol)?),
        DecomposeMethod::Ht => Dynamics::Ht(htd_decompose(&t, &build_tree(t.order())?, tol)?),
    };
    Ok(write_json(&a.out, &dynamics_to_json(&d)?)?)
}

fn bench(cmd: BenchCommand) -> Outcome {
    let (timed, a) = match cmd {
        BenchCommand::Memory(a) => (false, a),
        BenchCommand::Time(a) => (true, a),
    };
    let schemes: Vec<Scheme> = a.scheme.iter().map(|&s| s.into()).collect();
    let ks: Vec<usize> = a.k.clone().unwrap_or_else(|| (a.k_min..=a.k_max).collect());
    if ks.is_empty() {
        return Err(Failure::Usage("no orders selected".into()));
    }
    let mut records = Vec::new();
    if timed {
        for &k in &ks {
            records.extend(timing_report(&a.n, k..=k, &schemes, a.m, a.rank_cap, a.seed, a.repeats)?);
        }
    } else {
        for &n in &a.n {
            records.extend(memory_report(n, &ks, &schemes, a.rank_cap, a.seed)?);
        }
    }
    write_atomic(&a.out, records_to_csv(&records).as_bytes())?;
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Identify(a) => identify(a),
        Command::Analyze(AnalyzeCommand::Controllability(a)) => analyze_controllability(a),
        Command::Analyze(AnalyzeCommand::Observability(a)) => analyze_observability(a),
        Command::Decompose(a) => decompose(a),
        Command::Bench(b) => bench(b),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Identifiability(msg)) => {
            eprintln!("identifiability condition failed: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Numeric(_) | Error::Divergence { .. } => 3,
                Error::Scale(_) => 4,
                Error::Identifiability(_) => 2,
                _ => 1,
            })
        }
    }
}
