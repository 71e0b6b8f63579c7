//! Random test instances, parameter accounting and controllability timing.
//!
//! Three generators are provided: a symmetrised uniform tensor, a random
//! tensor train with capped ranks, and a random hierarchical Tucker tensor
//! with capped ranks. Each instance carries its dense, TT and HT forms.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use hpds_core::io::format_f64;
use hpds_core::{
    build_tree, controllability_full, controllability_ht_with, controllability_tt_with, htd_decompose, htd_param_count,
    htd_reconstruct, symmetrize, tt_decompose_tensor, tt_param_count, tt_reconstruct, DenseTensor, DimensionTree,
    Enumeration, HTucker, Matrix, RankTolerance, Representation, TensorTrain,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense instances larger than this are refused.
pub const MAX_DENSE_ENTRIES: usize = 10_000_000;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] hpds_core::Error),

    #[error("rank mismatch on {scheme} n={n} k={k}: full={full}, tt={tt}, ht={ht}")]
    RankMismatch { scheme: &'static str, n: usize, k: usize, full: usize, tt: usize, ht: usize },

    #[error("invalid argument: {0}")]
    Argument(String),
}

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    Symmetric,
    LowTt,
    LowHt,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Symmetric, Scheme::LowTt, Scheme::LowHt];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Symmetric => "symmetric",
            Scheme::LowTt => "low_tt",
            Scheme::LowHt => "low_ht",
        }
    }

    /// Selection rule for the reachability iteration: multisets only when the
    /// generated tensor is symmetric.
    pub fn enumeration(&self) -> Enumeration {
        match self {
            Scheme::Symmetric => Enumeration::Multisets,
            _ => Enumeration::Tuples,
        }
    }
}

impl FromStr for Scheme {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sym" | "symmetric" => Ok(Scheme::Symmetric),
            "lowtt" | "low_tt" => Ok(Scheme::LowTt),
            "lowht" | "low_ht" => Ok(Scheme::LowHt),
            other => Err(BenchError::Argument(format!("unknown scheme {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub scheme: Scheme,
    pub dense: DenseTensor,
    pub tt: TensorTrain,
    pub ht: HTucker,
}

fn uniform(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn guard(n: usize, k: usize) -> Result<()> {
    match n.checked_pow(k as u32) {
        Some(e) if e <= MAX_DENSE_ENTRIES => Ok(()),
        _ => Err(hpds_core::Error::Scale(format!("{n}^{k} entries exceed {MAX_DENSE_ENTRIES}")).into()),
    }
}

fn capped_rank(n: usize, modes: usize, k: usize, cap: usize) -> usize {
    let lim = |m: usize| n.checked_pow(m as u32).unwrap_or(usize::MAX);
    cap.min(lim(modes)).min(lim(k - modes))
}

fn random_tt(n: usize, k: usize, cap: usize, rng: &mut ChaCha8Rng) -> Result<TensorTrain> {
    let ranks: Vec<usize> = (0..=k).map(|p| if p == 0 || p == k { 1 } else { capped_rank(n, p, k, cap) }).collect();
    let cores = (0..k)
        .map(|p| {
            let dims = vec![ranks[p], n, ranks[p + 1]];
            DenseTensor::new(dims, uniform(rng, ranks[p] * n * ranks[p + 1]))
        })
        .collect::<hpds_core::Result<Vec<_>>>()?;
    Ok(TensorTrain::new(cores)?)
}

fn random_ht(n: usize, k: usize, cap: usize, tree: &DimensionTree, rng: &mut ChaCha8Rng) -> Result<HTucker> {
    let rank_of = |i: usize| {
        if i == 0 {
            1
        } else {
            capped_rank(n, tree.node(i).modes.len(), k, cap)
        }
    };
    let blocks = (0..tree.len())
        .map(|i| match tree.node(i).children {
            None => Matrix::from_vec(n, rank_of(i), uniform(rng, n * rank_of(i))),
            Some((l, r)) => {
                let rows = rank_of(l) * rank_of(r);
                Matrix::from_vec(rows, rank_of(i), uniform(rng, rows * rank_of(i)))
            }
        })
        .collect();
    Ok(HTucker::new(tree.clone(), vec![n; k], blocks)?)
}

/// Deterministic per `(scheme, n, k, rank_cap, seed)`.
pub fn gen_instance(scheme: Scheme, n: usize, k: usize, rank_cap: usize, seed: u64) -> Result<Instance> {
    if rank_cap < 1 {
        return Err(BenchError::Argument("rank_cap must be at least 1".into()));
    }
    if n < 1 || k < 2 {
        return Err(BenchError::Argument(format!("need n >= 1 and k >= 2, got n={n}, k={k}")));
    }
    guard(n, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tree = build_tree(k)?;
    let tol = RankTolerance::Default;
    let inst = match scheme {
        Scheme::Symmetric => {
            let raw = DenseTensor::new(vec![n; k], uniform(&mut rng, n.pow(k as u32)))?;
            let dense = symmetrize(&raw)?;
            let tt = tt_decompose_tensor(&dense, tol)?;
            let ht = htd_decompose(&dense, &tree, tol)?;
            Instance { scheme, dense, tt, ht }
        }
        Scheme::LowTt => {
            let tt = random_tt(n, k, rank_cap, &mut rng)?;
            let dense = tt_reconstruct(&tt);
            let ht = htd_decompose(&dense, &tree, tol)?;
            Instance { scheme, dense, tt, ht }
        }
        Scheme::LowHt => {
            let ht = random_ht(n, k, rank_cap, &tree, &mut rng)?;
            let dense = htd_reconstruct(&ht);
            let tt = tt_decompose_tensor(&dense, tol)?;
            Instance { scheme, dense, tt, ht }
        }
    };
    Ok(inst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub scheme: Scheme,
    pub n: usize,
    pub k: usize,
    pub repr: Representation,
    pub params: usize,
    /// Median wall time; absent in memory reports.
    pub elapsed_ms: Option<f64>,
    /// Controllability rank; absent in memory reports.
    pub rank: Option<usize>,
    pub seed: u64,
}

pub const CSV_HEADER: &str = "scheme,n,k,repr,params,elapsed_ms,rank,seed";

pub fn records_to_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let elapsed = r.elapsed_ms.map(format_f64).unwrap_or_default();
        let rank = r.rank.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.scheme.as_str(),
            r.n,
            r.k,
            r.repr.as_str(),
            r.params,
            elapsed,
            rank,
            r.seed
        );
    }
    out
}

pub fn param_counts(inst: &Instance) -> [(Representation, usize); 3] {
    [
        (Representation::Full, inst.dense.len()),
        (Representation::Tt, tt_param_count(&inst.tt)),
        (Representation::Ht, htd_param_count(&inst.ht)),
    ]
}

/// Exact parameter counts per representation for every `(scheme, k)`.
pub fn memory_report(n: usize, k_list: &[usize], schemes: &[Scheme], rank_cap: usize, seed: u64) -> Result<Vec<BenchRecord>> {
    let mut out = Vec::new();
    for &scheme in schemes {
        for &k in k_list {
            let inst = gen_instance(scheme, n, k, rank_cap, seed)?;
            for (repr, params) in param_counts(&inst) {
                out.push(BenchRecord { scheme, n, k, repr, params, elapsed_ms: None, rank: None, seed });
            }
        }
    }
    Ok(out)
}

/// Input matrix for a timed instance, drawn from its own stream.
pub fn input_matrix(n: usize, m: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    Matrix::from_vec(n, m, uniform(&mut rng, n * m))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        0.5 * (v[h - 1] + v[h])
    }
}

fn timed<F: FnMut() -> hpds_core::Result<usize>>(repeats: usize, mut f: F) -> Result<(f64, usize)> {
    let mut times = Vec::with_capacity(repeats);
    let mut rank = 0;
    for _ in 0..repeats {
        let start = Instant::now();
        rank = f()?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok((median(times), rank))
}

/// Median-of-`repeats` controllability time per representation for one
/// instance; errors if the three ranks disagree.
pub fn time_instance(inst: &Instance, b: &Matrix, repeats: usize, seed: u64) -> Result<Vec<BenchRecord>> {
    if repeats < 1 {
        return Err(BenchError::Argument("repeats must be at least 1".into()));
    }
    let tol = RankTolerance::Default;
    let how = inst.scheme.enumeration();
    let full = timed(repeats, || Ok(controllability_full(&inst.dense, b, tol)?.rank))?;
    let tt = timed(repeats, || Ok(controllability_tt_with(&inst.tt, b, tol, how)?.rank))?;
    let ht = timed(repeats, || Ok(controllability_ht_with(&inst.ht, b, tol, how)?.rank))?;
    let (n, k) = (inst.dense.dims()[0], inst.dense.order());
    if full.1 != tt.1 || full.1 != ht.1 {
        return Err(BenchError::RankMismatch { scheme: inst.scheme.as_str(), n, k, full: full.1, tt: tt.1, ht: ht.1 });
    }
    Ok(param_counts(inst)
        .into_iter()
        .zip([full, tt, ht])
        .map(|((repr, params), (ms, rank))| BenchRecord {
            scheme: inst.scheme,
            n,
            k,
            repr,
            params,
            elapsed_ms: Some(ms),
            rank: Some(rank),
            seed,
        })
        .collect())
}

/// Instances whose dense form would exceed the guard are skipped.
pub fn timing_report(
    n_list: &[usize],
    k_range: std::ops::RangeInclusive<usize>,
    schemes: &[Scheme],
    m: usize,
    rank_cap: usize,
    seed: u64,
    repeats: usize,
) -> Result<Vec<BenchRecord>> {
    let mut out = Vec::new();
    for &scheme in schemes {
        for &n in n_list {
            for k in k_range.clone() {
                if guard(n, k).is_err() {
                    continue;
                }
                let inst = gen_instance(scheme, n, k, rank_cap, seed)?;
                out.extend(time_instance(&inst, &input_matrix(n, m, seed), repeats, seed)?);
            }
        }
    }
    Ok(out)
}
