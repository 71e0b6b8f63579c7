//! Tensor-train format: chained order-3 cores `r_{p−1} × n_p × r_p` with
//! `r_0 = r_k = 1`.
//!
//! Cores are built from mode `k` backwards so that mode `k` stays the output
//! mode of the HPDS right-hand side.

use crate::error::{Error, Result};
use crate::linalg::{compact_svd, Matrix, RankTolerance, Vector};
use crate::tensor::{unfold, DenseTensor};

#[derive(Clone, Debug, PartialEq)]
pub struct TensorTrain {
    dims: Vec<usize>,
    ranks: Vec<usize>,
    cores: Vec<DenseTensor>,
}

impl TensorTrain {
    /// Assemble a train from explicit cores, checking the rank chain.
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::Shape("a tensor train needs at least one core".into()));
        }
        let mut dims = Vec::with_capacity(cores.len());
        let mut ranks = vec![1];
        for (p, core) in cores.iter().enumerate() {
            let d = core.dims();
            if d.len() != 3 {
                return Err(Error::Shape(format!("core {} has order {}, expected 3", p + 1, d.len())));
            }
            if d[0] != *ranks.last().unwrap() {
                return Err(Error::Shape(format!(
                    "core {} has left rank {} but the previous right rank is {}",
                    p + 1,
                    d[0],
                    ranks.last().unwrap()
                )));
            }
            dims.push(d[1]);
            ranks.push(d[2]);
        }
        if *ranks.last().unwrap() != 1 {
            return Err(Error::Shape("last TT-rank must be 1".into()));
        }
        Ok(TensorTrain { dims, ranks, cores })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// `r_0, …, r_k`.
    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn cubical_dim(&self) -> Option<usize> {
        let n = self.dims[0];
        self.dims.iter().all(|&d| d == n).then_some(n)
    }

    pub fn max_rank(&self) -> usize {
        self.ranks.iter().copied().max().unwrap_or(1)
    }

    /// Slice `𝒱^(p)_{:, j, :}` as an `r_{p−1} × r_p` matrix (both 0-based).
    fn slice(&self, p: usize, j: usize) -> Matrix {
        let (rl, n, rr) = (self.ranks[p], self.dims[p], self.ranks[p + 1]);
        let v = self.cores[p].values();
        Matrix::from_fn(rl, rr, |a, b| v[a + rl * (j + n * b)])
    }

    /// `Σ_j 𝒱^(p)_{:, j, :} w_j`.
    fn contract_core(&self, p: usize, w: &[f64]) -> Matrix {
        let (rl, n, rr) = (self.ranks[p], self.dims[p], self.ranks[p + 1]);
        let v = self.cores[p].values();
        let mut g = Matrix::zeros(rl, rr);
        for b in 0..rr {
            for (j, &wj) in w.iter().enumerate() {
                if wj == 0.0 {
                    continue;
                }
                let base = rl * (j + n * b);
                for a in 0..rl {
                    g[(a, b)] += v[base + a] * wj;
                }
            }
        }
        g
    }

    /// Last core as an `r_{k−1} × n_k` matrix.
    fn last_core_matrix(&self) -> Matrix {
        let k = self.order();
        Matrix::from_column_slice(self.ranks[k - 1], self.dims[k - 1], self.cores[k - 1].values())
    }
}

/// TT decomposition by sequential SVDs starting from the `k`-mode unfolding
/// `m` (`n_k × Π_{p<k} n_p`) of a tensor with dimensions `dims`.
pub fn tt_decompose(m: &Matrix, dims: &[usize], tol: RankTolerance) -> Result<TensorTrain> {
    let k = dims.len();
    if k < 2 {
        return Err(Error::Shape("TT decomposition needs order k >= 2".into()));
    }
    if dims.iter().any(|&n| n == 0) {
        return Err(Error::Shape(format!("dimensions must be positive, got {dims:?}")));
    }
    let lead: usize = dims[..k - 1].iter().product();
    if m.shape() != (dims[k - 1], lead) {
        return Err(Error::Shape(format!(
            "expected a {}x{} unfolding for dims {dims:?}, got {}x{}",
            dims[k - 1],
            lead,
            m.nrows(),
            m.ncols()
        )));
    }

    let mut cores: Vec<Option<DenseTensor>> = vec![None; k];
    let mut r_next = 1;
    let mut cur = m.clone();
    let mut step_tol = tol;
    for p in (1..k).rev() {
        let np = dims[p];
        let svd = compact_svd(&cur, step_tol)?;
        // Later factors carry rounding from discarded directions of the first
        // one, so the cut-off is frozen at the first matrix's threshold.
        if p == k - 1 && svd.threshold > 0.0 {
            step_tol = RankTolerance::Absolute(svd.threshold);
        }
        let (u, svt, r) = if svd.rank() == 0 {
            (Matrix::zeros(cur.nrows(), 1), Matrix::zeros(1, cur.ncols()), 1)
        } else {
            (svd.u.clone(), svd.s_vt(), svd.rank())
        };
        let ut = u.transpose();
        cores[p] = Some(DenseTensor::new(vec![r, np, r_next], ut.as_slice().to_vec())?);

        // Rows of the next matrix are indexed j_{p} + n_{p} · a (0-based modes).
        cur = if p > 1 {
            let n_prev = dims[p - 1];
            let inner: usize = dims[..p - 1].iter().product();
            let flat = svt.transpose();
            Matrix::from_column_slice(inner, n_prev * r, flat.as_slice()).transpose()
        } else {
            svt
        };
        r_next = r;
    }
    let first = cur.transpose();
    cores[0] = Some(DenseTensor::new(vec![1, dims[0], r_next], first.as_slice().to_vec())?);
    TensorTrain::new(cores.into_iter().map(Option::unwrap).collect())
}

/// [`tt_decompose`] applied to the `k`-mode unfolding of `t`.
pub fn tt_decompose_tensor(t: &DenseTensor, tol: RankTolerance) -> Result<TensorTrain> {
    if t.order() < 2 {
        return Err(Error::Shape("TT decomposition needs order k >= 2".into()));
    }
    tt_decompose(&unfold(t, &[t.order()])?, t.dims(), tol)
}

pub fn tt_reconstruct(t: &TensorTrain) -> DenseTensor {
    let k = t.order();
    let mut partial = Matrix::from_column_slice(t.dims[0], t.ranks[1], t.cores[0].values());
    for p in 1..k {
        let rows = partial.nrows();
        let mut next = Matrix::zeros(rows * t.dims[p], t.ranks[p + 1]);
        for j in 0..t.dims[p] {
            let block = &partial * t.slice(p, j);
            next.view_mut((j * rows, 0), (rows, t.ranks[p + 1])).copy_from(&block);
        }
        partial = next;
    }
    DenseTensor::new(t.dims.clone(), partial.as_slice().to_vec()).expect("TT dims are consistent")
}

/// `[Π_{p<k} (𝒱^(p) ×₂ x) 𝒱^(k)]ᵀ`.
pub fn tt_eval_hpds(t: &TensorTrain, x: &Vector) -> Result<Vector> {
    let n = t
        .cubical_dim()
        .ok_or_else(|| Error::Shape(format!("TT with dims {:?} is not cubical", t.dims)))?;
    if x.len() != n {
        return Err(Error::Shape(format!("state has length {} but TT dimension is {n}", x.len())));
    }
    let k = t.order();
    let mut acc = Matrix::from_element(1, 1, 1.0);
    for p in 0..k - 1 {
        acc = acc * t.contract_core(p, x.as_slice());
    }
    Ok((acc * t.last_core_matrix()).transpose().column(0).into_owned())
}

/// Contract mode `p` of the train with `args[p]` for `p < k` and return an
/// `n_k × Π c_p` matrix. At most one argument may have more than one column.
pub fn tt_contract(t: &TensorTrain, args: &[Matrix]) -> Result<Matrix> {
    let k = t.order();
    if args.len() != k - 1 {
        return Err(Error::Argument(format!("expected {} arguments, got {}", k - 1, args.len())));
    }
    if args.iter().filter(|a| a.ncols() > 1).count() > 1 {
        return Err(Error::Unsupported("at most one matrix argument is supported".into()));
    }
    for (p, a) in args.iter().enumerate() {
        if a.nrows() != t.dims[p] {
            return Err(Error::Shape(format!(
                "argument {} has {} rows but mode size is {}",
                p + 1,
                a.nrows(),
                t.dims[p]
            )));
        }
    }
    // Rows of `acc` enumerate the column index of the result.
    let mut acc = Matrix::from_element(1, 1, 1.0);
    for (p, a) in args.iter().enumerate() {
        let c = a.ncols();
        let rows = acc.nrows();
        let mut next = Matrix::zeros(rows * c, t.ranks[p + 1]);
        for col in 0..c {
            let g = t.contract_core(p, a.column(col).as_slice());
            next.view_mut((col * rows, 0), (rows, t.ranks[p + 1])).copy_from(&(&acc * g));
        }
        acc = next;
    }
    Ok((acc * t.last_core_matrix()).transpose())
}

/// `Σ_p r_{p−1} n_p r_p`.
pub fn tt_param_count(t: &TensorTrain) -> usize {
    (0..t.order()).map(|p| t.ranks[p] * t.dims[p] * t.ranks[p + 1]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::numerical_rank;
    use crate::tensor::{hpds_eval_full, kron_power_vec, almost_symmetrize, kron};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(dims: Vec<usize>, rng: &mut ChaCha8Rng) -> DenseTensor {
        DenseTensor::from_fn(dims, |_| rng.random_range(-1.0..1.0)).unwrap()
    }

    fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> Vector {
        Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_train(n: usize, k: usize, r: usize, rng: &mut ChaCha8Rng) -> TensorTrain {
        let cores = (0..k)
            .map(|p| {
                let rl = if p == 0 { 1 } else { r };
                let rr = if p == k - 1 { 1 } else { r };
                random_tensor(vec![rl, n, rr], rng)
            })
            .collect();
        TensorTrain::new(cores).unwrap()
    }

    #[test]
    fn rank_one_tensor_has_unit_ranks() {
        let v = [0.3, -1.2, 0.7];
        let t = DenseTensor::from_fn(vec![3; 3], |i| v[i[0]] * v[i[1]] * v[i[2]]).unwrap();
        let tt = tt_decompose_tensor(&t, RankTolerance::Default).unwrap();
        assert_eq!(tt.ranks(), &[1, 1, 1, 1]);
        assert!(tt_reconstruct(&tt).relative_error(&t).unwrap() < 1e-14);
    }

    #[test]
    fn zero_tensor_uses_unit_zero_cores() {
        let t = DenseTensor::zeros(vec![2; 4]).unwrap();
        let tt = tt_decompose_tensor(&t, RankTolerance::Default).unwrap();
        assert_eq!(tt.ranks(), &[1, 1, 1, 1, 1]);
        assert!(tt.cores().iter().skip(1).all(|c| c.values().iter().all(|&v| v == 0.0)));
        assert_eq!(numerical_rank(&unfold(&t, &[1]).unwrap(), RankTolerance::Default).unwrap(), 0);
        assert!(tt_reconstruct(&tt).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn random_round_trip_and_unfolding_ranks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for dims in [vec![2, 2, 2, 2], vec![2, 3, 4], vec![3, 2, 2, 3, 2], vec![4, 5]] {
            let t = random_tensor(dims.clone(), &mut rng);
            let tt = tt_decompose_tensor(&t, RankTolerance::Default).unwrap();
            assert!(tt_reconstruct(&tt).relative_error(&t).unwrap() < 1e-10);
            for p in 1..dims.len() {
                let modes: Vec<usize> = (1..=p).collect();
                let r = numerical_rank(&unfold(&t, &modes).unwrap(), RankTolerance::Default).unwrap();
                assert_eq!(tt.ranks()[p], r, "dims {dims:?} p {p}");
            }
        }
    }

    #[test]
    fn low_rank_construction_recovers_ranks() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (n, k) in [(2, 4), (3, 4), (2, 6), (3, 5)] {
            let src = random_train(n, k, 2, &mut rng);
            let dense = tt_reconstruct(&src);
            let tt = tt_decompose_tensor(&dense, RankTolerance::Relative(1e-10)).unwrap();
            for p in 1..k {
                let modes: Vec<usize> = (1..=p).collect();
                let r = numerical_rank(&unfold(&dense, &modes).unwrap(), RankTolerance::Relative(1e-10)).unwrap();
                assert_eq!(tt.ranks()[p], r, "n {n} k {k} p {p} ranks {:?}", tt.ranks());
                assert!(r <= 2);
            }
            assert!(tt_reconstruct(&tt).relative_error(&dense).unwrap() < 1e-10);
        }
    }

    #[test]
    fn decompose_rejects_bad_shapes() {
        assert!(matches!(tt_decompose(&Matrix::zeros(2, 3), &[2, 2], RankTolerance::Default), Err(Error::Shape(_))));
        assert!(matches!(tt_decompose(&Matrix::zeros(2, 1), &[2], RankTolerance::Default), Err(Error::Shape(_))));
    }

    #[test]
    fn unit_rank_train_is_an_outer_product() {
        let v = [1.0, 2.0];
        let w = [3.0, -1.0, 0.5];
        let u = [-2.0, 4.0];
        let tt = TensorTrain::new(vec![
            DenseTensor::new(vec![1, 2, 1], v.to_vec()).unwrap(),
            DenseTensor::new(vec![1, 3, 1], w.to_vec()).unwrap(),
            DenseTensor::new(vec![1, 2, 1], u.to_vec()).unwrap(),
        ])
        .unwrap();
        let dense = tt_reconstruct(&tt);
        let expected = DenseTensor::from_fn(vec![2, 3, 2], |i| v[i[0]] * w[i[1]] * u[i[2]]).unwrap();
        assert_eq!(dense, expected);
    }

    #[test]
    fn reconstruction_matches_slice_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tt = random_train(2, 3, 2, &mut rng);
        let dense = tt_reconstruct(&tt);
        for j1 in 0..2 {
            for j2 in 0..2 {
                for j3 in 0..2 {
                    let prod = tt.slice(0, j1) * tt.slice(1, j2) * tt.slice(2, j3);
                    assert!((prod[(0, 0)] - dense.values()[dense.offset(&[j1, j2, j3])]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn eval_matches_full() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = almost_symmetrize(&random_tensor(vec![3; 4], &mut rng)).unwrap();
        let tt = tt_decompose_tensor(&t, RankTolerance::Default).unwrap();
        let dense = tt_reconstruct(&tt);
        for _ in 0..20 {
            let x = random_vector(3, &mut rng);
            let d = tt_eval_hpds(&tt, &x).unwrap() - hpds_eval_full(&dense, &x).unwrap();
            assert!(d.amax() < 1e-10);
        }
        assert_eq!(tt_eval_hpds(&tt, &Vector::zeros(3)).unwrap(), Vector::zeros(3));
        assert!(matches!(tt_eval_hpds(&tt, &Vector::zeros(2)), Err(Error::Shape(_))));
    }

    #[test]
    fn linear_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_tensor(vec![3, 3], &mut rng);
        let tt = tt_decompose_tensor(&a, RankTolerance::Default).unwrap();
        let x = random_vector(3, &mut rng);
        let m = Matrix::from_column_slice(3, 3, a.values());
        assert!((tt_eval_hpds(&tt, &x).unwrap() - m.transpose() * &x).amax() < 1e-12);
        // k = 2 parameter count: n r + r n.
        let r = tt.ranks()[1];
        assert_eq!(tt_param_count(&tt), 3 * r + r * 3);
    }

    #[test]
    fn contract_with_identity_matches_kronecker_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (n, k) = (3, 4);
        let t = random_tensor(vec![n; k], &mut rng);
        let tt = tt_decompose_tensor(&t, RankTolerance::Default).unwrap();
        let ak = unfold(&t, &[k]).unwrap();
        let x = random_vector(n, &mut rng);
        let xm = Matrix::from_column_slice(n, 1, x.as_slice());
        for q in 1..k {
            // Kronecker factor z_i multiplies mode k − i.
            let mut z = vec![xm.clone(); k - 1];
            z[q - 1] = Matrix::identity(n, n);
            let mut kr = Matrix::from_element(1, 1, 1.0);
            for zi in &z {
                kr = kron(&kr, zi);
            }
            let dense = &ak * kr;
            let reversed: Vec<Matrix> = z.iter().rev().cloned().collect();
            let got = tt_contract(&tt, &reversed).unwrap();
            assert!((got - dense).amax() < 1e-10);
        }
        let all_x = vec![xm.clone(); k - 1];
        let col = tt_contract(&tt, &all_x).unwrap();
        assert!((col.column(0) - tt_eval_hpds(&tt, &x).unwrap()).amax() < 1e-14);
        let dense = &ak * kron_power_vec(&x, k - 1);
        assert!((col.column(0) - dense).amax() < 1e-10);
    }

    #[test]
    fn contract_with_distinct_vectors_matches_mode_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = random_tensor(vec![3; 3], &mut rng);
        let tt = tt_decompose_tensor(&t, RankTolerance::Default).unwrap();
        let b1 = random_vector(3, &mut rng);
        let b2 = random_vector(3, &mut rng);
        let args = vec![Matrix::from_column_slice(3, 1, b1.as_slice()), Matrix::from_column_slice(3, 1, b2.as_slice())];
        let got = tt_contract(&tt, &args).unwrap();
        let expected = crate::tensor::contract_leading(&t, &[b1.as_slice(), b2.as_slice()]).unwrap();
        assert!((got.column(0) - Vector::from_vec(expected)).amax() < 1e-12);

        let two = vec![Matrix::identity(3, 3), Matrix::identity(3, 3)];
        assert!(matches!(tt_contract(&tt, &two), Err(Error::Unsupported(_))));
        assert!(matches!(tt_contract(&tt, &args[..1]), Err(Error::Argument(_))));
    }

    #[test]
    fn contraction_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let tt = random_train(3, 4, 2, &mut rng);
        let mk = |rng: &mut ChaCha8Rng| Matrix::from_fn(3, 1, |_, _| rng.random_range(-1.0..1.0));
        let base: Vec<Matrix> = (0..3).map(|_| mk(&mut rng)).collect();
        for slot in 0..3 {
            let u = mk(&mut rng);
            let v = mk(&mut rng);
            let alpha = 1.7;
            let with = |m: Matrix| {
                let mut a = base.clone();
                a[slot] = m;
                tt_contract(&tt, &a).unwrap()
            };
            let lhs = with(&u * alpha + &v);
            let rhs = with(u.clone()) * alpha + with(v.clone());
            assert!((lhs - rhs).amax() < 1e-11);
        }
    }

    #[test]
    fn parameter_counts() {
        let unit = TensorTrain::new((0..5).map(|_| DenseTensor::zeros(vec![1, 2, 1]).unwrap()).collect()).unwrap();
        assert_eq!(tt_param_count(&unit), 10);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let r = rng.random_range(1..4);
            let tt = random_train(3, 5, r, &mut rng);
            assert!(tt_param_count(&tt) <= tt.order() * 3 * tt.max_rank().pow(2));
        }
    }

    #[test]
    fn new_validates_rank_chain() {
        let bad = vec![DenseTensor::zeros(vec![1, 2, 2]).unwrap(), DenseTensor::zeros(vec![3, 2, 1]).unwrap()];
        assert!(matches!(TensorTrain::new(bad), Err(Error::Shape(_))));
        let open = vec![DenseTensor::zeros(vec![1, 2, 2]).unwrap()];
        assert!(matches!(TensorTrain::new(open), Err(Error::Shape(_))));
    }
}
