//! Dense linear-algebra kernels: compact SVD with a deterministic sign
//! convention, numerical rank, Moore-Penrose pseudo-inverse, minimum-norm
//! least squares and principal-angle subspace comparison.
//!
//! The SVD itself is delegated to `nalgebra`; this module owns truncation,
//! ordering and sign normalisation so that every caller sees the same factors
//! for the same input.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Column-major dense matrix. Unfoldings, data matrices and system matrices
/// all use this type.
pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Threshold used to decide which singular values count towards the rank.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum RankTolerance {
    /// `max(rows, cols) * f64::EPSILON * sigma_max`.
    #[default]
    Default,
    /// `value * sigma_max`.
    Relative(f64),
    /// `value`, independent of scale.
    Absolute(f64),
}

impl RankTolerance {
    pub fn threshold(&self, rows: usize, cols: usize, sigma_max: f64) -> f64 {
        match *self {
            RankTolerance::Default => rows.max(cols) as f64 * f64::EPSILON * sigma_max,
            RankTolerance::Relative(v) => v * sigma_max,
            RankTolerance::Absolute(v) => v,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RankTolerance::Relative(v) | RankTolerance::Absolute(v) if !(v > 0.0 && v.is_finite()) => {
                Err(Error::Argument(format!("rank tolerance must be positive and finite, got {v}")))
            }
            _ => Ok(()),
        }
    }
}

/// `M ≈ U diag(s) Vᵀ` keeping only singular values above the threshold.
#[derive(Clone, Debug)]
pub struct CompactSvd {
    pub u: Matrix,
    /// Strictly positive, non-increasing.
    pub s: Vec<f64>,
    pub v: Matrix,
    /// Largest singular value of the source matrix (0 for the zero matrix).
    pub sigma_max: f64,
    /// Threshold that was applied.
    pub threshold: f64,
}

impl CompactSvd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Smallest retained singular value, or 0 when nothing was retained.
    pub fn margin(&self) -> f64 {
        self.s.last().copied().unwrap_or(0.0)
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, s) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }

    /// `diag(s) Vᵀ`, the right factor used by the sequential decompositions.
    pub fn s_vt(&self) -> Matrix {
        let mut svt = self.v.transpose();
        for (i, s) in self.s.iter().enumerate() {
            svt.row_mut(i).scale_mut(*s);
        }
        svt
    }
}

fn check_finite(m: &Matrix) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric("matrix contains non-finite entries".into()))
    }
}

pub fn compact_svd(m: &Matrix, tol: RankTolerance) -> Result<CompactSvd> {
    tol.validate()?;
    check_finite(m)?;
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(CompactSvd {
            u: Matrix::zeros(rows, 0),
            s: Vec::new(),
            v: Matrix::zeros(cols, 0),
            sigma_max: 0.0,
            threshold: 0.0,
        });
    }

    let svd = m.clone().svd(true, true);
    let (u_full, vt_full) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Numeric("SVD did not produce singular vectors".into())),
    };
    let sv = svd.singular_values;
    if sv.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("SVD produced non-finite singular values".into()));
    }

    // Descending order; ties broken by original position so the result is stable.
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));

    let sigma_max = sv[order[0]].max(0.0);
    let threshold = tol.threshold(rows, cols, sigma_max);
    let kept: Vec<usize> = order.into_iter().filter(|&i| sv[i] > threshold && sv[i] > 0.0).collect();

    let r = kept.len();
    let mut u = Matrix::zeros(rows, r);
    let mut v = Matrix::zeros(cols, r);
    let mut s = Vec::with_capacity(r);
    for (dst, &src) in kept.iter().enumerate() {
        u.set_column(dst, &u_full.column(src));
        v.set_column(dst, &vt_full.row(src).transpose());
        s.push(sv[src]);

        // Sign convention: the largest-magnitude entry of each U column is positive.
        let mut best = 0;
        for i in 1..rows {
            if u[(i, dst)].abs() > u[(best, dst)].abs() {
                best = i;
            }
        }
        if u[(best, dst)] < 0.0 {
            u.column_mut(dst).neg_mut();
            v.column_mut(dst).neg_mut();
        }
    }

    Ok(CompactSvd { u, s, v, sigma_max, threshold })
}

pub fn numerical_rank(m: &Matrix, tol: RankTolerance) -> Result<usize> {
    Ok(compact_svd(m, tol)?.rank())
}

/// Orthonormal basis of the column space.
pub fn orth(m: &Matrix, tol: RankTolerance) -> Result<Matrix> {
    Ok(compact_svd(m, tol)?.u)
}

/// Moore-Penrose pseudo-inverse through the compact SVD.
pub fn pinv(m: &Matrix, tol: RankTolerance) -> Result<Matrix> {
    let svd = compact_svd(m, tol)?;
    Ok(pinv_from_svd(&svd))
}

pub(crate) fn pinv_from_svd(svd: &CompactSvd) -> Matrix {
    let mut v_sinv = svd.v.clone();
    for (j, s) in svd.s.iter().enumerate() {
        v_sinv.column_mut(j).scale_mut(1.0 / s);
    }
    v_sinv * svd.u.transpose()
}

/// Minimum-norm minimiser of `‖A X − B‖_F`.
pub fn least_squares(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.nrows() != b.nrows() {
        return Err(Error::Shape(format!(
            "least squares needs equal row counts, got {} and {}",
            a.nrows(),
            b.nrows()
        )));
    }
    Ok(pinv(a, RankTolerance::Default)? * b)
}

fn check_orthonormal(u: &Matrix, name: &str) -> Result<()> {
    let gram = u.transpose() * u;
    let dev = (gram - Matrix::identity(u.ncols(), u.ncols())).amax();
    if dev > 1e-8 {
        return Err(Error::Argument(format!("{name} does not have orthonormal columns (deviation {dev:.3e})")));
    }
    Ok(())
}

/// Sine of the largest principal angle between two orthonormal bases of equal
/// dimension.
pub fn largest_principal_angle_sin(u1: &Matrix, u2: &Matrix) -> Result<f64> {
    if u1.nrows() != u2.nrows() {
        return Err(Error::Shape("bases live in spaces of different dimension".into()));
    }
    check_orthonormal(u1, "first basis")?;
    check_orthonormal(u2, "second basis")?;
    if u2.ncols() == 0 {
        return Ok(0.0);
    }
    let residual = u2 - u1 * (u1.transpose() * u2);
    let s = residual.singular_values();
    Ok(s.iter().cloned().fold(0.0, f64::max).min(1.0))
}

/// True iff both bases have the same dimension and the largest principal angle
/// between their spans is at most `tol` radians.
pub fn subspace_equal(u1: &Matrix, u2: &Matrix, tol: f64) -> Result<bool> {
    let sin = largest_principal_angle_sin(u1, u2)?;
    if u1.ncols() != u2.ncols() {
        return Ok(false);
    }
    Ok(sin.asin() <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn identity_svd() {
        let svd = compact_svd(&Matrix::identity(3, 3), RankTolerance::Default).unwrap();
        assert_eq!(svd.s, vec![1.0, 1.0, 1.0]);
        assert!((svd.u.abs() - Matrix::identity(3, 3)).amax() < 1e-15);
        assert!((svd.v.abs() - Matrix::identity(3, 3)).amax() < 1e-15);
    }

    #[test]
    fn rank_one_outer_product() {
        let u = Vector::from_vec(vec![1.0, -2.0, 2.0]);
        let v = Vector::from_vec(vec![3.0, 4.0]);
        let m = &u * v.transpose();
        let svd = compact_svd(&m, RankTolerance::Default).unwrap();
        assert_eq!(svd.rank(), 1);
        assert!((svd.s[0] - 15.0).abs() < 1e-12);
    }

    #[test]
    fn random_reconstruction_and_orthonormality() {
        let m = random(5, 3, 1);
        let svd = compact_svd(&m, RankTolerance::Default).unwrap();
        assert_eq!(svd.rank(), 3);
        assert!((svd.reconstruct() - &m).norm() / m.norm() <= 1e-12);
        assert!((svd.u.transpose() * &svd.u - Matrix::identity(3, 3)).amax() <= 1e-10);
        assert!((svd.v.transpose() * &svd.v - Matrix::identity(3, 3)).amax() <= 1e-10);
        assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
        for j in 0..svd.rank() {
            let col = svd.u.column(j);
            let big = col.iter().cloned().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn zero_matrix_has_empty_factors() {
        let svd = compact_svd(&Matrix::zeros(4, 3), RankTolerance::Default).unwrap();
        assert_eq!(svd.rank(), 0);
        assert_eq!(svd.u.shape(), (4, 0));
        assert_eq!(svd.v.shape(), (3, 0));
        assert_eq!(pinv(&Matrix::zeros(4, 3), RankTolerance::Default).unwrap(), Matrix::zeros(3, 4));
    }

    #[test]
    fn non_finite_is_rejected() {
        let mut m = Matrix::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(compact_svd(&m, RankTolerance::Default), Err(Error::Numeric(_))));
    }

    #[test]
    fn deterministic_factors() {
        let m = random(6, 4, 9);
        let a = compact_svd(&m, RankTolerance::Default).unwrap();
        let b = compact_svd(&m, RankTolerance::Default).unwrap();
        assert_eq!(a.u, b.u);
        assert_eq!(a.v, b.v);
        assert_eq!(a.s, b.s);
    }

    #[test]
    fn rank_of_duplicated_column() {
        let u = random(4, 1, 3);
        let m = Matrix::from_columns(&[u.column(0).into_owned(), u.column(0) * 2.0]);
        assert_eq!(numerical_rank(&m, RankTolerance::Default).unwrap(), 1);
        assert_eq!(numerical_rank(&Matrix::identity(5, 5), RankTolerance::Default).unwrap(), 5);
    }

    #[test]
    fn pinv_of_invertible_is_inverse() {
        let m = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let inv = m.clone().try_inverse().unwrap();
        assert!((pinv(&m, RankTolerance::Default).unwrap() - inv).amax() < 1e-14);
    }

    #[test]
    fn penrose_identities() {
        let m = random(4, 6, 5);
        let p = pinv(&m, RankTolerance::Default).unwrap();
        assert!((&m * &p * &m - &m).amax() <= 1e-10);
        assert!((&p * &m * &p - &p).amax() <= 1e-10);
        let mp = &m * &p;
        assert!((&mp - mp.transpose()).amax() <= 1e-10);
        let pm = &p * &m;
        assert!((&pm - pm.transpose()).amax() <= 1e-10);
    }

    #[test]
    fn pinv_is_involutive_on_full_rank() {
        let m = random(5, 3, 11);
        let pp = pinv(&pinv(&m, RankTolerance::Default).unwrap(), RankTolerance::Default).unwrap();
        assert!((pp - m).amax() <= 1e-10);
    }

    #[test]
    fn rank_invariant_under_permutation_and_rotation() {
        // rank-2 matrix 5x4
        let m = random(5, 2, 21) * random(2, 4, 22);
        let r = numerical_rank(&m, RankTolerance::Default).unwrap();
        assert_eq!(r, 2);
        let q = orth(&random(5, 5, 23), RankTolerance::Default).unwrap();
        assert_eq!(numerical_rank(&(&q * &m), RankTolerance::Default).unwrap(), r);
        let mut permuted = m.clone();
        permuted.swap_columns(0, 3);
        permuted.swap_rows(1, 4);
        assert_eq!(numerical_rank(&permuted, RankTolerance::Default).unwrap(), r);
    }

    #[test]
    fn subspace_rotation_invariance() {
        let u = orth(&random(6, 3, 31), RankTolerance::Default).unwrap();
        let q = orth(&random(3, 3, 32), RankTolerance::Default).unwrap();
        assert!(subspace_equal(&u, &(&u * q), 1e-12).unwrap());
        let e1 = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let e2 = Matrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert!(!subspace_equal(&e1, &e2, 1e-6).unwrap());
        assert!(matches!(subspace_equal(&(e1 * 2.0), &e2, 1e-6), Err(Error::Argument(_))));
    }

    #[test]
    fn least_squares_cases() {
        let a = random(3, 3, 41);
        let x = random(3, 2, 42);
        let b = &a * &x;
        assert!((least_squares(&a, &b).unwrap() - x).amax() < 1e-10);

        let a = random(10, 3, 43);
        let b = random(10, 2, 44);
        let sol = least_squares(&a, &b).unwrap();
        let residual = &b - &a * &sol;
        assert!((a.transpose() * residual).amax() <= 1e-10);

        let zero = Matrix::zeros(4, 3);
        assert_eq!(least_squares(&zero, &random(4, 2, 45)).unwrap(), Matrix::zeros(3, 2));
        assert!(matches!(least_squares(&zero, &random(3, 2, 46)), Err(Error::Shape(_))));
    }

    #[test]
    fn tolerance_modes() {
        let m = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 1e-6, 1e-12]));
        assert_eq!(numerical_rank(&m, RankTolerance::Default).unwrap(), 3);
        assert_eq!(numerical_rank(&m, RankTolerance::Relative(1e-9)).unwrap(), 2);
        assert_eq!(numerical_rank(&m, RankTolerance::Absolute(1e-3)).unwrap(), 1);
        assert!(compact_svd(&m, RankTolerance::Relative(-1.0)).is_err());
    }
}
