//! Small dense linear-algebra helpers on top of nalgebra.
//!
//! Everything here works on dynamically sized `f64` matrices; the problems in
//! this crate are desk-sized (a handful of states), so clarity wins over
//! blocking or allocation tricks.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Eigenvalue floor for positive-definiteness checks (relative to the
/// largest eigenvalue in [`require_spd`]).
pub const PD_FLOOR: f64 = 1e-10;

/// Relative singular-value threshold for PBH rank tests.
pub const RANK_TOL: f64 = 1e-8;

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn ensure_dims(what: &str, m: &Mat, rows: usize, cols: usize) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::DimensionMismatch {
            what: what.to_string(),
            expected: (rows, cols),
            found: (m.nrows(), m.ncols()),
        });
    }
    Ok(())
}

/// Eigenvalues of the symmetric part, ascending.
pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn min_eigenvalue(m: &Mat) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub fn max_eigenvalue(m: &Mat) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(0.0)
}

/// Spectral (operator 2-) norm.
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |acc, s| acc.max(*s))
}

pub fn spectral_radius(a: &Mat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.complex_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, l| acc.max(l.norm()))
}

/// Factorization-based positive-definiteness test: the Cholesky factorization
/// of the symmetric part must exist and its smallest eigenvalue must clear
/// `floor`.
pub fn is_positive_definite(m: &Mat, floor: f64) -> bool {
    if !m.is_square() || m.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let s = symmetrize(m);
    if s.clone().cholesky().is_none() {
        return false;
    }
    min_eigenvalue(&s) > floor
}

/// Scale-free variant: the smallest eigenvalue must exceed `PD_FLOOR` times
/// the largest, so uniformly tiny matrices such as `1e-15 I` still qualify.
pub fn is_positive_definite_rel(m: &Mat) -> bool {
    if !is_positive_definite(m, 0.0) {
        return false;
    }
    let ev = sym_eigenvalues(m);
    ev[0] > PD_FLOOR * ev[ev.len() - 1]
}

pub fn require_spd(what: &str, m: &Mat) -> Result<()> {
    if is_positive_definite_rel(m) {
        Ok(())
    } else {
        Err(Error::NotPositiveDefinite(what.to_string()))
    }
}

/// `a <= b` in the Loewner order, i.e. `b - a` is PSD up to `tol`.
pub fn loewner_le(a: &Mat, b: &Mat, tol: f64) -> bool {
    min_eigenvalue(&(b - a)) >= -tol
}

/// `a < b` strictly: `lambda_min(b - a) > margin`.
pub fn loewner_lt(a: &Mat, b: &Mat, margin: f64) -> bool {
    min_eigenvalue(&(b - a)) > margin
}

/// Inverse of an SPD matrix through its Cholesky factor.
pub fn spd_inverse(m: &Mat) -> Result<Mat> {
    let chol = symmetrize(m)
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("matrix to invert".into()))?;
    Ok(symmetrize(&chol.inverse()))
}

/// Solves `m * x = rhs` for SPD `m`.
pub fn spd_solve(m: &Mat, rhs: &Mat) -> Option<Mat> {
    symmetrize(m).cholesky().map(|c| c.solve(rhs))
}

/// Lower Cholesky factor, used to colour white noise.
pub fn cholesky_factor(m: &Mat) -> Result<Mat> {
    symmetrize(m)
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::NotPositiveDefinite("covariance".into()))
}

/// Determinant of a general square matrix via LU.
pub fn det(m: &Mat) -> f64 {
    m.clone().lu().determinant()
}

/// Block-diagonal matrix with the given blocks.
pub fn block_diag(blocks: &[&Mat]) -> Mat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Numerical rank of a complex matrix from its singular values.
fn complex_rank(m: &DMatrix<Complex<f64>>, tol: f64) -> usize {
    let sv = m.clone().singular_values();
    let smax = sv.iter().fold(0.0_f64, |acc, s| acc.max(*s));
    let thresh = tol * smax.max(1.0);
    sv.iter().filter(|s| **s > thresh).count()
}

fn to_complex(m: &Mat) -> DMatrix<Complex<f64>> {
    m.map(|v| Complex::new(v, 0.0))
}

fn unstable_eigenvalues(a: &Mat) -> Vec<Complex<f64>> {
    a.complex_eigenvalues()
        .iter()
        .copied()
        .filter(|l| l.norm() >= 1.0 - RANK_TOL)
        .collect()
}

/// PBH test: `[A - lambda I; C]` has full column rank for every eigenvalue
/// with `|lambda| >= 1`.
pub fn is_detectable(a: &Mat, c: &Mat) -> bool {
    let n = a.nrows();
    let ac = to_complex(a);
    let cc = to_complex(c);
    unstable_eigenvalues(a).into_iter().all(|lambda| {
        let mut stacked = DMatrix::<Complex<f64>>::zeros(n + c.nrows(), n);
        let shifted = &ac - DMatrix::<Complex<f64>>::identity(n, n) * lambda;
        stacked.view_mut((0, 0), (n, n)).copy_from(&shifted);
        stacked.view_mut((n, 0), (c.nrows(), n)).copy_from(&cc);
        complex_rank(&stacked, RANK_TOL) == n
    })
}

/// PBH test: `[A - lambda I, B]` has full row rank for every eigenvalue with
/// `|lambda| >= 1`.
pub fn is_stabilizable(a: &Mat, b: &Mat) -> bool {
    is_detectable(&a.transpose(), &b.transpose())
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config("ragged matrix rows".into()));
    }
    Ok(Mat::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Serde adapter storing a matrix as row-major nested arrays.
pub mod serde_rows {
    use super::{from_rows, to_rows, Mat};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pd_check_rejects_indefinite_and_zero() {
        assert!(is_positive_definite(&Mat::identity(3, 3), PD_FLOOR));
        assert!(!is_positive_definite(&Mat::zeros(1, 1), PD_FLOOR));
        let indefinite = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(!is_positive_definite(&indefinite, PD_FLOOR));
    }

    #[test]
    fn pbh_detects_unobservable_unstable_mode() {
        let a = Mat::from_row_slice(1, 1, &[1.0]);
        let c = Mat::zeros(1, 1);
        assert!(!is_detectable(&a, &c));
        // stable unobservable modes are fine
        let a = Mat::from_row_slice(2, 2, &[1.2, 0.0, 0.0, 0.5]);
        let c = Mat::from_row_slice(1, 2, &[1.0, 0.0]);
        assert!(is_detectable(&a, &c));
        let c = Mat::from_row_slice(1, 2, &[0.0, 1.0]);
        assert!(!is_detectable(&a, &c));
    }

    #[test]
    fn block_diag_places_blocks() {
        let a = Mat::from_element(1, 1, 2.0);
        let b = Mat::identity(2, 2);
        let d = block_diag(&[&a, &b]);
        assert_eq!(d.shape(), (3, 3));
        assert_eq!(d[(0, 0)], 2.0);
        assert_eq!(d[(2, 2)], 1.0);
        assert_eq!(d[(0, 2)], 0.0);
    }

    #[test]
    fn spectral_radius_of_rotation() {
        let a = Mat::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]);
        assert!((spectral_radius(&a) - 0.5).abs() < 1e-12);
    }
}
