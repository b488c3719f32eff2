//! Riccati machinery.
//!
//! For an effective measurement-noise covariance `W > 0`:
//!
//! ```text
//! g_W(X)     = A X A' + Q - A X C' (C X C' + W)^{-1} C X A'
//! Gamma_W(S) = [A (S + C' W^{-1} C)^{-1} A' + Q]^{-1}
//! ```
//!
//! `g_W` is the prediction-covariance Riccati map and `Gamma_W` its
//! information-form twin, `[Gamma_W(X^{-1})]^{-1} = g_W(X)`. Both are
//! monotone and, for detectable/stabilizable plants, contract to a unique
//! positive-definite fixed point from any positive-definite start.

use crate::error::{Error, Result};
use crate::linalg::{self, ensure_dims, require_spd, spd_inverse, spd_solve, symmetrize, Mat};
use crate::model::SystemModel;

pub const FIXED_POINT_TOL: f64 = 1e-10;
pub const FIXED_POINT_MAX_ITER: usize = 100_000;

/// `g_W` / `Gamma_W` bound to a plant and a noise level.
#[derive(Debug, Clone)]
pub struct RiccatiMap<'a> {
    model: &'a SystemModel,
    w: Mat,
}

impl<'a> RiccatiMap<'a> {
    pub fn new(model: &'a SystemModel, w: Mat) -> Result<Self> {
        ensure_dims("W", &w, model.m(), model.m())?;
        require_spd("W", &w)?;
        Ok(Self {
            model,
            w: symmetrize(&w),
        })
    }

    /// The always-transmit map `g_R`.
    pub fn standard(model: &'a SystemModel) -> Self {
        Self {
            model,
            w: model.r().clone(),
        }
    }

    pub fn w(&self) -> &Mat {
        &self.w
    }

    pub fn model(&self) -> &SystemModel {
        self.model
    }

    /// One step of `g_W`. Accepts PSD `X` (e.g. the zero matrix).
    pub fn g(&self, x: &Mat) -> Result<Mat> {
        let (a, c) = (self.model.a(), self.model.c());
        ensure_dims("X", x, self.model.n(), self.model.n())?;
        let cx = c * x;
        let innovation = &cx * c.transpose() + &self.w;
        // (C X C' + W)^{-1} C X A'
        let rhs = &cx * a.transpose();
        let solved = spd_solve(&innovation, &rhs).ok_or(Error::SingularInnovation)?;
        let ax = a * x;
        let out = &ax * a.transpose() + self.model.q() - (&ax * c.transpose()) * solved;
        Ok(symmetrize(&out))
    }

    /// One step of `Gamma_W` on an information matrix `S > 0`.
    pub fn gamma(&self, s: &Mat) -> Result<Mat> {
        let (a, c) = (self.model.a(), self.model.c());
        ensure_dims("S", s, self.model.n(), self.model.n())?;
        let ct_winv_c = c.transpose()
            * spd_solve(&self.w, c).ok_or(Error::SingularInnovation)?;
        let posterior_cov = spd_inverse(&(s + ct_winv_c))?;
        let prior = a * posterior_cov * a.transpose() + self.model.q();
        spd_inverse(&prior)
    }

    /// `g_W^k(X)`.
    pub fn iterate(&self, x: &Mat, k: usize) -> Result<Mat> {
        let mut x = x.clone();
        for _ in 0..k {
            x = self.g(&x)?;
        }
        Ok(x)
    }

    /// Fixed point of `g_W` with the default tolerance, started at `Q`.
    pub fn fixed_point(&self) -> Result<Mat> {
        self.fixed_point_with(FIXED_POINT_TOL, FIXED_POINT_MAX_ITER)
    }

    pub fn fixed_point_with(&self, tol: f64, max_iter: usize) -> Result<Mat> {
        self.fixed_point_from(self.model.q(), tol, max_iter)
    }

    /// Iterates `g_W` from `start` until `||g(X) - X|| <= tol ||X||` in the
    /// spectral norm.
    pub fn fixed_point_from(&self, start: &Mat, tol: f64, max_iter: usize) -> Result<Mat> {
        if tol <= 0.0 || tol.is_nan() {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        let mut x = symmetrize(start);
        for _ in 0..max_iter {
            let next = self.g(&x)?;
            let change = linalg::spectral_norm(&(&next - &x));
            x = next;
            if change <= tol * linalg::spectral_norm(&x) {
                return Ok(x);
            }
        }
        Err(Error::NoConvergence {
            iterations: max_iter,
        })
    }
}

/// Convenience: fixed point of `g_W` for the given plant and noise.
pub fn fixed_point(model: &SystemModel, w: &Mat) -> Result<Mat> {
    RiccatiMap::new(model, w.clone())?.fixed_point()
}

/// Partitioned joint covariance of `[x; y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCovariance {
    pub xx: Mat,
    pub xy: Mat,
    pub yy: Mat,
}

impl BlockCovariance {
    pub fn new(xx: Mat, xy: Mat, yy: Mat) -> Result<Self> {
        let (n, m) = (xx.nrows(), yy.nrows());
        ensure_dims("Phi_xx", &xx, n, n)?;
        ensure_dims("Phi_xy", &xy, n, m)?;
        ensure_dims("Phi_yy", &yy, m, m)?;
        let block = Self { xx, xy, yy };
        require_spd("Phi", &block.assemble())?;
        Ok(block)
    }

    /// Splits a joint `(n+m) x (n+m)` covariance after the first `n` rows.
    pub fn split(joint: &Mat, n: usize) -> Result<Self> {
        let total = joint.nrows();
        if n == 0 || n >= total || !joint.is_square() {
            return Err(Error::DimensionMismatch {
                what: "joint covariance".into(),
                expected: (total, total),
                found: joint.shape(),
            });
        }
        let m = total - n;
        Self::new(
            joint.view((0, 0), (n, n)).into_owned(),
            joint.view((0, n), (n, m)).into_owned(),
            joint.view((n, n), (m, m)).into_owned(),
        )
    }

    pub fn n(&self) -> usize {
        self.xx.nrows()
    }

    pub fn m(&self) -> usize {
        self.yy.nrows()
    }

    pub fn assemble(&self) -> Mat {
        let (n, m) = (self.n(), self.m());
        let mut out = Mat::zeros(n + m, n + m);
        out.view_mut((0, 0), (n, n)).copy_from(&self.xx);
        out.view_mut((0, n), (n, m)).copy_from(&self.xy);
        out.view_mut((n, 0), (m, n)).copy_from(&self.xy.transpose());
        out.view_mut((n, n), (m, m)).copy_from(&self.yy);
        out
    }
}

/// Conditioning a joint Gaussian on a soft Gaussian "observation" of its
/// `y` block: returns `Theta` with `Theta^{-1} = Phi^{-1} + blockdiag(0, Y)`.
///
/// Evaluated without forming `Y^{-1}`, so `Y -> 0` is well behaved:
///
/// ```text
/// Theta_xx = Phi_xx - Phi_xy (I + Y Phi_yy)^{-1} Y Phi_xy'
/// Theta_xy = Phi_xy (I + Y Phi_yy)^{-1}
/// Theta_yy = (I + Phi_yy Y)^{-1} Phi_yy
/// ```
pub fn block_gaussian_update(phi: &BlockCovariance, y: &Mat) -> Result<BlockCovariance> {
    let m = phi.m();
    ensure_dims("Y", y, m, m)?;
    require_spd("Y", y)?;
    let eye = Mat::identity(m, m);
    let left = (&eye + y * &phi.yy).lu();
    let right = (&eye + &phi.yy * y).lu();
    let singular = || Error::InconsistentArgs("I + Phi_yy Y is singular".into());

    let ky = left.solve(&(y * phi.xy.transpose())).ok_or_else(singular)?;
    let xx = symmetrize(&(&phi.xx - &phi.xy * ky));
    // Phi_xy (I + Y Phi_yy)^{-1} = [(I + Phi_yy Y)^{-1} Phi_xy']'
    let xy = right.solve(&phi.xy.transpose()).ok_or_else(singular)?.transpose();
    let yy = symmetrize(&right.solve(&phi.yy).ok_or_else(singular)?);
    Ok(BlockCovariance { xx, xy, yy })
}
