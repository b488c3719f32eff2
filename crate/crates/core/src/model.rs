//! The linear-Gaussian plant
//!
//! ```text
//! x_{k+1} = A x_k + w_k,   w_k ~ N(0, Q)
//! y_k     = C x_k + v_k,   v_k ~ N(0, R)
//! x_0 ~ N(mean0, Sigma0)
//! ```
//!
//! and its stationary statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ensure_dims, require_spd, symmetrize, Mat, Vector};

pub const LYAPUNOV_TOL: f64 = 1e-12;
pub const LYAPUNOV_MAX_ITER: usize = 100_000;

/// Validated plant. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    a: Mat,
    c: Mat,
    q: Mat,
    r: Mat,
    sigma0: Mat,
    mean0: Vector,
}

impl SystemModel {
    /// Validates dimensions, positive-definiteness of `Q`, `R`, `Sigma0`,
    /// detectability of `(A, C)` and stabilizability of `(A, Q)`.
    pub fn new(a: Mat, c: Mat, q: Mat, r: Mat, sigma0: Mat) -> Result<Self> {
        let n = a.nrows();
        let m = c.nrows();
        if n == 0 || m == 0 {
            return Err(Error::DimensionMismatch {
                what: "A/C".into(),
                expected: (1, 1),
                found: (n, m),
            });
        }
        ensure_dims("A", &a, n, n)?;
        ensure_dims("C", &c, m, n)?;
        ensure_dims("Q", &q, n, n)?;
        ensure_dims("R", &r, m, m)?;
        ensure_dims("Sigma0", &sigma0, n, n)?;
        require_spd("Q", &q)?;
        require_spd("R", &r)?;
        require_spd("Sigma0", &sigma0)?;
        if !linalg::is_detectable(&a, &c) {
            return Err(Error::NotDetectable);
        }
        if !linalg::is_stabilizable(&a, &linalg::cholesky_factor(&q)?) {
            return Err(Error::NotStabilizable);
        }
        Ok(Self {
            a,
            c,
            q: symmetrize(&q),
            r: symmetrize(&r),
            sigma0: symmetrize(&sigma0),
            mean0: Vector::zeros(n),
        })
    }

    /// Nonzero initial mean. The analysis results assume a zero-mean start;
    /// this only shifts the simulated trajectories and the filter prior.
    pub fn with_initial_mean(mut self, mean0: Vector) -> Result<Self> {
        if mean0.len() != self.n() {
            return Err(Error::DimensionMismatch {
                what: "x0".into(),
                expected: (self.n(), 1),
                found: (mean0.len(), 1),
            });
        }
        self.mean0 = mean0;
        Ok(self)
    }

    /// Scalar plant, handy in tests and examples.
    pub fn scalar(a: f64, c: f64, q: f64, r: f64, sigma0: f64) -> Result<Self> {
        let s = |v: f64| Mat::from_element(1, 1, v);
        Self::new(s(a), s(c), s(q), s(r), s(sigma0))
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }
    pub fn c(&self) -> &Mat {
        &self.c
    }
    pub fn q(&self) -> &Mat {
        &self.q
    }
    pub fn r(&self) -> &Mat {
        &self.r
    }
    pub fn sigma0(&self) -> &Mat {
        &self.sigma0
    }
    pub fn initial_mean(&self) -> &Vector {
        &self.mean0
    }
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.c.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        linalg::spectral_radius(&self.a)
    }

    pub fn is_stable(&self) -> bool {
        self.spectral_radius() < 1.0
    }

    pub fn require_stable(&self) -> Result<()> {
        let rho = self.spectral_radius();
        if rho < 1.0 {
            Ok(())
        } else {
            Err(Error::UnstableSystem {
                spectral_radius: rho,
            })
        }
    }

    /// Plain Lyapunov step `A X A' + Q`.
    pub fn predict_covariance(&self, x: &Mat) -> Mat {
        symmetrize(&(&self.a * x * self.a.transpose() + &self.q))
    }

    pub fn to_config(&self) -> ModelConfig {
        ModelConfig {
            a: self.a.clone(),
            c: self.c.clone(),
            q: self.q.clone(),
            r: self.r.clone(),
            sigma0: self.sigma0.clone(),
            x0: if self.mean0.iter().all(|v| *v == 0.0) {
                None
            } else {
                Some(self.mean0.iter().copied().collect())
            },
        }
    }
}

/// Stationary statistics of a stable plant.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    /// State covariance, solution of `Sigma = A Sigma A' + Q`.
    pub sigma: Mat,
    /// Measurement covariance `C Sigma C' + R`.
    pub pi: Mat,
    pub spectral_radius: f64,
}

/// Solves `X = A X A' + Q` by fixed-point iteration from `X = Q`.
pub fn solve_lyapunov(a: &Mat, q: &Mat, tol: f64, max_iter: usize) -> Result<Mat> {
    let mut x = symmetrize(q);
    for _ in 0..max_iter {
        let next = symmetrize(&(a * &x * a.transpose() + q));
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

pub fn steady_state(model: &SystemModel) -> Result<SteadyState> {
    model.require_stable()?;
    let sigma = solve_lyapunov(model.a(), model.q(), LYAPUNOV_TOL, LYAPUNOV_MAX_ITER)?;
    let pi = symmetrize(&(model.c() * &sigma * model.c().transpose() + model.r()));
    Ok(SteadyState {
        sigma,
        pi,
        spectral_radius: model.spectral_radius(),
    })
}

/// On-disk form of a [`SystemModel`]: row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(rename = "A", with = "linalg::serde_rows")]
    pub a: Mat,
    #[serde(rename = "C", with = "linalg::serde_rows")]
    pub c: Mat,
    #[serde(rename = "Q", with = "linalg::serde_rows")]
    pub q: Mat,
    #[serde(rename = "R", with = "linalg::serde_rows")]
    pub r: Mat,
    #[serde(rename = "Sigma0", with = "linalg::serde_rows")]
    pub sigma0: Mat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

impl ModelConfig {
    pub fn build(&self) -> Result<SystemModel> {
        let model = SystemModel::new(
            self.a.clone(),
            self.c.clone(),
            self.q.clone(),
            self.r.clone(),
            self.sigma0.clone(),
        )?;
        match &self.x0 {
            Some(x0) => model.with_initial_mean(Vector::from_vec(x0.clone())),
            None => Ok(model),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag(v: &[f64]) -> Mat {
        Mat::from_diagonal(&Vector::from_row_slice(v))
    }

    #[test]
    fn scalar_stable_model_is_valid() {
        let m = SystemModel::scalar(0.8, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!((m.n(), m.m()), (1, 1));
        assert!(m.is_stable());
    }

    #[test]
    fn zero_process_noise_rejected() {
        let err = SystemModel::scalar(0.8, 1.0, 0.0, 1.0, 1.0).unwrap_err();
        assert_eq!(err, Error::NotPositiveDefinite("Q".into()));
    }

    #[test]
    fn unobservable_random_walk_rejected() {
        let err = SystemModel::scalar(1.0, 0.0, 1.0, 1.0, 1.0).unwrap_err();
        assert_eq!(err, Error::NotDetectable);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let err = SystemModel::new(
            Mat::identity(2, 2) * 0.5,
            Mat::from_row_slice(1, 3, &[1.0, 0.0, 0.0]),
            Mat::identity(2, 2),
            Mat::identity(1, 1),
            Mat::identity(2, 2),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn scalar_steady_state() {
        let m = SystemModel::scalar(0.8, 1.0, 1.0, 1.0, 1.0).unwrap();
        let ss = steady_state(&m).unwrap();
        // Sigma = Q / (1 - A^2)
        assert_relative_eq!(ss.sigma[(0, 0)], 1.0 / 0.36, max_relative = 1e-10);
        assert_relative_eq!(ss.pi[(0, 0)], 1.0 / 0.36 + 1.0, max_relative = 1e-10);
        assert_relative_eq!(ss.sigma[(0, 0)], 2.77778, epsilon = 1e-5);
        assert_relative_eq!(ss.pi[(0, 0)], 3.77778, epsilon = 1e-5);
    }

    #[test]
    fn zero_dynamics_gives_q() {
        let q = Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let m = SystemModel::new(
            Mat::zeros(2, 2),
            Mat::from_row_slice(1, 2, &[1.0, 0.0]),
            q.clone(),
            Mat::identity(1, 1),
            Mat::identity(2, 2),
        )
        .unwrap();
        let ss = steady_state(&m).unwrap();
        assert_relative_eq!(ss.sigma, q, epsilon = 1e-14);
    }

    #[test]
    fn diagonal_two_mode_steady_state() {
        let m = SystemModel::new(
            diag(&[0.8, 0.95]),
            Mat::from_row_slice(1, 2, &[1.0, 1.0]),
            Mat::identity(2, 2),
            Mat::identity(1, 1),
            Mat::identity(2, 2),
        )
        .unwrap();
        let ss = steady_state(&m).unwrap();
        let s1 = 1.0 / (1.0 - 0.64);
        let s2 = 1.0 / (1.0 - 0.9025);
        assert_relative_eq!(ss.sigma, diag(&[s1, s2]), epsilon = 1e-9);
        assert_relative_eq!(ss.pi[(0, 0)], 1.0 + s1 + s2, epsilon = 1e-9);
        assert_relative_eq!(ss.sigma[(1, 1)], 10.25641, epsilon = 1e-5);
        assert_relative_eq!(ss.pi[(0, 0)], 14.03419, epsilon = 1e-5);
    }

    #[test]
    fn unstable_rejected_for_steady_state() {
        let m = SystemModel::scalar(1.1, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            steady_state(&m),
            Err(Error::UnstableSystem { .. })
        ));
    }

    #[test]
    fn config_round_trip() {
        let text = r#"
A = [[0.8, 1.0], [0.0, 0.95]]
C = [[0.5, 0.3], [0.0, 1.4]]
Q = [[1.0, 0.0], [0.0, 1.0]]
R = [[1.0, 0.0], [0.0, 1.0]]
Sigma0 = [[1.0, 0.0], [0.0, 1.0]]
"#;
        let cfg = ModelConfig::from_toml(text).unwrap();
        let model = cfg.build().unwrap();
        assert_eq!(model.a()[(0, 1)], 1.0);
        assert_eq!(model.c()[(1, 1)], 1.4);
        let again = ModelConfig::from_toml(&model.to_config().to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }
}
