//! Communication rates and asymptotic bounds on the prediction covariance.
//!
//! Open loop (stable plant): the rate is exact,
//! `gamma = 1 - det(I + Pi Y)^{-1/2}`, and `E[P-]` is sandwiched between the
//! fixed points of `g_{R1}` and `g_{R + Y^{-1}}`, where `R1` is the
//! rate-weighted harmonic mean of `R` and `R + Y^{-1}`.
//!
//! Closed loop (any detectable plant): the rate itself is bracketed by
//! substituting the best- and worst-case fixed points into the innovation
//! covariance, and the lower covariance bound uses the upper rate.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::{self, block_diag, det, ensure_dims, require_spd, spd_inverse, Mat};
use crate::model::{SteadyState, SystemModel};
use crate::riccati;

/// `1 - det(I + M W)^{-1/2}` for an `m x m` covariance `M` and weight `W`.
pub fn gaussian_rate(cov: &Mat, weight: &Mat) -> f64 {
    1.0 - 1.0 / det_i_plus(cov, weight).sqrt()
}

fn det_i_plus(cov: &Mat, weight: &Mat) -> f64 {
    det(&(Mat::identity(cov.nrows(), cov.nrows()) + cov * weight))
}

/// Exact open-loop communication rate.
pub fn open_loop_rate(steady: &SteadyState, y: &Mat) -> Result<f64> {
    if steady.spectral_radius >= 1.0 {
        return Err(Error::UnstableSystem {
            spectral_radius: steady.spectral_radius,
        });
    }
    ensure_dims("Y", y, steady.pi.nrows(), steady.pi.nrows())?;
    require_spd("Y", y)?;
    Ok(gaussian_rate(&steady.pi, y))
}

/// Harmonic mixture `(g R^{-1} + (1 - g)(R + W^{-1})^{-1})^{-1}`.
pub fn mixed_noise(r: &Mat, weight: &Mat, rate: f64) -> Result<Mat> {
    let dropped = r + spd_inverse(weight)?;
    let info = spd_inverse(r)? * rate + spd_inverse(&dropped)? * (1.0 - rate);
    spd_inverse(&info)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpenLoopAnalysis {
    pub rate: f64,
    /// Always-transmit fixed point (best case).
    pub x0: Mat,
    /// Never-transmit fixed point (worst case).
    pub x_upper: Mat,
    pub x_lower: Mat,
    pub r1: Mat,
}

pub fn olset_bounds(model: &SystemModel, y: &Mat) -> Result<OpenLoopAnalysis> {
    let steady = crate::model::steady_state(model)?;
    let rate = open_loop_rate(&steady, y)?;
    let x0 = riccati::fixed_point(model, model.r())?;
    let x_upper = riccati::fixed_point(model, &(model.r() + spd_inverse(y)?))?;
    let r1 = mixed_noise(model.r(), y, rate)?;
    let x_lower = riccati::fixed_point(model, &r1)?;
    Ok(OpenLoopAnalysis {
        rate,
        x0,
        x_upper,
        x_lower,
        r1,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopAnalysis {
    pub rate_lower: f64,
    pub rate_upper: f64,
    pub x0: Mat,
    pub x_upper: Mat,
    pub x_lower: Mat,
    pub r3: Mat,
}

/// Closed-loop rate interval and covariance bounds; no stability requirement.
pub fn closed_loop_rate_bounds(model: &SystemModel, z: &Mat) -> Result<ClosedLoopAnalysis> {
    ensure_dims("Z", z, model.m(), model.m())?;
    require_spd("Z", z)?;
    let x0 = riccati::fixed_point(model, model.r())?;
    let x_upper = riccati::fixed_point(model, &(model.r() + spd_inverse(z)?))?;
    let innovation = |x: &Mat| model.c() * x * model.c().transpose() + model.r();
    let rate_lower = gaussian_rate(&innovation(&x0), z);
    let rate_upper = gaussian_rate(&innovation(&x_upper), z);
    let r3 = mixed_noise(model.r(), z, rate_upper)?;
    let x_lower = riccati::fixed_point(model, &r3)?;
    Ok(ClosedLoopAnalysis {
        rate_lower,
        rate_upper,
        x0,
        x_upper,
        x_lower,
        r3,
    })
}

/// Covariance of the stacked stationary measurements `[y_0; ...; y_{l-1}]`.
pub fn stacked_measurement_covariance(steady: &SteadyState, model: &SystemModel, l: usize) -> Mat {
    let (n, m) = (model.n(), model.m());
    let mut out = Mat::zeros(m * l, m * l);
    // Cov(y_{i+d}, y_i) = C A^d Sigma C'
    let mut a_pow = Mat::identity(n, n);
    for d in 0..l {
        let lag = model.c() * &a_pow * &steady.sigma * model.c().transpose();
        for i in 0..(l - d) {
            let j = i + d;
            if d == 0 {
                out.view_mut((i * m, i * m), (m, m)).copy_from(&steady.pi);
            } else {
                out.view_mut((j * m, i * m), (m, m)).copy_from(&lag);
                out.view_mut((i * m, j * m), (m, m)).copy_from(&lag.transpose());
            }
        }
        a_pow = model.a() * a_pow;
    }
    out
}

/// Probability of `l` consecutive drops under the open-loop trigger in
/// steady state, `det(I + Pi_l Y_l)^{-1/2}`.
pub fn sequential_drop_probability(
    steady: &SteadyState,
    model: &SystemModel,
    y: &Mat,
    l: usize,
) -> Result<f64> {
    model.require_stable()?;
    if l == 0 {
        return Err(Error::InvalidParameter("window length must be >= 1".into()));
    }
    ensure_dims("Y", y, model.m(), model.m())?;
    require_spd("Y", y)?;
    let pi_l = stacked_measurement_covariance(steady, model, l);
    let blocks: Vec<&Mat> = std::iter::repeat_n(y, l).collect();
    let y_l = block_diag(&blocks);
    Ok(1.0 / det_i_plus(&pi_l, &y_l).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBounds {
    pub lower: f64,
    pub exact: f64,
    pub upper: f64,
    /// With a scalar measurement `det(I + Pi Y) = 1 + tr(Pi Y)`, so the lower
    /// bound is attained.
    pub lower_is_tight: bool,
}

/// `1 - (1 + tr(Pi Y))^{-1/2} <= gamma < 1 - exp(-tr(Pi Y) / 2)`.
pub fn rate_trace_bounds(pi: &Mat, y: &Mat) -> RateBounds {
    let tr = (pi * y).trace();
    RateBounds {
        lower: 1.0 - 1.0 / (1.0 + tr).sqrt(),
        exact: gaussian_rate(pi, y),
        upper: 1.0 - (-0.5 * tr).exp(),
        lower_is_tight: pi.nrows() == 1,
    }
}

/// Flat `quantity,value` report of the analysis results.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnalysisReport {
    entries: Vec<(String, f64)>,
}

impl AnalysisReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: &str, value: f64) {
        self.entries.push((name.to_string(), value));
    }

    /// Adds every entry as `name_i_j` (1-based).
    pub fn push_matrix(&mut self, name: &str, m: &Mat) {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                self.push(&format!("{name}_{}_{}", i + 1, j + 1), m[(i, j)]);
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("quantity,value\n");
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }

    pub fn open_loop(model: &SystemModel, y: &Mat) -> Result<Self> {
        let steady = crate::model::steady_state(model)?;
        let ol = olset_bounds(model, y)?;
        let mut rep = Self::new();
        rep.push("spectral_radius", steady.spectral_radius);
        rep.push("gamma", ol.rate);
        let tb = rate_trace_bounds(&steady.pi, y);
        rep.push("gamma_trace_lower", tb.lower);
        rep.push("gamma_trace_upper", tb.upper);
        rep.push_matrix("Sigma", &steady.sigma);
        rep.push_matrix("Pi", &steady.pi);
        rep.push_matrix("X0", &ol.x0);
        rep.push_matrix("X_lower", &ol.x_lower);
        rep.push_matrix("X_upper", &ol.x_upper);
        rep.push_matrix("R1", &ol.r1);
        Ok(rep)
    }

    pub fn closed_loop(model: &SystemModel, z: &Mat) -> Result<Self> {
        let cl = closed_loop_rate_bounds(model, z)?;
        let mut rep = Self::new();
        rep.push("spectral_radius", model.spectral_radius());
        rep.push("gamma_lower", cl.rate_lower);
        rep.push("gamma_upper", cl.rate_upper);
        rep.push_matrix("X0", &cl.x0);
        rep.push_matrix("X_lower", &cl.x_lower);
        rep.push_matrix("X_upper", &cl.x_upper);
        rep.push_matrix("R3", &cl.r3);
        Ok(rep)
    }
}

/// Checks `X0 <= X_lower <= X_upper` to `tol`.
pub fn ordering_holds(x0: &Mat, lower: &Mat, upper: &Mat, tol: f64) -> bool {
    linalg::loewner_le(x0, lower, tol) && linalg::loewner_le(lower, upper, tol)
}
