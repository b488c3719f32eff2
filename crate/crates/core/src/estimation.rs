//! Trigger policies and filter recursions.
//!
//! The stochastic triggers transmit when a uniform draw `zeta` exceeds a
//! Gaussian-shaped acceptance level:
//!
//! - open loop:   `phi = exp(-y' Y y / 2)` on the raw measurement;
//! - closed loop: `phi = exp(-z' Z z / 2)` on the innovation `z = y - C x_prior`.
//!
//! A dropped packet still carries information ("the measurement was probably
//! small"), which the exact filters absorb as an extra measurement noise
//! `Y^{-1}` (or `Z^{-1}`). The offline baselines (periodic, random,
//! deterministic threshold) simply predict on a drop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, require_spd, spd_inverse, spd_solve, symmetrize, Mat, Vector};
use crate::model::SystemModel;

/// Sensor-side transmission rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TriggerPolicy {
    OpenLoop {
        #[serde(rename = "Y", with = "linalg::serde_rows")]
        y: Mat,
    },
    ClosedLoop {
        #[serde(rename = "Z", with = "linalg::serde_rows")]
        z: Mat,
    },
    Periodic {
        period: u64,
        #[serde(default)]
        phase: i64,
    },
    Random {
        probability: f64,
    },
    DeterministicThreshold {
        delta: f64,
    },
}

impl TriggerPolicy {
    pub fn validate(&self, m: usize) -> Result<()> {
        match self {
            TriggerPolicy::OpenLoop { y: mat } | TriggerPolicy::ClosedLoop { z: mat } => {
                linalg::ensure_dims("trigger matrix", mat, m, m)?;
                require_spd("trigger matrix", mat)
            }
            TriggerPolicy::Periodic { period, .. } if *period == 0 => Err(
                Error::InvalidParameter("period must be at least 1".into()),
            ),
            TriggerPolicy::Random { probability } if !(0.0..=1.0).contains(probability) => Err(
                Error::InvalidParameter(format!("probability {probability} not in [0, 1]")),
            ),
            TriggerPolicy::DeterministicThreshold { delta } if *delta <= 0.0 || delta.is_nan() => Err(
                Error::InvalidParameter(format!("threshold {delta} must be positive")),
            ),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TriggerPolicy::OpenLoop { .. } => "open-loop",
            TriggerPolicy::ClosedLoop { .. } => "closed-loop",
            TriggerPolicy::Periodic { .. } => "periodic",
            TriggerPolicy::Random { .. } => "random",
            TriggerPolicy::DeterministicThreshold { .. } => "deterministic-threshold",
        }
    }

    /// Whether the rule needs the estimator's prediction fed back.
    pub fn needs_feedback(&self) -> bool {
        matches!(
            self,
            TriggerPolicy::ClosedLoop { .. } | TriggerPolicy::DeterministicThreshold { .. }
        )
    }
}

fn gaussian_level(v: &Vector, weight: &Mat) -> f64 {
    (-0.5 * (v.transpose() * weight * v)[(0, 0)]).exp()
}

/// Transmission decision for step `k`: `true` means the packet is sent.
///
/// `y_prior` is the estimator's one-step measurement prediction `C x_prior`,
/// only consulted by the feedback policies.
pub fn trigger_decide(
    policy: &TriggerPolicy,
    y: &Vector,
    y_prior: &Vector,
    zeta: f64,
    k: u64,
) -> bool {
    match policy {
        TriggerPolicy::OpenLoop { y: weight } => zeta > gaussian_level(y, weight),
        TriggerPolicy::ClosedLoop { z: weight } => zeta > gaussian_level(&(y - y_prior), weight),
        TriggerPolicy::Periodic { period, phase } => {
            (k as i64 - phase).rem_euclid(*period as i64) == 0
        }
        TriggerPolicy::Random { probability } => zeta > 1.0 - probability,
        TriggerPolicy::DeterministicThreshold { delta } => (y - y_prior).amax() > *delta,
    }
}

/// Estimator belief at time `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub prior_mean: Vector,
    pub prior_cov: Mat,
    pub post_mean: Vector,
    pub post_cov: Mat,
    pub gain: Mat,
    pub k: u64,
}

impl FilterState {
    /// Prior at `k = 0`: `N(mean0, Sigma0)`.
    pub fn initial(model: &SystemModel) -> Self {
        Self::with_prior(model, model.initial_mean().clone(), model.sigma0().clone())
    }

    pub fn with_prior(model: &SystemModel, mean: Vector, cov: Mat) -> Self {
        Self {
            post_mean: mean.clone(),
            post_cov: cov.clone(),
            prior_mean: mean,
            prior_cov: cov,
            gain: Mat::zeros(model.n(), model.m()),
            k: 0,
        }
    }

    pub fn predicted_measurement(&self, model: &SystemModel) -> Vector {
        model.c() * &self.prior_mean
    }

    /// `x_prior = A x_post`, `P_prior = A P_post A' + Q`, `k += 1`.
    pub fn time_update(&self, model: &SystemModel) -> FilterState {
        FilterState {
            prior_mean: model.a() * &self.post_mean,
            prior_cov: model.predict_covariance(&self.post_cov),
            post_mean: self.post_mean.clone(),
            post_cov: self.post_cov.clone(),
            gain: self.gain.clone(),
            k: self.k + 1,
        }
    }

    /// Textbook Kalman measurement update with noise `R`.
    pub fn standard_kf_update(&self, y: &Vector, model: &SystemModel) -> Result<FilterState> {
        check_len(y, model.m())?;
        let gain = kalman_gain(&self.prior_cov, model.c(), model.r())?;
        let innovation = y - model.c() * &self.prior_mean;
        Ok(self.with_posterior(
            &self.prior_mean + &gain * innovation,
            contract(&self.prior_cov, &gain, model.c()),
            gain,
        ))
    }

    /// Exact update under the open-loop stochastic trigger:
    ///
    /// ```text
    /// K = P- C' [C P- C' + R + (1 - gamma) Y^{-1}]^{-1}
    /// x = (I - K C) x- + gamma K y
    /// P = P- - K C P-
    /// ```
    ///
    /// The measurement must be present exactly when `arrived` is true.
    pub fn olset_update(
        &self,
        arrived: bool,
        y: Option<&Vector>,
        model: &SystemModel,
        y_weight: &Mat,
    ) -> Result<FilterState> {
        let y = visible(arrived, y, model.m())?;
        let gain = kalman_gain(&self.prior_cov, model.c(), &effective_noise(model, arrived, y_weight)?)?;
        let mut mean = &self.prior_mean - &gain * (model.c() * &self.prior_mean);
        if let Some(y) = y {
            mean += &gain * y;
        }
        Ok(self.with_posterior(mean, contract(&self.prior_cov, &gain, model.c()), gain))
    }

    /// Exact update under the closed-loop stochastic trigger:
    ///
    /// ```text
    /// K = P- C' [C P- C' + R + (1 - gamma) Z^{-1}]^{-1}
    /// x = x- + gamma K z
    /// P = P- - K C P-
    /// ```
    ///
    /// `z` is the innovation and must be present exactly when `arrived`.
    pub fn clset_update(
        &self,
        arrived: bool,
        z: Option<&Vector>,
        model: &SystemModel,
        z_weight: &Mat,
    ) -> Result<FilterState> {
        let z = visible(arrived, z, model.m())?;
        let gain = kalman_gain(&self.prior_cov, model.c(), &effective_noise(model, arrived, z_weight)?)?;
        let mean = match z {
            Some(z) => &self.prior_mean + &gain * z,
            None => self.prior_mean.clone(),
        };
        Ok(self.with_posterior(mean, contract(&self.prior_cov, &gain, model.c()), gain))
    }

    /// Offline-schedule drop: the posterior is the prior.
    pub fn offline_drop_update(&self) -> FilterState {
        self.with_posterior(
            self.prior_mean.clone(),
            self.prior_cov.clone(),
            Mat::zeros(self.gain.nrows(), self.gain.ncols()),
        )
    }

    fn with_posterior(&self, mean: Vector, cov: Mat, gain: Mat) -> FilterState {
        FilterState {
            prior_mean: self.prior_mean.clone(),
            prior_cov: self.prior_cov.clone(),
            post_mean: mean,
            post_cov: cov,
            gain,
            k: self.k,
        }
    }
}

fn check_len(v: &Vector, m: usize) -> Result<()> {
    if v.len() != m {
        return Err(Error::DimensionMismatch {
            what: "measurement".into(),
            expected: (m, 1),
            found: (v.len(), 1),
        });
    }
    Ok(())
}

fn visible(arrived: bool, v: Option<&Vector>, m: usize) -> Result<Option<&Vector>> {
    match (arrived, v) {
        (true, None) => Err(Error::MissingMeasurement),
        (false, Some(_)) => Err(Error::InconsistentArgs(
            "estimator must not see the measurement of a dropped packet".into(),
        )),
        (true, Some(v)) => check_len(v, m).map(|_| Some(v)),
        (false, None) => Ok(None),
    }
}

/// `R` on arrival, `R + W^{-1}` on a drop.
fn effective_noise(model: &SystemModel, arrived: bool, weight: &Mat) -> Result<Mat> {
    if arrived {
        return Ok(model.r().clone());
    }
    linalg::ensure_dims("trigger matrix", weight, model.m(), model.m())?;
    Ok(model.r() + spd_inverse(weight)?)
}

/// `K = P C' (C P C' + W)^{-1}`, computed as a solve.
pub fn kalman_gain(p: &Mat, c: &Mat, w: &Mat) -> Result<Mat> {
    let s = c * p * c.transpose() + w;
    let ktrans = spd_solve(&s, &(c * p)).ok_or(Error::SingularInnovation)?;
    Ok(ktrans.transpose())
}

fn contract(p: &Mat, gain: &Mat, c: &Mat) -> Mat {
    symmetrize(&(p - gain * (c * p)))
}

/// Which recursion the estimator runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    /// Every packet arrives; the trigger is ignored.
    Standard,
    Olset,
    Clset,
    /// Pure prediction on drops (periodic / random / deterministic threshold).
    OfflineBaseline,
}

impl FilterKind {
    pub fn name(&self) -> &'static str {
        match self {
            FilterKind::Standard => "standard",
            FilterKind::Olset => "olset",
            FilterKind::Clset => "clset",
            FilterKind::OfflineBaseline => "offline-baseline",
        }
    }

    /// Natural estimator for a trigger.
    pub fn for_trigger(policy: &TriggerPolicy) -> Self {
        match policy {
            TriggerPolicy::OpenLoop { .. } => FilterKind::Olset,
            TriggerPolicy::ClosedLoop { .. } => FilterKind::Clset,
            _ => FilterKind::OfflineBaseline,
        }
    }

    pub fn accepts(&self, policy: &TriggerPolicy) -> bool {
        match self {
            FilterKind::Standard => true,
            FilterKind::Olset => matches!(policy, TriggerPolicy::OpenLoop { .. }),
            FilterKind::Clset => matches!(policy, TriggerPolicy::ClosedLoop { .. }),
            FilterKind::OfflineBaseline => matches!(
                policy,
                TriggerPolicy::Periodic { .. }
                    | TriggerPolicy::Random { .. }
                    | TriggerPolicy::DeterministicThreshold { .. }
            ),
        }
    }
}

/// Runs the estimator-side measurement update for `kind`. `y` is the raw
/// measurement when the packet arrived, `None` otherwise.
pub fn measurement_update(
    kind: FilterKind,
    policy: &TriggerPolicy,
    state: &FilterState,
    arrived: bool,
    y: Option<&Vector>,
    model: &SystemModel,
) -> Result<FilterState> {
    match (kind, policy) {
        (FilterKind::Standard, _) => {
            state.standard_kf_update(y.ok_or(Error::MissingMeasurement)?, model)
        }
        (FilterKind::Olset, TriggerPolicy::OpenLoop { y: weight }) => {
            state.olset_update(arrived, y, model, weight)
        }
        (FilterKind::Clset, TriggerPolicy::ClosedLoop { z: weight }) => {
            let z = y.map(|y| y - state.predicted_measurement(model));
            state.clset_update(arrived, z.as_ref(), model, weight)
        }
        (FilterKind::OfflineBaseline, _) if kind.accepts(policy) => match (arrived, y) {
            (true, Some(y)) => state.standard_kf_update(y, model),
            (true, None) => Err(Error::MissingMeasurement),
            (false, None) => Ok(state.offline_drop_update()),
            (false, Some(_)) => Err(Error::InconsistentArgs(
                "estimator must not see the measurement of a dropped packet".into(),
            )),
        },
        _ => Err(Error::InconsistentArgs(format!(
            "filter {} cannot run with trigger {}",
            kind.name(),
            policy.name()
        ))),
    }
}
