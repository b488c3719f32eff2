use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::error::{Error, Result};
use crate::estimation::{FilterKind, TriggerPolicy};
use crate::linalg::Mat;
use crate::model::SystemModel;

/// Which `(1, 3)` entry to put in the transition matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SingerConvention {
    /// `A13 = T^2`.
    #[default]
    Full,
    /// `A13 = T^2 / 2` (constant-acceleration kinematics).
    Half,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingerParams {
    /// Sampling period.
    pub t: f64,
    /// Inverse maneuver time constant.
    pub alpha: f64,
    /// Acceleration variance.
    pub sigma2: f64,
    pub convention: SingerConvention,
}

impl Default for SingerParams {
    fn default() -> Self {
        Self {
            t: 1.0,
            alpha: 0.01,
            sigma2: 5.0,
            convention: SingerConvention::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SingerTrigger {
    /// Closed-loop stochastic trigger with `Z = scale * I`.
    ClosedLoop { z_scale: f64 },
    /// Innovation threshold baseline.
    DeterministicThreshold { delta: f64 },
}

/// Position/velocity/acceleration plant with full-state measurements,
/// `R = I`, `Sigma0 = I`.
pub fn singer_model(p: &SingerParams) -> Result<SystemModel> {
    if !(p.t > 0.0 && p.alpha > 0.0 && p.sigma2 > 0.0) {
        return Err(Error::InvalidParameter(
            "Singer parameters must be positive".into(),
        ));
    }
    let t = p.t;
    let a13 = match p.convention {
        SingerConvention::Full => t * t,
        SingerConvention::Half => t * t / 2.0,
    };
    let a = Mat::from_row_slice(3, 3, &[1.0, t, a13, 0.0, 1.0, t, 0.0, 0.0, 1.0]);
    #[rustfmt::skip]
    let shape = Mat::from_row_slice(3, 3, &[
        t.powi(5) / 20.0, t.powi(4) / 8.0, t.powi(3) / 6.0,
        t.powi(4) / 8.0,  t.powi(3) / 3.0, t.powi(2) / 2.0,
        t.powi(3) / 6.0,  t.powi(2) / 2.0, t,
    ]);
    let q = shape * (2.0 * p.alpha * p.sigma2);
    SystemModel::new(a, Mat::identity(3, 3), q, Mat::identity(3, 3), Mat::identity(3, 3))
}

/// Tracking scenario: 10^4 runs of 100 steps.
pub fn singer_scenario(p: &SingerParams, trigger: SingerTrigger) -> Result<Scenario> {
    let model = singer_model(p)?;
    let (policy, filter) = match trigger {
        SingerTrigger::ClosedLoop { z_scale } => (
            TriggerPolicy::ClosedLoop {
                z: Mat::identity(3, 3) * z_scale,
            },
            FilterKind::Clset,
        ),
        SingerTrigger::DeterministicThreshold { delta } => (
            TriggerPolicy::DeterministicThreshold { delta },
            FilterKind::OfflineBaseline,
        ),
    };
    Ok(Scenario::with_filter(model, policy, filter)?
        .horizon(100)
        .runs(10_000))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn q_entries_for_unit_period() {
        let m = singer_model(&SingerParams::default()).unwrap();
        let scale = 2.0 * 0.01 * 5.0;
        #[rustfmt::skip]
        let expected = Mat::from_row_slice(3, 3, &[
            1.0 / 20.0, 1.0 / 8.0, 1.0 / 6.0,
            1.0 / 8.0,  1.0 / 3.0, 1.0 / 2.0,
            1.0 / 6.0,  1.0 / 2.0, 1.0,
        ]) * scale;
        assert_relative_eq!(*m.q(), expected, epsilon = 1e-15);
        assert_eq!(m.a()[(0, 2)], 1.0);
    }

    #[test]
    fn half_convention() {
        let p = SingerParams {
            t: 2.0,
            convention: SingerConvention::Half,
            ..Default::default()
        };
        let m = singer_model(&p).unwrap();
        assert_eq!(m.a()[(0, 2)], 2.0);
        assert_eq!(m.a()[(0, 1)], 2.0);
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        let p = SingerParams {
            alpha: 0.0,
            ..Default::default()
        };
        assert!(singer_model(&p).is_err());
    }

    #[test]
    fn scenario_defaults() {
        let sc = singer_scenario(&SingerParams::default(), SingerTrigger::ClosedLoop { z_scale: 0.52 })
            .unwrap();
        assert_eq!((sc.runs, sc.horizon), (10_000, 100));
        assert_eq!(sc.filter, FilterKind::Clset);
        let sc = singer_scenario(
            &SingerParams::default(),
            SingerTrigger::DeterministicThreshold { delta: 1.6 },
        )
        .unwrap();
        assert_eq!(sc.filter, FilterKind::OfflineBaseline);
    }
}
