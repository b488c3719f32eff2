use std::fmt::Write as _;

use super::{monte_carlo, Scenario, DEFAULT_BURN_IN};
use crate::analysis::closed_loop_rate_bounds;
use crate::error::{Error, Result};
use crate::estimation::TriggerPolicy;
use crate::linalg::{sym_eigenvalues, Mat};
use crate::model::{steady_state, SteadyState, SystemModel};

/// Relative mismatch tolerated between the target rate and `1 / period`.
const PERIOD_REL_TOL: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub scheduler: String,
    pub param: String,
    pub empirical_rate: f64,
    pub steady_trace: f64,
    pub steady_trace_stderr: f64,
}

/// Bisection on `log(theta)` for an increasing function `rate(theta)`.
fn invert_increasing(target: f64, mut rate: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let (mut lo, mut hi) = (1e-12_f64, 1e12_f64);
    if rate(hi)? < target || rate(lo)? > target {
        return Err(Error::CalibrationFailed(format!(
            "rate {target} outside reachable range"
        )));
    }
    for _ in 0..400 {
        let mid = (lo * hi).sqrt();
        if rate(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

/// `theta` such that the open-loop rate with `Y = theta I` equals `target`.
///
/// `det(I + theta Pi) = prod(1 + theta lambda_i) = (1 - target)^{-2}`; closed
/// form for a scalar measurement, bisection otherwise.
pub fn calibrate_open_loop(steady: &SteadyState, target: f64) -> Result<f64> {
    check_target(target)?;
    let m = steady.pi.nrows();
    let rhs = (1.0 - target).powi(-2);
    if m == 1 {
        return Ok((rhs - 1.0) / steady.pi[(0, 0)]);
    }
    let lambdas = sym_eigenvalues(&steady.pi);
    invert_increasing(rhs.ln(), |t| {
        Ok(lambdas.iter().map(|l| (1.0 + t * l).ln()).sum())
    })
}

/// `theta` such that the closed-loop rate upper bound with `Z = theta I`
/// equals `target`; the realized rate is then at most `target`.
pub fn calibrate_closed_loop(model: &SystemModel, target: f64) -> Result<f64> {
    check_target(target)?;
    let m = model.m();
    invert_increasing(target, |t| {
        Ok(closed_loop_rate_bounds(model, &(Mat::identity(m, m) * t))?.rate_upper)
    })
}

fn check_target(target: f64) -> Result<()> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target rate {target} must lie in (0, 1)"
        )));
    }
    Ok(())
}

fn row(name: &str, param: String, scenario: &Scenario) -> Result<ComparisonRow> {
    let stats = monte_carlo(scenario)?;
    Ok(ComparisonRow {
        scheduler: name.to_string(),
        param,
        empirical_rate: stats.overall_rate(),
        steady_trace: stats.steady_trace_mean,
        steady_trace_stderr: stats.steady_trace_stderr,
    })
}

/// Calibrates the four schedulers to a common rate and reports the steady
/// `tr(E[P^-])` of each. Rows: periodic, random, olset, clset.
pub fn compare_schedulers(
    model: &SystemModel,
    target_rate: f64,
    horizon: usize,
    runs: usize,
    seed: u64,
) -> Result<Vec<ComparisonRow>> {
    check_target(target_rate)?;
    let steady = steady_state(model)?;
    let m = model.m();
    let burn_in = DEFAULT_BURN_IN.min(horizon / 2);
    let base = |trigger: TriggerPolicy| -> Result<Scenario> {
        Ok(Scenario::new(model.clone(), trigger)?
            .horizon(horizon)
            .runs(runs)
            .seed(seed)
            .burn_in(burn_in))
    };

    let period = (1.0 / target_rate).round().max(1.0);
    if ((1.0 / period) - target_rate).abs() > PERIOD_REL_TOL * target_rate {
        return Err(Error::CalibrationFailed(format!(
            "no period approximates rate {target_rate} (nearest {period})"
        )));
    }
    let period = period as u64;
    let y_theta = calibrate_open_loop(&steady, target_rate)?;
    let z_theta = calibrate_closed_loop(model, target_rate)?;

    Ok(vec![
        row(
            "periodic",
            format!("period={period}"),
            &base(TriggerPolicy::Periodic { period, phase: 0 })?,
        )?,
        row(
            "random",
            format!("p={target_rate}"),
            &base(TriggerPolicy::Random {
                probability: target_rate,
            })?,
        )?,
        row(
            "olset",
            format!("Y={y_theta}*I"),
            &base(TriggerPolicy::OpenLoop {
                y: Mat::identity(m, m) * y_theta,
            })?,
        )?,
        row(
            "clset",
            format!("Z={z_theta}*I"),
            &base(TriggerPolicy::ClosedLoop {
                z: Mat::identity(m, m) * z_theta,
            })?,
        )?,
    ])
}

/// `scheduler,param,empirical_rate,steady_trace`
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("scheduler,param,empirical_rate,steady_trace\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.scheduler, r.param, r.empirical_rate, r.steady_trace
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::open_loop_rate;

    #[test]
    fn open_loop_calibration_inverts_rate() {
        let model = SystemModel::scalar(0.8, 1.0, 1.0, 1.0, 1.0).unwrap();
        let ss = steady_state(&model).unwrap();
        for target in [0.05, 0.3, 0.5, 0.9] {
            let theta = calibrate_open_loop(&ss, target).unwrap();
            let rate = open_loop_rate(&ss, &Mat::from_element(1, 1, theta)).unwrap();
            assert!((rate - target).abs() < 1e-10);
        }
    }

    #[test]
    fn open_loop_calibration_vector_measurement() {
        let model = SystemModel::new(
            Mat::from_row_slice(2, 2, &[0.8, 1.0, 0.0, 0.95]),
            Mat::from_row_slice(2, 2, &[0.5, 0.3, 0.0, 1.4]),
            Mat::identity(2, 2),
            Mat::identity(2, 2),
            Mat::identity(2, 2),
        )
        .unwrap();
        let ss = steady_state(&model).unwrap();
        let theta = calibrate_open_loop(&ss, 0.4).unwrap();
        let rate = open_loop_rate(&ss, &(Mat::identity(2, 2) * theta)).unwrap();
        assert!((rate - 0.4).abs() < 1e-10);
    }

    #[test]
    fn closed_loop_calibration_hits_upper_bound() {
        let model = SystemModel::scalar(0.8, 1.0, 1.0, 1.0, 1.0).unwrap();
        let theta = calibrate_closed_loop(&model, 0.5).unwrap();
        let cl = closed_loop_rate_bounds(&model, &Mat::from_element(1, 1, theta)).unwrap();
        assert!((cl.rate_upper - 0.5).abs() < 1e-9);
    }

    #[test]
    fn unreachable_period_fails() {
        let model = SystemModel::scalar(0.8, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            compare_schedulers(&model, 0.7, 10, 1, 0),
            Err(Error::CalibrationFailed(_))
        ));
        assert!(compare_schedulers(&model, 1.0, 10, 1, 0).is_err());
    }
}
