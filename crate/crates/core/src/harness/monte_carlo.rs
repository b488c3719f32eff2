use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use super::simulate::{run_lengths, simulate, TrajectoryRecord};
use super::Scenario;
use crate::error::Result;
use crate::linalg::{symmetrize, Mat};

/// Runs simulated in parallel before being folded in index order.
const BATCH: usize = 256;

/// Cross-run aggregates of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloStats {
    pub runs: usize,
    pub horizon: usize,
    /// Fraction of runs transmitting at each step.
    pub rate_by_step: Vec<f64>,
    /// Cross-run mean of `P_k^-`.
    pub prior_cov_mean: Vec<Mat>,
    /// Cross-run elementwise second moment of `P_k^-`.
    pub prior_cov_sq_mean: Vec<Mat>,
    /// Cross-run mean of `e_k^- e_k^-'`.
    pub err_outer_mean: Vec<Mat>,
    /// Mean and standard error of the per-run empirical rate.
    pub rate_mean: f64,
    pub rate_stderr: f64,
    /// Mean and standard error of the per-run time-averaged `tr(P^-)` after burn-in.
    pub steady_trace_mean: f64,
    pub steady_trace_stderr: f64,
    /// Counts of maximal drop / arrival runs by length, over all runs.
    pub drop_run_hist: BTreeMap<usize, u64>,
    pub arrival_run_hist: BTreeMap<usize, u64>,
}

struct Accumulator {
    runs: usize,
    arrivals: Vec<u64>,
    p_sum: Vec<Mat>,
    p_sq_sum: Vec<Mat>,
    e_sum: Vec<Mat>,
    rate: Welford,
    steady: Welford,
    drop_hist: BTreeMap<usize, u64>,
    arrival_hist: BTreeMap<usize, u64>,
}

#[derive(Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn stderr(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
        }
    }
}

impl Accumulator {
    fn new(horizon: usize, n: usize) -> Self {
        Self {
            runs: 0,
            arrivals: vec![0; horizon],
            p_sum: vec![Mat::zeros(n, n); horizon],
            p_sq_sum: vec![Mat::zeros(n, n); horizon],
            e_sum: vec![Mat::zeros(n, n); horizon],
            rate: Welford::default(),
            steady: Welford::default(),
            drop_hist: BTreeMap::new(),
            arrival_hist: BTreeMap::new(),
        }
    }

    fn add(&mut self, rec: &TrajectoryRecord, burn_in: usize) {
        self.runs += 1;
        for k in 0..rec.horizon() {
            self.arrivals[k] += u64::from(rec.gamma[k]);
            self.p_sum[k] += &rec.prior_cov[k];
            self.p_sq_sum[k] += rec.prior_cov[k].component_mul(&rec.prior_cov[k]);
            self.e_sum[k] += &rec.prior_err[k] * rec.prior_err[k].transpose();
        }
        self.rate.push(rec.rate());
        self.steady.push(rec.steady_trace(burn_in));
        let (drops, arrivals) = run_lengths(&rec.gamma);
        for l in drops {
            *self.drop_hist.entry(l).or_default() += 1;
        }
        for l in arrivals {
            *self.arrival_hist.entry(l).or_default() += 1;
        }
    }

    fn finish(self, horizon: usize) -> MonteCarloStats {
        let r = self.runs as f64;
        MonteCarloStats {
            runs: self.runs,
            horizon,
            rate_by_step: self.arrivals.iter().map(|a| *a as f64 / r).collect(),
            prior_cov_mean: self.p_sum.into_iter().map(|m| symmetrize(&(m / r))).collect(),
            prior_cov_sq_mean: self.p_sq_sum.into_iter().map(|m| m / r).collect(),
            err_outer_mean: self.e_sum.into_iter().map(|m| symmetrize(&(m / r))).collect(),
            rate_mean: self.rate.mean,
            rate_stderr: self.rate.stderr(),
            steady_trace_mean: self.steady.mean,
            steady_trace_stderr: self.steady.stderr(),
            drop_run_hist: self.drop_hist,
            arrival_run_hist: self.arrival_hist,
        }
    }
}

/// Simulates every run of the scenario and aggregates per step.
///
/// Trajectories are generated in parallel, but folded strictly in run-index
/// order, so the result does not depend on thread scheduling.
pub fn monte_carlo(scenario: &Scenario) -> Result<MonteCarloStats> {
    scenario.validate()?;
    let mut acc = Accumulator::new(scenario.horizon, scenario.model.n());
    let mut start = 0usize;
    while start < scenario.runs {
        let end = (start + BATCH).min(scenario.runs);
        let batch: Vec<TrajectoryRecord> = (start..end)
            .into_par_iter()
            .map(|i| simulate(scenario, i as u64))
            .collect::<Result<_>>()?;
        for rec in &batch {
            acc.add(rec, scenario.burn_in);
        }
        start = end;
    }
    Ok(acc.finish(scenario.horizon))
}

impl MonteCarloStats {
    pub fn p_trace_mean(&self, k: usize) -> f64 {
        self.prior_cov_mean[k].trace()
    }

    pub fn mse_mean(&self, k: usize) -> f64 {
        self.err_outer_mean[k].trace()
    }

    pub fn p11_mean(&self, k: usize) -> f64 {
        self.prior_cov_mean[k][(0, 0)]
    }

    pub fn mse11_mean(&self, k: usize) -> f64 {
        self.err_outer_mean[k][(0, 0)]
    }

    /// `mean(e e') / mean(P^-)` in trace.
    pub fn consistency_ratio(&self, k: usize) -> f64 {
        self.mse_mean(k) / self.p_trace_mean(k)
    }

    /// Same ratio restricted to the first state component.
    pub fn consistency_ratio_11(&self, k: usize) -> f64 {
        self.mse11_mean(k) / self.p11_mean(k)
    }

    pub fn terminal_prior_cov(&self) -> &Mat {
        self.prior_cov_mean.last().expect("horizon is positive")
    }

    /// Elementwise standard error of the terminal cross-run mean of `P^-`.
    pub fn terminal_prior_cov_stderr(&self) -> Mat {
        let k = self.horizon - 1;
        if self.runs < 2 {
            return Mat::zeros(self.prior_cov_mean[k].nrows(), self.prior_cov_mean[k].ncols());
        }
        let n = self.runs as f64;
        let mean = &self.prior_cov_mean[k];
        let var = (&self.prior_cov_sq_mean[k] - mean.component_mul(mean)) * (n / (n - 1.0));
        var.map(|v| (v.max(0.0) / n).sqrt())
    }

    /// Time-averaged empirical rate over all runs and steps.
    pub fn overall_rate(&self) -> f64 {
        self.rate_by_step.iter().sum::<f64>() / self.horizon as f64
    }

    /// `k,rate_mean,P_trace_mean,mse_mean,P11_mean,mse11_mean`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,rate_mean,P_trace_mean,mse_mean,P11_mean,mse11_mean\n");
        for k in 0..self.horizon {
            let _ = writeln!(
                out,
                "{k},{},{},{},{},{}",
                self.rate_by_step[k],
                self.p_trace_mean(k),
                self.mse_mean(k),
                self.p11_mean(k),
                self.mse11_mean(k)
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::TriggerPolicy;
    use crate::model::SystemModel;

    fn scenario() -> Scenario {
        let model = SystemModel::scalar(0.8, 1.0, 1.0, 1.0, 1.0).unwrap();
        Scenario::new(
            model,
            TriggerPolicy::ClosedLoop {
                z: Mat::identity(1, 1),
            },
        )
        .unwrap()
    }

    #[test]
    fn single_run_single_step_equals_record() {
        let sc = scenario().runs(1).horizon(1).seed(11);
        let stats = monte_carlo(&sc).unwrap();
        let rec = simulate(&sc, 0).unwrap();
        assert_eq!(stats.prior_cov_mean[0], rec.prior_cov[0]);
        assert_eq!(stats.mse_mean(0), rec.sq_err(0));
        assert_eq!(stats.rate_mean, rec.rate());
        assert_eq!(stats.rate_by_step[0], if rec.gamma[0] { 1.0 } else { 0.0 });
        assert_eq!(stats.rate_stderr, 0.0);
    }

    #[test]
    fn aggregation_is_order_independent() {
        let sc = scenario().runs(600).horizon(20).seed(5);
        let a = monte_carlo(&sc).unwrap();
        let b = monte_carlo(&sc).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
        let hist_total: u64 = a.drop_run_hist.values().chain(a.arrival_run_hist.values()).sum();
        assert!(hist_total >= 600);
    }

    #[test]
    fn csv_header() {
        let stats = monte_carlo(&scenario().runs(3).horizon(4)).unwrap();
        let csv = stats.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("k,rate_mean,P_trace_mean,mse_mean,P11_mean,mse11_mean"));
        assert_eq!(lines.count(), 4);
    }
}
