use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Scenario;
use crate::error::Result;
use crate::estimation::{measurement_update, trigger_decide, FilterKind, FilterState};
use crate::linalg::{cholesky_factor, Mat, Vector};
use crate::model::SystemModel;

/// Random stream for one run: ChaCha8 keyed by the master seed, with the run
/// index selecting the ChaCha stream. Runs are therefore independent and can
/// be generated in any order.
pub fn stream_rng(seed: u64, run_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_index);
    rng
}

fn gaussian(rng: &mut ChaCha8Rng, chol: &Mat) -> Vector {
    let xi = Vector::from_fn(chol.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
    chol * xi
}

/// Per-step output of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub gamma: Vec<bool>,
    pub prior_cov: Vec<Mat>,
    /// Prior error `x_k - xhat_k^-`.
    pub prior_err: Vec<Vector>,
}

impl TrajectoryRecord {
    fn with_capacity(horizon: usize) -> Self {
        Self {
            gamma: Vec::with_capacity(horizon),
            prior_cov: Vec::with_capacity(horizon),
            prior_err: Vec::with_capacity(horizon),
        }
    }

    pub fn horizon(&self) -> usize {
        self.gamma.len()
    }

    /// Fraction of steps with a transmission.
    pub fn rate(&self) -> f64 {
        if self.gamma.is_empty() {
            return 0.0;
        }
        self.gamma.iter().filter(|g| **g).count() as f64 / self.gamma.len() as f64
    }

    pub fn prior_trace(&self, k: usize) -> f64 {
        self.prior_cov[k].trace()
    }

    pub fn sq_err(&self, k: usize) -> f64 {
        self.prior_err[k].norm_squared()
    }

    /// Time average of `P_k^-` over `k >= burn_in` (all steps if the burn-in
    /// swallows the horizon).
    pub fn mean_prior_cov(&self, burn_in: usize) -> Mat {
        let start = if burn_in < self.horizon() { burn_in } else { 0 };
        let slice = &self.prior_cov[start..];
        let mut acc = Mat::zeros(slice[0].nrows(), slice[0].ncols());
        for p in slice {
            acc += p;
        }
        acc / slice.len() as f64
    }

    pub fn steady_trace(&self, burn_in: usize) -> f64 {
        self.mean_prior_cov(burn_in).trace()
    }

    /// `k,gamma,P_trace,sq_err,P11,sq_err11`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,gamma,P_trace,sq_err,P11,sq_err11\n");
        for k in 0..self.horizon() {
            let _ = writeln!(
                out,
                "{k},{},{},{},{},{}",
                u8::from(self.gamma[k]),
                self.prior_trace(k),
                self.sq_err(k),
                self.prior_cov[k][(0, 0)],
                self.prior_err[k][0] * self.prior_err[k][0],
            );
        }
        out
    }
}

/// Runs trajectory `run_index` of the scenario.
///
/// Per step the stream is consumed in the fixed order: process noise `w_k`
/// (n normals), measurement noise `v_k` (m normals), trigger draw `zeta_k`
/// (one uniform). The initial state takes n normals before the first step,
/// and each preroll step takes n normals.
pub fn simulate(scenario: &Scenario, run_index: u64) -> Result<TrajectoryRecord> {
    scenario.validate()?;
    let model = &scenario.model;
    let mut rng = stream_rng(scenario.seed, run_index);
    let chol_q = cholesky_factor(model.q())?;
    let chol_r = cholesky_factor(model.r())?;
    let chol_0 = cholesky_factor(model.sigma0())?;

    let mut x = model.initial_mean() + gaussian(&mut rng, &chol_0);
    let mut prior_mean = model.initial_mean().clone();
    let mut prior_cov = model.sigma0().clone();
    for _ in 0..scenario.preroll {
        x = model.a() * x + gaussian(&mut rng, &chol_q);
        prior_mean = model.a() * prior_mean;
        prior_cov = model.predict_covariance(&prior_cov);
    }
    let mut state = FilterState::with_prior(model, prior_mean, prior_cov);

    let mut record = TrajectoryRecord::with_capacity(scenario.horizon);
    for k in 0..scenario.horizon {
        let w = gaussian(&mut rng, &chol_q);
        let v = gaussian(&mut rng, &chol_r);
        let zeta: f64 = rng.random();

        let y = model.c() * &x + v;
        // sensor side: the estimator's prediction is replicated over the
        // ideal feedback channel
        let y_prior = state.predicted_measurement(model);
        let arrived = scenario.filter == FilterKind::Standard
            || trigger_decide(&scenario.trigger, &y, &y_prior, zeta, k as u64);

        record.gamma.push(arrived);
        record.prior_cov.push(state.prior_cov.clone());
        record.prior_err.push(&x - &state.prior_mean);

        // estimator side: sees y only on arrival
        let seen = if arrived { Some(&y) } else { None };
        state = measurement_update(scenario.filter, &scenario.trigger, &state, arrived, seen, model)?
            .time_update(model);
        x = model.a() * x + w;
    }
    Ok(record)
}

/// Replays the estimator on a fixed measurement/arrival sequence and returns
/// the filter state after each measurement update.
pub fn replay(
    scenario: &Scenario,
    measurements: &[Vector],
    arrivals: &[bool],
) -> Result<Vec<FilterState>> {
    let model: &SystemModel = &scenario.model;
    let mut state = FilterState::initial(model);
    let mut out = Vec::with_capacity(measurements.len());
    for (y, &arrived) in measurements.iter().zip(arrivals) {
        let seen = if arrived { Some(y) } else { None };
        let post = measurement_update(scenario.filter, &scenario.trigger, &state, arrived, seen, model)?;
        state = post.time_update(model);
        out.push(post);
    }
    Ok(out)
}

/// Lengths of maximal runs of drops and of arrivals, in order of occurrence.
pub fn run_lengths(gamma: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let mut drops = Vec::new();
    let mut arrivals = Vec::new();
    let mut iter = gamma.iter().peekable();
    while let Some(&g) = iter.next() {
        let mut len = 1;
        while iter.peek() == Some(&&g) {
            iter.next();
            len += 1;
        }
        if g {
            arrivals.push(len);
        } else {
            drops.push(len);
        }
    }
    (drops, arrivals)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunLengthStats {
    pub l: usize,
    /// Maximal drop runs of length at least `l`.
    pub drop_runs: usize,
    pub arrival_runs: usize,
    /// Fraction of length-`l` windows with every packet dropped.
    pub drop_window_frequency: f64,
    pub arrival_window_frequency: f64,
}

pub fn run_length_stats(record: &TrajectoryRecord, l: usize) -> RunLengthStats {
    let g = &record.gamma;
    let (drops, arrivals) = run_lengths(g);
    let windows = if l == 0 || l > g.len() {
        0
    } else {
        g.len() - l + 1
    };
    let (mut all_drop, mut all_arrive) = (0usize, 0usize);
    for w in 0..windows {
        let win = &g[w..w + l];
        if win.iter().all(|x| !x) {
            all_drop += 1;
        }
        if win.iter().all(|x| *x) {
            all_arrive += 1;
        }
    }
    let freq = |c: usize| if windows == 0 { 0.0 } else { c as f64 / windows as f64 };
    let count = |runs: &[usize]| if l == 0 { 0 } else { runs.iter().filter(|r| **r >= l).count() };
    RunLengthStats {
        l,
        drop_runs: count(&drops),
        arrival_runs: count(&arrivals),
        drop_window_frequency: freq(all_drop),
        arrival_window_frequency: freq(all_arrive),
    }
}
