//! Simulation harness: scenarios, seeded trajectories, Monte Carlo
//! aggregation, scheduler comparison and the Singer tracking scenario.

mod compare;
mod config;
mod monte_carlo;
mod scenario;
mod simulate;
mod singer;

pub use compare::{
    calibrate_closed_loop, calibrate_open_loop, comparison_csv, compare_schedulers,
    ComparisonRow,
};
pub use config::{DesignSection, ScenarioConfig};
pub use monte_carlo::{monte_carlo, MonteCarloStats};
pub use scenario::Scenario;
pub use simulate::{
    replay, run_length_stats, run_lengths, simulate, stream_rng, RunLengthStats,
    TrajectoryRecord,
};
pub use singer::{singer_model, singer_scenario, SingerConvention, SingerParams, SingerTrigger};

/// Default burn-in for stationary averages.
pub const DEFAULT_BURN_IN: usize = 200;
