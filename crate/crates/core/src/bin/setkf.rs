use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use setkf::analysis::AnalysisReport;
use setkf::design::{design_search, design_search_closed_loop, export_lmi, DesignProblem};
use setkf::estimation::TriggerPolicy;
use setkf::harness::{
    compare_schedulers, comparison_csv, monte_carlo, simulate, singer_scenario, Scenario,
    ScenarioConfig, SingerConvention, SingerParams, SingerTrigger,
};
use setkf::linalg::Mat;
use setkf::{Error, Result};

#[derive(Parser)]
#[command(name = "setkf", version, about = "Stochastic event-triggered Kalman filtering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory and write per-step records.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Which run's random stream to use.
        #[arg(long, default_value_t = 0)]
        run_index: u64,
    },
    /// Aggregate many trajectories per step.
    MonteCarlo {
        #[command(flatten)]
        common: Common,
    },
    /// Steady-state rate and covariance bounds for the configured trigger.
    Analyze {
        #[command(flatten)]
        common: Common,
    },
    /// Search the event weight meeting a covariance bound.
    Design(DesignArgs),
    /// Calibrate four schedulers to one rate and compare their covariances.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Target communication rate in (0, 1).
        #[arg(long)]
        rate: f64,
    },
    /// Singer target-tracking Monte Carlo.
    Singer(SingerArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Write to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Args)]
#[command(args_conflicts_with_subcommands = true)]
struct DesignArgs {
    #[command(subcommand)]
    action: Option<DesignAction>,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    opts: DesignOpts,
    /// Design the closed-loop weight instead of the open-loop one.
    #[arg(long)]
    closed_loop: bool,
}

#[derive(Subcommand)]
enum DesignAction {
    /// Write the design LMI in the sparse text exchange format.
    ExportLmi {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        opts: DesignOpts,
    },
}

#[derive(Args, Clone)]
struct DesignOpts {
    /// Constraint `P <= bound * I`; overrides the file's [design] table.
    #[arg(long)]
    bound: Option<f64>,
}

#[derive(Args)]
struct SingerArgs {
    #[command(flatten)]
    common: Common,
    /// Sampling period.
    #[arg(long = "T", default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    #[arg(long, default_value_t = 5.0)]
    sigma2: f64,
    /// Closed-loop trigger with `Z = z_scale * I`.
    #[arg(long, conflicts_with = "delta")]
    z_scale: Option<f64>,
    /// Innovation threshold baseline.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_enum)]
    a13: Option<A13>,
}

#[derive(Clone, Copy, ValueEnum)]
enum A13 {
    /// `A13 = T^2`
    Full,
    /// `A13 = T^2 / 2`
    Half,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate { common, run_index } => {
            let sc = scenario(&common)?;
            emit(&common, &simulate(&sc, run_index)?.to_csv())
        }
        Command::MonteCarlo { common } => {
            let sc = scenario(&common)?;
            emit(&common, &monte_carlo(&sc)?.to_csv())
        }
        Command::Analyze { common } => {
            let cfg = load(&common)?;
            let model = cfg.model.build()?;
            let report = match &cfg.trigger {
                TriggerPolicy::OpenLoop { y } => AnalysisReport::open_loop(&model, y)?,
                TriggerPolicy::ClosedLoop { z } => AnalysisReport::closed_loop(&model, z)?,
                other => {
                    return Err(Error::Config(format!(
                        "analyze needs a stochastic trigger, got {}",
                        other.name()
                    )))
                }
            };
            emit(&common, &report.to_csv())
        }
        Command::Design(args) => match args.action {
            Some(DesignAction::ExportLmi { common, opts }) => {
                let cfg = load(&common)?;
                let model = cfg.model.build()?;
                let problem = design_problem(&cfg, &opts)?;
                let delta0 = problem
                    .constraint
                    .bound_matrix(model.n())
                    .ok_or_else(|| Error::Config("export-lmi needs a matrix bound".into()))?;
                emit(&common, &export_lmi(&model, &delta0)?)
            }
            None => {
                let cfg = load(&args.common)?;
                let problem = design_problem(&cfg, &args.opts)?;
                let closed = args.closed_loop || cfg.design.as_ref().is_some_and(|d| d.closed_loop);
                let res = if closed {
                    design_search_closed_loop(&problem)?
                } else {
                    design_search(&problem)?
                };
                let mut rep = AnalysisReport::new();
                rep.push("theta", res.theta);
                rep.push(if closed { "rate_upper" } else { "rate" }, res.rate);
                rep.push("objective", res.objective);
                rep.push("gap_bound", res.gap_bound);
                rep.push_matrix(if closed { "Z" } else { "Y" }, &res.weight);
                rep.push_matrix("X_upper", &res.x_upper);
                emit(&args.common, &rep.to_csv())
            }
        },
        Command::Compare { common, rate } => {
            let cfg = load(&common)?;
            let model = cfg.model.build()?;
            let rows = compare_schedulers(
                &model,
                rate,
                common.horizon.unwrap_or(cfg.horizon),
                common.runs.unwrap_or(cfg.runs),
                common.seed.unwrap_or(cfg.seed),
            )?;
            emit(&common, &comparison_csv(&rows))
        }
        Command::Singer(args) => {
            // the file only contributes the A13 convention here
            let from_file = match &args.common.config {
                Some(_) => load(&args.common)?.singer_a13,
                None => None,
            };
            let convention = match args.a13 {
                Some(A13::Half) => SingerConvention::Half,
                Some(A13::Full) => SingerConvention::Full,
                None => from_file.unwrap_or_default(),
            };
            let params = SingerParams {
                t: args.t,
                alpha: args.alpha,
                sigma2: args.sigma2,
                convention,
            };
            let trigger = match (args.z_scale, args.delta) {
                (_, Some(delta)) => SingerTrigger::DeterministicThreshold { delta },
                (z, None) => SingerTrigger::ClosedLoop {
                    z_scale: z.unwrap_or(0.52),
                },
            };
            let mut sc = singer_scenario(&params, trigger)?;
            let c = &args.common;
            if let Some(seed) = c.seed {
                sc = sc.seed(seed);
            }
            if let Some(runs) = c.runs {
                sc = sc.runs(runs);
            }
            if let Some(horizon) = c.horizon {
                sc = sc.horizon(horizon);
            }
            emit(c, &monte_carlo(&sc)?.to_csv())
        }
    }
}

fn load(common: &Common) -> Result<ScenarioConfig> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    ScenarioConfig::load(path)
}

fn scenario(common: &Common) -> Result<Scenario> {
    let mut sc = load(common)?.scenario()?;
    if let Some(seed) = common.seed {
        sc = sc.seed(seed);
    }
    if let Some(runs) = common.runs {
        sc = sc.runs(runs);
    }
    if let Some(horizon) = common.horizon {
        sc = sc.horizon(horizon);
    }
    sc.validate()?;
    Ok(sc)
}

fn design_problem(cfg: &ScenarioConfig, opts: &DesignOpts) -> Result<DesignProblem> {
    match opts.bound {
        Some(b) => {
            let model = cfg.model.build()?;
            let n = model.n();
            let mut p = DesignProblem::new(model, Mat::identity(n, n) * b);
            if let Some(basis) = cfg.design.as_ref().and_then(|d| d.basis.clone()) {
                p = p.with_basis(basis);
            }
            Ok(p)
        }
        None => cfg.design_problem(),
    }
}

fn emit(common: &Common, text: &str) -> Result<()> {
    match common.format {
        Format::Csv => {}
    }
    match &common.output {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
