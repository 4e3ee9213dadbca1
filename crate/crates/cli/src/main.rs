//! `maxregret` — worst-case regret of plug-in treatment rules.
//!
//! Scenarios come in as JSON documents (file or stdin); reports go out as
//! fixed-precision CSV or full-precision JSON. Exit codes: 0 success,
//! 2 validation or usage error, 3 infeasible state space, 4 exact
//! enumeration over the cell cap.

mod output;
mod presets;
mod scenario;

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use maxregret_core::engine::{self, EngineMode};
use maxregret_core::{analytic, Error as CoreError};

use output::{ReportEnvelope, WeightTableRow};
use scenario::{EngineOverrides, Scenario, SpaceSpec};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("scenario parse error: {0}")]
    Parse(#[source] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(CoreError::InfeasibleSpace(_)) => 3,
            CliError::Core(CoreError::EnumerationTooLarge { .. }) => 4,
            _ => 2,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "maxregret",
    version,
    about = "Worst-case expected regret of plug-in rules for binary treatment choice"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, Debug, ValueEnum)]
enum ModeFlag {
    Exact,
    Mc,
}

impl From<ModeFlag> for EngineMode {
    fn from(flag: ModeFlag) -> EngineMode {
        match flag {
            ModeFlag::Exact => EngineMode::Exact,
            ModeFlag::Mc => EngineMode::MonteCarlo,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone, Copy, Default)]
struct EngineFlags {
    /// Evaluation mode; defaults to exact whenever the design is enumerable.
    #[arg(long, value_enum)]
    mode: Option<ModeFlag>,
    /// Monte Carlo draws per state.
    #[arg(long)]
    draws: Option<u32>,
    /// Seed for the per-state Monte Carlo streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Grid points on the first state axis.
    #[arg(long)]
    grid0: Option<usize>,
    /// Grid points on the second state axis.
    #[arg(long)]
    grid1: Option<usize>,
    /// Evaluate states on a single thread (results are identical either way).
    #[arg(long)]
    serial: bool,
    /// Cell cap for exact enumeration.
    #[arg(long)]
    enumeration_cap: Option<u64>,
}

impl EngineFlags {
    fn overrides(&self) -> EngineOverrides {
        EngineOverrides {
            mode: self.mode.map(EngineMode::from),
            draws: self.draws,
            seed: self.seed,
            parallel: if self.serial { Some(false) } else { None },
            enumeration_cap: self.enumeration_cap,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct OutputFlags {
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write the report to this path instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Maximum expected regret of the scenario's estimator over its state space.
    Compute {
        /// Scenario document path, or '-' for stdin.
        #[arg(long)]
        scenario: String,
        #[command(flatten)]
        engine: EngineFlags,
        #[command(flatten)]
        output: OutputFlags,
        /// Also write the evaluated state grid (CSV, one state per row).
        #[arg(long)]
        grid_out: Option<PathBuf>,
    },
    /// Sweep the two-group pooling weight and report the minimizer.
    SweepWeights {
        /// Scenario document path, or '-' for stdin.
        #[arg(long)]
        scenario: String,
        /// Spacing of the weight grid on [0.5, 1].
        #[arg(long, default_value_t = 0.01)]
        weight_step: f64,
        #[command(flatten)]
        engine: EngineFlags,
        #[command(flatten)]
        output: OutputFlags,
    },
    /// Large-deviation upper bounds on maximum regret for the scenario.
    Bounds {
        /// Scenario document path, or '-' for stdin.
        #[arg(long)]
        scenario: String,
        /// Evaluate the bounds at this margin instead of minimizing over it.
        #[arg(long)]
        delta: Option<f64>,
        #[command(flatten)]
        output: OutputFlags,
    },
    /// Closed-form minimax-regret values for the scenario.
    Mmr {
        /// Scenario document path, or '-' for stdin.
        #[arg(long)]
        scenario: String,
        #[command(flatten)]
        output: OutputFlags,
    },
    /// Reproduce the two-group weighted-average table.
    Table1 {
        /// Spacing of the weight grid on [0.5, 1].
        #[arg(long, default_value_t = 0.01)]
        weight_step: f64,
        #[command(flatten)]
        engine: EngineFlags,
        #[command(flatten)]
        output: OutputFlags,
    },
    /// Reproduce the ecological-inference example.
    Eco {
        /// Sample size for the target group.
        #[arg(long, default_value_t = 10)]
        n0: u32,
        /// Sample size for the other group.
        #[arg(long, default_value_t = 10)]
        n1: u32,
        #[command(flatten)]
        engine: EngineFlags,
        #[command(flatten)]
        output: OutputFlags,
        /// Also write the evaluated state grid (CSV, one state per row).
        #[arg(long)]
        grid_out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        // A closed pipe on the receiving end is not our failure.
        Err(CliError::Io(err)) if err.kind() == std::io::ErrorKind::BrokenPipe => {
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn load_scenario(arg: &str) -> Result<Scenario, CliError> {
    let text = if arg == "-" {
        let mut buffer = String::new();
        std::io::stdin().read_to_string(&mut buffer)?;
        buffer
    } else {
        std::fs::read_to_string(arg)?
    };
    Scenario::parse(&text)
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

/// Writes a result either as its CSV table or as a JSON envelope echoing the
/// scenario.
fn emit<S, T>(
    flags: &OutputFlags,
    command: &'static str,
    scenario: &S,
    result: &T,
    write_csv: impl FnOnce(&mut dyn Write, &T) -> Result<(), CliError>,
) -> Result<(), CliError>
where
    S: Serialize,
    T: Serialize,
{
    let mut out = open_out(&flags.out)?;
    match flags.format {
        Format::Csv => write_csv(&mut *out, result)?,
        Format::Json => ReportEnvelope::new(command, scenario, result).write_json(&mut *out)?,
    }
    out.flush()?;
    Ok(())
}

fn write_grid_file(path: &Path, grid: &maxregret_core::StateGrid) -> Result<(), CliError> {
    let mut out = BufWriter::new(File::create(path)?);
    output::write_grid(&mut out, grid)?;
    out.flush()?;
    Ok(())
}

fn format_state(state: &[f64]) -> String {
    let coords: Vec<String> = state.iter().map(|p| format!("{p:.6}")).collect();
    format!("({})", coords.join(", "))
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Compute {
            scenario,
            engine,
            output,
            grid_out,
        } => {
            let scenario = load_scenario(&scenario)?;
            scenario.require_informative()?;
            let estimator = scenario
                .estimator
                .clone()
                .ok_or_else(|| CliError::Usage("compute needs an estimator section".to_string()))?;
            let welfare = scenario.welfare_spec()?;
            let cfg = scenario.resolve_engine(&engine.overrides());
            let (grid0, grid1) = scenario.resolve_grids(engine.grid0, engine.grid1);
            let grid = scenario.space.grid(grid0, grid1)?;
            if let Some(path) = &grid_out {
                write_grid_file(path, &grid)?;
            }
            let report = engine::max_regret(&estimator, welfare, &grid, &scenario.design, &cfg)?;
            eprintln!(
                "max regret {:.6} at state {} over {} states",
                report.max_regret,
                format_state(&report.argmax_state),
                report.per_state.len()
            );
            emit(&output, "compute", &scenario, &report, |out, r| {
                output::write_state_table(out, r)
            })
        }

        Command::SweepWeights {
            scenario,
            weight_step,
            engine,
            output,
        } => {
            let scenario = load_scenario(&scenario)?;
            scenario.require_informative()?;
            let SpaceSpec::BoundedVariation(space) = &scenario.space else {
                return Err(CliError::Usage(
                    "sweep-weights requires a bounded-variation space".to_string(),
                ));
            };
            let welfare = scenario.welfare_spec()?;
            let cfg = scenario.resolve_engine(&engine.overrides());
            let (grid0, grid1) = scenario.resolve_grids(engine.grid0, engine.grid1);
            let search = engine::optimal_weight(
                space,
                welfare,
                &scenario.design,
                weight_step,
                grid0,
                grid1,
                &cfg,
            )?;
            eprintln!(
                "minimized max regret {:.6} at weight {:.2} ({} sweep points)",
                search.min_max_regret,
                search.best_weight,
                search.curve.len()
            );
            emit(&output, "sweep-weights", &scenario, &search, |out, s| {
                output::write_weight_curve(out, s)
            })
        }

        Command::Bounds {
            scenario,
            delta,
            output,
        } => {
            let scenario = load_scenario(&scenario)?;
            let welfare = scenario.welfare_spec()?;
            let result = compute_bounds(&scenario, welfare, delta)?;
            emit(&output, "bounds", &scenario, &result, |out, rows| {
                output::write_named_values(
                    out,
                    &rows
                        .iter()
                        .flat_map(|row| {
                            [
                                output::named(&format!("{}_delta_star", row.estimator), row.delta_star),
                                output::named(&format!("{}_bound", row.estimator), row.bound_value),
                            ]
                        })
                        .collect::<Vec<_>>(),
                )
            })
        }

        Command::Mmr { scenario, output } => {
            let scenario = load_scenario(&scenario)?;
            scenario.require_informative()?;
            let welfare = scenario.welfare_spec()?;
            let result = compute_mmr(&scenario, welfare)?;
            emit(&output, "mmr", &scenario, &result, |out, r| {
                output::write_named_values(out, &r.rows())
            })
        }

        Command::Table1 {
            weight_step,
            engine,
            output,
        } => {
            let space = presets::table_space();
            let welfare = presets::table_welfare();
            let grid0 = engine.grid0.unwrap_or(50);
            let grid1 = engine.grid1.unwrap_or(50);
            let overrides = engine.overrides();

            let mut rows = Vec::new();
            for (size0, size1) in presets::TABLE_DESIGNS {
                let design = maxregret_core::SamplingDesign::new(vec![size0, size1]);
                let cfg = preset_engine(&design, &overrides);
                let search = engine::optimal_weight(
                    &space,
                    welfare,
                    &design,
                    weight_step,
                    grid0,
                    grid1,
                    &cfg,
                )?;
                let at_weights = presets::TABLE_WEIGHTS
                    .iter()
                    .map(|&target| {
                        search
                            .curve
                            .iter()
                            .min_by(|a, b| {
                                (a.weight0 - target)
                                    .abs()
                                    .total_cmp(&(b.weight0 - target).abs())
                            })
                            .map(|point| point.max_regret)
                            .unwrap_or(f64::NAN)
                    })
                    .collect();
                eprintln!(
                    "N=({size0},{size1}): minimized {:.4} at weight {:.2}",
                    search.min_max_regret, search.best_weight
                );
                rows.push(WeightTableRow {
                    size0,
                    size1,
                    at_weights,
                    min_max_regret: search.min_max_regret,
                    best_weight: search.best_weight,
                });
            }
            let preset = serde_json::json!({
                "welfare": {"aggressive": welfare.aggressive()},
                "space": SpaceSpec::BoundedVariation(space),
                "designs": presets::TABLE_DESIGNS,
                "weight_step": weight_step,
                "grids": {"grid0": grid0, "grid1": grid1},
            });
            emit(&output, "table1", &preset, &rows, |out, r| {
                output::write_weight_table(out, r)
            })
        }

        Command::Eco {
            n0,
            n1,
            engine,
            output,
            grid_out,
        } => {
            let scenario = presets::eco_scenario(n0, n1);
            let estimator = scenario.estimator.clone().expect("preset carries an estimator");
            let welfare = scenario.welfare_spec()?;
            let cfg = scenario.resolve_engine(&engine.overrides());
            let (grid0, grid1) = scenario.resolve_grids(engine.grid0, engine.grid1);
            let grid = scenario.space.grid(grid0, grid1)?;
            if let Some(path) = &grid_out {
                write_grid_file(path, &grid)?;
            }
            let report = engine::max_regret(&estimator, welfare, &grid, &scenario.design, &cfg)?;
            eprintln!(
                "max regret {:.6} at state {} over {} states",
                report.max_regret,
                format_state(&report.argmax_state),
                report.per_state.len()
            );
            emit(&output, "eco", &scenario, &report, |out, r| {
                output::write_state_table(out, r)
            })
        }
    }
}

/// Engine config for presets, which have no scenario document to read from.
fn preset_engine(
    design: &maxregret_core::SamplingDesign,
    overrides: &EngineOverrides,
) -> maxregret_core::EngineConfig {
    let mut cfg = maxregret_core::EngineConfig::default();
    cfg.enumeration_cap = overrides.enumeration_cap.unwrap_or(cfg.enumeration_cap);
    cfg.mode = overrides.mode.unwrap_or({
        if design.enumeration_cells() <= u128::from(cfg.enumeration_cap) {
            EngineMode::Exact
        } else {
            EngineMode::MonteCarlo
        }
    });
    cfg.draws = overrides.draws.unwrap_or(cfg.draws);
    cfg.seed = overrides.seed.unwrap_or(cfg.seed);
    cfg.parallel = overrides.parallel.unwrap_or(cfg.parallel);
    cfg
}

#[derive(Debug, Serialize)]
struct BoundRow {
    estimator: &'static str,
    delta_star: f64,
    bound_value: f64,
    gap_surveillance_side: f64,
    gap_aggressive_side: f64,
}

fn bound_row(estimator: &'static str, bound: analytic::BoundResult) -> BoundRow {
    BoundRow {
        estimator,
        delta_star: bound.delta_star,
        bound_value: bound.bound_value,
        gap_surveillance_side: bound.side_gaps.0,
        gap_aggressive_side: bound.side_gaps.1,
    }
}

fn compute_bounds(
    scenario: &Scenario,
    welfare: maxregret_core::WelfareSpec,
    delta: Option<f64>,
) -> Result<Vec<BoundRow>, CliError> {
    match &scenario.space {
        SpaceSpec::Interval(space) => {
            let trials = scenario.design.sizes[0];
            let bound = analytic::hoeffding_bound(space.p_min, space.p_max, welfare, trials, delta)?;
            Ok(vec![bound_row("sample_rate", bound)])
        }
        SpaceSpec::BoundedVariation(space) => {
            let mut rows = Vec::new();
            if scenario.design.sizes[0] > 0 {
                let own = analytic::hoeffding_bound(
                    space.interval0.p_min,
                    space.interval0.p_max,
                    welfare,
                    scenario.design.sizes[0],
                    delta,
                )?;
                rows.push(bound_row("sample_rate", own));
            }
            // The pooling bias bound needs a cap on |p0 - p1|.
            let spread = space.diff_min.abs().max(space.diff_max.abs());
            let pooled = analytic::pooled_bound(
                space.interval0.p_min,
                space.interval0.p_max,
                welfare,
                scenario.design.sizes[0],
                scenario.design.sizes[1],
                spread,
                delta,
            )?;
            rows.push(bound_row("pooled", pooled));
            Ok(rows)
        }
        SpaceSpec::Ecological(_) => Err(CliError::Usage(
            "bounds are defined for interval and bounded-variation spaces".to_string(),
        )),
    }
}

#[derive(Debug, Serialize)]
struct MmrResult {
    no_data: analytic::NoDataMmr,
    randomized: analytic::RandomizedMmr,
    crossover_lower: f64,
    crossover_upper: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    single_draw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    neighbor_draw: Option<f64>,
}

impl MmrResult {
    fn rows(&self) -> Vec<(String, String)> {
        let mut rows = vec![
            output::named("no_data_value", self.no_data.value),
            (
                "no_data_choice".to_string(),
                self.no_data.optimal_choice.to_string(),
            ),
            output::named("randomized_prob_aggressive", self.randomized.prob_aggressive),
            output::named("randomized_value", self.randomized.value),
            output::named("crossover_lower", self.crossover_lower),
            output::named("crossover_upper", self.crossover_upper),
        ];
        if let Some(value) = self.single_draw {
            rows.push(output::named("single_draw_value", value));
        }
        if let Some(value) = self.neighbor_draw {
            rows.push(output::named("neighbor_draw_value", value));
        }
        rows
    }
}

fn compute_mmr(
    scenario: &Scenario,
    welfare: maxregret_core::WelfareSpec,
) -> Result<MmrResult, CliError> {
    let range = scenario.space.target_range()?;
    let no_data = analytic::mmr_no_data(range.p_min, range.p_max, welfare)?;
    let randomized = analytic::mmr_randomized(range.p_min, range.p_max, welfare)?;
    let (crossover_lower, crossover_upper) = analytic::crossover_thresholds();

    let single_draw = match &scenario.space {
        SpaceSpec::Interval(space) if space.p_min == 0.0 && space.p_max == 1.0 => {
            Some(analytic::single_draw_max_regret(welfare))
        }
        _ => None,
    };
    let neighbor_draw = match &scenario.space {
        SpaceSpec::BoundedVariation(space)
            if space.interval1 == maxregret_core::IntervalSpace::unit()
                && space.diff_min == -space.diff_max =>
        {
            analytic::neighbor_draw_max_regret(welfare, space.diff_max).ok()
        }
        _ => None,
    };

    Ok(MmrResult {
        no_data,
        randomized,
        crossover_lower,
        crossover_upper,
        single_draw,
        neighbor_draw,
    })
}
