//! `romp` - plan, simulate and benchmark recharging missions.
//!
//! Exit codes: 0 on success, 2 when the mission is infeasible, 3 on a file
//! parse error.

mod bench;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use romp_core::{
    compute_attrs, execute_mission, generate_scenario, generate_wind, io, prepare_plan,
    FitnessWeights, IoError, MissionError, PlanFile, PlanMode, SolveError, Vec3, WindField,
    WindModel,
};

#[derive(Parser)]
#[command(name = "romp", version, about = "Mission planner for UAV sensor recharging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Strategy {
    ChargeMore,
    Balance,
    SaveEnergy,
}

impl Strategy {
    fn weights(self) -> FitnessWeights {
        match self {
            Strategy::ChargeMore => FitnessWeights::charge_more(),
            Strategy::Balance => FitnessWeights::balance(),
            Strategy::SaveEnergy => FitnessWeights::save_energy(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Tsp,
    Op,
}

#[derive(Args)]
struct PlanArgs {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Forecast wind field; still air when omitted.
    #[arg(long)]
    wind: Option<PathBuf>,
    /// Planner/vehicle/replan configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Search workers; more than one runs the distributed search.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Fitness strategy; overrides the configured weights.
    #[arg(long, value_enum)]
    strategy: Option<Strategy>,
    #[arg(long, value_enum, default_value_t = Mode::Op)]
    mode: Mode,
    /// Output plan file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Plan file produced by `romp plan`.
    #[arg(long)]
    plan: PathBuf,
    /// Scenario the plan was computed for.
    #[arg(long)]
    scenario: PathBuf,
    /// Ground-truth wind during execution; still air when omitted.
    #[arg(long)]
    wind: Option<PathBuf>,
    /// Forecast wind for in-flight checks; defaults to the truth field.
    #[arg(long)]
    forecast_wind: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Energy-event script (JSON list).
    #[arg(long)]
    events: Option<PathBuf>,
    /// Output mission log (one JSON record per line).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum GenerateWhat {
    /// Random sensor deployment.
    Scenario {
        #[arg(long, default_value_t = 40)]
        nodes: usize,
        /// Field size as WIDTHxHEIGHT in meters, e.g. 2500x2500.
        #[arg(long, value_parser = parse_area, default_value = "2500x2500")]
        area: (f64, f64),
        /// Fraction of temperature-kind sensors.
        #[arg(long, default_value_t = 0.5)]
        kind_mix: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Wind field file.
    Wind {
        #[arg(long, value_enum, default_value_t = WindKind::Still)]
        model: WindKind,
        /// Constant wind vector as "x,y,z" m/s.
        #[arg(long, value_parser = parse_vector, allow_hyphen_values = true)]
        vector: Option<Vec3>,
        /// Grid size in cubes as NXxNYxNZ.
        #[arg(long, value_parser = parse_dims, default_value = "100x100x2")]
        dims: (usize, usize, usize),
        #[arg(long, default_value_t = 25.0)]
        cube_size: f64,
        #[arg(long, default_value_t = 10.0)]
        time_step: f64,
        #[arg(long, default_value_t = 60)]
        frames: usize,
        /// Mean speed of the gusty model, m/s.
        #[arg(long, default_value_t = 5.0)]
        mean_speed: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum WindKind {
    Still,
    Constant,
    Gusty,
}

#[derive(Subcommand)]
enum Command {
    /// Compute an offline mission plan.
    Plan(PlanArgs),
    /// Fly a plan under ground-truth wind and energy events.
    Simulate(SimulateArgs),
    /// Emit scenario or wind fixtures.
    Generate {
        #[command(subcommand)]
        what: GenerateWhat,
    },
    /// Run an experiment sweep and emit CSV.
    Bench(bench::BenchArgs),
    /// Aggregate a sweep CSV into per-group means.
    Report(bench::ReportArgs),
}

fn parse_area(s: &str) -> Result<(f64, f64), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
    Ok((
        w.parse().map_err(|e| format!("bad width: {e}"))?,
        h.parse().map_err(|e| format!("bad height: {e}"))?,
    ))
}

fn parse_dims(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    if parts.len() != 3 {
        return Err("expected NXxNYxNZ".into());
    }
    let p = |x: &str| x.parse::<usize>().map_err(|e| format!("bad dimension: {e}"));
    Ok((p(parts[0])?, p(parts[1])?, p(parts[2])?))
}

fn parse_vector(s: &str) -> Result<Vec3, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected x,y,z".into());
    }
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("bad component: {e}"));
    Ok(Vec3::new(p(parts[0])?, p(parts[1])?, p(parts[2])?))
}

fn load_config(path: Option<&PathBuf>) -> Result<io::ConfigFile> {
    match path {
        Some(p) => Ok(io::read_config(p)?),
        None => Ok(io::ConfigFile::default()),
    }
}

fn load_wind(path: Option<&PathBuf>) -> Result<WindField> {
    match path {
        Some(p) => Ok(io::read_wind(p)?),
        None => Ok(WindField::still()),
    }
}

fn run_plan(args: &PlanArgs) -> Result<()> {
    let scenario = io::read_scenario(&args.scenario)?;
    let mut config = load_config(args.config.as_ref())?;
    if let Some(seed) = args.seed {
        config.planner.rng_seed = seed;
    }
    if let Some(strategy) = args.strategy {
        let w = strategy.weights();
        config.planner.weight_recharge = w.recharge;
        config.planner.weight_discharge = w.discharge;
    }
    config.planner.validate()?;
    let forecast = load_wind(args.wind.as_ref())?;
    let mode = match args.mode {
        Mode::Tsp => PlanMode::Tsp,
        Mode::Op => PlanMode::Op,
    };

    let graph = scenario.graph(&config.planner)?;
    let outcome = prepare_plan(
        &graph,
        &config.pdv,
        &forecast,
        &config.planner,
        &config.replan,
        mode,
        args.workers.max(1),
    )?;
    let attrs = compute_attrs(
        &outcome.report,
        &graph,
        config.pdv.battery_energy_wh,
        outcome.solver_seconds,
    )?;
    io::write_plan(
        &args.out,
        &PlanFile { route: outcome.route.clone(), attrs: attrs.clone(), report: outcome.report },
    )?;
    println!(
        "planned {} of {} nodes: {:.2} Wh estimated, R_re {:.1}%, R_de {:.1}%, solver {:.2} s -> {}",
        outcome.route.len(),
        graph.len(),
        attrs.e_de_star_wh,
        attrs.r_re_pct,
        attrs.r_de_pct,
        attrs.t_s,
        args.out.display()
    );
    Ok(())
}

fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let scenario = io::read_scenario(&args.scenario)?;
    let config = load_config(args.config.as_ref())?;
    let plan = io::read_plan(&args.plan)?;
    let truth = load_wind(args.wind.as_ref())?;
    let forecast = match &args.forecast_wind {
        Some(p) => io::read_wind(p)?,
        None => truth.clone(),
    };
    let events = match &args.events {
        Some(p) => io::read_events(p)?,
        None => Vec::new(),
    };

    let graph = scenario.graph(&config.planner)?;
    let log = execute_mission(
        &plan.route,
        &graph,
        &config.pdv,
        &truth,
        &forecast,
        &events,
        &config.planner,
        &config.replan,
    )?;
    io::write_mission_log(&args.out, &log)?;
    println!(
        "{}: charged {} nodes, {} replans, {:.2} Wh left -> {}",
        if log.completed { "mission complete" } else { "MISSION FAILED" },
        log.charged.len(),
        log.replans,
        log.final_remaining_wh,
        args.out.display()
    );
    Ok(())
}

fn run_generate(what: &GenerateWhat) -> Result<()> {
    match what {
        GenerateWhat::Scenario { nodes, area, kind_mix, seed, out } => {
            let scenario = generate_scenario(*nodes, *area, *kind_mix, *seed);
            io::write_scenario(out, &scenario)?;
            println!("wrote {} nodes over {:.0}x{:.0} m² -> {}", nodes, area.0, area.1, out.display());
        }
        GenerateWhat::Wind {
            model,
            vector,
            dims,
            cube_size,
            time_step,
            frames,
            mean_speed,
            seed,
            out,
        } => {
            let model = match model {
                WindKind::Still => WindModel::Still,
                WindKind::Constant => WindModel::Constant(
                    vector
                        .ok_or_else(|| anyhow::anyhow!("--vector is required for the constant model"))?,
                ),
                WindKind::Gusty => WindModel::Gusty { seed: *seed, mean_speed: *mean_speed },
            };
            let field = generate_wind(*dims, *cube_size, *time_step, *frames, model);
            io::write_wind(out, &field)?;
            println!(
                "wrote wind field {}x{}x{} cubes, {} frames -> {}",
                field.dims().0,
                field.dims().1,
                field.dims().2,
                field.frames().len(),
                out.display()
            );
        }
    }
    Ok(())
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(io_err) = cause.downcast_ref::<IoError>() {
            if matches!(io_err, IoError::Parse { .. } | IoError::Malformed { .. }) {
                return 3;
            }
        }
        if let Some(solve) = cause.downcast_ref::<SolveError>() {
            if matches!(solve, SolveError::Infeasible { .. }) {
                return 2;
            }
        }
        if let Some(mission) = cause.downcast_ref::<MissionError>() {
            if matches!(mission, MissionError::Solve(SolveError::Infeasible { .. })) {
                return 2;
            }
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Plan(args) => run_plan(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Generate { what } => run_generate(what),
        Command::Bench(args) => bench::run_bench(args),
        Command::Report(args) => bench::run_report(args),
    };
    match result.context("command failed") {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
