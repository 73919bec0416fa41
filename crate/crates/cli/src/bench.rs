//! Experiment sweeps and CSV aggregation.
//!
//! `bench strategy` compares the three search strategies over seeded
//! deployments; `bench scaling` recharges whole networks of growing size;
//! `bench parallel` measures how often the search beats its initial
//! solution as the population grows. Every sweep is reproducible from its
//! master seed.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};

use romp_core::{
    compute_attrs, evolve_parallel_traced, generate_scenario, plan_full_network, prepare_plan,
    solve_initial, Cbha, FitnessWeights, MissionGraph, PlanMode, PlannerConfig, ReplanConfig,
    WindField, WorkerPlan,
};

#[derive(Args)]
pub struct BenchArgs {
    #[command(subcommand)]
    suite: Suite,
}

#[derive(Subcommand)]
enum Suite {
    /// Save-energy / balance / charge-more comparison over seeded scenarios.
    Strategy {
        #[arg(long, default_value_t = 50)]
        scenarios: usize,
        #[arg(long, default_value_t = 20)]
        nodes: usize,
        #[arg(long, value_parser = crate::parse_area, default_value = "4000x4000")]
        area: (f64, f64),
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Whole-network recharging across increasing node counts.
    Scaling {
        /// Comma-separated node counts.
        #[arg(long, value_delimiter = ',', default_values_t = vec![10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 110, 120, 130, 140, 150])]
        sizes: Vec<usize>,
        #[arg(long, value_parser = crate::parse_area, default_value = "2000x2000")]
        area: (f64, f64),
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Improvement probability versus population size.
    Parallel {
        #[arg(long, value_delimiter = ',', default_values_t = vec![50, 200, 800])]
        pops: Vec<usize>,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[arg(long, default_value_t = 30)]
        runs: u64,
        #[arg(long, default_value_t = 100)]
        generations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn run_bench(args: &BenchArgs) -> Result<()> {
    match &args.suite {
        Suite::Strategy { scenarios, nodes, area, seed, workers, out } => {
            bench_strategy(*scenarios, *nodes, *area, *seed, *workers, out)
        }
        Suite::Scaling { sizes, area, seed, workers, out } => {
            bench_scaling(sizes, *area, *seed, *workers, out)
        }
        Suite::Parallel { pops, workers, runs, generations, seed, out } => {
            bench_parallel(pops, *workers, *runs, *generations, *seed, out)
        }
    }
}

fn bench_strategy(
    scenarios: usize,
    nodes: usize,
    area: (f64, f64),
    seed: u64,
    workers: usize,
    out: &PathBuf,
) -> Result<()> {
    let pdv = romp_core::PdvParams::default();
    let field = WindField::still();
    let replan = ReplanConfig::default();
    let strategies = [
        ("save-energy", FitnessWeights::save_energy()),
        ("balance", FitnessWeights::balance()),
        ("charge-more", FitnessWeights::charge_more()),
    ];

    let mut rows = String::from(
        "scenario_seed,strategy,w_re,nodes_planned,e_re_star_j,e_de_star_wh,r_re_pct,r_de_pct,r_rd_permille,t_s\n",
    );
    let mut skipped = 0;
    for i in 0..scenarios {
        let scenario_seed = seed + i as u64;
        // Requested nodes arrive at most half charged.
        let mut scenario = generate_scenario(nodes, area, 0.5, scenario_seed);
        scenario.nodes.iter_mut().for_each(|n| n.v_now *= 0.5);
        let planner = PlannerConfig::default();
        let graph = match scenario.graph(&planner) {
            Ok(g) => g,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        for (name, weights) in &strategies {
            let config = PlannerConfig {
                weight_recharge: weights.recharge,
                weight_discharge: weights.discharge,
                ..PlannerConfig::default()
            };
            let plan = prepare_plan(&graph, &pdv, &field, &config, &replan, PlanMode::Op, workers)?;
            let attrs =
                compute_attrs(&plan.report, &graph, pdv.battery_energy_wh, plan.solver_seconds)?;
            rows.push_str(&format!(
                "{scenario_seed},{name},{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
                weights.recharge,
                plan.route.len(),
                attrs.e_re_star_j,
                attrs.e_de_star_wh,
                attrs.r_re_pct,
                attrs.r_de_pct,
                attrs.r_rd_permille,
                attrs.t_s,
            ));
        }
        if (i + 1) % 10 == 0 {
            println!("strategy sweep: {}/{scenarios} scenarios", i + 1);
        }
    }
    fs::write(out, rows).with_context(|| format!("writing {}", out.display()))?;
    if skipped > 0 {
        println!("skipped {skipped} scenarios with no eligible nodes");
    }
    println!("strategy sweep -> {}", out.display());
    Ok(())
}

fn bench_scaling(
    sizes: &[usize],
    area: (f64, f64),
    seed: u64,
    workers: usize,
    out: &PathBuf,
) -> Result<()> {
    let pdv = romp_core::PdvParams::default();
    let field = WindField::still();
    let replan = ReplanConfig::default();
    let planner = PlannerConfig::default();

    let mut rows = String::from(
        "n_nodes,n_iter,recharged_nodes,e_re_star_j,e_de_star_wh,r_re_pct,r_de_pct,r_rd_permille,t_s\n",
    );
    for &n in sizes {
        let scenario = generate_scenario(n, area, 0.5, seed + n as u64);
        let nodes = scenario.sensor_nodes(planner.prize_upper)?;
        let rechargeable: f64 = nodes
            .iter()
            .filter(|nd| nd.prize >= planner.prize_lower)
            .map(romp_core::recharged_energy)
            .sum();
        let begin = Instant::now();
        let logs = plan_full_network(
            nodes,
            scenario.start,
            scenario.end,
            &pdv,
            &field,
            &field,
            &planner,
            &replan,
            workers,
        )?;
        let elapsed = begin.elapsed().as_secs_f64();

        let n_iter = logs.len();
        let recharged_nodes: usize = logs.iter().map(|l| l.charged.len()).sum();
        let e_re: f64 = logs.iter().map(|l| l.report.e_recharged_j).sum();
        let e_de: f64 = logs.iter().map(|l| l.report.discharged_wh()).sum();
        let r_re = if rechargeable > 0.0 { e_re / rechargeable * 100.0 } else { 0.0 };
        let r_de = e_de / (n_iter.max(1) as f64 * pdv.battery_energy_wh) * 100.0;
        let r_rd = if e_de > 0.0 { e_re / (3600.0 * e_de) * 1000.0 } else { 0.0 };
        rows.push_str(&format!(
            "{n},{n_iter},{recharged_nodes},{e_re:.4},{e_de:.4},{r_re:.4},{r_de:.4},{r_rd:.4},{elapsed:.4}\n"
        ));
        println!("scaling sweep: {n} nodes -> {n_iter} missions in {elapsed:.1} s");
    }
    fs::write(out, rows).with_context(|| format!("writing {}", out.display()))?;
    println!("scaling sweep -> {}", out.display());
    Ok(())
}

fn bench_parallel(
    pops: &[usize],
    workers: usize,
    runs: u64,
    generations: usize,
    seed: u64,
    out: &PathBuf,
) -> Result<()> {
    let pdv = romp_core::PdvParams::default();
    let field = WindField::still();
    // Requested nodes arrive at most half charged.
    let mut scenario = generate_scenario(12, (1_400.0, 1_400.0), 0.0, 7_084 ^ seed);
    scenario.nodes.iter_mut().for_each(|n| n.v_now *= 0.5);
    let base_planner = PlannerConfig::default();
    let nodes = scenario.sensor_nodes(base_planner.prize_upper)?;
    let total_prize: u32 =
        nodes.iter().filter(|nd| nd.prize >= 6).map(|nd| nd.prize).sum();
    let graph = MissionGraph::build(nodes, scenario.start, scenario.end, 6)?;

    let mut rows =
        String::from("population,workers,run,improved,initial_fitness,final_fitness,t_s\n");
    for &population in pops {
        let mut improved = 0usize;
        for run in 0..runs {
            let config = PlannerConfig {
                population,
                generations,
                prize_budget: (total_prize * 55 / 100).max(10),
                rng_seed: seed + 1_000 + run,
                ..PlannerConfig::default()
            };
            let initial = solve_initial(&graph, &pdv, &config, PlanMode::Op)?;
            let cbha = Cbha::new(
                &graph,
                &pdv,
                &field,
                FitnessWeights::balance(),
                &config,
                pdv.battery_energy_wh,
            )?;
            let initial_fitness = cbha.solution_fitness(&initial)?;
            let plan = WorkerPlan::from_master_seed(workers, &config);
            let begin = Instant::now();
            let outcome = evolve_parallel_traced(&initial, &cbha, &config, &plan)?;
            let elapsed = begin.elapsed().as_secs_f64();
            let is_better = outcome.fitness > initial_fitness + 1e-12;
            improved += is_better as usize;
            rows.push_str(&format!(
                "{population},{workers},{run},{},{initial_fitness:.6},{:.6},{elapsed:.4}\n",
                is_better as u8, outcome.fitness,
            ));
        }
        println!("parallel sweep: N_pop {population} improved {improved}/{runs}");
    }
    fs::write(out, rows).with_context(|| format!("writing {}", out.display()))?;
    println!("parallel sweep -> {}", out.display());
    Ok(())
}

#[derive(Args)]
pub struct ReportArgs {
    /// Sweep CSV produced by `romp bench`.
    #[arg(long)]
    input: PathBuf,
    /// Column to group by.
    #[arg(long)]
    group: String,
    /// Output CSV; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Means of every numeric column per distinct value of the group column,
/// in first-appearance order.
pub fn run_report(args: &ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let mut lines = text.lines();
    let header: Vec<&str> =
        lines.next().context("empty CSV")?.split(',').map(str::trim).collect();
    let group_idx = header
        .iter()
        .position(|h| *h == args.group)
        .with_context(|| format!("no column named {:?} in {header:?}", args.group))?;

    let mut order: Vec<String> = Vec::new();
    let mut sums: std::collections::HashMap<String, (usize, Vec<f64>)> =
        std::collections::HashMap::new();
    for (line_no, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != header.len() {
            bail!("{}: line {}: expected {} fields, got {}", args.input.display(), line_no + 2, header.len(), fields.len());
        }
        let key = fields[group_idx].to_string();
        let entry = sums.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (0, vec![0.0; header.len()])
        });
        entry.0 += 1;
        for (i, f) in fields.iter().enumerate() {
            if let Ok(v) = f.parse::<f64>() {
                entry.1[i] += v;
            }
        }
    }

    let numeric: Vec<usize> = (0..header.len()).filter(|&i| i != group_idx).collect();
    let mut out = format!(
        "{},count,{}\n",
        args.group,
        numeric.iter().map(|&i| format!("mean_{}", header[i])).collect::<Vec<_>>().join(",")
    );
    for key in &order {
        let (count, sums) = &sums[key];
        let means: Vec<String> =
            numeric.iter().map(|&i| format!("{:.4}", sums[i] / *count as f64)).collect();
        out.push_str(&format!("{key},{count},{}\n", means.join(",")));
    }
    match &args.out {
        Some(path) => {
            fs::write(path, &out).with_context(|| format!("writing {}", path.display()))?;
            println!("report -> {}", path.display());
        }
        None => print!("{out}"),
    }
    Ok(())
}
