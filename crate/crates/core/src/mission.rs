//! Online mission execution: flying a plan under ground-truth wind,
//! routine energy checks at every charging stop, re-planning from the
//! current position when the remaining energy falls short, and the
//! multi-mission loop that recharges an entire network.

use std::collections::{BTreeSet, VecDeque};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cbha::{Cbha, CbhaError, FitnessWeights};
use crate::energy::{
    hover_power, ipt_energy, mission_energy, recharged_energy, segment_energy, EnergyError,
    EnergyReport, LegEnergy, LegKind, PdvParams, Waypoint, JOULES_PER_WH,
};
use crate::geom::Vec3;
use crate::initial_solver::{solve_initial, solve_initial_capped, SolveError};
use crate::model::{
    compute_prize, validate_route, MissionGraph, ModelError, NodeId, PlanMode, PlannerConfig,
    Route, RouteViolation, SensorNode,
};
use crate::parallel::{evolve_parallel, ParallelError, WorkerPlan};
use crate::wind::WindField;

/// Guard band for float comparisons between an execution-time estimate and
/// the identical plan-time computation.
const CHECK_EPS_WH: f64 = 1e-9;

const REPLAN_SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Error)]
pub enum MissionError {
    #[error("plan fails validation: {0:?}")]
    InvalidPlan(Vec<RouteViolation>),
    #[error("mission {mission} recharged zero nodes; aborting the network loop")]
    Stagnation { mission: usize },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Search(#[from] CbhaError),
    #[error(transparent)]
    Parallel(#[from] ParallelError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// In-flight vehicle state as seen by the online planner.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PdvState {
    pub position: Vec3,
    pub remaining_wh: f64,
    pub time_s: f64,
    pub visited: BTreeSet<NodeId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum EventTrigger {
    /// Fires once the given number of charges have completed.
    AfterCharges(usize),
    /// Fires at the first charging stop at or past this mission time.
    AtTime(f64),
}

/// Injected telemetry update standing in for an onboard energy sensor:
/// at its trigger the remaining energy drops to the given level (it never
/// raises it).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyEvent {
    pub trigger: EventTrigger,
    pub set_remaining_wh: f64,
}

/// Online safety margins and the reduced search budget used for replans.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ReplanConfig {
    /// Direct return-to-home energy is multiplied by this margin.
    pub rth_margin: f64,
    /// Reserve floor, Wh.
    pub rth_floor_wh: f64,
    /// Population of the in-mission search.
    pub population: usize,
    /// Generations of the in-mission search.
    pub generations: usize,
}

impl Default for ReplanConfig {
    fn default() -> Self {
        ReplanConfig { rth_margin: 1.2, rth_floor_wh: 5.0, population: 40, generations: 40 }
    }
}

/// One record in the mission log, in execution order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MissionEvent {
    LegFlown {
        from: Waypoint,
        to: Waypoint,
        energy_wh: f64,
        duration_s: f64,
        remaining_wh: f64,
    },
    NodeCharged {
        node: NodeId,
        e_ipt_wh: f64,
        e_recharged_j: f64,
        hover_wh: f64,
        duration_s: f64,
        remaining_wh: f64,
    },
    EnergyEventApplied {
        time_s: f64,
        before_wh: f64,
        after_wh: f64,
    },
    CheckPerformed {
        estimate_wh: f64,
        reserve_wh: f64,
        remaining_wh: f64,
        replanned: bool,
    },
    ReplanIssued {
        route: Route,
        estimate_wh: f64,
    },
    ReturnToHome {
        remaining_wh: f64,
    },
    Failed {
        at: Waypoint,
        deficit_wh: f64,
    },
    Completed {
        remaining_wh: f64,
    },
}

/// Everything observed while executing one mission.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MissionLog {
    pub events: Vec<MissionEvent>,
    pub report: EnergyReport,
    pub initial_energy_wh: f64,
    pub final_remaining_wh: f64,
    pub charged: Vec<NodeId>,
    pub replans: usize,
    pub completed: bool,
}

impl MissionLog {
    /// Sum of every logged energy decrement: flight, transfer, hover, and
    /// injected events. Equals `initial − final` up to rounding.
    pub fn logged_decrement_wh(&self) -> f64 {
        self.events
            .iter()
            .map(|e| match e {
                MissionEvent::LegFlown { energy_wh, .. } => *energy_wh,
                MissionEvent::NodeCharged { e_ipt_wh, hover_wh, .. } => e_ipt_wh + hover_wh,
                MissionEvent::EnergyEventApplied { before_wh, after_wh, .. } => before_wh - after_wh,
                _ => 0.0,
            })
            .sum()
    }
}

/// Outcome of a routine mission check.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub estimate_wh: f64,
    pub reserve_wh: f64,
    pub outcome: CheckOutcome,
}

#[derive(Clone, Debug)]
pub enum CheckOutcome {
    Keep,
    /// The fresh plan; an empty route means direct return-to-home.
    Replan(Route),
}

fn rth_reserve_wh(
    position: Vec3,
    end: Vec3,
    pdv: &PdvParams,
    forecast: &WindField,
    time_s: f64,
    cfg: &ReplanConfig,
) -> Result<f64, EnergyError> {
    let direct = segment_energy(position, end, pdv, forecast, time_s)?;
    Ok((cfg.rth_margin * direct.energy_wh).max(cfg.rth_floor_wh))
}

/// Checks a candidate plan against the energy budget along its whole
/// trajectory under the forecast: the discharge estimate must fit `cap_wh`,
/// and at departure plus after every charge the remaining-route estimate
/// plus the return reserve must fit the remaining energy.
#[allow(clippy::too_many_arguments)]
fn plan_is_safe(
    route: &Route,
    graph: &MissionGraph,
    pdv: &PdvParams,
    forecast: &WindField,
    cfg: &ReplanConfig,
    e_available_wh: f64,
    cap_wh: f64,
    t0_s: f64,
) -> Result<bool, MissionError> {
    let report = mission_energy(route, graph, pdv, forecast, true, t0_s)?;
    let total = report.discharged_wh();
    if total > cap_wh + CHECK_EPS_WH {
        return Ok(false);
    }

    let depart_reserve = rth_reserve_wh(graph.start(), graph.end(), pdv, forecast, t0_s, cfg)?;
    if total + depart_reserve > e_available_wh + CHECK_EPS_WH {
        return Ok(false);
    }

    let mut spent = 0.0;
    let mut t = t0_s;
    for entry in &report.per_leg {
        spent += entry.energy_wh;
        t += entry.duration_s;
        if let LegKind::Charge { node } = entry.kind {
            let n = graph.node_by_id(node).ok_or(ModelError::UnknownNode(node))?;
            spent += ipt_energy(n, pdv.ipt_efficiency) / JOULES_PER_WH;
            let remaining = e_available_wh - spent;
            let rest = total - spent;
            let reserve = rth_reserve_wh(n.position, graph.end(), pdv, forecast, t, cfg)?;
            if rest + reserve > remaining + CHECK_EPS_WH {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Drops the lowest-prize node (ties by lower id) until the plan passes
/// [`plan_is_safe`]. The empty route is always accepted as a last resort.
#[allow(clippy::too_many_arguments)]
fn trim_to_safe(
    mut route: Route,
    graph: &MissionGraph,
    pdv: &PdvParams,
    forecast: &WindField,
    cfg: &ReplanConfig,
    e_available_wh: f64,
    cap_wh: f64,
    t0_s: f64,
) -> Result<Route, MissionError> {
    loop {
        if route.is_empty()
            || plan_is_safe(&route, graph, pdv, forecast, cfg, e_available_wh, cap_wh, t0_s)?
        {
            return Ok(route);
        }
        let weakest = route
            .visit_order
            .iter()
            .enumerate()
            .min_by_key(|(_, id)| {
                let n = graph.node_by_id(**id).expect("validated route");
                (n.prize, n.id)
            })
            .map(|(pos, _)| pos)
            .expect("route not empty");
        route.visit_order.remove(weakest);
    }
}

/// A finished offline plan: the route, its forecast energy report, and the
/// solver wall-clock time.
#[derive(Clone, Debug)]
pub struct PlanOutcome {
    pub route: Route,
    pub report: EnergyReport,
    pub solver_seconds: f64,
}

/// Full offline pipeline: initial solution, black-hole refinement (parallel
/// when `workers > 1`), and, in OP mode, a trajectory-safety trim so that an
/// on-schedule execution never needs to re-plan.
pub fn prepare_plan(
    graph: &MissionGraph,
    pdv: &PdvParams,
    forecast: &WindField,
    config: &PlannerConfig,
    replan_cfg: &ReplanConfig,
    mode: PlanMode,
    workers: usize,
) -> Result<PlanOutcome, MissionError> {
    let begin = Instant::now();
    let initial = solve_initial(graph, pdv, config, mode)?;
    let weights = FitnessWeights::new(config.weight_recharge, config.weight_discharge);
    let cbha = Cbha::new(graph, pdv, forecast, weights, config, pdv.battery_energy_wh)?;
    let evolved = if workers > 1 {
        let plan = WorkerPlan::from_master_seed(workers, config);
        evolve_parallel(&initial, &cbha, config, &plan)?
    } else {
        cbha.evolve(&initial, config.rng_seed)?
    };
    let route = if mode == PlanMode::Op {
        let cap = config.e_de_cap_fraction * pdv.battery_energy_wh;
        trim_to_safe(evolved, graph, pdv, forecast, replan_cfg, pdv.battery_energy_wh, cap, 0.0)?
    } else {
        evolved
    };
    let report = mission_energy(&route, graph, pdv, forecast, true, 0.0)?;
    Ok(PlanOutcome { route, report, solver_seconds: begin.elapsed().as_secs_f64() })
}

/// Routine mission check at a charging stop. Keeps the plan when the
/// remaining-route estimate plus the return reserve fits the remaining
/// energy; otherwise re-runs the search from the current position over the
/// unvisited nodes with the remaining energy as the budget.
pub fn check_and_replan(
    state: &PdvState,
    remaining_route: &[NodeId],
    graph: &MissionGraph,
    pdv: &PdvParams,
    forecast: &WindField,
    config: &PlannerConfig,
    replan_cfg: &ReplanConfig,
) -> Result<CheckResult, MissionError> {
    let reserve = rth_reserve_wh(state.position, graph.end(), pdv, forecast, state.time_s, replan_cfg)?;
    let estimate = if remaining_route.is_empty() {
        segment_energy(state.position, graph.end(), pdv, forecast, state.time_s)?.energy_wh
    } else {
        let sub = graph.subgraph(state.position, remaining_route)?;
        let rest = Route::new(remaining_route.to_vec());
        mission_energy(&rest, &sub, pdv, forecast, true, state.time_s)?.discharged_wh()
    };

    if estimate + reserve <= state.remaining_wh + CHECK_EPS_WH {
        return Ok(CheckResult { estimate_wh: estimate, reserve_wh: reserve, outcome: CheckOutcome::Keep });
    }

    let direct_rth = CheckResult {
        estimate_wh: estimate,
        reserve_wh: reserve,
        outcome: CheckOutcome::Replan(Route::empty()),
    };

    let unvisited: Vec<NodeId> = graph
        .nodes()
        .iter()
        .filter(|n| !state.visited.contains(&n.id))
        .map(|n| n.id)
        .collect();
    let cap = (config.e_de_cap_fraction * state.remaining_wh).min(state.remaining_wh - reserve);
    if unvisited.is_empty() || cap <= 0.0 {
        return Ok(direct_rth);
    }

    let sub = graph.subgraph(state.position, &unvisited)?;
    let initial = match solve_initial_capped(&sub, pdv, config, PlanMode::Op, cap) {
        Ok(route) => route,
        Err(SolveError::Infeasible { .. }) => return Ok(direct_rth),
        Err(e) => return Err(e.into()),
    };

    let mut search_config = config.clone();
    search_config.population = replan_cfg.population;
    search_config.generations = replan_cfg.generations;
    let weights = FitnessWeights::new(config.weight_recharge, config.weight_discharge);
    let cbha = Cbha::with_start_time(
        &sub,
        pdv,
        forecast,
        weights,
        &search_config,
        state.remaining_wh,
        state.time_s,
    )?;
    let seed = config
        .rng_seed
        .wrapping_add((state.visited.len() as u64).wrapping_mul(REPLAN_SEED_STRIDE));
    let evolved = cbha.evolve(&initial, seed)?;
    let route = trim_to_safe(
        evolved,
        &sub,
        pdv,
        forecast,
        replan_cfg,
        state.remaining_wh,
        cap,
        state.time_s,
    )?;
    let new_estimate = if route.is_empty() {
        segment_energy(state.position, graph.end(), pdv, forecast, state.time_s)?.energy_wh
    } else {
        mission_energy(&route, &sub, pdv, forecast, true, state.time_s)?.discharged_wh()
    };
    Ok(CheckResult {
        estimate_wh: new_estimate,
        reserve_wh: reserve,
        outcome: CheckOutcome::Replan(route),
    })
}

/// Flies a plan under the ground-truth wind, charging each node in order,
/// applying due energy events after every charge and running the routine
/// check. Ends at the graph's end position, by direct return-to-home when a
/// replan comes back empty, or with a logged failure when the battery runs
/// out mid-flight.
#[allow(clippy::too_many_arguments)]
pub fn execute_mission(
    plan: &Route,
    graph: &MissionGraph,
    pdv: &PdvParams,
    truth: &WindField,
    forecast: &WindField,
    events: &[EnergyEvent],
    config: &PlannerConfig,
    replan_cfg: &ReplanConfig,
) -> Result<MissionLog, MissionError> {
    let violations = validate_route(plan, graph, PlanMode::Op);
    if !violations.is_empty() {
        return Err(MissionError::InvalidPlan(violations));
    }

    let mut state = PdvState {
        position: graph.start(),
        remaining_wh: pdv.battery_energy_wh,
        time_s: 0.0,
        visited: BTreeSet::new(),
    };
    let mut log = MissionLog {
        initial_energy_wh: state.remaining_wh,
        ..MissionLog::default()
    };
    let mut applied = vec![false; events.len()];
    let mut queue: VecDeque<NodeId> = plan.visit_order.iter().copied().collect();
    let mut charges_done = 0usize;
    let mut prev_waypoint = Waypoint::Start;
    let mut leg = 0usize;

    let fly_to = |state: &mut PdvState,
                      log: &mut MissionLog,
                      prev_waypoint: &mut Waypoint,
                      leg: &mut usize,
                      target: Vec3,
                      to: Waypoint|
     -> Result<bool, MissionError> {
        let seg = segment_energy(state.position, target, pdv, truth, state.time_s)?;
        state.remaining_wh -= seg.energy_wh;
        state.time_s += seg.duration_s;
        state.position = target;
        log.report.e_motor_wh += seg.energy_wh;
        log.report.wind_clamped |= seg.clamped;
        log.report.per_leg.push(LegEnergy {
            leg: *leg,
            kind: LegKind::Travel { from: *prev_waypoint, to },
            energy_wh: seg.energy_wh,
            duration_s: seg.duration_s,
        });
        *leg += 1;
        log.events.push(MissionEvent::LegFlown {
            from: *prev_waypoint,
            to,
            energy_wh: seg.energy_wh,
            duration_s: seg.duration_s,
            remaining_wh: state.remaining_wh,
        });
        *prev_waypoint = to;
        if state.remaining_wh < 0.0 {
            log.events.push(MissionEvent::Failed { at: to, deficit_wh: -state.remaining_wh });
            return Ok(false);
        }
        Ok(true)
    };

    loop {
        let Some(id) = queue.pop_front() else {
            let survived = fly_to(&mut state, &mut log, &mut prev_waypoint, &mut leg, graph.end(), Waypoint::End)?;
            if survived {
                log.events.push(MissionEvent::Completed { remaining_wh: state.remaining_wh });
                log.completed = true;
            }
            break;
        };

        let node = graph.node_by_id(id).ok_or(ModelError::UnknownNode(id))?.clone();
        if !fly_to(&mut state, &mut log, &mut prev_waypoint, &mut leg, node.position, Waypoint::Node(id))? {
            break;
        }

        // Charge while hovering above the node.
        let e_ipt_j = ipt_energy(&node, pdv.ipt_efficiency);
        let charge_s = e_ipt_j / pdv.ipt_power_w;
        let (wind, clamped) = truth.sample(node.position, state.time_s);
        let hover_wh = hover_power(pdv, wind.norm()) * charge_s / JOULES_PER_WH;
        let e_ipt_wh = e_ipt_j / JOULES_PER_WH;
        state.remaining_wh -= e_ipt_wh + hover_wh;
        state.time_s += charge_s;
        state.visited.insert(id);
        charges_done += 1;
        log.charged.push(id);
        log.report.e_ipt_wh += e_ipt_wh;
        log.report.e_motor_wh += hover_wh;
        log.report.e_recharged_j += recharged_energy(&node);
        log.report.wind_clamped |= clamped;
        log.report.per_leg.push(LegEnergy {
            leg,
            kind: LegKind::Charge { node: id },
            energy_wh: hover_wh,
            duration_s: charge_s,
        });
        leg += 1;
        log.events.push(MissionEvent::NodeCharged {
            node: id,
            e_ipt_wh,
            e_recharged_j: recharged_energy(&node),
            hover_wh,
            duration_s: charge_s,
            remaining_wh: state.remaining_wh,
        });
        if state.remaining_wh < 0.0 {
            log.events.push(MissionEvent::Failed {
                at: Waypoint::Node(id),
                deficit_wh: -state.remaining_wh,
            });
            break;
        }

        // Telemetry updates land while the vehicle is stationary.
        for (i, event) in events.iter().enumerate() {
            if applied[i] {
                continue;
            }
            let due = match event.trigger {
                EventTrigger::AfterCharges(k) => charges_done >= k,
                EventTrigger::AtTime(t) => state.time_s >= t,
            };
            if due {
                applied[i] = true;
                let before = state.remaining_wh;
                state.remaining_wh = state.remaining_wh.min(event.set_remaining_wh);
                log.events.push(MissionEvent::EnergyEventApplied {
                    time_s: state.time_s,
                    before_wh: before,
                    after_wh: state.remaining_wh,
                });
            }
        }

        let rest: Vec<NodeId> = queue.iter().copied().collect();
        let check = check_and_replan(&state, &rest, graph, pdv, forecast, config, replan_cfg)?;
        let replanned = matches!(check.outcome, CheckOutcome::Replan(_));
        log.events.push(MissionEvent::CheckPerformed {
            estimate_wh: check.estimate_wh,
            reserve_wh: check.reserve_wh,
            remaining_wh: state.remaining_wh,
            replanned,
        });
        if let CheckOutcome::Replan(route) = check.outcome {
            log.replans += 1;
            log.events.push(MissionEvent::ReplanIssued {
                route: route.clone(),
                estimate_wh: check.estimate_wh,
            });
            if route.is_empty() {
                log.events.push(MissionEvent::ReturnToHome { remaining_wh: state.remaining_wh });
            }
            queue = route.visit_order.into_iter().collect();
        }
    }

    log.report.total_time_s = state.time_s;
    log.final_remaining_wh = state.remaining_wh;
    Ok(log)
}

/// Plans and executes missions until every node with an eligible prize has
/// been recharged, marking charged nodes as full between iterations.
/// Returns one log per mission.
#[allow(clippy::too_many_arguments)]
pub fn plan_full_network(
    nodes: Vec<SensorNode>,
    start: Vec3,
    end: Vec3,
    pdv: &PdvParams,
    forecast: &WindField,
    truth: &WindField,
    config: &PlannerConfig,
    replan_cfg: &ReplanConfig,
    workers: usize,
) -> Result<Vec<MissionLog>, MissionError> {
    let mut pool = nodes;
    let mut logs: Vec<MissionLog> = Vec::new();
    loop {
        let eligible: Vec<SensorNode> =
            pool.iter().filter(|n| n.prize >= config.prize_lower).cloned().collect();
        if eligible.is_empty() {
            break;
        }
        let graph = MissionGraph::build(eligible, start, end, config.prize_lower)?;
        let plan = prepare_plan(&graph, pdv, forecast, config, replan_cfg, PlanMode::Op, workers)?;
        let log = execute_mission(&plan.route, &graph, pdv, truth, forecast, &[], config, replan_cfg)?;
        if log.charged.is_empty() {
            return Err(MissionError::Stagnation { mission: logs.len() });
        }
        for id in &log.charged {
            let node = pool.iter_mut().find(|n| n.id == *id).expect("charged node exists");
            node.v_now = node.v_max;
            node.prize = compute_prize(node.v_now, node.v_max, config.prize_upper)?;
        }
        logs.push(log);
    }
    Ok(logs)
}
