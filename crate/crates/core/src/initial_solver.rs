//! Initial route solver: a guided local search over 2-opt and relocation
//! moves, plus the budget-reduction loop that shrinks the target prize until
//! the zero-wind energy estimate of the mission fits the battery cap.

use std::collections::HashMap;

use thiserror::Error;

use crate::energy::{mission_energy, EnergyError, PdvParams};
use crate::model::{MissionGraph, NodeId, PlanMode, PlannerConfig, Route};
use crate::wind::WindField;

/// Target-prize decrement when the energy overshoot exceeds [`LARGE_GAP_WH`].
pub const LARGE_PRIZE_STEP: u32 = 50;
/// Energy-gap threshold that selects the large decrement, Wh.
pub const LARGE_GAP_WH: f64 = 80.0;

const IMPROVE_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("infeasible mission: a single-node route needs {needed_wh:.3} Wh but the cap is {cap_wh:.3} Wh")]
    Infeasible { needed_wh: f64, cap_wh: f64 },
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// Guided-local-search state: per-edge penalty counters and the penalty
/// scale. The augmented cost of a route is its true distance plus
/// `lambda` times the penalties of its edges.
#[derive(Clone, Debug)]
pub struct GlsState {
    penalties: HashMap<(usize, usize), u32>,
    pub lambda: f64,
}

impl GlsState {
    pub fn new(lambda: f64) -> Self {
        GlsState { penalties: HashMap::new(), lambda }
    }

    /// Penalty scale derived from the graph: `factor` times the mean edge
    /// length over all slot pairs.
    pub fn for_graph(graph: &MissionGraph, factor: f64) -> Self {
        let slots = graph.len() + 2;
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..slots {
            for j in (i + 1)..slots {
                sum += graph.slot_distance(i, j);
                count += 1;
            }
        }
        let mean = if count > 0 { sum / count as f64 } else { 0.0 };
        GlsState::new(factor * mean)
    }

    fn key(a: usize, b: usize) -> (usize, usize) {
        if a <= b { (a, b) } else { (b, a) }
    }

    pub fn penalty(&self, a: usize, b: usize) -> u32 {
        self.penalties.get(&Self::key(a, b)).copied().unwrap_or(0)
    }

    fn penalize(&mut self, a: usize, b: usize) {
        *self.penalties.entry(Self::key(a, b)).or_insert(0) += 1;
    }

    fn edge_cost(&self, graph: &MissionGraph, a: usize, b: usize) -> f64 {
        graph.slot_distance(a, b) + self.lambda * self.penalty(a, b) as f64
    }

    /// Augmented cost of a route given as table slots (nodes only).
    pub fn augmented_cost(&self, graph: &MissionGraph, slots: &[usize]) -> f64 {
        let mut cost = 0.0;
        let mut prev = graph.start_slot();
        for &s in slots {
            cost += self.edge_cost(graph, prev, s);
            prev = s;
        }
        cost + self.edge_cost(graph, prev, graph.end_slot())
    }
}

fn true_distance(graph: &MissionGraph, slots: &[usize]) -> f64 {
    let mut d = 0.0;
    let mut prev = graph.start_slot();
    for &s in slots {
        d += graph.slot_distance(prev, s);
        prev = s;
    }
    d + graph.slot_distance(prev, graph.end_slot())
}

fn slot_at(graph: &MissionGraph, slots: &[usize], pos: isize) -> usize {
    if pos < 0 {
        graph.start_slot()
    } else if pos as usize >= slots.len() {
        graph.end_slot()
    } else {
        slots[pos as usize]
    }
}

enum Move {
    TwoOpt(usize, usize),
    Relocate(usize, usize),
}

/// First improving move under the augmented cost, scanning 2-opt segment
/// reversals then single-node relocations in a fixed order.
fn first_improving_move(graph: &MissionGraph, state: &GlsState, slots: &[usize]) -> Option<Move> {
    let n = slots.len();
    for i in 0..n {
        for j in (i + 1)..n {
            // Reversing slots[i..=j] swaps the two boundary edges.
            let before = slot_at(graph, slots, i as isize - 1);
            let after = slot_at(graph, slots, j as isize + 1);
            let removed = state.edge_cost(graph, before, slots[i])
                + state.edge_cost(graph, slots[j], after);
            let added = state.edge_cost(graph, before, slots[j])
                + state.edge_cost(graph, slots[i], after);
            if added < removed - IMPROVE_EPS {
                return Some(Move::TwoOpt(i, j));
            }
        }
    }
    for i in 0..n {
        let prev = slot_at(graph, slots, i as isize - 1);
        let next = slot_at(graph, slots, i as isize + 1);
        let removed_here = state.edge_cost(graph, prev, slots[i])
            + state.edge_cost(graph, slots[i], next)
            - state.edge_cost(graph, prev, next);
        for j in 0..n {
            if j == i || j == i + 1 {
                continue;
            }
            // Insert slots[i] between positions j-1 and j of the route with
            // slots[i] removed.
            let (a, b) = if j < i {
                (slot_at(graph, slots, j as isize - 1), slots[j])
            } else {
                (slots[j], slot_at(graph, slots, j as isize + 1))
            };
            let added_there = state.edge_cost(graph, a, slots[i])
                + state.edge_cost(graph, slots[i], b)
                - state.edge_cost(graph, a, b);
            if added_there < removed_here - IMPROVE_EPS {
                return Some(Move::Relocate(i, j));
            }
        }
    }
    None
}

fn apply_move(slots: &mut Vec<usize>, mv: Move) {
    match mv {
        Move::TwoOpt(i, j) => slots[i..=j].reverse(),
        Move::Relocate(i, j) => {
            let s = slots.remove(i);
            let target = if j < i { j } else { j - 1 };
            slots.insert(target, s);
        }
    }
}

/// On a local minimum, bump the penalty of the route edge with the highest
/// utility `length / (1 + penalty)`. Ties go to the earliest edge.
fn penalize_max_utility(graph: &MissionGraph, state: &mut GlsState, slots: &[usize]) {
    let mut best: Option<((usize, usize), f64)> = None;
    let mut prev = graph.start_slot();
    for &s in slots.iter().chain(std::iter::once(&graph.end_slot())) {
        let utility = graph.slot_distance(prev, s) / (1.0 + state.penalty(prev, s) as f64);
        if best.is_none_or(|(_, u)| utility > u) {
            best = Some(((prev, s), utility));
        }
        prev = s;
    }
    if let Some(((a, b), _)) = best {
        state.penalize(a, b);
    }
}

fn nearest_neighbor_order(graph: &MissionGraph, node_indices: &[usize]) -> Vec<usize> {
    let mut remaining: Vec<usize> = node_indices.to_vec();
    let mut order = Vec::with_capacity(remaining.len());
    let mut current = graph.start_slot();
    while !remaining.is_empty() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (pos, &idx) in remaining.iter().enumerate() {
            let d = graph.slot_distance(current, graph.slot_of(idx));
            if d < best_d || (d == best_d && graph.node(idx).id < graph.node(remaining[best]).id) {
                best = pos;
                best_d = d;
            }
        }
        let idx = remaining.remove(best);
        current = graph.slot_of(idx);
        order.push(graph.slot_of(idx));
    }
    order
}

fn slots_to_route(graph: &MissionGraph, slots: &[usize]) -> Route {
    Route::new(slots.iter().map(|&s| graph.node(s - 1).id).collect())
}

fn route_to_slots(graph: &MissionGraph, route: &Route) -> Vec<usize> {
    route
        .visit_order
        .iter()
        .map(|id| graph.slot_of(graph.node_index(*id).expect("route validated")))
        .collect()
}

/// Improves a route under the GLS augmented cost for at most `budget`
/// steps (applied moves and penalization events both count). The best
/// true-distance route seen is returned, so the result is never longer
/// than the input. Stops early after a long stretch without improvement.
pub fn gls_improve(route: &Route, graph: &MissionGraph, state: &mut GlsState, budget: usize) -> Route {
    let mut current = route_to_slots(graph, route);
    if current.len() < 2 {
        return route.clone();
    }
    let mut best = current.clone();
    let mut best_d = true_distance(graph, &best);
    let stale_limit = 100 + 4 * current.len();
    let mut stale = 0usize;

    for _ in 0..budget {
        if stale >= stale_limit {
            break;
        }
        match first_improving_move(graph, state, &current) {
            Some(mv) => {
                apply_move(&mut current, mv);
                let d = true_distance(graph, &current);
                if d < best_d - IMPROVE_EPS {
                    best = current.clone();
                    best_d = d;
                    stale = 0;
                }
            }
            None => {
                penalize_max_utility(graph, state, &current);
                stale += 1;
            }
        }
    }
    slots_to_route(graph, &best)
}

/// Gap-scheduled target-prize decrement: [`LARGE_PRIZE_STEP`] when the
/// overshoot exceeds [`LARGE_GAP_WH`], otherwise `small_step`, floored at
/// the largest single-node prize.
pub fn reduce_target_prize(current: u32, energy_gap_wh: f64, floor: u32, small_step: u32) -> u32 {
    let step = if energy_gap_wh > LARGE_GAP_WH { LARGE_PRIZE_STEP } else { small_step };
    current.saturating_sub(step).max(floor.min(current))
}

/// Greedy retention: nodes sorted by prize descending (ties by smaller
/// detour past the start-end corridor, then by id) are kept until the
/// collected prize reaches `target_prize`. A node that would push the total
/// past `prize_budget` is skipped.
pub fn drop_selection(graph: &MissionGraph, target_prize: u32, prize_budget: u32) -> Vec<NodeId> {
    let mut order: Vec<usize> = (0..graph.len()).collect();
    let detour = |idx: usize| {
        let s = graph.slot_of(idx);
        graph.slot_distance(graph.start_slot(), s) + graph.slot_distance(s, graph.end_slot())
            - graph.slot_distance(graph.start_slot(), graph.end_slot())
    };
    order.sort_by(|&a, &b| {
        let na = graph.node(a);
        let nb = graph.node(b);
        nb.prize
            .cmp(&na.prize)
            .then(detour(a).total_cmp(&detour(b)))
            .then(na.id.cmp(&nb.id))
    });

    let mut kept = Vec::new();
    let mut collected = 0u32;
    for idx in order {
        if collected >= target_prize {
            break;
        }
        let prize = graph.node(idx).prize;
        if collected + prize > prize_budget {
            continue;
        }
        kept.push(graph.node(idx).id);
        collected += prize;
    }
    kept
}

fn build_route_over(
    graph: &MissionGraph,
    keep: &[NodeId],
    config: &PlannerConfig,
    warm_start: Option<&Route>,
    iterations_per_node: usize,
) -> Route {
    let route = match warm_start {
        Some(prev) => Route::new(
            prev.visit_order.iter().copied().filter(|id| keep.contains(id)).collect(),
        ),
        None => {
            let indices: Vec<usize> =
                keep.iter().map(|id| graph.node_index(*id).expect("kept node exists")).collect();
            slots_to_route(graph, &nearest_neighbor_order(graph, &indices))
        }
    };
    let mut state = GlsState::for_graph(graph, config.gls_lambda_factor);
    let budget = iterations_per_node * keep.len().max(1);
    gls_improve(&route, graph, &mut state, budget)
}

/// Computes the initial solution with the cap set to
/// `e_de_cap_fraction × battery_energy`.
pub fn solve_initial(
    graph: &MissionGraph,
    pdv: &PdvParams,
    config: &PlannerConfig,
    mode: PlanMode,
) -> Result<Route, SolveError> {
    solve_initial_capped(graph, pdv, config, mode, config.e_de_cap_fraction * pdv.battery_energy_wh)
}

/// TSP mode returns the distance-minimized tour over all nodes. OP mode
/// iterates: retain nodes up to the current target prize, optimize the
/// route, estimate the mission energy in a zero-wind environment, and
/// reduce the target until the estimate fits `cap_wh`.
pub fn solve_initial_capped(
    graph: &MissionGraph,
    pdv: &PdvParams,
    config: &PlannerConfig,
    mode: PlanMode,
    cap_wh: f64,
) -> Result<Route, SolveError> {
    let all: Vec<NodeId> = graph.nodes().iter().map(|n| n.id).collect();
    if mode == PlanMode::Tsp {
        return Ok(build_route_over(graph, &all, config, None, config.gls_iterations_per_node));
    }

    // Intermediate target-reduction iterations only steer the budget down,
    // so they run a light, warm-started search; the route that finally fits
    // gets the full budget. Polishing only shortens the tour, which only
    // lowers the estimate that admitted it.
    let coarse = (config.gls_iterations_per_node / 8).max(25);
    let still = WindField::still();
    let total_prize: u32 = graph.nodes().iter().map(|n| n.prize).sum();
    let floor = graph.nodes().iter().map(|n| n.prize).max().unwrap_or(0);
    let mut target = total_prize.min(config.prize_budget);
    let mut prev_kept: Option<Vec<NodeId>> = None;
    let mut prev_route: Option<Route> = None;
    let mut prev_estimate = f64::INFINITY;

    loop {
        let kept = drop_selection(graph, target, config.prize_budget);
        let (route, estimate_wh) = if prev_kept.as_deref() == Some(&kept) {
            (prev_route.clone().expect("cached route"), prev_estimate)
        } else {
            let route = build_route_over(graph, &kept, config, prev_route.as_ref(), coarse);
            let estimate =
                mission_energy(&route, graph, pdv, &still, true, 0.0)?.discharged_wh();
            (route, estimate)
        };

        if estimate_wh <= cap_wh {
            return Ok(build_route_over(
                graph,
                &route.visit_order.clone(),
                config,
                Some(&route),
                config.gls_iterations_per_node,
            ));
        }
        if target <= floor {
            return Err(SolveError::Infeasible { needed_wh: estimate_wh, cap_wh });
        }
        prev_kept = Some(kept);
        prev_route = Some(route);
        prev_estimate = estimate_wh;
        target = reduce_target_prize(target, estimate_wh - cap_wh, floor, config.small_prize_step);
    }
}
