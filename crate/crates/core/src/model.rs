//! Domain types: sensor nodes, the mission graph, routes, and the planner
//! configuration, together with prize assignment and route bookkeeping.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{ground_distance, Vec3};

pub type NodeId = u32;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("node voltage {v_now} V exceeds maximum {v_max} V")]
    VoltageAboveMax { v_now: f64, v_max: f64 },
    #[error("invalid node electrical parameters (capacitance {capacitance} F, v_max {v_max} V, v_now {v_now} V)")]
    InvalidNode { capacitance: f64, v_max: f64, v_now: f64 },
    #[error("duplicate node id {0}")]
    DuplicateNodeId(NodeId),
    #[error("no nodes supplied")]
    NoNodes,
    #[error("no eligible nodes: all {supplied} nodes fall below the prize lower bound {min_prize}")]
    NoEligibleNodes { supplied: usize, min_prize: u32 },
    #[error("route references unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),
}

/// A rechargeable sensor node: position, capacitor electrical state and the
/// integer prize derived from its voltage deficit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorNode {
    pub id: NodeId,
    pub position: Vec3,
    /// Capacitance of the node's storage capacitor, farads.
    pub capacitance: f64,
    pub v_max: f64,
    pub v_now: f64,
    pub prize: u32,
}

impl SensorNode {
    pub fn new(
        id: NodeId,
        position: Vec3,
        capacitance: f64,
        v_max: f64,
        v_now: f64,
        prize: u32,
    ) -> Result<Self, ModelError> {
        if capacitance.is_nan() || capacitance <= 0.0 || v_max.is_nan() || v_max <= 0.0 || v_now < 0.0 {
            return Err(ModelError::InvalidNode { capacitance, v_max, v_now });
        }
        if v_now > v_max {
            return Err(ModelError::VoltageAboveMax { v_now, v_max });
        }
        Ok(SensorNode { id, position, capacitance, v_max, v_now, prize })
    }
}

/// Maps a node's remaining voltage to an integer prize in `1..=levels`.
///
/// `[0, v_max]` is split into `levels` equal intervals; the lowest-voltage
/// interval earns the top prize and a fully charged node earns 1. Boundary
/// voltages belong to the higher-voltage (lower-prize) interval.
pub fn compute_prize(v_now: f64, v_max: f64, levels: u32) -> Result<u32, ModelError> {
    if v_now > v_max {
        return Err(ModelError::VoltageAboveMax { v_now, v_max });
    }
    if v_max.is_nan() || v_max <= 0.0 || v_now < 0.0 || levels == 0 {
        return Err(ModelError::InvalidNode { capacitance: f64::NAN, v_max, v_now });
    }
    let interval = ((v_now * levels as f64 / v_max).floor() as u32).min(levels - 1);
    Ok(levels - interval)
}

/// Which problem variant a route is planned or validated against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanMode {
    /// Visit every graph node; the tour starts and ends at the same point.
    Tsp,
    /// Visit a prize-budgeted subset; the end point may differ from the start.
    Op,
}

/// Ordered sequence of node ids to visit, exclusive of the implicit
/// start and end points.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub visit_order: Vec<NodeId>,
}

impl Route {
    pub fn new(visit_order: Vec<NodeId>) -> Self {
        Route { visit_order }
    }

    pub fn empty() -> Self {
        Route { visit_order: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.visit_order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visit_order.is_empty()
    }
}

/// The filtered node set plus start/end positions and the precomputed
/// symmetric table of pairwise ground distances.
///
/// Table slots: `0` is the start, `1..=n` are nodes in storage order and
/// `n + 1` is the end. Immutable once built, safe to share across workers.
#[derive(Clone, Debug)]
pub struct MissionGraph {
    nodes: Vec<SensorNode>,
    start: Vec3,
    end: Vec3,
    dist: Vec<f64>,
    slots: usize,
    index_of: HashMap<NodeId, usize>,
}

impl MissionGraph {
    /// Builds the graph, dropping every node whose prize is below `min_prize`
    /// and precomputing all pairwise distances.
    pub fn build(
        nodes: Vec<SensorNode>,
        start: Vec3,
        end: Vec3,
        min_prize: u32,
    ) -> Result<Self, ModelError> {
        if nodes.is_empty() {
            return Err(ModelError::NoNodes);
        }
        let supplied = nodes.len();
        let kept: Vec<SensorNode> = nodes.into_iter().filter(|n| n.prize >= min_prize).collect();
        if kept.is_empty() {
            return Err(ModelError::NoEligibleNodes { supplied, min_prize });
        }

        let mut index_of = HashMap::with_capacity(kept.len());
        for (i, n) in kept.iter().enumerate() {
            if index_of.insert(n.id, i).is_some() {
                return Err(ModelError::DuplicateNodeId(n.id));
            }
        }

        let n = kept.len();
        let slots = n + 2;
        let mut positions = Vec::with_capacity(slots);
        positions.push(start);
        positions.extend(kept.iter().map(|node| node.position));
        positions.push(end);

        let mut dist = vec![0.0; slots * slots];
        for i in 0..slots {
            for j in (i + 1)..slots {
                let d = ground_distance(positions[i], positions[j]);
                dist[i * slots + j] = d;
                dist[j * slots + i] = d;
            }
        }

        Ok(MissionGraph { nodes: kept, start, end, dist, slots, index_of })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[SensorNode] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &SensorNode {
        &self.nodes[idx]
    }

    pub fn start(&self) -> Vec3 {
        self.start
    }

    pub fn end(&self) -> Vec3 {
        self.end
    }

    pub fn node_index(&self, id: NodeId) -> Option<usize> {
        self.index_of.get(&id).copied()
    }

    pub fn node_by_id(&self, id: NodeId) -> Option<&SensorNode> {
        self.node_index(id).map(|i| &self.nodes[i])
    }

    pub fn start_slot(&self) -> usize {
        0
    }

    pub fn end_slot(&self) -> usize {
        self.slots - 1
    }

    /// Table slot of the node at storage index `idx`.
    pub fn slot_of(&self, idx: usize) -> usize {
        idx + 1
    }

    /// Ground distance between two table slots.
    pub fn slot_distance(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.slots + b]
    }

    /// Derives a new graph over a subset of this graph's nodes with a fresh
    /// start position; the end position is kept. Used by online re-planning.
    pub fn subgraph(&self, start: Vec3, keep: &[NodeId]) -> Result<MissionGraph, ModelError> {
        let mut nodes = Vec::with_capacity(keep.len());
        for id in keep {
            nodes.push(self.node_by_id(*id).ok_or(ModelError::UnknownNode(*id))?.clone());
        }
        // min_prize 0: membership was already decided by the caller.
        MissionGraph::build(nodes, start, self.end, 0)
    }
}

/// One reason a route fails validation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RouteViolation {
    DuplicateNode(NodeId),
    UnknownNode(NodeId),
    /// TSP mode only: a graph node the route never visits.
    MissingNode(NodeId),
    /// TSP mode only: the tour must begin and end at the same point.
    StartEndMismatch,
}

/// Checks uniqueness and membership, plus full coverage and a closed tour in
/// TSP mode. Returns every violation found; an empty list means the route is
/// valid.
pub fn validate_route(route: &Route, graph: &MissionGraph, mode: PlanMode) -> Vec<RouteViolation> {
    let mut violations = Vec::new();
    let mut seen = HashSet::new();
    for &id in &route.visit_order {
        if !seen.insert(id) {
            violations.push(RouteViolation::DuplicateNode(id));
        }
        if graph.node_index(id).is_none() {
            violations.push(RouteViolation::UnknownNode(id));
        }
    }
    if mode == PlanMode::Tsp {
        for node in graph.nodes() {
            if !seen.contains(&node.id) {
                violations.push(RouteViolation::MissingNode(node.id));
            }
        }
        if graph.start() != graph.end() {
            violations.push(RouteViolation::StartEndMismatch);
        }
    }
    violations
}

/// Total tour length: start to first node, consecutive legs, last node to
/// end. An empty route is the direct start-to-end distance.
pub fn route_total_distance(route: &Route, graph: &MissionGraph) -> Result<f64, ModelError> {
    let mut total = 0.0;
    let mut prev = graph.start_slot();
    for &id in &route.visit_order {
        let idx = graph.node_index(id).ok_or(ModelError::UnknownNode(id))?;
        let slot = graph.slot_of(idx);
        total += graph.slot_distance(prev, slot);
        prev = slot;
    }
    total += graph.slot_distance(prev, graph.end_slot());
    Ok(total)
}

/// Sum of member prizes. The caller checks the budget constraint.
pub fn route_collected_prize(route: &Route, graph: &MissionGraph) -> Result<u32, ModelError> {
    let mut total = 0;
    for &id in &route.visit_order {
        total += graph.node_by_id(id).ok_or(ModelError::UnknownNode(id))?.prize;
    }
    Ok(total)
}

/// Planner parameters. Defaults follow the common experiment settings:
/// prizes 6..=10 eligible out of 10 levels, population and generation counts
/// of 80, 75% attraction probability, candidate width 10, aggregation every
/// 10 generations and an 80% discharge cap.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Lower prize bound `l`; nodes below it are not routed.
    pub prize_lower: u32,
    /// Upper prize bound `u`; also the number of voltage intervals.
    pub prize_upper: u32,
    /// Prize budget per mission.
    pub prize_budget: u32,
    /// Default recharge-fitness weight.
    pub weight_recharge: f64,
    /// Default discharge-fitness weight.
    pub weight_discharge: f64,
    pub population: usize,
    pub generations: usize,
    /// Candidate list width.
    pub search_width: usize,
    /// Probability that an index is pulled toward the black hole.
    pub attract_probability: f64,
    /// Workers exchange black holes every this many generations.
    pub aggregate_every: usize,
    /// Fraction of the energy budget a planned mission may discharge.
    pub e_de_cap_fraction: f64,
    pub rng_seed: u64,
    /// Random index swaps applied when (re-)initializing a population member.
    pub init_swaps: usize,
    /// Local search budget per node in the route.
    pub gls_iterations_per_node: usize,
    /// Penalty scale as a fraction of the mean edge length.
    pub gls_lambda_factor: f64,
    /// Target-prize decrement when the energy overshoot is small.
    pub small_prize_step: u32,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            prize_lower: 6,
            prize_upper: 10,
            prize_budget: 10_000,
            weight_recharge: 50.0,
            weight_discharge: 50.0,
            population: 80,
            generations: 80,
            search_width: 10,
            attract_probability: 0.75,
            aggregate_every: 10,
            e_de_cap_fraction: 0.8,
            rng_seed: 42,
            init_swaps: 2,
            gls_iterations_per_node: 200,
            gls_lambda_factor: 0.1,
            small_prize_step: 5,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.prize_lower > self.prize_upper || self.prize_upper == 0 {
            return Err(ModelError::InvalidConfig(format!(
                "prize bounds {}..={} are invalid",
                self.prize_lower, self.prize_upper
            )));
        }
        if !(0.0..=1.0).contains(&self.attract_probability) {
            return Err(ModelError::InvalidConfig(format!(
                "attract_probability {} outside [0, 1]",
                self.attract_probability
            )));
        }
        if !(self.e_de_cap_fraction > 0.0 && self.e_de_cap_fraction < 1.0) {
            return Err(ModelError::InvalidConfig(format!(
                "e_de_cap_fraction {} outside (0, 1)",
                self.e_de_cap_fraction
            )));
        }
        if self.aggregate_every == 0 {
            return Err(ModelError::InvalidConfig("aggregate_every must be positive".into()));
        }
        Ok(())
    }
}
