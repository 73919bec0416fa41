//! Offline and online mission planning for a power-delivery UAV recharging
//! a wireless sensor network.
//!
//! The pipeline plans prize-budgeted, energy-capped recharging tours: a
//! guided local search produces the initial route, a context-aware black
//! hole search refines it against a wind-aware discharged-energy model, and
//! the online layer re-plans mid-mission whenever the remaining battery
//! energy drops below what the rest of the tour needs.

pub mod cbha;
pub mod energy;
pub mod geom;
pub mod initial_solver;
pub mod io;
pub mod mission;
pub mod model;
pub mod parallel;
pub mod wind;

pub use cbha::{event_horizon, Cbha, CbhaError, CbhaRun, FitnessWeights};
pub use energy::{
    drag_force, hover_power, ipt_energy, mission_energy, motor_power, recharged_energy,
    segment_energy, thrust, EnergyError, EnergyReport, FlightMode, LegEnergy, LegKind, PdvParams,
    SegmentResult, Waypoint, JOULES_PER_WH,
};
pub use geom::{distance, ground_distance, Vec3};
pub use initial_solver::{
    drop_selection, gls_improve, reduce_target_prize, solve_initial, solve_initial_capped,
    GlsState, SolveError,
};
pub use io::{
    compute_attrs, generate_scenario, generate_wind, Attrs, ConfigFile, IoError, PlanFile,
    Scenario, ScenarioNode, SensorKind, WindModel,
};
pub use mission::{
    check_and_replan, execute_mission, plan_full_network, prepare_plan, CheckOutcome, CheckResult,
    EnergyEvent, EventTrigger, MissionError, MissionEvent, MissionLog, PdvState, PlanOutcome,
    ReplanConfig,
};
pub use model::{
    compute_prize, route_collected_prize, route_total_distance, validate_route, MissionGraph,
    ModelError, NodeId, PlanMode, PlannerConfig, Route, RouteViolation, SensorNode,
};
pub use parallel::{
    aggregate, evolve_parallel, evolve_parallel_traced, AggregationPoint, ParallelError,
    ParallelRun, WorkerPlan,
};
pub use wind::{WindError, WindField};
