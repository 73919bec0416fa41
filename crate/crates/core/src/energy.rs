//! Discharged-energy model of the power delivery vehicle.
//!
//! Covers the inductive power transfer cost per node, the drag/thrust force
//! balance for vertical and horizontal motion, rotor power derived from
//! thrust, and the per-segment flight simulation that samples the wind field
//! at a fixed time step.
//!
//! Unit conventions: battery-side energies are reported in Wh, node-side
//! energies in joules, with 1 Wh = 3600 J. Conversions are always explicit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{ground_distance, Vec3};
use crate::model::{MissionGraph, ModelError, NodeId, Route, SensorNode};
use crate::wind::WindField;

pub const JOULES_PER_WH: f64 = 3600.0;

/// Flight simulation time step, seconds. Matches the wind data resolution;
/// the final partial step of each phase uses the exact remaining duration.
pub const SIM_STEP_S: f64 = 10.0;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("motion speeds must be positive (ascent {ascent}, descent {descent}, cruise {cruise})")]
    InvalidSpeed { ascent: f64, descent: f64, cruise: f64 },
    #[error(transparent)]
    InvalidRoute(#[from] ModelError),
}

/// Physical and flight parameters of the vehicle. Defaults follow the
/// M100-class quadrotor with a TB47D battery and a 150 W transfer link.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct PdvParams {
    /// Total mass including payload, kg.
    pub mass: f64,
    /// Windward area against horizontal airflow, m².
    pub area_horizontal_flow: f64,
    /// Windward area against vertical airflow, m².
    pub area_vertical_flow: f64,
    /// Reference area for the induced-power relation, m².
    pub rotor_reference_area: f64,
    pub drag_coefficient: f64,
    /// Air density, kg/m³.
    pub air_density: f64,
    /// Gravitational acceleration, m/s².
    pub gravity: f64,
    /// Ascent speed, m/s.
    pub v_ascent: f64,
    /// Descent speed, m/s.
    pub v_descent: f64,
    /// Cruise speed, m/s.
    pub v_cruise: f64,
    /// Transit altitude between nodes, meters.
    pub cruise_altitude: f64,
    /// Full battery energy, Wh.
    pub battery_energy_wh: f64,
    /// Instantaneous transfer power, W.
    pub ipt_power_w: f64,
    /// Transfer link efficiency in (0, 1].
    pub ipt_efficiency: f64,
}

impl Default for PdvParams {
    fn default() -> Self {
        PdvParams {
            mass: 3.107,
            area_horizontal_flow: 0.15,
            area_vertical_flow: 0.78,
            rotor_reference_area: 0.15,
            drag_coefficient: 1.0,
            air_density: 1.225,
            gravity: 9.81,
            v_ascent: 5.0,
            v_descent: 4.0,
            v_cruise: 17.0,
            cruise_altitude: 30.0,
            battery_energy_wh: 99.9,
            ipt_power_w: 150.0,
            ipt_efficiency: 0.5,
        }
    }
}

impl PdvParams {
    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }

    fn check_speeds(&self) -> Result<(), EnergyError> {
        if self.v_ascent <= 0.0 || self.v_descent <= 0.0 || self.v_cruise <= 0.0 {
            return Err(EnergyError::InvalidSpeed {
                ascent: self.v_ascent,
                descent: self.v_descent,
                cruise: self.v_cruise,
            });
        }
        Ok(())
    }
}

/// Battery-side energy spent transferring to one node, joules:
/// `C / (2 η) · (v_max − v_now)²`.
pub fn ipt_energy(node: &SensorNode, ipt_efficiency: f64) -> f64 {
    let dv = node.v_max - node.v_now;
    node.capacitance / (2.0 * ipt_efficiency) * dv * dv
}

/// Node-side energy gained, joules: `C / 2 · (v_max − v_now)²`, which is the
/// efficiency-scaled transfer exactly.
pub fn recharged_energy(node: &SensorNode) -> f64 {
    let dv = node.v_max - node.v_now;
    0.5 * node.capacitance * dv * dv
}

/// Aerodynamic drag: `½ ρ C_D A v²`, newtons.
pub fn drag_force(airspeed: f64, area: f64, drag_coefficient: f64, air_density: f64) -> f64 {
    0.5 * air_density * drag_coefficient * area * airspeed * airspeed
}

/// Steady-state force balance case.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlightMode {
    /// Drag acts along the vertical motion axis: thrust carries both.
    Vertical,
    /// Drag is horizontal and gravity vertical: thrust is their resultant.
    Horizontal,
}

/// Required thrust for a steady-state motion under `drag` newtons of drag
/// and `weight = m·g` newtons.
pub fn thrust(mode: FlightMode, drag: f64, weight: f64) -> f64 {
    match mode {
        FlightMode::Vertical => drag + weight,
        FlightMode::Horizontal => (drag * drag + weight * weight).sqrt(),
    }
}

/// Mechanical rotor power from thrust: `sqrt(F_T³ / (2 ρ A))`, watts.
/// Motor energy over a window is this power times the duration.
pub fn motor_power(thrust: f64, air_density: f64, rotor_area: f64) -> f64 {
    (thrust.powi(3) / (2.0 * air_density * rotor_area)).sqrt()
}

/// Power needed to hold position against a horizontal wind of the given
/// speed. In still air this is `sqrt((m g)³ / (2 ρ A))`.
pub fn hover_power(pdv: &PdvParams, wind_speed: f64) -> f64 {
    let drag = drag_force(wind_speed, pdv.area_horizontal_flow, pdv.drag_coefficient, pdv.air_density);
    let thrust = thrust(FlightMode::Horizontal, drag, pdv.weight());
    motor_power(thrust, pdv.air_density, pdv.rotor_reference_area)
}

/// What a logged energy entry covers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LegKind {
    Travel { from: Waypoint, to: Waypoint },
    Charge { node: NodeId },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Waypoint {
    Start,
    Node(NodeId),
    End,
}

/// One flight or charge activity with its motor energy and duration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegEnergy {
    pub leg: usize,
    pub kind: LegKind,
    pub energy_wh: f64,
    pub duration_s: f64,
}

/// Energy breakdown of one mission evaluation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// Total motor energy, Wh, including hover during charges when enabled.
    pub e_motor_wh: f64,
    /// Total transfer energy, Wh.
    pub e_ipt_wh: f64,
    /// Total energy delivered into nodes, joules.
    pub e_recharged_j: f64,
    pub per_leg: Vec<LegEnergy>,
    pub total_time_s: f64,
    /// Set when any wind query fell outside the grid and was clamped.
    pub wind_clamped: bool,
}

impl EnergyReport {
    /// Total discharged energy `E_IPT + E_MR`, Wh.
    pub fn discharged_wh(&self) -> f64 {
        self.e_motor_wh + self.e_ipt_wh
    }
}

/// Motor energy and elapsed time of one point-to-point leg.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SegmentResult {
    pub energy_wh: f64,
    pub duration_s: f64,
    pub clamped: bool,
}

struct Phase {
    velocity: Vec3,
    duration_s: f64,
    area: f64,
    mode: FlightMode,
}

/// Simulates one leg as climb to cruise altitude, horizontal cruise, and
/// descent to the target altitude, stepping at [`SIM_STEP_S`] and sampling
/// the wind once per step. The relative airspeed is the ground velocity
/// minus the wind; its magnitude feeds the drag equation. A zero-length leg
/// costs nothing.
pub fn segment_energy(
    from: Vec3,
    to: Vec3,
    pdv: &PdvParams,
    field: &WindField,
    t0_s: f64,
) -> Result<SegmentResult, EnergyError> {
    pdv.check_speeds()?;
    if from == to {
        return Ok(SegmentResult::default());
    }

    let climb = (pdv.cruise_altitude - from.z).max(0.0);
    let descent = (pdv.cruise_altitude - to.z).max(0.0);
    let horizontal = ground_distance(from, to);
    let cruise_dir = if horizontal > 0.0 {
        Vec3::new((to.x - from.x) / horizontal, (to.y - from.y) / horizontal, 0.0)
    } else {
        Vec3::ZERO
    };

    let phases = [
        Phase {
            velocity: Vec3::new(0.0, 0.0, pdv.v_ascent),
            duration_s: climb / pdv.v_ascent,
            area: pdv.area_vertical_flow,
            mode: FlightMode::Vertical,
        },
        Phase {
            velocity: cruise_dir.scale(pdv.v_cruise),
            duration_s: horizontal / pdv.v_cruise,
            area: pdv.area_horizontal_flow,
            mode: FlightMode::Horizontal,
        },
        Phase {
            velocity: Vec3::new(0.0, 0.0, -pdv.v_descent),
            duration_s: descent / pdv.v_descent,
            area: pdv.area_vertical_flow,
            mode: FlightMode::Vertical,
        },
    ];

    let weight = pdv.weight();
    let mut position = from;
    let mut t = t0_s;
    let mut energy_j = 0.0;
    let mut clamped = false;

    for phase in phases {
        let mut remaining = phase.duration_s;
        while remaining > 0.0 {
            let dt = remaining.min(SIM_STEP_S);
            let (wind, clip) = field.sample(position, t);
            clamped |= clip;
            let airspeed = (phase.velocity - wind).norm();
            let drag = drag_force(airspeed, phase.area, pdv.drag_coefficient, pdv.air_density);
            let thrust_n = thrust(phase.mode, drag, weight);
            energy_j += motor_power(thrust_n, pdv.air_density, pdv.rotor_reference_area) * dt;
            position = position + phase.velocity.scale(dt);
            t += dt;
            remaining -= dt;
        }
    }

    Ok(SegmentResult {
        energy_wh: energy_j / JOULES_PER_WH,
        duration_s: t - t0_s,
        clamped,
    })
}

/// Evaluates a whole route: every travel leg via [`segment_energy`], the
/// transfer energy of every visit, and, when `include_hover_during_charge`
/// is set, hover power for the charge duration (`E_IPT / ipt_power`).
/// Hover energy is booked against the motor total, not the transfer total.
pub fn mission_energy(
    route: &Route,
    graph: &MissionGraph,
    pdv: &PdvParams,
    field: &WindField,
    include_hover_during_charge: bool,
    t0_s: f64,
) -> Result<EnergyReport, EnergyError> {
    let mut report = EnergyReport::default();
    let mut t = t0_s;
    let mut position = graph.start();
    let mut prev = Waypoint::Start;
    let mut leg = 0;

    let fly = |report: &mut EnergyReport,
                   t: &mut f64,
                   position: &mut Vec3,
                   prev: &mut Waypoint,
                   leg: &mut usize,
                   target: Vec3,
                   to: Waypoint|
     -> Result<(), EnergyError> {
        let seg = segment_energy(*position, target, pdv, field, *t)?;
        report.e_motor_wh += seg.energy_wh;
        report.wind_clamped |= seg.clamped;
        report.per_leg.push(LegEnergy {
            leg: *leg,
            kind: LegKind::Travel { from: *prev, to },
            energy_wh: seg.energy_wh,
            duration_s: seg.duration_s,
        });
        *t += seg.duration_s;
        *position = target;
        *prev = to;
        *leg += 1;
        Ok(())
    };

    for &id in &route.visit_order {
        let node = graph.node_by_id(id).ok_or(ModelError::UnknownNode(id))?;
        fly(&mut report, &mut t, &mut position, &mut prev, &mut leg, node.position, Waypoint::Node(id))?;

        let e_ipt_j = ipt_energy(node, pdv.ipt_efficiency);
        let charge_s = e_ipt_j / pdv.ipt_power_w;
        let hover_wh = if include_hover_during_charge {
            let (wind, clip) = field.sample(node.position, t);
            report.wind_clamped |= clip;
            hover_power(pdv, wind.norm()) * charge_s / JOULES_PER_WH
        } else {
            0.0
        };
        report.e_ipt_wh += e_ipt_j / JOULES_PER_WH;
        report.e_recharged_j += recharged_energy(node);
        report.e_motor_wh += hover_wh;
        report.per_leg.push(LegEnergy {
            leg,
            kind: LegKind::Charge { node: id },
            energy_wh: hover_wh,
            duration_s: charge_s,
        });
        t += charge_s;
        leg += 1;
    }

    fly(&mut report, &mut t, &mut position, &mut prev, &mut leg, graph.end(), Waypoint::End)?;
    report.total_time_s = t - t0_s;
    Ok(report)
}
