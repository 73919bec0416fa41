//! Scenario generation, solution attributes, wind-field synthesis, and the
//! on-disk formats.
//!
//! Scenarios, plans, configs, events and logs are JSON. Wind fields use a
//! dedicated text format: a JSON header line (origin, cube size, dims, time
//! step, frame count) followed by one `vx vy vz` line per vertex, row-major
//! with x fastest, frame after frame. Floats print shortest-roundtrip, so a
//! write/read cycle is bit-exact.
//!
//! Axis convention: x east, y north, z up. A "west wind" blows toward the
//! east; fields store the air-velocity vector the vehicle experiences, so a
//! 5 m/s westerly is `(-5, 0, 0)` when queried as a headwind on a westbound
//! leg.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{recharged_energy, EnergyReport, PdvParams, JOULES_PER_WH};
use crate::geom::Vec3;
use crate::mission::{EnergyEvent, MissionLog, ReplanConfig};
use crate::model::{compute_prize, MissionGraph, ModelError, PlannerConfig, Route, SensorNode};
use crate::wind::{WindError, WindField};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Malformed { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Wind {
        path: String,
        #[source]
        source: WindError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("attrs need a positive initial energy, got {0} Wh")]
    NonpositiveInitialEnergy(f64),
    #[error("attrs need rechargeable energy in the graph")]
    NoRechargeableEnergy,
}

/// Sensor unit kind; fixes the capacitor parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Temperature,
    Pressure,
}

impl SensorKind {
    pub fn capacitance(self) -> f64 {
        match self {
            SensorKind::Temperature => 6.0,
            SensorKind::Pressure => 3.0,
        }
    }

    pub fn v_max(self) -> f64 {
        match self {
            SensorKind::Temperature => 2.5,
            SensorKind::Pressure => 5.0,
        }
    }
}

/// One deployed node as stored in a scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioNode {
    pub position: Vec3,
    pub kind: SensorKind,
    pub v_now: f64,
}

/// A deployment: field size, node records and mission endpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub area: (f64, f64),
    pub nodes: Vec<ScenarioNode>,
    pub start: Vec3,
    pub end: Vec3,
    pub seed: u64,
}

impl Scenario {
    /// Materializes sensor nodes with ids in record order and prizes from
    /// the voltage mapping.
    pub fn sensor_nodes(&self, prize_levels: u32) -> Result<Vec<SensorNode>, ModelError> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let prize = compute_prize(n.v_now, n.kind.v_max(), prize_levels)?;
                SensorNode::new(
                    i as u32,
                    n.position,
                    n.kind.capacitance(),
                    n.kind.v_max(),
                    n.v_now,
                    prize,
                )
            })
            .collect()
    }

    /// Builds the mission graph for this scenario under the given config.
    pub fn graph(&self, config: &PlannerConfig) -> Result<MissionGraph, ModelError> {
        MissionGraph::build(self.sensor_nodes(config.prize_upper)?, self.start, self.end, config.prize_lower)
    }
}

/// Uniform random deployment over the area: positions uniform, voltage
/// uniform in `[0, v_max]`, kind temperature with probability
/// `temperature_fraction`. Start and end sit at the area center.
pub fn generate_scenario(
    n: usize,
    area: (f64, f64),
    temperature_fraction: f64,
    seed: u64,
) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = (0..n)
        .map(|_| {
            let position =
                Vec3::new(rng.random_range(0.0..area.0), rng.random_range(0.0..area.1), 0.0);
            let kind = if rng.random::<f64>() < temperature_fraction {
                SensorKind::Temperature
            } else {
                SensorKind::Pressure
            };
            let v_now = rng.random_range(0.0..kind.v_max());
            ScenarioNode { position, kind, v_now }
        })
        .collect();
    let center = Vec3::new(area.0 / 2.0, area.1 / 2.0, 0.0);
    Scenario { area, nodes, start: center, end: center, seed }
}

/// Wind synthesis model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WindModel {
    Still,
    /// The same vector everywhere, at all times.
    Constant(Vec3),
    /// Seeded smooth random field: spatially box-smoothed vertex noise with
    /// first-order temporal correlation, scaled toward `mean_speed`.
    Gusty { seed: u64, mean_speed: f64 },
}

/// Builds a wind field. `Still` and `Constant` are uniform regardless of
/// the grid arguments; `Gusty` fills the requested grid and frame count.
pub fn generate_wind(
    dims: (usize, usize, usize),
    cube_size: f64,
    time_step_s: f64,
    frames: usize,
    model: WindModel,
) -> WindField {
    match model {
        WindModel::Still => WindField::still(),
        WindModel::Constant(v) => WindField::uniform(v),
        WindModel::Gusty { seed, mean_speed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (nx, ny, nz) = (dims.0 + 1, dims.1 + 1, dims.2 + 1);
            let count = nx * ny * nz;
            let noise = |rng: &mut ChaCha8Rng| -> Vec<Vec3> {
                let raw: Vec<Vec3> = (0..count)
                    .map(|_| {
                        Vec3::new(
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-0.15..0.15),
                        )
                    })
                    .collect();
                // One box-smoothing pass over the 6-neighborhood.
                let at = |v: &[Vec3], x: usize, y: usize, z: usize| v[(z * ny + y) * nx + x];
                let mut smooth = Vec::with_capacity(count);
                for z in 0..nz {
                    for y in 0..ny {
                        for x in 0..nx {
                            let mut sum = at(&raw, x, y, z);
                            let mut k = 1.0;
                            let mut add = |v: Vec3| {
                                sum = sum + v;
                                k += 1.0;
                            };
                            if x > 0 { add(at(&raw, x - 1, y, z)); }
                            if x + 1 < nx { add(at(&raw, x + 1, y, z)); }
                            if y > 0 { add(at(&raw, x, y - 1, z)); }
                            if y + 1 < ny { add(at(&raw, x, y + 1, z)); }
                            if z > 0 { add(at(&raw, x, y, z - 1)); }
                            if z + 1 < nz { add(at(&raw, x, y, z + 1)); }
                            smooth.push(sum.scale(mean_speed * 1.8 / k));
                        }
                    }
                }
                smooth
            };

            let mut all = Vec::with_capacity(frames.max(1));
            let mut current = noise(&mut rng);
            all.push(current.clone());
            for _ in 1..frames.max(1) {
                let fresh = noise(&mut rng);
                current = current
                    .iter()
                    .zip(fresh.iter())
                    .map(|(a, b)| a.scale(0.8) + b.scale(0.2))
                    .collect();
                all.push(current.clone());
            }
            WindField::new(Vec3::ZERO, cube_size, dims, time_step_s, all)
                .expect("generated frames match the grid")
        }
    }
}

/// Solution attributes reported for every experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attrs {
    /// Solver wall-clock, seconds.
    pub t_s: f64,
    /// Total recharged energy of visited nodes, joules.
    pub e_re_star_j: f64,
    /// Total discharged energy, Wh.
    pub e_de_star_wh: f64,
    /// Recharged share of all rechargeable energy, percent.
    pub r_re_pct: f64,
    /// Discharged share of the initial energy, percent.
    pub r_de_pct: f64,
    /// Discharge-to-recharge conversion, per mille.
    pub r_rd_permille: f64,
}

/// Derives the attribute set from an energy report:
/// `R_re = E_re*/ΣE_re · 100`, `R_de = E_de*/E_initial · 100`,
/// `R_rd = E_re*/(3600 · E_de*) · 1000`.
pub fn compute_attrs(
    report: &EnergyReport,
    graph: &MissionGraph,
    e_initial_wh: f64,
    elapsed_s: f64,
) -> Result<Attrs, IoError> {
    if e_initial_wh <= 0.0 {
        return Err(IoError::NonpositiveInitialEnergy(e_initial_wh));
    }
    let total_rechargeable: f64 = graph.nodes().iter().map(recharged_energy).sum();
    if total_rechargeable <= 0.0 {
        return Err(IoError::NoRechargeableEnergy);
    }
    let e_re_star_j = report.e_recharged_j;
    let e_de_star_wh = report.discharged_wh();
    let r_rd_permille = if e_de_star_wh > 0.0 {
        e_re_star_j / (JOULES_PER_WH * e_de_star_wh) * 1000.0
    } else {
        0.0
    };
    Ok(Attrs {
        t_s: elapsed_s,
        e_re_star_j,
        e_de_star_wh,
        r_re_pct: e_re_star_j / total_rechargeable * 100.0,
        r_de_pct: e_de_star_wh / e_initial_wh * 100.0,
        r_rd_permille,
    })
}

/// A plan file: the route, its attributes, and the forecast energy report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanFile {
    pub route: Route,
    pub attrs: Attrs,
    pub report: EnergyReport,
}

/// Planner, vehicle and replan settings bundled into one config file.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ConfigFile {
    pub planner: PlannerConfig,
    pub pdv: PdvParams,
    pub replan: ReplanConfig,
}

fn read_to_string(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Read { path: path.display().to_string(), source })
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, IoError> {
    serde_json::from_str(text).map_err(|source| IoError::Parse { path: path.display().to_string(), source })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text).map_err(|source| IoError::Read { path: path.display().to_string(), source })
}

pub fn read_scenario(path: &Path) -> Result<Scenario, IoError> {
    parse_json(path, &read_to_string(path)?)
}

pub fn write_scenario(path: &Path, scenario: &Scenario) -> Result<(), IoError> {
    write_json(path, scenario)
}

pub fn read_plan(path: &Path) -> Result<PlanFile, IoError> {
    parse_json(path, &read_to_string(path)?)
}

pub fn write_plan(path: &Path, plan: &PlanFile) -> Result<(), IoError> {
    write_json(path, plan)
}

pub fn read_events(path: &Path) -> Result<Vec<EnergyEvent>, IoError> {
    parse_json(path, &read_to_string(path)?)
}

pub fn write_events(path: &Path, events: &[EnergyEvent]) -> Result<(), IoError> {
    write_json(path, &events)
}

pub fn read_config(path: &Path) -> Result<ConfigFile, IoError> {
    parse_json(path, &read_to_string(path)?)
}

pub fn write_config(path: &Path, config: &ConfigFile) -> Result<(), IoError> {
    write_json(path, config)
}

/// Mission logs are line-delimited: one JSON event record per line, then a
/// closing summary record.
pub fn write_mission_log(path: &Path, log: &MissionLog) -> Result<(), IoError> {
    let file = fs::File::create(path)
        .map_err(|source| IoError::Read { path: path.display().to_string(), source })?;
    let mut out = BufWriter::new(file);
    let io_err = |source| IoError::Read { path: path.display().to_string(), source };
    for event in &log.events {
        let line = serde_json::to_string(event).expect("serializable");
        writeln!(out, "{line}").map_err(io_err)?;
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        summary: bool,
        initial_energy_wh: f64,
        final_remaining_wh: f64,
        replans: usize,
        completed: bool,
        charged: &'a [u32],
        report: &'a EnergyReport,
    }
    let line = serde_json::to_string(&Summary {
        summary: true,
        initial_energy_wh: log.initial_energy_wh,
        final_remaining_wh: log.final_remaining_wh,
        replans: log.replans,
        completed: log.completed,
        charged: &log.charged,
        report: &log.report,
    })
    .expect("serializable");
    writeln!(out, "{line}").map_err(io_err)?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct WindHeader {
    origin: Vec3,
    cube_size: f64,
    dims: (usize, usize, usize),
    time_step_s: f64,
    frames: usize,
}

pub fn write_wind(path: &Path, field: &WindField) -> Result<(), IoError> {
    let file = fs::File::create(path)
        .map_err(|source| IoError::Read { path: path.display().to_string(), source })?;
    let mut out = BufWriter::new(file);
    let io_err = |source| IoError::Read { path: path.display().to_string(), source };
    let header = WindHeader {
        origin: field.origin(),
        cube_size: field.cube_size(),
        dims: field.dims(),
        time_step_s: field.time_step_s(),
        frames: field.frames().len(),
    };
    writeln!(out, "{}", serde_json::to_string(&header).expect("serializable")).map_err(io_err)?;
    for frame in field.frames() {
        for v in frame {
            writeln!(out, "{} {} {}", v.x, v.y, v.z).map_err(io_err)?;
        }
    }
    Ok(())
}

pub fn read_wind(path: &Path) -> Result<WindField, IoError> {
    let file = fs::File::open(path)
        .map_err(|source| IoError::Read { path: path.display().to_string(), source })?;
    let mut lines = BufReader::new(file).lines();
    let path_str = path.display().to_string();

    let header_line = lines
        .next()
        .ok_or_else(|| IoError::Malformed {
            path: path_str.clone(),
            line: 1,
            message: "missing header".into(),
        })?
        .map_err(|source| IoError::Read { path: path_str.clone(), source })?;
    let header: WindHeader = serde_json::from_str(&header_line)
        .map_err(|source| IoError::Parse { path: path_str.clone(), source })?;

    let per_frame = (header.dims.0 + 1) * (header.dims.1 + 1) * (header.dims.2 + 1);
    let mut frames = Vec::with_capacity(header.frames);
    let mut line_no = 1usize;
    for frame_idx in 0..header.frames {
        let mut frame = Vec::with_capacity(per_frame);
        for _ in 0..per_frame {
            line_no += 1;
            let line = lines
                .next()
                .ok_or_else(|| IoError::Malformed {
                    path: path_str.clone(),
                    line: line_no,
                    message: format!("frame {frame_idx} truncated"),
                })?
                .map_err(|source| IoError::Read { path: path_str.clone(), source })?;
            let mut parts = line.split_whitespace();
            let mut component = |field: &str| -> Result<f64, IoError> {
                parts
                    .next()
                    .ok_or_else(|| IoError::Malformed {
                        path: path_str.clone(),
                        line: line_no,
                        message: format!("missing {field} component"),
                    })?
                    .parse::<f64>()
                    .map_err(|e| IoError::Malformed {
                        path: path_str.clone(),
                        line: line_no,
                        message: format!("bad {field} component: {e}"),
                    })
            };
            let x = component("x")?;
            let y = component("y")?;
            let z = component("z")?;
            frame.push(Vec3::new(x, y, z));
        }
        frames.push(frame);
    }
    WindField::new(header.origin, header.cube_size, header.dims, header.time_step_s, frames)
        .map_err(|source| IoError::Wind { path: path_str, source })
}
