//! Scenario documents: the TOML files that script a workspace episode.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::{normalize_angle, Shape, Vec2};
use crate::safety::{Behavior, Load, Occluder, ParamsDoc, SafetyError, SafetyParams};

/// The scenario that reproduces the construction case study.
pub const BEAM_TRANSPORT: &str = include_str!("../../scenarios/beam_transport.toml");

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario syntax error: {0}")]
    Syntax(String),
    #[error("scenario field `{path}`: {message}")]
    Field { path: String, message: String },
}

impl ScenarioError {
    fn field(path: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Field {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Dotted path of the offending field, when known.
    pub fn path(&self) -> Option<&str> {
        match self {
            ScenarioError::Field { path, .. } => Some(path),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Document schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub name: String,
    #[serde(default = "default_tick_duration")]
    pub tick_duration: f64,
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: ParamsDoc,
    pub robot: RobotDoc,
    pub worker: WorkerDoc,
    #[serde(default)]
    pub occluders: Vec<OccluderDoc>,
    #[serde(default)]
    pub events: Vec<EventDoc>,
    #[serde(default)]
    pub nominal: Vec<NominalDoc>,
}

fn default_tick_duration() -> f64 {
    0.1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotDoc {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub heading: f64,
    pub cruise_speed: f64,
    #[serde(default = "default_load")]
    pub load: Load,
}

fn default_load() -> Load {
    Load::CarryingBeam
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkerDoc {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    #[serde(default = "default_role")]
    pub role: String,
}

fn default_role() -> String {
    "worker".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccluderDoc {
    pub id: String,
    pub kind: String,
    pub shape: Shape,
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub speed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zone: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventDoc {
    SetWorkerWaypoint { tick: u64, x: f64, y: f64 },
    SetOccluderWaypoint { tick: u64, id: String, x: f64, y: f64 },
    SpawnOccluder { tick: u64, occluder: OccluderDoc },
    RemoveOccluder { tick: u64, id: String },
    SetNominal { tick: u64, behavior: Behavior },
}

impl EventDoc {
    fn tick(&self) -> u64 {
        match self {
            EventDoc::SetWorkerWaypoint { tick, .. }
            | EventDoc::SetOccluderWaypoint { tick, .. }
            | EventDoc::SpawnOccluder { tick, .. }
            | EventDoc::RemoveOccluder { tick, .. }
            | EventDoc::SetNominal { tick, .. } => *tick,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NominalDoc {
    pub tick: u64,
    pub behavior: Behavior,
}

// ---------------------------------------------------------------------------
// Validated scenario
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct RobotInit {
    pub position: Vec2,
    pub heading: f64,
    pub cruise_speed: f64,
    pub load: Load,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerInit {
    pub id: String,
    pub position: Vec2,
    pub speed: f64,
    pub role: String,
}

/// An occluder and the speed it travels at when given a waypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct OccluderInit {
    pub occluder: Occluder,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    SetWorkerWaypoint(Vec2),
    SetOccluderWaypoint { id: String, target: Vec2 },
    SpawnOccluder(OccluderInit),
    RemoveOccluder(String),
    SetNominal(Behavior),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub tick_duration: f64,
    pub horizon: u64,
    pub seed: u64,
    pub params: Arc<SafetyParams>,
    pub robot: RobotInit,
    pub worker: WorkerInit,
    pub occluders: Vec<OccluderInit>,
    /// Sorted by tick; same-tick events apply in document order.
    pub events: Vec<(u64, Event)>,
    /// Sorted by tick.
    pub nominal: Vec<(u64, Behavior)>,
}

/// Parses and validates a scenario document.
pub fn load_scenario(source: &str) -> Result<Scenario, ScenarioError> {
    let de = toml::Deserializer::parse(source).map_err(|e| ScenarioError::Syntax(e.to_string()))?;
    let doc: ScenarioDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.message().to_string();
        if path == "." || path.is_empty() {
            ScenarioError::Syntax(message)
        } else {
            ScenarioError::field(path, message)
        }
    })?;
    Scenario::from_doc(doc)
}

pub fn load_scenario_file(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_scenario(&text)
}

fn check_finite(path: &str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::field(path, format!("must be finite, got {v}")))
    }
}

fn check_speed(path: &str, v: f64) -> Result<(), ScenarioError> {
    check_finite(path, v)?;
    if v < 0.0 {
        return Err(ScenarioError::field(path, format!("must be >= 0, got {v}")));
    }
    Ok(())
}

fn occluder_from_doc(path: &str, doc: &OccluderDoc) -> Result<OccluderInit, ScenarioError> {
    if doc.id.is_empty() {
        return Err(ScenarioError::field(format!("{path}.id"), "must not be empty"));
    }
    check_finite(&format!("{path}.x"), doc.x)?;
    check_finite(&format!("{path}.y"), doc.y)?;
    check_speed(&format!("{path}.speed"), doc.speed)?;
    let shape = doc
        .shape
        .clone()
        .validated()
        .map_err(|e| ScenarioError::field(format!("{path}.shape"), e.to_string()))?;
    Ok(OccluderInit {
        occluder: Occluder {
            occluder_id: doc.id.clone(),
            kind: doc.kind.clone(),
            center: Vec2::new(doc.x, doc.y),
            shape,
            velocity: Vec2::ZERO,
            zone: doc.zone.clone(),
        },
        speed: doc.speed,
    })
}

fn occluder_to_doc(init: &OccluderInit) -> OccluderDoc {
    OccluderDoc {
        id: init.occluder.occluder_id.clone(),
        kind: init.occluder.kind.clone(),
        shape: init.occluder.shape.clone(),
        x: init.occluder.center.x,
        y: init.occluder.center.y,
        speed: init.speed,
        zone: init.occluder.zone.clone(),
    }
}

fn params_error(e: SafetyError) -> ScenarioError {
    match e {
        SafetyError::InvalidParams { field, reason } => {
            ScenarioError::field(format!("params.{field}"), reason)
        }
        other => ScenarioError::field("params", other.to_string()),
    }
}

impl Scenario {
    pub fn from_doc(doc: ScenarioDoc) -> Result<Self, ScenarioError> {
        if doc.name.trim().is_empty() {
            return Err(ScenarioError::field("name", "must not be empty"));
        }
        check_finite("tick_duration", doc.tick_duration)?;
        if doc.tick_duration <= 0.0 {
            return Err(ScenarioError::field("tick_duration", "must be > 0"));
        }
        if doc.horizon == 0 {
            return Err(ScenarioError::field("horizon", "must be > 0"));
        }
        let params = SafetyParams::try_from(doc.params.clone()).map_err(params_error)?;

        check_finite("robot.x", doc.robot.x)?;
        check_finite("robot.y", doc.robot.y)?;
        check_finite("robot.heading", doc.robot.heading)?;
        check_speed("robot.cruise_speed", doc.robot.cruise_speed)?;
        let robot = RobotInit {
            position: Vec2::new(doc.robot.x, doc.robot.y),
            heading: normalize_angle(doc.robot.heading),
            cruise_speed: doc.robot.cruise_speed,
            load: doc.robot.load,
        };

        if doc.worker.id.is_empty() {
            return Err(ScenarioError::field("worker.id", "must not be empty"));
        }
        check_finite("worker.x", doc.worker.x)?;
        check_finite("worker.y", doc.worker.y)?;
        check_speed("worker.speed", doc.worker.speed)?;
        let worker = WorkerInit {
            id: doc.worker.id.clone(),
            position: Vec2::new(doc.worker.x, doc.worker.y),
            speed: doc.worker.speed,
            role: doc.worker.role.clone(),
        };

        let mut live: BTreeSet<String> = BTreeSet::new();
        let mut occluders = Vec::with_capacity(doc.occluders.len());
        for (i, o) in doc.occluders.iter().enumerate() {
            let path = format!("occluders[{i}]");
            let init = occluder_from_doc(&path, o)?;
            if !live.insert(o.id.clone()) {
                return Err(ScenarioError::field(
                    format!("{path}.id"),
                    format!("duplicate occluder id `{}`", o.id),
                ));
            }
            occluders.push(init);
        }

        // Events are checked in order against the set of occluders that
        // will exist when each one fires.
        let mut events = Vec::with_capacity(doc.events.len());
        let mut last_tick = 0;
        for (i, e) in doc.events.iter().enumerate() {
            let path = format!("events[{i}]");
            let tick = e.tick();
            if tick < last_tick {
                return Err(ScenarioError::field(
                    format!("{path}.tick"),
                    format!("events must be sorted by tick ({tick} after {last_tick})"),
                ));
            }
            if tick == 0 || tick > doc.horizon {
                return Err(ScenarioError::field(
                    format!("{path}.tick"),
                    format!("must be in 1..={}, got {tick}", doc.horizon),
                ));
            }
            last_tick = tick;
            let event = match e {
                EventDoc::SetWorkerWaypoint { x, y, .. } => {
                    check_finite(&format!("{path}.x"), *x)?;
                    check_finite(&format!("{path}.y"), *y)?;
                    Event::SetWorkerWaypoint(Vec2::new(*x, *y))
                }
                EventDoc::SetOccluderWaypoint { id, x, y, .. } => {
                    if !live.contains(id) {
                        return Err(ScenarioError::field(
                            format!("{path}.id"),
                            format!("unknown occluder `{id}`"),
                        ));
                    }
                    check_finite(&format!("{path}.x"), *x)?;
                    check_finite(&format!("{path}.y"), *y)?;
                    Event::SetOccluderWaypoint {
                        id: id.clone(),
                        target: Vec2::new(*x, *y),
                    }
                }
                EventDoc::SpawnOccluder { occluder, .. } => {
                    let init = occluder_from_doc(&format!("{path}.occluder"), occluder)?;
                    if !live.insert(occluder.id.clone()) {
                        return Err(ScenarioError::field(
                            format!("{path}.occluder.id"),
                            format!("occluder `{}` already exists", occluder.id),
                        ));
                    }
                    Event::SpawnOccluder(init)
                }
                EventDoc::RemoveOccluder { id, .. } => {
                    if !live.remove(id) {
                        return Err(ScenarioError::field(
                            format!("{path}.id"),
                            format!("unknown occluder `{id}`"),
                        ));
                    }
                    Event::RemoveOccluder(id.clone())
                }
                EventDoc::SetNominal { behavior, .. } => Event::SetNominal(*behavior),
            };
            events.push((tick, event));
        }

        let mut nominal = Vec::with_capacity(doc.nominal.len());
        let mut last_tick = 0;
        for (i, n) in doc.nominal.iter().enumerate() {
            if n.tick < last_tick {
                return Err(ScenarioError::field(
                    format!("nominal[{i}].tick"),
                    "entries must be sorted by tick",
                ));
            }
            if n.tick > doc.horizon {
                return Err(ScenarioError::field(
                    format!("nominal[{i}].tick"),
                    format!("beyond horizon {}", doc.horizon),
                ));
            }
            last_tick = n.tick;
            nominal.push((n.tick, n.behavior));
        }

        Ok(Scenario {
            name: doc.name,
            tick_duration: doc.tick_duration,
            horizon: doc.horizon,
            seed: doc.seed,
            params: Arc::new(params),
            robot,
            worker,
            occluders,
            events,
            nominal,
        })
    }

    /// The bundled construction case-study scenario.
    pub fn beam_transport() -> Scenario {
        load_scenario(BEAM_TRANSPORT).expect("bundled scenario is valid")
    }

    /// Normalized document form (defaults filled in, heading wrapped).
    pub fn to_doc(&self) -> ScenarioDoc {
        ScenarioDoc {
            name: self.name.clone(),
            tick_duration: self.tick_duration,
            horizon: self.horizon,
            seed: self.seed,
            params: ParamsDoc::from((*self.params).clone()),
            robot: RobotDoc {
                x: self.robot.position.x,
                y: self.robot.position.y,
                heading: self.robot.heading,
                cruise_speed: self.robot.cruise_speed,
                load: self.robot.load,
            },
            worker: WorkerDoc {
                id: self.worker.id.clone(),
                x: self.worker.position.x,
                y: self.worker.position.y,
                speed: self.worker.speed,
                role: self.worker.role.clone(),
            },
            occluders: self.occluders.iter().map(occluder_to_doc).collect(),
            events: self
                .events
                .iter()
                .map(|(tick, e)| {
                    let tick = *tick;
                    match e {
                        Event::SetWorkerWaypoint(p) => EventDoc::SetWorkerWaypoint { tick, x: p.x, y: p.y },
                        Event::SetOccluderWaypoint { id, target } => EventDoc::SetOccluderWaypoint {
                            tick,
                            id: id.clone(),
                            x: target.x,
                            y: target.y,
                        },
                        Event::SpawnOccluder(o) => EventDoc::SpawnOccluder {
                            tick,
                            occluder: occluder_to_doc(o),
                        },
                        Event::RemoveOccluder(id) => EventDoc::RemoveOccluder { tick, id: id.clone() },
                        Event::SetNominal(b) => EventDoc::SetNominal { tick, behavior: *b },
                    }
                })
                .collect(),
            nominal: self
                .nominal
                .iter()
                .map(|(tick, behavior)| NominalDoc {
                    tick: *tick,
                    behavior: *behavior,
                })
                .collect(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(&self.to_doc()).expect("scenario document serializes")
    }
}
