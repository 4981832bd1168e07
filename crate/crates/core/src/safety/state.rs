use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::{Shape, Vec2};

use super::SafetyError;

/// Tracked worker (the human part of the safety state).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanState {
    pub worker_id: String,
    pub position: Vec2,
    pub velocity: Vec2,
    /// Free tag such as "rigger". Carried for explanations; no rule reads it.
    pub role: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Load {
    Unloaded,
    CarryingBeam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotState {
    pub position: Vec2,
    /// Radians in `[-pi, pi]`.
    pub heading: f64,
    /// Meters per second, never negative.
    pub speed: f64,
    pub load: Load,
    /// Behavior in force while this state was produced.
    pub mode: Behavior,
}

impl RobotState {
    pub fn heading_dir(&self) -> Vec2 {
        Vec2::from_angle(self.heading)
    }

    /// Unit vector pointing to the given side of the robot.
    pub fn side_dir(&self, side: Side) -> Vec2 {
        let left = self.heading_dir().perp();
        match side {
            Side::Left => left,
            Side::Right => -left,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Occluder {
    pub occluder_id: String,
    /// Free tag such as "forklift" or "stack".
    pub kind: String,
    pub center: Vec2,
    pub shape: Shape,
    pub velocity: Vec2,
    /// Cosmetic workspace label used in explanation text ("C").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zone: Option<String>,
}

impl Occluder {
    pub fn blocks(&self, from: Vec2, to: Vec2) -> bool {
        self.shape.intersects_segment(self.center, from, to)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvState {
    pub occluders: Vec<Occluder>,
    /// worker_id -> visibility confidence in `[0, 1]`.
    pub visibility: BTreeMap<String, f64>,
}

impl EnvState {
    pub fn occluder(&self, id: &str) -> Option<&Occluder> {
        self.occluders.iter().find(|o| o.occluder_id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuidanceZone {
    pub side: Side,
    #[serde(default = "default_max_distance")]
    pub max_distance: f64,
}

fn default_max_distance() -> f64 {
    1.0
}

impl Default for GuidanceZone {
    fn default() -> Self {
        Self {
            side: Side::Right,
            max_distance: default_max_distance(),
        }
    }
}

/// The rule set of the prototype controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintId {
    Proximity,
    Visibility,
    GuidanceZone,
}

impl ConstraintId {
    pub const ALL: [ConstraintId; 3] = [
        ConstraintId::Proximity,
        ConstraintId::Visibility,
        ConstraintId::GuidanceZone,
    ];

    /// Behavior the rule maps to when it decides the arbitration.
    pub fn mapped_behavior(self) -> Behavior {
        match self {
            ConstraintId::Proximity => Behavior::Stop,
            ConstraintId::Visibility => Behavior::Pause,
            ConstraintId::GuidanceZone => Behavior::ManualFollow,
        }
    }

    /// Name of the parameter in `SafetyParams` that governs the rule.
    pub fn parameter(self) -> &'static str {
        match self {
            ConstraintId::Proximity => "d_min",
            ConstraintId::Visibility => "v_min",
            ConstraintId::GuidanceZone => "guidance_zone.max_distance",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintId::Proximity => "proximity",
            ConstraintId::Visibility => "visibility",
            ConstraintId::GuidanceZone => "guidance_zone",
        }
    }
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConstraintId {
    type Err = SafetyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proximity" => Ok(ConstraintId::Proximity),
            "visibility" => Ok(ConstraintId::Visibility),
            "guidance_zone" => Ok(ConstraintId::GuidanceZone),
            other => Err(SafetyError::UnknownName {
                kind: "constraint",
                name: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    Continue,
    SlowDown,
    Pause,
    Stop,
    ManualFollow,
}

impl Behavior {
    pub const ALL: [Behavior; 5] = [
        Behavior::Continue,
        Behavior::SlowDown,
        Behavior::Pause,
        Behavior::Stop,
        Behavior::ManualFollow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Behavior::Continue => "continue",
            Behavior::SlowDown => "slow_down",
            Behavior::Pause => "pause",
            Behavior::Stop => "stop",
            Behavior::ManualFollow => "manual_follow",
        }
    }

    /// Human-readable label used in rendered text.
    pub fn label(self) -> &'static str {
        match self {
            Behavior::Continue => "continue",
            Behavior::SlowDown => "slow down",
            Behavior::Pause => "pause",
            Behavior::Stop => "stop",
            Behavior::ManualFollow => "manual-follow",
        }
    }

    /// Robot is held in place.
    pub fn is_halt(self) -> bool {
        matches!(self, Behavior::Pause | Behavior::Stop)
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Behavior {
    type Err = SafetyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "continue" => Ok(Behavior::Continue),
            "slow_down" | "slowdown" => Ok(Behavior::SlowDown),
            "pause" => Ok(Behavior::Pause),
            "stop" => Ok(Behavior::Stop),
            "manual_follow" | "manual" | "manual-follow" => Ok(Behavior::ManualFollow),
            other => Err(SafetyError::UnknownName {
                kind: "behavior",
                name: other.to_string(),
            }),
        }
    }
}

/// The certified safety envelope. Fields are private and there are no
/// setters: once built, a value never changes. Sessions share it through an
/// `Arc`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsDoc", into = "ParamsDoc")]
pub struct SafetyParams {
    d_min: f64,
    v_min: f64,
    guidance_zone: GuidanceZone,
    priorities: Vec<ConstraintId>,
}

/// Serialized form of [`SafetyParams`], also the `params` table of a
/// scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsDoc {
    #[serde(default = "default_d_min")]
    pub d_min: f64,
    #[serde(default = "default_v_min")]
    pub v_min: f64,
    #[serde(default)]
    pub guidance_zone: GuidanceZone,
    #[serde(default = "default_priorities")]
    pub priorities: Vec<ConstraintId>,
}

fn default_d_min() -> f64 {
    1.5
}

fn default_v_min() -> f64 {
    0.6
}

fn default_priorities() -> Vec<ConstraintId> {
    ConstraintId::ALL.to_vec()
}

impl Default for ParamsDoc {
    fn default() -> Self {
        Self {
            d_min: default_d_min(),
            v_min: default_v_min(),
            guidance_zone: GuidanceZone::default(),
            priorities: default_priorities(),
        }
    }
}

impl TryFrom<ParamsDoc> for SafetyParams {
    type Error = SafetyError;

    fn try_from(doc: ParamsDoc) -> Result<Self, Self::Error> {
        SafetyParams::new(doc.d_min, doc.v_min, doc.guidance_zone, doc.priorities)
    }
}

impl From<SafetyParams> for ParamsDoc {
    fn from(p: SafetyParams) -> Self {
        ParamsDoc {
            d_min: p.d_min,
            v_min: p.v_min,
            guidance_zone: p.guidance_zone,
            priorities: p.priorities,
        }
    }
}

impl Default for SafetyParams {
    fn default() -> Self {
        SafetyParams::try_from(ParamsDoc::default()).expect("default params are valid")
    }
}

impl SafetyParams {
    pub fn new(
        d_min: f64,
        v_min: f64,
        guidance_zone: GuidanceZone,
        priorities: Vec<ConstraintId>,
    ) -> Result<Self, SafetyError> {
        if !(d_min.is_finite() && d_min > 0.0) {
            return Err(SafetyError::InvalidParams {
                field: "d_min",
                reason: format!("must be > 0, got {d_min}"),
            });
        }
        if !(v_min > 0.0 && v_min <= 1.0) {
            return Err(SafetyError::InvalidParams {
                field: "v_min",
                reason: format!("must be in (0, 1], got {v_min}"),
            });
        }
        if !(guidance_zone.max_distance.is_finite() && guidance_zone.max_distance > 0.0) {
            return Err(SafetyError::InvalidParams {
                field: "guidance_zone.max_distance",
                reason: format!("must be > 0, got {}", guidance_zone.max_distance),
            });
        }
        let mut sorted = priorities.clone();
        sorted.sort();
        if sorted != ConstraintId::ALL {
            return Err(SafetyError::InvalidParams {
                field: "priorities",
                reason: format!(
                    "must list each of proximity, visibility, guidance_zone exactly once, got {:?}",
                    priorities.iter().map(|c| c.as_str()).collect::<Vec<_>>()
                ),
            });
        }
        Ok(Self {
            d_min,
            v_min,
            guidance_zone,
            priorities,
        })
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    pub fn v_min(&self) -> f64 {
        self.v_min
    }

    pub fn guidance_zone(&self) -> GuidanceZone {
        self.guidance_zone
    }

    /// Highest priority first.
    pub fn priorities(&self) -> &[ConstraintId] {
        &self.priorities
    }

    /// Position in the priority order; 0 is the highest.
    pub fn rank(&self, id: ConstraintId) -> usize {
        self.priorities
            .iter()
            .position(|c| *c == id)
            .expect("priorities cover every constraint")
    }

    /// Hex SHA-256 of the sorted-key JSON serialization. Stable for
    /// trace schema version 1.
    pub fn content_hash(&self) -> String {
        let value = serde_json::to_value(self).expect("params serialize");
        let canonical = serde_json::to_string(&value).expect("json value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// Everything the controller looks at for one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetyState {
    pub tick: u64,
    pub human: HumanState,
    pub robot: RobotState,
    pub env: EnvState,
    pub params: Arc<SafetyParams>,
}

impl SafetyState {
    /// Visibility confidence of the tracked worker; a worker with no entry
    /// is treated as fully visible.
    pub fn worker_visibility(&self) -> f64 {
        self.env
            .visibility
            .get(&self.human.worker_id)
            .copied()
            .unwrap_or(1.0)
    }

    /// Checks the type invariants, naming the first offending field.
    pub fn validate(&self) -> Result<(), SafetyError> {
        fn finite(field: &str, v: f64) -> Result<(), SafetyError> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(SafetyError::InvalidState {
                    field: field.to_string(),
                    reason: format!("not finite ({v})"),
                })
            }
        }
        finite("human.position.x", self.human.position.x)?;
        finite("human.position.y", self.human.position.y)?;
        finite("human.velocity.x", self.human.velocity.x)?;
        finite("human.velocity.y", self.human.velocity.y)?;
        finite("robot.position.x", self.robot.position.x)?;
        finite("robot.position.y", self.robot.position.y)?;
        finite("robot.heading", self.robot.heading)?;
        finite("robot.speed", self.robot.speed)?;
        if self.robot.speed < 0.0 {
            return Err(SafetyError::InvalidState {
                field: "robot.speed".into(),
                reason: format!("negative ({})", self.robot.speed),
            });
        }
        if self.robot.heading.abs() > std::f64::consts::PI {
            return Err(SafetyError::InvalidState {
                field: "robot.heading".into(),
                reason: format!("outside [-pi, pi] ({})", self.robot.heading),
            });
        }
        for (id, v) in &self.env.visibility {
            if !(0.0..=1.0).contains(v) {
                return Err(SafetyError::InvalidState {
                    field: format!("env.visibility.{id}"),
                    reason: format!("outside [0, 1] ({v})"),
                });
            }
        }
        for (i, o) in self.env.occluders.iter().enumerate() {
            finite(&format!("env.occluders[{i}].center.x"), o.center.x)?;
            finite(&format!("env.occluders[{i}].center.y"), o.center.y)?;
            if self.env.occluders[..i]
                .iter()
                .any(|p| p.occluder_id == o.occluder_id)
            {
                return Err(SafetyError::InvalidState {
                    field: format!("env.occluders[{i}].occluder_id"),
                    reason: format!("duplicate id {:?}", o.occluder_id),
                });
            }
        }
        Ok(())
    }
}

/// One fired rule together with the numbers that made it fire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActiveConstraint {
    pub id: ConstraintId,
    /// Meters for proximity, confidence for visibility, 1.0 for the
    /// guidance zone.
    pub measured: f64,
    pub threshold: f64,
    /// `measured - threshold`; negative for an active proximity or
    /// visibility constraint.
    pub margin: f64,
    /// Implicated entities: the worker, plus blocking occluders for
    /// visibility.
    pub subjects: Vec<String>,
}

/// One step of the decision trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionRecord {
    pub tick: u64,
    pub state: SafetyState,
    pub nominal: Behavior,
    pub selected: Behavior,
    /// Sorted by constraint id.
    pub active: Vec<ActiveConstraint>,
}

impl DecisionRecord {
    pub fn params(&self) -> &SafetyParams {
        &self.state.params
    }

    pub fn constraint(&self, id: ConstraintId) -> Option<&ActiveConstraint> {
        self.active.iter().find(|c| c.id == id)
    }
}
