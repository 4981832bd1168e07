//! Controlled query language for dialogue turns.
//!
//! ```text
//! query    := (why | whynot | whatif | confirm | command) [at]
//! why      := "why" ["stop" | "pause" | "slow" | "follow"]
//! whynot   := ("whynot" | "why" "not") behavior
//! whatif   := ("whatif" | "what" "if") delta {"and" delta}
//! delta    := "worker" ("to" point | "by" vector | "back" number | "distance" number)
//!           | "remove" (ident | "it")
//!           | "move" (ident | "it") "by" vector
//!           | "guide" ("left" | "right")
//!           | "visibility" number
//! confirm  := "was" "it" [ident | "it"]
//! command  := "do" "it" | "follow" | "resume"
//! at       := "at" integer
//! behavior := "continue" | "slowdown" | "stop" | "pause" | "manual"
//! point    := number [","] number | "(" number "," number ")"
//! ```
//!
//! Keywords are case-insensitive; identifiers keep their case. A trailing
//! `?` is ignored.

mod lexer;
mod parser;
mod wire;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::safety::{Behavior, ConstraintId, Side};

pub use parser::{parse, ParseError, GRAMMAR_HELP};
pub use wire::{parse_structured, to_structured, WireError};

/// Entity reference: a concrete id or the anaphor "it", which the
/// explanation engine resolves from dialogue memory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Referent {
    Entity(String),
    It,
}

impl fmt::Display for Referent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Referent::Entity(id) => f.write_str(id),
            Referent::It => f.write_str("it"),
        }
    }
}

/// A hypothetical modification of the safety state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum StateDelta {
    SetWorkerPosition { to: Vec2 },
    MoveWorkerBy { by: Vec2 },
    /// Step away from the robot along the robot-to-worker bearing.
    MoveWorkerAway { meters: f64 },
    /// Place the worker at this separation along the current bearing.
    SetWorkerDistance { meters: f64 },
    RemoveOccluder { id: Referent },
    MoveOccluderBy { id: Referent, by: Vec2 },
    EnterGuidanceZone { side: Side },
    /// Diagnostic override of the recorded confidence.
    SetVisibility { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Query {
    Why { target: Option<ConstraintId> },
    WhyNot { alternative: Behavior },
    WhatIf { deltas: Vec<StateDelta> },
    Confirm { referent: Referent },
    /// `None` is "do it": the behavior from the last what-if verdict.
    Command { behavior: Option<Behavior> },
}

/// A parsed turn plus the tick it asks about (latest when absent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryAst {
    pub query: Query,
    pub at: Option<i64>,
}

impl QueryAst {
    pub fn new(query: Query) -> Self {
        Self { query, at: None }
    }

    pub fn at(mut self, tick: i64) -> Self {
        self.at = Some(tick);
        self
    }
}

/// Grammar keyword for a behavior.
pub fn behavior_word(b: Behavior) -> &'static str {
    match b {
        Behavior::Continue => "continue",
        Behavior::SlowDown => "slowdown",
        Behavior::Stop => "stop",
        Behavior::Pause => "pause",
        Behavior::ManualFollow => "manual",
    }
}

fn write_pair(f: &mut fmt::Formatter<'_>, v: Vec2) -> fmt::Result {
    write!(f, "{},{}", v.x, v.y)
}

impl fmt::Display for StateDelta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateDelta::SetWorkerPosition { to } => {
                f.write_str("worker to ")?;
                write_pair(f, *to)
            }
            StateDelta::MoveWorkerBy { by } => {
                f.write_str("worker by ")?;
                write_pair(f, *by)
            }
            StateDelta::MoveWorkerAway { meters } => write!(f, "worker back {meters}"),
            StateDelta::SetWorkerDistance { meters } => write!(f, "worker distance {meters}"),
            StateDelta::RemoveOccluder { id } => write!(f, "remove {id}"),
            StateDelta::MoveOccluderBy { id, by } => {
                write!(f, "move {id} by ")?;
                write_pair(f, *by)
            }
            StateDelta::EnterGuidanceZone { side } => write!(f, "guide {side}"),
            StateDelta::SetVisibility { value } => write!(f, "visibility {value}"),
        }
    }
}

/// Canonical text form; `parse` inverts it.
impl fmt::Display for QueryAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.query {
            Query::Why { target } => {
                f.write_str("why")?;
                match target {
                    None => {}
                    Some(ConstraintId::Proximity) => f.write_str(" stop")?,
                    Some(ConstraintId::Visibility) => f.write_str(" pause")?,
                    Some(ConstraintId::GuidanceZone) => f.write_str(" follow")?,
                }
            }
            Query::WhyNot { alternative } => write!(f, "why not {}", behavior_word(*alternative))?,
            Query::WhatIf { deltas } => {
                f.write_str("what if ")?;
                for (i, d) in deltas.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" and ")?;
                    }
                    write!(f, "{d}")?;
                }
            }
            Query::Confirm { referent } => write!(f, "was it {referent}")?,
            Query::Command { behavior } => f.write_str(match behavior {
                None => "do it",
                Some(Behavior::Continue) => "resume",
                Some(_) => "follow",
            })?,
        }
        if let Some(t) = self.at {
            write!(f, " at {t}")?;
        }
        Ok(())
    }
}
