//! One interactive run: world, controller, trace and dialogue memory.
//!
//! Ticks, questions and commands are methods taking `&mut self`, so a
//! session processes them strictly one at a time in call order.
//!
//! Resume semantics: a pause ends by itself once its constraint clears. A
//! stop is held (the controller is given `Stop` as the nominal action) until
//! the task issues a fresh nominal action or a continue or manual-follow
//! command is accepted.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::explain::{
    command_decision, command_explanation, explain, resolve_command, resolve_record, DialogueMemory,
    ExplainError, Explanation,
};
use crate::query::{parse, parse_structured, ParseError, QueryAst, WireError};
use crate::safety::{make_decision, Behavior, DecisionRecord, SafetyError};
use crate::sim::{step, Scenario, SimError, WorldState};
use crate::trace::{Trace, TraceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Idle,
    Running,
    PausedByUser,
    Finished,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Wire(#[from] WireError),
    #[error("{0}")]
    Explain(#[from] ExplainError),
    #[error("{0}")]
    Safety(#[from] SafetyError),
    #[error("{0}")]
    Trace(#[from] TraceError),
    #[error("scenario finished at tick {horizon}")]
    Finished { horizon: u64 },
    #[error("session is paused by the user")]
    PausedByUser,
}

/// What a command did: the record it appended and the answer to the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandOutcome {
    pub accepted: bool,
    pub record: DecisionRecord,
    pub explanation: Explanation,
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    scenario: Arc<Scenario>,
    world: WorldState,
    trace: Trace,
    memory: DialogueMemory,
    status: RunStatus,
    /// Tick of the stop being held, if any.
    stop_held_at: Option<u64>,
}

impl Session {
    pub fn new(id: impl Into<String>, scenario: Arc<Scenario>) -> Self {
        let id = id.into();
        Self {
            world: WorldState::new(&scenario),
            trace: Trace::new(id.clone(), scenario.params.clone()),
            memory: DialogueMemory::new(id.clone()),
            id,
            scenario,
            status: RunStatus::Idle,
            stop_held_at: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn memory(&self) -> &DialogueMemory {
        &self.memory
    }

    pub fn status(&self) -> RunStatus {
        self.status
    }

    /// Whether a stop is currently being held.
    pub fn stop_held(&self) -> bool {
        self.stop_held_at.is_some()
    }

    /// Marks the session as auto-running or paused by the user. A finished
    /// session stays finished.
    pub fn set_status(&mut self, status: RunStatus) {
        if self.status != RunStatus::Finished {
            self.status = status;
        }
    }

    fn finish(&mut self) -> SessionError {
        self.status = RunStatus::Finished;
        SessionError::Finished {
            horizon: self.scenario.horizon,
        }
    }

    fn advance(&mut self) -> Result<crate::safety::SafetyState, SessionError> {
        match self.status {
            RunStatus::Finished => {
                return Err(SessionError::Finished {
                    horizon: self.scenario.horizon,
                })
            }
            RunStatus::PausedByUser => return Err(SessionError::PausedByUser),
            _ => {}
        }
        step(&mut self.world, &self.scenario).map_err(|SimError::EndOfScenario { .. }| self.finish())
    }

    fn commit(&mut self, record: &DecisionRecord) -> Result<(), SessionError> {
        self.world.set_mode(record.selected);
        if record.selected == Behavior::Stop {
            self.stop_held_at = Some(record.tick);
        }
        self.trace.append(record.clone())?;
        if self.world.tick() >= self.scenario.horizon {
            self.status = RunStatus::Finished;
        }
        Ok(())
    }

    /// Runs one control tick. `Ok(None)` once the scenario has finished.
    pub fn tick(&mut self) -> Result<Option<DecisionRecord>, SessionError> {
        let state = match self.advance() {
            Ok(s) => s,
            Err(SessionError::Finished { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        if let Some(at) = self.stop_held_at {
            if self.world.nominal_changed_at() > at {
                self.stop_held_at = None;
            }
        }
        let nominal = if self.stop_held_at.is_some() {
            Behavior::Stop
        } else {
            self.world.nominal()
        };
        let record = make_decision(&state, nominal)?;
        self.commit(&record)?;
        Ok(Some(record))
    }

    /// Runs up to `n` ticks, stopping early at the horizon.
    pub fn run(&mut self, n: u64) -> Result<Vec<DecisionRecord>, SessionError> {
        let mut out = Vec::new();
        for _ in 0..n {
            match self.tick()? {
                Some(r) => out.push(r),
                None => break,
            }
        }
        Ok(out)
    }

    /// Answers a question about the trace. Never advances the world or
    /// touches the trace; commands are only previewed.
    pub fn ask(&mut self, query: &QueryAst) -> Result<Explanation, SessionError> {
        let record = resolve_record(&self.trace, query.at)?;
        let (e, memory) = explain(record, query, &self.memory)?;
        self.memory = memory;
        Ok(e)
    }

    pub fn ask_text(&mut self, text: &str) -> Result<Explanation, SessionError> {
        let query = parse(text)?;
        self.ask(&query)
    }

    pub fn ask_structured(&mut self, value: &serde_json::Value) -> Result<Explanation, SessionError> {
        let query = parse_structured(value)?;
        self.ask(&query)
    }

    /// Executes a command. It takes one control tick: the world steps, the
    /// controller arbitrates with the commanded behavior as both the robot
    /// mode and the nominal action, and the decision is recorded whether
    /// or not the command is accepted. `None` means the behavior offered by
    /// the last what-if.
    pub fn command(&mut self, behavior: Option<Behavior>) -> Result<CommandOutcome, SessionError> {
        let behavior = resolve_command(behavior, &self.memory)?;
        if !matches!(behavior, Behavior::Continue | Behavior::ManualFollow) {
            return Err(ExplainError::NotCommandable { behavior }.into());
        }
        let state = self.advance()?;
        let record = command_decision(&state, behavior)?;
        let accepted = record.selected == behavior;
        if accepted {
            self.stop_held_at = None;
        }
        self.commit(&record)?;
        let explanation = command_explanation(&record, behavior, false)?;
        self.memory.turn_count += 1;
        Ok(CommandOutcome {
            accepted,
            record,
            explanation,
        })
    }
}
