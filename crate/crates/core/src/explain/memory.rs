use serde::{Deserialize, Serialize};

use crate::query::StateDelta;
use crate::safety::{Behavior, ConstraintId};

/// Entities remembered for anaphora.
pub const SALIENT_CAPACITY: usize = 8;

/// The last what-if and what it concluded, for "do it".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfMemo {
    pub deltas: Vec<StateDelta>,
    pub verdict: Behavior,
}

/// Shared context of one conversation. Only referent resolution and
/// phrasing read it; verdicts and citations never do.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueMemory {
    pub session_id: String,
    /// Most recent first.
    pub salient_entities: Vec<String>,
    pub last_constraint: Option<ConstraintId>,
    pub last_whatif: Option<WhatIfMemo>,
    pub turn_count: u64,
}

impl DialogueMemory {
    pub fn new(session_id: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            salient_entities: Vec::new(),
            last_constraint: None,
            last_whatif: None,
            turn_count: 0,
        }
    }

    /// Moves `id` to the front, evicting the least recent past capacity.
    pub fn touch(&mut self, id: &str) {
        self.salient_entities.retain(|e| e != id);
        self.salient_entities.insert(0, id.to_string());
        self.salient_entities.truncate(SALIENT_CAPACITY);
    }

    /// Touches `ids` so that the first ends up most recent.
    pub fn touch_all<'a>(&mut self, ids: impl DoubleEndedIterator<Item = &'a String>) {
        for id in ids.rev() {
            self.touch(id);
        }
    }

    pub fn is_salient(&self, id: &str) -> bool {
        self.salient_entities.iter().any(|e| e == id)
    }

    /// Most recent salient entity accepted by `filter`.
    pub fn resolve(&self, filter: impl Fn(&str) -> bool) -> Option<&str> {
        self.salient_entities
            .iter()
            .map(String::as_str)
            .find(|e| filter(e))
    }
}
