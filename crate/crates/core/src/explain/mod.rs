//! Answers dialogue turns from recorded decisions.
//!
//! Every answer is computed from a [`DecisionRecord`] and the parameter set
//! it carries. What-if answers re-run the same constraint evaluation and
//! arbitration on a hypothetical copy of the recorded state; nothing here
//! mutates a record, a trace or the parameters.
//!
//! `Why` cites the binding constraint first and every other active
//! constraint after it.

mod counterfactual;
mod memory;
pub mod render;

use serde::{Deserialize, Serialize};

use crate::query::{Query, QueryAst, Referent, StateDelta};
use crate::safety::{
    binding_constraint, evaluate_constraints, make_decision, select_behavior, separation, ActiveConstraint,
    Behavior, ConstraintId, DecisionRecord, SafetyError, SafetyState,
};
use crate::trace::Trace;
use crate::visibility::{attribute_occlusion, RAY_COUNT};

pub use counterfactual::{
    apply_delta, evaluate_what_if, suggest_enabling_condition, suggestion_templates, Hypothesis, AWAY_MAX,
    AWAY_STEP,
};
pub use memory::{DialogueMemory, WhatIfMemo, SALIENT_CAPACITY};

use render::{
    blocking_clause, causal_primary, comparison, delta_condition, delta_offer, gerund, infinitive, join_and,
    mention, num, refusal_clause, short_clause, zone_phrase, zone_unmet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplanationKind {
    Causal,
    Contrastive,
    Counterfactual,
    Confirmation,
    CommandAck,
    Refusal,
}

/// Behavior the controller selects together with the constraints behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub behavior: Behavior,
    pub active: Vec<ActiveConstraint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub kind: ExplanationKind,
    /// Tick of the record the answer is about.
    pub tick: u64,
    pub cited: Vec<ActiveConstraint>,
    /// Occluders blamed for lost visibility, most rays first.
    pub attribution: Vec<String>,
    pub verdict: Option<Verdict>,
    /// Offered state change that would enable the blocked behavior.
    pub enabling_condition: Vec<StateDelta>,
    pub text: String,
    /// Yes/no answer of a confirmation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affirmative: Option<bool>,
    /// Set when a visibility override replaced the geometric estimate.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub diagnostic: bool,
    /// Command answers produced by `ask`, which never executes them.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub preview: bool,
}

impl Explanation {
    fn new(kind: ExplanationKind, tick: u64, text: String) -> Self {
        Self {
            kind,
            tick,
            cited: Vec::new(),
            attribution: Vec::new(),
            verdict: None,
            enabling_condition: Vec::new(),
            text,
            affirmative: None,
            diagnostic: false,
            preview: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExplainError {
    #[error("{}", unknown_tick(*.tick, .nearest))]
    UnknownTick { tick: Option<i64>, nearest: Vec<u64> },
    #[error("nothing is salient enough to resolve `it`; name the entity instead")]
    UnresolvedReferent,
    #[error("unknown occluder `{id}`")]
    UnknownOccluder { id: String },
    #[error("deltas {first} and {second} conflict: {reason}")]
    ConflictingDeltas {
        first: usize,
        second: usize,
        reason: &'static str,
    },
    #[error("nothing to do: no what-if has offered continue or manual-follow yet")]
    NothingToDo,
    #[error("`{behavior}` cannot be commanded; only continue and manual_follow can")]
    NotCommandable { behavior: Behavior },
    #[error("hypothetical state is invalid: {0}")]
    InvalidState(SafetyError),
}

fn unknown_tick(tick: Option<i64>, nearest: &[u64]) -> String {
    match tick {
        None => "no decision has been recorded yet".into(),
        Some(t) if nearest.is_empty() => format!("no record at tick {t}; the trace is empty"),
        Some(t) => format!(
            "no record at tick {t}; nearest recorded ticks: {}",
            nearest.iter().map(u64::to_string).collect::<Vec<_>>().join(", ")
        ),
    }
}

/// Record a query refers to: its `at` tick, or the latest.
pub fn resolve_record(trace: &Trace, at: Option<i64>) -> Result<&DecisionRecord, ExplainError> {
    match at {
        None => trace.latest().ok_or(ExplainError::UnknownTick {
            tick: None,
            nearest: Vec::new(),
        }),
        Some(t) => u64::try_from(t)
            .ok()
            .and_then(|t| trace.get_at(t))
            .ok_or_else(|| ExplainError::UnknownTick {
                tick: Some(t),
                nearest: trace.nearest_ticks(t),
            }),
    }
}

/// Occluders named by the record's visibility constraint.
fn visibility_attribution(active: &[ActiveConstraint], worker: &str) -> Vec<String> {
    active
        .iter()
        .filter(|c| c.id == ConstraintId::Visibility)
        .flat_map(|c| c.subjects.iter().filter(|s| *s != worker).cloned())
        .collect()
}

fn unmet_zone(state: &SafetyState) -> ActiveConstraint {
    ActiveConstraint {
        id: ConstraintId::GuidanceZone,
        measured: 0.0,
        threshold: 1.0,
        margin: -1.0,
        subjects: vec![state.human.worker_id.clone()],
    }
}

/// Causal answer: the binding constraint, then the rest of the active set.
pub fn answer_why(record: &DecisionRecord, target: Option<ConstraintId>) -> Explanation {
    let params = record.params();
    let binding = record.binding().cloned();
    let mut cited: Vec<ActiveConstraint> = binding.iter().cloned().collect();
    cited.extend(
        record
            .active
            .iter()
            .filter(|c| Some(c.id) != binding.as_ref().map(|b| b.id))
            .cloned(),
    );
    let attribution = visibility_attribution(&record.active, &record.state.human.worker_id);

    let mut text = String::new();
    if let Some(t) = target {
        if t.mapped_behavior() != record.selected {
            text.push_str(&format!("I did not {}. ", infinitive(t.mapped_behavior())));
        }
    }
    let secondary = match &binding {
        Some(b) => {
            let attr: &[String] = if b.id == ConstraintId::Visibility { &attribution } else { &[] };
            text.push_str(&causal_primary(b, attr, params));
            &cited[1..]
        }
        None => {
            let label = record.nominal.label();
            text.push_str(&if record.selected != record.nominal {
                format!("I paused because manual-follow requires that you are {}.", zone_phrase(params))
            } else if record.nominal == Behavior::Stop {
                "No safety constraint is active now; I am holding the earlier stop until you tell me to resume."
                    .to_string()
            } else if record.active.is_empty() {
                format!("No safety constraint is active, so I am executing the nominal action ({label}).")
            } else {
                format!("No safety constraint overrides the nominal action ({label}).")
            });
            &cited[..]
        }
    };
    if !secondary.is_empty() {
        let clauses: Vec<String> = secondary.iter().map(|c| short_clause(c, params)).collect();
        text.push_str(&format!(" Also active: {}.", clauses.join("; ")));
    }

    let mut e = Explanation::new(ExplanationKind::Causal, record.tick, text);
    e.cited = cited;
    e.attribution = attribution;
    e.verdict = Some(Verdict {
        behavior: record.selected,
        active: record.active.clone(),
    });
    e
}

/// Constraints that keep `alternative` from being selected in `state` when
/// it is requested, in priority order, plus an unmet guidance zone for
/// manual-follow. Empty iff the alternative is admissible.
fn blockers(state: &SafetyState, alternative: Behavior) -> Result<(Vec<ActiveConstraint>, Vec<ActiveConstraint>), ExplainError> {
    let mut s = state.clone();
    s.robot.mode = alternative;
    let active = evaluate_constraints(&s).map_err(ExplainError::InvalidState)?;
    let engaged = alternative == Behavior::ManualFollow;
    if select_behavior(&active, alternative, &s.params, engaged) == alternative {
        return Ok((Vec::new(), active));
    }
    let mut out = Vec::new();
    if engaged && !active.iter().any(|c| c.id == ConstraintId::GuidanceZone) {
        out.push(unmet_zone(state));
    }
    let mut outranking: Vec<ActiveConstraint> = active
        .iter()
        .filter(|c| (c.id != ConstraintId::GuidanceZone || engaged) && c.id.mapped_behavior() != alternative)
        .cloned()
        .collect();
    outranking.sort_by_key(|c| s.params.rank(c.id));
    out.extend(outranking);
    Ok((out, active))
}

/// Contrastive answer: is `alternative` ruled out by safety, and by what.
///
/// The alternative is admissible iff arbitration would select it when it is
/// the requested action, the same test a command goes through.
pub fn answer_why_not(record: &DecisionRecord, alternative: Behavior) -> Result<Explanation, ExplainError> {
    let params = record.params();
    let verdict = Some(Verdict {
        behavior: record.selected,
        active: record.active.clone(),
    });
    if alternative == record.selected {
        let mut e = Explanation::new(
            ExplanationKind::Confirmation,
            record.tick,
            format!("I am already {}.", gerund(alternative)),
        );
        e.affirmative = Some(true);
        e.verdict = verdict;
        return Ok(e);
    }
    let (cited, _) = blockers(&record.state, alternative)?;
    let text = if cited.is_empty() {
        let reason = if record.nominal == Behavior::Stop && record.binding().is_none() {
            "I am holding the earlier stop until you tell me to resume".to_string()
        } else {
            format!("the task plan chose to {} instead", infinitive(record.selected))
        };
        format!("Nothing in my safety envelope rules out {}; {reason}.", gerund_of_request(alternative))
    } else {
        let clauses: Vec<String> = cited.iter().map(|c| blocking_clause(c, params)).collect();
        format!("I cannot {}: {}.", infinitive(alternative), clauses.join("; "))
    };
    let mut e = Explanation::new(ExplanationKind::Contrastive, record.tick, text);
    e.attribution = if cited.iter().any(|c| c.id == ConstraintId::Visibility) {
        visibility_attribution(&cited, &record.state.human.worker_id)
    } else {
        Vec::new()
    };
    e.cited = cited;
    e.verdict = verdict;
    Ok(e)
}

fn gerund_of_request(b: Behavior) -> &'static str {
    match b {
        Behavior::Continue => "continuing",
        Behavior::SlowDown => "slowing down",
        Behavior::Pause => "pausing",
        Behavior::Stop => "stopping",
        Behavior::ManualFollow => "switching to manual-follow",
    }
}

/// Behavior an enabling condition should unlock when a what-if stays
/// halted: manual-follow when the user offered guidance, else the task's
/// own action unless a stop is being held.
fn suggestion_target(record: &DecisionRecord, deltas: &[StateDelta]) -> Option<Behavior> {
    if deltas.iter().any(|d| matches!(d, StateDelta::EnterGuidanceZone { .. })) {
        Some(Behavior::ManualFollow)
    } else if !record.nominal.is_halt() {
        Some(record.nominal)
    } else {
        None
    }
}

/// Counterfactual answer for already-resolved deltas.
pub fn answer_what_if(record: &DecisionRecord, deltas: &[StateDelta]) -> Result<Explanation, ExplainError> {
    let params = record.params();
    let h = evaluate_what_if(record, deltas)?;
    let engaged = h.state.robot.mode == Behavior::ManualFollow;
    let binding = binding_constraint(&h.active, record.nominal, params, engaged).cloned();

    let cond = join_and(&deltas.iter().map(|d| delta_condition(d, params)).collect::<Vec<_>>());
    let moved = deltas.iter().any(|d| {
        matches!(
            d,
            StateDelta::SetWorkerPosition { .. }
                | StateDelta::MoveWorkerBy { .. }
                | StateDelta::MoveWorkerAway { .. }
                | StateDelta::SetWorkerDistance { .. }
        )
    });
    let occluded = deltas.iter().any(|d| {
        matches!(
            d,
            StateDelta::RemoveOccluder { .. } | StateDelta::MoveOccluderBy { .. } | StateDelta::SetVisibility { .. }
        )
    });
    let had = |id| record.constraint(id).is_some() || h.active.iter().any(|c| c.id == id);
    let following = engaged && h.active.iter().any(|c| c.id == ConstraintId::GuidanceZone);
    let mut conseq = Vec::new();
    if !following && (moved || had(ConstraintId::Proximity)) {
        let d = separation(&h.state);
        conseq.push(format!(
            "distance becomes {} m {} {} m",
            num(d),
            comparison(d, params.d_min()),
            num(params.d_min())
        ));
    }
    if occluded || had(ConstraintId::Visibility) {
        let v = h.state.worker_visibility();
        conseq.push(format!(
            "visibility becomes {} {} {}",
            num(v),
            comparison(v, params.v_min()),
            num(params.v_min())
        ));
    }
    let conseq = conseq.join(" and ");

    let mut text = if h.behavior.is_halt() {
        let reason = match &binding {
            Some(b) => blocking_clause(b, params),
            None if h.behavior == Behavior::Pause => zone_unmet(params),
            None => "I hold the earlier stop until you tell me to resume".into(),
        };
        let still = if h.behavior == record.selected { "still " } else { "" };
        let outcome = format!("I would {still}{} because {reason}", infinitive(h.behavior));
        if conseq.is_empty() {
            format!("If {cond}, {outcome}.")
        } else {
            format!("If {cond}, {conseq}, but {outcome}.")
        }
    } else {
        let outcome = format!("I can {}", infinitive(h.behavior));
        if conseq.is_empty() {
            format!("If {cond}, {outcome}.")
        } else {
            format!("If {cond}, {conseq} and {outcome}.")
        }
    };

    let mut enabling = Vec::new();
    if h.behavior.is_halt() {
        if let Some(target) = suggestion_target(record, deltas) {
            if let Some(s) = suggest_enabling_condition(record, target) {
                let offers: Vec<String> = s.iter().map(|d| delta_offer(d, params)).collect();
                text.push_str(&format!(" If you {}, I can {}.", join_and(&offers), infinitive(target)));
                enabling = s;
            }
        }
    }

    let mut e = Explanation::new(ExplanationKind::Counterfactual, record.tick, text);
    e.attribution = visibility_attribution(&h.active, &h.state.human.worker_id);
    e.cited = binding.into_iter().collect();
    e.verdict = Some(Verdict {
        behavior: h.behavior,
        active: h.active,
    });
    e.enabling_condition = enabling;
    e.diagnostic = deltas.iter().any(|d| matches!(d, StateDelta::SetVisibility { .. }));
    Ok(e)
}

/// Yes/no answer to "was it X": whether X is implicated by any active
/// constraint of the record.
pub fn answer_confirm(record: &DecisionRecord, entity: &str, memory: &DialogueMemory) -> Explanation {
    let params = record.params();
    let state = &record.state;
    let cited: Vec<ActiveConstraint> = record
        .active
        .iter()
        .filter(|c| c.subjects.iter().any(|s| s == entity))
        .cloned()
        .collect();
    let occluder = state.env.occluder(entity);
    let who = mention(entity, memory, true);
    let is_worker = state.human.worker_id == entity;
    let mut attribution = Vec::new();
    let text = if cited.is_empty() {
        if occluder.is_some() || is_worker {
            format!("No. {who} did not trigger any constraint at tick {}.", record.tick)
        } else {
            format!("No. I have no record of {entity} at tick {}.", record.tick)
        }
    } else if let (Some(_), Some(vis)) = (occluder, record.constraint(ConstraintId::Visibility)) {
        let rays = attribute_occlusion(&state.robot, &state.human, &state.env.occluders)
            .into_iter()
            .find(|a| a.occluder_id == entity)
            .map_or(0, |a| a.blocked_rays);
        attribution.push(entity.to_string());
        format!(
            "Yes. {who} obstructed my field of view, blocking {rays} of {RAY_COUNT} sight rays (visibility {} < {}).",
            num(vis.measured),
            num(vis.threshold)
        )
    } else {
        let clauses: Vec<String> = cited.iter().map(|c| short_clause(c, params)).collect();
        format!("Yes. {who} was involved: {}.", clauses.join("; "))
    };
    let mut e = Explanation::new(ExplanationKind::Confirmation, record.tick, text);
    e.affirmative = Some(!cited.is_empty());
    e.cited = cited;
    e.attribution = attribution;
    e.verdict = Some(Verdict {
        behavior: record.selected,
        active: record.active.clone(),
    });
    e
}

/// Decision for a commanded behavior in `state`: the robot is put in the
/// commanded mode, the command is the nominal action, and the controller
/// arbitrates as usual. The command is accepted iff it is what gets
/// selected.
pub fn command_decision(state: &SafetyState, behavior: Behavior) -> Result<DecisionRecord, ExplainError> {
    if !matches!(behavior, Behavior::Continue | Behavior::ManualFollow) {
        return Err(ExplainError::NotCommandable { behavior });
    }
    let mut s = state.clone();
    s.robot.mode = behavior;
    make_decision(&s, behavior).map_err(ExplainError::InvalidState)
}

/// Acknowledgment or refusal for a command decision from
/// [`command_decision`].
pub fn command_explanation(record: &DecisionRecord, behavior: Behavior, preview: bool) -> Result<Explanation, ExplainError> {
    let params = record.params();
    let verdict = Some(Verdict {
        behavior: record.selected,
        active: record.active.clone(),
    });
    if record.selected == behavior {
        let text = match (behavior, preview) {
            (Behavior::ManualFollow, false) => "Switching to manual-follow. Please remain within the guidance zone.",
            (Behavior::ManualFollow, true) => "I can switch to manual-follow now.",
            (_, false) => "Resuming the task.",
            (_, true) => "I can resume the task now.",
        };
        let mut e = Explanation::new(ExplanationKind::CommandAck, record.tick, text.into());
        e.cited = record
            .active
            .iter()
            .filter(|c| c.id == ConstraintId::GuidanceZone)
            .cloned()
            .collect();
        e.verdict = verdict;
        e.preview = preview;
        return Ok(e);
    }
    let (mut cited, _) = blockers(&record.state, behavior)?;
    if cited.is_empty() {
        // Arbitration disagreed with the command without a blocker; cite
        // whatever decided instead.
        cited.extend(record.binding().cloned());
    }
    let clauses: Vec<String> = cited.iter().map(|c| refusal_clause(c, params)).collect();
    let mut e = Explanation::new(
        ExplanationKind::Refusal,
        record.tick,
        format!("I cannot {}: {}.", infinitive(behavior), clauses.join(", and ")),
    );
    e.attribution = visibility_attribution(&cited, &record.state.human.worker_id);
    e.cited = cited;
    e.verdict = verdict;
    e.preview = preview;
    Ok(e)
}

fn resolve_occluder(r: &Referent, state: &SafetyState, memory: &DialogueMemory) -> Result<Referent, ExplainError> {
    match r {
        Referent::Entity(id) => Ok(Referent::Entity(id.clone())),
        Referent::It => memory
            .resolve(|e| state.env.occluder(e).is_some())
            .map(|id| Referent::Entity(id.to_string()))
            .ok_or(ExplainError::UnresolvedReferent),
    }
}

/// Replaces every "it" with the most salient occluder of the record.
pub fn resolve_deltas(
    deltas: &[StateDelta],
    state: &SafetyState,
    memory: &DialogueMemory,
) -> Result<Vec<StateDelta>, ExplainError> {
    deltas
        .iter()
        .map(|d| {
            Ok(match d {
                StateDelta::RemoveOccluder { id } => StateDelta::RemoveOccluder {
                    id: resolve_occluder(id, state, memory)?,
                },
                StateDelta::MoveOccluderBy { id, by } => StateDelta::MoveOccluderBy {
                    id: resolve_occluder(id, state, memory)?,
                    by: *by,
                },
                other => other.clone(),
            })
        })
        .collect()
}

/// Behavior "do it" refers to.
pub fn resolve_command(behavior: Option<Behavior>, memory: &DialogueMemory) -> Result<Behavior, ExplainError> {
    match behavior {
        Some(b) => Ok(b),
        None => match &memory.last_whatif {
            Some(m) if matches!(m.verdict, Behavior::Continue | Behavior::ManualFollow) => Ok(m.verdict),
            _ => Err(ExplainError::NothingToDo),
        },
    }
}

/// Ids an answer brings into focus: attributed occluders first, then the
/// other subjects of the cited constraints.
fn focus(e: &Explanation) -> Vec<String> {
    let mut out: Vec<String> = e.attribution.clone();
    for c in &e.cited {
        for s in &c.subjects {
            if !out.contains(s) {
                out.push(s.clone());
            }
        }
    }
    out
}

/// Answers one turn about `record` and returns the updated memory.
///
/// The query's `at` is ignored here; pick the record with
/// [`resolve_record`]. Command turns are answered as a preview and never
/// executed.
pub fn explain(
    record: &DecisionRecord,
    query: &QueryAst,
    memory: &DialogueMemory,
) -> Result<(Explanation, DialogueMemory), ExplainError> {
    let mut next = memory.clone();
    let e = match &query.query {
        Query::Why { target } => answer_why(record, *target),
        Query::WhyNot { alternative } => answer_why_not(record, *alternative)?,
        Query::WhatIf { deltas } => {
            let deltas = resolve_deltas(deltas, &record.state, memory)?;
            let e = answer_what_if(record, &deltas)?;
            next.last_whatif = Some(WhatIfMemo {
                verdict: e.verdict.as_ref().map_or(record.selected, |v| v.behavior),
                deltas: deltas.clone(),
            });
            for d in &deltas {
                if let StateDelta::RemoveOccluder { id: Referent::Entity(id) }
                | StateDelta::MoveOccluderBy {
                    id: Referent::Entity(id),
                    ..
                } = d
                {
                    next.touch(id);
                }
            }
            e
        }
        Query::Confirm { referent } => {
            let entity = match referent {
                Referent::Entity(id) => id.clone(),
                Referent::It => memory
                    .salient_entities
                    .first()
                    .cloned()
                    .ok_or(ExplainError::UnresolvedReferent)?,
            };
            let e = answer_confirm(record, &entity, memory);
            next.touch(&entity);
            e
        }
        Query::Command { behavior } => {
            let b = resolve_command(*behavior, memory)?;
            let decision = command_decision(&record.state, b)?;
            command_explanation(&decision, b, true)?
        }
    };
    if !matches!(query.query, Query::Confirm { .. }) {
        let ids = focus(&e);
        next.touch_all(ids.iter());
    }
    if let Some(c) = e.cited.first() {
        next.last_constraint = Some(c.id);
    }
    next.turn_count += 1;
    Ok((e, next))
}
