use crate::geometry::Vec2;
use crate::query::{Referent, StateDelta};
use crate::safety::{
    evaluate_constraints, select_for_state, ActiveConstraint, Behavior, DecisionRecord, SafetyState, Side,
};
use crate::visibility::{attribute_occlusion, compute_visibility};

use super::ExplainError;

/// Step grid for the "move away" suggestion template, meters.
pub const AWAY_STEP: f64 = 0.5;
pub const AWAY_MAX: f64 = 5.0;

fn places_worker(d: &StateDelta) -> bool {
    matches!(
        d,
        StateDelta::SetWorkerPosition { .. }
            | StateDelta::SetWorkerDistance { .. }
            | StateDelta::EnterGuidanceZone { .. }
    )
}

fn moves_worker(d: &StateDelta) -> bool {
    places_worker(d) || matches!(d, StateDelta::MoveWorkerBy { .. } | StateDelta::MoveWorkerAway { .. })
}

fn occluder_id(r: &Referent) -> Result<&str, ExplainError> {
    match r {
        Referent::Entity(id) => Ok(id),
        Referent::It => Err(ExplainError::UnresolvedReferent),
    }
}

fn conflict(deltas: &[StateDelta]) -> Option<(usize, usize, &'static str)> {
    let check = |pred: fn(&StateDelta) -> bool, why| {
        let mut hits = deltas.iter().enumerate().filter(|(_, d)| pred(d)).map(|(i, _)| i);
        match (hits.next(), hits.next()) {
            (Some(a), Some(b)) => Some((a, b, why)),
            _ => None,
        }
    };
    check(places_worker, "both place the worker").or_else(|| {
        check(
            |d| matches!(d, StateDelta::SetVisibility { .. }),
            "both override visibility",
        )
    })
}

/// Builds the hypothetical state for `deltas`, applied in order.
///
/// Positions change exactly as stated; visibility is recomputed from the new
/// geometry unless a `SetVisibility` override is present. The parameter set
/// is shared with the source state and never touched.
pub fn apply_delta(state: &SafetyState, deltas: &[StateDelta]) -> Result<SafetyState, ExplainError> {
    if let Some((first, second, reason)) = conflict(deltas) {
        return Err(ExplainError::ConflictingDeltas { first, second, reason });
    }
    let mut s = state.clone();
    let mut geometry_changed = false;
    let mut override_v = None;
    for d in deltas {
        let robot = s.robot.position;
        let bearing = bearing(&s);
        match d {
            StateDelta::SetWorkerPosition { to } => s.human.position = *to,
            StateDelta::MoveWorkerBy { by } => s.human.position = s.human.position + *by,
            StateDelta::MoveWorkerAway { meters } => s.human.position = s.human.position + bearing * *meters,
            StateDelta::SetWorkerDistance { meters } => s.human.position = robot + bearing * *meters,
            StateDelta::RemoveOccluder { id } => {
                let id = occluder_id(id)?;
                let before = s.env.occluders.len();
                s.env.occluders.retain(|o| o.occluder_id != id);
                if s.env.occluders.len() == before {
                    return Err(ExplainError::UnknownOccluder { id: id.to_string() });
                }
            }
            StateDelta::MoveOccluderBy { id, by } => {
                let id = occluder_id(id)?;
                let o = s
                    .env
                    .occluders
                    .iter_mut()
                    .find(|o| o.occluder_id == id)
                    .ok_or_else(|| ExplainError::UnknownOccluder { id: id.to_string() })?;
                o.center = o.center + *by;
            }
            StateDelta::EnterGuidanceZone { side } => {
                let reach = s.params.guidance_zone().max_distance;
                s.human.position = robot + s.robot.side_dir(*side) * reach;
                s.robot.mode = Behavior::ManualFollow;
            }
            StateDelta::SetVisibility { value } => override_v = Some(*value),
        }
        geometry_changed |= !matches!(d, StateDelta::SetVisibility { .. });
    }
    let worker = s.human.worker_id.clone();
    if let Some(v) = override_v {
        s.env.visibility.insert(worker, v);
    } else if geometry_changed {
        let v = compute_visibility(&s.robot, &s.human, &s.env.occluders);
        s.env.visibility.insert(worker, v);
    }
    s.validate().map_err(ExplainError::InvalidState)?;
    Ok(s)
}

/// Result of re-running the controller on a hypothetical state.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub state: SafetyState,
    pub active: Vec<ActiveConstraint>,
    pub behavior: Behavior,
}

/// Applies `deltas` to the record's state and re-evaluates under the same
/// parameters and nominal action. Placing the worker in the guidance zone
/// also requests manual-follow.
pub fn evaluate_what_if(record: &DecisionRecord, deltas: &[StateDelta]) -> Result<Hypothesis, ExplainError> {
    let state = apply_delta(&record.state, deltas)?;
    let active = evaluate_constraints(&state).map_err(ExplainError::InvalidState)?;
    let behavior = select_for_state(&state, &active, record.nominal);
    Ok(Hypothesis { state, active, behavior })
}

/// Candidate enabling conditions in the order they are tried: stepping back
/// in `AWAY_STEP` increments up to `AWAY_MAX`, guiding from the left then the
/// right, removing each occluder that blocks the worker (most rays first),
/// then every pair of those that does not move the worker twice.
pub fn suggestion_templates(record: &DecisionRecord) -> Vec<Vec<StateDelta>> {
    let steps = (AWAY_MAX / AWAY_STEP).round() as usize;
    let mut singles: Vec<StateDelta> = (1..=steps)
        .map(|k| StateDelta::MoveWorkerAway {
            meters: k as f64 * AWAY_STEP,
        })
        .collect();
    singles.push(StateDelta::EnterGuidanceZone { side: Side::Left });
    singles.push(StateDelta::EnterGuidanceZone { side: Side::Right });
    let s = &record.state;
    singles.extend(
        attribute_occlusion(&s.robot, &s.human, &s.env.occluders)
            .into_iter()
            .map(|a| StateDelta::RemoveOccluder {
                id: Referent::Entity(a.occluder_id),
            }),
    );
    let mut out: Vec<Vec<StateDelta>> = singles.iter().map(|d| vec![d.clone()]).collect();
    for (i, a) in singles.iter().enumerate() {
        for b in &singles[i + 1..] {
            if moves_worker(a) && moves_worker(b) {
                continue;
            }
            out.push(vec![a.clone(), b.clone()]);
        }
    }
    out
}

/// First template whose what-if yields `target`; `None` if `target` is
/// already selected or no template reaches it.
pub fn suggest_enabling_condition(record: &DecisionRecord, target: Behavior) -> Option<Vec<StateDelta>> {
    if record.selected == target {
        return None;
    }
    suggestion_templates(record)
        .into_iter()
        .find(|deltas| matches!(evaluate_what_if(record, deltas), Ok(h) if h.behavior == target))
}

/// Unit bearing from the robot to the worker.
pub fn bearing(state: &SafetyState) -> Vec2 {
    (state.human.position - state.robot.position)
        .normalized()
        .unwrap_or_else(|| state.robot.heading_dir())
}
