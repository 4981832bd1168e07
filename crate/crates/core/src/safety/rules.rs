use crate::geometry::distance;
use crate::visibility::attribute_occlusion;

use super::state::{
    ActiveConstraint, Behavior, ConstraintId, DecisionRecord, SafetyParams, SafetyState, Side,
};
use super::SafetyError;

/// Slack on the inclusive guidance-zone radius so that a worker placed at
/// exactly `max_distance` is inside despite rounding.
pub const ZONE_TOLERANCE: f64 = 1e-9;

/// Robot-to-worker separation in meters.
pub fn separation(state: &SafetyState) -> f64 {
    distance(state.human.position, state.robot.position)
}

/// Whether the worker stands in the guidance half-disc: within
/// `max_distance` of the robot and strictly on the configured side of its
/// heading line.
pub fn in_guidance_zone(state: &SafetyState) -> bool {
    let zone = state.params.guidance_zone();
    let to_worker = state.human.position - state.robot.position;
    if to_worker.norm() > zone.max_distance + ZONE_TOLERANCE {
        return false;
    }
    let side = state.robot.heading_dir().cross(to_worker);
    match zone.side {
        Side::Left => side > 0.0,
        Side::Right => side < 0.0,
    }
}

/// The guiding worker is exempt from the separation rule while the robot is
/// already following them inside the guidance zone.
fn guidance_exempt(state: &SafetyState) -> bool {
    state.robot.mode == Behavior::ManualFollow && in_guidance_zone(state)
}

/// Returns exactly the constraints whose predicates hold on `state`, sorted
/// by constraint id.
pub fn evaluate_constraints(state: &SafetyState) -> Result<Vec<ActiveConstraint>, SafetyError> {
    state.validate()?;
    let params = &state.params;
    let worker = state.human.worker_id.clone();
    let mut active = Vec::new();

    let d = separation(state);
    if d < params.d_min() && !guidance_exempt(state) {
        active.push(ActiveConstraint {
            id: ConstraintId::Proximity,
            measured: d,
            threshold: params.d_min(),
            margin: d - params.d_min(),
            subjects: vec![worker.clone()],
        });
    }

    let v = state.worker_visibility();
    if v < params.v_min() {
        let mut subjects = vec![worker.clone()];
        subjects.extend(
            attribute_occlusion(&state.robot, &state.human, &state.env.occluders)
                .into_iter()
                .map(|a| a.occluder_id),
        );
        active.push(ActiveConstraint {
            id: ConstraintId::Visibility,
            measured: v,
            threshold: params.v_min(),
            margin: v - params.v_min(),
            subjects,
        });
    }

    if in_guidance_zone(state) {
        active.push(ActiveConstraint {
            id: ConstraintId::GuidanceZone,
            measured: 1.0,
            threshold: 1.0,
            margin: 0.0,
            subjects: vec![worker],
        });
    }

    Ok(active)
}

/// Priority arbitration over the active set.
///
/// Proximity and visibility override the nominal action with their mapped
/// behavior. The guidance zone only enables manual-follow: it decides the
/// outcome when the robot is already following (`engaged`) or manual-follow
/// is the requested action, and is skipped otherwise. A manual-follow
/// request that nothing enables holds the robot with `Pause`.
pub fn select_behavior(
    active: &[ActiveConstraint],
    nominal: Behavior,
    params: &SafetyParams,
    engaged: bool,
) -> Behavior {
    let wants_follow = engaged || nominal == Behavior::ManualFollow;
    let mut ranked: Vec<ConstraintId> = active.iter().map(|c| c.id).collect();
    ranked.sort_by_key(|id| params.rank(*id));
    ranked.dedup();
    for id in ranked {
        match id {
            ConstraintId::GuidanceZone if !wants_follow => continue,
            other => return other.mapped_behavior(),
        }
    }
    if wants_follow {
        Behavior::Pause
    } else {
        nominal
    }
}

/// `select_behavior` with the engagement flag read from the robot mode.
pub fn select_for_state(
    state: &SafetyState,
    active: &[ActiveConstraint],
    nominal: Behavior,
) -> Behavior {
    select_behavior(
        active,
        nominal,
        &state.params,
        state.robot.mode == Behavior::ManualFollow,
    )
}

/// The constraint that decided `select_behavior`, if any.
pub fn binding_constraint<'a>(
    active: &'a [ActiveConstraint],
    nominal: Behavior,
    params: &SafetyParams,
    engaged: bool,
) -> Option<&'a ActiveConstraint> {
    let wants_follow = engaged || nominal == Behavior::ManualFollow;
    active
        .iter()
        .filter(|c| c.id != ConstraintId::GuidanceZone || wants_follow)
        .min_by_key(|c| params.rank(c.id))
}

/// Evaluates, arbitrates and snapshots one tick.
pub fn make_decision(state: &SafetyState, nominal: Behavior) -> Result<DecisionRecord, SafetyError> {
    let active = evaluate_constraints(state)?;
    let selected = select_for_state(state, &active, nominal);
    Ok(DecisionRecord {
        tick: state.tick,
        state: state.clone(),
        nominal,
        selected,
        active,
    })
}

impl DecisionRecord {
    pub fn engaged(&self) -> bool {
        self.state.robot.mode == Behavior::ManualFollow
    }

    /// The constraint responsible for `selected`, if safety overrode.
    pub fn binding(&self) -> Option<&ActiveConstraint> {
        binding_constraint(&self.active, self.nominal, self.params(), self.engaged())
    }

    /// Re-runs evaluation and arbitration on the stored state; `Ok(())` iff
    /// both match what was recorded.
    pub fn recheck(&self) -> Result<(), String> {
        if self.tick != self.state.tick {
            return Err(format!(
                "record tick {} differs from state tick {}",
                self.tick, self.state.tick
            ));
        }
        let active = evaluate_constraints(&self.state).map_err(|e| e.to_string())?;
        if active != self.active {
            return Err(format!(
                "active set differs: recorded {:?}, recomputed {:?}",
                summarize(&self.active),
                summarize(&active)
            ));
        }
        let selected = select_for_state(&self.state, &active, self.nominal);
        if selected != self.selected {
            return Err(format!(
                "selected differs: recorded {}, recomputed {}",
                self.selected, selected
            ));
        }
        Ok(())
    }
}

fn summarize(active: &[ActiveConstraint]) -> Vec<String> {
    active
        .iter()
        .map(|c| format!("{}({}/{})", c.id, c.measured, c.threshold))
        .collect()
}
