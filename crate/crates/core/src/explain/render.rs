//! Fixed sentence templates. Every number is printed with two decimals.

use crate::geometry::Vec2;
use crate::query::StateDelta;
use crate::safety::{ActiveConstraint, Behavior, ConstraintId, SafetyParams};

use super::DialogueMemory;

/// Two decimals, without a negative zero.
pub fn num(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn pair(v: Vec2) -> String {
    format!("({}, {})", num(v.x), num(v.y))
}

/// "a", "a and b", "a, b and c".
pub fn join_and(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

/// Name for an entity, or the anaphor when it is already salient.
pub fn mention(id: &str, memory: &DialogueMemory, capital: bool) -> String {
    if memory.is_salient(id) {
        if capital { "It" } else { "it" }.into()
    } else {
        id.into()
    }
}

pub fn infinitive(b: Behavior) -> &'static str {
    match b {
        Behavior::Continue => "continue",
        Behavior::SlowDown => "slow down",
        Behavior::Pause => "pause",
        Behavior::Stop => "stop",
        Behavior::ManualFollow => "switch to manual-follow",
    }
}

pub fn gerund(b: Behavior) -> &'static str {
    match b {
        Behavior::Continue => "continuing",
        Behavior::SlowDown => "slowing down",
        Behavior::Pause => "paused",
        Behavior::Stop => "stopped",
        Behavior::ManualFollow => "in manual-follow mode",
    }
}

pub fn zone_phrase(params: &SafetyParams) -> String {
    let zone = params.guidance_zone();
    format!("within {} m on my {} side", num(zone.max_distance), zone.side)
}

pub fn zone_unmet(params: &SafetyParams) -> String {
    format!("you are not {}", zone_phrase(params))
}

/// Main sentence of a causal answer.
pub fn causal_primary(c: &ActiveConstraint, attribution: &[String], params: &SafetyParams) -> String {
    match c.id {
        ConstraintId::Proximity => format!(
            "The worker is {} m from me, inside the required {} m separation, so I stopped.",
            num(c.measured),
            num(c.threshold)
        ),
        ConstraintId::Visibility => {
            let cause = if attribution.is_empty() {
                String::new()
            } else {
                format!(" due to occlusion by {}", join_and(attribution))
            };
            format!(
                "My visibility confidence ({}) dropped below the required threshold ({}){cause}.",
                num(c.measured),
                num(c.threshold)
            )
        }
        ConstraintId::GuidanceZone => format!(
            "You are {}, so I am following you in manual-follow mode.",
            zone_phrase(params)
        ),
    }
}

/// Compact clause for secondary citations.
pub fn short_clause(c: &ActiveConstraint, params: &SafetyParams) -> String {
    match c.id {
        ConstraintId::Proximity => format!("separation {} m < {} m", num(c.measured), num(c.threshold)),
        ConstraintId::Visibility => format!("visibility confidence {} < {}", num(c.measured), num(c.threshold)),
        ConstraintId::GuidanceZone => format!("worker {}", zone_phrase(params)),
    }
}

/// Why an active constraint rules out an alternative, naming its parameter.
pub fn blocking_clause(c: &ActiveConstraint, params: &SafetyParams) -> String {
    match c.id {
        ConstraintId::Proximity => format!(
            "the separation {} m is below d_min = {} m (short by {} m)",
            num(c.measured),
            num(c.threshold),
            num(-c.margin)
        ),
        ConstraintId::Visibility => format!(
            "my visibility confidence {} is below v_min = {} (short by {})",
            num(c.measured),
            num(c.threshold),
            num(-c.margin)
        ),
        ConstraintId::GuidanceZone => {
            if c.measured >= 1.0 {
                format!("the worker is {}", zone_phrase(params))
            } else {
                zone_unmet(params)
            }
        }
    }
}

/// Refusal wording for a command.
pub fn refusal_clause(c: &ActiveConstraint, params: &SafetyParams) -> String {
    match c.id {
        ConstraintId::Proximity => format!(
            "the worker is {} m from me, inside the required {} m separation",
            num(c.measured),
            num(c.threshold)
        ),
        ConstraintId::Visibility => format!(
            "my visibility confidence ({}) is below the required threshold ({})",
            num(c.measured),
            num(c.threshold)
        ),
        ConstraintId::GuidanceZone => zone_unmet(params),
    }
}

/// Condition part of a counterfactual, "the worker moves 1.00 m away".
pub fn delta_condition(d: &StateDelta, params: &SafetyParams) -> String {
    match d {
        StateDelta::SetWorkerPosition { to } => format!("the worker stands at {}", pair(*to)),
        StateDelta::MoveWorkerBy { by } => format!("the worker moves by {} m", pair(*by)),
        StateDelta::MoveWorkerAway { meters } if *meters < 0.0 => {
            format!("the worker moves {} m closer", num(-meters))
        }
        StateDelta::MoveWorkerAway { meters } => format!("the worker moves {} m away", num(*meters)),
        StateDelta::SetWorkerDistance { meters } => format!("the worker stands {} m from me", num(*meters)),
        StateDelta::RemoveOccluder { id } => format!("{id} is removed"),
        StateDelta::MoveOccluderBy { id, by } => format!("{id} moves by {} m", pair(*by)),
        StateDelta::EnterGuidanceZone { side } => format!(
            "you guide me from within {} m on my {side} side",
            num(params.guidance_zone().max_distance)
        ),
        StateDelta::SetVisibility { value } => {
            format!("my visibility confidence is {} (diagnostic override)", num(*value))
        }
    }
}

/// Offer wording for an enabling condition, "step 0.50 m back".
pub fn delta_offer(d: &StateDelta, params: &SafetyParams) -> String {
    match d {
        StateDelta::MoveWorkerAway { meters } => format!("step {} m back", num(*meters)),
        StateDelta::EnterGuidanceZone { side } => format!(
            "remain within {} m on my {side} side",
            num(params.guidance_zone().max_distance)
        ),
        StateDelta::RemoveOccluder { id } => format!("clear {id} from my line of sight"),
        other => delta_condition(other, params),
    }
}

pub fn comparison(measured: f64, threshold: f64) -> &'static str {
    if measured < threshold {
        "<"
    } else {
        "≥"
    }
}
