//! Safety state, constraint rules and priority arbitration. Both the control
//! loop and the explanation engine go through this module.

mod rules;
mod state;
pub mod testing;

pub use rules::{
    binding_constraint, evaluate_constraints, in_guidance_zone, make_decision, select_behavior,
    select_for_state, separation, ZONE_TOLERANCE,
};
pub use state::{
    ActiveConstraint, Behavior, ConstraintId, DecisionRecord, EnvState, GuidanceZone, HumanState,
    Load, Occluder, ParamsDoc, RobotState, SafetyParams, SafetyState, Side,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SafetyError {
    #[error("invalid state field `{field}`: {reason}")]
    InvalidState { field: String, reason: String },
    #[error("invalid safety parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },
    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },
}
