//! Constraint-grounded safety control with Why / Why-not / What-if
//! explanations for a simulated human-robot construction workspace.

pub mod explain;
pub mod geometry;
pub mod query;
pub mod safety;
pub mod session;
pub mod sim;
pub mod trace;
pub mod visibility;
