//! Deterministic discrete-time simulation of the construction workspace.

mod scenario;
mod world;

pub use scenario::{
    load_scenario, load_scenario_file, Event, EventDoc, NominalDoc, OccluderDoc, OccluderInit,
    RobotDoc, RobotInit, Scenario, ScenarioDoc, ScenarioError, WorkerDoc, WorkerInit,
    BEAM_TRANSPORT,
};
pub use world::{step, SimError, WorldState, FOLLOW_OFFSET};
