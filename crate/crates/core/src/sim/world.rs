use std::collections::BTreeMap;

use crate::geometry::{distance, Vec2};
use crate::safety::{
    Behavior, EnvState, HumanState, Occluder, RobotState, SafetyState, Side,
};
use crate::visibility::compute_visibility;

use super::scenario::{Event, Scenario};

/// Worker-relative station-keeping distance in manual-follow, equal to the
/// default guidance-zone radius.
pub const FOLLOW_OFFSET: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("scenario finished at tick {horizon}")]
    EndOfScenario { horizon: u64 },
}

#[derive(Debug, Clone, PartialEq)]
struct OccluderBody {
    occluder: Occluder,
    speed: f64,
    waypoint: Option<Vec2>,
}

/// Live, mutable simulation state. Only [`step`] advances it.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    tick: u64,
    human: HumanState,
    worker_speed: f64,
    worker_waypoint: Option<Vec2>,
    robot: RobotState,
    cruise_speed: f64,
    occluders: Vec<OccluderBody>,
    nominal: Behavior,
    nominal_changed_at: u64,
    next_event: usize,
    next_nominal: usize,
}

impl WorldState {
    pub fn new(scenario: &Scenario) -> Self {
        let mut world = WorldState {
            tick: 0,
            human: HumanState {
                worker_id: scenario.worker.id.clone(),
                position: scenario.worker.position,
                velocity: Vec2::ZERO,
                role: scenario.worker.role.clone(),
            },
            worker_speed: scenario.worker.speed,
            worker_waypoint: None,
            robot: RobotState {
                position: scenario.robot.position,
                heading: scenario.robot.heading,
                speed: 0.0,
                load: scenario.robot.load,
                mode: Behavior::Continue,
            },
            cruise_speed: scenario.robot.cruise_speed,
            occluders: scenario
                .occluders
                .iter()
                .map(|o| OccluderBody {
                    occluder: o.occluder.clone(),
                    speed: o.speed,
                    waypoint: None,
                })
                .collect(),
            nominal: Behavior::Continue,
            nominal_changed_at: 0,
            next_event: 0,
            next_nominal: 0,
        };
        world.apply_nominal_schedule(scenario);
        world.robot.mode = world.nominal;
        world
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    /// Behavior proposed by the scripted task policy for the current tick.
    pub fn nominal(&self) -> Behavior {
        self.nominal
    }

    /// Tick at which the nominal policy last changed.
    pub fn nominal_changed_at(&self) -> u64 {
        self.nominal_changed_at
    }

    pub fn robot(&self) -> &RobotState {
        &self.robot
    }

    pub fn human(&self) -> &HumanState {
        &self.human
    }

    pub fn occluders(&self) -> impl Iterator<Item = &Occluder> {
        self.occluders.iter().map(|b| &b.occluder)
    }

    /// Sets the behavior the robot executes from the next step on.
    pub fn set_mode(&mut self, mode: Behavior) {
        self.robot.mode = mode;
    }

    /// Immutable snapshot of the current tick.
    pub fn snapshot(&self, scenario: &Scenario) -> SafetyState {
        let occluders: Vec<Occluder> = self.occluders().cloned().collect();
        let v = compute_visibility(&self.robot, &self.human, &occluders);
        SafetyState {
            tick: self.tick,
            human: self.human.clone(),
            robot: self.robot.clone(),
            env: EnvState {
                occluders,
                visibility: BTreeMap::from([(self.human.worker_id.clone(), v)]),
            },
            params: scenario.params.clone(),
        }
    }

    fn apply_nominal_schedule(&mut self, scenario: &Scenario) {
        while let Some((tick, behavior)) = scenario.nominal.get(self.next_nominal) {
            if *tick > self.tick {
                break;
            }
            self.set_nominal(*behavior);
            self.next_nominal += 1;
        }
    }

    fn set_nominal(&mut self, behavior: Behavior) {
        self.nominal = behavior;
        self.nominal_changed_at = self.tick;
    }

    fn apply_event(&mut self, event: &Event) {
        match event {
            Event::SetWorkerWaypoint(p) => self.worker_waypoint = Some(*p),
            Event::SetOccluderWaypoint { id, target } => {
                if let Some(body) = self.occluders.iter_mut().find(|b| b.occluder.occluder_id == *id) {
                    body.waypoint = Some(*target);
                }
            }
            Event::SpawnOccluder(init) => self.occluders.push(OccluderBody {
                occluder: init.occluder.clone(),
                speed: init.speed,
                waypoint: None,
            }),
            Event::RemoveOccluder(id) => self.occluders.retain(|b| b.occluder.occluder_id != *id),
            Event::SetNominal(b) => self.set_nominal(*b),
        }
    }

    fn advance_robot(&mut self, dt: f64, side: Side) {
        let before = self.robot.position;
        match self.robot.mode {
            Behavior::Continue | Behavior::SlowDown => {
                let v = if self.robot.mode == Behavior::SlowDown {
                    self.cruise_speed / 2.0
                } else {
                    self.cruise_speed
                };
                self.robot.position = before + self.robot.heading_dir() * (v * dt);
            }
            Behavior::Pause | Behavior::Stop => {}
            Behavior::ManualFollow => {
                if let Some(dir) = self.human.velocity.normalized() {
                    self.robot.heading = dir.y.atan2(dir.x);
                }
                // Keep the worker on the configured side at the follow offset.
                let target = self.human.position - self.robot.side_dir(side) * FOLLOW_OFFSET;
                // Faster than the worker so that a turn does not drop them
                // out of the zone for good.
                let reach = (self.cruise_speed + self.worker_speed) * dt;
                self.robot.position = move_toward(before, target, reach).0;
            }
        }
        self.robot.speed = distance(before, self.robot.position) / dt;
    }
}

/// Moves `from` toward `to` by at most `reach`; reports arrival.
fn move_toward(from: Vec2, to: Vec2, reach: f64) -> (Vec2, bool) {
    let gap = to - from;
    let d = gap.norm();
    if d <= reach {
        (to, true)
    } else {
        (from + gap * (reach / d), false)
    }
}

/// Advances the world by one tick and returns the new snapshot.
///
/// Order within a tick: due events and nominal-schedule entries apply,
/// then the worker and occluders move toward their waypoints, then the
/// robot moves according to its current mode, then visibility is
/// recomputed.
pub fn step(world: &mut WorldState, scenario: &Scenario) -> Result<SafetyState, SimError> {
    if world.tick >= scenario.horizon {
        return Err(SimError::EndOfScenario {
            horizon: scenario.horizon,
        });
    }
    world.tick += 1;
    let dt = scenario.tick_duration;

    while let Some((tick, event)) = scenario.events.get(world.next_event) {
        if *tick > world.tick {
            break;
        }
        world.apply_event(event);
        world.next_event += 1;
    }
    world.apply_nominal_schedule(scenario);

    if let Some(wp) = world.worker_waypoint {
        let (pos, arrived) = move_toward(world.human.position, wp, world.worker_speed * dt);
        world.human.velocity = if arrived {
            world.worker_waypoint = None;
            Vec2::ZERO
        } else {
            (pos - world.human.position) * (1.0 / dt)
        };
        world.human.position = pos;
    } else {
        world.human.velocity = Vec2::ZERO;
    }

    for body in &mut world.occluders {
        match body.waypoint {
            Some(wp) => {
                let (pos, arrived) = move_toward(body.occluder.center, wp, body.speed * dt);
                body.occluder.velocity = if arrived {
                    body.waypoint = None;
                    Vec2::ZERO
                } else {
                    (pos - body.occluder.center) * (1.0 / dt)
                };
                body.occluder.center = pos;
            }
            None => body.occluder.velocity = Vec2::ZERO,
        }
    }

    world.advance_robot(dt, scenario.params.guidance_zone().side);
    Ok(world.snapshot(scenario))
}
