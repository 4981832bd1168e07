//! Random states, records and deltas for the property suites, plus an
//! oracle that re-derives the rule table without going through the
//! library's rule code.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use hrc_explain::geometry::{rectangle, Shape, Vec2};
use hrc_explain::query::{Referent, StateDelta};
use hrc_explain::safety::{
    make_decision, Behavior, ConstraintId, DecisionRecord, EnvState, GuidanceZone, HumanState, Load, Occluder,
    RobotState, SafetyParams, SafetyState, Side,
};
use hrc_explain::visibility::compute_visibility;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn behavior(rng: &mut impl Rng) -> Behavior {
    *Behavior::ALL.choose(rng).unwrap()
}

fn side(rng: &mut impl Rng) -> Side {
    if rng.gen_bool(0.5) {
        Side::Left
    } else {
        Side::Right
    }
}

pub fn params(rng: &mut impl Rng) -> SafetyParams {
    if rng.gen_bool(0.4) {
        return SafetyParams::default();
    }
    let d_min = if rng.gen_bool(0.5) { 1.5 } else { rng.gen_range(0.5..3.0) };
    let v_min = if rng.gen_bool(0.5) { 0.6 } else { rng.gen_range(0.05..=1.0) };
    let max_distance = if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(0.5..2.0) };
    let mut priorities = ConstraintId::ALL.to_vec();
    if rng.gen_bool(0.5) {
        priorities.shuffle(rng);
    }
    SafetyParams::new(
        d_min,
        v_min,
        GuidanceZone {
            side: side(rng),
            max_distance,
        },
        priorities,
    )
    .unwrap()
}

fn unit(rng: &mut impl Rng) -> Vec2 {
    Vec2::from_angle(rng.gen_range(-PI..PI))
}

pub fn state(rng: &mut impl Rng) -> SafetyState {
    let params = Arc::new(params(rng));
    let robot = RobotState {
        position: Vec2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)),
        heading: rng.gen_range(-PI..=PI),
        speed: rng.gen_range(0.0..1.0),
        load: if rng.gen_bool(0.5) { Load::CarryingBeam } else { Load::Unloaded },
        mode: behavior(rng),
    };
    let zone = params.guidance_zone();
    let worker = match rng.gen_range(0..10) {
        // On a threshold circle exactly.
        0 => robot.position + unit(rng) * params.d_min(),
        1 => robot.position + unit(rng) * zone.max_distance,
        // Inside the guidance half-disc.
        2 | 3 => {
            let along = robot.heading_dir() * rng.gen_range(-0.5..0.5);
            robot.position + along * zone.max_distance + robot.side_dir(zone.side) * rng.gen_range(0.1..0.8)
        }
        _ => robot.position + unit(rng) * rng.gen_range(0.0..4.0),
    };
    let human = HumanState {
        worker_id: "w1".into(),
        position: worker,
        velocity: Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
        role: "rigger".into(),
    };
    let kinds = ["forklift", "stack", "column"];
    let occluders = (0..rng.gen_range(0..=3))
        .map(|i| {
            let t: f64 = rng.gen_range(0.2..0.8);
            let mid = robot.position + (worker - robot.position) * t;
            let center = mid + Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let shape = if rng.gen_bool(0.5) {
                Shape::Disc {
                    radius: rng.gen_range(0.1..0.6),
                }
            } else {
                rectangle(rng.gen_range(0.2..1.5), rng.gen_range(0.2..1.5))
            };
            Occluder {
                occluder_id: format!("{}{}", kinds[i % 3], i + 1),
                kind: kinds[i % 3].into(),
                center,
                shape,
                velocity: Vec2::ZERO,
                zone: None,
            }
        })
        .collect::<Vec<_>>();
    let v = match rng.gen_range(0..10) {
        0 => params.v_min(),
        1 => rng.gen_range(0.0..=1.0),
        _ => compute_visibility(&robot, &human, &occluders),
    };
    SafetyState {
        tick: rng.gen_range(1..1000),
        human,
        robot,
        env: EnvState {
            occluders,
            visibility: BTreeMap::from([("w1".to_string(), v)]),
        },
        params,
    }
}

pub fn record(rng: &mut impl Rng) -> DecisionRecord {
    let s = state(rng);
    make_decision(&s, behavior(rng)).unwrap()
}

fn occluder_ref(rng: &mut impl Rng, s: &SafetyState) -> Referent {
    match s.env.occluders.choose(rng) {
        Some(o) if rng.gen_bool(0.9) => Referent::Entity(o.occluder_id.clone()),
        _ => Referent::Entity("ghost9".into()),
    }
}

pub fn delta(rng: &mut impl Rng, s: &SafetyState) -> StateDelta {
    let v2 = |rng: &mut dyn rand::RngCore, r: f64| Vec2::new(rng.gen_range(-r..r), rng.gen_range(-r..r));
    match rng.gen_range(0..8) {
        0 => StateDelta::SetWorkerPosition {
            to: s.robot.position + v2(rng, 3.0),
        },
        1 => StateDelta::MoveWorkerBy { by: v2(rng, 2.0) },
        2 => StateDelta::MoveWorkerAway {
            meters: if rng.gen_bool(0.3) {
                rng.gen_range(1..=10) as f64 * 0.5
            } else {
                rng.gen_range(-1.0..3.0)
            },
        },
        3 => StateDelta::SetWorkerDistance {
            meters: rng.gen_range(0.0..4.0),
        },
        4 => StateDelta::RemoveOccluder {
            id: occluder_ref(rng, s),
        },
        5 => StateDelta::MoveOccluderBy {
            id: occluder_ref(rng, s),
            by: v2(rng, 2.0),
        },
        6 => StateDelta::EnterGuidanceZone { side: side(rng) },
        _ => StateDelta::SetVisibility {
            value: rng.gen_range(0.0..=1.0),
        },
    }
}

pub fn deltas(rng: &mut impl Rng, s: &SafetyState) -> Vec<StateDelta> {
    (0..rng.gen_range(1..=3)).map(|_| delta(rng, s)).collect()
}

/// Rule predicates evaluated straight from the definitions: strict
/// thresholds, the inclusive half-disc for the guidance zone, and the
/// separation exemption for a robot already following inside the zone.
pub mod oracle {
    use super::*;

    pub fn dist(s: &SafetyState) -> f64 {
        let dx = s.human.position.x - s.robot.position.x;
        let dy = s.human.position.y - s.robot.position.y;
        dx.hypot(dy)
    }

    pub fn in_zone(s: &SafetyState) -> bool {
        let zone = s.params.guidance_zone();
        let (hx, hy) = (s.robot.heading.cos(), s.robot.heading.sin());
        let dx = s.human.position.x - s.robot.position.x;
        let dy = s.human.position.y - s.robot.position.y;
        let cross = hx * dy - hy * dx;
        let on_side = match zone.side {
            Side::Left => cross > 0.0,
            Side::Right => cross < 0.0,
        };
        on_side && dist(s) <= zone.max_distance + 1e-9
    }

    pub fn visibility(s: &SafetyState) -> f64 {
        s.env.visibility.get(&s.human.worker_id).copied().unwrap_or(1.0)
    }

    /// Raw predicates, ignoring the follow exemption.
    pub fn too_close(s: &SafetyState) -> bool {
        dist(s) < s.params.d_min()
    }

    pub fn too_occluded(s: &SafetyState) -> bool {
        visibility(s) < s.params.v_min()
    }

    pub fn holds(s: &SafetyState, id: ConstraintId) -> bool {
        match id {
            ConstraintId::Proximity => too_close(s) && !(s.robot.mode == Behavior::ManualFollow && in_zone(s)),
            ConstraintId::Visibility => too_occluded(s),
            ConstraintId::GuidanceZone => in_zone(s),
        }
    }

    pub fn active(s: &SafetyState) -> Vec<ConstraintId> {
        ConstraintId::ALL.into_iter().filter(|id| holds(s, *id)).collect()
    }

    /// Priority-maximal mapping. The guidance zone counts only when
    /// manual-follow is requested or already engaged, and a follow request
    /// it does not enable pauses.
    pub fn select(active: &[ConstraintId], nominal: Behavior, params: &SafetyParams, engaged: bool) -> Behavior {
        let follow = engaged || nominal == Behavior::ManualFollow;
        for id in params.priorities() {
            if !active.contains(id) {
                continue;
            }
            match id {
                ConstraintId::Proximity => return Behavior::Stop,
                ConstraintId::Visibility => return Behavior::Pause,
                ConstraintId::GuidanceZone if follow => return Behavior::ManualFollow,
                ConstraintId::GuidanceZone => {}
            }
        }
        if follow {
            Behavior::Pause
        } else {
            nominal
        }
    }

    pub fn decide(s: &SafetyState, nominal: Behavior) -> Behavior {
        select(&active(s), nominal, &s.params, s.robot.mode == Behavior::ManualFollow)
    }
}
