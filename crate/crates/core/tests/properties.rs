mod common;

use common::oracle;
use hrc_explain::explain::{
    answer_what_if, answer_why, answer_why_not, apply_delta, evaluate_what_if, explain, suggest_enabling_condition,
    DialogueMemory,
};
use hrc_explain::query::{Query, QueryAst, Referent, StateDelta};
use hrc_explain::safety::{
    evaluate_constraints, select_behavior, ActiveConstraint, Behavior, ConstraintId, SafetyParams,
};
use hrc_explain::visibility::compute_visibility;
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn constraint(id: ConstraintId) -> ActiveConstraint {
    ActiveConstraint {
        id,
        measured: 0.0,
        threshold: 1.0,
        margin: -1.0,
        subjects: vec!["w1".into()],
    }
}

#[test]
fn arbitration_is_priority_maximal_for_every_subset_and_order() {
    let orders = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut cases = 0;
    for order in orders {
        let priorities = order.iter().map(|i| ConstraintId::ALL[*i]).collect();
        let params = SafetyParams::new(1.5, 0.6, Default::default(), priorities).unwrap();
        for mask in 0..8u8 {
            let ids: Vec<ConstraintId> = (0..3).filter(|b| mask & (1 << b) != 0).map(|b| ConstraintId::ALL[b]).collect();
            let active: Vec<ActiveConstraint> = ids.iter().map(|id| constraint(*id)).collect();
            for nominal in Behavior::ALL {
                for engaged in [false, true] {
                    let got = select_behavior(&active, nominal, &params, engaged);
                    assert_eq!(
                        got,
                        oracle::select(&ids, nominal, &params, engaged),
                        "{ids:?} {nominal} engaged={engaged} {:?}",
                        params.priorities()
                    );
                    cases += 1;
                }
            }
        }
    }
    assert_eq!(cases, 6 * 8 * 5 * 2);
}

#[test]
fn duplicate_citations_do_not_change_arbitration() {
    let params = SafetyParams::default();
    let twice = vec![constraint(ConstraintId::Visibility), constraint(ConstraintId::Visibility)];
    assert_eq!(select_behavior(&twice, Behavior::Continue, &params, false), Behavior::Pause);
}

proptest! {
    #![proptest_config(config(10_000))]

    #[test]
    fn evaluation_is_pure_and_sound(seed in any::<u64>()) {
        let s = common::state(&mut common::rng(seed));
        let a = evaluate_constraints(&s).unwrap();
        let b = evaluate_constraints(&s).unwrap();
        prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
        for nominal in Behavior::ALL {
            let engaged = s.robot.mode == Behavior::ManualFollow;
            prop_assert_eq!(
                select_behavior(&a, nominal, &s.params, engaged),
                select_behavior(&b, nominal, &s.params, engaged)
            );
            prop_assert_eq!(select_behavior(&a, nominal, &s.params, engaged), oracle::decide(&s, nominal));
        }
        let ids: Vec<ConstraintId> = a.iter().map(|c| c.id).collect();
        prop_assert_eq!(&ids, &oracle::active(&s));
        for c in &a {
            match c.id {
                ConstraintId::Proximity => {
                    prop_assert_eq!(c.measured, oracle::dist(&s));
                    prop_assert_eq!(c.threshold, s.params.d_min());
                    prop_assert!(c.margin < 0.0);
                }
                ConstraintId::Visibility => {
                    prop_assert_eq!(c.measured, oracle::visibility(&s));
                    prop_assert_eq!(c.threshold, s.params.v_min());
                    prop_assert!(c.margin < 0.0);
                }
                ConstraintId::GuidanceZone => prop_assert_eq!(c.margin, 0.0),
            }
        }
    }

    #[test]
    fn counterfactual_verdict_matches_reevaluation(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let r = common::record(&mut rng);
        let deltas = common::deltas(&mut rng, &r.state);
        let hash = r.params().content_hash();
        let before = r.clone();
        if let Ok(e) = answer_what_if(&r, &deltas) {
            let s2 = apply_delta(&r.state, &deltas).unwrap();
            let verdict = e.verdict.unwrap();
            prop_assert_eq!(verdict.behavior, oracle::decide(&s2, r.nominal));
            let ids: Vec<ConstraintId> = verdict.active.iter().map(|c| c.id).collect();
            prop_assert_eq!(ids, oracle::active(&s2));
            prop_assert_eq!(s2.params.content_hash(), hash.clone());
            prop_assert_eq!(e.diagnostic, deltas.iter().any(|d| matches!(d, StateDelta::SetVisibility { .. })));
        }
        prop_assert_eq!(r.params().content_hash(), hash);
        prop_assert_eq!(r, before);
    }

    #[test]
    fn applied_deltas_change_exactly_what_they_say(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let s = common::state(&mut rng);
        let d = common::delta(&mut rng, &s);
        let Ok(s2) = apply_delta(&s, std::slice::from_ref(&d)) else { return Ok(()) };
        let (r, w) = (s.robot.position, s.human.position);
        let bearing = (w - r).normalized().unwrap_or_else(|| s.robot.heading_dir());
        let close = |a: hrc_explain::geometry::Vec2, b: hrc_explain::geometry::Vec2| (a - b).norm() < 1e-12;
        match &d {
            StateDelta::SetWorkerPosition { to } => prop_assert!(close(s2.human.position, *to)),
            StateDelta::MoveWorkerBy { by } => prop_assert!(close(s2.human.position, w + *by)),
            StateDelta::MoveWorkerAway { meters } => prop_assert!(close(s2.human.position, w + bearing * *meters)),
            StateDelta::SetWorkerDistance { meters } => {
                prop_assert!((oracle::dist(&s2) - meters).abs() < 1e-9)
            }
            StateDelta::RemoveOccluder { id: Referent::Entity(id) } => {
                prop_assert!(s2.env.occluder(id).is_none());
                prop_assert_eq!(s2.env.occluders.len() + 1, s.env.occluders.len());
            }
            StateDelta::EnterGuidanceZone { side } => {
                prop_assert!((oracle::dist(&s2) - s.params.guidance_zone().max_distance).abs() < 1e-9);
                prop_assert_eq!(s2.robot.mode, Behavior::ManualFollow);
                if *side == s.params.guidance_zone().side {
                    prop_assert!(oracle::in_zone(&s2));
                } else {
                    prop_assert!(!oracle::in_zone(&s2));
                }
            }
            _ => {}
        }
        match d {
            StateDelta::SetVisibility { value } => prop_assert_eq!(oracle::visibility(&s2), value),
            _ => prop_assert_eq!(
                oracle::visibility(&s2),
                compute_visibility(&s2.robot, &s2.human, &s2.env.occluders)
            ),
        }
        prop_assert_eq!(s2.robot.position, s.robot.position);
        prop_assert_eq!(s2.robot.heading, s.robot.heading);
    }
}

proptest! {
    #![proptest_config(config(1_000))]

    #[test]
    fn why_cites_only_recorded_constraints(seed in any::<u64>()) {
        let r = common::record(&mut common::rng(seed));
        for target in [None, Some(ConstraintId::Proximity), Some(ConstraintId::Visibility), Some(ConstraintId::GuidanceZone)] {
            let e = answer_why(&r, target);
            prop_assert_eq!(e.cited.len(), r.active.len());
            for c in &e.cited {
                prop_assert!(r.active.contains(c), "cited {:?} not in {:?}", c, r.active);
                prop_assert!(e.text.contains(&hrc_explain::explain::render::num(c.measured))
                    || c.id == ConstraintId::GuidanceZone);
            }
            if let Some(b) = r.binding() {
                prop_assert_eq!(&e.cited[0], b);
            }
        }
    }

    #[test]
    fn why_not_citations_are_violated_and_outrank(seed in any::<u64>()) {
        let r = common::record(&mut common::rng(seed));
        let s = &r.state;
        for alt in Behavior::ALL {
            let e = answer_why_not(&r, alt).unwrap();
            let mut requested = s.clone();
            requested.robot.mode = alt;
            let engaged = alt == Behavior::ManualFollow;
            let admissible = oracle::decide(&requested, alt) == alt;
            if alt == r.selected {
                prop_assert!(e.cited.is_empty());
                continue;
            }
            prop_assert_eq!(e.cited.is_empty(), admissible, "alt {} cited {:?}", alt, e.cited);
            for c in &e.cited {
                match c.id {
                    ConstraintId::GuidanceZone => {
                        prop_assert_eq!(alt, Behavior::ManualFollow);
                        prop_assert!(!oracle::in_zone(s));
                        prop_assert!(c.margin < 0.0);
                    }
                    ConstraintId::Proximity => {
                        prop_assert!(oracle::too_close(s));
                        prop_assert_eq!(c.measured, oracle::dist(s));
                    }
                    ConstraintId::Visibility => {
                        prop_assert!(oracle::too_occluded(s));
                        prop_assert_eq!(c.measured, oracle::visibility(s));
                    }
                }
                if c.id != ConstraintId::GuidanceZone {
                    let alone = select_behavior(std::slice::from_ref(c), alt, &s.params, engaged);
                    prop_assert_eq!(alone, c.id.mapped_behavior());
                    prop_assert_ne!(alone, alt);
                }
            }
        }
    }

    #[test]
    fn memory_never_changes_verdicts_or_citations(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let r = common::record(&mut rng);
        let mut populated = DialogueMemory::new("s");
        for o in &r.state.env.occluders {
            populated.touch(&o.occluder_id);
        }
        populated.touch("w1");
        populated.turn_count = 41;
        let mut queries = vec![
            Query::Why { target: None },
            Query::WhyNot { alternative: common::behavior(&mut rng) },
            Query::WhatIf { deltas: common::deltas(&mut rng, &r.state) },
            Query::Confirm { referent: Referent::Entity("w1".into()) },
            Query::Command { behavior: Some(Behavior::ManualFollow) },
        ];
        if let Some(o) = r.state.env.occluders.first() {
            queries.push(Query::Confirm { referent: Referent::Entity(o.occluder_id.clone()) });
        }
        for q in queries {
            let ast = QueryAst::new(q);
            let fresh = explain(&r, &ast, &DialogueMemory::new("s"));
            let used = explain(&r, &ast, &populated);
            match (fresh, used) {
                (Ok((a, ma)), Ok((b, mb))) => {
                    prop_assert_eq!(&a.cited, &b.cited);
                    prop_assert_eq!(&a.verdict, &b.verdict);
                    prop_assert_eq!(a.affirmative, b.affirmative);
                    prop_assert_eq!(a.kind, b.kind);
                    prop_assert_eq!(ma.turn_count, 1);
                    prop_assert_eq!(mb.turn_count, 42);
                }
                (Err(a), Err(b)) => prop_assert_eq!(a, b),
                (a, b) => prop_assert!(false, "fresh {:?} vs populated {:?}", a, b),
            }
        }
    }

    #[test]
    fn suggestions_reach_their_target(seed in any::<u64>()) {
        let r = common::record(&mut common::rng(seed));
        for target in [Behavior::Continue, Behavior::SlowDown, Behavior::ManualFollow] {
            if let Some(s) = suggest_enabling_condition(&r, target) {
                prop_assert_ne!(r.selected, target);
                let e = answer_what_if(&r, &s).unwrap();
                prop_assert_eq!(e.verdict.unwrap().behavior, target);
                prop_assert_eq!(evaluate_what_if(&r, &s).unwrap().behavior, target);
            }
        }
    }

    #[test]
    fn offered_enabling_conditions_reach_manual_follow_or_the_task(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let r = common::record(&mut rng);
        let deltas = common::deltas(&mut rng, &r.state);
        let Ok(e) = answer_what_if(&r, &deltas) else { return Ok(()) };
        if e.enabling_condition.is_empty() {
            return Ok(());
        }
        let reached = evaluate_what_if(&r, &e.enabling_condition).unwrap().behavior;
        prop_assert!(!reached.is_halt());
        prop_assert!(reached == Behavior::ManualFollow || reached == r.nominal);
    }
}
