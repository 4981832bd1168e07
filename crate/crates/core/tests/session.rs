mod common;

use std::sync::Arc;

use hrc_explain::explain::{ExplainError, ExplanationKind};
use hrc_explain::safety::{in_guidance_zone, make_decision, Behavior, ConstraintId};
use hrc_explain::session::{RunStatus, Session, SessionError};
use hrc_explain::sim::{load_scenario, Scenario, BEAM_TRANSPORT};
use proptest::prelude::*;

const TRIGGER_TICK: u64 = 30;

fn session() -> Session {
    Session::new("s1", Arc::new(Scenario::beam_transport()))
}

fn fingerprint(s: &Session) -> (Vec<u8>, String, u64) {
    (s.trace().serialize(), format!("{:?}", s.world()), s.world().tick())
}

#[test]
fn zero_ticks_is_empty_and_idle() {
    let mut s = session();
    assert!(s.run(0).unwrap().is_empty());
    assert_eq!(s.status(), RunStatus::Idle);
    assert!(s.trace().is_empty());
}

#[test]
fn why_on_empty_trace_is_unknown_tick() {
    let mut s = session();
    let err = s.ask_text("why").unwrap_err();
    assert!(matches!(err, SessionError::Explain(ExplainError::UnknownTick { tick: None, .. })));
}

#[test]
fn ask_never_moves_the_world_or_the_trace() {
    let mut s = session();
    s.run(TRIGGER_TICK).unwrap();
    let before = fingerprint(&s);
    let hash = s.trace().params_hash().to_string();
    for q in [
        "why",
        "why not continue",
        "what if remove forklift1",
        "whatif remove it",
        "whatif guide right",
        "was it forklift1",
        "was it",
        "do it",
        "follow",
        "resume at 12",
        "why at 3",
    ] {
        match s.ask_text(q) {
            Ok(e) if e.kind == ExplanationKind::CommandAck || e.kind == ExplanationKind::Refusal => {
                assert!(e.preview, "{q}")
            }
            Ok(_) => {}
            Err(SessionError::Parse(_)) => panic!("{q} did not parse"),
            Err(_) => {}
        }
        assert_eq!(fingerprint(&s), before, "{q}");
    }
    assert_eq!(s.trace().params().content_hash(), hash);
    assert_eq!(s.memory().turn_count, 11);
}

#[test]
fn every_command_appends_exactly_one_record() {
    let mut s = session();
    s.run(TRIGGER_TICK).unwrap();
    let out = s.command(Some(Behavior::Continue)).unwrap();
    assert!(!out.accepted);
    assert_eq!(out.explanation.kind, ExplanationKind::Refusal);
    assert_eq!(out.record.nominal, Behavior::Continue);
    assert_eq!(s.trace().len() as u64, TRIGGER_TICK + 1);
    assert_eq!(s.trace().latest().unwrap(), &out.record);
    assert_eq!(out.record.tick, TRIGGER_TICK + 1);

    let err = s.command(Some(Behavior::Stop)).unwrap_err();
    assert!(matches!(err, SessionError::Explain(ExplainError::NotCommandable { .. })));
    assert_eq!(s.trace().len() as u64, TRIGGER_TICK + 1);
}

#[test]
fn do_it_without_an_offer_is_an_error() {
    let mut s = session();
    s.run(5).unwrap();
    let err = s.command(None).unwrap_err();
    assert_eq!(err, SessionError::Explain(ExplainError::NothingToDo));
}

#[test]
fn do_it_uses_the_last_what_if_verdict() {
    let mut s = session();
    s.run(TRIGGER_TICK).unwrap();
    let e = s.ask_text("whatif guide right").unwrap();
    assert_eq!(e.verdict.unwrap().behavior, Behavior::ManualFollow);
    let out = s.command(None).unwrap();
    // The worker is still far away, so the live check refuses.
    assert_eq!(out.record.nominal, Behavior::ManualFollow);
    assert!(!out.accepted);
}

#[test]
fn pause_resumes_by_itself() {
    let mut s = session();
    let records = s.run(80).unwrap();
    let first_pause = records.iter().position(|r| r.selected == Behavior::Pause).unwrap();
    let resumed = records[first_pause..]
        .iter()
        .find(|r| r.selected == Behavior::Continue)
        .unwrap();
    assert!(resumed.active.is_empty());
    assert_eq!(resumed.nominal, Behavior::Continue);
    assert!(!s.stop_held());
}

#[test]
fn stop_is_held_until_the_task_resumes() {
    let mut s = session();
    let records = s.run(200).unwrap();
    let stop = records.iter().find(|r| r.selected == Behavior::Stop).unwrap();
    let cleared = records
        .iter()
        .find(|r| r.tick > stop.tick && r.constraint(ConstraintId::Proximity).is_none())
        .unwrap();
    // Separation is restored but the stop stays in force.
    assert_eq!(cleared.nominal, Behavior::Stop);
    assert_eq!(cleared.selected, Behavior::Stop);
    let resumed = records.iter().find(|r| r.tick > stop.tick && r.selected == Behavior::Continue).unwrap();
    assert_eq!(resumed.tick, 170);
    assert_eq!(s.status(), RunStatus::Finished);
}

#[test]
fn accepted_continue_releases_a_held_stop() {
    let mut s = session();
    let records = s.run(160).unwrap();
    assert!(s.stop_held());
    let last = records.last().unwrap();
    assert!(last.active.is_empty() && last.selected == Behavior::Stop);
    let out = s.command(Some(Behavior::Continue)).unwrap();
    assert!(out.accepted, "{}", out.explanation.text);
    assert!(!s.stop_held());
    let next = s.tick().unwrap().unwrap();
    assert_eq!(next.nominal, Behavior::Continue);
}

#[test]
fn manual_follow_is_accepted_in_the_zone_and_then_followed() {
    let mut s = session();
    s.run(135).unwrap();
    assert!(in_guidance_zone(&s.trace().latest().unwrap().state));
    let out = s.command(Some(Behavior::ManualFollow)).unwrap();
    assert!(out.accepted);
    assert_eq!(out.explanation.kind, ExplanationKind::CommandAck);
    assert!(out.explanation.text.starts_with("Switching to manual-follow"));
    let next = s.tick().unwrap().unwrap();
    assert_eq!(next.selected, Behavior::ManualFollow);
    assert!(next.constraint(ConstraintId::Proximity).is_none());
}

#[test]
fn finished_session_ticks_are_no_ops() {
    let mut s = session();
    s.run(500).unwrap();
    assert_eq!(s.status(), RunStatus::Finished);
    let len = s.trace().len();
    assert_eq!(s.tick().unwrap(), None);
    assert!(s.run(3).unwrap().is_empty());
    assert!(matches!(
        s.command(Some(Behavior::Continue)),
        Err(SessionError::Finished { horizon: 200 })
    ));
    assert_eq!(s.trace().len(), len);
    s.set_status(RunStatus::Running);
    assert_eq!(s.status(), RunStatus::Finished);
    assert!(s.ask_text("why").is_ok());
}

#[test]
fn paused_by_user_rejects_ticks() {
    let mut s = session();
    s.set_status(RunStatus::PausedByUser);
    assert_eq!(s.tick().unwrap_err(), SessionError::PausedByUser);
    s.set_status(RunStatus::Running);
    assert!(s.tick().unwrap().is_some());
}

#[test]
fn bundled_source_and_builtin_agree() {
    assert_eq!(load_scenario(BEAM_TRANSPORT).unwrap(), Scenario::beam_transport());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    /// Commands at random times never yield a behavior the controller would
    /// forbid on the state they were executed in.
    #[test]
    fn commands_are_gated_by_the_live_state(ops in proptest::collection::vec((0u8..4, 1u64..25), 1..12)) {
        let mut s = session();
        for (op, n) in ops {
            let outcome = match op {
                0 => s.command(Some(Behavior::ManualFollow)),
                1 => s.command(Some(Behavior::Continue)),
                _ => { s.run(n).unwrap(); continue; }
            };
            let Ok(out) = outcome else { continue };
            let r = &out.record;
            let mut st = r.state.clone();
            st.robot.mode = r.nominal;
            let oracle = common::oracle::decide(&st, r.nominal);
            prop_assert_eq!(r.selected, oracle);
            prop_assert_eq!(out.accepted, r.selected == r.nominal);
            prop_assert_eq!(make_decision(&r.state, r.nominal).unwrap(), r.clone());
        }
        let ticks: Vec<u64> = s.trace().records().iter().map(|r| r.tick).collect();
        prop_assert!(ticks.windows(2).all(|w| w[1] == w[0] + 1));
        prop_assert!(hrc_explain::trace::verify(s.trace()).iter().all(|c| c.passed()));
    }
}
