//! Acceptance gate: one PASS/FAIL line per criterion. Runs the library in
//! process and the `hrc-explain` binary for the trace and determinism
//! checks. Exits non-zero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::oracle;
use hrc_explain::explain::{answer_what_if, answer_why, answer_why_not, apply_delta, command_decision, command_explanation};
use hrc_explain::query::{parse, parse_structured};
use hrc_explain::safety::testing::state_with;
use hrc_explain::safety::{
    in_guidance_zone, make_decision, select_behavior, separation, ActiveConstraint, Behavior, ConstraintId,
    SafetyParams, Side,
};
use hrc_explain::session::Session;
use hrc_explain::sim::Scenario;
use hrc_explain::visibility::compute_visibility;
use rand::Rng;

/// Scripted tick at which the forklift cuts the line of sight.
const TRIGGER_TICK: u64 = 30;
const VISIBILITY_TOLERANCE: f64 = 0.005;
const RUNTIME_BUDGET: Duration = Duration::from_secs(5);

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hrc-explain"))
}

fn golden_trace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden/beam_transport.trace.jsonl")
}

fn session() -> Session {
    Session::new("acceptance", Arc::new(Scenario::beam_transport()))
}

fn episode_reproduction() -> Check {
    let start = Instant::now();
    let mut s = session();
    let records = s.run(u64::MAX).map_err(|e| e.to_string())?;
    let r = &records[(TRIGGER_TICK - 1) as usize];
    ensure(r.tick == TRIGGER_TICK, format!("record tick {}", r.tick))?;
    ensure(r.selected == Behavior::Pause, format!("selected {}", r.selected))?;
    ensure(r.active.len() == 1, format!("active {:?}", r.active))?;
    let c = &r.active[0];
    ensure(c.id == ConstraintId::Visibility, format!("active {}", c.id))?;
    let err = (c.measured - 0.52).abs();
    ensure(err <= VISIBILITY_TOLERANCE, format!("visibility {} off by {err}", c.measured))?;
    ensure(c.threshold == 0.60, format!("threshold {}", c.threshold))?;
    let why = s.ask_text(&format!("why at {TRIGGER_TICK}")).map_err(|e| e.to_string())?;
    ensure(
        why.cited.first().map(|c| c.id) == Some(ConstraintId::Visibility),
        format!("why cited {:?}", why.cited),
    )?;
    ensure(
        why.attribution.iter().any(|a| a == "forklift1"),
        format!("attribution {:?}", why.attribution),
    )?;
    let elapsed = start.elapsed();
    ensure(elapsed < RUNTIME_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!(
        "tick {TRIGGER_TICK} pause, visibility {:.4} < 0.60, attribution {:?}, full run {:.1} ms",
        c.measured,
        why.attribution,
        elapsed.as_secs_f64() * 1e3
    ))
}

fn proximity_rule() -> Check {
    for (d, expected) in [(1.4, Behavior::Stop), (1.6, Behavior::Continue), (1.5, Behavior::Continue)] {
        let r = make_decision(&state_with(d, 1.0), Behavior::Continue).map_err(|e| e.to_string())?;
        ensure(separation(&r.state) == d, format!("separation {}", separation(&r.state)))?;
        ensure(r.selected == expected, format!("d = {d}: selected {}", r.selected))?;
        let prox = r.constraint(ConstraintId::Proximity).is_some();
        ensure(prox == (d < 1.5), format!("d = {d}: proximity active = {prox}"))?;
    }
    Ok("1.4 m stop, 1.6 m continue, 1.5 m continue".into())
}

fn recovery_path() -> Check {
    let mut s = session();
    s.run(TRIGGER_TICK).map_err(|e| e.to_string())?;
    let pause = s.trace().latest().unwrap().clone();
    let e = s.ask_text("whatif guide right").map_err(|e| e.to_string())?;
    let verdict = e.verdict.map(|v| v.behavior);
    ensure(verdict == Some(Behavior::ManualFollow), format!("what-if verdict {verdict:?}"))?;

    // Worker 3 m away on the right side of the paused robot.
    let mut far = pause.state.clone();
    far.human.position = far.robot.position + far.robot.side_dir(Side::Right) * 3.0;
    far.env
        .visibility
        .insert("w1".into(), compute_visibility(&far.robot, &far.human, &far.env.occluders));
    let r = command_decision(&far, Behavior::ManualFollow).map_err(|e| e.to_string())?;
    let refusal = command_explanation(&r, Behavior::ManualFollow, false).map_err(|e| e.to_string())?;
    ensure(r.selected != Behavior::ManualFollow, "command accepted at 3 m")?;
    ensure(
        refusal.cited.iter().any(|c| c.id == ConstraintId::GuidanceZone),
        format!("refusal cited {:?}", refusal.cited),
    )?;

    // The live session: refused while the worker is still across the bay,
    // accepted once they stand in the zone.
    let early = s.command(Some(Behavior::ManualFollow)).map_err(|e| e.to_string())?;
    ensure(!early.accepted, "accepted with the worker far away")?;
    ensure(
        early.explanation.cited.first().map(|c| c.id) == Some(ConstraintId::GuidanceZone),
        format!("early refusal cited {:?}", early.explanation.cited),
    )?;
    s.run(135 - s.world().tick()).map_err(|e| e.to_string())?;
    let latest = s.trace().latest().unwrap();
    let d = separation(&latest.state);
    ensure(in_guidance_zone(&latest.state) && d <= 1.0, format!("worker not in zone (d = {d})"))?;
    let ok = s.command(Some(Behavior::ManualFollow)).map_err(|e| e.to_string())?;
    ensure(ok.accepted, format!("refused in zone: {}", ok.explanation.text))?;
    Ok(format!(
        "what-if manual_follow; refused at 3.00 m citing guidance_zone; accepted at tick {} with d = {d:.2} m",
        ok.record.tick
    ))
}

fn counterfactual_boundedness() -> Check {
    let mut rng = common::rng(0xC0FFEE);
    let (mut evaluated, mut rejected) = (0u32, 0u32);
    while evaluated < 10_000 {
        let r = common::record(&mut rng);
        let deltas = common::deltas(&mut rng, &r.state);
        let hash = r.params().content_hash();
        match answer_what_if(&r, &deltas) {
            Ok(e) => {
                let s2 = apply_delta(&r.state, &deltas).map_err(|e| e.to_string())?;
                ensure(s2.params.content_hash() == hash, "params hash changed in S'")?;
                let reported = e.verdict.unwrap().behavior;
                let expected = oracle::decide(&s2, r.nominal);
                ensure(reported == expected, format!("u' {reported} but re-evaluation gives {expected} for {deltas:?}"))?;
                evaluated += 1;
            }
            Err(_) => rejected += 1,
        }
        ensure(r.params().content_hash() == hash, "params hash changed")?;
    }
    Ok(format!("{evaluated} pairs consistent, {rejected} rejected deltas, 0 violations"))
}

fn arbitration_dominance() -> Check {
    let params = SafetyParams::default();
    let mut cases = 0;
    for mask in 0..8u8 {
        let ids: Vec<ConstraintId> = (0..3).filter(|b| mask & (1 << b) != 0).map(|b| ConstraintId::ALL[b]).collect();
        let active: Vec<ActiveConstraint> = ids
            .iter()
            .map(|id| ActiveConstraint {
                id: *id,
                measured: 0.0,
                threshold: 1.0,
                margin: -1.0,
                subjects: vec![],
            })
            .collect();
        for nominal in Behavior::ALL {
            let got = select_behavior(&active, nominal, &params, false);
            let want = oracle::select(&ids, nominal, &params, false);
            ensure(got == want, format!("{ids:?} with {nominal}: {got}, expected {want}"))?;
            cases += 1;
        }
    }
    ensure(cases == 40, format!("{cases} cases"))?;
    Ok("40 of 40 cases priority-maximal".into())
}

/// Bumps the `nth` number on `line` (1-based) by 0.25.
fn bump_number(lines: &mut [String], line: usize, nth: usize) {
    let target = lines[line - 1].clone();
    let b = target.as_bytes();
    let starts: Vec<usize> = (1..b.len())
        .filter(|&i| b[i].is_ascii_digit() && matches!(b[i - 1], b':' | b',' | b'[' | b'-'))
        .collect();
    let i = starts[nth % starts.len()];
    let mut j = i;
    while j < b.len() && (b[j].is_ascii_digit() || matches!(b[j], b'.' | b'e' | b'E' | b'-' | b'+')) {
        j += 1;
    }
    let old: f64 = target[i..j].parse().unwrap();
    lines[line - 1] = format!("{}{}{}", &target[..i], old + 0.25, &target[j..]);
}

fn trace_self_certification() -> Check {
    let golden = golden_trace();
    let o = bin().args(["replay", "--verify", "--trace"]).arg(&golden).output().map_err(|e| e.to_string())?;
    let out = String::from_utf8_lossy(&o.stdout);
    ensure(o.status.success(), "golden trace does not verify")?;
    let passes = out.lines().filter(|l| l.ends_with(" PASS")).count();
    ensure(passes == 200, format!("{passes} PASS lines"))?;

    let text = std::fs::read_to_string(&golden).map_err(|e| e.to_string())?;
    let lines: Vec<String> = text.lines().map(String::from).collect();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("tampered.trace.jsonl");
    let mut rng = common::rng(7);
    let (mut at_record, mut envelope) = (0, 0);
    for line in 2..=lines.len() {
        let mut edited = lines.clone();
        bump_number(&mut edited, line, rng.gen_range(0..10_000));
        std::fs::write(&path, edited.join("\n") + "\n").map_err(|e| e.to_string())?;
        let o = bin().args(["replay", "--verify", "--trace"]).arg(&path).output().map_err(|e| e.to_string())?;
        let out = String::from_utf8_lossy(&o.stdout);
        let err = String::from_utf8_lossy(&o.stderr);
        let fails: Vec<&str> = out.lines().filter(|l| l.contains(" FAIL")).collect();
        match o.status.code() {
            Some(2) if err.contains("envelope") => envelope += 1,
            Some(1) if fails.len() == 1 && fails[0].contains(&format!(" line={line} ")) => at_record += 1,
            Some(1) if fails.is_empty() && err.contains(&format!("line {line}:")) => at_record += 1,
            code => return Err(format!("edit on line {line}: exit {code:?}, failures {fails:?}, stderr {err}")),
        }
    }
    Ok(format!(
        "golden 200/200 PASS; {} single-number edits: {at_record} FAIL at the edited record, {envelope} envelope exits",
        lines.len() - 1
    ))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let path = dir.path().join(format!("{name}.trace.jsonl"));
        let o = bin().args(["run", "--trace"]).arg(&path).output().map_err(|e| e.to_string())?;
        ensure(o.status.success(), "run failed")?;
        outputs.push((o.stdout, std::fs::read(&path).map_err(|e| e.to_string())?));
    }
    ensure(outputs[0].1 == outputs[1].1, "trace files differ")?;
    ensure(outputs[0].0 == outputs[1].0, "stdout differs")?;
    let golden = std::fs::read(golden_trace()).map_err(|e| e.to_string())?;
    ensure(outputs[0].1 == golden, "trace differs from the committed golden file")?;
    Ok(format!("two runs byte-identical ({} bytes), equal to golden", golden.len()))
}

fn parser_totality() -> Check {
    let corpus: Vec<serde_json::Value> =
        serde_json::from_str(include_str!("../../core/tests/corpus/queries.json")).map_err(|e| e.to_string())?;
    ensure(corpus.len() >= 30, format!("corpus has {} pairs", corpus.len()))?;
    for pair in &corpus {
        let text = pair["text"].as_str().unwrap();
        let a = parse(text).map_err(|e| format!("{text:?}: {e}"))?;
        let b = parse_structured(&pair["structured"]).map_err(|e| format!("{text:?}: {e}"))?;
        ensure(a == b, format!("{text:?}: {a:?} vs {b:?}"))?;
        ensure(parse(&a.to_string()).ok() == Some(a.clone()), format!("{text:?} does not round-trip"))?;
    }
    let mut rng = common::rng(0xF00D);
    let (mut ok, mut diag) = (0, 0);
    let words = [
        "why", "not", "what", "if", "whatif", "worker", "to", "by", "back", "distance", "remove", "move", "it",
        "guide", "right", "left", "visibility", "was", "do", "follow", "resume", "at", "and", "continue", "manual",
        "pause", "stop", "1", "0.5", "-2", "(", ")", ",", "?", "forklift1", "1e999",
    ];
    for i in 0..100_000 {
        let s: String = if i % 2 == 0 {
            (0..rng.gen_range(0..32))
                .map(|_| match rng.gen_range(0..4) {
                    0 => char::from_u32(rng.gen_range(0..0x11000)).unwrap_or('?'),
                    _ => b"whynotifdoworkerbackguidemoveat 0123456789.,-()?"[rng.gen_range(0..48)] as char,
                })
                .collect()
        } else {
            (0..rng.gen_range(0..7)).map(|_| words[rng.gen_range(0..words.len())]).collect::<Vec<_>>().join(" ")
        };
        let result = catch_unwind(|| parse(&s)).map_err(|_| format!("parser panicked on {s:?}"))?;
        match result {
            Ok(_) => ok += 1,
            Err(e) => {
                ensure(!e.to_string().is_empty(), format!("empty diagnostic for {s:?}"))?;
                diag += 1;
            }
        }
    }
    Ok(format!("{} paired inputs agree; 100000 fuzz strings: {ok} parsed, {diag} diagnostics, 0 crashes", corpus.len()))
}

fn groundedness() -> Check {
    let mut rng = common::rng(0x6120);
    let mut citations = 0;
    for _ in 0..1_000 {
        let r = common::record(&mut rng);
        let why = answer_why(&r, None);
        for c in &why.cited {
            ensure(r.active.contains(c), format!("why cites {:?} outside record.active", c.id))?;
            citations += 1;
        }
        for alt in Behavior::ALL {
            let e = answer_why_not(&r, alt).map_err(|e| e.to_string())?;
            for c in &e.cited {
                let violated = match c.id {
                    ConstraintId::Proximity => oracle::too_close(&r.state),
                    ConstraintId::Visibility => oracle::too_occluded(&r.state),
                    ConstraintId::GuidanceZone => alt == Behavior::ManualFollow && !oracle::in_zone(&r.state),
                };
                ensure(violated, format!("why not {alt} cites {:?} which holds", c.id))?;
                citations += 1;
            }
        }
    }
    Ok(format!("1000 records, {citations} citations re-checked, 0 violations"))
}

fn main() {
    std::panic::set_hook(Box::new(|_| {}));
    let criteria: [Criterion; 9] = [
        ("episode reproduction", episode_reproduction),
        ("proximity rule", proximity_rule),
        ("recovery path", recovery_path),
        ("counterfactual boundedness", counterfactual_boundedness),
        ("arbitration dominance", arbitration_dominance),
        ("trace self-certification", trace_self_certification),
        ("determinism", determinism),
        ("parser totality and round-trip", parser_totality),
        ("explanation groundedness", groundedness),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
