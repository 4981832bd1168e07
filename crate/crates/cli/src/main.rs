//! `hrc-explain`: headless runs, offline questions and trace verification.
//!
//! Exit codes: 0 success, 1 validation error (bad scenario, bad query,
//! unknown tick, unreadable input, a record that fails verification),
//! 2 runtime error (safety envelope violation, output write failure).
//!
//! Per-tick lines printed by `run` and `replay`:
//!
//! ```text
//! tick=0030 d=7.16m v=0.52 active=[visibility] selected=pause
//! ```

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use hrc_explain::explain::{explain, resolve_record, DialogueMemory};
use hrc_explain::query::{parse, parse_structured, GRAMMAR_HELP};
use hrc_explain::safety::{separation, DecisionRecord};
use hrc_explain::session::Session;
use hrc_explain::sim::{load_scenario_file, Scenario};
use hrc_explain::trace::{verify, Trace, TraceError};

#[derive(Parser)]
#[command(name = "hrc-explain", version, about = "Explainable safety controller for human-robot collaboration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and record its decision trace.
    Run {
        /// Scenario file; the bundled beam_transport scenario when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Number of ticks; the scenario horizon when omitted.
        #[arg(long)]
        ticks: Option<u64>,
        /// Where to write the `.trace.jsonl` file.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Print one JSON decision record per line instead of summaries.
        #[arg(long)]
        json: bool,
    },
    /// Ask a question about a recorded trace.
    Ask {
        #[arg(long)]
        trace: PathBuf,
        /// Tick to ask about; the latest record when omitted.
        #[arg(long, allow_negative_numbers = true)]
        at: Option<i64>,
        /// Query text such as "why" or "whatif worker back 1.0", or a
        /// structured query object.
        #[arg(long)]
        query: String,
        #[arg(long)]
        json: bool,
    },
    /// Print a trace, or with --verify re-certify every record.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        verify: bool,
        #[arg(long)]
        json: bool,
    },
    /// Check a scenario file and print it normalized.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

type Outcome = Result<(), Failure>;

fn summary(r: &DecisionRecord) -> String {
    let active: Vec<&str> = r.active.iter().map(|c| c.id.as_str()).collect();
    format!(
        "tick={:04} d={:.2}m v={:.2} active=[{}] selected={}",
        r.tick,
        separation(&r.state),
        r.state.worker_visibility(),
        active.join(","),
        r.selected
    )
}

fn json_line<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("value serializes")
}

fn write_out(out: &mut impl Write, line: &str) -> Outcome {
    writeln!(out, "{line}").map_err(|e| Failure::Runtime(format!("cannot write output: {e}")))
}

fn load_trace(path: &Path) -> Result<Trace, Failure> {
    let bytes =
        std::fs::read(path).map_err(|e| Failure::Validation(format!("cannot read trace {}: {e}", path.display())))?;
    Trace::deserialize(&bytes).map_err(|e| match e {
        TraceError::Envelope { .. } => Failure::Runtime(format!("{}: {e}", path.display())),
        other => Failure::Validation(format!("{}: {other}", path.display())),
    })
}

fn cmd_run(scenario: Option<PathBuf>, ticks: Option<u64>, trace: Option<PathBuf>, json: bool) -> Outcome {
    let scenario = match scenario {
        Some(p) => load_scenario_file(&p).map_err(|e| Failure::Validation(e.to_string()))?,
        None => Scenario::beam_transport(),
    };
    let n = ticks.unwrap_or(scenario.horizon);
    let mut session = Session::new(scenario.name.clone(), Arc::new(scenario));
    let records = session.run(n).map_err(|e| Failure::Runtime(e.to_string()))?;
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    for r in &records {
        let line = if json { json_line(r) } else { summary(r) };
        write_out(&mut out, &line)?;
    }
    out.flush().map_err(|e| Failure::Runtime(e.to_string()))?;
    if let Some(path) = trace {
        std::fs::write(&path, session.trace().serialize())
            .map_err(|e| Failure::Runtime(format!("cannot write trace {}: {e}", path.display())))?;
    }
    Ok(())
}

fn cmd_ask(trace: PathBuf, at: Option<i64>, query: String, json: bool) -> Outcome {
    let trace = load_trace(&trace)?;
    let text = query.trim();
    let mut ast = if text.starts_with('{') {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Failure::Validation(format!("structured query: {e}")))?;
        parse_structured(&value).map_err(|e| Failure::Validation(format!("structured query: {e}")))?
    } else {
        parse(text).map_err(|e| Failure::Validation(format!("{e}\n\n{GRAMMAR_HELP}")))?
    };
    if let Some(t) = at {
        match ast.at {
            Some(q) if q != t => {
                return Err(Failure::Validation(format!("--at {t} conflicts with `at {q}` in the query")))
            }
            _ => ast.at = Some(t),
        }
    }
    let record = resolve_record(&trace, ast.at).map_err(|e| Failure::Validation(e.to_string()))?;
    let (e, _) = explain(record, &ast, &DialogueMemory::new(trace.session_id()))
        .map_err(|e| Failure::Validation(e.to_string()))?;
    let mut out = std::io::stdout().lock();
    write_out(&mut out, &if json { json_line(&e) } else { e.text })
}

fn cmd_replay(path: PathBuf, check: bool, json: bool) -> Outcome {
    let trace = load_trace(&path)?;
    let mut out = std::io::BufWriter::new(std::io::stdout().lock());
    if !check {
        for r in trace.records() {
            write_out(&mut out, &if json { json_line(r) } else { summary(r) })?;
        }
        return out.flush().map_err(|e| Failure::Runtime(e.to_string()));
    }
    let checks = verify(&trace);
    let failed = checks.iter().filter(|c| !c.passed()).count();
    for c in &checks {
        let line = if json {
            json_line(c)
        } else {
            match &c.error {
                None => format!("tick={:04} line={} PASS", c.tick, c.line),
                Some(err) => format!("tick={:04} line={} FAIL {err}", c.tick, c.line),
            }
        };
        write_out(&mut out, &line)?;
    }
    out.flush().map_err(|e| Failure::Runtime(e.to_string()))?;
    if failed == 0 {
        eprintln!("verified {} records: all PASS", checks.len());
        Ok(())
    } else {
        Err(Failure::Validation(format!("{failed} of {} records FAIL", checks.len())))
    }
}

fn cmd_validate(path: PathBuf) -> Outcome {
    let scenario = load_scenario_file(&path).map_err(|e| Failure::Validation(e.to_string()))?;
    let mut out = std::io::stdout().lock();
    write!(out, "{}", scenario.to_toml()).map_err(|e| Failure::Runtime(e.to_string()))?;
    eprintln!("{}: OK", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run {
            scenario,
            ticks,
            trace,
            json,
        } => cmd_run(scenario, ticks, trace, json),
        Command::Ask { trace, at, query, json } => cmd_ask(trace, at, query, json),
        Command::Replay { trace, verify, json } => cmd_replay(trace, verify, json),
        Command::Validate { scenario } => cmd_validate(scenario),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Validation(msg) | Failure::Runtime(msg)) = &f;
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
