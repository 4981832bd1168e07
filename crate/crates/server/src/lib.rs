//! HTTP and SSE front end for dialogue sessions.
//!
//! | Method | Path | Body |
//! |---|---|---|
//! | POST | `/sessions` | `{"scenario"?: toml string or object}` |
//! | POST | `/sessions/{id}/tick` | `{"n"?: u64}` |
//! | POST | `/sessions/{id}/ask` | `{"text": ...}` or `{"structured": ...}` |
//! | POST | `/sessions/{id}/command` | `{"behavior"?: "continue" or "manual_follow"}` |
//! | POST | `/sessions/{id}/mode` | `{"mode": "manual" or "running" or "paused"}` |
//! | GET | `/sessions/{id}/state` | |
//! | GET | `/sessions/{id}/trace?from=&to=` | |
//! | GET | `/sessions/{id}/stream` | server-sent events |
//!
//! Errors use the envelope `{"error": {"code", "message", "detail_path"}}`.

mod error;

use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use hrc_explain::explain::Explanation;
use hrc_explain::safety::{Behavior, ConstraintId, DecisionRecord, SafetyState};
use hrc_explain::session::{RunStatus, Session};
use hrc_explain::sim::{load_scenario, Scenario, ScenarioDoc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::{broadcast, Mutex, RwLock};
use tokio_stream::wrappers::errors::BroadcastStreamRecvError;
use tokio_stream::wrappers::BroadcastStream;
use tokio_stream::{Stream, StreamExt};

pub use error::ApiError;

const STREAM_CAPACITY: usize = 256;

/// Upper bound on ticks per `/tick` request.
pub const MAX_TICKS_PER_REQUEST: u64 = 10_000;

/// One server-sent event. The SSE event name is the `type` tag.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamEvent {
    Decision {
        tick: u64,
        state: SafetyState,
        nominal: Behavior,
        selected: Behavior,
        active: Vec<ConstraintId>,
    },
    Explanation {
        explanation: Explanation,
    },
    Status {
        tick: u64,
        status: RunStatus,
    },
}

impl StreamEvent {
    fn decision(r: &DecisionRecord) -> Self {
        StreamEvent::Decision {
            tick: r.tick,
            state: r.state.clone(),
            nominal: r.nominal,
            selected: r.selected,
            active: r.active.iter().map(|c| c.id).collect(),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            StreamEvent::Decision { .. } => "decision",
            StreamEvent::Explanation { .. } => "explanation",
            StreamEvent::Status { .. } => "status",
        }
    }
}

struct Slot {
    session: Mutex<Session>,
    events: broadcast::Sender<StreamEvent>,
    autorun: std::sync::Mutex<Option<tokio::task::JoinHandle<()>>>,
}

impl Slot {
    fn publish(&self, event: StreamEvent) {
        // No subscribers is fine.
        let _ = self.events.send(event);
    }
}

impl Drop for Slot {
    fn drop(&mut self) {
        if let Some(h) = self.autorun.lock().unwrap().take() {
            h.abort();
        }
    }
}

#[derive(Default)]
pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
    next_id: AtomicU64,
}

type Shared = Arc<AppState>;

pub fn app() -> Router {
    app_with(Arc::new(AppState::default()))
}

pub fn app_with(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/tick", post(tick))
        .route("/sessions/{id}/ask", post(ask))
        .route("/sessions/{id}/command", post(command))
        .route("/sessions/{id}/mode", post(set_mode))
        .route("/sessions/{id}/state", get(get_state))
        .route("/sessions/{id}/trace", get(get_trace))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(state)
}

fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    let slice: &[u8] = if bytes.iter().all(u8::is_ascii_whitespace) {
        b"{}"
    } else {
        bytes
    };
    let de = &mut serde_json::Deserializer::from_slice(slice);
    serde_path_to_error::deserialize(de).map_err(ApiError::bad_body)
}

async fn slot(state: &AppState, id: &str) -> Result<Arc<Slot>, ApiError> {
    state.sessions.read().await.get(id).cloned().ok_or_else(|| ApiError::not_found(id))
}

fn snapshot(session: &Session) -> Value {
    let scenario = session.scenario();
    json!({
        "session_id": session.id(),
        "scenario": scenario.name,
        "tick": session.world().tick(),
        "horizon": scenario.horizon,
        "status": session.status(),
        "stop_held": session.stop_held(),
        "params": scenario.params,
        "params_hash": session.trace().params_hash(),
        "state": session.world().snapshot(scenario),
        "latest": session.trace().latest(),
        "memory": session.memory(),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    scenario: Option<Value>,
}

fn scenario_from(value: Option<Value>) -> Result<Scenario, ApiError> {
    match value {
        None | Some(Value::Null) => Ok(Scenario::beam_transport()),
        Some(Value::String(text)) => Ok(load_scenario(&text)?),
        Some(v @ Value::Object(_)) => {
            let doc: ScenarioDoc = serde_path_to_error::deserialize(v).map_err(|e| {
                let path = e.path().to_string();
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_scenario", e.into_inner().to_string())
                    .at(if path == "." { "scenario".into() } else { format!("scenario.{path}") })
            })?;
            Ok(Scenario::from_doc(doc)?)
        }
        Some(_) => Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid_body",
            "scenario must be a TOML string or an object",
        )
        .at("scenario")),
    }
}

async fn create_session(State(app): State<Shared>, bytes: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: CreateBody = body(&bytes)?;
    let scenario = scenario_from(req.scenario)?;
    let id = format!("s{}", app.next_id.fetch_add(1, Ordering::Relaxed) + 1);
    let session = Session::new(id.clone(), Arc::new(scenario));
    let out = json!({
        "session_id": id,
        "scenario": session.scenario().name,
        "horizon": session.scenario().horizon,
        "tick_duration": session.scenario().tick_duration,
        "params": session.scenario().params,
        "params_hash": session.trace().params_hash(),
        "status": session.status(),
    });
    let (events, _) = broadcast::channel(STREAM_CAPACITY);
    let slot = Arc::new(Slot {
        session: Mutex::new(session),
        events,
        autorun: std::sync::Mutex::new(None),
    });
    app.sessions.write().await.insert(id, slot);
    Ok((StatusCode::CREATED, Json(out)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TickBody {
    #[serde(default = "one")]
    n: u64,
}

fn one() -> u64 {
    1
}

async fn tick(State(app): State<Shared>, Path(id): Path<String>, bytes: Bytes) -> Result<Json<Value>, ApiError> {
    let req: TickBody = body(&bytes)?;
    if req.n > MAX_TICKS_PER_REQUEST {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid_body",
            format!("n must be at most {MAX_TICKS_PER_REQUEST}"),
        )
        .at("n"));
    }
    let slot = slot(&app, &id).await?;
    let mut session = slot.session.lock().await;
    let was = session.status();
    let records = session.run(req.n)?;
    for r in &records {
        slot.publish(StreamEvent::decision(r));
    }
    if session.status() != was {
        slot.publish(StreamEvent::Status {
            tick: session.world().tick(),
            status: session.status(),
        });
    }
    Ok(Json(json!({
        "records": records,
        "tick": session.world().tick(),
        "status": session.status(),
    })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AskBody {
    text: Option<String>,
    structured: Option<Value>,
}

async fn ask(State(app): State<Shared>, Path(id): Path<String>, bytes: Bytes) -> Result<Json<Explanation>, ApiError> {
    let req: AskBody = body(&bytes)?;
    let slot = slot(&app, &id).await?;
    let mut session = slot.session.lock().await;
    let e = match (req.text, req.structured) {
        (Some(text), None) => session.ask_text(&text)?,
        (None, Some(value)) => session.ask_structured(&value)?,
        _ => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "invalid_body",
                "give exactly one of `text` or `structured`",
            ))
        }
    };
    slot.publish(StreamEvent::Explanation { explanation: e.clone() });
    Ok(Json(e))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CommandBody {
    behavior: Option<String>,
}

async fn command(State(app): State<Shared>, Path(id): Path<String>, bytes: Bytes) -> Result<Json<Value>, ApiError> {
    let req: CommandBody = body(&bytes)?;
    let behavior = match req.behavior {
        Some(name) => Some(
            name.parse::<Behavior>()
                .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", e.to_string()).at("behavior"))?,
        ),
        None => None,
    };
    let slot = slot(&app, &id).await?;
    let mut session = slot.session.lock().await;
    let outcome = session.command(behavior)?;
    slot.publish(StreamEvent::decision(&outcome.record));
    slot.publish(StreamEvent::Explanation {
        explanation: outcome.explanation.clone(),
    });
    if session.status() == RunStatus::Finished {
        slot.publish(StreamEvent::Status {
            tick: session.world().tick(),
            status: RunStatus::Finished,
        });
    }
    Ok(Json(serde_json::to_value(outcome).expect("outcome serializes")))
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum Mode {
    /// Ticks advance only through `/tick` and `/command`.
    Manual,
    /// Ticks advance in real time at the scenario tick duration.
    Running,
    /// Nothing advances until the mode changes.
    Paused,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeBody {
    mode: Mode,
}

async fn set_mode(State(app): State<Shared>, Path(id): Path<String>, bytes: Bytes) -> Result<Json<Value>, ApiError> {
    let req: ModeBody = body(&bytes)?;
    let slot = slot(&app, &id).await?;
    let mut session = slot.session.lock().await;
    let status = match req.mode {
        Mode::Manual => RunStatus::Idle,
        Mode::Running => RunStatus::Running,
        Mode::Paused => RunStatus::PausedByUser,
    };
    session.set_status(status);
    let status = session.status();
    let mut handle = slot.autorun.lock().unwrap();
    if status == RunStatus::Running && handle.as_ref().is_none_or(|h| h.is_finished()) {
        let period = Duration::from_secs_f64(session.scenario().tick_duration);
        *handle = Some(tokio::spawn(autorun(Arc::downgrade(&slot), period)));
    }
    drop(handle);
    slot.publish(StreamEvent::Status {
        tick: session.world().tick(),
        status,
    });
    Ok(Json(json!({ "status": status, "tick": session.world().tick() })))
}

async fn autorun(slot: std::sync::Weak<Slot>, period: Duration) {
    let mut interval = tokio::time::interval(period);
    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    interval.tick().await;
    loop {
        interval.tick().await;
        let Some(slot) = slot.upgrade() else { return };
        let mut session = slot.session.lock().await;
        if session.status() != RunStatus::Running {
            return;
        }
        match session.tick() {
            Ok(Some(r)) => slot.publish(StreamEvent::decision(&r)),
            Ok(None) => {}
            Err(_) => {
                session.set_status(RunStatus::PausedByUser);
            }
        }
        if session.status() != RunStatus::Running {
            slot.publish(StreamEvent::Status {
                tick: session.world().tick(),
                status: session.status(),
            });
            return;
        }
    }
}

async fn get_state(State(app): State<Shared>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let slot = slot(&app, &id).await?;
    let session = slot.session.lock().await;
    Ok(Json(snapshot(&session)))
}

fn tick_param(params: &HashMap<String, String>, key: &str) -> Result<Option<u64>, ApiError> {
    params
        .get(key)
        .map(|v| {
            v.parse::<u64>().map_err(|e| {
                ApiError::new(StatusCode::BAD_REQUEST, "invalid_query_param", format!("{key}={v:?}: {e}")).at(key)
            })
        })
        .transpose()
}

async fn get_trace(
    State(app): State<Shared>,
    Path(id): Path<String>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Json<Value>, ApiError> {
    let (from, to) = (tick_param(&params, "from")?, tick_param(&params, "to")?);
    let slot = slot(&app, &id).await?;
    let session = slot.session.lock().await;
    let trace = session.trace();
    Ok(Json(json!({
        "header": trace.header(),
        "records": trace.range(from, to),
    })))
}

fn sse(name: &str, data: &impl Serialize) -> Event {
    Event::default().event(name).json_data(data).expect("event serializes")
}

/// `snapshot` first, then `decision`, `explanation` and `status` events
/// in trace order. A slow reader that falls behind gets a `lagged` event
/// and should refetch `/state`.
async fn stream(
    State(app): State<Shared>,
    Path(id): Path<String>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let slot = slot(&app, &id).await?;
    // Subscribe before snapshotting so nothing falls in between; a reader
    // may see a tick both in the snapshot and as a decision event.
    let rx = slot.events.subscribe();
    let first = sse("snapshot", &snapshot(&*slot.session.lock().await));
    let live = BroadcastStream::new(rx).map(|item| {
        Ok(match item {
            Ok(event) => sse(event.name(), &event),
            Err(BroadcastStreamRecvError::Lagged(missed)) => sse("lagged", &json!({ "missed": missed })),
        })
    });
    let events = tokio_stream::once(Ok(first)).chain(live);
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}
