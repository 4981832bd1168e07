//! Structured JSON form of a query, accepted by the HTTP API alongside text.
//!
//! ```json
//! {"type": "what_if", "deltas": [{"op": "worker_back", "meters": 1.0}], "at": 42}
//! ```

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::safety::{Behavior, ConstraintId, Side};

use super::{Query, QueryAst, Referent, StateDelta};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct WireError {
    /// Dotted path to the offending field, `.` for the root.
    pub path: String,
    pub message: String,
}

impl WireError {
    fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum WireQuery {
    Why {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<i64>,
    },
    #[serde(alias = "whynot")]
    WhyNot {
        behavior: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<i64>,
    },
    #[serde(alias = "whatif")]
    WhatIf {
        deltas: Vec<WireDelta>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<i64>,
    },
    Confirm {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        referent: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<i64>,
    },
    Command {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        behavior: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<i64>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum WireDelta {
    WorkerTo { x: f64, y: f64 },
    WorkerBy { dx: f64, dy: f64 },
    WorkerBack { meters: f64 },
    WorkerDistance { meters: f64 },
    Remove { id: String },
    Move { id: String, dx: f64, dy: f64 },
    Guide { side: Side },
    Visibility { value: f64 },
}

fn referent(raw: String, path: &str) -> Result<Referent, WireError> {
    if raw.is_empty() {
        return Err(WireError::at(path, "empty id"));
    }
    Ok(if raw.eq_ignore_ascii_case("it") {
        Referent::It
    } else {
        Referent::Entity(raw)
    })
}

fn referent_str(r: &Referent) -> String {
    r.to_string()
}

fn convert_delta(d: WireDelta, path: &str) -> Result<StateDelta, WireError> {
    Ok(match d {
        WireDelta::WorkerTo { x, y } => StateDelta::SetWorkerPosition { to: Vec2::new(x, y) },
        WireDelta::WorkerBy { dx, dy } => StateDelta::MoveWorkerBy { by: Vec2::new(dx, dy) },
        WireDelta::WorkerBack { meters } => StateDelta::MoveWorkerAway { meters },
        WireDelta::WorkerDistance { meters } => {
            if meters < 0.0 {
                return Err(WireError::at(format!("{path}.meters"), format!("distance {meters} is negative")));
            }
            StateDelta::SetWorkerDistance { meters }
        }
        WireDelta::Remove { id } => StateDelta::RemoveOccluder {
            id: referent(id, &format!("{path}.id"))?,
        },
        WireDelta::Move { id, dx, dy } => StateDelta::MoveOccluderBy {
            id: referent(id, &format!("{path}.id"))?,
            by: Vec2::new(dx, dy),
        },
        WireDelta::Guide { side } => StateDelta::EnterGuidanceZone { side },
        WireDelta::Visibility { value } => {
            if !(0.0..=1.0).contains(&value) {
                return Err(WireError::at(format!("{path}.value"), format!("visibility {value} is outside [0, 1]")));
            }
            StateDelta::SetVisibility { value }
        }
    })
}

fn behavior(raw: &str, path: &str) -> Result<Behavior, WireError> {
    raw.parse()
        .map_err(|_| WireError::at(path, format!("unknown behavior `{raw}`")))
}

/// Rewrites `{"<key>": "v", ...rest}` as `{"v": {...rest}}`, the shape serde
/// decodes with full field paths.
fn untag(value: &serde_json::Value, key: &str, path: &str) -> Result<(String, serde_json::Value), WireError> {
    let here = if path.is_empty() { ".".to_string() } else { path.to_string() };
    let obj = value
        .as_object()
        .ok_or_else(|| WireError::at(&here, "expected an object"))?;
    let field = if path.is_empty() { key.to_string() } else { format!("{path}.{key}") };
    let tag = match obj.get(key) {
        Some(serde_json::Value::String(t)) => t.clone(),
        Some(_) => return Err(WireError::at(field, "expected a string")),
        None => return Err(WireError::at(field, format!("missing field `{key}`"))),
    };
    let mut rest = obj.clone();
    rest.remove(key);
    Ok((tag.clone(), serde_json::json!({ tag: rest })))
}

/// Inverse of [`untag`].
fn retag(value: serde_json::Value, key: &str) -> serde_json::Value {
    match value {
        serde_json::Value::Object(obj) if obj.len() == 1 => {
            let (tag, body) = obj.into_iter().next().expect("one entry");
            let mut body = match body {
                serde_json::Value::Object(b) => b,
                _ => serde_json::Map::new(),
            };
            body.insert(key.to_string(), serde_json::Value::String(tag));
            serde_json::Value::Object(body)
        }
        other => other,
    }
}

/// Field path in the caller's shape: the synthetic variant keys that
/// [`untag`] introduced are dropped.
fn input_path(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    let mut variant_next = true;
    for seg in path.iter() {
        match seg {
            Segment::Map { key } if !variant_next => {
                if !out.is_empty() {
                    out.push('.');
                }
                out.push_str(key);
            }
            Segment::Seq { index } => {
                out.push_str(&format!("[{index}]"));
                // Each array element is itself a retagged delta.
                variant_next = true;
                continue;
            }
            _ => {}
        }
        variant_next = false;
    }
    if out.is_empty() {
        ".".into()
    } else {
        out
    }
}

/// Decodes the structured form into the same AST the text parser produces.
pub fn parse_structured(value: &serde_json::Value) -> Result<QueryAst, WireError> {
    let (tag, mut tree) = untag(value, "type", "")?;
    if let Some(deltas) = tree.get_mut(&tag).and_then(|b| b.get_mut("deltas")).and_then(|d| d.as_array_mut()) {
        for (i, d) in deltas.iter_mut().enumerate() {
            *d = untag(d, "op", &format!("deltas[{i}]"))?.1;
        }
    }
    let wire: WireQuery = serde_path_to_error::deserialize(&tree).map_err(|e| {
        WireError::at(input_path(e.path()), e.into_inner().to_string())
    })?;
    let (query, at) = match wire {
        WireQuery::Why { target, at } => {
            let target = match target {
                None => None,
                Some(t) => Some(
                    t.parse::<ConstraintId>()
                        .map_err(|_| WireError::at("target", format!("unknown constraint `{t}`")))?,
                ),
            };
            (Query::Why { target }, at)
        }
        WireQuery::WhyNot { behavior: b, at } => (
            Query::WhyNot {
                alternative: behavior(&b, "behavior")?,
            },
            at,
        ),
        WireQuery::WhatIf { deltas, at } => {
            if deltas.is_empty() {
                return Err(WireError::at("deltas", "at least one delta is required"));
            }
            let deltas = deltas
                .into_iter()
                .enumerate()
                .map(|(i, d)| convert_delta(d, &format!("deltas[{i}]")))
                .collect::<Result<_, _>>()?;
            (Query::WhatIf { deltas }, at)
        }
        WireQuery::Confirm { referent: r, at } => {
            let referent = match r {
                None => Referent::It,
                Some(r) => referent(r, "referent")?,
            };
            (Query::Confirm { referent }, at)
        }
        WireQuery::Command { behavior: b, at } => {
            let behavior = match b {
                None => None,
                Some(b) => match behavior(&b, "behavior")? {
                    c @ (Behavior::Continue | Behavior::ManualFollow) => Some(c),
                    other => {
                        return Err(WireError::at(
                            "behavior",
                            format!("`{other}` cannot be commanded; use continue or manual_follow"),
                        ))
                    }
                },
            };
            (Query::Command { behavior }, at)
        }
    };
    Ok(QueryAst { query, at })
}

/// Canonical structured form of an AST.
pub fn to_structured(ast: &QueryAst) -> serde_json::Value {
    let at = ast.at;
    let wire = match &ast.query {
        Query::Why { target } => WireQuery::Why {
            target: target.map(|t| t.as_str().to_string()),
            at,
        },
        Query::WhyNot { alternative } => WireQuery::WhyNot {
            behavior: alternative.as_str().to_string(),
            at,
        },
        Query::WhatIf { deltas } => WireQuery::WhatIf {
            deltas: deltas
                .iter()
                .map(|d| match d {
                    StateDelta::SetWorkerPosition { to } => WireDelta::WorkerTo { x: to.x, y: to.y },
                    StateDelta::MoveWorkerBy { by } => WireDelta::WorkerBy { dx: by.x, dy: by.y },
                    StateDelta::MoveWorkerAway { meters } => WireDelta::WorkerBack { meters: *meters },
                    StateDelta::SetWorkerDistance { meters } => WireDelta::WorkerDistance { meters: *meters },
                    StateDelta::RemoveOccluder { id } => WireDelta::Remove { id: referent_str(id) },
                    StateDelta::MoveOccluderBy { id, by } => WireDelta::Move {
                        id: referent_str(id),
                        dx: by.x,
                        dy: by.y,
                    },
                    StateDelta::EnterGuidanceZone { side } => WireDelta::Guide { side: *side },
                    StateDelta::SetVisibility { value } => WireDelta::Visibility { value: *value },
                })
                .collect(),
            at,
        },
        Query::Confirm { referent } => WireQuery::Confirm {
            referent: Some(referent_str(referent)),
            at,
        },
        Query::Command { behavior } => WireQuery::Command {
            behavior: behavior.map(|b| b.as_str().to_string()),
            at,
        },
    };
    let mut out = retag(serde_json::to_value(wire).expect("wire query serializes"), "type");
    if let Some(deltas) = out.get_mut("deltas").and_then(|d| d.as_array_mut()) {
        for d in deltas.iter_mut() {
            *d = retag(d.take(), "op");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn decodes_what_if() {
        let ast = parse_structured(&json!({
            "type": "what_if",
            "deltas": [{"op": "worker_back", "meters": 1.0}, {"op": "remove", "id": "it"}],
            "at": 7
        }))
        .unwrap();
        assert_eq!(ast, super::super::parse("what if worker back 1 and remove it at 7").unwrap());
    }

    #[test]
    fn errors_name_the_field() {
        let e = parse_structured(&json!({"type": "why_not", "behavior": "dance"})).unwrap_err();
        assert_eq!(e.path, "behavior");
        let e = parse_structured(&json!({"type": "what_if", "deltas": [
            {"op": "worker_back", "meters": 1.0},
            {"op": "visibility", "value": 2.0}
        ]}))
        .unwrap_err();
        assert_eq!(e.path, "deltas[1].value");
        let e = parse_structured(&json!({"type": "why", "extra": 1})).unwrap_err();
        assert!(e.message.contains("extra"), "{e}");
        let e = parse_structured(&json!({"type": "command", "behavior": "stop"})).unwrap_err();
        assert_eq!(e.path, "behavior");
        let e = parse_structured(&json!({"type": "what_if", "deltas": [{"op": "worker_back"}]})).unwrap_err();
        assert_eq!(e.path, "deltas[0]", "{e}");
        assert!(e.message.contains("meters"), "{e}");
        let e = parse_structured(&json!({"type": "what_if", "deltas": [{"op": "guide", "side": "up"}]})).unwrap_err();
        assert_eq!(e.path, "deltas[0].side", "{e}");
        let e = parse_structured(&json!({"type": "why_not", "behavior": 3})).unwrap_err();
        assert_eq!(e.path, "behavior", "{e}");
        let e = parse_structured(&json!({"type": "shrug"})).unwrap_err();
        assert!(e.message.contains("unknown variant"), "{e}");
        let e = parse_structured(&json!({"why": 1})).unwrap_err();
        assert_eq!(e.path, "type");
    }

    #[test]
    fn round_trip_through_structured() {
        let ast = super::super::parse("what if move forklift1 by 1,-2 and guide right at 3").unwrap();
        assert_eq!(parse_structured(&to_structured(&ast)).unwrap(), ast);
    }
}
