//! Append-only decision trace and its `.trace.jsonl` file format.
//!
//! Line 1 is a header `{params, params_hash, schema_version, session_id}`.
//! Every following line is one decision record with keys `active`,
//! `digest`, `nominal`, `selected`, `state`, `tick`. All objects are written
//! with sorted keys. Schema version 1 fixes two hashes:
//!
//! * `params_hash`: hex SHA-256 of the sorted-key JSON of the parameters.
//! * `digest`: hex SHA-256 of `<previous digest>\n<record JSON without the
//!   digest key>`, where the first record chains from `params_hash`. Editing
//!   any value inside a record breaks that record's digest and only that
//!   record's.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::safety::{DecisionRecord, SafetyParams};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TraceError {
    #[error("record tick {got} does not follow last tick {last}")]
    Ordering { last: u64, got: u64 },
    #[error("safety envelope violation{}: params hash {found} does not match {expected}", line_suffix(*line))]
    Envelope {
        expected: String,
        found: String,
        line: Option<usize>,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

fn line_suffix(line: Option<usize>) -> String {
    line.map(|l| format!(" at line {l}")).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub session_id: String,
    pub params: SafetyParams,
    pub params_hash: String,
    pub schema_version: u32,
}

/// Ordered decision records of one session, bound to one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    session_id: String,
    params: Arc<SafetyParams>,
    params_hash: String,
    records: Vec<DecisionRecord>,
    digests: Vec<String>,
}

impl Trace {
    pub fn new(session_id: impl Into<String>, params: Arc<SafetyParams>) -> Self {
        let params_hash = params.content_hash();
        Self {
            session_id: session_id.into(),
            params,
            params_hash,
            records: Vec::new(),
            digests: Vec::new(),
        }
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn params(&self) -> &Arc<SafetyParams> {
        &self.params
    }

    pub fn params_hash(&self) -> &str {
        &self.params_hash
    }

    pub fn records(&self) -> &[DecisionRecord] {
        &self.records
    }

    /// Stored chain digest of each record, parallel to `records()`.
    pub fn digests(&self) -> &[String] {
        &self.digests
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn header(&self) -> TraceHeader {
        TraceHeader {
            session_id: self.session_id.clone(),
            params: (*self.params).clone(),
            params_hash: self.params_hash.clone(),
            schema_version: SCHEMA_VERSION,
        }
    }

    fn check_envelope(&self, record: &DecisionRecord, line: Option<usize>) -> Result<(), TraceError> {
        let params = &record.state.params;
        if Arc::ptr_eq(params, &self.params) || **params == *self.params {
            return Ok(());
        }
        Err(TraceError::Envelope {
            expected: self.params_hash.clone(),
            found: params.content_hash(),
            line,
        })
    }

    /// Appends a record after checking tick order and the parameter
    /// envelope. Existing records are never touched.
    pub fn append(&mut self, mut record: DecisionRecord) -> Result<(), TraceError> {
        if let Some(last) = self.records.last() {
            if record.tick <= last.tick {
                return Err(TraceError::Ordering {
                    last: last.tick,
                    got: record.tick,
                });
            }
        }
        self.check_envelope(&record, None)?;
        record.state.params = self.params.clone();
        let prev = self.digests.last().unwrap_or(&self.params_hash);
        let digest = chain_digest(prev, &record_body(&record));
        self.records.push(record);
        self.digests.push(digest);
        Ok(())
    }

    /// Exact-tick lookup.
    pub fn get_at(&self, tick: u64) -> Option<&DecisionRecord> {
        self.records
            .binary_search_by_key(&tick, |r| r.tick)
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn latest(&self) -> Option<&DecisionRecord> {
        self.records.last()
    }

    /// Records with `from <= tick <= to`.
    pub fn range(&self, from: Option<u64>, to: Option<u64>) -> &[DecisionRecord] {
        let lo = from.map_or(0, |f| self.records.partition_point(|r| r.tick < f));
        let hi = to.map_or(self.records.len(), |t| self.records.partition_point(|r| r.tick <= t));
        if lo >= hi {
            &[]
        } else {
            &self.records[lo..hi]
        }
    }

    /// Recorded ticks closest to `tick`, for diagnostics.
    pub fn nearest_ticks(&self, tick: i64) -> Vec<u64> {
        let mut ticks: Vec<u64> = self.records.iter().map(|r| r.tick).collect();
        ticks.sort_by_key(|t| ((*t as i64) - tick).unsigned_abs());
        ticks.truncate(3);
        ticks.sort_unstable();
        ticks
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut out = canonical(&serde_json::to_value(self.header()).expect("header serializes"));
        out.push('\n');
        for (record, digest) in self.records.iter().zip(&self.digests) {
            let mut value = serde_json::to_value(record).expect("record serializes");
            value
                .as_object_mut()
                .expect("record is an object")
                .insert("digest".into(), Value::String(digest.clone()));
            out.push_str(&canonical(&value));
            out.push('\n');
        }
        out.into_bytes()
    }

    /// Parses a trace file. Checks structure, tick order and the parameter
    /// envelope; record digests are kept as stored and checked by
    /// [`verify`].
    pub fn deserialize(bytes: &[u8]) -> Result<Trace, TraceError> {
        let text = std::str::from_utf8(bytes).map_err(|e| TraceError::Malformed {
            line: 1,
            message: format!("not UTF-8: {e}"),
        })?;
        let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l));
        let (_, first) = lines.next().ok_or(TraceError::Malformed {
            line: 1,
            message: "missing header".into(),
        })?;
        let header: TraceHeader = serde_json::from_str(first).map_err(|e| TraceError::Malformed {
            line: 1,
            message: format!("bad header: {e}"),
        })?;
        if header.schema_version != SCHEMA_VERSION {
            return Err(TraceError::Malformed {
                line: 1,
                message: format!("unsupported schema_version {}", header.schema_version),
            });
        }
        let actual = header.params.content_hash();
        if actual != header.params_hash {
            return Err(TraceError::Envelope {
                expected: header.params_hash,
                found: actual,
                line: Some(1),
            });
        }
        let mut trace = Trace {
            session_id: header.session_id,
            params: Arc::new(header.params),
            params_hash: header.params_hash,
            records: Vec::new(),
            digests: Vec::new(),
        };

        let all: Vec<(usize, &str)> = lines.collect();
        let count = all.len();
        for (i, (line, raw)) in all.into_iter().enumerate() {
            if raw.is_empty() && i + 1 == count {
                break;
            }
            let malformed = |message: String| TraceError::Malformed { line, message };
            let mut value: Value =
                serde_json::from_str(raw).map_err(|e| malformed(format!("invalid JSON: {e}")))?;
            let digest = match value.as_object_mut().and_then(|o| o.remove("digest")) {
                Some(Value::String(d)) => d,
                _ => return Err(malformed("missing string field `digest`".into())),
            };
            let mut record: DecisionRecord = serde_path_to_error::deserialize(value)
                .map_err(|e| malformed(format!("field `{}`: {}", e.path(), e.inner())))?;
            if let Some(last) = trace.records.last() {
                if record.tick <= last.tick {
                    return Err(malformed(format!(
                        "tick {} does not follow last tick {}",
                        record.tick, last.tick
                    )));
                }
            }
            trace.check_envelope(&record, Some(line))?;
            record.state.params = trace.params.clone();
            trace.records.push(record);
            trace.digests.push(digest);
        }
        Ok(trace)
    }
}

/// Sorted-key compact JSON.
fn canonical(value: &Value) -> String {
    // serde_json's default map type is ordered by key.
    serde_json::to_string(value).expect("json value serializes")
}

fn record_body(record: &DecisionRecord) -> String {
    canonical(&serde_json::to_value(record).expect("record serializes"))
}

fn chain_digest(prev: &str, body: &str) -> String {
    let mut h = Sha256::new();
    h.update(prev.as_bytes());
    h.update(b"\n");
    h.update(body.as_bytes());
    hex::encode(h.finalize())
}

/// Outcome of re-certifying one record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordCheck {
    pub tick: u64,
    /// 1-based line in the trace file.
    pub line: usize,
    pub error: Option<String>,
}

impl RecordCheck {
    pub fn passed(&self) -> bool {
        self.error.is_none()
    }
}

/// Re-certifies every record: the digest chain must match and re-running
/// evaluation and arbitration on the stored state must reproduce the stored
/// active set and selection.
pub fn verify(trace: &Trace) -> Vec<RecordCheck> {
    let mut prev = trace.params_hash.as_str();
    trace
        .records
        .iter()
        .zip(&trace.digests)
        .enumerate()
        .map(|(i, (record, stored))| {
            let expected = chain_digest(prev, &record_body(record));
            prev = stored;
            let error = if expected != *stored {
                Some("digest mismatch: record content was altered".to_string())
            } else {
                record.recheck().err()
            };
            RecordCheck {
                tick: record.tick,
                line: i + 2,
                error,
            }
        })
        .collect()
}
