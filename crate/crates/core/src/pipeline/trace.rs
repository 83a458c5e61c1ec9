use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{ComposedAnswer, Finding};
use crate::ingest::ChunkId;
use crate::providers::{LanguageModel, ProviderError, Role};
use crate::retrieval::Candidate;
use crate::taxonomy::StructuredOutput;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Classify,
    Decompose,
    Retrieve,
    Gate,
    Refine,
    Research,
    Supervise,
    Taxonomy,
    /// One model call, emitted just before the stage event that used it.
    Llm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub run_id: String,
    pub seq: u64,
    pub stage: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_id: Option<String>,
    /// Filled in by whoever persists the trace; the core has no clock.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    pub payload: Value,
}

/// A model call as recorded in the trace. Exactly one of `response` and
/// `error` is set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmCall {
    pub role: Role,
    pub trace_id: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Calls the model and records the exchange, successful or not.
pub fn call_model(
    model: &dyn LanguageModel,
    role: Role,
    prompt: String,
    trace_id: String,
    calls: &mut Vec<LlmCall>,
) -> Result<String, ProviderError> {
    let result = model.complete(role, &prompt, &trace_id);
    let (response, error) = match &result {
        Ok(r) => (Some(r.clone()), None),
        Err(e) => (None, Some(e.to_string())),
    };
    calls.push(LlmCall { role, trace_id, prompt, response, error });
    result
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("malformed trace event {seq}: {reason}")]
    Malformed { seq: u64, reason: String },
    #[error("provenance broken: {0}")]
    Provenance(String),
    #[error("trace grammar violated: {0}")]
    Grammar(String),
}

fn payload<T: for<'de> Deserialize<'de>>(event: &TraceEvent, field: Option<&str>) -> Result<T, TraceError> {
    let value = match field {
        Some(f) => event.payload.get(f).cloned().unwrap_or(Value::Null),
        None => event.payload.clone(),
    };
    serde_json::from_value(value).map_err(|e| TraceError::Malformed { seq: event.seq, reason: e.to_string() })
}

/// Re-derives the provenance chain from the trace alone: every cited chunk
/// was retained by a gate event of the same sub-query, every answer
/// citation comes from a research finding, every structured-output value
/// cites a chunk of the answer, and every chunk resolves in the store.
/// Returns the number of citations checked.
pub fn verify_provenance(events: &[TraceEvent], resolves: impl Fn(&ChunkId) -> bool) -> Result<usize, TraceError> {
    let mut retained: BTreeMap<String, BTreeSet<ChunkId>> = BTreeMap::new();
    let mut researched: BTreeSet<(String, ChunkId)> = BTreeSet::new();
    let mut answered: BTreeSet<ChunkId> = BTreeSet::new();
    let mut checked = 0;
    let unresolved = |id: &ChunkId| TraceError::Provenance(format!("chunk {id} does not resolve"));

    for e in events {
        match e.stage {
            Stage::Gate => {
                let sub = e.sub_id.clone().unwrap_or_default();
                let cands: Vec<Candidate> = payload(e, Some("candidates"))?;
                let set = retained.entry(sub).or_default();
                set.extend(cands.into_iter().filter(|c| c.retained == Some(true)).map(|c| c.chunk_id));
            }
            Stage::Research => {
                let finding: Finding = payload(e, None)?;
                let ok = retained.get(&finding.sub_id);
                for ev in &finding.evidence {
                    if !ok.is_some_and(|s| s.contains(&ev.chunk_id)) {
                        return Err(TraceError::Provenance(format!(
                            "{} cites {} which its gate did not retain",
                            finding.sub_id, ev.chunk_id
                        )));
                    }
                    if !resolves(&ev.chunk_id) {
                        return Err(unresolved(&ev.chunk_id));
                    }
                    researched.insert((finding.sub_id.clone(), ev.chunk_id.clone()));
                    checked += 1;
                }
            }
            Stage::Supervise => {
                let answer: ComposedAnswer = payload(e, None)?;
                for f in answer.sections.iter().flat_map(|s| &s.findings) {
                    for ev in &f.evidence {
                        if !researched.contains(&(f.sub_id.clone(), ev.chunk_id.clone())) {
                            return Err(TraceError::Provenance(format!(
                                "answer cites {} for {} without a research finding",
                                ev.chunk_id, f.sub_id
                            )));
                        }
                        answered.insert(ev.chunk_id.clone());
                        checked += 1;
                    }
                }
            }
            Stage::Taxonomy => {
                let out: StructuredOutput = payload(e, None)?;
                for (field, v) in &out.values {
                    for id in &v.provenance {
                        if !answered.contains(id) {
                            return Err(TraceError::Provenance(format!("field {field} cites {id} outside the answer")));
                        }
                        if !resolves(id) {
                            return Err(unresolved(id));
                        }
                        checked += 1;
                    }
                }
            }
            _ => {}
        }
    }
    Ok(checked)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum SubState {
    Start,
    Retrieved,
    Gated,
    Refined,
    Done,
}

/// Checks sequence numbers, stage counts, unique trace ids and the
/// per-sub-query pattern retrieve → gate → (refine → retrieve → gate)* →
/// research.
pub fn check_trace_grammar(events: &[TraceEvent]) -> Result<(), TraceError> {
    let err = |m: String| Err(TraceError::Grammar(m));
    for pair in events.windows(2) {
        if pair[1].seq <= pair[0].seq {
            return err(format!("seq {} follows {}", pair[1].seq, pair[0].seq));
        }
    }
    let count = |s: Stage| events.iter().filter(|e| e.stage == s).count();
    if count(Stage::Classify) == 0 {
        return err("no classify event".into());
    }
    if count(Stage::Supervise) != 1 {
        return err(format!("{} supervise events", count(Stage::Supervise)));
    }
    let mut ids = BTreeSet::new();
    for e in events.iter().filter(|e| e.stage == Stage::Llm) {
        match &e.trace_id {
            Some(id) if ids.insert(id.clone()) => {}
            Some(id) => return err(format!("trace id {id} recorded twice")),
            None => return err(format!("llm event {} has no trace id", e.seq)),
        }
    }

    let mut subs: BTreeMap<&str, SubState> = BTreeMap::new();
    for e in events {
        if !matches!(e.stage, Stage::Retrieve | Stage::Gate | Stage::Refine | Stage::Research) {
            continue;
        }
        let Some(sub) = e.sub_id.as_deref() else {
            return err(format!("{:?} event {} has no sub_id", e.stage, e.seq));
        };
        let state = subs.entry(sub).or_insert(SubState::Start);
        *state = match (*state, e.stage) {
            (SubState::Start | SubState::Refined, Stage::Retrieve) => SubState::Retrieved,
            (SubState::Retrieved, Stage::Gate) => SubState::Gated,
            (SubState::Gated, Stage::Refine) => SubState::Refined,
            (SubState::Gated, Stage::Research) => SubState::Done,
            (_, stage) => return err(format!("unexpected {stage:?} for {sub} at seq {}", e.seq)),
        };
    }
    if let Some((sub, _)) = subs.iter().find(|(_, s)| **s != SubState::Done) {
        return err(format!("{sub} never reached research"));
    }
    if let Some(sup) = events.iter().find(|e| e.stage == Stage::Supervise) {
        if events.iter().any(|e| e.seq > sup.seq && matches!(e.stage, Stage::Retrieve | Stage::Gate | Stage::Research))
        {
            return err("branch activity after supervise".to_string());
        }
    }
    Ok(())
}
