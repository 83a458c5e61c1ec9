use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::Serialize;

use super::{
    classify, decompose, refine_or_proceed, research, review_gate, supervise, ChunkStore, ComposedAnswer, Finding,
    LlmCall, PipelineConfig, PipelineError, QueryPlan, Refinement, Stage, SubQuery, SubQueryStatus, TraceEvent,
};
use crate::domain::{Domain, MoleculeId};
use crate::ingest::MoleculeRegistry;
use crate::providers::{Embedder, LanguageModel, Reranker};
use crate::retrieval::{fuse_dedup, Candidate, DenseIndex, LexicalIndex, MultiVectorIndex};
use crate::taxonomy::{compose, match_question_types, populate, SchemaLibrary, StructuredOutput};

/// Sealed, read-only inputs of a run.
pub struct Corpus<'a> {
    pub chunks: &'a dyn ChunkStore,
    pub lexical: &'a LexicalIndex,
    pub dense: &'a DenseIndex,
    pub multi: &'a MultiVectorIndex,
    pub registry: &'a MoleculeRegistry,
    pub library: &'a SchemaLibrary,
}

pub struct Providers<'a> {
    pub embedder: &'a dyn Embedder,
    pub reranker: &'a dyn Reranker,
    pub model: &'a dyn LanguageModel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunRequest {
    pub run_id: String,
    pub query: String,
    /// Inferred from the query when it names exactly one molecule.
    pub molecule_id: Option<MoleculeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub plan: QueryPlan,
    pub answer: ComposedAnswer,
    pub structured: StructuredOutput,
    pub trace: Vec<TraceEvent>,
}

struct Tracer<'c> {
    run_id: String,
    events: Vec<TraceEvent>,
    clock: &'c dyn Fn() -> Option<String>,
}

impl Tracer<'_> {
    fn emit(&mut self, stage: Stage, sub_id: Option<&str>, trace_id: Option<String>, payload: &impl Serialize) {
        let seq = self.events.len() as u64 + 1;
        self.events.push(TraceEvent {
            run_id: self.run_id.clone(),
            seq,
            stage,
            sub_id: sub_id.map(String::from),
            trace_id,
            timestamp: (self.clock)(),
            payload: serde_json::to_value(payload).expect("trace payload serializes"),
        });
    }

    fn flush(&mut self, calls: &mut Vec<LlmCall>, sub_id: Option<&str>) {
        for call in calls.drain(..) {
            let id = call.trace_id.clone();
            self.emit(Stage::Llm, sub_id, Some(id), &call);
        }
    }
}

#[derive(Serialize)]
struct ClassifyPayload<'a> {
    domains: &'a [Domain],
    question_types: &'a [String],
    classifier_source: super::ClassifierSource,
}

#[derive(Serialize)]
struct RetrievePayload<'a> {
    text: &'a str,
    attempt: u32,
    candidates: &'a [Candidate],
    #[serde(skip_serializing_if = "Vec::is_empty")]
    errors: Vec<String>,
}

#[derive(Serialize)]
struct GatePayload<'a> {
    attempt: u32,
    retained: usize,
    candidates: &'a [Candidate],
}

#[derive(Serialize)]
struct RefinePayload<'a> {
    from: &'a str,
    to: &'a str,
    attempt: u32,
}

fn retrieve(
    sub: &SubQuery,
    molecule: Option<&MoleculeId>,
    corpus: &Corpus,
    providers: &Providers,
    cfg: &PipelineConfig,
) -> (Vec<Candidate>, Vec<String>) {
    let accept = |id: &crate::ingest::ChunkId| {
        corpus.chunks.chunk(id).is_some_and(|c| {
            molecule.is_none_or(|m| c.molecule_ids.contains(m))
                && c.study_stage.domain().is_none_or(|d| d == sub.domain)
        })
    };
    let mut errors = Vec::new();
    let mut lists = Vec::with_capacity(3);
    match corpus.lexical.search_filtered(&sub.text, cfg.k, accept) {
        Ok(l) => lists.push(l),
        Err(e) => errors.push(format!("bm25: {e}")),
    }
    match providers.embedder.embed_single(&sub.text) {
        Ok(v) => match corpus.dense.search_filtered(&v, cfg.dense_threshold, cfg.k, accept) {
            Ok(l) => lists.push(l),
            Err(e) => errors.push(format!("dense: {e}")),
        },
        Err(e) => errors.push(format!("dense embedding: {e}")),
    }
    match providers.embedder.embed_multi(&sub.text) {
        Ok(m) => match corpus.multi.search_filtered(&m, cfg.maxsim_threshold, cfg.k, accept) {
            Ok(l) => lists.push(l),
            Err(e) => errors.push(format!("maxsim: {e}")),
        },
        Err(e) => errors.push(format!("multi-vector embedding: {e}")),
    }
    (fuse_dedup(&lists), errors)
}

/// Executes one query end to end and returns the plan, the composed
/// answer, the structured output and the full trace. Trace events carry no
/// timestamps; see [`run_query_with_clock`].
pub fn run_query(
    request: &RunRequest,
    corpus: &Corpus,
    providers: &Providers,
    cfg: &PipelineConfig,
) -> Result<RunOutput, PipelineError> {
    run_query_with_clock(request, corpus, providers, cfg, &|| None)
}

/// [`run_query`] with `clock` consulted once per trace event.
pub fn run_query_with_clock(
    request: &RunRequest,
    corpus: &Corpus,
    providers: &Providers,
    cfg: &PipelineConfig,
    clock: &dyn Fn() -> Option<String>,
) -> Result<RunOutput, PipelineError> {
    let query = request.query.trim();
    if query.is_empty() {
        return Err(PipelineError::EmptyQuery);
    }
    if cfg.k == 0 {
        return Err(PipelineError::InvalidConfig("k must be positive".into()));
    }
    let molecule = match &request.molecule_id {
        Some(m) if !corpus.registry.contains(m) => return Err(PipelineError::UnknownMolecule(m.clone())),
        Some(m) => Some(m.clone()),
        None => {
            let found = corpus.registry.mentions(query);
            if found.len() == 1 {
                found.into_iter().next()
            } else {
                None
            }
        }
    };
    let run_id = request.run_id.clone();
    let mut tracer = Tracer { run_id: run_id.clone(), events: Vec::new(), clock };
    let mut calls = Vec::new();

    let classification = classify(query, corpus.library, providers.model, &format!("{run_id}/classify"), &mut calls);
    tracer.flush(&mut calls, None);
    tracer.emit(
        Stage::Classify,
        None,
        None,
        &ClassifyPayload {
            domains: &classification.domains,
            question_types: &classification.question_types,
            classifier_source: classification.source,
        },
    );

    let sub_queries = decompose(query, &classification, corpus.library, molecule.as_ref(), corpus.registry);
    let mut plan = QueryPlan {
        query_id: run_id.clone(),
        original_query: query.to_string(),
        molecule_id: molecule.clone(),
        domains: classification.domains.clone(),
        question_types: classification.question_types.clone(),
        sub_queries,
        classifier_source: classification.source,
    };
    tracer.emit(Stage::Decompose, None, None, &plan);

    let aliases: Vec<String> = molecule.as_ref().map(|m| corpus.registry.aliases(m).to_vec()).unwrap_or_default();
    let mut order: Vec<Domain> = cfg.branch_order.iter().copied().filter(|d| plan.domains.contains(d)).collect();
    for d in &plan.domains {
        if !order.contains(d) {
            order.push(*d);
        }
    }

    let mut findings: BTreeMap<String, Finding> = BTreeMap::new();
    let mut finals: BTreeMap<String, SubQuery> = BTreeMap::new();
    for domain in order {
        for original in plan.sub_queries.iter().filter(|s| s.domain == domain) {
            let mut sub = original.clone();
            let sid = sub.sub_id.clone();
            let retained = loop {
                let (candidates, errors) = retrieve(&sub, molecule.as_ref(), corpus, providers, cfg);
                sub.status = SubQueryStatus::Retrieved;
                tracer.emit(
                    Stage::Retrieve,
                    Some(&sid),
                    None,
                    &RetrievePayload { text: &sub.text, attempt: sub.attempt, candidates: &candidates, errors },
                );
                let reviewed = review_gate(
                    &sub,
                    candidates,
                    corpus.chunks,
                    providers.reranker,
                    providers.model,
                    cfg.rerank_threshold,
                    &format!("{run_id}/{sid}/a{}", sub.attempt),
                    &mut calls,
                );
                sub.status = SubQueryStatus::Reviewed;
                let retained: Vec<Candidate> = reviewed.iter().filter(|c| c.retained == Some(true)).cloned().collect();
                tracer.flush(&mut calls, Some(&sid));
                tracer.emit(
                    Stage::Gate,
                    Some(&sid),
                    None,
                    &GatePayload { attempt: sub.attempt, retained: retained.len(), candidates: &reviewed },
                );
                match refine_or_proceed(&sub, retained.len(), cfg.max_refinements, &aliases) {
                    Refinement::Proceed | Refinement::GiveUpNull => break retained,
                    Refinement::Refine(next) => {
                        tracer.emit(
                            Stage::Refine,
                            Some(&sid),
                            None,
                            &RefinePayload { from: &sub.text, to: &next.text, attempt: next.attempt },
                        );
                        sub = next;
                    }
                }
            };
            let finding = research(
                &sub,
                &retained,
                corpus.chunks,
                providers.model,
                cfg.context_budget_words,
                &format!("{run_id}/{sid}/research"),
                &mut calls,
            );
            tracer.flush(&mut calls, Some(&sid));
            tracer.emit(Stage::Research, Some(&sid), None, &finding);
            sub.status = if finding.is_null { SubQueryStatus::NoFinding } else { SubQueryStatus::Answered };
            findings.insert(sid.clone(), finding);
            finals.insert(sid, sub);
        }
    }
    for s in &mut plan.sub_queries {
        if let Some(f) = finals.remove(&s.sub_id) {
            *s = f;
        }
    }

    let ordered: Vec<Finding> = findings.into_values().collect();
    let answer = supervise(&plan, &ordered);
    tracer.emit(Stage::Supervise, None, None, &answer);

    let types = match_question_types(corpus.library, query, &plan.question_types);
    let schema = compose(&types).expect("at least GENERAL matches");
    let structured = populate(&schema, &answer, providers.model, &format!("{run_id}/taxonomy"), &mut calls);
    tracer.flush(&mut calls, None);
    tracer.emit(Stage::Taxonomy, None, None, &structured);

    Ok(RunOutput { plan, answer, structured, trace: tracer.events })
}
