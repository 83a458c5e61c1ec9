//! The orchestration state machine.
//!
//! A run classifies the query, decomposes it into one or more sub-queries
//! per knowledge domain, and drives each sub-query through
//! retrieve → gate → (refine → retrieve → gate)* → research before the
//! supervisor merges the findings. Every step is appended to a trace from
//! which provenance can be re-checked without access to the run itself.

mod classify;
mod gate;
mod research;
mod run;
mod supervise;
mod trace;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Domain, MoleculeId};
use crate::ingest::{Chunk, ChunkId};

pub use classify::{classification_prompt, classify, decompose, parse_classification, rule_classify, Classification};
pub use gate::{
    gate_decision, judge_prompt, parse_judgment, refine_or_proceed, review_gate, rewrite_sub_query, Refinement,
};
pub use research::{assemble_context, parse_research, research, research_prompt, ResearchReply};
pub use run::{run_query, run_query_with_clock, Corpus, Providers, RunOutput, RunRequest};
pub use supervise::supervise;
pub use trace::{call_model, check_trace_grammar, verify_provenance, LlmCall, Stage, TraceError, TraceEvent};

/// Read access to ingested chunks by id.
pub trait ChunkStore {
    fn chunk(&self, id: &ChunkId) -> Option<&Chunk>;
}

impl ChunkStore for BTreeMap<ChunkId, Chunk> {
    fn chunk(&self, id: &ChunkId) -> Option<&Chunk> {
        self.get(id)
    }
}

/// Note attached to a requested domain whose branch found nothing.
pub const NULL_DOMAIN_NOTE: &str = "no information was available in that domain";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Per-retriever fan-out before fusion.
    pub k: usize,
    pub dense_threshold: f64,
    pub maxsim_threshold: f64,
    /// Inclusive lower bound on the unit rerank score.
    pub rerank_threshold: f64,
    pub max_refinements: u32,
    /// Words of chunk text admitted into one research prompt.
    pub context_budget_words: usize,
    /// Execution order of domain branches; empty means section order.
    /// Only affects the trace, never the answer.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub branch_order: Vec<Domain>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k: 25,
            dense_threshold: 0.7,
            maxsim_threshold: 0.5,
            rerank_threshold: 0.7,
            max_refinements: 2,
            context_budget_words: 6000,
            branch_order: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("molecule {0} is not in the registry")]
    UnknownMolecule(MoleculeId),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierSource {
    Llm,
    RuleFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubQueryStatus {
    Pending,
    Retrieved,
    Reviewed,
    Answered,
    NoFinding,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubQuery {
    pub sub_id: String,
    pub domain: Domain,
    pub text: String,
    /// 1 for the original wording, +1 per refinement.
    pub attempt: u32,
    pub status: SubQueryStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPlan {
    pub query_id: String,
    pub original_query: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub molecule_id: Option<MoleculeId>,
    /// Section order, no duplicates.
    pub domains: Vec<Domain>,
    pub question_types: Vec<String>,
    pub sub_queries: Vec<SubQuery>,
    pub classifier_source: ClassifierSource,
}

/// A cited passage: `quote` occurs verbatim in the chunk text at byte
/// offsets `span`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub chunk_id: ChunkId,
    pub quote: String,
    pub span: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub sub_id: String,
    pub domain: Domain,
    pub summary: String,
    pub evidence: Vec<Evidence>,
    pub is_null: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_reason: Option<String>,
}

impl Finding {
    pub fn null(sub_id: &str, domain: Domain, reason: impl Into<String>) -> Self {
        Finding {
            sub_id: sub_id.into(),
            domain,
            summary: String::new(),
            evidence: Vec::new(),
            is_null: true,
            null_reason: Some(reason.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSection {
    pub domain: Domain,
    pub narrative: String,
    pub findings: Vec<Finding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NullDomainNote {
    pub domain: Domain,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComposedAnswer {
    pub query_id: String,
    pub sections: Vec<DomainSection>,
    pub null_domain_notes: Vec<NullDomainNote>,
}

impl ComposedAnswer {
    /// Every chunk cited by any finding.
    pub fn cited_chunks(&self) -> BTreeSet<&ChunkId> {
        self.sections
            .iter()
            .flat_map(|s| s.findings.iter())
            .flat_map(|f| f.evidence.iter())
            .map(|e| &e.chunk_id)
            .collect()
    }

    /// Chunks cited by findings of one domain.
    pub fn cited_in(&self, domain: Domain) -> BTreeSet<&ChunkId> {
        self.sections
            .iter()
            .filter(|s| s.domain == domain)
            .flat_map(|s| s.findings.iter())
            .flat_map(|f| f.evidence.iter())
            .map(|e| &e.chunk_id)
            .collect()
    }

    pub fn is_null(&self, domain: Domain) -> bool {
        self.null_domain_notes.iter().any(|n| n.domain == domain)
    }
}
