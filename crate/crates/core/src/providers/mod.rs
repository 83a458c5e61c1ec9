//! Contracts for embedding, reranking and LLM completion.
//!
//! Every contract has a deterministic offline implementation in [`stub`];
//! remote HTTP clients live in the engine crate and implement the same
//! traits.

pub mod stub;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::retrieval::TokenMatrix;

pub use stub::{HashingEmbedder, OverlapReranker, ScriptEntry, ScriptedModel};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("response could not be parsed: {0}")]
    ParseFailure(String),
    #[error("empty input")]
    EmptyInput,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    SingleVector,
    MultiVector,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingRequest {
    pub text: String,
    pub mode: EmbeddingMode,
    pub dimension: usize,
}

impl EmbeddingRequest {
    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.text.trim().is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        if self.dimension == 0 {
            return Err(ProviderError::InvalidRequest("dimension must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Embedding {
    Single(Vec<f64>),
    Multi(TokenMatrix),
}

pub trait Embedder {
    fn dimension(&self) -> usize;

    /// Single-vector mode yields one unit-norm vector; multi-vector mode one
    /// unit-norm row per token.
    fn embed(&self, request: &EmbeddingRequest) -> Result<Embedding, ProviderError>;

    fn embed_single(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let req =
            EmbeddingRequest { text: text.into(), mode: EmbeddingMode::SingleVector, dimension: self.dimension() };
        match self.embed(&req)? {
            Embedding::Single(v) => Ok(v),
            Embedding::Multi(_) => Err(ProviderError::ParseFailure("expected a single vector".into())),
        }
    }

    fn embed_multi(&self, text: &str) -> Result<TokenMatrix, ProviderError> {
        let req = EmbeddingRequest { text: text.into(), mode: EmbeddingMode::MultiVector, dimension: self.dimension() };
        match self.embed(&req)? {
            Embedding::Multi(m) => Ok(m),
            Embedding::Single(_) => Err(ProviderError::ParseFailure("expected a token matrix".into())),
        }
    }
}

/// Reranker output: the provider's raw score and its unit-interval image
/// under the logistic map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RerankVerdict {
    pub raw_score: f64,
    pub unit_score: f64,
}

impl RerankVerdict {
    pub fn from_raw(raw_score: f64) -> Self {
        RerankVerdict { raw_score, unit_score: unit_map(raw_score) }
    }
}

/// `clamp(1 / (1 + e^-raw), 0, 1)`; NaN maps to 0.
pub fn unit_map(raw: f64) -> f64 {
    if raw.is_nan() {
        return 0.0;
    }
    (1.0 / (1.0 + libm::exp(-raw))).clamp(0.0, 1.0)
}

pub trait Reranker {
    fn rerank(&self, query: &str, passage: &str) -> Result<RerankVerdict, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Classify,
    Decompose,
    JudgeRelevance,
    Research,
    Supervise,
    Taxonomy,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Classify => "classify",
            Role::Decompose => "decompose",
            Role::JudgeRelevance => "judge_relevance",
            Role::Research => "research",
            Role::Supervise => "supervise",
            Role::Taxonomy => "taxonomy",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One prompt/response pair as it appears in the run trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmExchange {
    pub role: Role,
    pub prompt: String,
    pub response: String,
    pub trace_id: String,
}

pub trait LanguageModel {
    fn complete(&self, role: Role, prompt: &str, trace_id: &str) -> Result<String, ProviderError>;
}

impl<T: Embedder + ?Sized> Embedder for &T {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn embed(&self, request: &EmbeddingRequest) -> Result<Embedding, ProviderError> {
        (**self).embed(request)
    }
}

impl<T: Reranker + ?Sized> Reranker for &T {
    fn rerank(&self, query: &str, passage: &str) -> Result<RerankVerdict, ProviderError> {
        (**self).rerank(query, passage)
    }
}

impl<T: LanguageModel + ?Sized> LanguageModel for &T {
    fn complete(&self, role: Role, prompt: &str, trace_id: &str) -> Result<String, ProviderError> {
        (**self).complete(role, prompt, trace_id)
    }
}

/// Stable short hash of a prompt: the first 16 hex digits of its SHA-256.
pub fn prompt_hash(prompt: &str) -> String {
    let digest = Sha256::digest(prompt.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Attempts and backoff for remote providers: 3 attempts, waiting 250 ms
/// then 500 ms between them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { attempts: 3, initial_backoff_ms: 250 }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based).
    pub fn backoff_ms(&self, retry: u32) -> u64 {
        self.initial_backoff_ms.saturating_mul(1u64 << retry.saturating_sub(1).min(32))
    }

    /// Runs `op` until it succeeds, fails with something other than
    /// `Unavailable`, or the attempts are exhausted. `sleep` receives the
    /// backoff in milliseconds.
    pub fn run<T>(
        &self,
        mut op: impl FnMut() -> Result<T, ProviderError>,
        mut sleep: impl FnMut(u64),
    ) -> Result<T, ProviderError> {
        let mut last = ProviderError::Unavailable("no attempts made".into());
        for attempt in 1..=self.attempts.max(1) {
            match op() {
                Ok(v) => return Ok(v),
                Err(ProviderError::Unavailable(msg)) => {
                    last = ProviderError::Unavailable(msg);
                    if attempt < self.attempts {
                        sleep(self.backoff_ms(attempt));
                    }
                }
                Err(other) => return Err(other),
            }
        }
        match last {
            ProviderError::Unavailable(msg) => {
                Err(ProviderError::Unavailable(format!("{msg} (after {} attempts)", self.attempts)))
            }
            other => Err(other),
        }
    }
}
