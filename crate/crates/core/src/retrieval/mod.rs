//! The three retrieval structures and their fusion.
//!
//! Indexes are built once through a builder and are read-only afterwards,
//! so a sealed index can be shared by any number of concurrent searches.

mod dense;
mod fusion;
mod lexical;
mod multivector;

use alloc::collections::BTreeSet;
use alloc::string::String;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Chunk, ChunkId};
use crate::providers::{Embedder, ProviderError};

pub use dense::{dense_search, DenseIndex, DenseIndexBuilder};
pub use fusion::{fuse_dedup, fuse_scored};
pub use lexical::{bm25_search, Bm25Params, LexicalIndex, LexicalIndexBuilder};
pub use multivector::{maxsim, maxsim_search, MultiVectorIndex, MultiVectorIndexBuilder, TokenMatrix};

/// Allowed deviation of a stored or query vector's L2 norm from 1.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RetrievalError {
    #[error("query has no indexable terms")]
    EmptyQuery,
    #[error("vector dimension {got} does not match index dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vector is not unit norm (|v| = {norm})")]
    NotUnitNorm { norm: f64 },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("chunk {0} indexed twice")]
    DuplicateChunk(String),
    #[error("multi-vector input has no rows")]
    NoTokens,
    #[error("embedding chunk {chunk}: {source}")]
    Embedding { chunk: String, source: ProviderError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Retriever {
    Bm25,
    Dense,
    Maxsim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Judgment {
    Relevant,
    Irrelevant,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scores {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bm25: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dense: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maxsim: Option<f64>,
    /// Unit-interval reranker score, set by the review gate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rerank: Option<f64>,
}

impl Scores {
    pub fn get(&self, retriever: Retriever) -> Option<f64> {
        match retriever {
            Retriever::Bm25 => self.bm25,
            Retriever::Dense => self.dense,
            Retriever::Maxsim => self.maxsim,
        }
    }

    pub fn set(&mut self, retriever: Retriever, value: f64) {
        let slot = match retriever {
            Retriever::Bm25 => &mut self.bm25,
            Retriever::Dense => &mut self.dense,
            Retriever::Maxsim => &mut self.maxsim,
        };
        *slot = Some(value);
    }
}

/// A retrieved chunk with per-retriever scores and, after review, its
/// retention verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub chunk_id: ChunkId,
    pub scores: Scores,
    pub retrievers: BTreeSet<Retriever>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retained: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judgment: Option<Judgment>,
    #[serde(default)]
    pub verdict_reason: String,
}

impl Candidate {
    pub fn from_retriever(chunk_id: ChunkId, retriever: Retriever, score: f64) -> Self {
        let mut scores = Scores::default();
        scores.set(retriever, score);
        Candidate {
            chunk_id,
            scores,
            retrievers: BTreeSet::from([retriever]),
            retained: None,
            judgment: None,
            verdict_reason: String::new(),
        }
    }
}

/// The three sealed indexes over one chunk set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSet {
    pub lexical: LexicalIndex,
    pub dense: DenseIndex,
    pub multi: MultiVectorIndex,
}

/// BM25 indexes the chunk text; both embedding modes see the metadata
/// header followed by the text.
pub fn build_indexes<'a>(
    chunks: impl IntoIterator<Item = &'a Chunk>,
    embedder: &dyn Embedder,
    params: Bm25Params,
) -> Result<IndexSet, RetrievalError> {
    let d = embedder.dimension();
    let mut lexical = LexicalIndexBuilder::new(params);
    let mut dense = DenseIndexBuilder::new(d);
    let mut multi = MultiVectorIndexBuilder::new(d);
    for c in chunks {
        let wrap = |source| RetrievalError::Embedding { chunk: alloc::format!("{}", c.id), source };
        lexical.add(c.id.clone(), &c.text)?;
        let text = c.embedding_text();
        dense.add(c.id.clone(), &embedder.embed_single(&text).map_err(wrap)?)?;
        multi.add(c.id.clone(), embedder.embed_multi(&text).map_err(wrap)?)?;
    }
    Ok(IndexSet { lexical: lexical.build(), dense: dense.build(), multi: multi.build() })
}

/// Score descending, then chunk id ascending.
pub(crate) fn rank_order(a: (&ChunkId, f64), b: (&ChunkId, f64)) -> Ordering {
    b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(b.0))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn check_unit(v: &[f64]) -> Result<(), RetrievalError> {
    let norm = libm::sqrt(dot(v, v));
    if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
        return Err(RetrievalError::NotUnitNorm { norm });
    }
    Ok(())
}
