//! Deterministic offline providers.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    prompt_hash, Embedder, Embedding, EmbeddingMode, EmbeddingRequest, LanguageModel, ProviderError, RerankVerdict,
    Reranker, Role,
};
use crate::retrieval::TokenMatrix;
use crate::text;

/// Feature-hashing embedder: every term is hashed to a signed bucket.
/// Single-vector mode sums the buckets and L2-normalizes; multi-vector mode
/// emits one signed one-hot row per term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEmbedder {
    pub dimension: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder { dimension: 64 }
    }
}

impl HashingEmbedder {
    pub fn new(dimension: usize) -> Self {
        HashingEmbedder { dimension }
    }

    /// Bucket index and sign for one term.
    pub fn bucket(term: &str, dimension: usize) -> (usize, f64) {
        let digest = Sha256::digest(term.as_bytes());
        let mut word = [0u8; 8];
        word.copy_from_slice(&digest[..8]);
        let h = u64::from_le_bytes(word);
        let index = (h % dimension as u64) as usize;
        let sign = if digest[8] & 1 == 0 { 1.0 } else { -1.0 };
        (index, sign)
    }
}

impl Embedder for HashingEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, request: &EmbeddingRequest) -> Result<Embedding, ProviderError> {
        request.validate()?;
        let d = request.dimension;
        let terms = text::terms(&request.text);
        if terms.is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        match request.mode {
            EmbeddingMode::SingleVector => {
                let mut v = vec![0.0; d];
                for t in &terms {
                    let (i, s) = Self::bucket(t, d);
                    v[i] += s;
                }
                let mut norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
                if norm == 0.0 {
                    // signed collisions cancelled out; fall back to unsigned counts
                    for t in &terms {
                        v[Self::bucket(t, d).0] += 1.0;
                    }
                    norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
                }
                v.iter_mut().for_each(|x| *x /= norm);
                Ok(Embedding::Single(v))
            }
            EmbeddingMode::MultiVector => {
                let mut m = TokenMatrix::new(d);
                let mut row = vec![0.0; d];
                for t in &terms {
                    let (i, s) = Self::bucket(t, d);
                    row.iter_mut().for_each(|x| *x = 0.0);
                    row[i] = s;
                    m.push_row(&row).map_err(|e| ProviderError::InvalidRequest(format!("{e}")))?;
                }
                Ok(Embedding::Multi(m))
            }
        }
    }
}

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "did", "do", "for", "from", "how", "in", "is", "it", "of", "on",
    "or", "the", "there", "to", "was", "were", "what", "which", "with",
];

/// Token-overlap reranker. The raw score is `60 * coverage - 23`, where
/// coverage is the fraction of distinct non-stopword query terms present in
/// the passage, so full coverage saturates the logistic map at 1.0 and the
/// 0.7 gate corresponds to roughly 40% coverage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OverlapReranker;

impl OverlapReranker {
    pub const SLOPE: f64 = 60.0;
    pub const OFFSET: f64 = 23.0;

    fn content_terms(text: &str) -> BTreeSet<String> {
        let all: BTreeSet<String> = text::terms(text).into_iter().collect();
        let content: BTreeSet<String> = all.iter().filter(|t| !STOPWORDS.contains(&t.as_str())).cloned().collect();
        if content.is_empty() {
            all
        } else {
            content
        }
    }

    pub fn coverage(query: &str, passage: &str) -> f64 {
        let q = Self::content_terms(query);
        if q.is_empty() {
            return 0.0;
        }
        let p: BTreeSet<String> = text::terms(passage).into_iter().collect();
        q.iter().filter(|t| p.contains(*t)).count() as f64 / q.len() as f64
    }
}

impl Reranker for OverlapReranker {
    fn rerank(&self, query: &str, passage: &str) -> Result<RerankVerdict, ProviderError> {
        if query.trim().is_empty() || passage.trim().is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        let raw = Self::SLOPE * Self::coverage(query, passage) - Self::OFFSET;
        Ok(RerankVerdict::from_raw(raw))
    }
}

/// One recorded response, keyed by role and prompt hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub role: Role,
    pub prompt_hash: String,
    pub response: String,
}

/// Replays recorded responses. Prompts without a script fail with
/// `ParseFailure` so callers take their fallback path.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScriptedModel {
    scripts: BTreeMap<(Role, String), String>,
}

impl ScriptedModel {
    pub fn new(entries: impl IntoIterator<Item = ScriptEntry>) -> Self {
        let mut scripts = BTreeMap::new();
        for e in entries {
            scripts.insert((e.role, e.prompt_hash), e.response);
        }
        ScriptedModel { scripts }
    }

    pub fn insert(&mut self, role: Role, prompt: &str, response: impl Into<String>) {
        self.scripts.insert((role, prompt_hash(prompt)), response.into());
    }

    pub fn len(&self) -> usize {
        self.scripts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scripts.is_empty()
    }

    pub fn entries(&self) -> Vec<ScriptEntry> {
        self.scripts
            .iter()
            .map(|((role, hash), response)| ScriptEntry {
                role: *role,
                prompt_hash: hash.clone(),
                response: response.clone(),
            })
            .collect()
    }
}

impl LanguageModel for ScriptedModel {
    fn complete(&self, role: Role, prompt: &str, _trace_id: &str) -> Result<String, ProviderError> {
        let hash = prompt_hash(prompt);
        self.scripts
            .get(&(role, hash.clone()))
            .cloned()
            .ok_or_else(|| ProviderError::ParseFailure(format!("no script for {role} prompt {hash}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::unit_map;
    use alloc::string::ToString;

    #[test]
    fn embedding_is_deterministic_and_unit_norm() {
        let e = HashingEmbedder::default();
        let a = e.embed_single("dose").unwrap();
        let b = e.embed_single("dose").unwrap();
        assert_eq!(a, b);
        for text in ["dose", "first in human dose of RO7001", "a a a a b"] {
            let v = e.embed_single(text).unwrap();
            assert_eq!(v.len(), 64);
            let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
            assert!((norm - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn multi_vector_one_row_per_term() {
        let e = HashingEmbedder::default();
        // token-count oracle: the stub tokenizer yields one term per letter here
        let expected_rows = text::terms("a b c").len();
        let m = e.embed_multi("a b c").unwrap();
        assert_eq!(m.row_count(), expected_rows);
        assert_eq!(m.row_count(), 3);
        for row in m.rows() {
            let norm = libm::sqrt(row.iter().map(|x| x * x).sum::<f64>());
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_text_rejected() {
        let e = HashingEmbedder::default();
        assert_eq!(e.embed_single("  "), Err(ProviderError::EmptyInput));
        assert_eq!(e.embed_single(",,"), Err(ProviderError::EmptyInput));
    }

    #[test]
    fn rerank_self_match_is_one() {
        let r = OverlapReranker;
        let q = "highest clinical dose with severe adverse events";
        assert_eq!(r.rerank(q, q).unwrap().unit_score, 1.0);
    }

    #[test]
    fn rerank_matches_overlap_formula() {
        // oracle: no shared terms -> coverage 0 -> raw -23
        let v = OverlapReranker.rerank("alpha", "zzz").unwrap();
        let expected = 1.0 / (1.0 + libm::exp(23.0));
        assert_eq!(v.raw_score, -23.0);
        assert!((v.unit_score - expected).abs() < 1e-18);
        // half coverage: {alpha, beta} vs passage with alpha -> raw 7
        let v = OverlapReranker.rerank("alpha beta", "the alpha study").unwrap();
        assert_eq!(v.raw_score, 7.0);
        assert_eq!(v.unit_score, unit_map(7.0));
    }

    #[test]
    fn rerank_rejects_empty() {
        assert_eq!(OverlapReranker.rerank("", "x"), Err(ProviderError::EmptyInput));
    }

    #[test]
    fn scripted_replay_and_miss() {
        let mut m = ScriptedModel::default();
        m.insert(Role::JudgeRelevance, "p1", "RELEVANT");
        assert_eq!(m.complete(Role::JudgeRelevance, "p1", "t").unwrap(), "RELEVANT");
        assert!(matches!(m.complete(Role::JudgeRelevance, "p2", "t"), Err(ProviderError::ParseFailure(_))));
        assert!(matches!(m.complete(Role::Research, "p1", "t"), Err(ProviderError::ParseFailure(_))));
        let rebuilt = ScriptedModel::new(m.entries());
        assert_eq!(rebuilt, m);
        assert_eq!(rebuilt.entries()[0].prompt_hash, prompt_hash("p1").to_string());
    }
}
