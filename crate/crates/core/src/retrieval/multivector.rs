use alloc::collections::BTreeSet;
use alloc::string::ToString;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_unit, dot, rank_order, Candidate, RetrievalError, Retriever};
use crate::ingest::ChunkId;

/// Row-major matrix of token vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenMatrix {
    dimension: usize,
    data: Vec<f64>,
}

impl TokenMatrix {
    pub fn new(dimension: usize) -> Self {
        TokenMatrix { dimension, data: Vec::new() }
    }

    pub fn from_rows<R: AsRef<[f64]>>(dimension: usize, rows: &[R]) -> Result<Self, RetrievalError> {
        let mut m = TokenMatrix::new(dimension);
        for r in rows {
            m.push_row(r.as_ref())?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<(), RetrievalError> {
        if row.len() != self.dimension {
            return Err(RetrievalError::DimensionMismatch { expected: self.dimension, got: row.len() });
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dimension.max(1))
    }

    pub fn row_count(&self) -> usize {
        self.data.len().checked_div(self.dimension).unwrap_or(0)
    }

    fn check_rows_unit(&self) -> Result<(), RetrievalError> {
        self.rows().try_for_each(check_unit)
    }
}

/// Mean over query tokens of the best dot product against any chunk token.
pub fn maxsim(query: &TokenMatrix, chunk: &TokenMatrix) -> f64 {
    let n = query.row_count();
    if n == 0 || chunk.row_count() == 0 {
        return 0.0;
    }
    let total: f64 = query.rows().map(|q| chunk.rows().map(|d| dot(q, d)).fold(f64::NEG_INFINITY, f64::max)).sum();
    total / n as f64
}

#[derive(Debug)]
pub struct MultiVectorIndexBuilder {
    dimension: usize,
    seen: BTreeSet<ChunkId>,
    entries: Vec<(ChunkId, TokenMatrix)>,
}

impl MultiVectorIndexBuilder {
    pub fn new(dimension: usize) -> Self {
        MultiVectorIndexBuilder { dimension, seen: BTreeSet::new(), entries: Vec::new() }
    }

    pub fn add(&mut self, chunk_id: ChunkId, tokens: TokenMatrix) -> Result<(), RetrievalError> {
        if tokens.dimension() != self.dimension {
            return Err(RetrievalError::DimensionMismatch { expected: self.dimension, got: tokens.dimension() });
        }
        if tokens.row_count() == 0 {
            return Err(RetrievalError::NoTokens);
        }
        tokens.check_rows_unit()?;
        if !self.seen.insert(chunk_id.clone()) {
            return Err(RetrievalError::DuplicateChunk(chunk_id.to_string()));
        }
        self.entries.push((chunk_id, tokens));
        Ok(())
    }

    pub fn build(self) -> MultiVectorIndex {
        MultiVectorIndex { dimension: self.dimension, entries: self.entries }
    }
}

/// Per-chunk token matrices for late-interaction scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiVectorIndex {
    dimension: usize,
    entries: Vec<(ChunkId, TokenMatrix)>,
}

impl MultiVectorIndex {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ChunkId, &TokenMatrix)> {
        self.entries.iter().map(|(id, m)| (id, m))
    }

    pub fn search(&self, query: &TokenMatrix, threshold: f64, k: usize) -> Result<Vec<Candidate>, RetrievalError> {
        self.search_filtered(query, threshold, k, |_| true)
    }

    pub fn search_filtered(
        &self,
        query: &TokenMatrix,
        threshold: f64,
        k: usize,
        filter: impl Fn(&ChunkId) -> bool,
    ) -> Result<Vec<Candidate>, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::InvalidK);
        }
        if query.dimension() != self.dimension {
            return Err(RetrievalError::DimensionMismatch { expected: self.dimension, got: query.dimension() });
        }
        if query.row_count() == 0 {
            return Err(RetrievalError::NoTokens);
        }
        query.check_rows_unit()?;
        let mut hits: Vec<(&ChunkId, f64)> = self
            .entries
            .iter()
            .filter(|(id, _)| filter(id))
            .map(|(id, m)| (id, maxsim(query, m)))
            .filter(|(_, s)| *s >= threshold)
            .collect();
        hits.sort_by(|a, b| rank_order(*a, *b));
        hits.truncate(k);
        Ok(hits.into_iter().map(|(id, s)| Candidate::from_retriever(id.clone(), Retriever::Maxsim, s)).collect())
    }
}

pub fn maxsim_search(
    index: &MultiVectorIndex,
    query: &TokenMatrix,
    threshold: f64,
    k: usize,
) -> Result<Vec<Candidate>, RetrievalError> {
    index.search(query, threshold, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::SectionPath;
    use alloc::vec;

    fn id(n: usize) -> ChunkId {
        ChunkId { doc_id: alloc::format!("c{n}"), section_path: SectionPath(vec![0]), start_word: 0, end_word: 1 }
    }

    #[test]
    fn exact_token_match_scores_one() {
        let mut b = MultiVectorIndexBuilder::new(3);
        b.add(id(1), TokenMatrix::from_rows(3, &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap()).unwrap();
        let idx = b.build();
        let q = TokenMatrix::from_rows(3, &[[0.0, 1.0, 0.0]]).unwrap();
        let hits = idx.search(&q, 0.5, 5).unwrap();
        assert_eq!(hits.len(), 1);
        assert!((hits[0].scores.maxsim.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_query_returns_nothing() {
        let mut b = MultiVectorIndexBuilder::new(3);
        b.add(id(1), TokenMatrix::from_rows(3, &[[1.0, 0.0, 0.0]]).unwrap()).unwrap();
        let idx = b.build();
        let q = TokenMatrix::from_rows(3, &[[0.0, 0.0, 1.0], [0.0, 1.0, 0.0]]).unwrap();
        assert!(idx.search(&q, 0.5, 5).unwrap().is_empty());
    }

    #[test]
    fn mean_not_sum() {
        let chunk = TokenMatrix::from_rows(2, &[[1.0, 0.0]]).unwrap();
        let q = TokenMatrix::from_rows(2, &[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!((maxsim(&q, &chunk) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        let mut b = MultiVectorIndexBuilder::new(2);
        assert_eq!(b.add(id(1), TokenMatrix::new(2)), Err(RetrievalError::NoTokens));
        assert!(matches!(b.add(id(1), TokenMatrix::new(3)), Err(RetrievalError::DimensionMismatch { .. })));
        let idx = b.build();
        assert_eq!(idx.search(&TokenMatrix::new(2), 0.5, 1), Err(RetrievalError::NoTokens));
    }
}
