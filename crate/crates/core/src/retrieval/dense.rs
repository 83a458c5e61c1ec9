use alloc::collections::BTreeSet;
use alloc::string::ToString;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_unit, dot, rank_order, Candidate, RetrievalError, Retriever};
use crate::ingest::ChunkId;

#[derive(Debug)]
pub struct DenseIndexBuilder {
    dimension: usize,
    chunks: Vec<ChunkId>,
    seen: BTreeSet<ChunkId>,
    vectors: Vec<f64>,
}

impl DenseIndexBuilder {
    pub fn new(dimension: usize) -> Self {
        DenseIndexBuilder { dimension, chunks: Vec::new(), seen: BTreeSet::new(), vectors: Vec::new() }
    }

    pub fn add(&mut self, chunk_id: ChunkId, vector: &[f64]) -> Result<(), RetrievalError> {
        if vector.len() != self.dimension {
            return Err(RetrievalError::DimensionMismatch { expected: self.dimension, got: vector.len() });
        }
        check_unit(vector)?;
        if !self.seen.insert(chunk_id.clone()) {
            return Err(RetrievalError::DuplicateChunk(chunk_id.to_string()));
        }
        self.chunks.push(chunk_id);
        self.vectors.extend_from_slice(vector);
        Ok(())
    }

    pub fn build(self) -> DenseIndex {
        DenseIndex { dimension: self.dimension, chunks: self.chunks, vectors: self.vectors }
    }
}

/// Unit-norm single vectors, scored by cosine (= dot product).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseIndex {
    dimension: usize,
    chunks: Vec<ChunkId>,
    vectors: Vec<f64>,
}

impl DenseIndex {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ChunkId, &[f64])> {
        self.chunks.iter().zip(self.vectors.chunks_exact(self.dimension.max(1)))
    }

    pub fn vector(&self, chunk_id: &ChunkId) -> Option<&[f64]> {
        self.iter().find(|(id, _)| *id == chunk_id).map(|(_, v)| v)
    }

    pub fn search(&self, query: &[f64], threshold: f64, k: usize) -> Result<Vec<Candidate>, RetrievalError> {
        self.search_filtered(query, threshold, k, |_| true)
    }

    /// Chunks with cosine similarity at or above `threshold`, best first,
    /// at most `k`.
    pub fn search_filtered(
        &self,
        query: &[f64],
        threshold: f64,
        k: usize,
        filter: impl Fn(&ChunkId) -> bool,
    ) -> Result<Vec<Candidate>, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::InvalidK);
        }
        if query.len() != self.dimension {
            return Err(RetrievalError::DimensionMismatch { expected: self.dimension, got: query.len() });
        }
        check_unit(query)?;
        let mut hits: Vec<(&ChunkId, f64)> = self
            .iter()
            .filter(|(id, _)| filter(id))
            .map(|(id, v)| (id, dot(query, v)))
            .filter(|(_, s)| *s >= threshold)
            .collect();
        hits.sort_by(|a, b| rank_order(*a, *b));
        hits.truncate(k);
        Ok(hits.into_iter().map(|(id, s)| Candidate::from_retriever(id.clone(), Retriever::Dense, s)).collect())
    }
}

pub fn dense_search(
    index: &DenseIndex,
    query: &[f64],
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

    fn axis(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    #[test]
    fn self_similarity_and_orthogonality() {
        let mut b = DenseIndexBuilder::new(4);
        b.add(id(1), &axis(4, 0)).unwrap();
        b.add(id(2), &axis(4, 1)).unwrap();
        let idx = b.build();
        let hits = idx.search(&axis(4, 0), 0.7, 10).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].chunk_id, id(1));
        assert!((hits[0].scores.dense.unwrap() - 1.0).abs() < 1e-12);
        assert!(idx.search(&axis(4, 3), 0.7, 10).unwrap().is_empty());
    }

    #[test]
    fn dimension_and_norm_checks() {
        let mut b = DenseIndexBuilder::new(3);
        assert_eq!(b.add(id(1), &[1.0, 0.0]), Err(RetrievalError::DimensionMismatch { expected: 3, got: 2 }));
        assert!(matches!(b.add(id(1), &[2.0, 0.0, 0.0]), Err(RetrievalError::NotUnitNorm { .. })));
        b.add(id(1), &[1.0, 0.0, 0.0]).unwrap();
        let idx = b.build();
        assert!(matches!(idx.search(&[1.0, 0.0], 0.7, 1), Err(RetrievalError::DimensionMismatch { .. })));
    }
}
