use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{rank_order, Candidate, RetrievalError, Retriever};
use crate::ingest::ChunkId;
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Default)]
pub struct LexicalIndexBuilder {
    params: Bm25Params,
    chunks: Vec<ChunkId>,
    seen: BTreeSet<ChunkId>,
    doc_lengths: Vec<u32>,
    postings: BTreeMap<String, Vec<(u32, u32)>>,
}

impl LexicalIndexBuilder {
    pub fn new(params: Bm25Params) -> Self {
        LexicalIndexBuilder { params, ..Default::default() }
    }

    pub fn add(&mut self, chunk_id: ChunkId, text: &str) -> Result<(), RetrievalError> {
        if !self.seen.insert(chunk_id.clone()) {
            return Err(RetrievalError::DuplicateChunk(chunk_id.to_string()));
        }
        let doc = self.chunks.len() as u32;
        let terms = text::terms(text);
        let mut tf: BTreeMap<String, u32> = BTreeMap::new();
        for t in &terms {
            *tf.entry(t.clone()).or_default() += 1;
        }
        for (term, count) in tf {
            self.postings.entry(term).or_default().push((doc, count));
        }
        self.doc_lengths.push(terms.len() as u32);
        self.chunks.push(chunk_id);
        Ok(())
    }

    pub fn build(self) -> LexicalIndex {
        let n = self.doc_lengths.len();
        let total: u64 = self.doc_lengths.iter().map(|&l| u64::from(l)).sum();
        let avg_len = if n == 0 { 0.0 } else { total as f64 / n as f64 };
        LexicalIndex {
            params: self.params,
            chunks: self.chunks,
            doc_lengths: self.doc_lengths,
            avg_len,
            postings: self.postings,
        }
    }
}

/// Inverted index scored with Okapi BM25.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexicalIndex {
    params: Bm25Params,
    chunks: Vec<ChunkId>,
    doc_lengths: Vec<u32>,
    avg_len: f64,
    /// term -> (chunk ordinal, term frequency), ordinals ascending
    postings: BTreeMap<String, Vec<(u32, u32)>>,
}

impl LexicalIndex {
    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }

    pub fn chunk_ids(&self) -> &[ChunkId] {
        &self.chunks
    }

    /// `ln(1 + (N - df + 0.5) / (df + 0.5))`, never negative.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.chunks.len() as f64;
        let df = self.postings.get(term).map_or(0, Vec::len) as f64;
        libm::log(1.0 + (n - df + 0.5) / (df + 0.5))
    }

    pub fn search(&self, query: &str, k: usize) -> Result<Vec<Candidate>, RetrievalError> {
        self.search_filtered(query, k, |_| true)
    }

    /// BM25 over the distinct terms of `query`, restricted to chunks
    /// accepted by `filter`, best first, at most `k`.
    pub fn search_filtered(
        &self,
        query: &str,
        k: usize,
        filter: impl Fn(&ChunkId) -> bool,
    ) -> Result<Vec<Candidate>, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::InvalidK);
        }
        let mut seen = BTreeSet::new();
        let terms: Vec<String> = text::terms(query).into_iter().filter(|t| seen.insert(t.clone())).collect();
        if terms.is_empty() {
            return Err(RetrievalError::EmptyQuery);
        }
        let Bm25Params { k1, b } = self.params;
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for term in &terms {
            let Some(list) = self.postings.get(term) else { continue };
            let idf = self.idf(term);
            for &(doc, tf) in list {
                let tf = f64::from(tf);
                let len = f64::from(self.doc_lengths[doc as usize]);
                let norm = if self.avg_len > 0.0 { len / self.avg_len } else { 0.0 };
                let part = idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm));
                *acc.entry(doc).or_default() += part;
            }
        }
        let mut hits: Vec<(&ChunkId, f64)> =
            acc.into_iter().map(|(doc, s)| (&self.chunks[doc as usize], s)).filter(|(id, _)| filter(id)).collect();
        hits.sort_by(|a, b| rank_order(*a, *b));
        hits.truncate(k);
        Ok(hits.into_iter().map(|(id, s)| Candidate::from_retriever(id.clone(), Retriever::Bm25, s)).collect())
    }
}

/// Free-function form of [`LexicalIndex::search`].
pub fn bm25_search(index: &LexicalIndex, query: &str, k: usize) -> Result<Vec<Candidate>, RetrievalError> {
    index.search(query, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::SectionPath;
    use alloc::vec;

    fn id(n: usize) -> ChunkId {
        ChunkId { doc_id: alloc::format!("c{n}"), section_path: SectionPath(vec![0]), start_word: 0, end_word: 1 }
    }

    fn build(texts: &[&str]) -> LexicalIndex {
        let mut b = LexicalIndexBuilder::new(Bm25Params::default());
        for (i, t) in texts.iter().enumerate() {
            b.add(id(i + 1), t).unwrap();
        }
        b.build()
    }

    #[test]
    fn single_match_corpus() {
        let idx = build(&["dose levels were escalated", "hepatotoxicity was observed in rats", "no findings"]);
        let hits = idx.search("hepatotoxicity", 3).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].chunk_id, id(2));
        assert!(hits[0].scores.bm25.unwrap() > 0.0);
        assert_eq!(hits[0].retrievers, BTreeSet::from([Retriever::Bm25]));
    }

    #[test]
    fn punctuation_only_query_is_empty() {
        let idx = build(&["a b"]);
        assert_eq!(idx.search(",", 3), Err(RetrievalError::EmptyQuery));
        assert_eq!(idx.search("a", 0), Err(RetrievalError::InvalidK));
    }

    #[test]
    fn duplicate_chunk_rejected() {
        let mut b = LexicalIndexBuilder::new(Bm25Params::default());
        b.add(id(1), "x").unwrap();
        assert!(matches!(b.add(id(1), "y"), Err(RetrievalError::DuplicateChunk(_))));
    }

    #[test]
    fn ties_break_by_chunk_id_and_k_caps() {
        let idx = build(&["same words", "same words", "same words"]);
        let hits = idx.search("same", 2).unwrap();
        assert_eq!(hits.iter().map(|c| c.chunk_id.clone()).collect::<Vec<_>>(), vec![id(1), id(2)]);
    }

    #[test]
    fn filter_restricts_results() {
        let idx = build(&["dose", "dose", "dose"]);
        let hits = idx.search_filtered("dose", 5, |c| c.doc_id != "c2").unwrap();
        assert_eq!(hits.len(), 2);
        assert!(hits.iter().all(|h| h.chunk_id != id(2)));
    }
}
