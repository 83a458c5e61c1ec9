use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::{rank_order, Candidate, Retriever};
use crate::ingest::ChunkId;

const RETRIEVERS: [Retriever; 3] = [Retriever::Bm25, Retriever::Dense, Retriever::Maxsim];

fn max_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Union of candidate lists keyed by chunk id, with the fused score used
/// for ordering. See [`fuse_dedup`].
pub fn fuse_scored(lists: &[Vec<Candidate>]) -> Vec<(Candidate, f64)> {
    let mut merged: BTreeMap<ChunkId, Candidate> = BTreeMap::new();
    for cand in lists.iter().flatten() {
        match merged.get_mut(&cand.chunk_id) {
            None => {
                merged.insert(cand.chunk_id.clone(), cand.clone());
            }
            Some(existing) => {
                existing.retrievers.extend(cand.retrievers.iter().copied());
                let s = &mut existing.scores;
                s.bm25 = max_opt(s.bm25, cand.scores.bm25);
                s.dense = max_opt(s.dense, cand.scores.dense);
                s.maxsim = max_opt(s.maxsim, cand.scores.maxsim);
                s.rerank = max_opt(s.rerank, cand.scores.rerank);
                if existing.retained.is_none() {
                    existing.retained = cand.retained;
                    existing.judgment = cand.judgment;
                    existing.verdict_reason = cand.verdict_reason.clone();
                }
            }
        }
    }

    // Raw BM25 and cosine live on different scales; rank by the best
    // min-max normalized score across retrievers.
    let mut ranges: [Option<(f64, f64)>; 3] = [None; 3];
    for (slot, r) in ranges.iter_mut().zip(RETRIEVERS) {
        for c in merged.values() {
            if let Some(v) = c.scores.get(r) {
                *slot = Some(match *slot {
                    None => (v, v),
                    Some((lo, hi)) => (lo.min(v), hi.max(v)),
                });
            }
        }
    }
    let mut out: Vec<(Candidate, f64)> = merged
        .into_values()
        .map(|c| {
            let fused = ranges
                .iter()
                .zip(RETRIEVERS)
                .filter_map(|(range, r)| {
                    let (lo, hi) = (*range)?;
                    let v = c.scores.get(r)?;
                    Some(if hi > lo { (v - lo) / (hi - lo) } else { 1.0 })
                })
                .fold(0.0, f64::max);
            (c, fused)
        })
        .collect();
    out.sort_by(|a, b| rank_order((&a.0.chunk_id, a.1), (&b.0.chunk_id, b.1)));
    out
}

/// Merges retriever outputs into one deduplicated candidate set. A chunk
/// found by several retrievers carries all of their scores; the result is
/// ordered by the maximum of its per-retriever min-max normalized scores,
/// ties by chunk id.
pub fn fuse_dedup(lists: &[Vec<Candidate>]) -> Vec<Candidate> {
    fuse_scored(lists).into_iter().map(|(c, _)| c).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::SectionPath;
    use alloc::collections::BTreeSet;
    use alloc::vec;

    fn id(n: usize) -> ChunkId {
        ChunkId { doc_id: alloc::format!("c{n}"), section_path: SectionPath(vec![0]), start_word: 0, end_word: 1 }
    }

    fn c(n: usize, r: Retriever, s: f64) -> Candidate {
        Candidate::from_retriever(id(n), r, s)
    }

    #[test]
    fn overlap_union_carries_both_scores() {
        let a = vec![c(1, Retriever::Bm25, 3.0), c(2, Retriever::Bm25, 1.0)];
        let b = vec![c(2, Retriever::Dense, 0.9), c(3, Retriever::Dense, 0.8)];
        let fused = fuse_dedup(&[a, b]);
        let ids: BTreeSet<_> = fused.iter().map(|c| c.chunk_id.clone()).collect();
        assert_eq!(ids, BTreeSet::from([id(1), id(2), id(3)]));
        let two = fused.iter().find(|c| c.chunk_id == id(2)).unwrap();
        assert_eq!(two.retrievers, BTreeSet::from([Retriever::Bm25, Retriever::Dense]));
        assert_eq!((two.scores.bm25, two.scores.dense), (Some(1.0), Some(0.9)));
        // c1: bm25 norm 1; c2: max(0, 1) = 1; c3: dense norm 0
        assert_eq!(fused.iter().map(|c| c.chunk_id.clone()).collect::<Vec<_>>(), vec![id(1), id(2), id(3)]);
    }

    #[test]
    fn single_list_identity_and_idempotence() {
        let x = vec![c(1, Retriever::Maxsim, 0.9), c(2, Retriever::Maxsim, 0.7), c(3, Retriever::Maxsim, 0.6)];
        let once = fuse_dedup(core::slice::from_ref(&x));
        assert_eq!(once, x);
        let twice = fuse_dedup(&[once.clone(), vec![]]);
        assert_eq!(twice, once);
    }

    #[test]
    fn order_independent_of_list_order() {
        let a = vec![c(1, Retriever::Bm25, 2.0), c(4, Retriever::Bm25, 1.0)];
        let b = vec![c(4, Retriever::Dense, 0.95), c(2, Retriever::Dense, 0.75)];
        assert_eq!(fuse_dedup(&[a.clone(), b.clone()]), fuse_dedup(&[b, a]));
    }

    #[test]
    fn empty_input() {
        assert!(fuse_dedup(&[]).is_empty());
        assert!(fuse_dedup(&[vec![], vec![]]).is_empty());
    }
}
