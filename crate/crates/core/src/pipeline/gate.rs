use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{call_model, ChunkStore, LlmCall, SubQuery, SubQueryStatus};
use crate::ingest::ChunkId;
use crate::providers::{LanguageModel, ProviderError, Reranker, Role};
use crate::retrieval::{Candidate, Judgment};
use crate::text;

/// Retained iff the unit rerank score reaches `threshold` and the judgment
/// is RELEVANT. NaN scores never pass.
pub fn gate_decision(unit_score: f64, judgment: Option<Judgment>, threshold: f64) -> bool {
    unit_score >= threshold && judgment == Some(Judgment::Relevant)
}

pub fn judge_prompt(question: &str, chunk_id: &ChunkId, passage: &str) -> String {
    format!(
        "Does the passage contain information that helps answer the question? \
         Reply with exactly RELEVANT or IRRELEVANT.\nQUESTION: {question}\nPASSAGE {chunk_id}:\n{passage}\n"
    )
}

pub fn parse_judgment(response: &str) -> Result<Judgment, ProviderError> {
    match response.trim() {
        "RELEVANT" => Ok(Judgment::Relevant),
        "IRRELEVANT" => Ok(Judgment::Irrelevant),
        other => Err(ProviderError::ParseFailure(format!("judgment {other:?}"))),
    }
}

/// Reranks every candidate against the sub-query and asks the model for a
/// relevance judgment on those at or above the threshold. Returns all
/// candidates with score, judgment, verdict and reason filled in; a
/// provider failure leaves the candidate unretained.
#[allow(clippy::too_many_arguments)]
pub fn review_gate(
    sub: &SubQuery,
    candidates: Vec<Candidate>,
    store: &dyn ChunkStore,
    reranker: &dyn Reranker,
    model: &dyn LanguageModel,
    threshold: f64,
    trace_prefix: &str,
    calls: &mut Vec<LlmCall>,
) -> Vec<Candidate> {
    let mut out = Vec::with_capacity(candidates.len());
    for (i, mut c) in candidates.into_iter().enumerate() {
        let verdict = (|| {
            let Some(chunk) = store.chunk(&c.chunk_id) else {
                return Err("chunk missing from store".to_string());
            };
            let score = reranker.rerank(&sub.text, &chunk.text).map_err(|e| format!("reranker failed: {e}"))?;
            c.scores.rerank = Some(score.unit_score);
            if !gate_decision(score.unit_score, Some(Judgment::Relevant), threshold) {
                return Err(format!("rerank score {:.4} below {threshold}", score.unit_score));
            }
            let prompt = judge_prompt(&sub.text, &c.chunk_id, &chunk.text);
            let trace_id = format!("{trace_prefix}/judge/{i}");
            let judgment = call_model(model, Role::JudgeRelevance, prompt, trace_id, calls)
                .and_then(|r| parse_judgment(&r))
                .map_err(|e| format!("judgment failed: {e}"))?;
            c.judgment = Some(judgment);
            Ok(judgment)
        })();
        match verdict {
            Ok(j) => {
                let keep = gate_decision(c.scores.rerank.unwrap_or(0.0), Some(j), threshold);
                c.retained = Some(keep);
                c.verdict_reason = if keep { "retained".into() } else { "judged irrelevant".into() };
            }
            Err(reason) => {
                c.retained = Some(false);
                c.verdict_reason = reason;
            }
        }
        out.push(c);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Refinement {
    Proceed,
    Refine(SubQuery),
    GiveUpNull,
}

fn is_date(word: &str) -> bool {
    let w = word.trim_matches(|c: char| !c.is_alphanumeric());
    let parts: Vec<&str> = w.split(['-', '/']).collect();
    let year =
        |p: &str| p.len() == 4 && p.chars().all(|c| c.is_ascii_digit()) && (p.starts_with("19") || p.starts_with("20"));
    match parts.as_slice() {
        [y] => year(y),
        [y, rest @ ..] if rest.len() <= 2 => {
            year(y) && rest.iter().all(|p| !p.is_empty() && p.len() <= 2 && p.chars().all(|c| c.is_ascii_digit()))
        }
        _ => false,
    }
}

fn is_phase_number(word: &str) -> bool {
    let w = word.trim_matches(|c: char| !c.is_alphanumeric()).to_ascii_lowercase();
    !w.is_empty()
        && w.split('/').all(|p| {
            matches!(
                p,
                "i" | "ii"
                    | "iii"
                    | "iv"
                    | "ia"
                    | "ib"
                    | "iia"
                    | "iib"
                    | "1"
                    | "2"
                    | "3"
                    | "4"
                    | "1a"
                    | "1b"
                    | "2a"
                    | "2b"
            )
        })
}

fn is_phase_qualifier(word: &str) -> bool {
    let w = word.trim_matches(|c: char| !c.is_alphanumeric()).to_ascii_lowercase();
    matches!(w.as_str(), "mad" | "sad")
}

/// One broadening step: drop dates if there are any, otherwise drop phase
/// qualifiers ("phase II", "MAD"), otherwise append molecule aliases the
/// text does not mention yet. Returns the text unchanged when none apply.
pub fn rewrite_sub_query(text: &str, aliases: &[String]) -> String {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.iter().any(|w| is_date(w)) {
        return words.into_iter().filter(|w| !is_date(w)).collect::<Vec<_>>().join(" ");
    }
    let mut kept = Vec::with_capacity(words.len());
    let mut dropped = false;
    let mut i = 0;
    while i < words.len() {
        let w = words[i];
        if w.eq_ignore_ascii_case("phase") && words.get(i + 1).is_some_and(|n| is_phase_number(n)) {
            i += 2;
            dropped = true;
            continue;
        }
        if is_phase_qualifier(w) {
            dropped = true;
        } else {
            kept.push(w);
        }
        i += 1;
    }
    if dropped && !kept.is_empty() {
        return kept.join(" ");
    }
    let missing: Vec<&str> = aliases.iter().map(String::as_str).filter(|a| !text::contains_bounded(text, a)).collect();
    if missing.is_empty() {
        return text.to_string();
    }
    let mut out = String::from(text);
    for a in missing {
        out.push(' ');
        out.push_str(a);
    }
    out
}

/// Decides the next step after a review round. `attempt` counts retrieval
/// rounds so far; a refined sub-query carries `attempt + 1`.
pub fn refine_or_proceed(sub: &SubQuery, retained: usize, max_refinements: u32, aliases: &[String]) -> Refinement {
    if retained > 0 {
        return Refinement::Proceed;
    }
    if sub.attempt <= max_refinements {
        return Refinement::Refine(SubQuery {
            sub_id: sub.sub_id.clone(),
            domain: sub.domain,
            text: rewrite_sub_query(&sub.text, aliases),
            attempt: sub.attempt + 1,
            status: SubQueryStatus::Pending,
        });
    }
    Refinement::GiveUpNull
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use crate::ingest::{Chunk, SectionPath};
    use crate::providers::{OverlapReranker, RerankVerdict, ScriptedModel};
    use crate::retrieval::Retriever;
    use alloc::collections::BTreeMap;
    use alloc::vec;

    fn sub(attempt: u32) -> SubQuery {
        SubQuery {
            sub_id: "clinical-1".into(),
            domain: Domain::Clinical,
            text: "first in human dose of RO7001".into(),
            attempt,
            status: SubQueryStatus::Reviewed,
        }
    }

    #[test]
    fn gate_examples() {
        assert!(gate_decision(0.71, Some(Judgment::Relevant), 0.7));
        assert!(!gate_decision(0.69, Some(Judgment::Relevant), 0.7));
        assert!(!gate_decision(0.90, Some(Judgment::Irrelevant), 0.7));
        assert!(gate_decision(0.7, Some(Judgment::Relevant), 0.7));
        assert!(!gate_decision(f64::NAN, Some(Judgment::Relevant), 0.7));
        assert!(!gate_decision(0.99, None, 0.7));
    }

    #[test]
    fn judgment_grammar() {
        assert_eq!(parse_judgment(" RELEVANT\n"), Ok(Judgment::Relevant));
        assert_eq!(parse_judgment("IRRELEVANT"), Ok(Judgment::Irrelevant));
        assert!(parse_judgment("relevant").is_err());
        assert!(parse_judgment("RELEVANT, mostly").is_err());
    }

    #[test]
    fn refinement_loop_rule() {
        assert_eq!(refine_or_proceed(&sub(1), 3, 2, &[]), Refinement::Proceed);
        match refine_or_proceed(&sub(1), 0, 2, &["veltamab".into()]) {
            Refinement::Refine(s) => {
                assert_eq!(s.attempt, 2);
                assert_eq!(s.text, "first in human dose of RO7001 veltamab");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(refine_or_proceed(&sub(2), 0, 2, &[]), Refinement::Refine(_)));
        assert_eq!(refine_or_proceed(&sub(3), 0, 2, &[]), Refinement::GiveUpNull);
    }

    #[test]
    fn rewrite_steps() {
        let aliases = vec!["veltamab".to_string()];
        let t = "highest dose of RO7001 in phase II studies in 2004";
        let t1 = rewrite_sub_query(t, &aliases);
        assert_eq!(t1, "highest dose of RO7001 in phase II studies in");
        let t2 = rewrite_sub_query(&t1, &aliases);
        assert_eq!(t2, "highest dose of RO7001 in studies in");
        let t3 = rewrite_sub_query(&t2, &aliases);
        assert_eq!(t3, "highest dose of RO7001 in studies in veltamab");
        assert_eq!(rewrite_sub_query(&t3, &aliases), t3);
        assert_eq!(rewrite_sub_query("dose in Phase I/II (MAD) 2001-05-03", &[]), "dose in Phase I/II (MAD)");
        assert_eq!(rewrite_sub_query("dose in Phase I/II (MAD)", &[]), "dose in");
    }

    fn chunk(doc: &str, text: &str) -> Chunk {
        Chunk {
            id: ChunkId { doc_id: doc.into(), section_path: SectionPath(vec![1]), start_word: 0, end_word: 5 },
            text: text.into(),
            word_count: text.split_whitespace().count(),
            metadata_header: String::new(),
            section_heading: String::new(),
            title: String::new(),
            molecule_ids: vec![],
            study_stage: Default::default(),
        }
    }

    #[test]
    fn review_records_scores_judgments_and_failures() {
        let s = sub(1);
        let good = chunk("a", "the first in human dose of RO7001 was 5 mg");
        let also_good = chunk("b", "first in human dose of RO7001 unclear");
        let off_topic = chunk("c", "rat liver weights increased");
        let store: BTreeMap<ChunkId, Chunk> =
            [&good, &also_good, &off_topic].into_iter().map(|c| (c.id.clone(), c.clone())).collect();
        let mut model = ScriptedModel::default();
        model.insert(Role::JudgeRelevance, &judge_prompt(&s.text, &good.id, &good.text), "RELEVANT");
        model.insert(Role::JudgeRelevance, &judge_prompt(&s.text, &also_good.id, &also_good.text), "maybe?");
        let cands = [&good, &also_good, &off_topic]
            .iter()
            .map(|c| Candidate::from_retriever(c.id.clone(), Retriever::Bm25, 1.0))
            .collect();
        let mut calls = Vec::new();
        let out = review_gate(&s, cands, &store, &OverlapReranker, &model, 0.7, "run/clinical-1/a1", &mut calls);
        assert_eq!(out[0].retained, Some(true));
        assert_eq!(out[0].judgment, Some(Judgment::Relevant));
        assert_eq!(out[1].retained, Some(false));
        assert!(out[1].verdict_reason.starts_with("judgment failed"));
        assert_eq!(out[2].retained, Some(false));
        assert!(out[2].scores.rerank.unwrap() < 0.7);
        assert_eq!(out[2].judgment, None);
        // only candidates above the threshold reach the model
        assert_eq!(calls.len(), 2);
        assert_eq!(calls[0].trace_id, "run/clinical-1/a1/judge/0");
    }

    struct Down;
    impl Reranker for Down {
        fn rerank(&self, _: &str, _: &str) -> Result<RerankVerdict, ProviderError> {
            Err(ProviderError::Unavailable("down".into()))
        }
    }

    #[test]
    fn reranker_failure_means_not_retained() {
        let c = chunk("a", "x");
        let store: BTreeMap<ChunkId, Chunk> = [(c.id.clone(), c.clone())].into_iter().collect();
        let out = review_gate(
            &sub(1),
            vec![Candidate::from_retriever(c.id.clone(), Retriever::Dense, 0.9)],
            &store,
            &Down,
            &ScriptedModel::default(),
            0.7,
            "p",
            &mut Vec::new(),
        );
        assert_eq!(out[0].retained, Some(false));
        assert!(out[0].verdict_reason.contains("reranker failed"));
    }
}
