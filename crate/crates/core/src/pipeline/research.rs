use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{call_model, ChunkStore, Evidence, Finding, LlmCall, SubQuery};
use crate::domain::Domain;
use crate::ingest::{Chunk, ChunkId};
use crate::providers::{LanguageModel, ProviderError, Role};
use crate::retrieval::Candidate;

/// Retained chunks admitted into one research prompt: a prefix of the fused
/// order whose word counts fit the budget. When even the first chunk is too
/// long it is admitted alone, cut to the budget.
pub fn assemble_context<'a>(
    retained: &[Candidate],
    store: &'a dyn ChunkStore,
    budget_words: usize,
) -> Vec<(&'a Chunk, String)> {
    let mut out = Vec::new();
    let mut used = 0;
    for c in retained {
        let Some(chunk) = store.chunk(&c.chunk_id) else { continue };
        if used + chunk.word_count > budget_words {
            if out.is_empty() && budget_words > 0 {
                let cut: Vec<&str> = chunk.text.split_whitespace().take(budget_words).collect();
                out.push((chunk, cut.join(" ")));
            }
            break;
        }
        used += chunk.word_count;
        out.push((chunk, chunk.text.clone()));
    }
    out
}

fn role_line(domain: Domain) -> &'static str {
    match domain {
        Domain::Preclinical => "You are the preclinical research agent: you read animal and in vitro study reports.",
        Domain::Clinical => "You are the clinical research agent: you read human study reports and protocols.",
        Domain::Strategic => "You are the strategic research agent: you read portfolio and program decision records.",
    }
}

pub fn research_prompt(sub: &SubQuery, context: &[(&Chunk, String)]) -> String {
    let mut p = format!(
        "{}\nUsing only the passages below, write a concise finding that answers the question, and cite every passage \
         you rely on with a verbatim quote from it.\nReply with JSON {{\"summary\": \"...\", \"citations\": \
         [{{\"chunk\": \"<chunk id>\", \"quote\": \"<verbatim text>\"}}]}}. If the passages do not answer the \
         question reply {{\"summary\": \"\", \"citations\": []}}.\nQUESTION: {}\n",
        role_line(sub.domain),
        sub.text
    );
    for (chunk, text) in context {
        p.push_str(&format!("PASSAGE {}:\n{}\n", chunk.id, text));
    }
    p
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Citation {
    pub chunk: String,
    pub quote: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResearchReply {
    pub summary: String,
    #[serde(default)]
    pub citations: Vec<Citation>,
}

/// Validates a research reply against the admitted passages: every cited
/// chunk must be one of them and every quote must occur verbatim in it.
/// An empty summary with no citations means nothing was found.
pub fn parse_research(
    response: &str,
    context: &[(&Chunk, String)],
) -> Result<Option<(String, Vec<Evidence>)>, ProviderError> {
    let fail = |m: String| Err(ProviderError::ParseFailure(m));
    let reply: ResearchReply = match serde_json::from_str(response.trim()) {
        Ok(r) => r,
        Err(e) => return fail(format!("research reply: {e}")),
    };
    let summary = reply.summary.trim();
    if summary.is_empty() && reply.citations.is_empty() {
        return Ok(None);
    }
    if summary.is_empty() || reply.citations.is_empty() {
        return fail("a finding needs both a summary and citations".into());
    }
    let mut evidence: Vec<Evidence> = Vec::new();
    for cite in &reply.citations {
        let id: ChunkId = match cite.chunk.parse() {
            Ok(id) => id,
            Err(_) => return fail(format!("{:?} is not a chunk id", cite.chunk)),
        };
        let Some((chunk, _)) = context.iter().find(|(c, _)| c.id == id) else {
            return fail(format!("cites {id}, which was not among the retained passages"));
        };
        let quote = cite.quote.trim();
        let Some(start) = (!quote.is_empty()).then(|| chunk.text.find(quote)).flatten() else {
            return fail(format!("quote for {id} does not occur in the passage"));
        };
        let ev = Evidence { chunk_id: id, quote: quote.into(), span: [start, start + quote.len()] };
        if !evidence.contains(&ev) {
            evidence.push(ev);
        }
    }
    Ok(Some((summary.into(), evidence)))
}

/// Runs the research agent over the retained candidates. An empty retained
/// list yields a null finding without a model call; a rejected reply yields
/// a null finding carrying the reason.
pub fn research(
    sub: &SubQuery,
    retained: &[Candidate],
    store: &dyn ChunkStore,
    model: &dyn LanguageModel,
    budget_words: usize,
    trace_id: &str,
    calls: &mut Vec<LlmCall>,
) -> Finding {
    if retained.is_empty() {
        return Finding::null(
            &sub.sub_id,
            sub.domain,
            format!("no evidence retained after {} retrieval rounds", sub.attempt),
        );
    }
    let context = assemble_context(retained, store, budget_words);
    if context.is_empty() {
        return Finding::null(&sub.sub_id, sub.domain, "retained chunks are missing from the store");
    }
    let reply = call_model(model, Role::Research, research_prompt(sub, &context), trace_id.into(), calls)
        .and_then(|r| parse_research(&r, &context));
    match reply {
        Ok(Some((summary, evidence))) => Finding {
            sub_id: sub.sub_id.clone(),
            domain: sub.domain,
            summary,
            evidence,
            is_null: false,
            null_reason: None,
        },
        Ok(None) => Finding::null(&sub.sub_id, sub.domain, "retained passages do not answer the question"),
        Err(e) => Finding::null(&sub.sub_id, sub.domain, format!("research reply rejected: {e}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::SectionPath;
    use crate::pipeline::SubQueryStatus;
    use crate::providers::ScriptedModel;
    use crate::retrieval::Retriever;
    use alloc::collections::BTreeMap;
    use alloc::string::ToString;
    use alloc::vec;

    fn chunk(n: usize, words: usize) -> Chunk {
        let text: Vec<String> = (0..words).map(|i| format!("w{n}x{i}")).collect();
        Chunk {
            id: ChunkId { doc_id: format!("d{n}"), section_path: SectionPath(vec![1]), start_word: 0, end_word: words },
            text: text.join(" "),
            word_count: words,
            metadata_header: String::new(),
            section_heading: String::new(),
            title: String::new(),
            molecule_ids: vec![],
            study_stage: Default::default(),
        }
    }

    fn setup(sizes: &[usize]) -> (BTreeMap<ChunkId, Chunk>, Vec<Candidate>) {
        let chunks: Vec<Chunk> = sizes.iter().enumerate().map(|(i, &w)| chunk(i, w)).collect();
        let cands = chunks.iter().map(|c| Candidate::from_retriever(c.id.clone(), Retriever::Bm25, 1.0)).collect();
        (chunks.into_iter().map(|c| (c.id.clone(), c)).collect(), cands)
    }

    fn sub() -> SubQuery {
        SubQuery {
            sub_id: "clinical-1".into(),
            domain: Domain::Clinical,
            text: "first in human dose".into(),
            attempt: 1,
            status: SubQueryStatus::Reviewed,
        }
    }

    #[test]
    fn budget_admits_a_ranked_prefix() {
        let sizes = [512, 512, 300, 512, 512, 512, 512, 512, 512, 512, 512, 512, 100];
        let (store, cands) = setup(&sizes);
        let ctx = assemble_context(&cands, &store, 6000);
        // budget-arithmetic oracle: largest prefix whose sum stays within 6000
        let mut total = 0;
        let expected = sizes.iter().take_while(|&&w| {
            total += w;
            total <= 6000
        });
        assert_eq!(ctx.len(), expected.count());
        assert_eq!(ctx.len(), 12);
        assert!(ctx.iter().map(|(c, _)| c.word_count).sum::<usize>() <= 6000);
        for (i, (c, _)) in ctx.iter().enumerate() {
            assert_eq!(c.id, cands[i].chunk_id);
        }
        let tiny = assemble_context(&cands, &store, 10);
        assert_eq!(tiny.len(), 1);
        assert_eq!(tiny[0].1.split_whitespace().count(), 10);
    }

    #[test]
    fn replayed_finding_cites_retained_chunk() {
        let (store, cands) = setup(&[5, 5]);
        let ctx = assemble_context(&cands, &store, 6000);
        let mut m = ScriptedModel::default();
        let reply = r#"{"summary": "dose found", "citations": [{"chunk": "d1::1::0-5", "quote": "w1x2 w1x3"}]}"#;
        m.insert(Role::Research, &research_prompt(&sub(), &ctx), reply);
        let mut calls = Vec::new();
        let f = research(&sub(), &cands, &store, &m, 6000, "t", &mut calls);
        assert!(!f.is_null);
        assert_eq!(f.evidence.len(), 1);
        assert_eq!(f.evidence[0].chunk_id.to_string(), "d1::1::0-5");
        let text = &store[&f.evidence[0].chunk_id].text;
        assert_eq!(&text[f.evidence[0].span[0]..f.evidence[0].span[1]], "w1x2 w1x3");
    }

    #[test]
    fn unretained_citation_is_rejected() {
        let (store, cands) = setup(&[5, 5]);
        let ctx = assemble_context(&cands[..1], &store, 6000);
        let reply = r#"{"summary": "x", "citations": [{"chunk": "d1::1::0-5", "quote": "w1x2"}]}"#;
        assert!(matches!(parse_research(reply, &ctx), Err(ProviderError::ParseFailure(_))));
        let mut m = ScriptedModel::default();
        m.insert(Role::Research, &research_prompt(&sub(), &ctx), reply);
        let f = research(&sub(), &cands[..1], &store, &m, 6000, "t", &mut Vec::new());
        assert!(f.is_null);
        assert!(f.null_reason.unwrap().starts_with("research reply rejected"));
    }

    #[test]
    fn reply_grammar() {
        let (store, cands) = setup(&[5]);
        let ctx = assemble_context(&cands, &store, 6000);
        assert_eq!(parse_research(r#"{"summary": "", "citations": []}"#, &ctx), Ok(None));
        assert!(parse_research(r#"{"summary": "x", "citations": []}"#, &ctx).is_err());
        assert!(parse_research(r#"{"summary": "x", "citations": [{"chunk": "d0::1::0-5", "quote": "nope"}]}"#, &ctx)
            .is_err());
        assert!(
            parse_research(r#"{"summary": "x", "citations": [{"chunk": "d0::1::0-5", "quote": ""}]}"#, &ctx).is_err()
        );
        assert!(parse_research("summary: x", &ctx).is_err());
    }

    #[test]
    fn empty_retained_is_null_without_call() {
        let (store, _) = setup(&[5]);
        let mut calls = Vec::new();
        let f = research(&sub(), &[], &store, &ScriptedModel::default(), 6000, "t", &mut calls);
        assert!(f.is_null);
        assert!(calls.is_empty());
    }
}
