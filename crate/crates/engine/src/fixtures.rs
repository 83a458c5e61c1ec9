//! A rule-based stand-in for the language model, used only to record the
//! replay scripts shipped with the fixtures.
//!
//! It reads the same prompts a real model would and answers in the reply
//! grammar each stage expects:
//!
//! * classify: the library's keyword routing;
//! * judge: RELEVANT when the passage holds at least 75% of the question's
//!   content terms;
//! * research: per passage, the sentence covering the most question terms
//!   (at least half); at most two passages, each within 0.2 coverage of
//!   the best, quoted verbatim;
//! * taxonomy: values read off the finding summaries by value kind.

use std::path::Path;

use evidence_core::pipeline::{rule_classify, Finding, RunOutput, RunRequest};
use evidence_core::providers::{LanguageModel, OverlapReranker, ProviderError, Role};
use evidence_core::taxonomy::{SchemaLibrary, ValueKind};
use evidence_core::{text, Domain};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

pub const JUDGE_COVERAGE: f64 = 0.75;
pub const SENTENCE_COVERAGE: f64 = 0.5;
const MAX_CITED_PASSAGES: usize = 2;
const COVERAGE_SLACK: f64 = 0.2;
const DOSE_UNITS: &[&str] = &["mg", "g", "ug", "µg", "mcg", "ng", "ml", "iu", "mmol"];

pub struct HeuristicModel {
    library: SchemaLibrary,
}

impl HeuristicModel {
    pub fn new(library: SchemaLibrary) -> Self {
        HeuristicModel { library }
    }
}

fn question(prompt: &str) -> Result<&str, ProviderError> {
    prompt
        .lines()
        .find_map(|l| l.strip_prefix("QUESTION: "))
        .ok_or_else(|| ProviderError::InvalidRequest("prompt has no QUESTION line".into()))
}

/// `(chunk id, text)` for every `PASSAGE <id>:` block.
fn passages(prompt: &str) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = Vec::new();
    let mut current: Option<(String, Vec<&str>)> = None;
    for line in prompt.lines() {
        let header = line.strip_prefix("PASSAGE ").and_then(|r| r.strip_suffix(':'));
        match (header, current.as_mut()) {
            (Some(id), _) => {
                if let Some((id, lines)) = current.take() {
                    out.push((id, lines.join("\n")));
                }
                current = Some((id.to_string(), Vec::new()));
            }
            (None, Some((_, lines))) => lines.push(line),
            (None, None) => {}
        }
    }
    if let Some((id, lines)) = current {
        out.push((id, lines.join("\n")));
    }
    out
}

/// Sentences as verbatim slices: a period ends a sentence when followed by
/// whitespace or the end of text.
pub fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let bytes = text.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'.' && bytes.get(i + 1).is_none_or(|n| n.is_ascii_whitespace()) {
            let s = text[start..=i].trim();
            if !s.is_empty() {
                out.push(s);
            }
            start = i + 1;
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

fn judge(prompt: &str) -> Result<String, ProviderError> {
    let q = question(prompt)?;
    let (_, passage) = passages(prompt).into_iter().next().ok_or(ProviderError::EmptyInput)?;
    let relevant = OverlapReranker::coverage(q, &passage) >= JUDGE_COVERAGE;
    Ok(if relevant { "RELEVANT" } else { "IRRELEVANT" }.into())
}

fn research(prompt: &str) -> Result<String, ProviderError> {
    let q = question(prompt)?;
    let mut best: Vec<(f64, usize, String, &str)> = Vec::new();
    let ps = passages(prompt);
    for (rank, (id, body)) in ps.iter().enumerate() {
        let top = sentences(body).into_iter().map(|s| (OverlapReranker::coverage(q, s), s)).fold(
            None::<(f64, &str)>,
            |acc, (c, s)| match acc {
                Some((bc, _)) if bc >= c => acc,
                _ => Some((c, s)),
            },
        );
        if let Some((c, s)) = top.filter(|(c, _)| *c >= SENTENCE_COVERAGE) {
            best.push((c, rank, id.clone(), s));
        }
    }
    best.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    best.truncate(MAX_CITED_PASSAGES);
    if let Some(top) = best.first().map(|b| b.0) {
        best.retain(|b| b.0 >= top - COVERAGE_SLACK);
    }
    best.sort_by_key(|b| b.1);
    let summary = best.iter().map(|b| b.3).collect::<Vec<_>>().join(" ");
    let citations: Vec<Value> = best.iter().map(|b| json!({ "chunk": b.2, "quote": b.3 })).collect();
    Ok(json!({ "summary": summary, "citations": citations }).to_string())
}

#[derive(Deserialize)]
struct PromptField {
    field_id: String,
    value_kind: ValueKind,
    #[serde(default)]
    domain: Option<Domain>,
    #[serde(default)]
    choices: Vec<String>,
}

fn strip(tok: &str) -> &str {
    tok.trim_matches(|c: char| matches!(c, ',' | ';' | ':' | '(' | ')') || c == '.')
}

/// First `<number> <dose unit>` pair in the text.
pub fn first_quantity(text: &str) -> Option<(f64, String)> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    toks.windows(2).find_map(|w| {
        let v: f64 = strip(w[0]).parse().ok().filter(|v: &f64| v.is_finite())?;
        let unit = strip(w[1]);
        let base = unit.split('/').next().unwrap_or_default().to_ascii_lowercase();
        DOSE_UNITS.contains(&base.as_str()).then_some(())?;
        Some((v, unit.to_string()))
    })
}

fn molecule_token(text: &str) -> Option<String> {
    text.split_whitespace().map(strip).find_map(|t| {
        let digits = t.strip_prefix("RO")?;
        (!digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit())).then(|| t.to_string())
    })
}

fn cites(f: &Finding) -> Vec<String> {
    let mut ids: Vec<String> = Vec::new();
    for e in &f.evidence {
        let id = e.chunk_id.to_string();
        if !ids.contains(&id) {
            ids.push(id);
        }
    }
    ids
}

fn fill(field: &PromptField, findings: &[&Finding]) -> Option<(Value, Vec<String>)> {
    let first_with =
        |pick: &dyn Fn(&Finding) -> Option<Value>| findings.iter().find_map(|f| pick(f).map(|v| (v, cites(f))));
    if field.field_id == "molecule_id" {
        return first_with(&|f| molecule_token(&f.summary).map(Value::String));
    }
    let all_cites = || {
        let mut ids = Vec::new();
        for f in findings {
            for id in cites(f) {
                if !ids.contains(&id) {
                    ids.push(id);
                }
            }
        }
        ids
    };
    match field.value_kind {
        ValueKind::Text => first_with(&|f| Some(Value::String(f.summary.clone()))),
        ValueKind::QuantityWithUnit => {
            first_with(&|f| first_quantity(&f.summary).map(|(v, u)| json!({ "value": v, "unit": u })))
        }
        ValueKind::EnumChoice => first_with(&|f| {
            let spaced = |s: &str| format!(" {} ", text::terms(s).join(" "));
            let folded = spaced(&f.summary);
            field
                .choices
                .iter()
                .filter_map(|c| folded.find(&spaced(c)).map(|pos| (pos, c)))
                .min_by_key(|(pos, _)| *pos)
                .map(|(_, c)| Value::String(c.clone()))
        }),
        ValueKind::EvidenceList => (!findings.is_empty())
            .then(|| (Value::Array(findings.iter().map(|f| Value::String(f.summary.clone())).collect()), all_cites())),
        ValueKind::BooleanWithEvidence => (!findings.is_empty()).then(|| (Value::Bool(true), all_cites())),
    }
}

fn taxonomy(prompt: &str) -> Result<String, ProviderError> {
    let bad = |m: &str| ProviderError::InvalidRequest(m.into());
    let (_, rest) = prompt.split_once("SCHEMA:\n").ok_or_else(|| bad("no SCHEMA block"))?;
    let (schema, findings) = rest.split_once("\nFINDINGS:\n").ok_or_else(|| bad("no FINDINGS block"))?;
    let fields: Vec<PromptField> = serde_json::from_str(schema).map_err(|e| bad(&e.to_string()))?;
    let findings: Vec<Finding> = serde_json::from_str(findings.trim()).map_err(|e| bad(&e.to_string()))?;
    let mut out = Map::new();
    for field in &fields {
        let scoped: Vec<&Finding> =
            findings.iter().filter(|f| !f.is_null && field.domain.is_none_or(|d| f.domain == d)).collect();
        if let Some((value, provenance)) = fill(field, &scoped) {
            out.insert(field.field_id.clone(), json!({ "value": value, "provenance": provenance }));
        }
    }
    Ok(json!({ "fields": out }).to_string())
}

impl LanguageModel for HeuristicModel {
    fn complete(&self, role: Role, prompt: &str, _trace_id: &str) -> Result<String, ProviderError> {
        match role {
            Role::Classify => {
                let (domains, types) = rule_classify(question(prompt)?, &self.library);
                let domains: Vec<&str> = domains.iter().map(|d| d.as_str()).collect();
                Ok(format!("DOMAINS: {}\nTYPES: {}", domains.join(", "), types.join(", ")))
            }
            Role::JudgeRelevance => judge(prompt),
            Role::Research => research(prompt),
            Role::Taxonomy => taxonomy(prompt),
            Role::Decompose | Role::Supervise => Err(ProviderError::InvalidRequest(format!("{role} is not scripted"))),
        }
    }
}

/// One entry of a fixture query file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureQuery {
    pub run_id: String,
    pub query: String,
    pub molecule_id: evidence_core::MoleculeId,
}

impl FixtureQuery {
    pub fn request(&self) -> RunRequest {
        RunRequest {
            run_id: self.run_id.clone(),
            query: self.query.clone(),
            molecule_id: Some(self.molecule_id.clone()),
        }
    }
}

pub fn load_queries(path: &Path) -> crate::Result<Vec<FixtureQuery>> {
    crate::jsonl::read_json(path)
}

/// The parts of a run compared against golden files: everything but the
/// trace, whose timestamps vary.
pub fn golden_json(out: &RunOutput) -> String {
    let v = json!({ "plan": out.plan, "answer": out.answer, "structured": out.structured });
    let mut s = serde_json::to_string_pretty(&v).expect("run output serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use evidence_core::ingest::{Chunk, ChunkId};
    use evidence_core::pipeline::{
        judge_prompt, parse_judgment, parse_research, research_prompt, SubQuery, SubQueryStatus,
    };

    fn chunk(id: &str, text: &str) -> Chunk {
        Chunk {
            id: id.parse().unwrap(),
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
    fn sentence_split_keeps_decimals() {
        assert_eq!(sentences("Dose was 0.5 mg. Then 2 mg.  Tail"), ["Dose was 0.5 mg.", "Then 2 mg.", "Tail"]);
    }

    #[test]
    fn quantities() {
        assert_eq!(first_quantity("given at 300 mg once daily"), Some((300.0, "mg".into())));
        assert_eq!(first_quantity("NOAEL (10 mg/kg/day)."), Some((10.0, "mg/kg/day".into())));
        assert_eq!(first_quantity("phase 2 ended"), None);
        assert_eq!(first_quantity("no numbers"), None);
    }

    #[test]
    fn judge_and_research_follow_the_reply_grammar() {
        let m = HeuristicModel::new(SchemaLibrary::builtin());
        let c = chunk("d::0::0-12", "Unrelated opener. The first human dose of RO9 was 3 mg given once.");
        let id: ChunkId = c.id.clone();
        let q = "first in human dose of RO9";
        let j = m.complete(Role::JudgeRelevance, &judge_prompt(q, &id, &c.text), "t").unwrap();
        assert!(parse_judgment(&j).is_ok());
        assert_eq!(j, "RELEVANT");
        let sub = SubQuery {
            sub_id: "clinical-1".into(),
            domain: Domain::Clinical,
            text: q.into(),
            attempt: 1,
            status: SubQueryStatus::Reviewed,
        };
        let ctx = vec![(&c, c.text.clone())];
        let reply = m.complete(Role::Research, &research_prompt(&sub, &ctx), "t").unwrap();
        let (summary, ev) = parse_research(&reply, &ctx).unwrap().unwrap();
        assert_eq!(summary, "The first human dose of RO9 was 3 mg given once.");
        assert_eq!(ev[0].chunk_id, id);
    }
}
