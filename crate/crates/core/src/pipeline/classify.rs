use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{call_model, ClassifierSource, LlmCall, SubQuery, SubQueryStatus};
use crate::domain::{Domain, MoleculeId};
use crate::ingest::MoleculeRegistry;
use crate::providers::{LanguageModel, ProviderError, Role};
use crate::taxonomy::{match_question_types, SchemaLibrary, GENERAL};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    /// Section order, no duplicates, never empty.
    pub domains: Vec<Domain>,
    pub question_types: Vec<String>,
    pub source: ClassifierSource,
}

pub fn classification_prompt(query: &str, library: &SchemaLibrary) -> String {
    let mut p = String::from(
        "Classify the research question by knowledge domain and question type.\n\
         Domains: preclinical, clinical, strategic\nQuestion types:\n",
    );
    for t in &library.types {
        p.push_str(&format!("- {}: {}\n", t.type_id, t.description));
    }
    p.push_str(
        "Reply with exactly two lines:\nDOMAINS: <comma-separated domains>\nTYPES: <comma-separated type ids>\n",
    );
    p.push_str(&format!("QUESTION: {query}\n"));
    p
}

fn split_list(line: &str) -> impl Iterator<Item = &str> {
    line.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// Parses `DOMAINS: ...` / `TYPES: ...`. Unknown domains or type ids and
/// empty lists are parse failures.
pub fn parse_classification(
    response: &str,
    library: &SchemaLibrary,
) -> Result<(Vec<Domain>, Vec<String>), ProviderError> {
    let fail = |m: String| Err(ProviderError::ParseFailure(m));
    let mut domains = None;
    let mut types = None;
    for line in response.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let Some((key, rest)) = line.split_once(':') else {
            return fail(format!("unexpected line {line:?}"));
        };
        match key.trim().to_ascii_uppercase().as_str() {
            "DOMAINS" => {
                let mut set = BTreeSet::new();
                for d in split_list(rest) {
                    match Domain::parse(d) {
                        Some(d) => set.insert(d),
                        None => return fail(format!("unknown domain {d:?}")),
                    };
                }
                domains = Some(set.into_iter().collect::<Vec<_>>());
            }
            "TYPES" => {
                let mut set = BTreeSet::new();
                for t in split_list(rest) {
                    if library.get(t).is_none() {
                        return fail(format!("unknown question type {t:?}"));
                    }
                    set.insert(t.to_string());
                }
                types = Some(set.into_iter().collect::<Vec<_>>());
            }
            other => return fail(format!("unexpected key {other:?}")),
        }
    }
    match (domains, types) {
        (Some(d), Some(t)) if !d.is_empty() && !t.is_empty() => Ok((d, t)),
        _ => fail("classification needs non-empty DOMAINS and TYPES".into()),
    }
}

/// Keyword fallback driven by the library's routing keywords: the routed
/// types and the union of their domains, or every domain with GENERAL.
pub fn rule_classify(query: &str, library: &SchemaLibrary) -> (Vec<Domain>, Vec<String>) {
    let routed = library.route(query);
    if routed.is_empty() {
        return (Domain::ALL.to_vec(), alloc::vec![GENERAL.to_string()]);
    }
    let domains: BTreeSet<Domain> = routed.iter().flat_map(|t| t.domains.iter().copied()).collect();
    (domains.into_iter().collect(), routed.into_iter().map(|t| t.type_id.clone()).collect())
}

/// Model classification with the rule table as fallback on any provider or
/// parse failure. Never returns an empty domain set.
pub fn classify(
    query: &str,
    library: &SchemaLibrary,
    model: &dyn LanguageModel,
    trace_id: &str,
    calls: &mut Vec<LlmCall>,
) -> Classification {
    let reply = call_model(model, Role::Classify, classification_prompt(query, library), trace_id.into(), calls)
        .and_then(|r| parse_classification(&r, library));
    match reply {
        Ok((domains, question_types)) => Classification { domains, question_types, source: ClassifierSource::Llm },
        Err(_) => {
            let (domains, question_types) = rule_classify(query, library);
            Classification { domains, question_types, source: ClassifierSource::RuleFallback }
        }
    }
}

fn collapse_spaces(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// One or more sub-queries per planned domain, from the decomposition
/// rules of the matched question types. Domains no matched type covers get
/// the GENERAL rule. Molecule aliases are replaced by the canonical id.
pub fn decompose(
    query: &str,
    classification: &Classification,
    library: &SchemaLibrary,
    molecule: Option<&MoleculeId>,
    registry: &MoleculeRegistry,
) -> Vec<SubQuery> {
    let canonical_query = collapse_spaces(&registry.canonicalize(query));
    let mol = molecule.map(MoleculeId::as_str).unwrap_or("");
    let types = match_question_types(library, query, &classification.question_types);
    let mut out = Vec::new();
    for &domain in &classification.domains {
        let mut templates: Vec<&str> = types
            .iter()
            .flat_map(|t| t.decomposition.iter())
            .filter(|r| r.domain == domain)
            .map(|r| r.template.as_str())
            .collect();
        if templates.is_empty() {
            templates.extend(
                library.general().decomposition.iter().filter(|r| r.domain == domain).map(|r| r.template.as_str()),
            );
        }
        let mut seen = BTreeSet::new();
        for template in templates {
            let text = collapse_spaces(&template.replace("{molecule}", mol).replace("{query}", &canonical_query));
            if !seen.insert(text.clone()) {
                continue;
            }
            out.push(SubQuery {
                sub_id: format!("{domain}-{}", seen.len()),
                domain,
                text,
                attempt: 1,
                status: SubQueryStatus::Pending,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::ScriptedModel;
    use alloc::vec;

    fn registry() -> MoleculeRegistry {
        MoleculeRegistry::new([
            (MoleculeId::from("RO7001"), vec!["veltamab".to_string()]),
            (MoleculeId::from("RO7002"), vec!["corvinib".to_string()]),
        ])
        .unwrap()
    }

    fn fallback(query: &str) -> Classification {
        let lib = SchemaLibrary::builtin();
        let mut calls = Vec::new();
        let c = classify(query, &lib, &ScriptedModel::default(), "t", &mut calls);
        assert_eq!(calls.len(), 1);
        assert!(calls[0].error.is_some());
        c
    }

    #[test]
    fn rule_table_examples() {
        let c = fallback("What was the first in human dose for drug X?");
        assert_eq!(c.source, ClassifierSource::RuleFallback);
        assert_eq!(c.domains, [Domain::Clinical]);
        assert_eq!(c.question_types, ["FIH_DOSE"]);

        let c = fallback(
            "Is drug X hematotoxic and if yes, in which animal species and in humans? \
             Please split the evidence into pre-clinical and clinical.",
        );
        assert_eq!(c.domains, [Domain::Preclinical, Domain::Clinical]);
        assert_eq!(c.question_types, ["TOXICITY_EVIDENCE"]);

        let c = fallback("Tell me a story about lattices");
        assert_eq!(c.domains, Domain::ALL);
        assert_eq!(c.question_types, [GENERAL]);
    }

    #[test]
    fn archetype_routing() {
        let cases: [(&str, &str); 8] = [
            ("What was the route of administration in humans for drug X?", "ROA"),
            ("What was the highest clinical dose in Phase I (MAD)/II for drug X?", "MAX_DOSE"),
            ("What was the highest clinical dose at which there were severe adverse events for drug X?", "SAE_DOSE"),
            ("What was the efficacious dose in the clinic?", "EFFICACIOUS_DOSE"),
            ("What was the treatment regimen for drug X in humans?", "REGIMEN"),
            ("What do we know about the Margin of Safety of drug X?", "SAFETY_MARGIN"),
            (
                "What primary reason led to the discontinuation of drug X, and in which development phase was this decision made?",
                "DISCONTINUATION",
            ),
            ("What was the first-in-human dose of drug X?", "FIH_DOSE"),
        ];
        for (q, t) in cases {
            assert_eq!(fallback(q).question_types, [t], "{q}");
        }
        assert_eq!(fallback(cases[5].0).domains, [Domain::Preclinical, Domain::Clinical]);
        assert_eq!(fallback(cases[6].0).domains, [Domain::Strategic]);
    }

    #[test]
    fn llm_reply_is_preferred_and_validated() {
        let lib = SchemaLibrary::builtin();
        let q = "anything";
        let mut m = ScriptedModel::default();
        m.insert(Role::Classify, &classification_prompt(q, &lib), "DOMAINS: strategic, clinical\nTYPES: ROA");
        let c = classify(q, &lib, &m, "t", &mut Vec::new());
        assert_eq!(c.source, ClassifierSource::Llm);
        assert_eq!(c.domains, [Domain::Clinical, Domain::Strategic]);
        assert_eq!(c.question_types, ["ROA"]);

        assert!(parse_classification("DOMAINS: clinical\nTYPES: NOPE", &lib).is_err());
        assert!(parse_classification("DOMAINS: space\nTYPES: ROA", &lib).is_err());
        assert!(parse_classification("DOMAINS:\nTYPES: ROA", &lib).is_err());
        assert!(parse_classification("TYPES: ROA", &lib).is_err());
        assert!(parse_classification("clinical", &lib).is_err());
    }

    #[test]
    fn decompose_one_per_domain_with_canonical_id() {
        let lib = SchemaLibrary::builtin();
        let q = "Is veltamab hematotoxic in animals and in humans, pre-clinical and clinical?";
        let c = fallback(q);
        let mol = MoleculeId::from("RO7001");
        let subs = decompose(q, &c, &lib, Some(&mol), &registry());
        assert_eq!(subs.len(), 2);
        assert_eq!(subs[0].domain, Domain::Preclinical);
        assert_eq!(subs[0].sub_id, "preclinical-1");
        assert_eq!(subs[0].text, "toxicity findings in animal studies for RO7001");
        assert_eq!(subs[1].domain, Domain::Clinical);
        assert!(subs.iter().all(|s| s.attempt == 1 && s.status == SubQueryStatus::Pending));
    }

    #[test]
    fn decompose_respects_domain_closure() {
        let lib = SchemaLibrary::builtin();
        let c = Classification {
            domains: vec![Domain::Clinical],
            question_types: vec!["SAFETY_MARGIN".into()],
            source: ClassifierSource::Llm,
        };
        let subs = decompose("margin of safety", &c, &lib, Some(&"RO7002".into()), &registry());
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].domain, Domain::Clinical);
    }

    #[test]
    fn general_rule_uses_canonical_query() {
        let lib = SchemaLibrary::builtin();
        let q = "anything known about corvinib?";
        let c = fallback(q);
        let subs = decompose(q, &c, &lib, None, &registry());
        assert_eq!(subs.len(), 3);
        // registry-lookup oracle: the alias is rewritten to its id
        for s in &subs {
            assert!(s.text.contains("RO7002"), "{}", s.text);
            assert!(!s.text.to_lowercase().contains("corvinib"));
        }
    }
}
