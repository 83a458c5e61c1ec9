use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{ComposedAnswer, DomainSection, Finding, NullDomainNote, QueryPlan, NULL_DOMAIN_NOTE};

/// Merges terminal findings into the answer. Sections follow domain order
/// and, within a domain, the plan's sub-query order, regardless of the
/// order in which branches finished. A planned domain without a non-null
/// finding gets a null note instead of a section.
pub fn supervise(plan: &QueryPlan, findings: &[Finding]) -> ComposedAnswer {
    let mut sections = Vec::new();
    let mut null_domain_notes = Vec::new();
    let mut domains = plan.domains.clone();
    domains.sort();
    domains.dedup();
    for domain in domains {
        let ordered: Vec<Finding> = plan
            .sub_queries
            .iter()
            .filter(|s| s.domain == domain)
            .filter_map(|s| findings.iter().find(|f| f.sub_id == s.sub_id))
            .filter(|f| !f.is_null)
            .cloned()
            .collect();
        if ordered.is_empty() {
            null_domain_notes.push(NullDomainNote { domain, note: NULL_DOMAIN_NOTE.into() });
            continue;
        }
        let narrative = ordered.iter().map(render).collect::<Vec<_>>().join("\n");
        sections.push(DomainSection { domain, narrative, findings: ordered });
    }
    ComposedAnswer { query_id: plan.query_id.clone(), sections, null_domain_notes }
}

fn render(f: &Finding) -> String {
    let mut ids: Vec<String> = Vec::new();
    for e in &f.evidence {
        let id = format!("{}", e.chunk_id);
        if !ids.contains(&id) {
            ids.push(id);
        }
    }
    format!("{} [{}]", f.summary, ids.join("; "))
}
