use alloc::string::String;
use alloc::vec::Vec;

use super::{DecompositionRule, QuestionTypeDef, SchemaField, ValueKind, GENERAL};
use crate::domain::Domain;

fn field(id: &str, label: &str, kind: ValueKind, required: bool, domain: Option<Domain>) -> SchemaField {
    SchemaField { field_id: id.into(), label: label.into(), value_kind: kind, required, domain, choices: Vec::new() }
}

fn choice(id: &str, label: &str, domain: Option<Domain>, choices: &[&str]) -> SchemaField {
    SchemaField {
        choices: choices.iter().map(|c| String::from(*c)).collect(),
        ..field(id, label, ValueKind::EnumChoice, true, domain)
    }
}

fn molecule() -> SchemaField {
    field("molecule_id", "Molecule", ValueKind::Text, true, None)
}

fn def(
    type_id: &str,
    description: &str,
    keywords: &[&str],
    rules: &[(Domain, &str)],
    fields: Vec<SchemaField>,
) -> QuestionTypeDef {
    QuestionTypeDef {
        type_id: type_id.into(),
        description: description.into(),
        routing_keywords: keywords.iter().map(|k| String::from(*k)).collect(),
        domains: rules.iter().map(|(d, _)| *d).collect(),
        required_fields: fields,
        decomposition: rules.iter().map(|(d, t)| DecompositionRule { domain: *d, template: (*t).into() }).collect(),
    }
}

pub(super) fn types() -> Vec<QuestionTypeDef> {
    use Domain::*;
    use ValueKind::*;
    let c = Some(Clinical);
    let p = Some(Preclinical);
    alloc::vec![
        def(
            "FIH_DOSE",
            "Starting dose of the first study in humans.",
            &["first in human", "fih", "starting dose"],
            &[(Clinical, "first in human dose of {molecule}")],
            alloc::vec![
                molecule(),
                field("fih_dose", "First-in-human dose", QuantityWithUnit, true, c),
                field("fih_population", "Study population", Text, false, c),
            ],
        ),
        def(
            "ROA",
            "How the molecule was given to people.",
            &["route of administration", "administration route", "roa"],
            &[(Clinical, "route of administration of {molecule} in humans")],
            alloc::vec![
                molecule(),
                choice(
                    "route",
                    "Route",
                    c,
                    &["oral", "intravenous", "subcutaneous", "intramuscular", "inhaled", "topical", "other"],
                ),
            ],
        ),
        def(
            "MAX_DOSE",
            "Highest dose given in multiple ascending dose or phase II studies.",
            &["phase i", "phase ii", "mad", "multiple ascending"],
            &[(Clinical, "highest dose of {molecule} in multiple ascending dose or phase II studies")],
            alloc::vec![
                molecule(),
                field("highest_dose", "Highest dose", QuantityWithUnit, true, c),
                field("study_phase", "Study", Text, false, c),
            ],
        ),
        def(
            "SAE_DOSE",
            "Highest dose linked to severe adverse events or dose-limiting toxicity.",
            &["severe adverse", "serious adverse", "sae", "saes", "dlt", "dose limiting"],
            &[(Clinical, "dose of {molecule} associated with severe adverse events")],
            alloc::vec![
                molecule(),
                field("sae_dose", "Dose with severe adverse events", QuantityWithUnit, true, c),
                field("sae_description", "Events", Text, false, c),
            ],
        ),
        def(
            "EFFICACIOUS_DOSE",
            "Dose with demonstrated clinical efficacy.",
            &["efficacious", "efficacy", "effective dose"],
            &[(Clinical, "efficacious dose of {molecule} in patients")],
            alloc::vec![
                molecule(),
                field("efficacious_dose", "Efficacious dose", QuantityWithUnit, true, c),
                field("efficacy_outcome", "Outcome", Text, false, c),
            ],
        ),
        def(
            "REGIMEN",
            "Dose level, frequency and duration of human dosing.",
            &["regimen", "dosing schedule"],
            &[(Clinical, "treatment regimen of {molecule} dose frequency duration")],
            alloc::vec![
                molecule(),
                field("dose_level", "Dose level", QuantityWithUnit, true, c),
                field("frequency", "Frequency", Text, true, c),
                field("duration", "Duration", Text, false, c),
            ],
        ),
        def(
            "SAFETY_MARGIN",
            "Animal no-effect levels set against the clinical starting dose.",
            &["margin of safety", "safety margin"],
            &[
                (Preclinical, "NOAEL of {molecule} in toxicology studies"),
                (Clinical, "starting dose of {molecule} in humans"),
            ],
            alloc::vec![
                molecule(),
                field("noael", "NOAEL", QuantityWithUnit, true, p),
                field("clinical_starting_dose", "Clinical starting dose", QuantityWithUnit, true, c),
                field("margin_summary", "Margin", Text, false, None),
            ],
        ),
        def(
            "DISCONTINUATION",
            "Main reason the program stopped and the phase at which it stopped.",
            &["discontinuation", "discontinued", "terminated", "termination"],
            &[(Strategic, "reason for discontinuation of {molecule}")],
            alloc::vec![
                molecule(),
                field("primary_reason", "Primary reason", Text, true, None),
                choice(
                    "development_phase",
                    "Development phase",
                    None,
                    &["preclinical", "phase 1", "phase 2", "phase 3", "registration", "marketed"],
                ),
                field("supporting_evidence", "Supporting evidence", EvidenceList, true, None),
            ],
        ),
        def(
            "TOXICITY_EVIDENCE",
            "Whether a toxicity occurs, in which species, with evidence split by phase.",
            &["toxic", "hematotoxic", "hepatotoxic", "nephrotoxic", "cardiotoxic", "toxicity"],
            &[
                (Preclinical, "toxicity findings in animal studies for {molecule}"),
                (Clinical, "toxicity findings in human studies for {molecule}"),
            ],
            alloc::vec![
                molecule(),
                field("is_toxic", "Toxic", BooleanWithEvidence, true, None),
                field("affected_species", "Affected species", EvidenceList, false, None),
                field("preclinical_evidence", "Preclinical evidence", EvidenceList, true, p),
                field("clinical_evidence", "Clinical evidence", EvidenceList, true, c),
            ],
        ),
        def(
            GENERAL,
            "Any question not covered by a specific type.",
            &[],
            &[(Preclinical, "{query} preclinical"), (Clinical, "{query} clinical"), (Strategic, "{query} strategic"),],
            alloc::vec![molecule(), field("answer_summary", "Answer", Text, true, None)],
        ),
    ]
}
