use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{BenchmarkQuery, Label};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// The asserted value matches the source.
    ValueCorrect,
    /// Population, phase, species and similar qualifiers match the source.
    ContextCorrect,
    /// A "not available" answer is backed by the source lacking the value.
    AbsenceCorrect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricCheck {
    pub id: String,
    pub kind: CheckKind,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCriterion {
    pub label: Label,
    pub criterion: String,
}

/// Adjudication checklist for one benchmark query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rubric {
    pub query: BenchmarkQuery,
    pub title: String,
    pub question: String,
    pub positive_case: String,
    pub negative_case: String,
    pub checks: Vec<RubricCheck>,
    pub labels: Vec<LabelCriterion>,
}

struct Outline {
    title: &'static str,
    question: &'static str,
    positive: &'static str,
    negative: &'static str,
    value: &'static str,
    context: &'static str,
    absence: &'static str,
    tp: &'static str,
    fp: &'static str,
    fn_: &'static str,
    tn: &'static str,
}

fn outline(q: BenchmarkQuery) -> Outline {
    match q {
        BenchmarkQuery::Q1 => Outline {
            title: "First-in-human dose",
            question: "What was the first in human dose for {molecule}?",
            positive: "Source states the starting dose of the first human study.",
            negative: "Source covers the molecule but gives no first human dose.",
            value: "Dose value and unit equal the source's first human dose.",
            context: "Any stated population or trial phase is right.",
            absence: "Source has no first human dose.",
            tp: "Correct first human dose; any context given is also right.",
            fp: "Wrong dose, e.g. an animal study dose, or a value absent from the source.",
            fn_: "Dose is in the source but the answer misses it.",
            tn: "Answer says the dose is unavailable and the source agrees.",
        },
        BenchmarkQuery::Q2 => Outline {
            title: "Route of administration",
            question: "What was the route of administration in humans for {molecule}?",
            positive: "Source says how the drug was given to people.",
            negative: "Source never names a human route.",
            value: "Route matches the source (oral, intravenous, ...).",
            context: "Route refers to human dosing, not animal dosing or a plan.",
            absence: "Source names no human route.",
            tp: "Correct human route.",
            fp: "Wrong route, or an animal route reported as human.",
            fn_: "Route is stated but the answer misses it.",
            tn: "Answer says no route is given and the source agrees.",
        },
        BenchmarkQuery::Q3 => Outline {
            title: "Highest dose in phase I (MAD) / II",
            question: "What was the highest clinical dose in Phase I(MAD)/II for {molecule}?",
            positive: "Source has doses from multiple ascending dose or phase II studies.",
            negative: "Source has no such dose data.",
            value: "Answer is the maximum of the relevant doses.",
            context: "Dose comes from a MAD or phase II study, not another phase.",
            absence: "Source has no MAD or phase II doses.",
            tp: "Correct maximum over the relevant studies.",
            fp: "Dose from the wrong phase, not the maximum, or mislabeled as MAD.",
            fn_: "Reported missing although the doses are present.",
            tn: "Answer says no MAD or phase II dose exists and the source agrees.",
        },
        BenchmarkQuery::Q4 => Outline {
            title: "Highest dose with severe adverse events",
            question: "What was the highest clinical dose at which there were severe adverse events for {molecule}?",
            positive: "Source ties a dose level to SAEs, DLTs or grade 3+ events.",
            negative: "Source reports no SAEs or does not tie them to a dose.",
            value: "Dose is the one the source links to the severe event.",
            context: "Event is severe and actually linked to that dose.",
            absence: "Source links no dose to a severe event.",
            tp: "Correct dose for the linked severe event.",
            fp: "Dose tied to an unrelated or mild event.",
            fn_: "Stated dose-event link is missed.",
            tn: "Answer says no dose is linked to SAEs and the source agrees.",
        },
        BenchmarkQuery::Q5 => Outline {
            title: "Efficacious dose",
            question: "What was the efficacious dose in the clinic for {molecule}?",
            positive: "Source reports efficacy, PD markers or response at given doses.",
            negative: "Source covers only safety or PK.",
            value: "Dose matches the one with reported efficacy.",
            context: "Outcome and population are described as in the source.",
            absence: "Source has no efficacy data.",
            tp: "Correct efficacious dose with a faithful outcome summary.",
            fp: "Dose given but efficacy misstated, e.g. claimed for a failed or untested dose.",
            fn_: "Efficacy data present but not found.",
            tn: "Answer says no efficacy data exists and the source agrees.",
        },
        BenchmarkQuery::Q6 => Outline {
            title: "Treatment regimen",
            question: "What was the treatment regimen for {molecule} in humans?",
            positive: "Source gives dose level, frequency and duration.",
            negative: "Source gives no regimen details.",
            value: "Dose, frequency and duration each match.",
            context: "Population and single vs multiple dosing match.",
            absence: "Source describes no regimen.",
            tp: "All regimen elements right and combined coherently.",
            fp: "At least one regimen element wrong.",
            fn_: "Regimen details present but not assembled.",
            tn: "Answer says the regimen is not described and the source agrees.",
        },
        BenchmarkQuery::Q7 => Outline {
            title: "Margin of safety",
            question: "What do we know about the margin of safety of {molecule} in the first IB?",
            positive: "Source has animal no-effect levels and the clinical starting dose.",
            negative: "Source lacks what is needed to judge the margin.",
            value: "Numbers used are the no-effect level and the starting dose.",
            context: "Animal and human figures are kept apart and compared correctly.",
            absence: "Source lacks either input to the margin.",
            tp: "Margin described correctly from both inputs.",
            fp: "Wrong inputs, e.g. a toxic dose instead of a no-effect level.",
            fn_: "Both inputs present but never connected.",
            tn: "Answer says the inputs are missing and the source agrees.",
        },
    }
}

pub fn rubric(query: BenchmarkQuery) -> Rubric {
    let s = outline(query);
    let q = query.as_str();
    let check = |suffix: &str, kind, prompt: &str| RubricCheck {
        id: alloc::format!("{}.{suffix}", q.to_ascii_lowercase()),
        kind,
        prompt: prompt.into(),
    };
    let crit = |label, text: &str| LabelCriterion { label, criterion: text.into() };
    Rubric {
        query,
        title: s.title.into(),
        question: s.question.into(),
        positive_case: s.positive.into(),
        negative_case: s.negative.into(),
        checks: alloc::vec![
            check("value", CheckKind::ValueCorrect, s.value),
            check("context", CheckKind::ContextCorrect, s.context),
            check("absence", CheckKind::AbsenceCorrect, s.absence),
        ],
        labels: alloc::vec![
            crit(Label::TP, s.tp),
            crit(Label::FP, s.fp),
            crit(Label::FN, s.fn_),
            crit(Label::TN, s.tn),
        ],
    }
}

pub fn rubrics() -> Vec<Rubric> {
    BenchmarkQuery::ALL.into_iter().map(rubric).collect()
}

/// An adjudicator's filled-in checklist.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChecklistResponse {
    /// The system answer asserts a value (rather than "not available").
    pub system_asserted_value: bool,
    /// The source actually contains the requested information.
    pub info_present_in_source: bool,
    /// Check id → passed.
    #[serde(default)]
    pub checks: BTreeMap<String, bool>,
}

impl ChecklistResponse {
    /// Label implied by the checklist. An asserted value is a TP only when
    /// every value and context check passes; a missing answer is an FN when
    /// the source has the information.
    pub fn suggest_label(&self, rubric: &Rubric) -> Label {
        if self.system_asserted_value {
            let ok = rubric
                .checks
                .iter()
                .filter(|c| c.kind != CheckKind::AbsenceCorrect)
                .all(|c| self.checks.get(&c.id).copied().unwrap_or(false));
            if ok && self.info_present_in_source {
                Label::TP
            } else {
                Label::FP
            }
        } else if self.info_present_in_source {
            Label::FN
        } else {
            Label::TN
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_rubric_per_query_with_all_labels() {
        let all = rubrics();
        assert_eq!(all.len(), 7);
        for (r, q) in all.iter().zip(BenchmarkQuery::ALL) {
            assert_eq!(r.query, q);
            assert_eq!(r.checks.len(), 3);
            let mut labels: Vec<Label> = r.labels.iter().map(|l| l.label).collect();
            labels.sort();
            assert_eq!(labels, [Label::TP, Label::TN, Label::FP, Label::FN]);
            assert!(r.question.contains("{molecule}"));
        }
    }

    #[test]
    fn rubric_json_round_trip() {
        let json = serde_json::to_string(&rubrics()).unwrap();
        let back: Vec<Rubric> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rubrics());
        assert!(json.contains("\"kind\":\"context_correct\""));
    }

    #[test]
    fn checklist_labels() {
        let r = rubric(BenchmarkQuery::Q1);
        let mut resp = ChecklistResponse {
            system_asserted_value: true,
            info_present_in_source: true,
            checks: [("q1.value".into(), true), ("q1.context".into(), true)].into_iter().collect(),
        };
        assert_eq!(resp.suggest_label(&r), Label::TP);
        resp.checks.insert("q1.context".into(), false);
        assert_eq!(resp.suggest_label(&r), Label::FP);
        resp.system_asserted_value = false;
        assert_eq!(resp.suggest_label(&r), Label::FN);
        resp.info_present_in_source = false;
        assert_eq!(resp.suggest_label(&r), Label::TN);
        resp.system_asserted_value = true;
        resp.checks.insert("q1.context".into(), true);
        assert_eq!(resp.suggest_label(&r), Label::FP);
    }
}
