//! Expert adjudication, confusion-matrix metrics and portfolio analytics.

mod analytics;
mod metrics;
mod rubric;

use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::MoleculeId;

pub use analytics::{
    rsr, species_concordance, stratify_attrition, AttritionShare, DoseQuantity, ExposureBasis, NoaelPair, Outcome,
    SensitivityZone, Species, SpeciesOutcome, BOUNDARY_TOLERANCE,
};
pub use metrics::{compute_metrics, f1_from, tally, ConfusionCounts, MetricValue, MetricsReport};
pub use rubric::{rubric, rubrics, CheckKind, ChecklistResponse, LabelCriterion, Rubric, RubricCheck};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("duplicate record for {0}")]
    DuplicateRecord(String),
    #[error("no adjudications to compute metrics from")]
    EmptyCounts,
    #[error("NOAEL units differ ({0} vs {1})")]
    UnitMismatch(String, String),
    #[error("NOAEL must be positive and finite, got {0}")]
    InvalidNoael(f64),
    #[error("no molecule has outcomes for both species")]
    NoOverlap,
    #[error("invalid adjudication: {0}")]
    InvalidRecord(String),
    #[error("no records")]
    EmptyInput,
}

/// The seven quantitatively scored benchmark queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BenchmarkQuery {
    Q1,
    Q2,
    Q3,
    Q4,
    Q5,
    Q6,
    Q7,
}

impl BenchmarkQuery {
    pub const ALL: [BenchmarkQuery; 7] = [
        BenchmarkQuery::Q1,
        BenchmarkQuery::Q2,
        BenchmarkQuery::Q3,
        BenchmarkQuery::Q4,
        BenchmarkQuery::Q5,
        BenchmarkQuery::Q6,
        BenchmarkQuery::Q7,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchmarkQuery::Q1 => "Q1",
            BenchmarkQuery::Q2 => "Q2",
            BenchmarkQuery::Q3 => "Q3",
            BenchmarkQuery::Q4 => "Q4",
            BenchmarkQuery::Q5 => "Q5",
            BenchmarkQuery::Q6 => "Q6",
            BenchmarkQuery::Q7 => "Q7",
        }
    }
}

impl fmt::Display for BenchmarkQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkQuery {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BenchmarkQuery::ALL
            .into_iter()
            .find(|q| q.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| EvalError::InvalidRecord(alloc::format!("unknown benchmark query {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    TP,
    TN,
    FP,
    FN,
}

impl FromStr for Label {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "TP" => Ok(Label::TP),
            "TN" => Ok(Label::TN),
            "FP" => Ok(Label::FP),
            "FN" => Ok(Label::FN),
            other => Err(EvalError::InvalidRecord(alloc::format!("unknown label {other:?}"))),
        }
    }
}

/// One expert verdict on one (benchmark query, molecule) answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicationRecord {
    /// Run whose answer was adjudicated.
    pub query_id: String,
    pub benchmark_query: BenchmarkQuery,
    pub molecule_id: MoleculeId,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_type: Option<String>,
    pub adjudicator: String,
    /// RFC 3339 timestamp.
    pub timestamp: String,
}

impl AdjudicationRecord {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.adjudicator.trim().is_empty() {
            return Err(EvalError::InvalidRecord("adjudicator is empty".into()));
        }
        if self.error_type.is_some() && matches!(self.label, Label::TP | Label::TN) {
            return Err(EvalError::InvalidRecord("error_type is only allowed on FP or FN".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_and_query_parsing() {
        assert_eq!("FP".parse::<Label>().unwrap(), Label::FP);
        assert!("MAYBE".parse::<Label>().is_err());
        assert_eq!("q4".parse::<BenchmarkQuery>().unwrap(), BenchmarkQuery::Q4);
        assert!("Q8".parse::<BenchmarkQuery>().is_err());
        assert!(serde_json::from_str::<Label>("\"MAYBE\"").is_err());
    }

    #[test]
    fn error_type_only_on_errors() {
        let mut r = AdjudicationRecord {
            query_id: "run-1".into(),
            benchmark_query: BenchmarkQuery::Q1,
            molecule_id: "RO_A".into(),
            label: Label::TP,
            error_type: Some("Planned and actual confusion".into()),
            adjudicator: "expert-1".into(),
            timestamp: "2025-01-01T00:00:00Z".into(),
        };
        assert!(r.validate().is_err());
        r.label = Label::FP;
        assert!(r.validate().is_ok());
    }
}
