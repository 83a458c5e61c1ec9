use alloc::collections::BTreeSet;
use alloc::format;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{AdjudicationRecord, BenchmarkQuery, EvalError, Label};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn add(&mut self, label: Label) {
        match label {
            Label::TP => self.tp += 1,
            Label::TN => self.tn += 1,
            Label::FP => self.fp += 1,
            Label::FN => self.fn_ += 1,
        }
    }
}

/// Label frequencies for one benchmark query. A second verdict for the same
/// molecule is rejected.
pub fn tally(records: &[AdjudicationRecord], query: BenchmarkQuery) -> Result<ConfusionCounts, EvalError> {
    let mut seen = BTreeSet::new();
    let mut counts = ConfusionCounts::default();
    for r in records.iter().filter(|r| r.benchmark_query == query) {
        if !seen.insert(r.molecule_id.clone()) {
            return Err(EvalError::DuplicateRecord(format!("({query}, {})", r.molecule_id)));
        }
        counts.add(r.label);
    }
    Ok(counts)
}

/// A metric value, or the explicit marker for a zero denominator.
/// Serializes as a number or the string `"undefined"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricValue {
    Defined(f64),
    Undefined,
}

impl MetricValue {
    fn ratio(num: u64, den: u64) -> Self {
        if den == 0 {
            MetricValue::Undefined
        } else {
            MetricValue::Defined(num as f64 / den as f64)
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            MetricValue::Defined(v) => Some(v),
            MetricValue::Undefined => None,
        }
    }
}

impl Serialize for MetricValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            MetricValue::Defined(v) => serializer.serialize_f64(*v),
            MetricValue::Undefined => serializer.serialize_str("undefined"),
        }
    }
}

impl<'de> Deserialize<'de> for MetricValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(alloc::string::String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Ok(MetricValue::Defined(v)),
            Raw::Str(s) if s == "undefined" => Ok(MetricValue::Undefined),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("unexpected metric value {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: MetricValue,
    pub precision: MetricValue,
    pub recall: MetricValue,
    pub specificity: MetricValue,
    pub f1: MetricValue,
}

/// Harmonic mean of precision and recall.
pub fn f1_from(precision: f64, recall: f64) -> MetricValue {
    if precision + recall == 0.0 {
        MetricValue::Undefined
    } else {
        MetricValue::Defined(2.0 * precision * recall / (precision + recall))
    }
}

pub fn compute_metrics(c: &ConfusionCounts) -> Result<MetricsReport, EvalError> {
    if c.total() == 0 {
        return Err(EvalError::EmptyCounts);
    }
    let precision = MetricValue::ratio(c.tp, c.tp + c.fp);
    let recall = MetricValue::ratio(c.tp, c.tp + c.fn_);
    let f1 = match (precision, recall) {
        (MetricValue::Defined(p), MetricValue::Defined(r)) => f1_from(p, r),
        _ => MetricValue::Undefined,
    };
    Ok(MetricsReport {
        accuracy: MetricValue::ratio(c.tp + c.tn, c.total()),
        precision,
        recall,
        specificity: MetricValue::ratio(c.tn, c.tn + c.fp),
        f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::MoleculeId;
    use alloc::string::ToString;
    use alloc::vec::Vec;

    fn rec(q: BenchmarkQuery, mol: &str, label: Label) -> AdjudicationRecord {
        AdjudicationRecord {
            query_id: "r".into(),
            benchmark_query: q,
            molecule_id: MoleculeId::from(mol),
            label,
            error_type: None,
            adjudicator: "a".into(),
            timestamp: "t".into(),
        }
    }

    #[test]
    fn tally_counts_labels() {
        let rs: Vec<_> = [Label::TP, Label::TP, Label::FP, Label::TN]
            .into_iter()
            .enumerate()
            .map(|(i, l)| rec(BenchmarkQuery::Q1, &i.to_string(), l))
            .collect();
        assert_eq!(tally(&rs, BenchmarkQuery::Q1).unwrap(), ConfusionCounts::new(2, 1, 1, 0));
        assert_eq!(tally(&rs, BenchmarkQuery::Q2).unwrap(), ConfusionCounts::default());
    }

    #[test]
    fn tally_empty_then_metrics_refuse() {
        let c = tally(&[], BenchmarkQuery::Q1).unwrap();
        assert_eq!(c, ConfusionCounts::default());
        assert_eq!(compute_metrics(&c), Err(EvalError::EmptyCounts));
    }

    #[test]
    fn tally_rejects_duplicates() {
        let rs = [rec(BenchmarkQuery::Q1, "RO_A", Label::TP), rec(BenchmarkQuery::Q1, "RO_A", Label::FP)];
        assert!(matches!(tally(&rs, BenchmarkQuery::Q1), Err(EvalError::DuplicateRecord(_))));
    }

    #[test]
    fn hand_arithmetic_example() {
        // tp=7 fp=3 tn=8 fn=2: 15/20, 7/10, 7/9, 8/11, 2*0.7*(7/9)/(0.7+7/9)
        let m = compute_metrics(&ConfusionCounts::new(7, 8, 3, 2)).unwrap();
        let close = |v: MetricValue, e: f64| (v.value().unwrap() - e).abs() < 1e-4;
        assert!(close(m.accuracy, 0.75));
        assert!(close(m.precision, 0.7));
        assert!(close(m.recall, 0.7778));
        assert!(close(m.specificity, 0.7273));
        assert!(close(m.f1, 0.7368));
        assert!((m.f1.value().unwrap() - 14.0 / 19.0).abs() < 1e-12);
    }

    #[test]
    fn zero_denominators_are_undefined() {
        let m = compute_metrics(&ConfusionCounts::new(0, 5, 0, 0)).unwrap();
        assert_eq!(m.precision, MetricValue::Undefined);
        assert_eq!(m.recall, MetricValue::Undefined);
        assert_eq!(m.f1, MetricValue::Undefined);
        assert_eq!(m.specificity, MetricValue::Defined(1.0));
        let m = compute_metrics(&ConfusionCounts::new(0, 0, 2, 3)).unwrap();
        assert_eq!(m.precision, MetricValue::Defined(0.0));
        assert_eq!(m.f1, MetricValue::Undefined);
    }

    #[test]
    fn metric_value_serde() {
        let json = serde_json::to_string(&compute_metrics(&ConfusionCounts::new(0, 1, 0, 0)).unwrap()).unwrap();
        assert_eq!(
            json,
            r#"{"accuracy":1.0,"precision":"undefined","recall":"undefined","specificity":1.0,"f1":"undefined"}"#
        );
        let back: MetricsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.precision, MetricValue::Undefined);
        assert_eq!(
            serde_json::to_string(&ConfusionCounts::new(1, 2, 3, 4)).unwrap(),
            r#"{"tp":1,"tn":2,"fp":3,"fn":4}"#
        );
    }
}
