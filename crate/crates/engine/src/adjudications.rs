//! Append-only JSONL log of expert verdicts.

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use evidence_core::eval::{
    compute_metrics, tally, AdjudicationRecord, BenchmarkQuery, ConfusionCounts, EvalError, MetricsReport,
};

use crate::error::{EngineError, Result};
use crate::jsonl;

pub struct AdjudicationStore {
    path: PathBuf,
    records: Mutex<Vec<AdjudicationRecord>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryMetrics {
    pub counts: ConfusionCounts,
    /// `None` when there are no verdicts yet.
    pub metrics: Option<MetricsReport>,
}

impl AdjudicationStore {
    pub fn open(path: &Path) -> Result<Self> {
        let records: Vec<AdjudicationRecord> = jsonl::read_or_empty(path)?;
        for (i, r) in records.iter().enumerate() {
            r.validate().map_err(|e| EngineError::parse(path, i + 1, e))?;
        }
        Ok(AdjudicationStore { path: path.to_path_buf(), records: Mutex::new(records) })
    }

    pub fn all(&self) -> Vec<AdjudicationRecord> {
        self.records.lock().expect("adjudication lock").clone()
    }

    /// Validates and appends. One verdict per adjudicator per
    /// (benchmark query, molecule).
    pub fn add(&self, record: AdjudicationRecord) -> Result<()> {
        record.validate()?;
        let mut records = self.records.lock().expect("adjudication lock");
        let dup = records.iter().any(|r| {
            r.benchmark_query == record.benchmark_query
                && r.molecule_id == record.molecule_id
                && r.adjudicator == record.adjudicator
        });
        if dup {
            return Err(EvalError::DuplicateRecord(format!(
                "({}, {}) by {}",
                record.benchmark_query, record.molecule_id, record.adjudicator
            ))
            .into());
        }
        jsonl::append(&self.path, &record)?;
        records.push(record);
        Ok(())
    }

    /// Counts and metrics for one query, optionally for one adjudicator.
    pub fn metrics(&self, query: BenchmarkQuery, adjudicator: Option<&str>) -> Result<QueryMetrics> {
        let records: Vec<AdjudicationRecord> =
            self.all().into_iter().filter(|r| adjudicator.is_none_or(|a| r.adjudicator == a)).collect();
        let counts = tally(&records, query)?;
        let metrics = if counts.total() == 0 { None } else { Some(compute_metrics(&counts)?) };
        Ok(QueryMetrics { counts, metrics })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use evidence_core::eval::{Label, MetricValue};

    fn rec(q: BenchmarkQuery, m: &str, label: Label, who: &str) -> AdjudicationRecord {
        AdjudicationRecord {
            query_id: format!("run-{m}"),
            benchmark_query: q,
            molecule_id: m.into(),
            label,
            error_type: None,
            adjudicator: who.into(),
            timestamp: "2026-01-01T00:00:00Z".into(),
        }
    }

    #[test]
    fn persists_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("adj.jsonl");
        let store = AdjudicationStore::open(&path).unwrap();
        store.add(rec(BenchmarkQuery::Q1, "RO_A", Label::TP, "e1")).unwrap();
        store.add(rec(BenchmarkQuery::Q1, "RO_B", Label::FN, "e1")).unwrap();
        assert!(store.add(rec(BenchmarkQuery::Q1, "RO_A", Label::FP, "e1")).is_err());
        store.add(rec(BenchmarkQuery::Q1, "RO_A", Label::FP, "e2")).unwrap();
        let reopened = AdjudicationStore::open(&path).unwrap();
        assert_eq!(reopened.all(), store.all());

        let m = reopened.metrics(BenchmarkQuery::Q1, Some("e1")).unwrap();
        assert_eq!(m.counts, ConfusionCounts::new(1, 0, 0, 1));
        assert_eq!(m.metrics.unwrap().recall, MetricValue::Defined(0.5));
        // two experts on RO_A conflict when pooled
        assert!(matches!(
            reopened.metrics(BenchmarkQuery::Q1, None),
            Err(EngineError::Eval(EvalError::DuplicateRecord(_)))
        ));
        let empty = reopened.metrics(BenchmarkQuery::Q2, None).unwrap();
        assert_eq!((empty.counts.total(), empty.metrics), (0, None));
    }
}
