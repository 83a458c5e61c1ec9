//! Run records and traces on disk.
//!
//! `runs/<id>.json` holds the record, rewritten atomically on every status
//! change; `traces/<id>.jsonl` holds the trace events. A record still
//! marked running when the store is reopened belonged to a process that
//! died mid-run and is marked failed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use evidence_core::pipeline::{ComposedAnswer, QueryPlan, RunOutput, TraceEvent};
use evidence_core::taxonomy::StructuredOutput;
use evidence_core::MoleculeId;
use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::jsonl;

pub const INTERRUPTED: &str = "interrupted by restart";
/// Adjudication log kept alongside the runs it refers to.
pub const ADJUDICATIONS: &str = "adjudications.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub query: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub molecule_id: Option<MoleculeId>,
    pub status: RunStatus,
    pub started_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<QueryPlan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<ComposedAnswer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structured: Option<StructuredOutput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Run ids become file names, so they are restricted to a safe alphabet.
pub fn valid_run_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !id.starts_with('.')
}

pub struct RunStore {
    dir: PathBuf,
    /// Serializes record rewrites.
    lock: Mutex<()>,
}

impl RunStore {
    pub fn open(dir: &Path) -> Result<Self> {
        for sub in ["runs", "traces"] {
            let d = dir.join(sub);
            fs::create_dir_all(&d).map_err(EngineError::io(&d))?;
        }
        let store = RunStore { dir: dir.to_path_buf(), lock: Mutex::new(()) };
        for mut record in store.list()? {
            if record.status == RunStatus::Running {
                record.status = RunStatus::Failed;
                record.finished_at = Some(now());
                record.diagnostic = Some(INTERRUPTED.into());
                store.put(&record)?;
            }
        }
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn record_path(&self, id: &str) -> PathBuf {
        self.dir.join("runs").join(format!("{id}.json"))
    }

    fn trace_path(&self, id: &str) -> PathBuf {
        self.dir.join("traces").join(format!("{id}.jsonl"))
    }

    fn put(&self, record: &RunRecord) -> Result<()> {
        let _guard = self.lock.lock().expect("run store lock");
        jsonl::write_json(&self.record_path(&record.run_id), record)
    }

    pub fn get(&self, id: &str) -> Result<Option<RunRecord>> {
        if !valid_run_id(id) {
            return Ok(None);
        }
        let path = self.record_path(id);
        if !path.exists() {
            return Ok(None);
        }
        jsonl::read_json(&path).map(Some)
    }

    pub fn list(&self) -> Result<Vec<RunRecord>> {
        let dir = self.dir.join("runs");
        let mut out = BTreeMap::new();
        for entry in fs::read_dir(&dir).map_err(EngineError::io(&dir))? {
            let path = entry.map_err(EngineError::io(&dir))?.path();
            if path.extension().is_some_and(|e| e == "json") {
                let r: RunRecord = jsonl::read_json(&path)?;
                out.insert(r.run_id.clone(), r);
            }
        }
        Ok(out.into_values().collect())
    }

    /// Registers a new run as running. Fails if the id is taken.
    pub fn start(&self, run_id: &str, query: &str, molecule_id: Option<MoleculeId>) -> Result<RunRecord> {
        if !valid_run_id(run_id) {
            return Err(EngineError::Invalid(format!(
                "run id {run_id:?} may only use letters, digits, '-', '_' and '.'"
            )));
        }
        if self.record_path(run_id).exists() {
            return Err(EngineError::Invalid(format!("run {run_id} already exists")));
        }
        let record = RunRecord {
            run_id: run_id.into(),
            query: query.into(),
            molecule_id,
            status: RunStatus::Running,
            started_at: now(),
            finished_at: None,
            plan: None,
            answer: None,
            structured: None,
            diagnostic: None,
        };
        self.put(&record)?;
        Ok(record)
    }

    pub fn complete(&self, mut record: RunRecord, output: RunOutput) -> Result<RunRecord> {
        jsonl::write(&self.trace_path(&record.run_id), &output.trace)?;
        record.status = RunStatus::Complete;
        record.finished_at = Some(now());
        record.molecule_id = output.plan.molecule_id.clone().or(record.molecule_id);
        record.plan = Some(output.plan);
        record.answer = Some(output.answer);
        record.structured = Some(output.structured);
        self.put(&record)?;
        Ok(record)
    }

    pub fn fail(&self, mut record: RunRecord, diagnostic: impl Into<String>) -> Result<RunRecord> {
        record.status = RunStatus::Failed;
        record.finished_at = Some(now());
        record.diagnostic = Some(diagnostic.into());
        self.put(&record)?;
        Ok(record)
    }

    /// `None` for unknown runs; an empty trace for runs without one yet.
    pub fn trace(&self, id: &str) -> Result<Option<Vec<TraceEvent>>> {
        if self.get(id)?.is_none() {
            return Ok(None);
        }
        jsonl::read_or_empty(&self.trace_path(id)).map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lifecycle_and_restart_recovery() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::open(dir.path()).unwrap();
        let a = store.start("a", "q", None).unwrap();
        let b = store.start("b", "q", Some("RO_B".into())).unwrap();
        assert!(store.start("a", "q", None).is_err());
        assert!(store.start("../x", "q", None).is_err());
        let failed = store.fail(b, "provider down").unwrap();
        assert_eq!(store.get("b").unwrap().unwrap(), failed);
        assert_eq!(store.trace("a").unwrap().unwrap(), vec![]);
        assert_eq!(store.trace("zzz").unwrap(), None);
        assert_eq!(store.get("../etc/passwd").unwrap(), None);
        drop(store);

        let reopened = RunStore::open(dir.path()).unwrap();
        let a2 = reopened.get("a").unwrap().unwrap();
        assert_eq!(a2.status, RunStatus::Failed);
        assert_eq!(a2.diagnostic.as_deref(), Some(INTERRUPTED));
        assert_eq!(a2.started_at, a.started_at);
        assert_eq!(reopened.get("b").unwrap().unwrap().diagnostic.as_deref(), Some("provider down"));
        assert_eq!(reopened.list().unwrap().len(), 2);
    }
}
