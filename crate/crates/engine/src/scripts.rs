//! Recorded LLM responses on disk, one `ScriptEntry` per JSONL line.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use evidence_core::providers::{prompt_hash, LanguageModel, ProviderError, Role, ScriptEntry, ScriptedModel};

use crate::error::{EngineError, Result};
use crate::jsonl;

pub fn load_scripts(path: &Path) -> Result<ScriptedModel> {
    let entries: Vec<ScriptEntry> = jsonl::read(path)?;
    let mut seen = BTreeMap::new();
    for (i, e) in entries.iter().enumerate() {
        if let Some(prev) = seen.insert((e.role, e.prompt_hash.as_str()), &e.response) {
            if *prev != e.response {
                return Err(EngineError::parse(
                    path,
                    i + 1,
                    format!("conflicting responses for {} {}", e.role, e.prompt_hash),
                ));
            }
        }
    }
    Ok(ScriptedModel::new(entries))
}

/// Writes entries sorted by (role, hash) so re-recording is diff-stable.
pub fn save_scripts(path: &Path, model: &ScriptedModel) -> Result<()> {
    jsonl::write(path, &model.entries())
}

/// Passes calls through to `inner` and keeps every successful exchange.
/// Clones share the recording.
pub struct RecordingModel<M> {
    inner: Arc<M>,
    recorded: Arc<Mutex<ScriptedModel>>,
}

impl<M> Clone for RecordingModel<M> {
    fn clone(&self) -> Self {
        RecordingModel { inner: self.inner.clone(), recorded: self.recorded.clone() }
    }
}

impl<M: LanguageModel> RecordingModel<M> {
    pub fn new(inner: M) -> Self {
        RecordingModel { inner: Arc::new(inner), recorded: Arc::default() }
    }

    pub fn recorded(&self) -> ScriptedModel {
        self.recorded.lock().expect("recorder lock").clone()
    }
}

impl<M: LanguageModel> LanguageModel for RecordingModel<M> {
    fn complete(&self, role: Role, prompt: &str, trace_id: &str) -> std::result::Result<String, ProviderError> {
        let response = self.inner.complete(role, prompt, trace_id)?;
        self.recorded.lock().expect("recorder lock").insert(role, prompt, response.clone());
        Ok(response)
    }
}

/// Hash used as the script key for a prompt.
pub fn key(role: Role, prompt: &str) -> (Role, String) {
    (role, prompt_hash(prompt))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Echo;

    impl LanguageModel for Echo {
        fn complete(&self, role: Role, prompt: &str, _: &str) -> std::result::Result<String, ProviderError> {
            if prompt.is_empty() {
                return Err(ProviderError::EmptyInput);
            }
            Ok(format!("{role}:{prompt}"))
        }
    }

    #[test]
    fn recorded_scripts_replay_identically() {
        let dir = tempfile::tempdir().unwrap();
        let rec = RecordingModel::new(Echo);
        let rec2 = rec.clone();
        rec2.complete(Role::Research, "b", "t1").unwrap();
        rec.complete(Role::Classify, "a", "t2").unwrap();
        assert!(rec.complete(Role::Classify, "", "t3").is_err());
        let path = dir.path().join("s.jsonl");
        save_scripts(&path, &rec.recorded()).unwrap();
        let replay = load_scripts(&path).unwrap();
        assert_eq!(replay.len(), 2);
        assert_eq!(replay.complete(Role::Research, "b", "other").unwrap(), "research:b");
        assert!(replay.complete(Role::Research, "a", "x").is_err());
        let before = std::fs::read(&path).unwrap();
        save_scripts(&path, &replay).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), before);
    }

    #[test]
    fn conflicting_entries_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let (role, hash) = key(Role::Taxonomy, "p");
        let e = |r: &str| ScriptEntry { role, prompt_hash: hash.clone(), response: r.into() };
        jsonl::write(&path, &[e("x"), e("x")]).unwrap();
        assert_eq!(load_scripts(&path).unwrap().len(), 1);
        jsonl::write(&path, &[e("x"), e("y")]).unwrap();
        assert!(load_scripts(&path).unwrap_err().to_string().contains("conflicting"));
    }
}
