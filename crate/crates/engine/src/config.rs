//! The TOML configuration file.
//!
//! ```toml
//! [pipeline]
//! k = 25
//! rerank_threshold = 0.7
//!
//! [providers]
//! mode = "stub"            # or "remote"
//! dimension = 64
//! scripts = "scripts.jsonl"
//! ```
//!
//! Every section and key is optional. Relative paths are resolved against
//! the directory holding the file.

use std::path::{Path, PathBuf};

use evidence_core::ingest::ChunkConfig;
use evidence_core::pipeline::PipelineConfig;
use evidence_core::providers::RetryPolicy;
use evidence_core::retrieval::Bm25Params;
use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderMode {
    #[default]
    Stub,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProvidersConfig {
    pub mode: ProviderMode,
    pub dimension: usize,
    /// Recorded LLM responses replayed in stub mode.
    pub scripts: Option<PathBuf>,
    pub embed_url: Option<String>,
    pub rerank_url: Option<String>,
    pub llm_url: Option<String>,
    pub timeout_ms: u64,
    pub retry: RetryPolicy,
}

impl Default for ProvidersConfig {
    fn default() -> Self {
        ProvidersConfig {
            mode: ProviderMode::Stub,
            dimension: 64,
            scripts: None,
            embed_url: None,
            rerank_url: None,
            llm_url: None,
            timeout_ms: 30_000,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub pipeline: PipelineConfig,
    pub chunking: ChunkConfig,
    pub bm25: Bm25Params,
    pub providers: ProvidersConfig,
    /// Schema library JSON; the built-in library when absent.
    pub schema_library: Option<PathBuf>,
}

impl EngineConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(EngineError::io(path))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| EngineError::parse(path, 0, e.message()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(p) = p.as_mut().filter(|p| p.is_relative()) {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.providers.scripts);
        resolve(&mut cfg.schema_library);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.pipeline;
        let bad = |m: &str| Err(EngineError::Invalid(m.into()));
        if p.k == 0 {
            return bad("pipeline.k must be at least 1");
        }
        if !(0.0..=1.0).contains(&p.rerank_threshold) {
            return bad("pipeline.rerank_threshold must lie in [0, 1]");
        }
        if !(-1.0..=1.0).contains(&p.dense_threshold) || !(-1.0..=1.0).contains(&p.maxsim_threshold) {
            return bad("similarity thresholds must lie in [-1, 1]");
        }
        if p.context_budget_words == 0 {
            return bad("pipeline.context_budget_words must be positive");
        }
        self.chunking.validate()?;
        if self.providers.dimension == 0 {
            return bad("providers.dimension must be positive");
        }
        if self.providers.mode == ProviderMode::Remote {
            let pr = &self.providers;
            if pr.embed_url.is_none() || pr.rerank_url.is_none() || pr.llm_url.is_none() {
                return bad("remote mode needs embed_url, rerank_url and llm_url");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        let cfg = EngineConfig::from_toml("").unwrap();
        assert_eq!(cfg, EngineConfig::default());
        assert_eq!(cfg.pipeline.k, 25);
        assert_eq!(cfg.chunking.size, 512);
        assert_eq!(cfg.providers.retry.attempts, 3);
    }

    #[test]
    fn partial_sections_override_single_keys() {
        let cfg = EngineConfig::from_toml("[pipeline]\nrerank_threshold = 0.8\n[providers]\ndimension = 32\n").unwrap();
        assert_eq!(cfg.pipeline.rerank_threshold, 0.8);
        assert_eq!(cfg.pipeline.max_refinements, 2);
        assert_eq!(cfg.providers.dimension, 32);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(EngineConfig::from_toml("[providers]\nmodee = \"stub\"\n").is_err());
        let mut cfg = EngineConfig::default();
        cfg.providers.mode = ProviderMode::Remote;
        assert!(cfg.validate().is_err());
        cfg.providers.mode = ProviderMode::Stub;
        cfg.chunking.overlap = 600;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn relative_paths_resolve_against_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("evsynth.toml");
        std::fs::write(&path, "[providers]\nscripts = \"s.jsonl\"\n").unwrap();
        let cfg = EngineConfig::load(&path).unwrap();
        assert_eq!(cfg.providers.scripts.unwrap(), dir.path().join("s.jsonl"));
    }
}
