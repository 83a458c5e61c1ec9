//! A loaded corpus, index snapshot, schema library and provider set,
//! ready to answer queries.

use std::path::Path;
use std::time::Duration;

use evidence_core::ingest::MoleculeRegistry;
use evidence_core::pipeline::{run_query_with_clock, Corpus, PipelineConfig, Providers, RunOutput, RunRequest};
use evidence_core::providers::{Embedder, HashingEmbedder, LanguageModel, OverlapReranker, Reranker, ScriptedModel};
use evidence_core::retrieval::IndexSet;
use evidence_core::taxonomy::SchemaLibrary;

use crate::config::{EngineConfig, ProviderMode, ProvidersConfig};
use crate::error::{EngineError, Result};
use crate::remote::{HttpEndpoint, RemoteEmbedder, RemoteModel, RemoteReranker};
use crate::scripts::load_scripts;
use crate::snapshot::{read_snapshot, Manifest};
use crate::store::CorpusStore;

pub type SharedEmbedder = Box<dyn Embedder + Send + Sync>;
pub type SharedReranker = Box<dyn Reranker + Send + Sync>;
pub type SharedModel = Box<dyn LanguageModel + Send + Sync>;

pub struct ProviderSet {
    pub embedder: SharedEmbedder,
    pub reranker: SharedReranker,
    pub model: SharedModel,
}

impl ProviderSet {
    /// Offline providers; the model replays `scripts` or, without them,
    /// fails every call so each stage takes its fallback.
    pub fn stub(dimension: usize, scripts: ScriptedModel) -> Self {
        ProviderSet {
            embedder: Box::new(HashingEmbedder::new(dimension)),
            reranker: Box::new(OverlapReranker),
            model: Box::new(scripts),
        }
    }

    pub fn from_config(cfg: &ProvidersConfig) -> Result<Self> {
        match cfg.mode {
            ProviderMode::Stub => {
                let scripts = match &cfg.scripts {
                    Some(p) => load_scripts(p)?,
                    None => ScriptedModel::default(),
                };
                Ok(Self::stub(cfg.dimension, scripts))
            }
            ProviderMode::Remote => {
                let timeout = Duration::from_millis(cfg.timeout_ms);
                let ep = |url: &Option<String>, what: &str| -> Result<HttpEndpoint> {
                    let url =
                        url.as_deref().ok_or_else(|| EngineError::Invalid(format!("remote mode needs {what}")))?;
                    Ok(HttpEndpoint::new(url, timeout, cfg.retry)?)
                };
                Ok(ProviderSet {
                    embedder: Box::new(RemoteEmbedder::new(ep(&cfg.embed_url, "embed_url")?, cfg.dimension)),
                    reranker: Box::new(RemoteReranker::new(ep(&cfg.rerank_url, "rerank_url")?)),
                    model: Box::new(RemoteModel::new(ep(&cfg.llm_url, "llm_url")?)),
                })
            }
        }
    }
}

pub fn load_library(config: &EngineConfig) -> Result<SchemaLibrary> {
    match &config.schema_library {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(EngineError::io(path))?;
            Ok(SchemaLibrary::from_json(&text)?)
        }
        None => Ok(SchemaLibrary::builtin()),
    }
}

pub struct Engine {
    pub config: EngineConfig,
    pub store: CorpusStore,
    pub indexes: IndexSet,
    pub manifest: Manifest,
    pub library: SchemaLibrary,
    pub providers: ProviderSet,
}

impl Engine {
    pub fn open(config: EngineConfig, store_dir: &Path, index_dir: &Path) -> Result<Self> {
        let providers = ProviderSet::from_config(&config.providers)?;
        Self::with_providers(config, store_dir, index_dir, providers)
    }

    pub fn with_providers(
        config: EngineConfig,
        store_dir: &Path,
        index_dir: &Path,
        providers: ProviderSet,
    ) -> Result<Self> {
        let library = load_library(&config)?;
        let store = CorpusStore::open(store_dir)?;
        let (indexes, manifest) = read_snapshot(index_dir)?;
        if manifest.dimension != providers.embedder.dimension() {
            return Err(EngineError::Invalid(format!(
                "index was built with dimension {}, the embedder has {}",
                manifest.dimension,
                providers.embedder.dimension()
            )));
        }
        if let Some(missing) = indexes.lexical.chunk_ids().iter().find(|id| !store.chunks.contains_key(*id)) {
            return Err(EngineError::Invalid(format!("index refers to chunk {missing}, which is not in the store")));
        }
        Ok(Engine { config, store, indexes, manifest, library, providers })
    }

    pub fn registry(&self) -> &MoleculeRegistry {
        &self.store.registry
    }

    pub fn pipeline_config(&self) -> &PipelineConfig {
        &self.config.pipeline
    }

    pub fn run(&self, request: &RunRequest) -> Result<RunOutput> {
        self.run_with(request, &self.config.pipeline)
    }

    /// Runs with a different pipeline configuration, e.g. a branch order.
    pub fn run_with(&self, request: &RunRequest, cfg: &PipelineConfig) -> Result<RunOutput> {
        let corpus = Corpus {
            chunks: &self.store,
            lexical: &self.indexes.lexical,
            dense: &self.indexes.dense,
            multi: &self.indexes.multi,
            registry: &self.store.registry,
            library: &self.library,
        };
        let providers = Providers {
            embedder: &*self.providers.embedder,
            reranker: &*self.providers.reranker,
            model: &*self.providers.model,
        };
        let clock = || Some(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true));
        Ok(run_query_with_clock(request, &corpus, &providers, cfg, &clock)?)
    }
}
