#![allow(dead_code)]

use std::path::PathBuf;

use evidence_core::providers::HashingEmbedder;
use evidence_engine::config::EngineConfig;
use evidence_engine::engine::Engine;
use evidence_engine::fixtures::{load_queries, FixtureQuery};
use evidence_engine::{snapshot, store};
use tempfile::TempDir;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// The fixture corpus ingested and indexed into a temporary directory.
pub struct Fixture {
    pub dir: TempDir,
    pub store: PathBuf,
    pub index: PathBuf,
}

impl Fixture {
    pub fn build() -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let (store_dir, index) = (dir.path().join("store"), dir.path().join("index"));
        let cfg = EngineConfig::default();
        store::ingest_corpus(
            &fixtures().join("corpus.jsonl"),
            &fixtures().join("registry.json"),
            &store_dir,
            cfg.chunking,
        )
        .unwrap();
        let s = store::CorpusStore::open(&store_dir).unwrap();
        snapshot::index_store(&s, &index, &HashingEmbedder::new(cfg.providers.dimension), cfg.bm25).unwrap();
        Fixture { dir, store: store_dir, index }
    }

    pub fn engine(&self) -> Engine {
        Engine::open(config(), &self.store, &self.index).unwrap()
    }
}

/// Default configuration replaying the recorded scripts.
pub fn config() -> EngineConfig {
    let mut cfg = EngineConfig::default();
    cfg.providers.scripts = Some(fixtures().join("scripts.jsonl"));
    cfg
}

pub fn queries() -> Vec<FixtureQuery> {
    load_queries(&fixtures().join("queries.json")).unwrap()
}
