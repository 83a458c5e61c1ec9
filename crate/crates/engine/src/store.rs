//! The ingested corpus on disk.
//!
//! A store directory holds `documents.jsonl` (linked records),
//! `chunks.jsonl`, `quarantine.jsonl` (records no registered molecule
//! matched, with the reason) and `registry.json`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use evidence_core::ingest::{ingest_document, Chunk, ChunkConfig, ChunkId, DocumentRecord, Ingested, MoleculeRegistry};
use evidence_core::pipeline::ChunkStore;
use evidence_core::MoleculeId;
use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::jsonl;

pub const DOCUMENTS: &str = "documents.jsonl";
pub const CHUNKS: &str = "chunks.jsonl";
pub const QUARANTINE: &str = "quarantine.jsonl";
pub const REGISTRY: &str = "registry.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quarantined {
    pub record: DocumentRecord,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub documents: usize,
    pub linked: usize,
    pub quarantined: usize,
    pub chunks: usize,
}

/// Registry file: `{"RO7001": ["alias", ...], ...}`.
pub fn load_registry(path: &Path) -> Result<MoleculeRegistry> {
    let map: BTreeMap<MoleculeId, Vec<String>> = jsonl::read_json(path)?;
    Ok(MoleculeRegistry::new(map)?)
}

/// Links and chunks every record of a JSONL corpus into `out`.
pub fn ingest_corpus(corpus: &Path, registry_path: &Path, out: &Path, config: ChunkConfig) -> Result<IngestReport> {
    config.validate()?;
    let registry = load_registry(registry_path)?;
    let records: Vec<DocumentRecord> = jsonl::read(corpus)?;
    let mut ids = BTreeSet::new();
    for r in &records {
        if !ids.insert(r.doc_id.as_str()) {
            return Err(EngineError::DuplicateDocument(r.doc_id.clone()));
        }
    }
    let mut linked = Vec::new();
    let mut chunks = Vec::new();
    let mut quarantine = Vec::new();
    for record in records {
        let doc_id = record.doc_id.clone();
        match ingest_document(record, &registry, config)
            .map_err(|e| EngineError::Invalid(format!("document {doc_id}: {e}")))?
        {
            Ingested::Linked { record, chunks: cs } => {
                linked.push(record);
                chunks.extend(cs);
            }
            Ingested::Quarantined { record, reason } => {
                quarantine.push(Quarantined { record, reason: reason.to_string() });
            }
        }
    }
    fs::create_dir_all(out).map_err(EngineError::io(out))?;
    jsonl::write(&out.join(DOCUMENTS), &linked)?;
    jsonl::write(&out.join(CHUNKS), &chunks)?;
    jsonl::write(&out.join(QUARANTINE), &quarantine)?;
    jsonl::write_json(&out.join(REGISTRY), &BTreeMap::from(registry))?;
    Ok(IngestReport {
        documents: linked.len() + quarantine.len(),
        linked: linked.len(),
        quarantined: quarantine.len(),
        chunks: chunks.len(),
    })
}

/// A loaded store: registry and chunks by id.
#[derive(Debug, Clone)]
pub struct CorpusStore {
    pub dir: PathBuf,
    pub registry: MoleculeRegistry,
    pub chunks: BTreeMap<ChunkId, Chunk>,
}

impl CorpusStore {
    pub fn open(dir: &Path) -> Result<Self> {
        let registry = load_registry(&dir.join(REGISTRY))?;
        let list: Vec<Chunk> = jsonl::read(&dir.join(CHUNKS))?;
        let mut chunks = BTreeMap::new();
        for c in list {
            let id = c.id.clone();
            if chunks.insert(id.clone(), c).is_some() {
                return Err(EngineError::Invalid(format!("chunk {id} appears twice in the store")));
            }
        }
        Ok(CorpusStore { dir: dir.to_path_buf(), registry, chunks })
    }

    pub fn documents(&self) -> Result<Vec<DocumentRecord>> {
        jsonl::read(&self.dir.join(DOCUMENTS))
    }

    pub fn quarantine(&self) -> Result<Vec<Quarantined>> {
        jsonl::read_or_empty(&self.dir.join(QUARANTINE))
    }
}

impl ChunkStore for CorpusStore {
    fn chunk(&self, id: &ChunkId) -> Option<&Chunk> {
        self.chunks.get(id)
    }
}
