//! Corpus ingestion: markdown section trees, molecule linking and
//! section-aware overlapping chunks.

mod chunk;
mod molecules;
mod sections;

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{MoleculeId, StudyStage};

pub use chunk::{chunk_sections, metadata_header, window_spans, Chunk, ChunkConfig, ChunkId, SectionPath};
pub use molecules::{link_molecules, MoleculeRegistry};
pub use sections::{parse_sections, SectionNode, SectionTree, WordSpan};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IngestError {
    #[error("document body contains no words")]
    EmptyDocument,
    #[error("chunk size {size} must exceed overlap {overlap}")]
    InvalidChunkConfig { size: usize, overlap: usize },
    #[error("document {doc_id} mentions no registered molecule")]
    UnlinkedDocument { doc_id: String },
    #[error("invalid molecule registry: {0}")]
    InvalidRegistry(String),
    #[error("section tree does not match body ({tree_words} words in tree, {body_words} in body)")]
    TreeMismatch { tree_words: usize, body_words: usize },
    #[error("invalid chunk id {0:?}")]
    InvalidChunkId(String),
}

/// One parsed source document as delivered by the upstream OCR stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: String,
    pub title: String,
    #[serde(default)]
    pub source_path: String,
    /// Identifiers declared by the source database; linking adds every
    /// molecule mentioned in the text.
    #[serde(default)]
    pub molecule_ids: BTreeSet<MoleculeId>,
    #[serde(default)]
    pub study_stage: StudyStage,
    /// ISO-8601 calendar date when known.
    #[serde(default)]
    pub date: Option<String>,
    #[serde(default)]
    pub keywords: Vec<String>,
    pub body: String,
}

/// Result of ingesting one document.
#[derive(Debug, Clone, PartialEq)]
pub enum Ingested {
    Linked { record: DocumentRecord, chunks: Vec<Chunk> },
    Quarantined { record: DocumentRecord, reason: IngestError },
}

/// Links, parses and chunks a single record. Unlinked documents are
/// returned for quarantine rather than dropped.
pub fn ingest_document(
    mut record: DocumentRecord,
    registry: &MoleculeRegistry,
    config: ChunkConfig,
) -> Result<Ingested, IngestError> {
    config.validate()?;
    match link_molecules(&record, registry) {
        Ok(ids) => record.molecule_ids = ids,
        Err(reason @ IngestError::UnlinkedDocument { .. }) => {
            return Ok(Ingested::Quarantined { record, reason });
        }
        Err(e) => return Err(e),
    }
    let tree = parse_sections(&record.body)?;
    let mut chunks = chunk_sections(&record.doc_id, &tree, &record.body, config)?;
    let header = metadata_header(&record);
    for c in &mut chunks {
        c.metadata_header = header.clone();
        c.molecule_ids = record.molecule_ids.iter().cloned().collect();
        c.study_stage = record.study_stage;
        c.title = record.title.clone();
    }
    Ok(Ingested::Linked { record, chunks })
}
