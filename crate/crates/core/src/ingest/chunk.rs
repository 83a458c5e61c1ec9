use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::sections::{build_tree, scan, SectionTree};
use super::{DocumentRecord, IngestError};
use crate::domain::{MoleculeId, StudyStage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChunkConfig {
    pub size: usize,
    pub overlap: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        ChunkConfig { size: 512, overlap: 64 }
    }
}

impl ChunkConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.size <= self.overlap {
            return Err(IngestError::InvalidChunkConfig { size: self.size, overlap: self.overlap });
        }
        Ok(())
    }

    pub fn step(&self) -> usize {
        self.size - self.overlap
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SectionPath(pub Vec<u16>);

impl fmt::Display for SectionPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

/// Lineage coordinates of a chunk. Renders as `doc::section.path::start-end`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChunkId {
    pub doc_id: String,
    pub section_path: SectionPath,
    pub start_word: usize,
    pub end_word: usize,
}

impl fmt::Display for ChunkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}::{}::{}-{}", self.doc_id, self.section_path, self.start_word, self.end_word)
    }
}

impl FromStr for ChunkId {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || IngestError::InvalidChunkId(s.to_string());
        let mut parts = s.rsplitn(3, "::");
        let range = parts.next().ok_or_else(bad)?;
        let path = parts.next().ok_or_else(bad)?;
        let doc_id = parts.next().filter(|d| !d.is_empty()).ok_or_else(bad)?;
        let (start, end) = range.split_once('-').ok_or_else(bad)?;
        let start_word = start.parse().map_err(|_| bad())?;
        let end_word = end.parse().map_err(|_| bad())?;
        let section_path =
            path.split('.').map(|p| p.parse::<u16>()).collect::<Result<Vec<_>, _>>().map_err(|_| bad())?;
        if start_word >= end_word || section_path.is_empty() {
            return Err(bad());
        }
        Ok(ChunkId { doc_id: doc_id.to_string(), section_path: SectionPath(section_path), start_word, end_word })
    }
}

impl Serialize for ChunkId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ChunkId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub id: ChunkId,
    /// Words of the window joined by single spaces.
    pub text: String,
    pub word_count: usize,
    /// Rendered document metadata embedded alongside the text. Not counted
    /// against the word budget.
    #[serde(default)]
    pub metadata_header: String,
    #[serde(default)]
    pub section_heading: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub molecule_ids: Vec<MoleculeId>,
    #[serde(default)]
    pub study_stage: StudyStage,
}

impl Chunk {
    /// Text handed to embedding providers.
    pub fn embedding_text(&self) -> String {
        if self.metadata_header.is_empty() {
            self.text.clone()
        } else {
            format!("{}\n{}", self.metadata_header, self.text)
        }
    }
}

/// `[title | molecule_ids | study_stage | date]` on one line.
pub fn metadata_header(record: &DocumentRecord) -> String {
    let ids: Vec<&str> = record.molecule_ids.iter().map(MoleculeId::as_str).collect();
    format!(
        "[{} | {} | {} | {}]",
        record.title.trim(),
        ids.join(", "),
        record.study_stage.as_str(),
        record.date.as_deref().unwrap_or("undated")
    )
}

/// Sliding windows over `len` words. Starts advance by `size - overlap`; the
/// last window is clipped at `len`, so consecutive windows always share
/// exactly `overlap` words.
pub fn window_spans(len: usize, config: ChunkConfig) -> Result<Vec<(usize, usize)>, IngestError> {
    config.validate()?;
    let mut spans = Vec::new();
    if len == 0 {
        return Ok(spans);
    }
    let mut start = 0;
    loop {
        let end = (start + config.size).min(len);
        spans.push((start, end));
        if end >= len {
            break;
        }
        start += config.step();
    }
    Ok(spans)
}

/// Windows each section's own text independently; no chunk crosses a
/// section boundary. Chunk ids use document-level word offsets.
pub fn chunk_sections(
    doc_id: &str,
    tree: &SectionTree,
    body: &str,
    config: ChunkConfig,
) -> Result<Vec<Chunk>, IngestError> {
    config.validate()?;
    let scanned = scan(body);
    let expected = build_tree(&scanned)?;
    if expected.word_count != tree.word_count || expected.nodes.len() != tree.nodes.len() {
        return Err(IngestError::TreeMismatch { tree_words: tree.word_count, body_words: expected.word_count });
    }
    let words = scanned.words;
    let mut chunks = Vec::new();
    for node in &tree.nodes {
        let own = node.own;
        if own.end > words.len() || own.start > own.end {
            return Err(IngestError::TreeMismatch { tree_words: tree.word_count, body_words: words.len() });
        }
        for (s, e) in window_spans(own.len(), config)? {
            let (start, end) = (own.start + s, own.start + e);
            chunks.push(Chunk {
                id: ChunkId {
                    doc_id: doc_id.to_string(),
                    section_path: SectionPath(node.path.clone()),
                    start_word: start,
                    end_word: end,
                },
                text: words[start..end].join(" "),
                word_count: end - start,
                metadata_header: String::new(),
                section_heading: node.heading.clone(),
                title: String::new(),
                molecule_ids: Vec::new(),
                study_stage: StudyStage::Unknown,
            });
        }
    }
    Ok(chunks)
}
