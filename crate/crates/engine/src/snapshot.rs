//! Versioned binary snapshots of the sealed indexes.
//!
//! Each index is written to its own file: 4 magic bytes, a little-endian
//! u32 format version, a one-byte kind tag, then the bincode payload. A
//! `manifest.json` next to them records dimension, chunk count, build time
//! and BM25 parameters, and is checked against the payloads on load.

use std::fs;
use std::path::Path;

use evidence_core::providers::Embedder;
use evidence_core::retrieval::{build_indexes, Bm25Params, DenseIndex, IndexSet, LexicalIndex, MultiVectorIndex};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::jsonl;
use crate::store::CorpusStore;

pub const MAGIC: &[u8; 4] = b"EVIX";
pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";
pub const LEXICAL_FILE: &str = "lexical.idx";
pub const DENSE_FILE: &str = "dense.idx";
pub const MULTI_FILE: &str = "multivector.idx";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
enum Kind {
    Lexical = 1,
    Dense = 2,
    Multi = 3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub dimension: usize,
    pub chunk_count: usize,
    /// RFC 3339.
    pub built_at: String,
    pub bm25: Bm25Params,
}

fn encode<T: Serialize>(path: &Path, kind: Kind, value: &T) -> Result<()> {
    let mut bytes = Vec::with_capacity(1 << 16);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bytes.push(kind as u8);
    bincode::serialize_into(&mut bytes, value).map_err(|e| EngineError::Internal(e.to_string()))?;
    let tmp = path.with_extension("idx.tmp");
    fs::write(&tmp, bytes).map_err(EngineError::io(&tmp))?;
    fs::rename(&tmp, path).map_err(EngineError::io(path))
}

fn decode<T: DeserializeOwned>(path: &Path, kind: Kind) -> Result<T> {
    let bytes = fs::read(path).map_err(EngineError::io(path))?;
    let bad = |m: String| EngineError::Snapshot { path: path.to_path_buf(), message: m };
    if bytes.len() < 9 || &bytes[..4] != MAGIC {
        return Err(bad("not an index snapshot".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(bad(format!("format version {version}, expected {FORMAT_VERSION}")));
    }
    if bytes[8] != kind as u8 {
        return Err(bad(format!("holds index kind {}, expected {}", bytes[8], kind as u8)));
    }
    bincode::deserialize(&bytes[9..]).map_err(|e| bad(format!("corrupt payload: {e}")))
}

pub fn write_snapshot(dir: &Path, indexes: &IndexSet, bm25: Bm25Params) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(EngineError::io(dir))?;
    encode(&dir.join(LEXICAL_FILE), Kind::Lexical, &indexes.lexical)?;
    encode(&dir.join(DENSE_FILE), Kind::Dense, &indexes.dense)?;
    encode(&dir.join(MULTI_FILE), Kind::Multi, &indexes.multi)?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        dimension: indexes.dense.dimension(),
        chunk_count: indexes.lexical.len(),
        built_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        bm25,
    };
    jsonl::write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn read_snapshot(dir: &Path) -> Result<(IndexSet, Manifest)> {
    let manifest: Manifest = jsonl::read_json(&dir.join(MANIFEST))?;
    let path = dir.join(MANIFEST);
    let bad = |m: String| EngineError::Snapshot { path: path.clone(), message: m };
    if manifest.format_version != FORMAT_VERSION {
        return Err(bad(format!("format version {}", manifest.format_version)));
    }
    let lexical: LexicalIndex = decode(&dir.join(LEXICAL_FILE), Kind::Lexical)?;
    let dense: DenseIndex = decode(&dir.join(DENSE_FILE), Kind::Dense)?;
    let multi: MultiVectorIndex = decode(&dir.join(MULTI_FILE), Kind::Multi)?;
    if dense.dimension() != manifest.dimension || multi.dimension() != manifest.dimension {
        return Err(bad("index dimension disagrees with the manifest".into()));
    }
    let n = manifest.chunk_count;
    if lexical.len() != n || dense.len() != n || multi.len() != n {
        return Err(bad("index sizes disagree with the manifest".into()));
    }
    if lexical.params() != manifest.bm25 {
        return Err(bad("BM25 parameters disagree with the manifest".into()));
    }
    Ok((IndexSet { lexical, dense, multi }, manifest))
}

/// Builds all three indexes over a store and writes the snapshot.
pub fn index_store(store: &CorpusStore, out: &Path, embedder: &dyn Embedder, bm25: Bm25Params) -> Result<Manifest> {
    let indexes = build_indexes(store.chunks.values(), embedder, bm25)?;
    write_snapshot(out, &indexes, bm25)
}

#[cfg(test)]
mod tests {
    use super::*;
    use evidence_core::ingest::ChunkConfig;
    use evidence_core::providers::HashingEmbedder;

    fn store(dir: &Path) -> CorpusStore {
        let corpus = dir.join("c.jsonl");
        fs::write(
            &corpus,
            "{\"doc_id\":\"a\",\"title\":\"RO_A\",\"body\":\"# Dose\\nthe dose was 5 mg\\n# Route\\noral\"}\n",
        )
        .unwrap();
        let registry = dir.join("r.json");
        fs::write(&registry, r#"{"RO_A": ["alpha"]}"#).unwrap();
        crate::store::ingest_corpus(&corpus, &registry, &dir.join("store"), ChunkConfig::default()).unwrap();
        CorpusStore::open(&dir.join("store")).unwrap()
    }

    #[test]
    fn snapshot_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let s = store(dir.path());
        let out = dir.path().join("idx");
        let m = index_store(&s, &out, &HashingEmbedder::default(), Bm25Params::default()).unwrap();
        assert_eq!((m.dimension, m.chunk_count), (64, 2));
        let (set, m2) = read_snapshot(&out).unwrap();
        assert_eq!(m, m2);
        assert_eq!(set, build_indexes(s.chunks.values(), &HashingEmbedder::default(), Bm25Params::default()).unwrap());
        let hits = set.lexical.search("dose", 5).unwrap();
        assert_eq!(hits[0].chunk_id.to_string(), "a::0::0-5");
    }

    #[test]
    fn corrupt_or_mismatched_files_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        let s = store(dir.path());
        let out = dir.path().join("idx");
        index_store(&s, &out, &HashingEmbedder::default(), Bm25Params::default()).unwrap();

        fs::copy(out.join(DENSE_FILE), out.join(LEXICAL_FILE)).unwrap();
        let err = read_snapshot(&out).unwrap_err().to_string();
        assert!(err.contains("kind"), "{err}");

        index_store(&s, &out, &HashingEmbedder::default(), Bm25Params::default()).unwrap();
        let mut bytes = fs::read(out.join(MULTI_FILE)).unwrap();
        bytes[4] = 9;
        fs::write(out.join(MULTI_FILE), &bytes).unwrap();
        assert!(read_snapshot(&out).unwrap_err().to_string().contains("format version"));

        index_store(&s, &out, &HashingEmbedder::default(), Bm25Params::default()).unwrap();
        let mut m: Manifest = jsonl::read_json(&out.join(MANIFEST)).unwrap();
        m.chunk_count = 7;
        jsonl::write_json(&out.join(MANIFEST), &m).unwrap();
        assert!(read_snapshot(&out).unwrap_err().to_string().contains("sizes"));
    }
}
