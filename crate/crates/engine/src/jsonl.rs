//! Line-delimited JSON files.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{EngineError, Result};

/// Reads every non-blank line; a malformed line fails with its number.
pub fn read<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(EngineError::io(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(EngineError::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| EngineError::parse(path, i + 1, e))?);
    }
    Ok(out)
}

/// Like [`read`], but a missing file reads as empty.
pub fn read_or_empty<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if path.exists() {
        read(path)
    } else {
        Ok(Vec::new())
    }
}

/// Replaces `path` with one line per item, via a temporary file and rename.
pub fn write<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let tmp = path.with_extension("jsonl.tmp");
    {
        let file = File::create(&tmp).map_err(EngineError::io(&tmp))?;
        let mut w = BufWriter::new(file);
        for item in items {
            let line = serde_json::to_string(item).map_err(|e| EngineError::Internal(e.to_string()))?;
            writeln!(w, "{line}").map_err(EngineError::io(&tmp))?;
        }
        w.into_inner().map_err(|e| EngineError::io(&tmp)(e.into_error()))?.sync_all().map_err(EngineError::io(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(EngineError::io(path))
}

/// Appends one line and flushes it to disk.
pub fn append<T: Serialize>(path: &Path, item: &T) -> Result<()> {
    let line = serde_json::to_string(item).map_err(|e| EngineError::Internal(e.to_string()))?;
    let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(EngineError::io(path))?;
    writeln!(file, "{line}").map_err(EngineError::io(path))?;
    file.sync_data().map_err(EngineError::io(path))
}

/// Writes pretty JSON atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    let mut text = serde_json::to_string_pretty(value).map_err(|e| EngineError::Internal(e.to_string()))?;
    text.push('\n');
    fs::write(&tmp, text).map_err(EngineError::io(&tmp))?;
    fs::rename(&tmp, path).map_err(EngineError::io(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(EngineError::io(path))?;
    serde_json::from_str(&text).map_err(|e| EngineError::parse(path, e.line(), e))
}
