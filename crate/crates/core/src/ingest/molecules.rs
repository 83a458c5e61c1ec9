use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{DocumentRecord, IngestError};
use crate::domain::MoleculeId;
use crate::text::contains_bounded;

/// Molecule identifiers and the aliases under which documents mention them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<MoleculeId, Vec<String>>", into = "BTreeMap<MoleculeId, Vec<String>>")]
pub struct MoleculeRegistry {
    entries: BTreeMap<MoleculeId, Vec<String>>,
}

impl MoleculeRegistry {
    pub fn new(entries: impl IntoIterator<Item = (MoleculeId, Vec<String>)>) -> Result<Self, IngestError> {
        let entries: BTreeMap<_, _> = entries.into_iter().collect();
        if entries.is_empty() {
            return Err(IngestError::InvalidRegistry("registry is empty".into()));
        }
        let mut seen: BTreeMap<String, &MoleculeId> = BTreeMap::new();
        for (id, aliases) in &entries {
            if aliases.is_empty() {
                return Err(IngestError::InvalidRegistry(format!("molecule {id} has no aliases")));
            }
            for alias in aliases {
                let key = alias.trim().to_lowercase();
                if key.is_empty() {
                    return Err(IngestError::InvalidRegistry(format!("molecule {id} has a blank alias")));
                }
                if let Some(other) = seen.insert(key, id) {
                    if other != id {
                        return Err(IngestError::InvalidRegistry(format!(
                            "alias {alias:?} registered to both {other} and {id}"
                        )));
                    }
                }
            }
        }
        Ok(MoleculeRegistry { entries })
    }

    pub fn ids(&self) -> impl Iterator<Item = &MoleculeId> {
        self.entries.keys()
    }

    pub fn aliases(&self, id: &MoleculeId) -> &[String] {
        self.entries.get(id).map_or(&[], Vec::as_slice)
    }

    pub fn contains(&self, id: &MoleculeId) -> bool {
        self.entries.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every molecule whose id or alias occurs in `text`.
    pub fn mentions(&self, text: &str) -> BTreeSet<MoleculeId> {
        self.entries
            .iter()
            .filter(|(id, aliases)| {
                contains_bounded(text, id.as_str()) || aliases.iter().any(|a| contains_bounded(text, a))
            })
            .map(|(id, _)| id.clone())
            .collect()
    }

    /// Rewrites alias mentions in `text` to canonical ids.
    pub fn canonicalize(&self, text: &str) -> String {
        let mut out = String::from(text);
        for (id, aliases) in &self.entries {
            for alias in aliases {
                out = replace_bounded(&out, alias, id.as_str());
            }
        }
        out
    }
}

impl TryFrom<BTreeMap<MoleculeId, Vec<String>>> for MoleculeRegistry {
    type Error = IngestError;

    fn try_from(value: BTreeMap<MoleculeId, Vec<String>>) -> Result<Self, Self::Error> {
        MoleculeRegistry::new(value)
    }
}

impl From<MoleculeRegistry> for BTreeMap<MoleculeId, Vec<String>> {
    fn from(value: MoleculeRegistry) -> Self {
        value.entries
    }
}

fn replace_bounded(text: &str, needle: &str, replacement: &str) -> String {
    let lower = text.to_lowercase();
    let needle_lower = needle.to_lowercase();
    // Lowercasing can change byte lengths for some scripts; fall back to the
    // original text rather than splice at the wrong offsets.
    if needle_lower.is_empty() || lower.len() != text.len() {
        return String::from(text);
    }
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    let mut from = 0;
    while let Some(pos) = lower[from..].find(&needle_lower) {
        let start = from + pos;
        let end = start + needle_lower.len();
        let before_ok = lower[..start].chars().next_back().is_none_or(|c| !c.is_alphanumeric());
        let after_ok = lower[end..].chars().next().is_none_or(|c| !c.is_alphanumeric());
        if before_ok && after_ok {
            out.push_str(&text[cursor..start]);
            out.push_str(replacement);
            cursor = end;
            from = end;
        } else {
            from = start + lower[start..].chars().next().map_or(1, char::len_utf8);
        }
    }
    out.push_str(&text[cursor..]);
    out
}

/// Molecules a document belongs to: its declared ids plus every registered
/// molecule whose id or alias appears in the title, keywords or body.
pub fn link_molecules(
    record: &DocumentRecord,
    registry: &MoleculeRegistry,
) -> Result<BTreeSet<MoleculeId>, IngestError> {
    if registry.is_empty() {
        return Err(IngestError::InvalidRegistry("registry is empty".into()));
    }
    let mut linked: BTreeSet<MoleculeId> =
        record.molecule_ids.iter().filter(|id| registry.contains(id)).cloned().collect();
    linked.extend(registry.mentions(&record.title));
    for kw in &record.keywords {
        linked.extend(registry.mentions(kw));
    }
    linked.extend(registry.mentions(&record.body));
    if linked.is_empty() {
        return Err(IngestError::UnlinkedDocument { doc_id: record.doc_id.clone() });
    }
    Ok(linked)
}
