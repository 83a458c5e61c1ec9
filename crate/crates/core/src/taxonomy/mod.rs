//! Schema library, question-type routing, schema composition and
//! structured-output population.

mod builtin;
mod populate;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Domain;
use crate::ingest::ChunkId;
use crate::text;

pub use populate::{parse_values, populate, populate_prompt, validate_value, UNPOPULATED_NOT_FOUND};

/// Type id of the catch-all question type.
pub const GENERAL: &str = "GENERAL";

/// Current library format version.
pub const LIBRARY_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaxonomyError {
    #[error("invalid schema library: {0}")]
    InvalidLibrary(String),
    #[error("unknown question type {0}")]
    UnknownType(String),
    #[error("nothing to compose")]
    EmptyComposition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Text,
    /// `{"value": number, "unit": text}`.
    QuantityWithUnit,
    /// One of the field's `choices`.
    EnumChoice,
    /// Non-empty list of text items.
    EvidenceList,
    BooleanWithEvidence,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaField {
    pub field_id: String,
    pub label: String,
    pub value_kind: ValueKind,
    pub required: bool,
    /// Restricts provenance to evidence from one domain branch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub choices: Vec<String>,
}

/// Sub-query wording for one domain; `{molecule}` is replaced by the
/// canonical molecule id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionRule {
    pub domain: Domain,
    pub template: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionTypeDef {
    pub type_id: String,
    pub description: String,
    pub routing_keywords: Vec<String>,
    pub domains: Vec<Domain>,
    pub required_fields: Vec<SchemaField>,
    pub decomposition: Vec<DecompositionRule>,
}

impl QuestionTypeDef {
    /// Whether any routing keyword occurs in the query, ignoring case and
    /// hyphenation.
    pub fn routes(&self, query: &str) -> bool {
        let folded = text::fold_for_matching(query);
        self.routing_keywords.iter().any(|k| text::contains_bounded(&folded, text::fold_for_matching(k).trim()))
    }
}

/// Versioned, human-editable collection of question types.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaLibrary {
    pub version: u32,
    pub types: Vec<QuestionTypeDef>,
}

impl SchemaLibrary {
    pub fn new(types: Vec<QuestionTypeDef>) -> Result<Self, TaxonomyError> {
        let lib = SchemaLibrary { version: LIBRARY_VERSION, types };
        lib.validate()?;
        Ok(lib)
    }

    /// The shipped fixture library: one type per benchmark archetype plus
    /// the general fallback.
    pub fn builtin() -> Self {
        SchemaLibrary::new(builtin::types()).expect("builtin library is valid")
    }

    pub fn validate(&self) -> Result<(), TaxonomyError> {
        let bad = |m: String| Err(TaxonomyError::InvalidLibrary(m));
        if self.version != LIBRARY_VERSION {
            return bad(format!("unsupported version {}", self.version));
        }
        let mut ids = BTreeSet::new();
        for t in &self.types {
            if t.type_id.trim().is_empty() {
                return bad("empty type_id".into());
            }
            if !ids.insert(t.type_id.as_str()) {
                return bad(format!("duplicate type_id {}", t.type_id));
            }
            if t.required_fields.is_empty() {
                return bad(format!("{} has no fields", t.type_id));
            }
            if t.domains.is_empty() {
                return bad(format!("{} has no domains", t.type_id));
            }
            let mut fields = BTreeSet::new();
            for f in &t.required_fields {
                if !fields.insert(f.field_id.as_str()) {
                    return bad(format!("{} repeats field {}", t.type_id, f.field_id));
                }
                if (f.value_kind == ValueKind::EnumChoice) == f.choices.is_empty() {
                    return bad(format!("{}.{}: choices belong exactly to enum fields", t.type_id, f.field_id));
                }
                if f.domain.is_some_and(|d| !t.domains.contains(&d)) {
                    return bad(format!("{}.{} scoped to a domain the type does not cover", t.type_id, f.field_id));
                }
            }
            for d in &t.domains {
                if !t.decomposition.iter().any(|r| r.domain == *d) {
                    return bad(format!("{} has no decomposition rule for {d}", t.type_id));
                }
            }
        }
        if !ids.contains(GENERAL) {
            return bad("missing GENERAL type".into());
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<Self, TaxonomyError> {
        let lib: SchemaLibrary =
            serde_json::from_str(json).map_err(|e| TaxonomyError::InvalidLibrary(format!("{e}")))?;
        lib.validate()?;
        Ok(lib)
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("library serializes");
        s.push('\n');
        s
    }

    pub fn get(&self, type_id: &str) -> Option<&QuestionTypeDef> {
        self.types.iter().find(|t| t.type_id == type_id)
    }

    pub fn general(&self) -> &QuestionTypeDef {
        self.get(GENERAL).expect("validated library has GENERAL")
    }

    /// Types whose routing keywords occur in the query, by type id.
    pub fn route(&self, query: &str) -> Vec<&QuestionTypeDef> {
        let mut out: Vec<&QuestionTypeDef> =
            self.types.iter().filter(|t| t.type_id != GENERAL && t.routes(query)).collect();
        out.sort_by(|a, b| a.type_id.cmp(&b.type_id));
        out
    }
}

/// Union of the classifier's types and keyword-routed types, deduplicated
/// and ordered by type id. Unknown classifier ids are ignored; GENERAL is
/// kept only when nothing more specific matched.
pub fn match_question_types<'a>(
    library: &'a SchemaLibrary,
    query: &str,
    classified: &[String],
) -> Vec<&'a QuestionTypeDef> {
    let mut ids: BTreeSet<&str> = library.route(query).into_iter().map(|t| t.type_id.as_str()).collect();
    ids.extend(classified.iter().filter_map(|c| library.get(c)).map(|t| t.type_id.as_str()));
    if ids.len() > 1 {
        ids.remove(GENERAL);
    }
    if ids.is_empty() {
        return alloc::vec![library.general()];
    }
    ids.into_iter().filter_map(|id| library.get(id)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositeField {
    pub field: SchemaField,
    /// Every source type that declared this field, in composition order.
    pub origins: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositeSchema {
    pub source_type_ids: Vec<String>,
    pub fields: Vec<CompositeField>,
}

impl CompositeSchema {
    pub fn field(&self, field_id: &str) -> Option<&CompositeField> {
        self.fields.iter().find(|f| f.field.field_id == field_id)
    }
}

/// Concatenates the types' fields in order. A field id seen before keeps
/// its first definition, gains the later origin, and stays required if any
/// declaration requires it.
pub fn compose(types: &[&QuestionTypeDef]) -> Result<CompositeSchema, TaxonomyError> {
    if types.is_empty() {
        return Err(TaxonomyError::EmptyComposition);
    }
    let mut fields: Vec<CompositeField> = Vec::new();
    let mut source_type_ids = Vec::new();
    for t in types {
        if !source_type_ids.contains(&t.type_id) {
            source_type_ids.push(t.type_id.clone());
        }
        for f in &t.required_fields {
            match fields.iter_mut().find(|c| c.field.field_id == f.field_id) {
                Some(existing) => {
                    if !existing.origins.contains(&t.type_id) {
                        existing.origins.push(t.type_id.clone());
                    }
                    existing.field.required |= f.required;
                }
                None => fields.push(CompositeField { field: f.clone(), origins: alloc::vec![t.type_id.clone()] }),
            }
        }
    }
    Ok(CompositeSchema { source_type_ids, fields })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldValue {
    pub value: serde_json::Value,
    pub provenance: Vec<ChunkId>,
    pub origins: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unpopulated {
    pub field_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredOutput {
    pub query_id: String,
    pub schema: CompositeSchema,
    pub values: BTreeMap<String, FieldValue>,
    pub unpopulated: Vec<Unpopulated>,
}
