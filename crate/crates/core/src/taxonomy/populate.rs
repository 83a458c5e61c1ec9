use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{CompositeSchema, FieldValue, SchemaField, StructuredOutput, Unpopulated, ValueKind};
use crate::ingest::ChunkId;
use crate::pipeline::{call_model, ComposedAnswer, Finding, LlmCall, NULL_DOMAIN_NOTE};
use crate::providers::{LanguageModel, ProviderError, Role};
use crate::text;

pub const UNPOPULATED_NOT_FOUND: &str = "not found in evidence";

#[derive(Serialize)]
struct PromptField<'a> {
    field_id: &'a str,
    label: &'a str,
    value_kind: ValueKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    domain: Option<crate::domain::Domain>,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    choices: &'a [String],
}

pub fn populate_prompt(schema: &CompositeSchema, answer: &ComposedAnswer) -> String {
    let fields: Vec<PromptField> = schema
        .fields
        .iter()
        .map(|f| PromptField {
            field_id: &f.field.field_id,
            label: &f.field.label,
            value_kind: f.field.value_kind,
            domain: f.field.domain,
            choices: &f.field.choices,
        })
        .collect();
    let findings: Vec<&Finding> = answer.sections.iter().flat_map(|s| &s.findings).collect();
    format!(
        "Fill the schema from the findings below. Cite as provenance only chunk ids that appear in the findings; \
         a field scoped to a domain may only cite findings of that domain.\n\
         Reply with JSON {{\"fields\": {{\"<field_id>\": {{\"value\": <value>, \"provenance\": [\"<chunk id>\"]}}}}}} \
         and leave out fields the findings do not support.\n\
         Value kinds: text is a string; quantity_with_unit is {{\"value\": number, \"unit\": string}}; \
         enum_choice is one of the listed choices; evidence_list is a list of strings; \
         boolean_with_evidence is true or false.\n\
         SCHEMA:\n{}\nFINDINGS:\n{}\n",
        serde_json::to_string(&fields).expect("fields serialize"),
        serde_json::to_string(&findings).expect("findings serialize"),
    )
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct RawFieldValue {
    #[serde(default)]
    pub value: Value,
    #[serde(default)]
    pub provenance: Vec<String>,
}

#[derive(Deserialize)]
struct RawReply {
    fields: BTreeMap<String, RawFieldValue>,
}

/// Parses the taxonomy reply grammar.
pub fn parse_values(response: &str) -> Result<BTreeMap<String, RawFieldValue>, ProviderError> {
    serde_json::from_str::<RawReply>(response.trim())
        .map(|r| r.fields)
        .map_err(|e| ProviderError::ParseFailure(format!("taxonomy reply: {e}")))
}

fn parse_quantity(s: &str) -> Option<(f64, String)> {
    let s = s.trim();
    let split = s.find(|c: char| !(c.is_ascii_digit() || c == '.' || c == '-' || c == '+' || c == 'e'))?;
    let (num, unit) = s.split_at(split);
    let value: f64 = num.trim().parse().ok()?;
    let unit = unit.trim();
    (!unit.is_empty() && value.is_finite()).then(|| (value, unit.to_string()))
}

fn quantity(value: f64, unit: &str) -> Value {
    let mut m = Map::new();
    m.insert("unit".into(), Value::String(unit.into()));
    m.insert("value".into(), Value::from(value));
    Value::Object(m)
}

/// Checks a value against its field's kind and returns the normalized form.
pub fn validate_value(field: &SchemaField, value: &Value) -> Result<Value, String> {
    match field.value_kind {
        ValueKind::Text => match value.as_str().map(str::trim) {
            Some(s) if !s.is_empty() => Ok(Value::String(s.into())),
            _ => Err("expected non-empty text".into()),
        },
        ValueKind::QuantityWithUnit => {
            let parsed = match value {
                Value::Object(m) => {
                    let v = m.get("value").and_then(Value::as_f64).filter(|v| v.is_finite());
                    let u = m.get("unit").and_then(Value::as_str).map(str::trim).filter(|u| !u.is_empty());
                    v.zip(u.map(String::from))
                }
                Value::String(s) => parse_quantity(s),
                _ => None,
            };
            parsed.map(|(v, u)| quantity(v, &u)).ok_or_else(|| "expected a number with a unit".into())
        }
        ValueKind::EnumChoice => {
            let given = value.as_str().map(text::fold_for_matching).unwrap_or_default();
            field
                .choices
                .iter()
                .find(|c| text::fold_for_matching(c) == given)
                .map(|c| Value::String(c.clone()))
                .ok_or_else(|| format!("expected one of {}", field.choices.join(", ")))
        }
        ValueKind::EvidenceList => {
            let items: Vec<String> = match value {
                Value::Array(a) => a.iter().filter_map(Value::as_str).map(|s| s.trim().to_string()).collect(),
                Value::String(s) => alloc::vec![s.trim().to_string()],
                _ => Vec::new(),
            };
            let count = value.as_array().map_or(1, Vec::len);
            if items.is_empty() || items.len() != count || items.iter().any(String::is_empty) {
                return Err("expected a non-empty list of text".into());
            }
            Ok(Value::Array(items.into_iter().map(Value::String).collect()))
        }
        ValueKind::BooleanWithEvidence => match value {
            Value::Bool(b) => Ok(Value::Bool(*b)),
            Value::String(s) => match s.trim().to_ascii_lowercase().as_str() {
                "yes" | "true" => Ok(Value::Bool(true)),
                "no" | "false" => Ok(Value::Bool(false)),
                _ => Err("expected true or false".into()),
            },
            _ => Err("expected true or false".into()),
        },
    }
}

/// Maps the composed answer onto the schema with one taxonomy call. Values
/// must cite chunks from the answer's findings (of the field's domain, when
/// scoped); anything else leaves the field unpopulated with a reason.
pub fn populate(
    schema: &CompositeSchema,
    answer: &ComposedAnswer,
    model: &dyn LanguageModel,
    trace_id: &str,
    calls: &mut Vec<LlmCall>,
) -> StructuredOutput {
    let mut out = StructuredOutput {
        query_id: answer.query_id.clone(),
        schema: schema.clone(),
        values: BTreeMap::new(),
        unpopulated: Vec::new(),
    };
    let prompt = populate_prompt(schema, answer);
    let reply = call_model(model, Role::Taxonomy, prompt, trace_id.into(), calls).and_then(|r| parse_values(&r));
    let raw = match reply {
        Ok(raw) => raw,
        Err(e) => {
            out.unpopulated = schema
                .fields
                .iter()
                .map(|f| Unpopulated {
                    field_id: f.field.field_id.clone(),
                    reason: format!("taxonomy response unusable: {e}"),
                })
                .collect();
            return out;
        }
    };

    let all_cited = answer.cited_chunks();
    for cf in &schema.fields {
        let f = &cf.field;
        let allowed: BTreeSet<&ChunkId> = match f.domain {
            Some(d) => answer.cited_in(d),
            None => all_cited.clone(),
        };
        let missing_reason = || match f.domain {
            Some(d) if answer.is_null(d) => NULL_DOMAIN_NOTE.to_string(),
            _ => UNPOPULATED_NOT_FOUND.to_string(),
        };
        let result = match raw.get(&f.field_id) {
            None => Err(missing_reason()),
            Some(r) if r.value.is_null() => Err(missing_reason()),
            Some(r) => check(f, r, &allowed),
        };
        match result {
            Ok((value, provenance)) => {
                out.values.insert(f.field_id.clone(), FieldValue { value, provenance, origins: cf.origins.clone() });
            }
            Err(reason) => out.unpopulated.push(Unpopulated { field_id: f.field_id.clone(), reason }),
        }
    }
    out
}

fn check(
    field: &SchemaField,
    raw: &RawFieldValue,
    allowed: &BTreeSet<&ChunkId>,
) -> Result<(Value, Vec<ChunkId>), String> {
    if raw.provenance.is_empty() {
        return Err("value cites no evidence".into());
    }
    let mut provenance: Vec<ChunkId> = Vec::new();
    for p in &raw.provenance {
        let id: ChunkId = p.parse().map_err(|_| format!("provenance {p:?} is not a chunk id"))?;
        if !allowed.contains(&id) {
            return Err(format!("cites {id}, which is not in the {} evidence", scope(field)));
        }
        if !provenance.contains(&id) {
            provenance.push(id);
        }
    }
    let value = validate_value(field, &raw.value).map_err(|e| format!("invalid value: {e}"))?;
    Ok((value, provenance))
}

fn scope(field: &SchemaField) -> &'static str {
    field.domain.map_or("answer's", |d| d.as_str())
}
