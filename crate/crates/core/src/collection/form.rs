//! Web form submission handling.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use super::import::{parse_document, ImportError};
use crate::ids::{ComponentId, EntryId, InstanceId};
use crate::model::schema::{check_value, coerce_text};
use crate::model::{validate_body, Catena, ComponentRegistry, FormMode, SchemaField, SchemaViolation, WebFormSpec};
use crate::store::{PayloadStore, StoreError};

/// Submitted content: field values for manual-entry forms, a document for
/// file-import forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SubmissionContent {
    /// Several records in one submission.
    Records { records: Vec<BTreeMap<String, Value>> },
    /// A single record.
    Values { values: BTreeMap<String, Value> },
    /// A document in the declared format.
    File { format: String, content: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormSubmission {
    pub form: InstanceId,
    pub submitted_by: String,
    pub submitted_at: DateTime<Utc>,
    pub content: SubmissionContent,
}

#[derive(Debug, Error)]
pub enum FormError {
    #[error("unknown form instance `{0}`")]
    UnknownForm(InstanceId),
    #[error("form `{form}` is misconfigured: {message}")]
    Misconfigured { form: InstanceId, message: String },
    #[error("submission rejected: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Rejected(Vec<SchemaViolation>),
    #[error("import failed: {0}")]
    Import(#[from] ImportError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl FormError {
    /// True for errors caused by the submitted content.
    pub fn is_rejection(&self) -> bool {
        matches!(self, FormError::Rejected(_) | FormError::Import(_))
    }
}

fn violation(path: impl Into<String>, message: impl Into<String>) -> SchemaViolation {
    SchemaViolation {
        path: path.into(),
        message: message.into(),
    }
}

fn text_of(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Builds one schema record from submitted values. Violation paths name the
/// form field.
fn build_record(
    fields: &[SchemaField],
    mapping: &BTreeMap<String, String>,
    values: &BTreeMap<String, Value>,
    prefix: &str,
    out: &mut Vec<SchemaViolation>,
) -> Map<String, Value> {
    let mut record = Map::new();
    for name in values.keys() {
        if !fields.iter().any(|f| &f.name == name) {
            out.push(violation(format!("{prefix}{name}"), "unknown form field"));
        }
    }
    for field in fields {
        let path = format!("{prefix}{}", field.name);
        let Some(raw) = values.get(&field.name).filter(|v| !v.is_null()) else {
            if !field.optional {
                out.push(violation(path, "missing required field"));
            }
            continue;
        };
        let coerced = text_of(raw).and_then(|t| coerce_text(&field.kind, &t));
        let Some(value) = coerced else {
            out.push(violation(
                path,
                format!(
                    "`{}` is not a valid {}",
                    text_of(raw).unwrap_or_else(|| raw.to_string()),
                    crate::model::schema::kind_name(&field.kind)
                ),
            ));
            continue;
        };
        let before = out.len();
        check_value(field, &value, &path, out);
        if out.len() == before {
            let target = mapping.get(&field.name).unwrap_or(&field.name);
            record.insert(target.clone(), value);
        }
    }
    record
}

/// Applies a submission. Every new body is computed and validated before any
/// is written; on error no entry changes. Returns the changed entry ids.
pub fn submit_form<S: PayloadStore + ?Sized>(
    submission: &FormSubmission,
    catena: &Catena,
    registry: &ComponentRegistry,
    store: &mut S,
) -> Result<Vec<EntryId>, FormError> {
    let form_id = &submission.form;
    let instance = catena
        .web_form(form_id.as_str())
        .ok_or_else(|| FormError::UnknownForm(form_id.clone()))?;
    let misconfigured = |message: String| FormError::Misconfigured {
        form: form_id.clone(),
        message,
    };
    let spec: &WebFormSpec = registry
        .web_forms
        .get(&instance.spec)
        .ok_or_else(|| misconfigured(format!("unknown form spec `{}`", instance.spec)))?;
    for entry in instance.bindings.values() {
        match catena.entry(entry.as_str()) {
            Some(e) if e.is_form_managed() => {}
            _ => return Err(misconfigured(format!("entry `{entry}` is not form-managed"))),
        }
    }

    let mut staged: Vec<(&EntryId, &ComponentId, Value)> = Vec::new();
    match (&spec.mode, &submission.content) {
        (
            FormMode::ManualEntry {
                record_field,
                fields,
                append,
                key,
            },
            SubmissionContent::Values { .. } | SubmissionContent::Records { .. },
        ) => {
            let (target, entry) = instance
                .bindings
                .iter()
                .next()
                .ok_or_else(|| misconfigured("no bound entry".into()))?;
            let batch: Vec<&BTreeMap<String, Value>> = match &submission.content {
                SubmissionContent::Values { values } => vec![values],
                SubmissionContent::Records { records } => records.iter().collect(),
                SubmissionContent::File { .. } => unreachable!(),
            };
            if batch.is_empty() {
                return Err(FormError::Rejected(vec![violation("records", "no records submitted")]));
            }
            let mut violations = Vec::new();
            let records: Vec<Map<String, Value>> = batch
                .iter()
                .enumerate()
                .map(|(i, values)| {
                    let prefix = if batch.len() > 1 {
                        format!("records[{i}].")
                    } else {
                        String::new()
                    };
                    build_record(fields, &instance.fields, values, &prefix, &mut violations)
                })
                .collect();
            if !violations.is_empty() {
                return Err(FormError::Rejected(violations));
            }
            let mut body = match (append, store.latest(entry)) {
                (true, Some(p)) => p.body,
                _ => Value::Object(Map::new()),
            };
            let obj = body
                .as_object_mut()
                .ok_or_else(|| misconfigured(format!("entry `{entry}` does not hold an object")))?;
            let list = obj
                .entry(record_field.clone())
                .or_insert_with(|| Value::Array(Vec::new()))
                .as_array_mut()
                .ok_or_else(|| misconfigured(format!("`{record_field}` is not a record list")))?;
            let key = key.as_ref().map(|k| instance.fields.get(k).unwrap_or(k).clone());
            for record in records {
                let existing = key.as_ref().and_then(|k| {
                    list.iter()
                        .position(|r| r.get(k).is_some() && r.get(k) == record.get(k))
                });
                match existing {
                    Some(i) => list[i] = Value::Object(record),
                    None => list.push(Value::Object(record)),
                }
            }
            staged.push((entry, target, body));
        }
        (FormMode::FileImport { parser }, SubmissionContent::File { format, content }) => {
            if format != parser {
                return Err(FormError::Rejected(vec![violation(
                    "format",
                    format!("form expects `{parser}`, got `{format}`"),
                )]));
            }
            let mut bodies = parse_document(parser, content)?;
            for (target, entry) in &instance.bindings {
                let body = bodies
                    .remove(target)
                    .ok_or_else(|| misconfigured(format!("parser `{parser}` does not produce `{target}`")))?;
                staged.push((entry, target, body));
            }
        }
        (FormMode::ManualEntry { .. }, SubmissionContent::File { .. }) => {
            return Err(FormError::Rejected(vec![violation(
                "content",
                "this form takes field values, not a file",
            )]));
        }
        (FormMode::FileImport { .. }, _) => {
            return Err(FormError::Rejected(vec![violation(
                "content",
                "this form takes a file upload",
            )]));
        }
    }

    let mut violations = Vec::new();
    for (_, target, body) in &staged {
        match registry.data_types.get(*target) {
            Some(d) => violations.extend(validate_body(d, body)),
            None => return Err(misconfigured(format!("unknown data type `{target}`"))),
        }
    }
    if !violations.is_empty() {
        return Err(FormError::Rejected(violations));
    }
    let mut changed = Vec::new();
    for (entry, target, body) in staged {
        store.put_payload(entry, target, submission.submitted_at, body)?;
        changed.push(entry.clone());
    }
    changed.sort();
    Ok(changed)
}
