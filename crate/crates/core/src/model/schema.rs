//! Checks payload bodies against data type schemas.

use chrono::{DateTime, NaiveDate, Utc};
use serde_json::{Map, Value};

use super::spec::{DataTypeDescriptor, FieldKind, SchemaField};

/// Parses either a calendar date (`YYYY-MM-DD`, taken as midnight UTC) or an
/// RFC 3339 timestamp.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d.and_hms_opt(0, 0, 0)?.and_utc());
    }
    DateTime::parse_from_rfc3339(s).ok().map(|t| t.with_timezone(&Utc))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaViolation {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for SchemaViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Validates `body` against the descriptor's schema, returning every
/// violation found.
pub fn validate_body(descriptor: &DataTypeDescriptor, body: &Value) -> Vec<SchemaViolation> {
    let mut out = Vec::new();
    match body.as_object() {
        Some(obj) => check_record(&descriptor.fields, obj, "$", &mut out),
        None => out.push(SchemaViolation {
            path: "$".into(),
            message: "body must be an object".into(),
        }),
    }
    out
}

fn check_record(fields: &[SchemaField], obj: &Map<String, Value>, path: &str, out: &mut Vec<SchemaViolation>) {
    for key in obj.keys() {
        if !fields.iter().any(|f| &f.name == key) {
            out.push(SchemaViolation {
                path: format!("{path}.{key}"),
                message: "unknown field".into(),
            });
        }
    }
    for field in fields {
        let fpath = format!("{path}.{}", field.name);
        match obj.get(&field.name) {
            None | Some(Value::Null) => {
                if !field.optional {
                    out.push(SchemaViolation {
                        path: fpath,
                        message: "missing required field".into(),
                    });
                }
            }
            Some(v) => check_value(field, v, &fpath, out),
        }
    }
}

/// Checks one value against a field's kind and constraint.
pub fn check_value(field: &SchemaField, value: &Value, path: &str, out: &mut Vec<SchemaViolation>) {
    let kind_ok = match &field.kind {
        FieldKind::Timestamp => value.as_str().and_then(parse_timestamp).is_some(),
        FieldKind::Number => value.as_f64().is_some_and(f64::is_finite),
        FieldKind::Integer => value.is_i64() || value.is_u64(),
        FieldKind::Text => value.is_string(),
        FieldKind::Boolean => value.is_boolean(),
        FieldKind::Reference => value.as_str().is_some_and(|s| !s.is_empty()),
        FieldKind::RecordList(inner) => match value.as_array() {
            Some(items) => {
                for (i, item) in items.iter().enumerate() {
                    let ipath = format!("{path}[{i}]");
                    match item.as_object() {
                        Some(obj) => check_record(inner, obj, &ipath, out),
                        None => out.push(SchemaViolation {
                            path: ipath,
                            message: "record must be an object".into(),
                        }),
                    }
                }
                true
            }
            None => false,
        },
    };
    if !kind_ok {
        out.push(SchemaViolation {
            path: path.to_owned(),
            message: format!("expected {}", kind_name(&field.kind)),
        });
        return;
    }
    if let Some(c) = &field.constraint {
        if !c.check(value) {
            out.push(SchemaViolation {
                path: path.to_owned(),
                message: format!("value {value} violates constraint {c}"),
            });
        }
    }
}

pub(crate) fn kind_name(kind: &FieldKind) -> &'static str {
    match kind {
        FieldKind::Timestamp => "timestamp",
        FieldKind::Number => "number",
        FieldKind::Integer => "integer",
        FieldKind::Text => "text",
        FieldKind::Boolean => "boolean",
        FieldKind::Reference => "reference",
        FieldKind::RecordList(_) => "record list",
    }
}

/// Converts a text form value to JSON per the field kind. Returns `None` when
/// the text cannot be read as that kind.
pub fn coerce_text(kind: &FieldKind, text: &str) -> Option<Value> {
    let t = text.trim();
    match kind {
        FieldKind::Timestamp => parse_timestamp(t).map(|_| Value::String(t.to_owned())),
        FieldKind::Number => t
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .and_then(|x| serde_json::Number::from_f64(x).map(Value::Number)),
        FieldKind::Integer => t.parse::<i64>().ok().map(Value::from),
        FieldKind::Text => Some(Value::String(text.to_owned())),
        FieldKind::Reference => (!t.is_empty()).then(|| Value::String(t.to_owned())),
        FieldKind::Boolean => match t {
            "true" => Some(Value::Bool(true)),
            "false" => Some(Value::Bool(false)),
            _ => None,
        },
        FieldKind::RecordList(_) => None,
    }
}
