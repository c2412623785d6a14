//! Catena document format: pretty-printed JSON with the sections `meta`,
//! `data_entries`, `web_forms`, `functions`, and `views`.

use std::collections::BTreeSet;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use super::catena::{Catena, EntrySource};
use super::spec::{ComponentKind, ComponentRegistry};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DocumentError {
    #[error("malformed document at `{path}` (line {line}, column {column}): {message}")]
    Malformed {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown component ids: {}", .0.join(", "))]
    UnknownSpecs(Vec<String>),
}

/// Deserializes any document type, reporting the JSON path of the failure.
pub fn from_document<T: DeserializeOwned>(text: &str) -> Result<T, DocumentError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        DocumentError::Malformed {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })
}

/// Serializes any document type in the canonical pretty form with a trailing
/// newline.
pub fn to_document<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("document types serialize");
    s.push('\n');
    s
}

pub fn serialize_catena(catena: &Catena) -> String {
    to_document(catena)
}

/// Parses a catena document and checks that every referenced component id is
/// registered.
pub fn parse_catena(text: &str, registry: &ComponentRegistry) -> Result<Catena, DocumentError> {
    let catena: Catena = from_document(text)?;
    let unknown = unknown_specs(&catena, registry);
    if unknown.is_empty() {
        Ok(catena)
    } else {
        Err(DocumentError::UnknownSpecs(unknown))
    }
}

fn unknown_specs(catena: &Catena, registry: &ComponentRegistry) -> Vec<String> {
    let mut refs: Vec<(ComponentKind, &str)> = Vec::new();
    for e in &catena.data_entries {
        refs.push((ComponentKind::DataType, e.spec.as_str()));
        if let EntrySource::Dao { package, .. } = &e.source {
            refs.push((ComponentKind::DaoPackage, package.as_str()));
        }
    }
    refs.extend(
        catena
            .functions
            .iter()
            .map(|f| (ComponentKind::Function, f.spec.as_str())),
    );
    refs.extend(catena.views.iter().map(|v| (ComponentKind::View, v.spec.as_str())));
    refs.extend(
        catena
            .web_forms
            .iter()
            .map(|w| (ComponentKind::WebForm, w.spec.as_str())),
    );
    refs.into_iter()
        .filter(|(k, id)| !registry.contains(*k, id))
        .map(|(_, id)| id.to_owned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}
