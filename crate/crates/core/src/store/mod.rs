//! Versioned payload storage, the component repository, and the experience
//! base.

mod file;
mod memory;

use std::path::PathBuf;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::ids::{CatenaId, ComponentId, EntryId, ProjectId};
use crate::model::{ComponentBody, ComponentKind, Diagnostic};
use crate::techniques::types::Status;

pub use file::FileRepository;
pub use memory::MemoryStore;

/// Versioned, typed measurement data of one data entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    pub data_type: ComponentId,
    pub version: u64,
    pub produced_at: DateTime<Utc>,
    pub body: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VersionSel {
    Latest,
    Exact(u64),
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt store record at {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("invalid component: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidComponent(Vec<Diagnostic>),
    #[error("dangling references: {}", .0.join(", "))]
    Dangling(Vec<String>),
}

impl StoreError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        StoreError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Append-only, per-entry versioned payload history.
pub trait PayloadStore {
    /// Appends a new version for `entry` and returns the stored payload.
    /// Versions start at 1 and increase by one per put.
    fn put_payload(
        &mut self,
        entry: &EntryId,
        data_type: &ComponentId,
        produced_at: DateTime<Utc>,
        body: Value,
    ) -> Result<Payload, StoreError>;

    fn get_payload(&self, entry: &EntryId, version: VersionSel) -> Result<Payload, StoreError>;

    /// Highest stored version, 0 when the entry has no payload.
    fn latest_version(&self, entry: &EntryId) -> u64;

    /// Every stored version, oldest first.
    fn history(&self, entry: &EntryId) -> Vec<Payload>;

    fn latest(&self, entry: &EntryId) -> Option<Payload> {
        self.get_payload(entry, VersionSel::Latest).ok()
    }
}

/// A versioned component registration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRecord {
    pub kind: ComponentKind,
    pub id: ComponentId,
    pub version: u64,
    pub registered_at: DateTime<Utc>,
    #[serde(default)]
    pub tags: Vec<String>,
    pub body: ComponentBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub indicator: EntryId,
    pub first_non_green: DateTime<Utc>,
    pub final_status: Status,
    #[serde(default)]
    pub note: String,
}

/// Packaged experience of one project's control catena.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperiencePackage {
    pub project: ProjectId,
    pub catena: CatenaId,
    /// Instantiated component ids with their instance counts.
    pub reused: std::collections::BTreeMap<ComponentId, u64>,
    #[serde(default)]
    pub deviations: Vec<DeviationReport>,
    #[serde(default)]
    pub lessons: String,
}
