//! Pull connectors and their polling schedule.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::import::{parse_document, ImportError};
use crate::builtin::{daos, parsers};
use crate::ids::{ComponentId, EntryId};
use crate::model::{
    validate_body, Catena, CollectionWindow, ComponentRegistry, DataEntry, EntrySource, Params, SchemaViolation,
};
use crate::store::{Payload, PayloadStore, StoreError};

#[derive(Debug, Error)]
pub enum PullError {
    #[error("source unreachable: {0}")]
    Unreachable(String),
    #[error("source data rejected: {0}")]
    Import(#[from] ImportError),
    #[error("data does not match `{data_type}`: {}", .violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Schema {
        data_type: ComponentId,
        violations: Vec<SchemaViolation>,
    },
    #[error("entry `{0}` is not pull-bound")]
    NotPullBound(EntryId),
    #[error("unknown DAO package `{0}`")]
    UnknownPackage(ComponentId),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Fetches the current body of one data type from an external source.
pub trait Dao: Send + Sync {
    fn fetch(&self, connection: &Params, data_type: &ComponentId) -> Result<Value, PullError>;
}

/// Reads a delimited-text file named by the `path` connection parameter.
/// Relative paths resolve against `base`.
#[derive(Debug, Clone)]
pub struct FileDao {
    pub parser: String,
    pub base: PathBuf,
}

impl Dao for FileDao {
    fn fetch(&self, connection: &Params, data_type: &ComponentId) -> Result<Value, PullError> {
        let rel = connection
            .get("path")
            .and_then(Value::as_str)
            .ok_or_else(|| PullError::Unreachable("missing `path` connection parameter".into()))?;
        let path = self.base.join(rel);
        let text =
            std::fs::read_to_string(&path).map_err(|e| PullError::Unreachable(format!("{}: {e}", path.display())))?;
        let mut bodies = parse_document(&self.parser, &text)?;
        bodies.remove(data_type).ok_or_else(|| PullError::Schema {
            data_type: data_type.clone(),
            violations: vec![SchemaViolation {
                path: "$".into(),
                message: format!("parser `{}` does not produce this type", self.parser),
            }],
        })
    }
}

#[derive(Clone, Default)]
pub struct DaoRegistry {
    daos: BTreeMap<ComponentId, Arc<dyn Dao>>,
}

impl std::fmt::Debug for DaoRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.daos.keys()).finish()
    }
}

impl DaoRegistry {
    /// The file DAO packages, resolving relative paths against `base`.
    pub fn builtin(base: impl Into<PathBuf>) -> Self {
        let base = base.into();
        let mut r = Self::default();
        for (id, parser) in [
            (daos::FILE_PLAN, parsers::PLAN_CSV),
            (daos::FILE_EFFORT, parsers::EFFORT_CSV),
            (daos::FILE_TIMESERIES, parsers::TIMESERIES_CSV),
        ] {
            r.register(
                id,
                FileDao {
                    parser: parser.into(),
                    base: base.clone(),
                },
            );
        }
        r
    }

    pub fn register(&mut self, id: &str, dao: impl Dao + 'static) {
        self.daos.insert(id.into(), Arc::new(dao));
    }

    pub fn get(&self, id: &ComponentId) -> Option<&Arc<dyn Dao>> {
        self.daos.get(id)
    }
}

/// Last successful pull per entry.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PullState {
    pub last_pulled: BTreeMap<EntryId, DateTime<Utc>>,
}

/// The due rule: inside the window, and never pulled or at least one
/// interval since the last pull.
pub fn is_due(window: &CollectionWindow, last: Option<DateTime<Utc>>, now: DateTime<Utc>) -> bool {
    window.start <= now && now <= window.end && last.is_none_or(|l| now - l >= Duration::seconds(window.interval_s))
}

/// Pull-bound entries of `catena` due at `now`, in entry-id order.
pub fn poll_due(catena: &Catena, state: &PullState, now: DateTime<Utc>) -> Vec<EntryId> {
    let mut due: Vec<EntryId> = catena
        .data_entries
        .iter()
        .filter(|e| match &e.source {
            EntrySource::Dao { window, .. } => is_due(window, state.last_pulled.get(&e.id).copied(), now),
            _ => false,
        })
        .map(|e| e.id.clone())
        .collect();
    due.sort();
    due
}

/// Pulls one entry and stores the result as a new payload version. On
/// failure nothing is written and the last-pulled time is left unchanged.
pub fn pull_entry<S: PayloadStore + ?Sized>(
    entry: &DataEntry,
    registry: &ComponentRegistry,
    daos: &DaoRegistry,
    store: &mut S,
    state: &mut PullState,
    now: DateTime<Utc>,
) -> Result<Payload, PullError> {
    let EntrySource::Dao {
        package, connection, ..
    } = &entry.source
    else {
        return Err(PullError::NotPullBound(entry.id.clone()));
    };
    let dao = daos
        .get(package)
        .ok_or_else(|| PullError::UnknownPackage(package.clone()))?;
    let body = dao.fetch(connection, &entry.spec)?;
    if let Some(descriptor) = registry.data_types.get(&entry.spec) {
        let violations = validate_body(descriptor, &body);
        if !violations.is_empty() {
            return Err(PullError::Schema {
                data_type: entry.spec.clone(),
                violations,
            });
        }
    }
    let payload = store.put_payload(&entry.id, &entry.spec, now, body)?;
    state.last_pulled.insert(entry.id.clone(), now);
    Ok(payload)
}
