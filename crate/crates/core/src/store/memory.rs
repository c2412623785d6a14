use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde_json::Value;

use super::{Payload, PayloadStore, StoreError, VersionSel};
use crate::ids::{ComponentId, EntryId};

/// In-memory payload store.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MemoryStore {
    entries: BTreeMap<EntryId, Vec<Payload>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entry_ids(&self) -> impl Iterator<Item = &EntryId> {
        self.entries.keys()
    }

    /// Inserts an already-versioned payload, as read back from disk.
    pub(crate) fn restore(&mut self, entry: EntryId, payload: Payload) {
        self.entries.entry(entry).or_default().push(payload);
    }

    /// Latest body per entry; used to compare store states.
    pub fn latest_bodies(&self) -> BTreeMap<EntryId, Value> {
        self.entries
            .iter()
            .filter_map(|(k, v)| v.last().map(|p| (k.clone(), p.body.clone())))
            .collect()
    }
}

impl PayloadStore for MemoryStore {
    fn put_payload(
        &mut self,
        entry: &EntryId,
        data_type: &ComponentId,
        produced_at: DateTime<Utc>,
        body: Value,
    ) -> Result<Payload, StoreError> {
        let history = self.entries.entry(entry.clone()).or_default();
        let payload = Payload {
            data_type: data_type.clone(),
            version: history.len() as u64 + 1,
            produced_at,
            body,
        };
        history.push(payload.clone());
        Ok(payload)
    }

    fn get_payload(&self, entry: &EntryId, version: VersionSel) -> Result<Payload, StoreError> {
        let history = self
            .entries
            .get(entry)
            .ok_or_else(|| StoreError::NotFound(format!("entry `{entry}`")))?;
        let found = match version {
            VersionSel::Latest => history.last(),
            VersionSel::Exact(v) => v.checked_sub(1).and_then(|i| history.get(i as usize)),
        };
        found
            .cloned()
            .ok_or_else(|| StoreError::NotFound(format!("entry `{entry}` version {version:?}")))
    }

    fn latest_version(&self, entry: &EntryId) -> u64 {
        self.entries.get(entry).map_or(0, |h| h.len() as u64)
    }

    fn history(&self, entry: &EntryId) -> Vec<Payload> {
        self.entries.get(entry).cloned().unwrap_or_default()
    }
}
