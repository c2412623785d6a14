//! Dependency analysis, execution, incremental propagation, and view
//! rendering over a validated catena.

mod exec;
mod graph;
mod view;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::ids::{EntryId, InstanceId};
use crate::model::{Catena, ComponentRegistry};
use crate::store::{PayloadStore, StoreError};
use crate::techniques::TechniqueRegistry;

pub use exec::{views_affected_by, ExecutionResult, InstanceStatus};
pub use graph::{build_dependency_graph, execution_order, DependencyGraph, Edge, Node};
pub use view::{input_versions, SlotModel, ViewModel, ViewStatus};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("cycle among function instances: {}", .0.iter().map(|i| i.as_str()).collect::<Vec<_>>().join(", "))]
    Cycle(Vec<InstanceId>),
    #[error("unknown function instance `{0}`")]
    UnknownInstance(InstanceId),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Component registry plus technique implementations: everything needed to
/// execute and render a catena.
#[derive(Debug, Clone)]
pub struct Runtime {
    pub registry: ComponentRegistry,
    pub techniques: TechniqueRegistry,
}

impl Runtime {
    pub fn new(registry: ComponentRegistry, techniques: TechniqueRegistry) -> Self {
        Self { registry, techniques }
    }

    /// Built-in components and techniques.
    pub fn builtin() -> Self {
        Self::new(crate::builtin::registry(), TechniqueRegistry::builtin())
    }
}

/// Tracks the input versions each view was last rendered from. A view is
/// stale when any bound entry now has a higher version.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ViewCache {
    rendered: BTreeMap<InstanceId, BTreeMap<EntryId, u64>>,
}

impl ViewCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, models: &[ViewModel]) {
        for m in models.iter().flat_map(ViewModel::flatten) {
            self.rendered.insert(m.view.clone(), m.source_versions.clone());
        }
    }

    pub fn is_stale<S: PayloadStore + ?Sized>(&self, catena: &Catena, view: &str, store: &S) -> bool {
        let Some(v) = catena.view(view) else {
            return false;
        };
        let seen = self.rendered.get(view);
        input_versions(v, store)
            .iter()
            .any(|(e, now)| seen.and_then(|s| s.get(e)).is_none_or(|was| now > was))
    }

    /// Stale views of `catena`, sorted by id.
    pub fn stale_views<S: PayloadStore + ?Sized>(&self, catena: &Catena, store: &S) -> BTreeSet<InstanceId> {
        catena
            .views
            .iter()
            .filter(|v| self.is_stale(catena, v.id.as_str(), store))
            .map(|v| v.id.clone())
            .collect()
    }
}
