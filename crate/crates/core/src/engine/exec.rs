use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::graph::{build_dependency_graph, execution_order};
use super::{EngineError, Runtime};
use crate::ids::{EntryId, InstanceId};
use crate::model::{resolve_params, validate_body, Catena, FunctionInstance};
use crate::store::PayloadStore;
use crate::techniques::TechniqueInputs;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum InstanceStatus {
    Ok,
    Failed { reason: String },
    SkippedMissingInput,
}

impl InstanceStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, InstanceStatus::Ok)
    }

    fn failed(reason: impl Into<String>) -> Self {
        InstanceStatus::Failed { reason: reason.into() }
    }
}

impl fmt::Display for InstanceStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceStatus::Ok => f.write_str("ok"),
            InstanceStatus::Failed { reason } => write!(f, "failed({reason})"),
            InstanceStatus::SkippedMissingInput => f.write_str("skipped-missing-input"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    /// Instances considered, in execution order.
    pub executed: Vec<InstanceId>,
    pub statuses: BTreeMap<InstanceId, InstanceStatus>,
    /// Output entries written, with the version stored.
    pub written: BTreeMap<EntryId, u64>,
    /// View instances whose inputs changed, with their ancestors.
    pub stale_views: BTreeSet<InstanceId>,
}

impl ExecutionResult {
    pub fn all_ok(&self) -> bool {
        self.statuses.values().all(InstanceStatus::is_ok)
    }

    pub fn status(&self, id: &str) -> Option<&InstanceStatus> {
        self.statuses.get(id)
    }
}

/// Views binding any of `entries`, plus every view containing one of them.
pub fn views_affected_by(catena: &Catena, entries: &BTreeSet<&EntryId>) -> BTreeSet<InstanceId> {
    let mut stale: BTreeSet<InstanceId> = catena
        .views
        .iter()
        .filter(|v| {
            v.bindings
                .values()
                .flat_map(|b| b.entries())
                .any(|e| entries.contains(e))
        })
        .map(|v| v.id.clone())
        .collect();
    loop {
        let parents: Vec<InstanceId> = catena
            .views
            .iter()
            .filter(|v| !stale.contains(&v.id) && v.children.values().any(|c| stale.contains(c)))
            .map(|v| v.id.clone())
            .collect();
        if parents.is_empty() {
            return stale;
        }
        stale.extend(parents);
    }
}

impl Runtime {
    /// Executes every function instance in dependency order.
    pub fn execute_catena<S: PayloadStore + ?Sized>(
        &self,
        catena: &Catena,
        store: &mut S,
        at: DateTime<Utc>,
    ) -> Result<ExecutionResult, EngineError> {
        let order = execution_order(&build_dependency_graph(catena)).map_err(EngineError::Cycle)?;
        let mut result = self.run_instances(catena, &order, store, at)?;
        let written: BTreeSet<&EntryId> = result.written.keys().collect();
        result.stale_views = views_affected_by(catena, &written);
        Ok(result)
    }

    /// Re-executes exactly the function instances reachable from `changed`,
    /// in the global execution order.
    pub fn propagate_update<S: PayloadStore + ?Sized>(
        &self,
        catena: &Catena,
        store: &mut S,
        changed: &[EntryId],
        at: DateTime<Utc>,
    ) -> Result<ExecutionResult, EngineError> {
        let graph = build_dependency_graph(catena);
        let order = execution_order(&graph).map_err(EngineError::Cycle)?;
        let affected = graph.functions_reachable_from(changed);
        let order: Vec<InstanceId> = order.into_iter().filter(|f| affected.contains(f)).collect();
        let mut result = self.run_instances(catena, &order, store, at)?;
        let touched: BTreeSet<&EntryId> = changed.iter().chain(result.written.keys()).collect();
        result.stale_views = views_affected_by(catena, &touched);
        Ok(result)
    }

    fn run_instances<S: PayloadStore + ?Sized>(
        &self,
        catena: &Catena,
        order: &[InstanceId],
        store: &mut S,
        at: DateTime<Utc>,
    ) -> Result<ExecutionResult, EngineError> {
        let producer: BTreeMap<&EntryId, &InstanceId> = catena
            .functions
            .iter()
            .flat_map(|f| f.outputs.values().map(move |e| (e, &f.id)))
            .collect();
        let mut result = ExecutionResult::default();
        for id in order {
            let func = catena
                .function(id.as_str())
                .ok_or_else(|| EngineError::UnknownInstance(id.clone()))?;
            let upstream_bad = func.input_entries().any(|e| {
                producer
                    .get(e)
                    .and_then(|p| result.statuses.get(*p))
                    .is_some_and(|s| !s.is_ok())
            });
            let status = if upstream_bad {
                InstanceStatus::SkippedMissingInput
            } else {
                self.run_one(func, store, at, &mut result.written)?
            };
            result.executed.push(id.clone());
            result.statuses.insert(id.clone(), status);
        }
        Ok(result)
    }

    fn run_one<S: PayloadStore + ?Sized>(
        &self,
        func: &FunctionInstance,
        store: &mut S,
        at: DateTime<Utc>,
        written: &mut BTreeMap<EntryId, u64>,
    ) -> Result<InstanceStatus, EngineError> {
        let Some(spec) = self.registry.functions.get(&func.spec) else {
            return Ok(InstanceStatus::failed(format!("unknown function spec `{}`", func.spec)));
        };
        let mut inputs = TechniqueInputs::default();
        for port in &spec.inputs {
            let Some(binding) = func.bindings.get(&port.name) else {
                return Ok(InstanceStatus::failed(format!("unbound port `{}`", port.name)));
            };
            let mut bodies = Vec::new();
            for entry in binding.sorted_entries() {
                match store.latest(entry) {
                    Some(p) => bodies.push(p.body),
                    None => return Ok(InstanceStatus::SkippedMissingInput),
                }
            }
            inputs.ports.insert(port.name.clone(), bodies);
        }
        let params = match resolve_params(&spec.params, &func.params) {
            Ok(p) => p,
            Err(e) => return Ok(InstanceStatus::failed(e.to_string())),
        };
        let mut outputs = match self.techniques.run(&spec.implementation, &inputs, &params) {
            Ok(o) => o,
            Err(e) => return Ok(InstanceStatus::failed(e.to_string())),
        };

        let mut staged: Vec<(&EntryId, &crate::ids::ComponentId, Value)> = Vec::new();
        for port in &spec.outputs {
            let Some(body) = outputs.remove(&port.name) else {
                return Ok(InstanceStatus::failed(format!("no value for output `{}`", port.name)));
            };
            let Some(descriptor) = self.registry.data_types.get(&port.data_type) else {
                return Ok(InstanceStatus::failed(format!(
                    "unknown data type `{}`",
                    port.data_type
                )));
            };
            let violations = validate_body(descriptor, &body);
            if let Some(v) = violations.first() {
                return Ok(InstanceStatus::failed(format!("output `{}` invalid: {v}", port.name)));
            }
            if let Some(entry) = func.outputs.get(&port.name) {
                staged.push((entry, &port.data_type, body));
            }
        }
        for (entry, data_type, body) in staged {
            let p = store.put_payload(entry, data_type, at, body)?;
            written.insert(entry.clone(), p.version);
        }
        Ok(InstanceStatus::Ok)
    }
}
