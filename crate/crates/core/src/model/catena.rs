//! Instance-level composition: data entries, web form instances, function
//! instances, and view instances.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::spec::{Arity, ComponentRegistry, FunctionSpec, ParamSpec, Params};
use crate::ids::{CatenaId, ComponentId, EntryId, InstanceId, ProjectId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatenaMeta {
    pub id: CatenaId,
    pub project: ProjectId,
}

/// When and how often a pull binding collects data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectionWindow {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    /// Polling interval in seconds.
    pub interval_s: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum EntrySource {
    Dao {
        package: ComponentId,
        #[serde(default)]
        connection: Params,
        window: CollectionWindow,
    },
    Form,
    Derived {
        producer: InstanceId,
        port: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataEntry {
    pub id: EntryId,
    /// Data type of the entry.
    pub spec: ComponentId,
    pub source: EntrySource,
    /// Latest payload version known when the document was written.
    #[serde(default)]
    pub version: u64,
}

impl DataEntry {
    pub fn form(id: &str, data_type: &str) -> Self {
        Self {
            id: id.into(),
            spec: data_type.into(),
            source: EntrySource::Form,
            version: 0,
        }
    }

    pub fn derived(id: &str, data_type: &str, producer: &str, port: &str) -> Self {
        Self {
            id: id.into(),
            spec: data_type.into(),
            source: EntrySource::Derived {
                producer: producer.into(),
                port: port.to_owned(),
            },
            version: 0,
        }
    }

    pub fn is_form_managed(&self) -> bool {
        matches!(self.source, EntrySource::Form)
    }
}

/// One entry or an ordered list of entries bound to a port.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Binding {
    One(EntryId),
    Many(Vec<EntryId>),
}

impl Binding {
    pub fn entries(&self) -> &[EntryId] {
        match self {
            Binding::One(e) => std::slice::from_ref(e),
            Binding::Many(v) => v,
        }
    }

    /// Entries in execution order: sorted by id.
    pub fn sorted_entries(&self) -> Vec<&EntryId> {
        let mut v: Vec<_> = self.entries().iter().collect();
        v.sort();
        v
    }
}

impl From<&str> for Binding {
    fn from(s: &str) -> Self {
        Binding::One(s.into())
    }
}

pub type Bindings = BTreeMap<String, Binding>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionInstance {
    pub id: InstanceId,
    pub spec: ComponentId,
    #[serde(default)]
    pub bindings: Bindings,
    #[serde(default)]
    pub params: Params,
    /// Output port to derived entry.
    #[serde(default)]
    pub outputs: BTreeMap<String, EntryId>,
}

impl FunctionInstance {
    pub fn input_entries(&self) -> impl Iterator<Item = &EntryId> {
        self.bindings.values().flat_map(|b| b.entries())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewInstance {
    pub id: InstanceId,
    pub spec: ComponentId,
    #[serde(default)]
    pub bindings: Bindings,
    #[serde(default)]
    pub params: Params,
    /// Slot name to child view instance.
    #[serde(default)]
    pub children: BTreeMap<String, InstanceId>,
    #[serde(default)]
    pub visible_to: BTreeSet<String>,
}

impl ViewInstance {
    pub fn is_visible_to<'a>(&self, roles: impl IntoIterator<Item = &'a str>) -> bool {
        roles.into_iter().any(|r| self.visible_to.contains(r))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WebFormInstance {
    pub id: InstanceId,
    pub spec: ComponentId,
    /// Target data type id to the form-managed entry receiving it.
    #[serde(default)]
    pub bindings: BTreeMap<ComponentId, EntryId>,
    /// Form field to schema field; unmapped form fields keep their name.
    #[serde(default)]
    pub fields: BTreeMap<String, String>,
}

/// The instance-level composition for one project.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catena {
    pub meta: CatenaMeta,
    pub data_entries: Vec<DataEntry>,
    #[serde(default)]
    pub web_forms: Vec<WebFormInstance>,
    #[serde(default)]
    pub functions: Vec<FunctionInstance>,
    #[serde(default)]
    pub views: Vec<ViewInstance>,
}

impl Catena {
    pub fn new(id: &str, project: &str) -> Self {
        Self {
            meta: CatenaMeta {
                id: id.into(),
                project: project.into(),
            },
            data_entries: Vec::new(),
            web_forms: Vec::new(),
            functions: Vec::new(),
            views: Vec::new(),
        }
    }

    pub fn entry(&self, id: &str) -> Option<&DataEntry> {
        self.data_entries.iter().find(|e| e.id == id)
    }

    pub fn function(&self, id: &str) -> Option<&FunctionInstance> {
        self.functions.iter().find(|f| f.id == id)
    }

    pub fn view(&self, id: &str) -> Option<&ViewInstance> {
        self.views.iter().find(|v| v.id == id)
    }

    pub fn web_form(&self, id: &str) -> Option<&WebFormInstance> {
        self.web_forms.iter().find(|f| f.id == id)
    }

    /// Roles named on any view of this catena.
    pub fn roles(&self) -> BTreeSet<&str> {
        self.views
            .iter()
            .flat_map(|v| v.visible_to.iter().map(String::as_str))
            .collect()
    }

    /// Binds a function spec and appends the instance and its derived output
    /// entries to this catena.
    pub fn instantiate_function(
        &mut self,
        id: &str,
        spec: &FunctionSpec,
        bindings: Bindings,
        params: Params,
    ) -> Result<&FunctionInstance, BindError> {
        let bound = bind_function_instance(self, id, spec, bindings, params)?;
        self.data_entries.extend(bound.outputs);
        self.functions.push(bound.instance);
        Ok(self.functions.last().expect("just pushed"))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BindError {
    #[error("unbound port `{0}`")]
    UnboundPort(String),
    #[error("unknown port `{0}`")]
    UnknownPort(String),
    #[error("arity violation on port `{port}`: expected {expected}")]
    Arity { port: String, expected: &'static str },
    #[error("type mismatch on port `{port}`: entry `{entry}` is `{found}`, port requires `{expected}`")]
    TypeMismatch {
        port: String,
        entry: EntryId,
        expected: ComponentId,
        found: ComponentId,
    },
    #[error("unknown entry `{0}`")]
    UnknownEntry(EntryId),
    #[error("unknown function spec `{0}`")]
    UnknownSpec(String),
    #[error("id `{0}` already in use")]
    DuplicateId(String),
    #[error(transparent)]
    Param(#[from] ParamError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamError {
    #[error("missing parameter `{0}`")]
    Missing(String),
    #[error("unknown parameter `{0}`")]
    Unknown(String),
    #[error("constraint violation: parameter `{name}` = {value} must be {expected}")]
    Constraint {
        name: String,
        value: String,
        expected: String,
    },
}

/// Merges supplied values over defaults and checks kinds and constraints.
pub fn resolve_params(specs: &[ParamSpec], given: &Params) -> Result<Params, ParamError> {
    if let Some(unknown) = given.keys().find(|k| !specs.iter().any(|p| &p.name == *k)) {
        return Err(ParamError::Unknown(unknown.clone()));
    }
    let mut out = Params::new();
    for p in specs {
        let value = match given.get(&p.name).or(p.default.as_ref()) {
            Some(v) => v.clone(),
            None => return Err(ParamError::Missing(p.name.clone())),
        };
        if !p.admits(&value) {
            let expected = match &p.constraint {
                Some(c) if p.kind.accepts(&value) => c.to_string(),
                _ => format!("a {:?}", p.kind).to_lowercase(),
            };
            return Err(ParamError::Constraint {
                name: p.name.clone(),
                value: value.to_string(),
                expected,
            });
        }
        out.insert(p.name.clone(), value);
    }
    Ok(out)
}

/// A function instance together with its freshly allocated output entries.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundFunction {
    pub instance: FunctionInstance,
    pub outputs: Vec<DataEntry>,
}

/// Instantiates `spec` against entries of `catena`. Output entries are named
/// `<instance id>.<port>` and start at version 0.
pub fn bind_function_instance(
    catena: &Catena,
    id: &str,
    spec: &FunctionSpec,
    bindings: Bindings,
    params: Params,
) -> Result<BoundFunction, BindError> {
    if catena.function(id).is_some() {
        return Err(BindError::DuplicateId(id.to_owned()));
    }
    if let Some(port) = bindings.keys().find(|p| spec.input(p).is_none()) {
        return Err(BindError::UnknownPort(port.clone()));
    }
    for port in &spec.inputs {
        let binding = bindings
            .get(&port.name)
            .ok_or_else(|| BindError::UnboundPort(port.name.clone()))?;
        match (port.arity, binding) {
            (Arity::One, Binding::Many(_)) => {
                return Err(BindError::Arity {
                    port: port.name.clone(),
                    expected: "exactly one entry",
                })
            }
            (Arity::Many, Binding::Many(v)) if v.is_empty() => {
                return Err(BindError::Arity {
                    port: port.name.clone(),
                    expected: "at least one entry",
                })
            }
            _ => {}
        }
        for entry_id in binding.entries() {
            let entry = catena
                .entry(entry_id.as_str())
                .ok_or_else(|| BindError::UnknownEntry(entry_id.clone()))?;
            if entry.spec != port.data_type {
                return Err(BindError::TypeMismatch {
                    port: port.name.clone(),
                    entry: entry_id.clone(),
                    expected: port.data_type.clone(),
                    found: entry.spec.clone(),
                });
            }
        }
    }
    resolve_params(&spec.params, &params)?;

    let mut outputs = Vec::new();
    let mut output_map = BTreeMap::new();
    for port in &spec.outputs {
        let entry_id = format!("{id}.{}", port.name);
        if catena.entry(&entry_id).is_some() {
            return Err(BindError::DuplicateId(entry_id));
        }
        outputs.push(DataEntry::derived(&entry_id, port.data_type.as_str(), id, &port.name));
        output_map.insert(port.name.clone(), EntryId::new(entry_id));
    }
    Ok(BoundFunction {
        instance: FunctionInstance {
            id: id.into(),
            spec: spec.id.clone(),
            bindings,
            params,
            outputs: output_map,
        },
        outputs,
    })
}

/// Looks up the data type of `entry` within `catena`.
pub fn entry_type<'a>(catena: &'a Catena, entry: &str) -> Option<&'a ComponentId> {
    catena.entry(entry).map(|e| &e.spec)
}

/// Convenience used by composition and tests: bind against a registry spec id.
pub fn bind_by_id(
    catena: &Catena,
    registry: &ComponentRegistry,
    id: &str,
    spec_id: &str,
    bindings: Bindings,
    params: Params,
) -> Result<BoundFunction, BindError> {
    let spec = registry
        .functions
        .get(spec_id)
        .ok_or_else(|| BindError::UnknownSpec(spec_id.to_owned()))?;
    bind_function_instance(catena, id, spec, bindings, params)
}

/// Builds a `Params` map from `(name, value)` pairs.
pub fn params<const N: usize>(pairs: [(&str, Value); N]) -> Params {
    pairs.into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
}

/// Builds a `Bindings` map of single-entry bindings.
pub fn bindings<const N: usize>(pairs: [(&str, &str); N]) -> Bindings {
    pairs
        .into_iter()
        .map(|(k, v)| (k.to_owned(), Binding::One(v.into())))
        .collect()
}
