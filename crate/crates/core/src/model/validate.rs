//! Consistency checks over component specs and catenas.
//!
//! Validation never fails; it returns the complete list of defects so an
//! operator can fix a catena in one pass.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::catena::{resolve_params, Binding, Bindings, Catena, EntrySource, ParamError};
use super::spec::{
    duplicate_field_names, AccessMode, Arity, ComponentBody, ComponentKind, ComponentRegistry, DataTypeDescriptor,
    FieldKind, FormMode, ParamSpec, PortSpec,
};
use crate::graph::Digraph;
use crate::ids::{is_valid_id, ComponentId, EntryId, InstanceId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Diagnostic {
    pub subject: String,
    pub code: String,
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    pub fn error(subject: impl Into<String>, code: &str, message: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            code: code.to_owned(),
            severity: Severity::Error,
            message: message.into(),
        }
    }

    pub fn warning(subject: impl Into<String>, code: &str, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            ..Self::error(subject, code, message)
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev} {} [{}]: {}", self.subject, self.code, self.message)
    }
}

/// Diagnostic codes.
pub mod codes {
    pub const INVALID_ID: &str = "invalid-id";
    pub const DUPLICATE_ID: &str = "duplicate-id";
    pub const UNRESOLVED: &str = "unresolved";
    pub const SPEC_INVALID: &str = "spec-invalid";
    pub const TYPE_MISMATCH: &str = "type-mismatch";
    pub const UNBOUND_PORT: &str = "unbound-port";
    pub const UNKNOWN_PORT: &str = "unknown-port";
    pub const ARITY: &str = "arity";
    pub const MISSING_PARAM: &str = "missing-param";
    pub const UNKNOWN_PARAM: &str = "unknown-param";
    pub const CONSTRAINT: &str = "constraint-violation";
    pub const SOURCE: &str = "source";
    pub const WINDOW: &str = "window";
    pub const DERIVED_OUTPUT: &str = "derived-output";
    pub const CYCLE: &str = "cycle";
    pub const VIEW_CYCLE: &str = "view-cycle";
    pub const SLOT: &str = "slot";
    pub const FORM_BINDING: &str = "form-binding";
    pub const UNMANAGED_ENTRY: &str = "unmanaged-entry";
    pub const ID_IN_USE: &str = "id-in-use";
}

/// Outcome of validation: ok iff no error-severity diagnostic is present.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn from_diagnostics(mut diagnostics: Vec<Diagnostic>) -> Self {
        diagnostics.sort();
        diagnostics.dedup();
        let ok = diagnostics.iter().all(|d| d.severity != Severity::Error);
        Self { ok, diagnostics }
    }

    pub fn is_ok(&self) -> bool {
        self.ok
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Error)
    }

    pub fn has_code(&self, code: &str) -> bool {
        self.errors().any(|d| d.code == code)
    }
}

/// Intrinsic checks of a component body, independent of other components.
pub fn check_component(body: &ComponentBody) -> Vec<Diagnostic> {
    let id = body.id().to_string();
    let mut out = Vec::new();
    let mut bad = |msg: String| out.push(Diagnostic::error(id.clone(), codes::SPEC_INVALID, msg));
    if !is_valid_id(&id) {
        bad(format!("`{id}` is not a valid identifier"));
    }
    match body {
        ComponentBody::DataType(dt) => {
            if dt.fields.is_empty() {
                bad("data type must declare at least one field".into());
            }
            for dup in duplicate_field_names(&dt.fields) {
                bad(format!("duplicate schema field `{dup}`"));
            }
        }
        ComponentBody::Function(func) => {
            let names = func
                .inputs
                .iter()
                .map(|p| &p.name)
                .chain(func.outputs.iter().map(|p| &p.name));
            for dup in duplicates(names) {
                bad(format!("duplicate port name `{dup}`"));
            }
            if func.implementation.is_empty() {
                bad("missing implementation key".into());
            }
            check_param_specs(&func.params, &mut bad);
        }
        ComponentBody::View(view) => {
            for dup in duplicates(view.inputs.iter().map(|p| &p.name)) {
                bad(format!("duplicate port name `{dup}`"));
            }
            for dup in duplicates(view.slots.iter().map(|s| &s.name)) {
                bad(format!("duplicate slot name `{dup}`"));
            }
            check_param_specs(&view.params, &mut bad);
        }
        ComponentBody::WebForm(form) => {
            if form.targets.is_empty() {
                bad("web form must target at least one data type".into());
            }
            if let FormMode::ManualEntry { fields, key, .. } = &form.mode {
                if form.targets.len() != 1 {
                    bad("manual-entry forms target exactly one data type".into());
                }
                if fields.iter().any(|f| !f.kind.is_primitive()) {
                    bad("manual-entry fields must be primitive".into());
                }
                for dup in duplicate_field_names(fields) {
                    bad(format!("duplicate form field `{dup}`"));
                }
                if let Some(k) = key {
                    if !fields.iter().any(|f| &f.name == k) {
                        bad(format!("key field `{k}` is not a form field"));
                    }
                }
            }
        }
        ComponentBody::DaoPackage(dao) => {
            if dao.supports.is_empty() {
                bad("DAO package must support at least one data type".into());
            }
            check_param_specs(&dao.connection, &mut bad);
        }
    }
    out
}

fn check_param_specs(params: &[ParamSpec], bad: &mut impl FnMut(String)) {
    for dup in duplicates(params.iter().map(|p| &p.name)) {
        bad(format!("duplicate parameter `{dup}`"));
    }
    for p in params {
        if let Some(d) = &p.default {
            if !p.admits(d) {
                bad(format!(
                    "default {d} of parameter `{}` does not satisfy its kind or constraint",
                    p.name
                ));
            }
        }
    }
}

fn duplicates<'a>(names: impl Iterator<Item = &'a String>) -> Vec<&'a String> {
    let mut seen = BTreeSet::new();
    names.filter(|n| !seen.insert(*n)).collect()
}

/// References from a component body to data types.
fn referenced_data_types(body: &ComponentBody) -> Vec<&ComponentId> {
    match body {
        ComponentBody::DataType(_) => vec![],
        ComponentBody::Function(f) => f
            .inputs
            .iter()
            .map(|p| &p.data_type)
            .chain(f.outputs.iter().map(|p| &p.data_type))
            .collect(),
        ComponentBody::View(v) => v.inputs.iter().map(|p| &p.data_type).collect(),
        ComponentBody::WebForm(w) => w.targets.iter().collect(),
        ComponentBody::DaoPackage(d) => d.supports.iter().collect(),
    }
}

struct Ctx<'a> {
    catena: &'a Catena,
    registry: &'a ComponentRegistry,
    out: Vec<Diagnostic>,
    checked_specs: BTreeSet<(ComponentKind, ComponentId)>,
}

impl<'a> Ctx<'a> {
    fn push(&mut self, d: Diagnostic) {
        self.out.push(d);
    }

    /// Reports an unresolved spec, or checks the spec once when present.
    fn resolve(&mut self, subject: &str, kind: ComponentKind, id: &ComponentId) -> bool {
        if !self.registry.contains(kind, id.as_str()) {
            self.push(Diagnostic::error(
                subject,
                codes::UNRESOLVED,
                format!("{kind} `{id}` is not registered"),
            ));
            return false;
        }
        if self.checked_specs.insert((kind, id.clone())) {
            let body = spec_body(self.registry, kind, id);
            let mut diags = check_component(&body);
            for dt in referenced_data_types(&body) {
                if !self.registry.data_types.contains_key(dt) {
                    diags.push(Diagnostic::error(
                        id.as_str(),
                        codes::UNRESOLVED,
                        format!("data type `{dt}` referenced by {kind} `{id}` is not registered"),
                    ));
                }
            }
            let failed = diags.iter().any(|d| d.severity == Severity::Error);
            self.out.extend(diags);
            return !failed;
        }
        true
    }

    fn entry_type(&self, entry: &EntryId) -> Option<&'a ComponentId> {
        self.catena.entry(entry.as_str()).map(|e| &e.spec)
    }

    fn check_bindings(&mut self, subject: &str, ports: &[PortSpec], bindings: &Bindings) {
        for port in bindings.keys() {
            if !ports.iter().any(|p| &p.name == port) {
                self.push(Diagnostic::error(
                    subject,
                    codes::UNKNOWN_PORT,
                    format!("binding for undeclared port `{port}`"),
                ));
            }
        }
        for port in ports {
            let Some(binding) = bindings.get(&port.name) else {
                self.push(Diagnostic::error(
                    subject,
                    codes::UNBOUND_PORT,
                    format!("unbound port `{}`", port.name),
                ));
                continue;
            };
            match (port.arity, binding) {
                (Arity::One, Binding::Many(_)) => self.push(Diagnostic::error(
                    subject,
                    codes::ARITY,
                    format!("port `{}` accepts exactly one entry", port.name),
                )),
                (Arity::Many, Binding::Many(v)) if v.is_empty() => self.push(Diagnostic::error(
                    subject,
                    codes::ARITY,
                    format!("port `{}` needs at least one entry", port.name),
                )),
                _ => {}
            }
            for entry in binding.entries() {
                match self.entry_type(entry) {
                    None => self.push(Diagnostic::error(
                        subject,
                        codes::UNRESOLVED,
                        format!("port `{}` binds unknown entry `{entry}`", port.name),
                    )),
                    Some(t) if *t != port.data_type => self.push(Diagnostic::error(
                        subject,
                        codes::TYPE_MISMATCH,
                        format!(
                            "type mismatch: port `{}` requires `{}` but entry `{entry}` is `{t}`",
                            port.name, port.data_type
                        ),
                    )),
                    Some(_) => {}
                }
            }
        }
    }

    fn check_params(&mut self, subject: &str, specs: &[ParamSpec], given: &super::spec::Params) {
        // Report every parameter problem, not just the first.
        for name in given.keys() {
            if !specs.iter().any(|p| &p.name == name) {
                self.push(Diagnostic::error(
                    subject,
                    codes::UNKNOWN_PARAM,
                    format!("unknown parameter `{name}`"),
                ));
            }
        }
        let known: super::spec::Params = given
            .iter()
            .filter(|(k, _)| specs.iter().any(|p| &p.name == *k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        for spec in specs {
            let single = std::slice::from_ref(spec);
            let mut one = super::spec::Params::new();
            if let Some(v) = known.get(&spec.name) {
                one.insert(spec.name.clone(), v.clone());
            }
            match resolve_params(single, &one) {
                Ok(_) => {}
                Err(ParamError::Missing(n)) => self.push(Diagnostic::error(
                    subject,
                    codes::MISSING_PARAM,
                    format!("missing parameter `{n}`"),
                )),
                Err(e) => self.push(Diagnostic::error(subject, codes::CONSTRAINT, e.to_string())),
            }
        }
    }
}

fn spec_body(registry: &ComponentRegistry, kind: ComponentKind, id: &ComponentId) -> ComponentBody {
    match kind {
        ComponentKind::DataType => ComponentBody::DataType(registry.data_types[id].clone()),
        ComponentKind::Function => ComponentBody::Function(registry.functions[id].clone()),
        ComponentKind::View => ComponentBody::View(registry.views[id].clone()),
        ComponentKind::WebForm => ComponentBody::WebForm(registry.web_forms[id].clone()),
        ComponentKind::DaoPackage => ComponentBody::DaoPackage(registry.dao_packages[id].clone()),
    }
}

/// Validates every model invariant of `catena` against `registry`.
///
/// Diagnostics are sorted by subject, then code, then severity and message.
pub fn validate_catena(catena: &Catena, registry: &ComponentRegistry) -> ValidationReport {
    let mut ctx = Ctx {
        catena,
        registry,
        out: Vec::new(),
        checked_specs: BTreeSet::new(),
    };
    check_ids(&mut ctx);
    check_entries(&mut ctx);
    check_functions(&mut ctx);
    check_views(&mut ctx);
    check_forms(&mut ctx);
    check_function_cycles(&mut ctx);
    ValidationReport::from_diagnostics(ctx.out)
}

fn check_ids(ctx: &mut Ctx<'_>) {
    let c = ctx.catena;
    for (what, id) in [("catena", c.meta.id.as_str()), ("project", c.meta.project.as_str())] {
        if !is_valid_id(id) {
            ctx.push(Diagnostic::error(
                id,
                codes::INVALID_ID,
                format!("`{id}` is not a valid {what} identifier"),
            ));
        }
    }
    let entry_ids = c.data_entries.iter().map(|e| e.id.as_str());
    let instance_ids = c
        .functions
        .iter()
        .map(|f| f.id.as_str())
        .chain(c.views.iter().map(|v| v.id.as_str()))
        .chain(c.web_forms.iter().map(|w| w.id.as_str()));
    for ids in [entry_ids.collect::<Vec<_>>(), instance_ids.collect::<Vec<_>>()] {
        let mut seen = BTreeSet::new();
        for id in ids {
            if !is_valid_id(id) {
                ctx.push(Diagnostic::error(
                    id,
                    codes::INVALID_ID,
                    format!("`{id}` is not a valid identifier"),
                ));
            }
            if !seen.insert(id) {
                ctx.push(Diagnostic::error(
                    id,
                    codes::DUPLICATE_ID,
                    format!("id `{id}` is declared more than once"),
                ));
            }
        }
    }
}

fn check_entries(ctx: &mut Ctx<'_>) {
    let catena = ctx.catena;
    let registry = ctx.registry;
    for entry in &catena.data_entries {
        let subject = entry.id.as_str();
        ctx.resolve(subject, ComponentKind::DataType, &entry.spec);
        match &entry.source {
            EntrySource::Dao {
                package,
                connection,
                window,
            } => {
                if ctx.resolve(subject, ComponentKind::DaoPackage, package) {
                    let dao = &registry.dao_packages[package];
                    if !dao.supports.contains(&entry.spec) {
                        ctx.push(Diagnostic::error(
                            subject,
                            codes::SOURCE,
                            format!("DAO package `{package}` does not support `{}`", entry.spec),
                        ));
                    }
                    ctx.check_params(subject, &dao.connection, connection);
                    if dao.access == AccessMode::Pull && window.interval_s <= 0 {
                        ctx.push(Diagnostic::error(
                            subject,
                            codes::WINDOW,
                            "collection interval must be positive",
                        ));
                    }
                }
                if window.start > window.end {
                    ctx.push(Diagnostic::error(
                        subject,
                        codes::WINDOW,
                        "collection window starts after it ends",
                    ));
                }
            }
            EntrySource::Form => {
                let managed = catena
                    .web_forms
                    .iter()
                    .any(|w| w.bindings.values().any(|e| e == &entry.id));
                if !managed {
                    ctx.push(Diagnostic::warning(
                        subject,
                        codes::UNMANAGED_ENTRY,
                        "form-managed entry is not bound by any web form instance",
                    ));
                }
            }
            EntrySource::Derived { producer, port } => match catena.function(producer.as_str()) {
                None => ctx.push(Diagnostic::error(
                    subject,
                    codes::DERIVED_OUTPUT,
                    format!("producer `{producer}` is not a function instance"),
                )),
                Some(f) if f.outputs.get(port) != Some(&entry.id) => ctx.push(Diagnostic::error(
                    subject,
                    codes::DERIVED_OUTPUT,
                    format!("`{producer}` does not map output `{port}` to this entry"),
                )),
                Some(_) => {}
            },
        }
    }
}

fn check_functions(ctx: &mut Ctx<'_>) {
    let catena = ctx.catena;
    let registry = ctx.registry;
    for func in &catena.functions {
        let subject = func.id.as_str();
        if !ctx.resolve(subject, ComponentKind::Function, &func.spec) {
            continue;
        }
        let spec = &registry.functions[&func.spec];
        ctx.check_bindings(subject, &spec.inputs, &func.bindings);
        ctx.check_params(subject, &spec.params, &func.params);
        for port in func.outputs.keys() {
            if spec.output(port).is_none() {
                ctx.push(Diagnostic::error(
                    subject,
                    codes::UNKNOWN_PORT,
                    format!("output for undeclared port `{port}`"),
                ));
            }
        }
        for port in &spec.outputs {
            let Some(entry_id) = func.outputs.get(&port.name) else {
                ctx.push(Diagnostic::error(
                    subject,
                    codes::UNBOUND_PORT,
                    format!("output port `{}` has no derived entry", port.name),
                ));
                continue;
            };
            match catena.entry(entry_id.as_str()) {
                None => ctx.push(Diagnostic::error(
                    subject,
                    codes::UNRESOLVED,
                    format!("output port `{}` names unknown entry `{entry_id}`", port.name),
                )),
                Some(entry) => {
                    let derived_here = matches!(
                        &entry.source,
                        EntrySource::Derived { producer, port: p }
                            if producer == &func.id && p == &port.name
                    );
                    if !derived_here {
                        ctx.push(Diagnostic::error(
                            subject,
                            codes::DERIVED_OUTPUT,
                            format!("entry `{entry_id}` is not derived from `{subject}`.{}", port.name),
                        ));
                    }
                    if entry.spec != port.data_type {
                        ctx.push(Diagnostic::error(
                            subject,
                            codes::TYPE_MISMATCH,
                            format!(
                                "type mismatch: output `{}` produces `{}` but entry `{entry_id}` is `{}`",
                                port.name, port.data_type, entry.spec
                            ),
                        ));
                    }
                }
            }
        }
    }
}

fn check_views(ctx: &mut Ctx<'_>) {
    let catena = ctx.catena;
    let registry = ctx.registry;
    let mut children = Digraph::new();
    for view in &catena.views {
        let subject = view.id.as_str();
        children.add_node(view.id.clone());
        if !ctx.resolve(subject, ComponentKind::View, &view.spec) {
            continue;
        }
        let spec = &registry.views[&view.spec];
        ctx.check_bindings(subject, &spec.inputs, &view.bindings);
        ctx.check_params(subject, &spec.params, &view.params);
        for (slot, child) in &view.children {
            let Some(slot_spec) = spec.slots.iter().find(|s| &s.name == slot) else {
                ctx.push(Diagnostic::error(
                    subject,
                    codes::SLOT,
                    format!("view spec `{}` has no slot `{slot}`", spec.id),
                ));
                continue;
            };
            match catena.view(child.as_str()) {
                None => ctx.push(Diagnostic::error(
                    subject,
                    codes::UNRESOLVED,
                    format!("slot `{slot}` names unknown view instance `{child}`"),
                )),
                Some(c) => {
                    if let Some(accepts) = &slot_spec.accepts {
                        if &c.spec != accepts {
                            ctx.push(Diagnostic::error(
                                subject,
                                codes::SLOT,
                                format!("slot `{slot}` accepts `{accepts}`, got `{}`", c.spec),
                            ));
                        }
                    }
                    children.add_edge(view.id.clone(), child.clone());
                }
            }
        }
    }
    if let Err(members) = children.topo_order() {
        for m in members {
            ctx.push(Diagnostic::error(
                m.as_str(),
                codes::VIEW_CYCLE,
                "view hierarchy contains a cycle",
            ));
        }
    }
}

fn check_forms(ctx: &mut Ctx<'_>) {
    let catena = ctx.catena;
    let registry = ctx.registry;
    let mut managed_by: BTreeMap<&EntryId, &InstanceId> = BTreeMap::new();
    for form in &catena.web_forms {
        let subject = form.id.as_str();
        if !ctx.resolve(subject, ComponentKind::WebForm, &form.spec) {
            continue;
        }
        let spec = &registry.web_forms[&form.spec];
        if form.bindings.is_empty() {
            ctx.push(Diagnostic::error(
                subject,
                codes::FORM_BINDING,
                "web form instance binds no entries",
            ));
        }
        for (target, entry_id) in &form.bindings {
            if !spec.targets.contains(target) {
                ctx.push(Diagnostic::error(
                    subject,
                    codes::FORM_BINDING,
                    format!("`{target}` is not a target type of form `{}`", spec.id),
                ));
            }
            match catena.entry(entry_id.as_str()) {
                None => ctx.push(Diagnostic::error(
                    subject,
                    codes::UNRESOLVED,
                    format!("binds unknown entry `{entry_id}`"),
                )),
                Some(entry) => {
                    if !entry.is_form_managed() {
                        ctx.push(Diagnostic::error(
                            subject,
                            codes::FORM_BINDING,
                            format!("entry `{entry_id}` is not form-managed"),
                        ));
                    }
                    if &entry.spec != target {
                        ctx.push(Diagnostic::error(
                            subject,
                            codes::TYPE_MISMATCH,
                            format!(
                                "type mismatch: target `{target}` bound to entry `{entry_id}` of type `{}`",
                                entry.spec
                            ),
                        ));
                    }
                }
            }
            if let Some(other) = managed_by.insert(entry_id, &form.id) {
                if other != &form.id {
                    ctx.push(Diagnostic::warning(
                        subject,
                        codes::FORM_BINDING,
                        format!("entry `{entry_id}` is also managed by `{other}`"),
                    ));
                }
            }
        }
        if let FormMode::ManualEntry {
            fields, record_field, ..
        } = &spec.mode
        {
            for (form_field, schema_field) in &form.fields {
                if !fields.iter().any(|f| &f.name == form_field) {
                    ctx.push(Diagnostic::error(
                        subject,
                        codes::FORM_BINDING,
                        format!("field binding for unknown form field `{form_field}`"),
                    ));
                }
                let target_ok = spec
                    .targets
                    .first()
                    .and_then(|t| registry.data_types.get(t))
                    .is_none_or(|dt| record_has_field(dt, record_field, schema_field));
                if !target_ok {
                    ctx.push(Diagnostic::error(
                        subject,
                        codes::FORM_BINDING,
                        format!("schema has no field `{record_field}.{schema_field}`"),
                    ));
                }
            }
        }
    }
}

fn record_has_field(dt: &DataTypeDescriptor, record_field: &str, field: &str) -> bool {
    dt.fields.iter().any(|f| {
        f.name == record_field
            && matches!(&f.kind, FieldKind::RecordList(inner) if inner.iter().any(|i| i.name == field))
    })
}

/// Function-to-function dependency graph: `f -> g` when `g` binds an entry
/// derived from `f`.
pub fn function_graph(catena: &Catena) -> Digraph<InstanceId> {
    let mut producer: BTreeMap<&EntryId, &InstanceId> = BTreeMap::new();
    for f in &catena.functions {
        for e in f.outputs.values() {
            producer.insert(e, &f.id);
        }
    }
    for e in &catena.data_entries {
        if let EntrySource::Derived { producer: p, .. } = &e.source {
            producer.entry(&e.id).or_insert(p);
        }
    }
    let mut g = Digraph::new();
    for f in &catena.functions {
        g.add_node(f.id.clone());
        for e in f.input_entries() {
            if let Some(p) = producer.get(e) {
                g.add_edge((*p).clone(), f.id.clone());
            }
        }
    }
    g
}

fn check_function_cycles(ctx: &mut Ctx<'_>) {
    if let Err(members) = function_graph(ctx.catena).topo_order() {
        let listed = members.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(", ");
        for m in &members {
            ctx.push(Diagnostic::error(
                m.as_str(),
                codes::CYCLE,
                format!("cycle among function instances: {listed}"),
            ));
        }
    }
}
