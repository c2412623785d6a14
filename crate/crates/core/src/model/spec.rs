//! Type-level control components: data types, DAO packages, web forms,
//! functions, and views.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ids::ComponentId;

/// Parameter or field values keyed by name.
pub type Params = BTreeMap<String, Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentKind {
    DataType,
    Function,
    View,
    WebForm,
    DaoPackage,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 5] = [
        ComponentKind::DataType,
        ComponentKind::DaoPackage,
        ComponentKind::Function,
        ComponentKind::View,
        ComponentKind::WebForm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ComponentKind::DataType => "data-type",
            ComponentKind::Function => "function",
            ComponentKind::View => "view",
            ComponentKind::WebForm => "web-form",
            ComponentKind::DaoPackage => "dao-package",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Kind of a schema field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Timestamp,
    Number,
    Integer,
    Text,
    Boolean,
    Reference,
    RecordList(Vec<SchemaField>),
}

impl FieldKind {
    pub fn is_primitive(&self) -> bool {
        !matches!(self, FieldKind::RecordList(_))
    }
}

/// Predicate over a scalar value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Constraint {
    AtLeast(f64),
    GreaterThan(f64),
    AtMost(f64),
    Between(f64, f64),
    OneOf(Vec<String>),
}

impl Constraint {
    pub fn check(&self, value: &Value) -> bool {
        match self {
            Constraint::OneOf(allowed) => value.as_str().is_some_and(|s| allowed.iter().any(|a| a == s)),
            numeric => {
                let Some(x) = value.as_f64() else {
                    return false;
                };
                match numeric {
                    Constraint::AtLeast(min) => x >= *min,
                    Constraint::GreaterThan(min) => x > *min,
                    Constraint::AtMost(max) => x <= *max,
                    Constraint::Between(lo, hi) => *lo <= x && x <= *hi,
                    Constraint::OneOf(_) => unreachable!(),
                }
            }
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::AtLeast(v) => write!(f, ">= {v}"),
            Constraint::GreaterThan(v) => write!(f, "> {v}"),
            Constraint::AtMost(v) => write!(f, "<= {v}"),
            Constraint::Between(lo, hi) => write!(f, "in [{lo}, {hi}]"),
            Constraint::OneOf(values) => write!(f, "one of {}", values.join("|")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaField {
    pub name: String,
    pub kind: FieldKind,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub optional: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<Constraint>,
}

impl SchemaField {
    pub fn new(name: &str, kind: FieldKind) -> Self {
        Self {
            name: name.to_owned(),
            kind,
            optional: false,
            constraint: None,
        }
    }

    pub fn optional(mut self) -> Self {
        self.optional = true;
        self
    }

    pub fn with_constraint(mut self, constraint: Constraint) -> Self {
        self.constraint = Some(constraint);
        self
    }
}

/// Describes the structure of a kind of measurement data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataTypeDescriptor {
    pub id: ComponentId,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub fields: Vec<SchemaField>,
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arity {
    #[default]
    One,
    Many,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortSpec {
    pub name: String,
    pub data_type: ComponentId,
    #[serde(default)]
    pub arity: Arity,
}

impl PortSpec {
    pub fn one(name: &str, data_type: &str) -> Self {
        Self {
            name: name.to_owned(),
            data_type: data_type.into(),
            arity: Arity::One,
        }
    }

    pub fn many(name: &str, data_type: &str) -> Self {
        Self {
            arity: Arity::Many,
            ..Self::one(name, data_type)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputPortSpec {
    pub name: String,
    pub data_type: ComponentId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamKind {
    Number,
    Integer,
    Text,
    Boolean,
    Date,
}

impl ParamKind {
    pub fn accepts(self, value: &Value) -> bool {
        match self {
            ParamKind::Number => value.is_number(),
            ParamKind::Integer => value.is_i64() || value.is_u64(),
            ParamKind::Text => value.is_string(),
            ParamKind::Boolean => value.is_boolean(),
            ParamKind::Date => value
                .as_str()
                .is_some_and(|s| chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d").is_ok()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<Constraint>,
}

impl ParamSpec {
    pub fn new(name: &str, kind: ParamKind) -> Self {
        Self {
            name: name.to_owned(),
            kind,
            default: None,
            constraint: None,
        }
    }

    pub fn with_default(mut self, default: Value) -> Self {
        self.default = Some(default);
        self
    }

    pub fn with_constraint(mut self, constraint: Constraint) -> Self {
        self.constraint = Some(constraint);
        self
    }

    pub fn admits(&self, value: &Value) -> bool {
        self.kind.accepts(value) && self.constraint.as_ref().is_none_or(|c| c.check(value))
    }
}

/// A packaged control technique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub id: ComponentId,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub inputs: Vec<PortSpec>,
    pub outputs: Vec<OutputPortSpec>,
    #[serde(default)]
    pub params: Vec<ParamSpec>,
    pub implementation: String,
    #[serde(default)]
    pub tags: Vec<String>,
}

impl FunctionSpec {
    pub fn input(&self, name: &str) -> Option<&PortSpec> {
        self.inputs.iter().find(|p| p.name == name)
    }

    pub fn output(&self, name: &str) -> Option<&OutputPortSpec> {
        self.outputs.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RenderKind {
    BarChartDrilldown,
    LineChart,
    MilestoneTrendChart,
    Table,
    TrafficLight,
}

impl RenderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RenderKind::BarChartDrilldown => "bar-chart-drilldown",
            RenderKind::LineChart => "line-chart",
            RenderKind::MilestoneTrendChart => "milestone-trend-chart",
            RenderKind::Table => "table",
            RenderKind::TrafficLight => "traffic-light",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub name: String,
    /// View spec accepted in this slot; `None` accepts any view.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepts: Option<ComponentId>,
}

/// A way of presenting data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub id: ComponentId,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub inputs: Vec<PortSpec>,
    #[serde(default)]
    pub params: Vec<ParamSpec>,
    pub render: RenderKind,
    #[serde(default)]
    pub slots: Vec<SlotSpec>,
    #[serde(default)]
    pub tags: Vec<String>,
}

impl ViewSpec {
    pub fn input(&self, name: &str) -> Option<&PortSpec> {
        self.inputs.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormMode {
    /// One record per submission, appended to (or replacing) the record list
    /// field `record_field` of the target entry.
    ManualEntry {
        record_field: String,
        fields: Vec<SchemaField>,
        #[serde(default = "default_true")]
        append: bool,
        /// Record field identifying a record; a submission whose key matches
        /// an existing record replaces it.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        key: Option<String>,
    },
    /// An uploaded document parsed by the named parser.
    FileImport { parser: String },
}

fn default_true() -> bool {
    true
}

/// A concrete way of managing measurement data manually.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WebFormSpec {
    pub id: ComponentId,
    pub name: String,
    pub targets: Vec<ComponentId>,
    pub mode: FormMode,
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccessMode {
    Pull,
    Push,
}

/// Describes how data types are accessed from an external source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaoPackageSpec {
    pub id: ComponentId,
    pub name: String,
    pub supports: Vec<ComponentId>,
    #[serde(default)]
    pub connection: Vec<ParamSpec>,
    pub access: AccessMode,
    #[serde(default)]
    pub tags: Vec<String>,
}

/// Body of a component record, tagged by kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentBody {
    DataType(DataTypeDescriptor),
    Function(FunctionSpec),
    View(ViewSpec),
    WebForm(WebFormSpec),
    DaoPackage(DaoPackageSpec),
}

impl ComponentBody {
    pub fn kind(&self) -> ComponentKind {
        match self {
            ComponentBody::DataType(_) => ComponentKind::DataType,
            ComponentBody::Function(_) => ComponentKind::Function,
            ComponentBody::View(_) => ComponentKind::View,
            ComponentBody::WebForm(_) => ComponentKind::WebForm,
            ComponentBody::DaoPackage(_) => ComponentKind::DaoPackage,
        }
    }

    pub fn id(&self) -> &ComponentId {
        match self {
            ComponentBody::DataType(s) => &s.id,
            ComponentBody::Function(s) => &s.id,
            ComponentBody::View(s) => &s.id,
            ComponentBody::WebForm(s) => &s.id,
            ComponentBody::DaoPackage(s) => &s.id,
        }
    }

    pub fn tags(&self) -> &[String] {
        match self {
            ComponentBody::DataType(s) => &s.tags,
            ComponentBody::Function(s) => &s.tags,
            ComponentBody::View(s) => &s.tags,
            ComponentBody::WebForm(s) => &s.tags,
            ComponentBody::DaoPackage(s) => &s.tags,
        }
    }
}

/// Latest-version view of the component repository used for validation,
/// execution, and composition.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComponentRegistry {
    pub data_types: BTreeMap<ComponentId, DataTypeDescriptor>,
    pub functions: BTreeMap<ComponentId, FunctionSpec>,
    pub views: BTreeMap<ComponentId, ViewSpec>,
    pub web_forms: BTreeMap<ComponentId, WebFormSpec>,
    pub dao_packages: BTreeMap<ComponentId, DaoPackageSpec>,
    /// Number of times each component was reused in packaged projects.
    pub reuse: BTreeMap<ComponentId, u64>,
}

impl ComponentRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, body: ComponentBody) {
        match body {
            ComponentBody::DataType(s) => {
                self.data_types.insert(s.id.clone(), s);
            }
            ComponentBody::Function(s) => {
                self.functions.insert(s.id.clone(), s);
            }
            ComponentBody::View(s) => {
                self.views.insert(s.id.clone(), s);
            }
            ComponentBody::WebForm(s) => {
                self.web_forms.insert(s.id.clone(), s);
            }
            ComponentBody::DaoPackage(s) => {
                self.dao_packages.insert(s.id.clone(), s);
            }
        }
    }

    pub fn with(mut self, body: ComponentBody) -> Self {
        self.insert(body);
        self
    }

    pub fn contains(&self, kind: ComponentKind, id: &str) -> bool {
        match kind {
            ComponentKind::DataType => self.data_types.contains_key(id),
            ComponentKind::Function => self.functions.contains_key(id),
            ComponentKind::View => self.views.contains_key(id),
            ComponentKind::WebForm => self.web_forms.contains_key(id),
            ComponentKind::DaoPackage => self.dao_packages.contains_key(id),
        }
    }

    pub fn reuse_count(&self, id: &ComponentId) -> u64 {
        self.reuse.get(id).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data_types.is_empty()
            && self.functions.is_empty()
            && self.views.is_empty()
            && self.web_forms.is_empty()
            && self.dao_packages.is_empty()
    }
}

/// Collects every field name of `fields`, recursing into record lists, and
/// returns the names that occur more than once at the same level.
pub(crate) fn duplicate_field_names(fields: &[SchemaField]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut dups = Vec::new();
    for f in fields {
        if !seen.insert(f.name.as_str()) {
            dups.push(f.name.clone());
        }
        if let FieldKind::RecordList(inner) = &f.kind {
            dups.extend(
                duplicate_field_names(inner)
                    .into_iter()
                    .map(|n| format!("{}.{n}", f.name)),
            );
        }
    }
    dups
}
