//! Type-level and instance-level component model of the visualization catena.

pub mod catena;
pub mod document;
pub mod schema;
pub mod spec;
pub mod validate;

pub use catena::{
    bind_function_instance, bindings, params, resolve_params, BindError, Binding, Bindings, BoundFunction, Catena,
    CatenaMeta, CollectionWindow, DataEntry, EntrySource, FunctionInstance, ParamError, ViewInstance, WebFormInstance,
};
pub use document::{from_document, parse_catena, serialize_catena, to_document, DocumentError};
pub use schema::{parse_timestamp, validate_body, SchemaViolation};
pub use spec::{
    AccessMode, Arity, ComponentBody, ComponentKind, ComponentRegistry, Constraint, DaoPackageSpec, DataTypeDescriptor,
    FieldKind, FormMode, FunctionSpec, OutputPortSpec, ParamKind, ParamSpec, Params, PortSpec, RenderKind, SchemaField,
    SlotSpec, ViewSpec, WebFormSpec,
};
pub use validate::{check_component, codes, function_graph, validate_catena, Diagnostic, Severity, ValidationReport};
