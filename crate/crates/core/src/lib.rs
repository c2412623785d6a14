//! Core model, techniques, storage, and execution engine of the watchtower
//! project control center.

pub mod builtin;
pub mod collection;
pub mod engine;
pub mod gqm;
pub mod graph;
pub mod ids;
pub mod model;
pub mod store;
pub mod techniques;
#[cfg(feature = "testkit")]
pub mod testkit;

pub use ids::{CatenaId, ComponentId, EntryId, InstanceId, ProjectId};
