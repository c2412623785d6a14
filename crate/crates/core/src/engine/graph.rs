use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::graph::Digraph;
use crate::ids::{EntryId, InstanceId};
use crate::model::Catena;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "kebab-case")]
pub enum Node {
    Entry(EntryId),
    Function(InstanceId),
}

/// A labelled producer-to-consumer edge. `port` names the consuming input
/// port for entry-to-function edges and the output port otherwise.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub from: Node,
    pub to: Node,
    pub port: String,
}

/// Bipartite entry/function graph mirroring a catena's bindings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DependencyGraph {
    pub nodes: BTreeSet<Node>,
    /// Sorted; one edge per binding occurrence.
    pub edges: Vec<Edge>,
}

impl DependencyGraph {
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn function_ids(&self) -> impl Iterator<Item = &InstanceId> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Function(f) => Some(f),
            Node::Entry(_) => None,
        })
    }

    /// Function-to-function projection: `f -> g` when an entry produced by
    /// `f` is consumed by `g`.
    pub fn function_projection(&self) -> Digraph<InstanceId> {
        let mut producers: BTreeMap<&EntryId, Vec<&InstanceId>> = BTreeMap::new();
        let mut consumers: BTreeMap<&EntryId, Vec<&InstanceId>> = BTreeMap::new();
        for e in &self.edges {
            match (&e.from, &e.to) {
                (Node::Function(f), Node::Entry(x)) => producers.entry(x).or_default().push(f),
                (Node::Entry(x), Node::Function(f)) => consumers.entry(x).or_default().push(f),
                _ => {}
            }
        }
        let mut g = Digraph::new();
        for f in self.function_ids() {
            g.add_node(f.clone());
        }
        for (entry, ps) in &producers {
            for p in ps {
                for c in consumers.get(entry).into_iter().flatten() {
                    g.add_edge((*p).clone(), (*c).clone());
                }
            }
        }
        g
    }

    /// Function instances reachable from the given entries, in no particular
    /// order.
    pub fn functions_reachable_from<'a>(&self, changed: impl IntoIterator<Item = &'a EntryId>) -> BTreeSet<InstanceId> {
        let mut full = Digraph::new();
        for n in &self.nodes {
            full.add_node(n.clone());
        }
        for e in &self.edges {
            full.add_edge(e.from.clone(), e.to.clone());
        }
        let starts: Vec<Node> = changed.into_iter().map(|e| Node::Entry(e.clone())).collect();
        full.reachable_from(starts.iter().filter(|n| self.nodes.contains(n)))
            .into_iter()
            .filter_map(|n| match n {
                Node::Function(f) => Some(f),
                Node::Entry(_) => None,
            })
            .collect()
    }
}

/// Builds the dependency graph: every data entry and function instance is a
/// node; `e -> f` for each input binding of `f` on `e` and `f -> e` for each
/// output port of `f`.
pub fn build_dependency_graph(catena: &Catena) -> DependencyGraph {
    let mut g = DependencyGraph::default();
    for e in &catena.data_entries {
        g.nodes.insert(Node::Entry(e.id.clone()));
    }
    for f in &catena.functions {
        g.nodes.insert(Node::Function(f.id.clone()));
        for (port, binding) in &f.bindings {
            for e in binding.entries() {
                g.nodes.insert(Node::Entry(e.clone()));
                g.edges.push(Edge {
                    from: Node::Entry(e.clone()),
                    to: Node::Function(f.id.clone()),
                    port: port.clone(),
                });
            }
        }
        for (port, e) in &f.outputs {
            g.nodes.insert(Node::Entry(e.clone()));
            g.edges.push(Edge {
                from: Node::Function(f.id.clone()),
                to: Node::Entry(e.clone()),
                port: port.clone(),
            });
        }
    }
    g.edges.sort();
    g
}

/// Deterministic topological order of the function instances; ties are broken
/// by instance id. Fails with the instances lying on a cycle.
pub fn execution_order(graph: &DependencyGraph) -> Result<Vec<InstanceId>, Vec<InstanceId>> {
    graph.function_projection().topo_order()
}
