//! Small directed-graph utilities shared by validation and the engine.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Adjacency-set digraph with deterministic iteration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph<N: Ord + Clone> {
    succ: BTreeMap<N, BTreeSet<N>>,
}

impl<N: Ord + Clone> Default for Digraph<N> {
    fn default() -> Self {
        Self { succ: BTreeMap::new() }
    }
}

impl<N: Ord + Clone> Digraph<N> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, n: N) {
        self.succ.entry(n).or_default();
    }

    pub fn add_edge(&mut self, from: N, to: N) {
        self.add_node(to.clone());
        self.succ.entry(from).or_default().insert(to);
    }

    pub fn nodes(&self) -> impl Iterator<Item = &N> {
        self.succ.keys()
    }

    pub fn successors(&self, n: &N) -> impl Iterator<Item = &N> {
        self.succ.get(n).into_iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.succ.len()
    }

    pub fn is_empty(&self) -> bool {
        self.succ.is_empty()
    }

    /// Kahn's algorithm; among ready nodes the smallest is emitted first.
    /// On failure returns the nodes lying on a cycle, sorted.
    pub fn topo_order(&self) -> Result<Vec<N>, Vec<N>> {
        let mut indegree: BTreeMap<&N, usize> = self.succ.keys().map(|n| (n, 0)).collect();
        for targets in self.succ.values() {
            for t in targets {
                *indegree.get_mut(t).expect("targets are nodes") += 1;
            }
        }
        let mut ready: BTreeSet<&N> = indegree.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
        let mut order = Vec::with_capacity(self.succ.len());
        while let Some(n) = ready.pop_first() {
            order.push(n.clone());
            for t in &self.succ[n] {
                let d = indegree.get_mut(t).expect("targets are nodes");
                *d -= 1;
                if *d == 0 {
                    ready.insert(t);
                }
            }
        }
        if order.len() == self.succ.len() {
            return Ok(order);
        }
        let emitted: BTreeSet<&N> = order.iter().collect();
        let residual: BTreeSet<&N> = self.succ.keys().filter(|n| !emitted.contains(n)).collect();
        let on_cycle = residual
            .iter()
            .filter(|n| self.reaches_within(n, n, &residual))
            .map(|n| (*n).clone())
            .collect();
        Err(on_cycle)
    }

    /// True when `to` is reachable from `from` through at least one edge,
    /// visiting only nodes in `within`.
    fn reaches_within(&self, from: &N, to: &N, within: &BTreeSet<&N>) -> bool {
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<&N> = self.successors(from).collect();
        while let Some(n) = queue.pop_front() {
            if !within.contains(n) || !seen.insert(n) {
                continue;
            }
            if n == to {
                return true;
            }
            queue.extend(self.successors(n));
        }
        false
    }

    /// Every node reachable from `starts`, including the starts themselves.
    pub fn reachable_from<'a>(&'a self, starts: impl IntoIterator<Item = &'a N>) -> BTreeSet<N> {
        let mut seen: BTreeSet<N> = BTreeSet::new();
        let mut queue: VecDeque<&N> = starts.into_iter().collect();
        while let Some(n) = queue.pop_front() {
            if seen.insert(n.clone()) {
                queue.extend(self.successors(n));
            }
        }
        seen
    }
}
