//! The thought-graph: nodes joined by static and conditional edges.
//!
//! [`build_graph`] never fails. Dangling targets, duplicate ids and other
//! structural problems are kept in the graph so that [`validate_graph`] can
//! report all of them at once.

mod dot;
mod topo;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::dsl::{FlowNode, Routing, WorkflowSpec};

pub use dot::export_dot;
pub use topo::{find_cycle, topological_order, CycleError};
pub use validate::{diagnose_document, has_errors, validate_graph};
pub(crate) use validate::{is_plain_file_name, self_bound_variables};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Static,
    OnTrue,
    OnFalse,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkflowGraph {
    nodes: Vec<FlowNode>,
    index: BTreeMap<String, usize>,
    duplicate_ids: Vec<String>,
    edges: Vec<Edge>,
    entry_ids: Vec<String>,
    workflow_extra_keys: Vec<String>,
}

impl WorkflowGraph {
    /// Nodes in declaration order. When ids repeat, only the first node
    /// with a given id is addressable through [`WorkflowGraph::node`].
    pub fn nodes(&self) -> &[FlowNode] {
        &self.nodes
    }

    pub fn node(&self, id: &str) -> Option<&FlowNode> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    /// Declaration index of a node id.
    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Ids with no incoming edge, in declaration order.
    pub fn entry_ids(&self) -> &[String] {
        &self.entry_ids
    }

    pub fn duplicate_ids(&self) -> &[String] {
        &self.duplicate_ids
    }

    pub(crate) fn workflow_extra_keys(&self) -> &[String] {
        &self.workflow_extra_keys
    }

    /// Indices into [`WorkflowGraph::nodes`] of the addressable nodes.
    pub(crate) fn unique_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(i, n)| self.index.get(&n.id) == Some(i))
            .map(|(i, _)| i)
    }

    /// Successor lists over declaration indices, skipping dangling edges.
    pub(crate) fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for edge in &self.edges {
            if let (Some(&a), Some(&b)) = (self.index.get(&edge.from), self.index.get(&edge.to)) {
                adj[a].push(b);
            }
        }
        adj
    }
}

pub fn build_graph(spec: &WorkflowSpec) -> WorkflowGraph {
    let mut index = BTreeMap::new();
    let mut duplicate_ids = Vec::new();
    for (i, node) in spec.nodes.iter().enumerate() {
        if index.contains_key(&node.id) {
            duplicate_ids.push(node.id.clone());
        } else {
            index.insert(node.id.clone(), i);
        }
    }

    let mut edges = Vec::new();
    for (i, node) in spec.nodes.iter().enumerate() {
        if index.get(&node.id) != Some(&i) {
            continue;
        }
        match &node.routing {
            Routing::Static { next_nodes } => {
                edges.extend(next_nodes.iter().map(|to| Edge {
                    from: node.id.clone(),
                    to: to.clone(),
                    kind: EdgeKind::Static,
                }));
            }
            Routing::Conditional { forward_paths, .. } => {
                for path in forward_paths {
                    let kind = if path.condition_result {
                        EdgeKind::OnTrue
                    } else {
                        EdgeKind::OnFalse
                    };
                    edges.extend(path.next_nodes.iter().map(|to| Edge {
                        from: node.id.clone(),
                        to: to.clone(),
                        kind,
                    }));
                }
            }
        }
    }

    let mut has_incoming = vec![false; spec.nodes.len()];
    for edge in &edges {
        if let Some(&i) = index.get(&edge.to) {
            has_incoming[i] = true;
        }
    }
    let entry_ids = spec
        .nodes
        .iter()
        .enumerate()
        .filter(|(i, n)| index.get(&n.id) == Some(i) && !has_incoming[*i])
        .map(|(_, n)| n.id.clone())
        .collect();

    WorkflowGraph {
        nodes: spec.nodes.clone(),
        index,
        duplicate_ids,
        edges,
        entry_ids,
        workflow_extra_keys: spec.extra.keys().cloned().collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Info => "info",
        }
    }
}

/// A validation finding. Error-severity diagnostics block execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: &'static str,
    pub node_id: Option<String>,
    pub message: String,
}

impl Diagnostic {
    pub(crate) fn new(
        severity: Severity,
        code: &'static str,
        node_id: Option<&str>,
        message: impl Into<String>,
    ) -> Self {
        Diagnostic {
            severity,
            code,
            node_id: node_id.map(str::to_owned),
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}",
            self.severity.as_str(),
            self.code,
            self.node_id.as_deref().unwrap_or("-"),
            self.message
        )
    }
}
