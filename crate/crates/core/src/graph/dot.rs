use std::fmt::Write;

use super::{EdgeKind, WorkflowGraph};
use crate::dsl::NodeKind;

/// Graphviz rendering: executors are boxes, decision makers diamonds, and
/// conditional edges are labelled `YES` / `NO`.
pub fn export_dot(graph: &WorkflowGraph) -> String {
    let mut out = String::new();
    out.push_str("digraph workflow {\n");
    out.push_str("  rankdir=TB;\n");
    for i in graph.unique_positions() {
        let node = &graph.nodes()[i];
        let shape = match node.kind() {
            NodeKind::Executor => "box",
            NodeKind::DecisionMaker => "diamond",
        };
        writeln!(out, "  {} [shape={shape}];", quote(&node.id)).unwrap();
    }
    for edge in graph.edges() {
        let label = match edge.kind {
            EdgeKind::Static => String::new(),
            EdgeKind::OnTrue => " [label=\"YES\"]".to_owned(),
            EdgeKind::OnFalse => " [label=\"NO\"]".to_owned(),
        };
        writeln!(out, "  {} -> {}{label};", quote(&edge.from), quote(&edge.to)).unwrap();
    }
    out.push_str("}\n");
    out
}

fn quote(id: &str) -> String {
    let mut s = String::with_capacity(id.len() + 2);
    s.push('"');
    for c in id.chars() {
        match c {
            '"' => s.push_str("\\\""),
            '\\' => s.push_str("\\\\"),
            '\n' => s.push_str("\\n"),
            c => s.push(c),
        }
    }
    s.push('"');
    s
}
