use std::collections::{BTreeMap, VecDeque};

use super::{build_graph, find_cycle, Diagnostic, Severity, WorkflowGraph};
use crate::dsl::{parse_workflow, Condition, FlowNode, InputSource, Routing};

/// Static checks over a built graph. Pure: the same graph always yields the
/// same list in the same order.
pub fn validate_graph(graph: &WorkflowGraph) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    for key in graph.workflow_extra_keys() {
        out.push(Diagnostic::new(
            Severity::Info,
            "unknown_key",
            None,
            format!("unrecognized workflow key '{key}' ignored"),
        ));
    }
    for id in graph.duplicate_ids() {
        out.push(Diagnostic::new(
            Severity::Error,
            "duplicate_id",
            Some(id),
            format!("duplicate node id '{id}'"),
        ));
    }
    for node in graph.nodes() {
        check_node(node, &mut out);
    }

    for edge in graph.edges() {
        if !graph.contains(&edge.to) {
            out.push(Diagnostic::new(
                Severity::Error,
                "unknown_target",
                Some(&edge.from),
                format!("unknown target id '{}'", edge.to),
            ));
        }
    }

    if let Some(cycle) = find_cycle(graph) {
        out.push(Diagnostic::new(
            Severity::Error,
            "cycle",
            Some(&cycle[0]),
            format!("directed cycle: {}", cycle.join(" -> ")),
        ));
    }

    let writers = variable_writers(graph);
    for (name, nodes) in &writers {
        if nodes.len() > 1 {
            out.push(Diagnostic::new(
                Severity::Error,
                "duplicate_writer",
                Some(&nodes[1]),
                format!("variable '{name}' is written by {}", nodes.join(", ")),
            ));
        }
    }
    let mut file_writers: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for i in graph.unique_positions() {
        let node = &graph.nodes()[i];
        for name in node.file_outputs() {
            file_writers.entry(name).or_default().push(&node.id);
        }
    }
    for (name, nodes) in &file_writers {
        if nodes.len() > 1 {
            out.push(Diagnostic::new(
                Severity::Error,
                "duplicate_file",
                Some(nodes[1]),
                format!("output file '{name}' is written by {}", nodes.join(", ")),
            ));
        }
    }

    for i in graph.unique_positions() {
        let node = &graph.nodes()[i];
        for name in node.consumed_variables() {
            if !writers.contains_key(name) {
                out.push(Diagnostic::new(
                    Severity::Error,
                    "unbound_input",
                    Some(&node.id),
                    format!("input variable '{name}' is not written by any node"),
                ));
            }
        }
        if let Some(condition) = node.condition() {
            let declared = declared_variable_writers(graph);
            for name in condition.variables() {
                if !declared.contains_key(name) {
                    out.push(Diagnostic::new(
                        Severity::Warning,
                        "unwritten_condition_variable",
                        Some(&node.id),
                        format!(
                            "condition variable '{name}' has no declared writer; \
                             the decision maker's response will be bound to it"
                        ),
                    ));
                }
            }
        }
    }

    for id in unreachable(graph) {
        out.push(Diagnostic::new(
            Severity::Warning,
            "unreachable",
            Some(&id),
            format!("node '{id}' is not reachable from any entry node"),
        ));
    }

    for node in graph.nodes() {
        for key in node.extra.keys() {
            out.push(Diagnostic::new(
                Severity::Info,
                "unknown_key",
                Some(&node.id),
                format!("unrecognized node key '{key}' ignored"),
            ));
        }
    }

    out
}

fn check_node(node: &FlowNode, out: &mut Vec<Diagnostic>) {
    let id = Some(node.id.as_str());
    if node.id.is_empty() {
        out.push(Diagnostic::new(Severity::Error, "empty_id", None, "node id is empty"));
    }

    let templates = node
        .input_parameters
        .iter()
        .filter(|p| matches!(p.source, InputSource::PromptTemplate { .. }))
        .count();
    match templates {
        1 => {}
        0 => out.push(Diagnostic::new(
            Severity::Error,
            "missing_prompt_template",
            id,
            "node has no prompt_template input",
        )),
        n => out.push(Diagnostic::new(
            Severity::Error,
            "multiple_prompt_templates",
            id,
            format!("node has {n} prompt_template inputs; exactly one is allowed"),
        )),
    }

    for p in &node.input_parameters {
        if p.name.is_empty() {
            out.push(Diagnostic::new(Severity::Error, "empty_name", id, "input parameter with empty name"));
        }
        if let InputSource::PromptTemplate { file_path } = &p.source {
            if file_path.is_empty() {
                out.push(Diagnostic::new(
                    Severity::Error,
                    "empty_name",
                    id,
                    "prompt_template with empty file_path",
                ));
            }
        }
    }
    for o in &node.outputs {
        if o.name.is_empty() {
            out.push(Diagnostic::new(Severity::Error, "empty_name", id, "output with empty name"));
        }
    }
    for name in node.file_outputs() {
        if !is_plain_file_name(name) {
            out.push(Diagnostic::new(
                Severity::Error,
                "invalid_file_name",
                id,
                format!("output file name '{name}' must not contain path separators"),
            ));
        }
    }

    if let Routing::Conditional {
        condition,
        forward_paths,
    } = &node.routing
    {
        for wanted in [true, false] {
            match forward_paths.iter().filter(|p| p.condition_result == wanted).count() {
                1 => {}
                0 => out.push(Diagnostic::new(
                    Severity::Error,
                    "missing_branch",
                    id,
                    format!("decision maker has no forward path for condition_result {wanted}"),
                )),
                n => out.push(Diagnostic::new(
                    Severity::Error,
                    "duplicate_branch",
                    id,
                    format!("decision maker has {n} forward paths for condition_result {wanted}"),
                )),
            }
        }
        check_condition(condition, id, out);
    }
}

fn check_condition(condition: &Condition, id: Option<&str>, out: &mut Vec<Diagnostic>) {
    match condition {
        Condition::Compare { variable, .. } => {
            if variable.is_empty() {
                out.push(Diagnostic::new(
                    Severity::Error,
                    "empty_name",
                    id,
                    "condition data_source has an empty name",
                ));
            }
        }
        Condition::Composed { children, .. } => {
            if children.len() < 2 {
                out.push(Diagnostic::new(
                    Severity::Error,
                    "invalid_condition",
                    id,
                    "a composed condition needs at least two children",
                ));
            }
            for child in children {
                check_condition(child, id, out);
            }
        }
    }
}

pub(crate) fn is_plain_file_name(name: &str) -> bool {
    !name.is_empty()
        && name != "."
        && name != ".."
        && !name.contains(['/', '\\', '\0'])
}

fn declared_variable_writers(graph: &WorkflowGraph) -> BTreeMap<&str, Vec<&str>> {
    let mut writers: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for i in graph.unique_positions() {
        let node = &graph.nodes()[i];
        for name in node.variable_outputs() {
            writers.entry(name).or_default().push(&node.id);
        }
    }
    writers
}

/// Condition variables a decision maker binds its own response to: those
/// read by its condition that no node declares as an output.
pub(crate) fn self_bound_variables<'g>(graph: &'g WorkflowGraph, node: &'g FlowNode) -> Vec<&'g str> {
    let Some(condition) = node.condition() else {
        return Vec::new();
    };
    let declared = declared_variable_writers(graph);
    let mut out: Vec<&str> = Vec::new();
    for name in condition.variables() {
        if !declared.contains_key(name) && !out.contains(&name) {
            out.push(name);
        }
    }
    out
}

/// Every variable and the nodes that write it, counting self-binding.
fn variable_writers(graph: &WorkflowGraph) -> BTreeMap<String, Vec<String>> {
    let mut writers: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (name, nodes) in declared_variable_writers(graph) {
        writers.insert(name.to_owned(), nodes.into_iter().map(str::to_owned).collect());
    }
    for i in graph.unique_positions() {
        let node = &graph.nodes()[i];
        for name in self_bound_variables(graph, node) {
            writers.entry(name.to_owned()).or_default().push(node.id.clone());
        }
    }
    writers
}

fn unreachable(graph: &WorkflowGraph) -> Vec<String> {
    let adj = graph.adjacency();
    let mut seen = vec![false; adj.len()];
    let mut queue: VecDeque<usize> = graph
        .entry_ids()
        .iter()
        .filter_map(|id| graph.position(id))
        .collect();
    for &i in &queue {
        seen[i] = true;
    }
    while let Some(n) = queue.pop_front() {
        for &t in &adj[n] {
            if !seen[t] {
                seen[t] = true;
                queue.push_back(t);
            }
        }
    }
    graph
        .unique_positions()
        .filter(|&i| !seen[i])
        .map(|i| graph.nodes()[i].id.clone())
        .collect()
}

pub fn has_errors(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(Diagnostic::is_error)
}

/// Parse and validate a document in one step. A parse failure becomes a
/// single `parse_error` diagnostic.
pub fn diagnose_document(text: &str) -> Vec<Diagnostic> {
    match parse_workflow(text) {
        Ok(spec) => validate_graph(&build_graph(&spec)),
        Err(e) => vec![Diagnostic::new(Severity::Error, "parse_error", None, e.to_string())],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example;

    fn errors(text: &str) -> Vec<Diagnostic> {
        diagnose_document(text).into_iter().filter(Diagnostic::is_error).collect()
    }

    #[test]
    fn ads_has_no_errors() {
        let diags = diagnose_document(example::ADS_WORKFLOW);
        assert!(!has_errors(&diags), "{diags:#?}");
        // The decision maker's condition variable is only written by self-binding.
        assert!(diags.iter().any(|d| d.code == "unwritten_condition_variable"
            && d.node_id.as_deref() == Some("determine_data_feature")));
    }

    #[test]
    fn dangling_target() {
        let doc = example::ADS_WORKFLOW.replace(
            r#""next_nodes": ["determine_data_feature"]"#,
            r#""next_nodes": ["nope"]"#,
        );
        let errs = errors(&doc);
        assert_eq!(errs.len(), 1, "{errs:#?}");
        assert_eq!(errs[0].code, "unknown_target");
        assert_eq!(errs[0].message, "unknown target id 'nope'");
    }

    #[test]
    fn missing_false_branch() {
        let doc = example::ADS_WORKFLOW.replace(
            r#""condition_result": false"#,
            r#""condition_result": true"#,
        );
        let codes: Vec<_> = errors(&doc).iter().map(|d| d.code).collect();
        assert!(codes.contains(&"missing_branch"));
        assert!(codes.contains(&"duplicate_branch"));
    }

    #[test]
    fn duplicate_writer() {
        let doc = example::ADS_WORKFLOW.replace(
            r#""name": "data_trend_miner_output"
      }],"#,
            r#""name": "data_reader_output"
      }],"#,
        );
        let codes: Vec<_> = errors(&doc).iter().map(|d| d.code).collect();
        assert!(codes.contains(&"duplicate_writer"), "{codes:?}");
    }

    #[test]
    fn extra_edges_into_a_branch_are_not_errors() {
        let doc = example::ADS_WORKFLOW.replace(
            r#""next_nodes": ["quantitative_analysis"]"#,
            r#""next_nodes": ["quantitative_analysis", "qualitative_analysis_1"]"#,
        );
        assert!(!has_errors(&diagnose_document(&doc)));
    }

    #[test]
    fn unreachable_warning_for_island_cycle() {
        let doc = r#"{"output_dir_path":"o","flow_items":[
          {"id":"a","type":"executor","input_parameters":[{"name":"p","type":"prompt_template","file_path":"x"}],"next_nodes":[]},
          {"id":"b","type":"executor","input_parameters":[{"name":"p","type":"prompt_template","file_path":"x"}],"next_nodes":["c"]},
          {"id":"c","type":"executor","input_parameters":[{"name":"p","type":"prompt_template","file_path":"x"}],"next_nodes":["b"]}]}"#;
        let diags = diagnose_document(doc);
        let warned: Vec<_> = diags
            .iter()
            .filter(|d| d.code == "unreachable")
            .map(|d| d.node_id.clone().unwrap())
            .collect();
        assert_eq!(warned, ["b", "c"]);
        assert!(diags.iter().any(|d| d.code == "cycle"));
    }

    #[test]
    fn invalid_file_names() {
        assert!(is_plain_file_name("out.txt"));
        assert!(!is_plain_file_name("../out.txt"));
        assert!(!is_plain_file_name("a\\b"));
        assert!(!is_plain_file_name(".."));
    }

    #[test]
    fn parse_errors_become_diagnostics() {
        let diags = diagnose_document("{");
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, "parse_error");
    }

    #[test]
    fn validation_is_pure() {
        let graph = build_graph(&parse_workflow(example::ADS_WORKFLOW).unwrap());
        assert_eq!(validate_graph(&graph), validate_graph(&graph));
    }
}
