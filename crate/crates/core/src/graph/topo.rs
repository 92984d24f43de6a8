use thiserror::Error;

use super::WorkflowGraph;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("workflow graph has a cycle: {}", .cycle.join(" -> "))]
pub struct CycleError {
    /// Witness path; first and last entries are the same node.
    pub cycle: Vec<String>,
}

/// Node ids such that every edge goes from an earlier to a later id.
///
/// Nodes are released in waves: each wave holds every node whose
/// predecessors all appeared in earlier waves, sorted by declaration order.
/// Dangling edges are ignored.
pub fn topological_order(graph: &WorkflowGraph) -> Result<Vec<String>, CycleError> {
    let adj = graph.adjacency();
    let mut indegree = vec![0usize; adj.len()];
    for targets in &adj {
        for &t in targets {
            indegree[t] += 1;
        }
    }
    let unique: Vec<usize> = graph.unique_positions().collect();
    let mut wave: Vec<usize> = unique.iter().copied().filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(unique.len());
    while !wave.is_empty() {
        let mut next = Vec::new();
        for &n in &wave {
            order.push(graph.nodes()[n].id.clone());
            for &t in &adj[n] {
                indegree[t] -= 1;
                if indegree[t] == 0 {
                    next.push(t);
                }
            }
        }
        next.sort_unstable();
        wave = next;
    }
    if order.len() < unique.len() {
        let cycle = find_cycle(graph).expect("unsorted nodes imply a cycle");
        return Err(CycleError { cycle });
    }
    Ok(order)
}

/// First directed cycle found by depth-first search from nodes in
/// declaration order, as `[a, b, ..., a]`.
pub fn find_cycle(graph: &WorkflowGraph) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Grey,
        Black,
    }

    let adj = graph.adjacency();
    let mut mark = vec![Mark::White; adj.len()];
    for root in graph.unique_positions() {
        if mark[root] != Mark::White {
            continue;
        }
        // (node, next successor slot)
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        mark[root] = Mark::Grey;
        while let Some(&mut (node, ref mut slot)) = stack.last_mut() {
            if let Some(&succ) = adj[node].get(*slot) {
                *slot += 1;
                match mark[succ] {
                    Mark::White => {
                        mark[succ] = Mark::Grey;
                        stack.push((succ, 0));
                    }
                    Mark::Grey => {
                        let start = stack.iter().position(|&(n, _)| n == succ).unwrap();
                        let mut cycle: Vec<String> = stack[start..]
                            .iter()
                            .map(|&(n, _)| graph.nodes()[n].id.clone())
                            .collect();
                        cycle.push(graph.nodes()[succ].id.clone());
                        return Some(cycle);
                    }
                    Mark::Black => {}
                }
            } else {
                mark[node] = Mark::Black;
                stack.pop();
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_workflow, Routing};
    use crate::example;
    use crate::graph::build_graph;

    #[test]
    fn ads_order() {
        let graph = build_graph(&parse_workflow(example::ADS_WORKFLOW).unwrap());
        assert_eq!(
            topological_order(&graph).unwrap(),
            [
                "data_reader",
                "determine_data_feature",
                "data_trend_miner",
                "qualitative_analysis_1",
                "qualitative_analysis_2",
                "quantitative_analysis",
            ]
        );
        assert_eq!(find_cycle(&graph), None);
    }

    #[test]
    fn detects_back_edge() {
        let mut spec = parse_workflow(example::ADS_WORKFLOW).unwrap();
        let quant = spec.nodes.iter_mut().find(|n| n.id == "quantitative_analysis").unwrap();
        quant.routing = Routing::Static {
            next_nodes: vec!["data_reader".into()],
        };
        let graph = build_graph(&spec);
        let err = topological_order(&graph).unwrap_err();
        assert_eq!(
            err.cycle,
            [
                "data_reader",
                "determine_data_feature",
                "data_trend_miner",
                "quantitative_analysis",
                "data_reader"
            ]
        );
    }

    #[test]
    fn self_loop() {
        let spec = parse_workflow(
            r#"{"output_dir_path":"o","flow_items":[{"id":"a","type":"executor","next_nodes":["a"]}]}"#,
        )
        .unwrap();
        let graph = build_graph(&spec);
        assert_eq!(find_cycle(&graph), Some(vec!["a".to_string(), "a".to_string()]));
        assert!(graph.entry_ids().is_empty());
    }
}
