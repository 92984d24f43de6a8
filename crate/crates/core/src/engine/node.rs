use std::collections::{BTreeMap, BTreeSet};
use std::io;
use std::path::Path;
use std::sync::Mutex;

use thiserror::Error;

use super::condition::{evaluate_condition, select_forward_paths, EvalError};
use crate::backend::{BackendError, CompletionRequest, GenerationSettings, LlmBackend};
use crate::bundle::WorkflowBundle;
use crate::dsl::{FlowNode, NodeKind, Routing};
use crate::graph::{self_bound_variables, WorkflowGraph};
use crate::store::{write_output_file, Decision, FileRecord, NodeResult, VariableBinding};
use crate::template::{render_template, ParameterScope, RenderError};

#[derive(Debug, Error)]
#[error("node '{node_id}': {kind}")]
pub struct NodeError {
    pub node_id: String,
    pub kind: NodeErrorKind,
}

#[derive(Debug, Error)]
pub enum NodeErrorKind {
    #[error("no prompt template loaded")]
    MissingTemplate,
    #[error("input variable '{name}' has no value")]
    MissingVariable { name: String },
    #[error("{0}")]
    Render(#[from] RenderError),
    #[error("{0}")]
    Backend(#[from] BackendError),
    #[error("{0}")]
    Condition(#[from] EvalError),
    #[error("variable '{name}' was already written")]
    AlreadyAssigned { name: String },
    #[error("cannot write output file '{name}': {source}")]
    Io { name: String, source: io::Error },
}

/// Variable store entry: the value and the position of the node that
/// wrote it.
type Store = BTreeMap<String, (String, usize)>;

/// Shared, read-mostly state of one run.
pub(crate) struct RunContext<'a> {
    pub graph: &'a WorkflowGraph,
    pub bundle: &'a WorkflowBundle,
    pub backend: &'a dyn LlmBackend,
    pub settings: &'a GenerationSettings,
    pub run_dir: &'a Path,
    /// Positions of every node that can reach a given node.
    ancestors: Vec<BTreeSet<usize>>,
    store: Mutex<Store>,
}

impl<'a> RunContext<'a> {
    pub fn new(
        graph: &'a WorkflowGraph,
        bundle: &'a WorkflowBundle,
        backend: &'a dyn LlmBackend,
        settings: &'a GenerationSettings,
        run_dir: &'a Path,
    ) -> Self {
        RunContext {
            graph,
            bundle,
            backend,
            settings,
            run_dir,
            ancestors: ancestors(graph),
            store: Mutex::new(Store::new()),
        }
    }

    pub fn variables(&self) -> BTreeMap<String, String> {
        let store = self.store.lock().unwrap_or_else(|e| e.into_inner());
        store.iter().map(|(k, (v, _))| (k.clone(), v.clone())).collect()
    }

    /// Variables written by ancestors of the node at `pos`. Restricting the
    /// view this way keeps prompts independent of how concurrent branches
    /// happen to interleave.
    fn visible_to(&self, pos: usize) -> BTreeMap<String, String> {
        let store = self.store.lock().unwrap_or_else(|e| e.into_inner());
        store
            .iter()
            .filter(|(_, (_, writer))| self.ancestors[pos].contains(writer))
            .map(|(k, (v, _))| (k.clone(), v.clone()))
            .collect()
    }
}

fn ancestors(graph: &WorkflowGraph) -> Vec<BTreeSet<usize>> {
    let adj = graph.adjacency();
    let mut preds = vec![Vec::new(); adj.len()];
    for (from, targets) in adj.iter().enumerate() {
        for &to in targets {
            preds[to].push(from);
        }
    }
    (0..adj.len())
        .map(|start| {
            let mut seen = BTreeSet::new();
            let mut stack = preds[start].clone();
            while let Some(n) = stack.pop() {
                if seen.insert(n) {
                    stack.extend(&preds[n]);
                }
            }
            seen
        })
        .collect()
}

/// Render, call the backend, bind outputs and, for decision makers, route.
pub(crate) fn execute_node(ctx: &RunContext<'_>, pos: usize) -> Result<NodeResult, NodeError> {
    let node = &ctx.graph.nodes()[pos];
    run(ctx, pos, node).map_err(|kind| NodeError {
        node_id: node.id.clone(),
        kind,
    })
}

fn run(ctx: &RunContext<'_>, pos: usize, node: &FlowNode) -> Result<NodeResult, NodeErrorKind> {
    let template = ctx
        .bundle
        .templates
        .get(&node.id)
        .ok_or(NodeErrorKind::MissingTemplate)?;
    let visible = ctx.visible_to(pos);
    if let Some(name) = node.consumed_variables().find(|n| !visible.contains_key(*n)) {
        return Err(NodeErrorKind::MissingVariable { name: name.to_owned() });
    }
    let scope = ParameterScope::for_node(node.literals(), visible.clone(), &ctx.bundle.parameter_sets);
    let prompt = render_template(template, &scope)?;
    let response = ctx.backend.complete(&CompletionRequest {
        node_id: &node.id,
        prompt: &prompt,
        settings: ctx.settings,
    })?;
    let (variables, files) = bind_outputs(ctx, pos, node, &response)?;

    let decision = match &node.routing {
        Routing::Static { .. } => None,
        Routing::Conditional {
            condition,
            forward_paths,
        } => {
            let mut view = visible;
            view.extend(variables.iter().map(|b| (b.name.clone(), b.value.clone())));
            let result = evaluate_condition(condition, &view)?;
            Some(Decision {
                condition_result: result,
                next_nodes: select_forward_paths(result, forward_paths),
            })
        }
    };
    debug_assert_eq!(decision.is_some(), node.kind() == NodeKind::DecisionMaker);
    Ok(NodeResult {
        node_id: node.id.clone(),
        kind: node.kind().as_str().to_owned(),
        prompt,
        response,
        variables,
        files,
        decision,
    })
}

/// Write `response` to the node's variables (declared ones, then
/// self-bound condition variables) and files.
pub(crate) fn bind_outputs(
    ctx: &RunContext<'_>,
    pos: usize,
    node: &FlowNode,
    response: &str,
) -> Result<(Vec<VariableBinding>, Vec<FileRecord>), NodeErrorKind> {
    let mut names: Vec<&str> = Vec::new();
    for name in node.variable_outputs().chain(self_bound_variables(ctx.graph, node)) {
        if !names.contains(&name) {
            names.push(name);
        }
    }
    {
        let mut store = ctx.store.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(taken) = names.iter().find(|n| store.contains_key(**n)) {
            return Err(NodeErrorKind::AlreadyAssigned {
                name: (*taken).to_owned(),
            });
        }
        for name in &names {
            store.insert((*name).to_owned(), (response.to_owned(), pos));
        }
    }
    let variables = names
        .into_iter()
        .map(|name| VariableBinding {
            name: name.to_owned(),
            value: response.to_owned(),
        })
        .collect();

    let mut files = Vec::new();
    for name in node.file_outputs() {
        write_output_file(ctx.run_dir, name, response.as_bytes()).map_err(|source| NodeErrorKind::Io {
            name: name.to_owned(),
            source,
        })?;
        files.push(FileRecord::for_content(name, response.as_bytes()));
    }
    Ok((variables, files))
}
