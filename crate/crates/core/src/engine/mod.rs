//! Runs a validated workflow against a backend.
//!
//! Scheduling works on edges. When a node finishes, its outgoing edges are
//! resolved: static edges are taken, conditional edges are taken when they
//! match the decision. A node becomes ready once every incoming edge is
//! resolved and at least one was taken. If none was taken the node is
//! skipped, and its own outgoing edges resolve as not taken, so skips
//! propagate down branches that were not chosen while nodes where branches
//! rejoin still run.
//!
//! Ready nodes are dispatched in topological-order index, up to
//! `max_concurrency` at a time. With `max_concurrency = 1` the run is
//! strictly sequential and nodes execute in topological order.

mod condition;
mod node;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::thread;

use chrono::Utc;
use thiserror::Error;
use uuid::Uuid;

use crate::backend::{
    record_and_wrap, CassetteError, GenerationSettings, LlmBackend, ReplayBackend, SettingsError,
};
use crate::bundle::{BundleError, WorkflowBundle};
use crate::dsl::ParseError;
use crate::graph::{build_graph, has_errors, topological_order, validate_graph, Diagnostic, EdgeKind, WorkflowGraph};
use crate::store::{
    compare_traces, load_trace, verify_output_files, ConfigSnapshot, NodeStatus, Outcome, RunTrace,
    TraceEntry, TraceError, TraceFooter, TraceHeader, TraceWriter, CASSETTE_FILE, TRACE_FILE,
    TRACE_SCHEMA_VERSION,
};

pub use condition::{compare, evaluate_condition, normalize_answer, select_forward_paths, EvalError};
pub use node::{NodeError, NodeErrorKind};

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Nodes executing at once. Must be at least 1.
    pub max_concurrency: usize,
    /// Replaces the workflow's `output_dir_path`.
    pub output_dir: Option<PathBuf>,
    /// Path variables, used by [`run_workflow_file`].
    pub env: BTreeMap<String, String>,
    pub settings: GenerationSettings,
    /// Fixed run id; a random one otherwise.
    pub run_id: Option<Uuid>,
    /// Record every backend call to `cassette.jsonl` in the run directory.
    pub record_cassette: bool,
    /// Recorded in the trace header.
    pub backend_label: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            max_concurrency: 1,
            output_dir: None,
            env: BTreeMap::new(),
            settings: GenerationSettings::default(),
            run_id: None,
            record_cassette: true,
            backend_label: "custom".to_owned(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid generation settings: {0}")]
    Settings(#[from] SettingsError),
    #[error("max_concurrency must be at least 1")]
    Concurrency,
    #[error("workflow has validation errors")]
    Invalid { diagnostics: Vec<Diagnostic> },
    #[error("workflow has no entry nodes")]
    NoEntryNodes,
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("cannot create run directory {path}: {source}")]
    RunDir { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Cassette(#[from] CassetteError),
    #[error("trace holds an unreadable workflow: {0}")]
    Snapshot(ParseError),
    #[error("run failed: {error}")]
    Node {
        error: NodeError,
        trace: Box<RunTrace>,
        run_dir: PathBuf,
    },
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: RunTrace,
    pub run_dir: PathBuf,
    /// Final variable store.
    pub variables: BTreeMap<String, String>,
}

/// Load the workflow at `path` with `config.env` and run it.
pub fn run_workflow_file(
    path: &Path,
    backend: impl LlmBackend,
    config: &RunConfig,
) -> Result<RunOutcome, RunError> {
    let bundle = WorkflowBundle::load(path, &config.env)?;
    run_workflow(&bundle, backend, config)
}

/// Run `bundle` to completion. Files go to `{output_dir}/{run_id}/`.
///
/// Fails before creating anything if the settings are invalid or the graph
/// has validation errors. Once the run has started, the first node failure
/// stops dispatch; nodes already running finish and are recorded, the rest
/// stay pending, and the error carries the trace written so far.
pub fn run_workflow(
    bundle: &WorkflowBundle,
    backend: impl LlmBackend,
    config: &RunConfig,
) -> Result<RunOutcome, RunError> {
    config.settings.validate()?;
    if config.max_concurrency == 0 {
        return Err(RunError::Concurrency);
    }
    let graph = build_graph(&bundle.spec);
    let diagnostics = validate_graph(&graph);
    if has_errors(&diagnostics) {
        return Err(RunError::Invalid { diagnostics });
    }
    if graph.entry_ids().is_empty() {
        return Err(RunError::NoEntryNodes);
    }
    let order = topological_order(&graph).map_err(|_| RunError::Invalid {
        diagnostics: diagnostics.clone(),
    })?;

    let run_id = config.run_id.unwrap_or_else(Uuid::new_v4);
    let output_dir = config.output_dir.clone().unwrap_or_else(|| bundle.output_dir.clone());
    let run_dir = output_dir.join(run_id.to_string());
    fs::create_dir_all(&run_dir).map_err(|source| RunError::RunDir {
        path: run_dir.clone(),
        source,
    })?;

    let header = TraceHeader {
        schema_version: TRACE_SCHEMA_VERSION,
        run_id,
        spec_digest: bundle.spec_digest(),
        started_at: Utc::now(),
        config: ConfigSnapshot {
            max_concurrency: config.max_concurrency,
            backend: config.backend_label.clone(),
            settings: config.settings.clone(),
            record_cassette: config.record_cassette,
        },
        bundle: bundle.snapshot(),
    };
    let writer = TraceWriter::create(&run_dir.join(TRACE_FILE), &header)?;

    let recorder;
    let backend: &dyn LlmBackend = if config.record_cassette {
        recorder = record_and_wrap(&backend, &run_dir.join(CASSETTE_FILE))?;
        &recorder
    } else {
        &backend
    };

    let ctx = node::RunContext::new(&graph, bundle, backend, &config.settings, &run_dir);
    let mut scheduler = Scheduler::new(&graph, &order);
    let mut entries = Vec::new();
    let result = scheduler.run(&ctx, &writer, &mut entries, config.max_concurrency);

    let outcome = match &result {
        Ok(()) => Outcome::Completed,
        Err(Halt::Node(e)) => Outcome::Failed {
            node_id: Some(e.node_id.clone()),
            message: e.kind.to_string(),
        },
        Err(Halt::Trace(e)) => Outcome::Failed {
            node_id: None,
            message: e.to_string(),
        },
    };
    let footer = TraceFooter {
        finished_at: Utc::now(),
        status: scheduler.status_map(),
        outcome,
    };
    let finish = writer.finish(&footer);
    let trace = RunTrace {
        header,
        entries,
        footer: Some(footer),
    };
    match result {
        Ok(()) => {
            finish?;
            let variables = ctx.variables();
            Ok(RunOutcome {
                trace,
                run_dir,
                variables,
            })
        }
        Err(Halt::Trace(e)) => Err(RunError::Trace(e)),
        Err(Halt::Node(error)) => Err(RunError::Node {
            error,
            trace: Box::new(trace),
            run_dir,
        }),
    }
}

enum Halt {
    Node(NodeError),
    Trace(TraceError),
}

struct Scheduler<'g> {
    graph: &'g WorkflowGraph,
    /// Topological rank by declaration position.
    rank: Vec<usize>,
    incoming: Vec<Vec<usize>>,
    outgoing: Vec<Vec<usize>>,
    /// Edge endpoints as positions, and whether the edge was taken once
    /// resolved.
    edges: Vec<(usize, usize, EdgeKind)>,
    taken: Vec<Option<bool>>,
    status: Vec<NodeStatus>,
    ready: BTreeSet<(usize, usize)>,
}

impl<'g> Scheduler<'g> {
    fn new(graph: &'g WorkflowGraph, order: &[String]) -> Self {
        let n = graph.nodes().len();
        let mut rank = vec![usize::MAX; n];
        for (r, id) in order.iter().enumerate() {
            if let Some(p) = graph.position(id) {
                rank[p] = r;
            }
        }
        let mut incoming = vec![Vec::new(); n];
        let mut outgoing = vec![Vec::new(); n];
        let mut edges = Vec::new();
        for edge in graph.edges() {
            if let (Some(a), Some(b)) = (graph.position(&edge.from), graph.position(&edge.to)) {
                outgoing[a].push(edges.len());
                incoming[b].push(edges.len());
                edges.push((a, b, edge.kind));
            }
        }
        let ready = graph
            .entry_ids()
            .iter()
            .filter_map(|id| graph.position(id))
            .map(|p| (rank[p], p))
            .collect();
        Scheduler {
            graph,
            rank,
            incoming,
            outgoing,
            taken: vec![None; edges.len()],
            edges,
            status: vec![NodeStatus::Pending; n],
            ready,
        }
    }

    fn run(
        &mut self,
        ctx: &node::RunContext<'_>,
        writer: &TraceWriter,
        entries: &mut Vec<TraceEntry>,
        max_concurrency: usize,
    ) -> Result<(), Halt> {
        let mut halt = None;
        thread::scope(|s| {
            let (tx, rx) = mpsc::channel();
            let mut in_flight = 0;
            loop {
                while halt.is_none() && in_flight < max_concurrency {
                    let Some((_, pos)) = self.ready.pop_first() else {
                        break;
                    };
                    self.status[pos] = NodeStatus::Running;
                    let tx = tx.clone();
                    s.spawn(move || {
                        let _ = tx.send((pos, node::execute_node(ctx, pos)));
                    });
                    in_flight += 1;
                }
                if in_flight == 0 {
                    break;
                }
                let (pos, result) = rx.recv().expect("workers hold a sender");
                in_flight -= 1;
                match result {
                    Ok(step) => {
                        let decision = step.decision.as_ref().map(|d| d.condition_result);
                        let entry = TraceEntry::Step(step);
                        let appended = writer.append(&entry);
                        entries.push(entry);
                        self.status[pos] = NodeStatus::Done;
                        if let Err(e) = appended {
                            halt.get_or_insert(Halt::Trace(e));
                            continue;
                        }
                        if halt.is_some() {
                            continue;
                        }
                        for skipped in self.resolve(pos, decision) {
                            let entry = TraceEntry::Skip {
                                node_id: self.graph.nodes()[skipped].id.clone(),
                            };
                            let appended = writer.append(&entry);
                            entries.push(entry);
                            if let Err(e) = appended {
                                halt.get_or_insert(Halt::Trace(e));
                                break;
                            }
                        }
                    }
                    Err(e) => {
                        self.status[pos] = NodeStatus::Failed;
                        halt.get_or_insert(Halt::Node(e));
                    }
                }
            }
        });
        match halt {
            Some(h) => Err(h),
            None => Ok(()),
        }
    }

    /// Resolve the outgoing edges of a finished node. Returns the nodes
    /// that became skipped, in the order they were decided.
    fn resolve(&mut self, done: usize, decision: Option<bool>) -> Vec<usize> {
        let mut skipped = Vec::new();
        let mut work = vec![(done, decision, true)];
        while let Some((pos, decision, ran)) = work.pop() {
            let mut targets = Vec::new();
            for &e in &self.outgoing[pos] {
                let (_, to, kind) = self.edges[e];
                self.taken[e] = Some(
                    ran && match kind {
                        EdgeKind::Static => true,
                        EdgeKind::OnTrue => decision == Some(true),
                        EdgeKind::OnFalse => decision == Some(false),
                    },
                );
                if !targets.contains(&to) {
                    targets.push(to);
                }
            }
            targets.sort_by_key(|&t| self.rank[t]);
            let mut newly_skipped = Vec::new();
            for t in targets {
                if self.status[t] != NodeStatus::Pending || self.ready.contains(&(self.rank[t], t)) {
                    continue;
                }
                let states: Vec<Option<bool>> = self.incoming[t].iter().map(|&e| self.taken[e]).collect();
                if states.iter().any(Option::is_none) {
                    continue;
                }
                if states.contains(&Some(true)) {
                    self.ready.insert((self.rank[t], t));
                } else {
                    self.status[t] = NodeStatus::Skipped;
                    skipped.push(t);
                    newly_skipped.push(t);
                }
            }
            // Depth-first, but siblings in rank order.
            for t in newly_skipped.into_iter().rev() {
                work.push((t, None, false));
            }
        }
        skipped
    }

    fn status_map(&self) -> BTreeMap<String, NodeStatus> {
        self.graph
            .unique_positions()
            .map(|p| (self.graph.nodes()[p].id.clone(), self.status[p]))
            .collect()
    }
}

/// Result of re-running a recorded trace against its own cassette.
#[derive(Debug)]
pub struct ReplayReport {
    pub original: RunTrace,
    pub replayed: RunTrace,
    pub run_dir: PathBuf,
    /// Empty when the replayed trace and output files match the original.
    pub differences: Vec<String>,
}

impl ReplayReport {
    pub fn is_identical(&self) -> bool {
        self.differences.is_empty()
    }
}

/// Re-execute the run recorded at `trace_path` using only the trace and the
/// cassette beside it. The replay gets a fresh run directory next to the
/// original one.
pub fn replay_run(trace_path: &Path) -> Result<ReplayReport, RunError> {
    let original = load_trace(trace_path)?;
    let original_dir = trace_path.parent().unwrap_or(Path::new("."));
    let backend = ReplayBackend::from_file(&original_dir.join(CASSETTE_FILE))?;
    let bundle = WorkflowBundle::from_snapshot(&original.header.bundle).map_err(RunError::Snapshot)?;
    let config = RunConfig {
        max_concurrency: original.header.config.max_concurrency,
        output_dir: Some(original_dir.parent().unwrap_or(Path::new(".")).to_owned()),
        settings: original.header.config.settings.clone(),
        backend_label: "replay".to_owned(),
        ..RunConfig::default()
    };
    let (replayed, run_dir) = match run_workflow(&bundle, backend, &config) {
        Ok(outcome) => (outcome.trace, outcome.run_dir),
        Err(RunError::Node { trace, run_dir, .. }) => (*trace, run_dir),
        Err(e) => return Err(e),
    };
    let mut differences = compare_traces(&original, &replayed);
    differences.extend(verify_output_files(&original, original_dir));
    differences.extend(verify_output_files(&replayed, &run_dir));
    Ok(ReplayReport {
        original,
        replayed,
        run_dir,
        differences,
    })
}
