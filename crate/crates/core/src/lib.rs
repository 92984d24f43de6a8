//! Graph-of-Thought workflow engine.
//!
//! A workflow is a JSON document describing a directed graph of LLM tasks.
//! *Executor* nodes render a prompt template, send it to a language model
//! backend and bind the response to variables or files. *Decision maker*
//! nodes do the same and then pick the next nodes by evaluating a condition
//! over the variables. The crate covers the whole path from text to a
//! recorded run:
//!
//! - [`dsl`]: parse and canonically serialize workflow documents, load
//!   shared parameter files, expand `${NAME}` path variables.
//! - [`graph`]: build the node graph, validate it, order it, export DOT.
//! - [`template`]: `#{name}` placeholder expansion over layered parameters.
//! - [`engine`]: schedule and execute nodes, evaluate conditions, route.
//! - [`backend`]: the LLM seam, with a scripted mock, a cassette recorder
//!   and replayer, and an OpenAI-compatible HTTP client.
//! - [`store`]: JSON-lines run traces and atomic output files.
//!
//! ```
//! use gotflow::{dsl, graph};
//!
//! let spec = dsl::parse_workflow(gotflow::example::ADS_WORKFLOW)?;
//! let g = graph::build_graph(&spec);
//! assert!(!graph::has_errors(&graph::validate_graph(&g)));
//! assert_eq!(g.entry_ids(), ["data_reader"]);
//! # Ok::<(), dsl::ParseError>(())
//! ```
//!
//! The guide under `book/` walks through each of these in more depth; its
//! code listings are compiled and run as doc tests of this crate.

pub mod backend;
pub mod bundle;
pub mod dsl;
pub mod engine;
pub mod example;
pub mod graph;
pub mod store;
pub mod template;

pub use backend::{BackendError, CompletionRequest, GenerationSettings, LlmBackend};
pub use bundle::{BundleError, WorkflowBundle};
pub use dsl::{parse_workflow, serialize_workflow, WorkflowSpec};
pub use engine::{run_workflow, RunConfig, RunError, RunOutcome};
pub use store::RunTrace;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/dsl.md")]
    mod dsl {}
    #[doc = include_str!("../../../book/src/graph.md")]
    mod graph {}
    #[doc = include_str!("../../../book/src/templates.md")]
    mod templates {}
    #[doc = include_str!("../../../book/src/execution.md")]
    mod execution {}
    #[doc = include_str!("../../../book/src/backends.md")]
    mod backends {}
    #[doc = include_str!("../../../book/src/traces.md")]
    mod traces {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
