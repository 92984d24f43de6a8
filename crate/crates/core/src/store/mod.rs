//! Run traces and node output files.
//!
//! Every run gets its own directory, `{output_dir}/{run_id}/`, holding the
//! trace, the cassette of backend calls and the files written by nodes.
//!
//! The trace is JSON lines. The first line is a header with the run
//! metadata and a snapshot of everything needed to re-run the workflow,
//! followed by one line per executed node (`step`) or skipped node
//! (`skip`), and, once the run ends, a `footer` with the final status of
//! every node. Each line is flushed before the engine schedules the
//! successors of the node it describes, so a trace cut short by a crash is
//! still a readable prefix.

mod output;
mod trace;

pub use output::write_output_file;
pub use trace::{
    compare_traces, load_trace, save_trace, verify_output_files, ConfigSnapshot, Decision,
    FileRecord, NodeResult, NodeStatus, Outcome, RunTrace, TraceEntry, TraceError, TraceFooter,
    TraceHeader, TraceWriter, VariableBinding, TRACE_SCHEMA_VERSION,
};

/// File name of the trace inside a run directory.
pub const TRACE_FILE: &str = "trace.jsonl";
/// File name of the recorded backend calls inside a run directory.
pub const CASSETTE_FILE: &str = "cassette.jsonl";
