use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use uuid::Uuid;

use crate::backend::GenerationSettings;
use crate::bundle::BundleSnapshot;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema_version: u32,
    pub run_id: Uuid,
    /// SHA-256 of the canonical workflow text.
    pub spec_digest: String,
    pub started_at: DateTime<Utc>,
    pub config: ConfigSnapshot,
    pub bundle: BundleSnapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub max_concurrency: usize,
    /// Free-form label of the backend that served the run.
    pub backend: String,
    pub settings: GenerationSettings,
    pub record_cassette: bool,
}

/// What one executed node did.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeResult {
    pub node_id: String,
    pub kind: String,
    pub prompt: String,
    pub response: String,
    pub variables: Vec<VariableBinding>,
    pub files: Vec<FileRecord>,
    /// Present exactly for decision makers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<Decision>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableBinding {
    pub name: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Relative to the run directory.
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileRecord {
    pub fn for_content(name: &str, content: &[u8]) -> Self {
        FileRecord {
            name: name.to_owned(),
            sha256: hex::encode(Sha256::digest(content)),
            bytes: content.len() as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub condition_result: bool,
    pub next_nodes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    Pending,
    Running,
    Done,
    Skipped,
    Failed,
}

impl NodeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeStatus::Pending => "pending",
            NodeStatus::Running => "running",
            NodeStatus::Done => "done",
            NodeStatus::Skipped => "skipped",
            NodeStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Failed {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        node_id: Option<String>,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFooter {
    pub finished_at: DateTime<Utc>,
    pub status: BTreeMap<String, NodeStatus>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TraceEntry {
    Step(NodeResult),
    Skip { node_id: String },
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum LineOut<'a> {
    Header(&'a TraceHeader),
    Footer(&'a TraceFooter),
}

#[derive(Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum LineIn {
    Header(TraceHeader),
    Step(NodeResult),
    Skip { node_id: String },
    Footer(TraceFooter),
}

fn header_line(header: &TraceHeader) -> String {
    serde_json::to_string(&LineOut::Header(header)).expect("trace header serializes")
}

fn entry_line(entry: &TraceEntry) -> String {
    serde_json::to_string(entry).expect("trace entry serializes")
}

fn footer_line(footer: &TraceFooter) -> String {
    serde_json::to_string(&LineOut::Footer(footer)).expect("trace footer serializes")
}

/// In-memory form of a trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub header: TraceHeader,
    /// Steps and skip markers in the order they happened.
    pub entries: Vec<TraceEntry>,
    /// Absent while the run is in progress or if it was cut short.
    pub footer: Option<TraceFooter>,
}

impl RunTrace {
    pub fn steps(&self) -> impl Iterator<Item = &NodeResult> {
        self.entries.iter().filter_map(|e| match e {
            TraceEntry::Step(r) => Some(r),
            TraceEntry::Skip { .. } => None,
        })
    }

    pub fn skipped(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().filter_map(|e| match e {
            TraceEntry::Skip { node_id } => Some(node_id.as_str()),
            TraceEntry::Step(_) => None,
        })
    }

    pub fn step(&self, node_id: &str) -> Option<&NodeResult> {
        self.steps().find(|s| s.node_id == node_id)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = header_line(&self.header);
        out.push('\n');
        for entry in &self.entries {
            out.push_str(&entry_line(entry));
            out.push('\n');
        }
        if let Some(footer) = &self.footer {
            out.push_str(&footer_line(footer));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TraceError> {
        let mut header = None;
        let mut entries = Vec::new();
        let mut footer = None;
        let mut offset = 0;
        for (i, raw_line) in text.split_inclusive('\n').enumerate() {
            let line_start = offset;
            offset += raw_line.len();
            let line = raw_line.trim_end_matches(['\n', '\r']);
            if line.trim().is_empty() {
                continue;
            }
            let parse_error = |e: serde_json::Error| TraceError::Parse {
                line: i + 1,
                offset: line_start + e.column().saturating_sub(1),
                message: e.to_string(),
            };
            if header.is_none() {
                let value: serde_json::Value = serde_json::from_str(line).map_err(parse_error)?;
                if value.get("record").and_then(|r| r.as_str()) != Some("header") {
                    return Err(TraceError::MissingHeader);
                }
                let found = value.get("schema_version").and_then(|v| v.as_u64());
                if found != Some(TRACE_SCHEMA_VERSION as u64) {
                    return Err(TraceError::SchemaVersion {
                        found: found.map(|v| v.to_string()).unwrap_or_else(|| "none".into()),
                        expected: TRACE_SCHEMA_VERSION,
                    });
                }
            }
            if footer.is_some() {
                return Err(TraceError::Structure {
                    line: i + 1,
                    message: "record after footer".into(),
                });
            }
            let record: LineIn = serde_json::from_str(line).map_err(parse_error)?;
            match (record, header.is_some()) {
                (LineIn::Header(h), false) => header = Some(h),
                (LineIn::Header(_), true) => {
                    return Err(TraceError::Structure {
                        line: i + 1,
                        message: "second header".into(),
                    })
                }
                (LineIn::Step(r), true) => entries.push(TraceEntry::Step(r)),
                (LineIn::Skip { node_id }, true) => entries.push(TraceEntry::Skip { node_id }),
                (LineIn::Footer(f), true) => footer = Some(f),
                (_, false) => return Err(TraceError::MissingHeader),
            }
        }
        Ok(RunTrace {
            header: header.ok_or(TraceError::MissingHeader)?,
            entries,
            footer,
        })
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed trace at line {line} (byte offset {offset}): {message}")]
    Parse {
        line: usize,
        offset: usize,
        message: String,
    },
    #[error("trace schema version {found} is not supported (expected {expected})")]
    SchemaVersion { found: String, expected: u32 },
    #[error("trace does not start with a header record")]
    MissingHeader,
    #[error("malformed trace at line {line}: {message}")]
    Structure { line: usize, message: String },
}

pub fn save_trace(trace: &RunTrace, path: &Path) -> Result<(), TraceError> {
    fs::write(path, trace.to_jsonl()).map_err(|source| TraceError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn load_trace(path: &Path) -> Result<RunTrace, TraceError> {
    let text = fs::read_to_string(path).map_err(|source| TraceError::Io {
        path: path.to_owned(),
        source,
    })?;
    RunTrace::from_jsonl(&text)
}

/// Appends records to a trace file, flushing after each one.
pub struct TraceWriter {
    path: PathBuf,
    sink: Mutex<BufWriter<File>>,
}

impl TraceWriter {
    pub fn create(path: &Path, header: &TraceHeader) -> Result<Self, TraceError> {
        let io_err = |source| TraceError::Io {
            path: path.to_owned(),
            source,
        };
        let file = File::create(path).map_err(io_err)?;
        let writer = TraceWriter {
            path: path.to_owned(),
            sink: Mutex::new(BufWriter::new(file)),
        };
        writer.write_line(&header_line(header))?;
        Ok(writer)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, entry: &TraceEntry) -> Result<(), TraceError> {
        self.write_line(&entry_line(entry))
    }

    pub fn finish(self, footer: &TraceFooter) -> Result<(), TraceError> {
        self.write_line(&footer_line(footer))
    }

    fn write_line(&self, line: &str) -> Result<(), TraceError> {
        let mut sink = self.sink.lock().unwrap_or_else(|e| e.into_inner());
        writeln!(sink, "{line}")
            .and_then(|_| sink.flush())
            .map_err(|source| TraceError::Io {
                path: self.path.clone(),
                source,
            })
    }
}

/// Differences between two runs of the same workflow, ignoring the run id,
/// timestamps and run configuration. Empty means the spec digest, every
/// step and skip record, and the final statuses match byte for byte.
pub fn compare_traces(a: &RunTrace, b: &RunTrace) -> Vec<String> {
    let mut diffs = Vec::new();
    if a.header.spec_digest != b.header.spec_digest {
        diffs.push(format!(
            "spec digest differs: {} vs {}",
            a.header.spec_digest, b.header.spec_digest
        ));
    }
    let lines_a: Vec<String> = a.entries.iter().map(entry_line).collect();
    let lines_b: Vec<String> = b.entries.iter().map(entry_line).collect();
    if lines_a.len() != lines_b.len() {
        diffs.push(format!("record count differs: {} vs {}", lines_a.len(), lines_b.len()));
    }
    for (i, (la, lb)) in lines_a.iter().zip(&lines_b).enumerate() {
        if la != lb {
            diffs.push(format!("record {} differs", i + 1));
        }
    }
    let status = |t: &RunTrace| t.footer.as_ref().map(|f| (f.status.clone(), f.outcome.clone()));
    if status(a) != status(b) {
        diffs.push("final status differs".into());
    }
    diffs
}

/// Check that every file recorded in the trace exists under `run_dir` with
/// the recorded size and hash. Returns one message per problem.
pub fn verify_output_files(trace: &RunTrace, run_dir: &Path) -> Vec<String> {
    let mut problems = Vec::new();
    for step in trace.steps() {
        for file in &step.files {
            let path = run_dir.join(&file.name);
            match fs::read(&path) {
                Ok(bytes) => {
                    let actual = FileRecord::for_content(&file.name, &bytes);
                    if &actual != file {
                        problems.push(format!("{} does not match its recorded hash", path.display()));
                    }
                }
                Err(e) => problems.push(format!("{}: {e}", path.display())),
            }
        }
    }
    problems
}
