//! A workflow together with everything it reads from disk.
//!
//! Loading a bundle expands `${NAME}` path variables, reads the parameter
//! files and every node's prompt template, so that the engine itself never
//! touches the input side of the filesystem.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dsl::{
    expand_path_variables, load_parameter_file, parse_workflow, serialize_workflow, ParameterError,
    ParameterSet, ParseError, PathError, WorkflowSpec,
};

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("{what}: {source}")]
    Path { what: String, source: PathError },
    #[error("{path}: {source}")]
    Parameter { path: PathBuf, source: ParameterError },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkflowBundle {
    pub spec: WorkflowSpec,
    /// Parameter files in declaration order, labelled by suffix.
    pub parameter_sets: Vec<(String, ParameterSet)>,
    /// Prompt template text by node id.
    pub templates: BTreeMap<String, String>,
    /// Expanded `output_dir_path`.
    pub output_dir: PathBuf,
    /// The workflow file, when loaded from disk.
    pub source: Option<PathBuf>,
}

/// Serializable copy of a bundle, embedded in run traces so that a run can
/// be repeated without the original files.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleSnapshot {
    /// Canonical workflow text.
    pub workflow: String,
    pub parameter_files: Vec<ParameterSnapshot>,
    pub templates: BTreeMap<String, String>,
    pub output_dir: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterSnapshot {
    pub suffix: String,
    pub values: BTreeMap<String, String>,
}

fn read(path: &Path) -> Result<String, BundleError> {
    fs::read_to_string(path).map_err(|source| BundleError::Io {
        path: path.to_owned(),
        source,
    })
}

impl WorkflowBundle {
    /// Load the workflow at `path`. Path variables are looked up in `env`;
    /// relative paths resolve against the workflow file's directory.
    ///
    /// Nodes without exactly one prompt template get no entry in
    /// `templates`; graph validation reports them.
    pub fn load(path: &Path, env: &BTreeMap<String, String>) -> Result<Self, BundleError> {
        let text = read(path)?;
        let spec = parse_workflow(&text).map_err(|source| BundleError::Parse {
            path: path.to_owned(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |what: String, template: &str| -> Result<PathBuf, BundleError> {
            let expanded = expand_path_variables(template, env)
                .map_err(|source| BundleError::Path { what, source })?;
            Ok(base.join(expanded))
        };

        let output_dir = resolve("output_dir_path".into(), &spec.output_dir_path)?;
        let mut parameter_sets = Vec::new();
        for file in &spec.parameter_files {
            let p = resolve(format!("parameter file '{}'", file.suffix), &file.file_path)?;
            let set = load_parameter_file(&read(&p)?)
                .map_err(|source| BundleError::Parameter { path: p, source })?;
            parameter_sets.push((file.suffix.clone(), set));
        }
        let mut templates = BTreeMap::new();
        for node in &spec.nodes {
            let Some(template) = node.prompt_template_path() else {
                continue;
            };
            if templates.contains_key(&node.id) {
                continue;
            }
            let p = resolve(format!("prompt template of node '{}'", node.id), template)?;
            templates.insert(node.id.clone(), read(&p)?);
        }
        Ok(WorkflowBundle {
            spec,
            parameter_sets,
            templates,
            output_dir,
            source: Some(path.to_owned()),
        })
    }

    /// SHA-256 hex of the canonical workflow text.
    pub fn spec_digest(&self) -> String {
        hex::encode(Sha256::digest(serialize_workflow(&self.spec).as_bytes()))
    }

    pub fn snapshot(&self) -> BundleSnapshot {
        BundleSnapshot {
            workflow: serialize_workflow(&self.spec),
            parameter_files: self
                .parameter_sets
                .iter()
                .map(|(suffix, set)| ParameterSnapshot {
                    suffix: suffix.clone(),
                    values: set.as_map().clone(),
                })
                .collect(),
            templates: self.templates.clone(),
            output_dir: self.output_dir.to_string_lossy().into_owned(),
        }
    }

    pub fn from_snapshot(snapshot: &BundleSnapshot) -> Result<Self, ParseError> {
        Ok(WorkflowBundle {
            spec: parse_workflow(&snapshot.workflow)?,
            parameter_sets: snapshot
                .parameter_files
                .iter()
                .map(|p| (p.suffix.clone(), p.values.clone().into_iter().collect()))
                .collect(),
            templates: snapshot.templates.clone(),
            output_dir: PathBuf::from(&snapshot.output_dir),
            source: None,
        })
    }
}
