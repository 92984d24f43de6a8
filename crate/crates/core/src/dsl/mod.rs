//! The workflow definition language: types, parsing, and canonical output.
//!
//! A workflow document is a JSON object with three top-level keys:
//! `output_dir_path`, `input_parameters` (references to shared parameter
//! files) and `flow_items` (the nodes). Each node is either an `executor`,
//! which routes statically through `next_nodes`, or a `decision_maker`,
//! which evaluates a [`Condition`] and follows the matching
//! [`ForwardPath`].
//!
//! Parsing normalizes the document. Entries typed `output_variable` are
//! inputs wherever they appear, including inside an `"output"` array, and a
//! node that repeats the `"output"` key has its arrays merged in document
//! order. Keys the engine does not understand are kept in `extra` so that
//! [`serialize_workflow`] can write them back out.

mod params;
mod parse;
mod path;
pub(crate) mod raw;
mod serialize;

use serde_json::{Map, Value};

pub use params::{load_parameter_file, ParameterError, ParameterSet};
pub use parse::{parse_workflow, parse_workflow_bytes, ParseError};
pub(crate) use path::is_identifier;
pub use path::{expand_path_variables, PathError};
pub use serialize::serialize_workflow;

/// Parsed, normalized form of one workflow document.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkflowSpec {
    /// Where node file outputs go. May contain `${NAME}` path variables.
    pub output_dir_path: String,
    pub parameter_files: Vec<ParameterFileRef>,
    /// Nodes in declaration order.
    pub nodes: Vec<FlowNode>,
    /// Unrecognized top-level keys, kept for round-tripping.
    pub extra: Map<String, Value>,
}

impl WorkflowSpec {
    pub fn node(&self, id: &str) -> Option<&FlowNode> {
        self.nodes.iter().find(|n| n.id == id)
    }
}

/// A shared parameter file referenced at workflow level.
///
/// The suffix is a label only; keys from the file are not namespaced by it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParameterFileRef {
    pub suffix: String,
    pub file_path: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Executor,
    DecisionMaker,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Executor => "executor",
            NodeKind::DecisionMaker => "decision_maker",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowNode {
    pub id: String,
    pub description: String,
    pub input_parameters: Vec<InputParameter>,
    pub outputs: Vec<OutputBinding>,
    pub routing: Routing,
    /// Unrecognized node-level keys.
    pub extra: Map<String, Value>,
}

impl FlowNode {
    /// The node kind follows from its routing: only decision makers route
    /// conditionally.
    pub fn kind(&self) -> NodeKind {
        match self.routing {
            Routing::Static { .. } => NodeKind::Executor,
            Routing::Conditional { .. } => NodeKind::DecisionMaker,
        }
    }

    /// File path template of the node's prompt, if it declares exactly one.
    pub fn prompt_template_path(&self) -> Option<&str> {
        let mut paths = self.input_parameters.iter().filter_map(|p| match &p.source {
            InputSource::PromptTemplate { file_path } => Some(file_path.as_str()),
            _ => None,
        });
        match (paths.next(), paths.next()) {
            (Some(path), None) => Some(path),
            _ => None,
        }
    }

    /// Names of upstream variables this node consumes.
    pub fn consumed_variables(&self) -> impl Iterator<Item = &str> {
        self.input_parameters
            .iter()
            .filter(|p| matches!(p.source, InputSource::OutputVariable))
            .map(|p| p.name.as_str())
    }

    /// Inline literal parameters, in declaration order.
    pub fn literals(&self) -> impl Iterator<Item = (&str, &str)> {
        self.input_parameters.iter().filter_map(|p| match &p.source {
            InputSource::Literal { value } => Some((p.name.as_str(), value.as_str())),
            _ => None,
        })
    }

    /// Names of variables this node declares as outputs.
    pub fn variable_outputs(&self) -> impl Iterator<Item = &str> {
        self.outputs
            .iter()
            .filter(|o| o.kind == OutputKind::Variable)
            .map(|o| o.name.as_str())
    }

    pub fn file_outputs(&self) -> impl Iterator<Item = &str> {
        self.outputs
            .iter()
            .filter(|o| o.kind == OutputKind::File)
            .map(|o| o.name.as_str())
    }

    pub fn condition(&self) -> Option<&Condition> {
        match &self.routing {
            Routing::Conditional { condition, .. } => Some(condition),
            Routing::Static { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputParameter {
    pub name: String,
    pub source: InputSource,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputSource {
    /// The node's prompt; the value is a file path template.
    PromptTemplate { file_path: String },
    /// An upstream variable; the parameter's own name is the variable name.
    OutputVariable,
    /// An inline value visible only to this node's template.
    Literal { value: String },
}

impl InputSource {
    pub fn type_name(&self) -> &'static str {
        match self {
            InputSource::PromptTemplate { .. } => "prompt_template",
            InputSource::OutputVariable => "output_variable",
            InputSource::Literal { .. } => "literal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputBinding {
    pub kind: OutputKind,
    /// Variable name, or a file name relative to the run's output directory.
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutputKind {
    Variable,
    File,
}

impl OutputKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputKind::Variable => "variable",
            OutputKind::File => "file",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Routing {
    Static {
        next_nodes: Vec<String>,
    },
    Conditional {
        condition: Condition,
        forward_paths: Vec<ForwardPath>,
    },
}

/// Comparison tree evaluated against the variable store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Condition {
    Compare {
        /// Variable named by the condition's `data_source`.
        variable: String,
        operator: Operator,
        operand: String,
    },
    /// `"is_composed": true`: an all/any tree over at least two children.
    Composed {
        combinator: Combinator,
        children: Vec<Condition>,
    },
}

impl Condition {
    /// Every variable read by the leaves of this tree, left to right.
    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_variables(&mut out);
        out
    }

    fn collect_variables<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Condition::Compare { variable, .. } => out.push(variable),
            Condition::Composed { children, .. } => {
                for child in children {
                    child.collect_variables(out);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operator {
    Equal,
    NotEqual,
    Contains,
}

impl Operator {
    pub fn as_str(self) -> &'static str {
        match self {
            Operator::Equal => "equal",
            Operator::NotEqual => "not_equal",
            Operator::Contains => "contains",
        }
    }

    pub fn parse(s: &str) -> Option<Operator> {
        match s {
            "equal" => Some(Operator::Equal),
            "not_equal" => Some(Operator::NotEqual),
            "contains" => Some(Operator::Contains),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Combinator {
    All,
    Any,
}

impl Combinator {
    pub fn as_str(self) -> &'static str {
        match self {
            Combinator::All => "all",
            Combinator::Any => "any",
        }
    }

    pub fn parse(s: &str) -> Option<Combinator> {
        match s {
            "all" => Some(Combinator::All),
            "any" => Some(Combinator::Any),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForwardPath {
    pub condition_result: bool,
    pub next_nodes: Vec<String>,
}
