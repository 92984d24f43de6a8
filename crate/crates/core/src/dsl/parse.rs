use serde_json::Map;
use thiserror::Error;

use super::raw::Raw;
use super::{
    Combinator, Condition, FlowNode, ForwardPath, InputParameter, InputSource, Operator,
    OutputBinding, OutputKind, ParameterFileRef, Routing, WorkflowSpec,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("input is not valid UTF-8 (byte offset {offset})")]
    InvalidUtf8 { offset: usize },
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}: missing required key '{key}'", location(.node_id))]
    MissingKey {
        key: String,
        node_id: Option<String>,
    },
    #[error("{}: key '{key}' must be {expected}, found {found}", location(.node_id))]
    WrongType {
        key: String,
        node_id: Option<String>,
        expected: &'static str,
        found: &'static str,
    },
    #[error("node '{node_id}': unknown node type '{found}'")]
    UnknownNodeType { node_id: String, found: String },
    #[error("{}: unknown parameter type '{found}'", location(.node_id))]
    UnknownParameterType {
        node_id: Option<String>,
        found: String,
    },
    #[error("node '{node_id}': unknown operator '{found}'")]
    UnknownOperator { node_id: String, found: String },
    #[error("node '{node_id}': unknown combinator '{found}'")]
    UnknownCombinator { node_id: String, found: String },
    #[error("duplicate node id '{id}'")]
    DuplicateNodeId { id: String },
    #[error("nodes list is empty")]
    EmptyWorkflow,
    #[error("{}: {message}", location(.node_id))]
    Invalid {
        node_id: Option<String>,
        message: String,
    },
}

fn location(node_id: &Option<String>) -> String {
    match node_id {
        Some(id) => format!("node '{id}'"),
        None => "workflow".to_owned(),
    }
}

/// Parse a workflow document from raw bytes. Never panics; any input that is
/// not a well-formed workflow produces a [`ParseError`].
pub fn parse_workflow_bytes(bytes: &[u8]) -> Result<WorkflowSpec, ParseError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ParseError::InvalidUtf8 {
        offset: e.valid_up_to(),
    })?;
    parse_workflow(text)
}

pub fn parse_workflow(text: &str) -> Result<WorkflowSpec, ParseError> {
    let raw: Raw = serde_json::from_str(text).map_err(|e| ParseError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let root = Obj::new(&raw, "document", None)?;

    let output_dir_path = root.required_str("output_dir_path")?.to_owned();

    let mut parameter_files = Vec::new();
    for item in root.merged_array("input_parameters")? {
        let entry = Obj::new(item, "input_parameters entry", None)?;
        let suffix = entry.required_str("suffix")?;
        let file_path = entry.required_str("file_path")?;
        if suffix.is_empty() || file_path.is_empty() {
            return Err(root.invalid("parameter file entries need a non-empty suffix and file_path"));
        }
        parameter_files.push(ParameterFileRef {
            suffix: suffix.to_owned(),
            file_path: file_path.to_owned(),
        });
    }

    if root.get("flow_items").is_none() {
        return Err(root.missing("flow_items"));
    }
    let items = root.merged_array("flow_items")?;
    let mut nodes: Vec<FlowNode> = Vec::with_capacity(items.len());
    for item in items {
        let node = parse_node(item)?;
        if nodes.iter().any(|n| n.id == node.id) {
            return Err(ParseError::DuplicateNodeId { id: node.id });
        }
        nodes.push(node);
    }
    if nodes.is_empty() {
        return Err(ParseError::EmptyWorkflow);
    }

    Ok(WorkflowSpec {
        output_dir_path,
        parameter_files,
        nodes,
        extra: root.extra(&["output_dir_path", "input_parameters", "flow_items"]),
    })
}

const NODE_KEYS: &[&str] = &[
    "id",
    "description",
    "type",
    "input_parameters",
    "output",
    "next_nodes",
    "condition",
    "forward_paths",
];

fn parse_node(raw: &Raw) -> Result<FlowNode, ParseError> {
    let anon = Obj::new(raw, "flow_items entry", None)?;
    let id = anon.required_str("id")?;
    if id.is_empty() {
        return Err(anon.invalid("node id must not be empty"));
    }
    let obj = anon.for_node(id);
    let description = obj.optional_str("description")?.unwrap_or_default().to_owned();
    let type_name = obj.required_str("type")?;

    let mut input_parameters = Vec::new();
    let mut outputs = Vec::new();
    // Entries are classified by their own "type", whichever array holds them.
    for key in ["input_parameters", "output"] {
        for item in obj.merged_array(key)? {
            classify_entry(&obj, item, &mut input_parameters, &mut outputs)?;
        }
    }

    let routing = match type_name {
        "executor" => {
            for key in ["condition", "forward_paths"] {
                if obj.get(key).is_some() {
                    return Err(obj.invalid(format!("executors cannot declare '{key}'")));
                }
            }
            Routing::Static {
                next_nodes: obj.string_list("next_nodes")?.unwrap_or_default(),
            }
        }
        "decision_maker" => {
            if obj.get("next_nodes").is_some() {
                return Err(obj.invalid(
                    "decision makers route through 'forward_paths', not 'next_nodes'",
                ));
            }
            let condition = parse_condition(
                obj.get("condition").ok_or_else(|| obj.missing("condition"))?,
                id,
            )?;
            let mut forward_paths = Vec::new();
            let paths = obj.get("forward_paths").ok_or_else(|| obj.missing("forward_paths"))?;
            for path in obj.expect_array("forward_paths", paths)? {
                let p = Obj::new(path, "forward_paths entry", Some(id))?;
                let condition_result = match p.get("condition_result") {
                    Some(Raw::Bool(b)) => *b,
                    Some(other) => return Err(p.wrong_type("condition_result", "a boolean", other)),
                    None => return Err(p.missing("condition_result")),
                };
                forward_paths.push(ForwardPath {
                    condition_result,
                    next_nodes: p.string_list("next_nodes")?.ok_or_else(|| p.missing("next_nodes"))?,
                });
            }
            Routing::Conditional {
                condition,
                forward_paths,
            }
        }
        other => {
            return Err(ParseError::UnknownNodeType {
                node_id: id.to_owned(),
                found: other.to_owned(),
            })
        }
    };

    Ok(FlowNode {
        id: id.to_owned(),
        description,
        input_parameters,
        outputs,
        routing,
        extra: obj.extra(NODE_KEYS),
    })
}

fn classify_entry(
    node: &Obj<'_>,
    item: &Raw,
    inputs: &mut Vec<InputParameter>,
    outputs: &mut Vec<OutputBinding>,
) -> Result<(), ParseError> {
    let entry = Obj::new(item, "parameter entry", node.node_id)?;
    let kind = entry.required_str("type")?;
    let name = entry.required_str("name")?;
    if name.is_empty() {
        return Err(entry.invalid(format!("'{kind}' entry has an empty name")));
    }
    let name = name.to_owned();
    match kind {
        "prompt_template" => inputs.push(InputParameter {
            name,
            source: InputSource::PromptTemplate {
                file_path: entry.required_str("file_path")?.to_owned(),
            },
        }),
        "output_variable" => inputs.push(InputParameter {
            name,
            source: InputSource::OutputVariable,
        }),
        "literal" => inputs.push(InputParameter {
            name,
            source: InputSource::Literal {
                value: entry.required_str("value")?.to_owned(),
            },
        }),
        "variable" => outputs.push(OutputBinding {
            kind: OutputKind::Variable,
            name,
        }),
        "file" => outputs.push(OutputBinding {
            kind: OutputKind::File,
            name,
        }),
        other => {
            return Err(ParseError::UnknownParameterType {
                node_id: node.node_id.map(str::to_owned),
                found: other.to_owned(),
            })
        }
    }
    Ok(())
}

fn parse_condition(raw: &Raw, node_id: &str) -> Result<Condition, ParseError> {
    let obj = Obj::new(raw, "condition", Some(node_id))?;
    let composed = match obj.get("is_composed") {
        None => false,
        Some(Raw::Bool(b)) => *b,
        Some(other) => return Err(obj.wrong_type("is_composed", "a boolean", other)),
    };
    if composed {
        let name = obj.required_str("combinator")?;
        let combinator = Combinator::parse(name).ok_or_else(|| ParseError::UnknownCombinator {
            node_id: node_id.to_owned(),
            found: name.to_owned(),
        })?;
        let list = obj.get("conditions").ok_or_else(|| obj.missing("conditions"))?;
        let children = obj
            .expect_array("conditions", list)?
            .iter()
            .map(|c| parse_condition(c, node_id))
            .collect::<Result<Vec<_>, _>>()?;
        if children.len() < 2 {
            return Err(obj.invalid("a composed condition needs at least two child conditions"));
        }
        return Ok(Condition::Composed {
            combinator,
            children,
        });
    }

    let source = Obj::new(
        obj.get("data_source").ok_or_else(|| obj.missing("data_source"))?,
        "data_source",
        Some(node_id),
    )?;
    let source_type = source.required_str("type")?;
    if source_type != "output_variable" {
        return Err(ParseError::UnknownParameterType {
            node_id: Some(node_id.to_owned()),
            found: source_type.to_owned(),
        });
    }
    let variable = source.required_str("name")?;
    if variable.is_empty() {
        return Err(obj.invalid("condition data_source has an empty name"));
    }
    let op_name = obj.required_str("operator")?;
    let operator = Operator::parse(op_name).ok_or_else(|| ParseError::UnknownOperator {
        node_id: node_id.to_owned(),
        found: op_name.to_owned(),
    })?;
    Ok(Condition::Compare {
        variable: variable.to_owned(),
        operator,
        operand: obj.required_str("operand")?.to_owned(),
    })
}

/// A JSON object plus the context needed to build good error messages.
struct Obj<'a> {
    entries: &'a [(String, Raw)],
    node_id: Option<&'a str>,
}

impl<'a> Obj<'a> {
    fn new(raw: &'a Raw, what: &str, node_id: Option<&'a str>) -> Result<Self, ParseError> {
        match raw {
            Raw::Object(entries) => Ok(Obj { entries, node_id }),
            other => Err(ParseError::Invalid {
                node_id: node_id.map(str::to_owned),
                message: format!("{what} must be an object, found {}", other.type_name()),
            }),
        }
    }

    fn for_node(&self, node_id: &'a str) -> Obj<'a> {
        Obj {
            entries: self.entries,
            node_id: Some(node_id),
        }
    }

    /// Last occurrence wins, matching ordinary JSON semantics.
    fn get(&self, key: &str) -> Option<&'a Raw> {
        self.entries.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    fn missing(&self, key: &str) -> ParseError {
        ParseError::MissingKey {
            key: key.to_owned(),
            node_id: self.node_id.map(str::to_owned),
        }
    }

    fn invalid(&self, message: impl Into<String>) -> ParseError {
        ParseError::Invalid {
            node_id: self.node_id.map(str::to_owned),
            message: message.into(),
        }
    }

    fn wrong_type(&self, key: &str, expected: &'static str, found: &Raw) -> ParseError {
        ParseError::WrongType {
            key: key.to_owned(),
            node_id: self.node_id.map(str::to_owned),
            expected,
            found: found.type_name(),
        }
    }

    fn required_str(&self, key: &str) -> Result<&'a str, ParseError> {
        self.optional_str(key)?.ok_or_else(|| self.missing(key))
    }

    fn optional_str(&self, key: &str) -> Result<Option<&'a str>, ParseError> {
        match self.get(key) {
            None => Ok(None),
            Some(Raw::String(s)) => Ok(Some(s)),
            Some(other) => Err(self.wrong_type(key, "a string", other)),
        }
    }

    fn expect_array(&self, key: &str, raw: &'a Raw) -> Result<&'a [Raw], ParseError> {
        match raw {
            Raw::Array(items) => Ok(items),
            other => Err(self.wrong_type(key, "an array", other)),
        }
    }

    /// All arrays stored under `key`, concatenated in document order.
    fn merged_array(&self, key: &str) -> Result<Vec<&'a Raw>, ParseError> {
        let mut out = Vec::new();
        for (k, v) in self.entries {
            if k == key {
                out.extend(self.expect_array(key, v)?);
            }
        }
        Ok(out)
    }

    fn string_list(&self, key: &str) -> Result<Option<Vec<String>>, ParseError> {
        let Some(raw) = self.get(key) else {
            return Ok(None);
        };
        self.expect_array(key, raw)?
            .iter()
            .map(|item| match item {
                Raw::String(s) => Ok(s.clone()),
                other => Err(self.wrong_type(key, "an array of strings", other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn extra(&self, known: &[&str]) -> Map<String, serde_json::Value> {
        let mut map = Map::new();
        for (k, v) in self.entries {
            if !known.contains(&k.as_str()) {
                map.insert(k.clone(), v.clone().into_value());
            }
        }
        map
    }
}
