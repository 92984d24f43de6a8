use serde_json::{json, Map, Value};

use super::{Condition, FlowNode, InputSource, Routing, WorkflowSpec};

/// Canonical text of a workflow: 2-space indent, schema key order, node
/// declaration order, unknown keys after the known ones, trailing newline.
pub fn serialize_workflow(spec: &WorkflowSpec) -> String {
    let mut root = Map::new();
    root.insert("output_dir_path".into(), spec.output_dir_path.clone().into());
    root.insert(
        "input_parameters".into(),
        spec.parameter_files
            .iter()
            .map(|p| json!({ "suffix": p.suffix, "file_path": p.file_path }))
            .collect(),
    );
    root.insert("flow_items".into(), spec.nodes.iter().map(node_value).collect());
    append_extra(&mut root, &spec.extra);

    let mut text = serde_json::to_string_pretty(&Value::Object(root))
        .expect("serializing a JSON value cannot fail");
    text.push('\n');
    text
}

fn node_value(node: &FlowNode) -> Value {
    let mut obj = Map::new();
    obj.insert("id".into(), node.id.clone().into());
    obj.insert("description".into(), node.description.clone().into());
    obj.insert("type".into(), node.kind().as_str().into());
    obj.insert(
        "input_parameters".into(),
        node.input_parameters
            .iter()
            .map(|p| {
                let mut entry = Map::new();
                entry.insert("name".into(), p.name.clone().into());
                entry.insert("type".into(), p.source.type_name().into());
                match &p.source {
                    InputSource::PromptTemplate { file_path } => {
                        entry.insert("file_path".into(), file_path.clone().into());
                    }
                    InputSource::Literal { value } => {
                        entry.insert("value".into(), value.clone().into());
                    }
                    InputSource::OutputVariable => {}
                }
                Value::Object(entry)
            })
            .collect(),
    );
    obj.insert(
        "output".into(),
        node.outputs
            .iter()
            .map(|o| json!({ "type": o.kind.as_str(), "name": o.name }))
            .collect(),
    );
    match &node.routing {
        Routing::Static { next_nodes } => {
            obj.insert("next_nodes".into(), json!(next_nodes));
        }
        Routing::Conditional {
            condition,
            forward_paths,
        } => {
            obj.insert("condition".into(), condition_value(condition));
            obj.insert(
                "forward_paths".into(),
                forward_paths
                    .iter()
                    .map(|p| {
                        json!({ "condition_result": p.condition_result, "next_nodes": p.next_nodes })
                    })
                    .collect(),
            );
        }
    }
    append_extra(&mut obj, &node.extra);
    Value::Object(obj)
}

fn condition_value(condition: &Condition) -> Value {
    match condition {
        Condition::Compare {
            variable,
            operator,
            operand,
        } => json!({
            "is_composed": false,
            "data_source": { "type": "output_variable", "name": variable },
            "operator": operator.as_str(),
            "operand": operand,
        }),
        Condition::Composed {
            combinator,
            children,
        } => json!({
            "is_composed": true,
            "combinator": combinator.as_str(),
            "conditions": children.iter().map(condition_value).collect::<Vec<_>>(),
        }),
    }
}

fn append_extra(obj: &mut Map<String, Value>, extra: &Map<String, Value>) {
    for (k, v) in extra {
        obj.insert(k.clone(), v.clone());
    }
}
