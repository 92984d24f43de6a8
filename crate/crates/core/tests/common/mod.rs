#![allow(dead_code)]

use std::collections::BTreeMap;

use gotflow::backend::MockScript;
use gotflow::dsl::parse_workflow;
use gotflow::WorkflowBundle;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

fn word(rng: &mut ChaCha8Rng) -> String {
    const PARTS: &[&str] = &["data", "trend", "miner", "x", "q", "report", "é", "數據", "a b", "\"q\"", "\\", "\n"];
    (0..rng.gen_range(0..4)).map(|_| *PARTS.choose(rng).unwrap()).collect()
}

fn ident(rng: &mut ChaCha8Rng, prefix: &str) -> String {
    format!("{prefix}_{}", rng.gen_range(0..1_000_000))
}

fn leaf_condition(rng: &mut ChaCha8Rng) -> Value {
    json!({
        "is_composed": false,
        "data_source": {"type": "output_variable", "name": ident(rng, "v")},
        "operator": (["equal", "not_equal", "contains"].choose(rng).unwrap()),
        "operand": word(rng),
    })
}

fn condition(rng: &mut ChaCha8Rng, depth: u32) -> Value {
    if depth == 0 || rng.gen_bool(0.6) {
        return leaf_condition(rng);
    }
    let n = rng.gen_range(2..4);
    json!({
        "is_composed": true,
        "combinator": (["all", "any"].choose(rng).unwrap()),
        "conditions": (0..n).map(|_| condition(rng, depth - 1)).collect::<Vec<_>>(),
    })
}

/// A syntactically valid workflow document exercising most of the DSL.
/// It is not necessarily a valid graph.
pub fn random_spec_text(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(1..12);
    let ids: Vec<String> = (0..n).map(|i| format!("n{i}_{}", word(rng))).collect();
    let mut nodes = Vec::new();
    for id in &ids {
        let mut inputs = vec![json!({
            "name": "prompt_template_file_path",
            "type": "prompt_template",
            "file_path": format!("${{GF_ROOT}}/{}.txt", word(rng)),
        })];
        for _ in 0..rng.gen_range(0..3) {
            if rng.gen_bool(0.5) {
                inputs.push(json!({"name": ident(rng, "v"), "type": "output_variable"}));
            } else {
                inputs.push(json!({"name": ident(rng, "lit"), "type": "literal", "value": word(rng)}));
            }
        }
        let outputs: Vec<Value> = (0..rng.gen_range(0..3))
            .map(|_| {
                if rng.gen_bool(0.5) {
                    json!({"type": "variable", "name": ident(rng, "v")})
                } else {
                    json!({"type": "file", "name": format!("{}.txt", ident(rng, "f"))})
                }
            })
            .collect();
        let targets = |rng: &mut ChaCha8Rng| -> Vec<String> {
            let k = rng.gen_range(0..3);
            ids.choose_multiple(rng, k).cloned().collect()
        };
        let mut node = json!({
            "id": id,
            "description": word(rng),
            "input_parameters": inputs,
            "output": outputs,
        });
        let obj = node.as_object_mut().unwrap();
        if rng.gen_bool(0.3) {
            obj.insert("type".into(), json!("decision_maker"));
            obj.insert("condition".into(), condition(rng, 2));
            obj.insert(
                "forward_paths".into(),
                json!([
                    {"condition_result": true, "next_nodes": targets(rng)},
                    {"condition_result": false, "next_nodes": targets(rng)},
                ]),
            );
        } else {
            obj.insert("type".into(), json!("executor"));
            obj.insert("next_nodes".into(), json!(targets(rng)));
        }
        if rng.gen_bool(0.2) {
            obj.insert("x_note".into(), json!({"k": [1, 2.5, null, true, word(rng)]}));
        }
        nodes.push(node);
    }
    let mut doc = json!({
        "output_dir_path": format!("${{GF_ROOT}}/{}", word(rng)),
        "input_parameters": (0..rng.gen_range(0..3))
            .map(|i| json!({"suffix": format!("s{i}"), "file_path": format!("p{i}.json")}))
            .collect::<Vec<_>>(),
        "flow_items": nodes,
    });
    if rng.gen_bool(0.2) {
        doc.as_object_mut().unwrap().insert("x_meta".into(), json!(word(rng)));
    }
    if rng.gen_bool(0.5) {
        serde_json::to_string_pretty(&doc).unwrap()
    } else {
        serde_json::to_string(&doc).unwrap()
    }
}

/// A runnable random DAG: declaration order is shuffled, every node has a
/// template, every executor writes one variable and one file, and
/// decision makers route on their own response.
pub struct RandomDag {
    pub text: String,
    pub bundle: WorkflowBundle,
    pub script: MockScript,
    /// Edges as (from, to) ids.
    pub edges: Vec<(String, String)>,
}

pub fn random_dag(rng: &mut ChaCha8Rng, n: usize, decisions: usize) -> RandomDag {
    // Node k may only point at nodes with a larger k.
    let ids: Vec<String> = (0..n).map(|k| format!("t{k}")).collect();
    let mut decision_ks: Vec<usize> = (0..n.saturating_sub(1)).collect();
    decision_ks.shuffle(rng);
    decision_ks.truncate(decisions);

    let mut edges = Vec::new();
    let mut nodes = Vec::new();
    let mut script = MockScript::new();
    for k in 0..n {
        let later: Vec<usize> = (k + 1..n).collect();
        let fanout = rng.gen_range(0..=later.len().min(3));
        let targets: Vec<usize> = later.choose_multiple(rng, fanout).copied().collect();
        let id = &ids[k];
        let template = json!({
            "name": "prompt_template_file_path",
            "type": "prompt_template",
            "file_path": format!("{id}.txt"),
        });
        let node = if decision_ks.contains(&k) {
            let split = rng.gen_range(0..=targets.len());
            let (yes, no) = targets.split_at(split);
            let answer = if rng.gen_bool(0.5) { "yes" } else { "no" };
            script = script.with_node(id.clone(), answer);
            for &t in &targets {
                edges.push((id.clone(), ids[t].clone()));
            }
            json!({
                "id": id, "description": "", "type": "decision_maker",
                "input_parameters": [template, {"name": "tag", "type": "literal", "value": id}],
                "output": [],
                "condition": {"is_composed": false,
                              "data_source": {"type": "output_variable", "name": format!("{id}_answer")},
                              "operator": "equal", "operand": "yes"},
                "forward_paths": [
                    {"condition_result": true, "next_nodes": yes.iter().map(|&t| &ids[t]).collect::<Vec<_>>()},
                    {"condition_result": false, "next_nodes": no.iter().map(|&t| &ids[t]).collect::<Vec<_>>()},
                ],
            })
        } else {
            script = script.with_node(id.clone(), format!("response of {id}\n"));
            for &t in &targets {
                edges.push((id.clone(), ids[t].clone()));
            }
            json!({
                "id": id, "description": "", "type": "executor",
                "input_parameters": [template, {"name": "tag", "type": "literal", "value": id}],
                "output": [{"type": "variable", "name": format!("{id}_out")},
                           {"type": "file", "name": format!("{id}.txt")}],
                "next_nodes": targets.iter().map(|&t| &ids[t]).collect::<Vec<_>>(),
            })
        };
        nodes.push(node);
    }
    nodes.shuffle(rng);
    let text = serde_json::to_string_pretty(&json!({
        "output_dir_path": "unused",
        "input_parameters": [],
        "flow_items": nodes,
    }))
    .unwrap();
    let templates: BTreeMap<String, String> = ids
        .iter()
        .map(|id| (id.clone(), "Task #{tag} of #{goal}.".to_string()))
        .collect();
    let params = [("goal".to_string(), "testing".to_string())].into_iter().collect();
    let bundle = WorkflowBundle {
        spec: parse_workflow(&text).unwrap(),
        parameter_sets: vec![("common".into(), params)],
        templates,
        output_dir: Default::default(),
        source: None,
    };
    RandomDag {
        text,
        bundle,
        script,
        edges,
    }
}

/// `t0 -> t1 -> ... -> t{n-1}`, each writing a variable and a file.
pub fn chain(n: usize) -> RandomDag {
    let ids: Vec<String> = (0..n).map(|k| format!("t{k}")).collect();
    let nodes: Vec<Value> = ids
        .iter()
        .enumerate()
        .map(|(k, id)| {
            json!({
                "id": id, "description": "", "type": "executor",
                "input_parameters": [{"name": "p", "type": "prompt_template", "file_path": "p.txt"}],
                "output": [{"type": "variable", "name": format!("{id}_out")},
                           {"type": "file", "name": format!("{id}.txt")}],
                "next_nodes": ids.get(k + 1).into_iter().collect::<Vec<_>>(),
            })
        })
        .collect();
    let text = serde_json::to_string(&json!({
        "output_dir_path": "unused", "input_parameters": [], "flow_items": nodes,
    }))
    .unwrap();
    RandomDag {
        bundle: WorkflowBundle {
            spec: parse_workflow(&text).unwrap(),
            parameter_sets: Vec::new(),
            templates: ids.iter().map(|id| (id.clone(), format!("step {id}"))).collect(),
            output_dir: Default::default(),
            source: None,
        },
        text,
        script: MockScript::new().with_default("ok"),
        edges: ids.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect(),
    }
}
