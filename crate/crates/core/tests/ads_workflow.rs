use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use gotflow::backend::{Cassette, MockBackend, MockScript, ReplayBackend};
use gotflow::engine::{run_workflow, RunConfig};
use gotflow::example;
use gotflow::graph::{build_graph, export_dot};
use gotflow::store::{load_trace, save_trace, verify_output_files, CASSETTE_FILE, TRACE_FILE};
use gotflow::WorkflowBundle;

fn load(root: &Path) -> WorkflowBundle {
    example::write_ads_bundle(root).unwrap();
    let env = [("GF_ROOT".to_string(), root.to_string_lossy().into_owned())].into_iter().collect();
    WorkflowBundle::load(&example::ads_workflow_path(root), &env).unwrap()
}

#[test]
fn yes_run_trace_contents() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = load(dir.path());
    let script = MockScript::new()
        .with_node("data_reader", "R")
        .with_node("determine_data_feature", "yes")
        .with_default("analysis");
    let out = run_workflow(&bundle, MockBackend::new(script), &RunConfig::default()).unwrap();

    assert_eq!(out.trace.steps().count(), 4);
    assert_eq!(out.trace.skipped().count(), 2);
    assert_eq!(out.variables["data_reader_output"], "R");
    assert_eq!(out.variables["is_quantitative_data"], "yes");

    let decide = out.trace.step("determine_data_feature").unwrap();
    assert!(decide.prompt.ends_with("****\nR\n****\n"));
    let decision = decide.decision.as_ref().unwrap();
    assert!(decision.condition_result);
    assert_eq!(decision.next_nodes, ["data_trend_miner"]);
    assert!(out.trace.step("data_reader").unwrap().decision.is_none());

    assert!(out.run_dir.starts_with(&bundle.output_dir));
    assert_eq!(
        fs::read(out.run_dir.join("quantitative_analysis_output.txt")).unwrap(),
        b"analysis"
    );
    assert!(verify_output_files(&out.trace, &out.run_dir).is_empty());

    let on_disk = load_trace(&out.run_dir.join(TRACE_FILE)).unwrap();
    assert_eq!(on_disk, out.trace);
    let copy = dir.path().join("copy.jsonl");
    save_trace(&on_disk, &copy).unwrap();
    assert_eq!(fs::read(&copy).unwrap(), fs::read(out.run_dir.join(TRACE_FILE)).unwrap());
    assert_eq!(on_disk.header.spec_digest, bundle.spec_digest());
}

#[test]
fn affirmative_variants_take_the_yes_path() {
    for answer in ["Yes.", "  YES \n", "yes"] {
        let dir = tempfile::tempdir().unwrap();
        let bundle = load(dir.path());
        let script = MockScript::new().with_node("determine_data_feature", answer).with_default("x");
        let out = run_workflow(&bundle, MockBackend::new(script), &RunConfig::default()).unwrap();
        assert!(out.trace.step("quantitative_analysis").is_some(), "{answer:?}");
    }
}

#[test]
fn swapping_backends_changes_nothing_downstream() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = load(dir.path());
    let mock = MockBackend::new(MockScript::from_json(example::ADS_MOCK_NO).unwrap());
    let first = run_workflow(&bundle, mock, &RunConfig::default()).unwrap();
    let cassette = Cassette::load(&first.run_dir.join(CASSETTE_FILE)).unwrap();
    assert_eq!(cassette.entries.len(), 4);

    let config = RunConfig {
        record_cassette: false,
        ..RunConfig::default()
    };
    let second = run_workflow(&bundle, ReplayBackend::new(&cassette), &config).unwrap();
    assert!(gotflow::store::compare_traces(&first.trace, &second.trace).is_empty());
    assert_eq!(first.variables, second.variables);
}

#[test]
fn skipped_nodes_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = load(dir.path());
    let out = run_workflow(
        &bundle,
        MockBackend::new(MockScript::from_json(example::ADS_MOCK_NO).unwrap()),
        &RunConfig::default(),
    )
    .unwrap();
    assert!(!out.run_dir.join("quantitative_analysis_output.txt").exists());
    assert!(!out.variables.contains_key("data_trend_miner_output"));
    let skipped: BTreeSet<&str> = out.trace.skipped().collect();
    assert_eq!(skipped, BTreeSet::from(["data_trend_miner", "quantitative_analysis"]));
}

type DotEdge = (String, String, Option<String>);

/// A reader for the subset of DOT that `export_dot` emits, written
/// separately from the exporter.
fn parse_dot(text: &str) -> (BTreeMap<String, String>, Vec<DotEdge>) {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    assert_eq!(lines.next(), Some("digraph workflow {"));
    assert_eq!(text.trim_end().lines().last(), Some("}"));
    let mut nodes = BTreeMap::new();
    let mut edges = Vec::new();
    for line in lines {
        if line == "}" || line == "rankdir=TB;" {
            continue;
        }
        let line = line.strip_suffix(';').expect("statements end with ';'");
        let (head, attrs) = match line.find(" [") {
            Some(i) => (&line[..i], Some(&line[i + 2..line.len() - 1])),
            None => (line, None),
        };
        let ids: Vec<String> = head
            .split(" -> ")
            .map(|q| q.strip_prefix('"').and_then(|q| q.strip_suffix('"')).unwrap().replace("\\\"", "\""))
            .collect();
        let attr = |key: &str| {
            attrs.and_then(|a| a.strip_prefix(&format!("{key}="))).map(|v| v.trim_matches('"').to_owned())
        };
        match ids.as_slice() {
            [id] => {
                nodes.insert(id.clone(), attr("shape").unwrap());
            }
            [from, to] => edges.push((from.clone(), to.clone(), attr("label"))),
            _ => panic!("unexpected statement {line}"),
        }
    }
    (nodes, edges)
}

#[test]
fn dot_export_reparses_to_the_same_graph() {
    let spec = gotflow::parse_workflow(example::ADS_WORKFLOW).unwrap();
    let graph = build_graph(&spec);
    let (nodes, edges) = parse_dot(&export_dot(&graph));
    assert_eq!(nodes.len(), 6);
    assert_eq!(nodes["determine_data_feature"], "diamond");
    assert_eq!(nodes.values().filter(|s| *s == "box").count(), 5);
    let expected: Vec<DotEdge> = graph
        .edges()
        .iter()
        .map(|e| {
            let label = match e.kind {
                gotflow::graph::EdgeKind::Static => None,
                gotflow::graph::EdgeKind::OnTrue => Some("YES".to_owned()),
                gotflow::graph::EdgeKind::OnFalse => Some("NO".to_owned()),
            };
            (e.from.clone(), e.to.clone(), label)
        })
        .collect();
    assert_eq!(edges, expected);
    assert!(edges.contains(&(
        "determine_data_feature".into(),
        "qualitative_analysis_2".into(),
        Some("NO".into())
    )));
}

#[test]
fn dot_for_a_single_node() {
    let spec = gotflow::parse_workflow(
        r#"{"output_dir_path":"o","input_parameters":[],"flow_items":[
            {"id":"only","description":"","type":"executor",
             "input_parameters":[{"name":"p","type":"prompt_template","file_path":"p"}],
             "output":[],"next_nodes":[]}]}"#,
    )
    .unwrap();
    let (nodes, edges) = parse_dot(&export_dot(&build_graph(&spec)));
    assert_eq!(nodes.len(), 1);
    assert!(edges.is_empty());
}
