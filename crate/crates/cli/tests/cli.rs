use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn gotflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gotflow"))
        .args(args)
        .env_remove("GF_ROOT")
        .env_remove("GF_API_BASE")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

struct Scaffold {
    _dir: tempfile::TempDir,
    root: PathBuf,
    workflow: PathBuf,
}

impl Scaffold {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("gf");
        let out = gotflow(&["init", root.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let workflow = PathBuf::from(stdout(&out).trim());
        Scaffold {
            _dir: dir,
            root,
            workflow,
        }
    }

    fn env(&self) -> String {
        format!("GF_ROOT={}", self.root.display())
    }

    fn mock(&self, answer: &str) -> String {
        self.root
            .join(format!("data/workflows/Ads/mock/{answer}.json"))
            .display()
            .to_string()
    }

    fn run(&self, extra: &[&str]) -> Output {
        let env = self.env();
        let mut args = vec!["run", self.workflow.to_str().unwrap(), "--env", &env];
        args.extend_from_slice(extra);
        gotflow(&args)
    }
}

fn run_dir(o: &Output) -> PathBuf {
    let text = stdout(o);
    let line = text.lines().find(|l| l.starts_with("run_dir\t")).unwrap();
    PathBuf::from(&line["run_dir\t".len()..])
}

fn statuses(o: &Output) -> Vec<(String, String)> {
    stdout(o)
        .lines()
        .filter(|l| !l.starts_with("run_id\t") && !l.starts_with("run_dir\t"))
        .map(|l| {
            let (id, status) = l.split_once('\t').unwrap();
            (id.to_owned(), status.to_owned())
        })
        .collect()
}

/// Step and skip lines of a trace: everything but the header and footer.
fn trace_body(run_dir: &Path) -> Vec<String> {
    let text = fs::read_to_string(run_dir.join("trace.jsonl")).unwrap();
    let lines: Vec<String> = text.lines().map(str::to_owned).collect();
    lines[1..lines.len() - 1].to_vec()
}

#[test]
fn validate_scaffold() {
    let s = Scaffold::new();
    let out = gotflow(&["validate", s.workflow.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(!stderr(&out).contains("error\t"));
}

#[test]
fn validate_missing_file() {
    let out = gotflow(&["validate", "/nonexistent/workflow.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("cannot read"));
}

#[test]
fn validate_dangling_target() {
    let s = Scaffold::new();
    let text = fs::read_to_string(&s.workflow).unwrap().replace(
        r#""next_nodes": ["quantitative_analysis"]"#,
        r#""next_nodes": ["quantitative_analysiz"]"#,
    );
    let bad = s.root.join("bad.json");
    fs::write(&bad, text).unwrap();
    let out = gotflow(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let errors: Vec<String> = stderr(&out).lines().filter(|l| l.starts_with("error\t")).map(str::to_owned).collect();
    assert_eq!(errors.len(), 1, "{errors:?}");
    assert!(errors[0].contains("unknown_target"));
}

#[test]
fn graph_writes_dot() {
    let s = Scaffold::new();
    let dot = s.root.join("ads.dot");
    let out = gotflow(&["graph", s.workflow.to_str().unwrap(), "--out", dot.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dot).unwrap();
    assert!(text.starts_with("digraph workflow {"));
    assert_eq!(text.matches(" -> ").count(), 5);
}

#[test]
fn run_yes_branch() {
    let s = Scaffold::new();
    let out = s.run(&["--script", &s.mock("yes")]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let st = statuses(&out);
    assert_eq!(st.iter().filter(|(_, s)| s == "done").count(), 4);
    assert_eq!(st.iter().filter(|(_, s)| s == "skipped").count(), 2);
    assert!(stdout(&out).lines().next().unwrap().starts_with("run_id\t"));
    assert!(run_dir(&out).join("quantitative_analysis_output.txt").is_file());
}

#[test]
fn run_without_root_names_the_variable() {
    let s = Scaffold::new();
    let out = gotflow(&["run", s.workflow.to_str().unwrap(), "--script", &s.mock("yes")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("GF_ROOT"), "{}", stderr(&out));
    assert!(stdout(&out).is_empty());
}

#[test]
fn run_node_failure_exits_1() {
    let s = Scaffold::new();
    let script = s.root.join("partial.json");
    fs::write(&script, r#"{"data_reader": "R"}"#).unwrap();
    let out = s.run(&["--script", script.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("determine_data_feature"));
    let st = statuses(&out);
    assert!(st.contains(&("data_reader".into(), "done".into())));
    assert!(st.contains(&("determine_data_feature".into(), "failed".into())));
    assert!(st.contains(&("quantitative_analysis".into(), "pending".into())));
}

#[test]
fn usage_errors_exit_2() {
    let s = Scaffold::new();
    assert_eq!(gotflow(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(s.run(&[]).status.code(), Some(2));
    assert_eq!(s.run(&["--backend", "http"]).status.code(), Some(2));
    assert_eq!(s.run(&["--script", &s.mock("yes"), "--max-concurrency", "0"]).status.code(), Some(2));
}

#[test]
fn replay_backend_reproduces_trace() {
    let s = Scaffold::new();
    let first = s.run(&["--script", &s.mock("no")]);
    assert_eq!(first.status.code(), Some(0));
    let first_dir = run_dir(&first);
    let cassette = first_dir.join("cassette.jsonl");
    let second = s.run(&["--backend", "replay", "--cassette", cassette.to_str().unwrap()]);
    assert_eq!(second.status.code(), Some(0), "{}", stderr(&second));
    assert_eq!(trace_body(&first_dir), trace_body(&run_dir(&second)));
}

#[test]
fn replay_command_verifies() {
    let s = Scaffold::new();
    let first = s.run(&["--script", &s.mock("yes"), "--max-concurrency", "2"]);
    let trace = run_dir(&first).join("trace.jsonl");
    let out = gotflow(&["replay", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_ne!(run_dir(&out), run_dir(&first));

    // A tampered output file is caught.
    fs::write(run_dir(&first).join("quantitative_analysis_output.txt"), "edited").unwrap();
    let out = gotflow(&["replay", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("difference"));
}

#[test]
fn init_refuses_non_empty_dir() {
    let s = Scaffold::new();
    let out = gotflow(&["init", s.root.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("not empty"));
}
