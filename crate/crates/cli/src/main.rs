//! `gotflow`: validate, draw, run and replay workflows.
//!
//! Exit codes: 0 success, 1 run-time failure, 2 usage, validation or
//! environment error. Diagnostics go to stderr; run ids and status lines go
//! to stdout.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gotflow::backend::{LlmBackend, MockBackend, MockScript, OpenAiCompatibleBackend, ReplayBackend, API_BASE_ENV, API_KEY_ENV};
use gotflow::engine::{replay_run, run_workflow, RunConfig, RunError};
use gotflow::graph::{build_graph, diagnose_document, export_dot, has_errors};
use gotflow::store::RunTrace;
use gotflow::{example, GenerationSettings, WorkflowBundle};

#[derive(Parser)]
#[command(name = "gotflow", version, about = "Run Graph-of-Thought LLM workflows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a workflow and print diagnostics.
    Validate { workflow: PathBuf },
    /// Export the workflow graph as Graphviz DOT.
    Graph {
        workflow: PathBuf,
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute a workflow.
    Run(RunArgs),
    /// Re-execute a recorded run from its cassette and compare.
    Replay { trace: PathBuf },
    /// Write the Ads example bundle into an empty directory.
    Init { dir: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Mock,
    Replay,
    Http,
}

#[derive(clap::Args)]
struct RunArgs {
    workflow: PathBuf,
    #[arg(long, value_enum, default_value = "mock")]
    backend: BackendKind,
    /// Mock script: a JSON object mapping node ids to responses.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Cassette to answer from with `--backend replay`.
    #[arg(long)]
    cassette: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    max_concurrency: usize,
    /// Path variable, e.g. `--env GF_ROOT=/srv/gf`. Overrides the process
    /// environment.
    #[arg(long = "env", value_name = "KEY=VALUE", value_parser = parse_key_value)]
    env: Vec<(String, String)>,
    /// Replaces the workflow's output_dir_path.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
}

fn parse_key_value(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.is_empty() => Ok((k.to_owned(), v.to_owned())),
        _ => Err(format!("expected KEY=VALUE, got '{s}'")),
    }
}

/// Failure with its exit code.
struct Exit(u8, String);

impl Exit {
    fn usage(msg: impl Into<String>) -> Self {
        Exit(2, msg.into())
    }

    fn runtime(msg: impl Into<String>) -> Self {
        Exit(1, msg.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { workflow } => validate(&workflow),
        Command::Graph { workflow, out } => graph(&workflow, out.as_deref()),
        Command::Run(args) => run(args),
        Command::Replay { trace } => replay(&trace),
        Command::Init { dir } => init(&dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Exit(code, msg)) => {
            if !msg.is_empty() {
                eprintln!("gotflow: {msg}");
            }
            ExitCode::from(code)
        }
    }
}

fn read(path: &Path) -> Result<String, Exit> {
    fs::read_to_string(path).map_err(|e| Exit::usage(format!("cannot read {}: {e}", path.display())))
}

fn validate(path: &Path) -> Result<(), Exit> {
    let diagnostics = diagnose_document(&read(path)?);
    for d in &diagnostics {
        eprintln!("{d}");
    }
    if has_errors(&diagnostics) {
        return Err(Exit::runtime(""));
    }
    Ok(())
}

fn graph(path: &Path, out: Option<&Path>) -> Result<(), Exit> {
    let spec = gotflow::parse_workflow(&read(path)?).map_err(|e| Exit::usage(format!("{}: {e}", path.display())))?;
    let dot = export_dot(&build_graph(&spec));
    match out {
        Some(out) => fs::write(out, dot).map_err(|e| Exit::runtime(format!("cannot write {}: {e}", out.display()))),
        None => {
            print!("{dot}");
            Ok(())
        }
    }
}

fn run(args: RunArgs) -> Result<(), Exit> {
    let mut env: BTreeMap<String, String> = std::env::vars().collect();
    env.extend(args.env.iter().cloned());

    // Missing files, bad documents and unset path variables are all
    // environment errors.
    let bundle = WorkflowBundle::load(&args.workflow, &env).map_err(|e| Exit::usage(e.to_string()))?;

    let mut settings = GenerationSettings::default();
    if let Some(model) = args.model {
        settings.model = model;
    }
    if let Some(t) = args.temperature {
        settings.temperature = t;
    }
    let backend: Box<dyn LlmBackend> = match args.backend {
        BackendKind::Mock => {
            let path = args.script.as_deref().ok_or_else(|| Exit::usage("--backend mock needs --script"))?;
            let script = MockScript::from_json(&read(path)?)
                .map_err(|e| Exit::usage(format!("{}: {e}", path.display())))?;
            Box::new(MockBackend::new(script))
        }
        BackendKind::Replay => {
            let path = args.cassette.as_deref().ok_or_else(|| Exit::usage("--backend replay needs --cassette"))?;
            Box::new(ReplayBackend::from_file(path).map_err(|e| Exit::usage(e.to_string()))?)
        }
        BackendKind::Http => {
            let base = env
                .get(API_BASE_ENV)
                .ok_or_else(|| Exit::usage(format!("--backend http needs {API_BASE_ENV}")))?;
            let key = env.get(API_KEY_ENV).cloned();
            Box::new(OpenAiCompatibleBackend::new(base, key).map_err(|e| Exit::usage(e.to_string()))?)
        }
    };
    let label = match args.backend {
        BackendKind::Mock => "mock",
        BackendKind::Replay => "replay",
        BackendKind::Http => "http",
    };
    let config = RunConfig {
        max_concurrency: args.max_concurrency,
        output_dir: args.out_dir,
        env,
        settings,
        backend_label: label.to_owned(),
        ..RunConfig::default()
    };
    match run_workflow(&bundle, backend, &config) {
        Ok(outcome) => {
            print_statuses(&bundle, &outcome.trace, &outcome.run_dir);
            Ok(())
        }
        Err(RunError::Node { error, trace, run_dir }) => {
            print_statuses(&bundle, &trace, &run_dir);
            Err(Exit::runtime(error.to_string()))
        }
        Err(RunError::Invalid { diagnostics }) => {
            for d in &diagnostics {
                eprintln!("{d}");
            }
            Err(Exit::usage("workflow has validation errors"))
        }
        Err(e @ (RunError::Settings(_) | RunError::Concurrency | RunError::NoEntryNodes)) => {
            Err(Exit::usage(e.to_string()))
        }
        Err(e) => Err(Exit::runtime(e.to_string())),
    }
}

fn print_statuses(bundle: &WorkflowBundle, trace: &RunTrace, run_dir: &Path) {
    println!("run_id\t{}", trace.header.run_id);
    println!("run_dir\t{}", run_dir.display());
    let Some(footer) = &trace.footer else {
        return;
    };
    for node in &bundle.spec.nodes {
        if let Some(status) = footer.status.get(&node.id) {
            println!("{}\t{}", node.id, status.as_str());
        }
    }
}

fn replay(trace: &Path) -> Result<(), Exit> {
    if !trace.is_file() {
        return Err(Exit::usage(format!("no trace at {}", trace.display())));
    }
    let report = replay_run(trace).map_err(|e| match e {
        RunError::Trace(_) | RunError::Cassette(_) | RunError::Snapshot(_) => Exit::usage(e.to_string()),
        other => Exit::runtime(other.to_string()),
    })?;
    let bundle = WorkflowBundle::from_snapshot(&report.replayed.header.bundle)
        .map_err(|e| Exit::usage(e.to_string()))?;
    print_statuses(&bundle, &report.replayed, &report.run_dir);
    if report.is_identical() {
        eprintln!("replay identical to {}", trace.display());
        Ok(())
    } else {
        for d in &report.differences {
            eprintln!("difference: {d}");
        }
        Err(Exit::runtime("replay differs from the recorded run"))
    }
}

fn init(dir: &Path) -> Result<(), Exit> {
    example::write_ads_bundle(dir).map_err(|e| match e.kind() {
        io::ErrorKind::AlreadyExists => Exit::usage(format!("{} is not empty", dir.display())),
        _ => Exit::runtime(format!("cannot write {}: {e}", dir.display())),
    })?;
    let root = fs::canonicalize(dir).unwrap_or_else(|_| dir.to_owned());
    let workflow = example::ads_workflow_path(&root);
    let mock = root.join("data/workflows/Ads/mock/yes.json");
    println!("{}", workflow.display());
    eprintln!(
        "try: gotflow run {} --env GF_ROOT={} --script {}",
        workflow.display(),
        root.display(),
        mock.display()
    );
    Ok(())
}
