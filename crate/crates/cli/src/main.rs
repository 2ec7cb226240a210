use std::fs;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use mada::design::{
    baseline_multistart, read_trace, replay, write_convergence_csv, Backend, BaselineOptions, StudyConfig, StudyResult,
};
use mada::geometry::geometry_server;
use mada::mcp::{serve_http, serve_stdio, McpServer};
use mada::orchestrator::{run_workflow, serve_control_api, ControlHandle, ExpertCommand, WorkflowOptions};
use mada::scheduler::{scheduler_server, Scheduler, SchedulerConfig};
use mada::sim::{self, sim_server, EnergyDesign, MOCKSIM_COMMAND};
use mada::surrogate::{analytic_jet_length, surrogate_server, SplineDesign};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "mada", version, about = "Multi-agent design exploration at desk scale")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve one tool server over stdio (default) or HTTP.
    Serve {
        #[arg(value_enum)]
        server: ServerKind,
        /// Listen address for the HTTP transport, e.g. 127.0.0.1:8700.
        #[arg(long)]
        http: Option<SocketAddr>,
        /// Cluster size for the scheduler server.
        #[arg(long, default_value_t = 4)]
        nodes: u32,
        #[arg(long, default_value_t = 8)]
        cores: u32,
        /// Study config whose surrogate settings the surrogate server uses.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    #[command(subcommand)]
    Study(StudyCommand),
    /// Multi-start bound-constrained quasi-Newton baseline; writes a convergence CSV.
    Baseline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 100)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV path; defaults to `<output_dir>/<name>_baseline.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Send a command to a running study's control API.
    Ctl {
        /// Base URL of the control API.
        #[arg(long, default_value = "http://127.0.0.1:8787")]
        url: String,
        #[command(subcommand)]
        action: CtlAction,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ServerKind {
    Sched,
    Sim,
    Surrogate,
    Geometry,
}

#[derive(Subcommand)]
enum StudyCommand {
    /// Run a study through the agent workflow.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for trace, CSV and run directories.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Serve the control API on this address while the study runs.
        #[arg(long)]
        serve: Option<SocketAddr>,
        /// Workflow options file (JSON).
        #[arg(long)]
        workflow: Option<PathBuf>,
    },
    /// Rebuild a study result from its trace file.
    Replay { trace: PathBuf },
}

#[derive(Subcommand)]
enum CtlAction {
    Status,
    Pause,
    Resume,
    Stop,
    Approve,
    SetBounds {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lower: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        upper: Vec<f64>,
    },
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(io::stderr)
        .init();
    match Cli::parse().command {
        Command::Serve { server, http, nodes, cores, config } => serve(server, http, nodes, cores, config),
        Command::Study(StudyCommand::Run { config, seed, out, serve, workflow }) => {
            study_run(&config, seed, out, serve, workflow)
        }
        Command::Study(StudyCommand::Replay { trace }) => {
            let events = read_trace(&trace).with_context(|| format!("reading {}", trace.display()))?;
            let result = replay(&events)?;
            print_json(&summary(&result));
            Ok(())
        }
        Command::Baseline { config, starts, seed, out } => baseline(&config, starts, seed, out),
        Command::Ctl { url, action } => ctl(&url, action),
    }
}

fn print_json(v: &Value) {
    // A closed pipe (e.g. `| head`) is not an error worth a panic.
    let _ = writeln!(io::stdout().lock(), "{}", serde_json::to_string_pretty(v).expect("json value"));
}

fn load_config(path: &Path) -> Result<StudyConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg: StudyConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    cfg.validate().map_err(anyhow::Error::msg)?;
    Ok(cfg)
}

fn serve(kind: ServerKind, http: Option<SocketAddr>, nodes: u32, cores: u32, config: Option<PathBuf>) -> Result<()> {
    let server = match kind {
        ServerKind::Sched => {
            let sched = Scheduler::new(SchedulerConfig::new(nodes, cores));
            sim::register_mock_sim(&sched);
            scheduler_server(sched)
        }
        ServerKind::Sim => sim_server(),
        ServerKind::Surrogate => {
            let cfg = match config {
                Some(p) => load_config(&p)?.surrogate,
                None => Default::default(),
            };
            surrogate_server(cfg)
        }
        ServerKind::Geometry => geometry_server(),
    };
    run_server(server, http)
}

fn run_server(server: McpServer, http: Option<SocketAddr>) -> Result<()> {
    match http {
        Some(addr) => {
            let handle = serve_http(Arc::new(server), addr)?;
            eprintln!("listening on {}", handle.url());
            handle.join();
        }
        None => serve_stdio(&server, io::stdin().lock(), io::stdout().lock())?,
    }
    Ok(())
}

/// The mock solver next to this executable, falling back to `PATH`.
fn default_mocksim() -> PathBuf {
    let exe = format!("{MOCKSIM_COMMAND}{}", std::env::consts::EXE_SUFFIX);
    std::env::current_exe()
        .ok()
        .and_then(|p| p.parent().map(|d| d.join(&exe)))
        .filter(|p| p.exists())
        .unwrap_or_else(|| PathBuf::from(MOCKSIM_COMMAND))
}

fn study_run(
    path: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
    serve: Option<SocketAddr>,
    workflow: Option<PathBuf>,
) -> Result<()> {
    let mut cfg = load_config(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let out = out.or(cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    cfg.output_dir = Some(out);
    if cfg.backend == Backend::Simulation && cfg.simulation.spawn_process {
        // Solvers run inside their run directories, so relative paths would not resolve.
        let exe = cfg.simulation.mocksim_path.clone().unwrap_or_else(default_mocksim);
        cfg.simulation.mocksim_path = Some(if exe.components().count() > 1 { fs::canonicalize(&exe)? } else { exe });
    }
    let opts: WorkflowOptions = match workflow {
        Some(p) => serde_json::from_str(&fs::read_to_string(&p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => WorkflowOptions::default(),
    };
    let control = ControlHandle::new();
    let _api = match serve {
        Some(addr) => {
            let h = serve_control_api(control.clone(), addr)?;
            eprintln!("control API on http://{}", h.addr());
            Some(h)
        }
        None => None,
    };
    let wf = run_workflow(cfg.clone(), &opts, &control)?;
    let csv_path = cfg.csv_path();
    let mut w = BufWriter::new(fs::File::create(&csv_path)?);
    write_convergence_csv(&mut w, &[(cfg.name.clone(), wf.study.convergence())])?;
    let mut s = summary(&wf.study);
    s["turns"] = json!(wf.turns);
    s["trace"] = json!(cfg.trace_path());
    s["csv"] = json!(csv_path);
    print_json(&s);
    Ok(())
}

fn summary(r: &StudyResult) -> Value {
    json!({
        "name": r.name,
        "direction": r.direction,
        "rounds": r.rounds.len(),
        "evaluations": r.evaluations,
        "stop_reason": r.stop_reason,
        "incumbent": r.incumbent.as_ref().map(|c| json!({
            "design": c.design,
            "objective": c.objective,
            "eval_index": c.eval_index,
        })),
        "incumbent_history": r.incumbent_history(),
    })
}

fn baseline(path: &Path, starts: usize, seed: u64, out: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(path)?;
    let space = cfg.resolved_space();
    let f: Box<dyn Fn(&[f64]) -> f64 + Sync> = match cfg.backend {
        Backend::Surrogate => {
            let sc = cfg.surrogate.clone();
            Box::new(move |x: &[f64]| {
                SplineDesign::from_slice(x)
                    .and_then(|d| analytic_jet_length(&d, &sc))
                    .unwrap_or(f64::NAN)
            })
        }
        Backend::Simulation => {
            let q = cfg.simulation.qoi.clone();
            Box::new(move |x: &[f64]| {
                EnergyDesign::from_slice(x).map_or(f64::NAN, |d| sim::evaluate_design(&d, &q))
            })
        }
    };
    let runs = baseline_multistart(&space, &f, cfg.direction, starts, seed, &BaselineOptions::default());
    let out = out.unwrap_or_else(|| cfg.output_dir().join(format!("{}_baseline.csv", cfg.name)));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let series: Vec<(String, Vec<(usize, f64)>)> =
        runs.iter().map(|r| (format!("baseline_{:03}", r.run_index), r.trace.clone())).collect();
    write_convergence_csv(&mut BufWriter::new(fs::File::create(&out)?), &series)?;
    let best = runs
        .iter()
        .map(|r| r.best_objective)
        .fold(None, |acc: Option<f64>, v| match acc {
            None => Some(v),
            Some(a) => Some(if cfg.direction.better(v, a) { v } else { a }),
        });
    print_json(&json!({
        "runs": runs.len(),
        "evaluations": runs.iter().map(|r| r.evaluations).sum::<usize>(),
        "best_objective": best,
        "csv": out,
    }));
    Ok(())
}

fn ctl(url: &str, action: CtlAction) -> Result<()> {
    let base = url.trim_end_matches('/');
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let cmd = match action {
        CtlAction::Status => {
            let mut resp = agent.get(format!("{base}/study")).call()?;
            return report(resp.status().as_u16(), resp.body_mut().read_to_string()?);
        }
        CtlAction::Pause => ExpertCommand::Pause,
        CtlAction::Resume => ExpertCommand::Resume,
        CtlAction::Stop => ExpertCommand::Stop,
        CtlAction::Approve => ExpertCommand::ApproveRound,
        CtlAction::SetBounds { lower, upper } => ExpertCommand::SetBounds { lower, upper },
    };
    let mut resp = agent
        .post(format!("{base}/command"))
        .header("content-type", "application/json")
        .send(serde_json::to_string(&cmd)?)?;
    report(resp.status().as_u16(), resp.body_mut().read_to_string()?)
}

fn report(status: u16, body: String) -> Result<()> {
    match serde_json::from_str::<Value>(&body) {
        Ok(v) => print_json(&v),
        Err(_) => {
            let _ = writeln!(io::stdout().lock(), "{body}");
        }
    }
    if status >= 400 {
        bail!("control API returned {status}");
    }
    Ok(())
}
