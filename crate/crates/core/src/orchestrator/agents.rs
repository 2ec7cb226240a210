//! The three scripted agents. GA and JMA act only through MCP tool sessions;
//! IDA drives the design loop in-process.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::context::ContextSummary;
use super::phase::Phase;
use super::selector::AgentName;
use crate::design::{Direction, Study, StudyError};
use crate::mcp::{ClientError, McpClient};
use crate::sim::{run_name, QoiParams};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error("tool session down: {0}")]
    ToolSessionDown(String),
    #[error("tool call failed: {0}")]
    Tool(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("design loop: {0}")]
    Study(String),
    #[error("{agent} turn exceeded {limit_s} s")]
    TurnTimeout { agent: AgentName, limit_s: f64 },
    #[error("{agent} has nothing to do in phase {phase}")]
    WrongPhase { agent: AgentName, phase: Phase },
}

impl From<ClientError> for AgentError {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Transport(t) => AgentError::ToolSessionDown(t.to_string()),
            ClientError::NoResponse => AgentError::ToolSessionDown(e.to_string()),
            other => AgentError::Tool(other.to_string()),
        }
    }
}

impl From<StudyError> for AgentError {
    fn from(e: StudyError) -> Self {
        AgentError::Study(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentDescriptor {
    pub name: AgentName,
    pub role_text: String,
    /// Tools reached through attached sessions.
    pub tools: Vec<String>,
    /// Built-in abilities that need no session.
    pub skills: Vec<String>,
}

impl AgentDescriptor {
    pub fn capabilities(&self) -> Vec<String> {
        self.tools.iter().chain(&self.skills).cloned().collect()
    }
}

/// Everything a turn may read or change.
pub struct TurnContext<'a> {
    pub study: &'a mut Study,
    pub summary: &'a ContextSummary,
    /// Results of the pending round, handed from JMA to IDA.
    pub results: &'a mut Option<Vec<Result<f64, String>>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TurnOutput {
    pub summary: String,
    pub next: Phase,
    pub payload: Value,
}

pub trait Agent: Send {
    fn descriptor(&self) -> &AgentDescriptor;
    fn turn(&mut self, phase: Phase, ctx: &mut TurnContext<'_>) -> Result<TurnOutput, AgentError>;

    /// Tool names offered by the agent's sessions, for registration checks.
    fn session_tools(&mut self) -> Result<Vec<String>, AgentError> {
        Ok(Vec::new())
    }
}

fn list(clients: &mut [&mut McpClient]) -> Result<Vec<String>, AgentError> {
    let mut out = Vec::new();
    for c in clients {
        out.extend(c.list_tools()?.into_iter().map(|t| t.name));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryTask {
    pub request: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Reference script to verify against; without one the model is only
    /// checked for a nonempty topology graph.
    #[serde(default)]
    pub reference: Option<String>,
    #[serde(default = "default_geo_tol")]
    pub tol: f64,
}

fn default_geo_tol() -> f64 {
    1e-3
}

impl Default for GeometryTask {
    fn default() -> Self {
        Self {
            request: "mesh a square surface with a structured quad mesh".into(),
            params: BTreeMap::new(),
            reference: None,
            tol: default_geo_tol(),
        }
    }
}

/// Builds and verifies the parameterized mesh template.
pub struct GeometryAgent {
    desc: AgentDescriptor,
    client: McpClient,
    task: GeometryTask,
}

impl GeometryAgent {
    pub fn new(client: McpClient, task: GeometryTask) -> Self {
        Self {
            desc: AgentDescriptor {
                name: AgentName::GA,
                role_text: "Builds the parameterized mesh template and verifies it.".into(),
                tools: vec!["generate_geometry".into(), "serialize_graph".into()],
                skills: Vec::new(),
            },
            client,
            task,
        }
    }
}

impl Agent for GeometryAgent {
    fn descriptor(&self) -> &AgentDescriptor {
        &self.desc
    }

    fn session_tools(&mut self) -> Result<Vec<String>, AgentError> {
        list(&mut [&mut self.client])
    }

    fn turn(&mut self, phase: Phase, _ctx: &mut TurnContext<'_>) -> Result<TurnOutput, AgentError> {
        if phase != Phase::NeedMesh {
            return Err(AgentError::WrongPhase {
                agent: AgentName::GA,
                phase,
            });
        }
        let mut args = json!({
            "request": self.task.request,
            "params": self.task.params,
            "tol": self.task.tol,
        });
        if let Some(r) = &self.task.reference {
            args["reference"] = json!(r);
        }
        let out = self.client.call_tool("generate_geometry", args)?;
        let model = &out["model"];
        let chunk = out["chunk_id"].as_str().unwrap_or("?").to_string();
        let verdict = if let Some(v) = out.get("verification") {
            let bbox = v["bbox_congruent"].as_bool().unwrap_or(false);
            let bij = &v["bijection"];
            if !bbox {
                return Err(AgentError::Verification(format!(
                    "template {chunk}: bounding box differs from the reference"
                )));
            }
            if !bij["ok"].as_bool().unwrap_or(false) {
                return Err(AgentError::Verification(format!(
                    "template {chunk}: {}",
                    bij["reason"].as_str().unwrap_or("no vertex bijection")
                )));
            }
            format!(
                "bbox congruent, bijection max distance {:.3e}, text similarity {:.2}",
                bij["max_distance"].as_f64().unwrap_or(f64::NAN),
                v["textual_similarity"].as_f64().unwrap_or(0.0)
            )
        } else {
            let g = self
                .client
                .call_tool("serialize_graph", json!({ "script": out["script"] }))?;
            let text = g["graph"].as_str().unwrap_or("");
            if !text.contains("SURFACE") {
                return Err(AgentError::Verification(format!("template {chunk}: no surface in the graph")));
            }
            format!("graph has {} entities", text.lines().count())
        };
        let summary = format!(
            "mesh template {chunk}: {} vertices, {} curves, {} surfaces, {} quads; {verdict}",
            model["vertices"], model["curves"], model["surfaces"], model["quads"]
        );
        Ok(TurnOutput {
            summary,
            next: Phase::NeedProposals,
            payload: out,
        })
    }
}

/// How the job agent evaluates a round.
pub enum JobBackend {
    Surrogate {
        client: McpClient,
        direction: Direction,
    },
    Simulation {
        sim: McpClient,
        scheduler: McpClient,
        staging_dir: PathBuf,
        time_limit_s: f64,
        qoi: QoiParams,
        /// Replaces the solver command of every staged run.
        command: Option<PathBuf>,
    },
}

/// Stages, runs and collects the pending round.
pub struct JobAgent {
    desc: AgentDescriptor,
    backend: JobBackend,
}

impl JobAgent {
    pub fn new(backend: JobBackend) -> Self {
        let tools = match &backend {
            JobBackend::Surrogate { .. } => vec!["get_objective".into()],
            JobBackend::Simulation { .. } => {
                vec!["generate_runs".into(), "execute_generated_runs".into(), "get_qoi".into()]
            }
        };
        Self {
            desc: AgentDescriptor {
                name: AgentName::JMA,
                role_text: "Stages the proposed designs, runs them, and collects objectives.".into(),
                tools,
                skills: Vec::new(),
            },
            backend,
        }
    }

    fn run_surrogate(
        client: &mut McpClient,
        direction: Direction,
        batch: &[(usize, Vec<f64>)],
    ) -> Result<(Vec<Result<f64, String>>, String, Value), AgentError> {
        let mut out = Vec::with_capacity(batch.len());
        for (_, d) in batch {
            let r = client.call_tool("get_objective", json!({ "design": d, "direction": direction }));
            out.push(match r {
                Ok(v) => v["objective"].as_f64().ok_or_else(|| "reply without objective".to_string()),
                Err(ClientError::Tool(m)) => Err(m),
                Err(e) => return Err(e.into()),
            });
        }
        let ok = out.iter().filter(|r| r.is_ok()).count();
        let text = format!("{} surrogate evaluations: {ok} ok, {} failed", out.len(), out.len() - ok);
        Ok((out, text, json!({ "evaluations": batch.len() })))
    }

    #[allow(clippy::too_many_arguments)]
    fn run_simulation(
        sim: &mut McpClient,
        scheduler: &mut McpClient,
        staging_dir: &std::path::Path,
        time_limit_s: f64,
        qoi: &QoiParams,
        command: Option<&PathBuf>,
        batch: &[(usize, Vec<f64>)],
    ) -> Result<(Vec<Result<f64, String>>, String, Value), AgentError> {
        let first = batch.first().map_or(0, |b| b.0);
        let designs: Vec<&Vec<f64>> = batch.iter().map(|b| &b.1).collect();
        let staged = sim.call_tool(
            "generate_runs",
            json!({
                "designs": designs,
                "staging_dir": staging_dir,
                "options": { "first_index": first, "time_limit_s": time_limit_s },
            }),
        )?;
        let mut runs = staged["runs"].clone();
        if let (Some(cmd), Some(list)) = (command, runs.as_array_mut()) {
            for r in list {
                r["command"][0] = json!(cmd.display().to_string());
            }
        }
        let exec = scheduler.call_tool("execute_generated_runs", json!({ "runs": runs }))?;
        let empty = Vec::new();
        let outcomes = exec["runs"].as_array().unwrap_or(&empty);
        let mut out = Vec::with_capacity(batch.len());
        for (idx, _) in batch {
            let id = run_name(*idx);
            let o = outcomes.iter().find(|o| o["run_id"] == json!(id));
            out.push(match o {
                Some(o) if o["state"] == json!("Completed") => {
                    match sim.call_tool(
                        "get_qoi",
                        json!({ "working_dir": staging_dir.join(&id), "params": qoi }),
                    ) {
                        Ok(v) => v["qoi"].as_f64().ok_or_else(|| "reply without qoi".to_string()),
                        Err(ClientError::Tool(m)) => Err(m),
                        Err(e) => return Err(e.into()),
                    }
                }
                Some(o) => Err(format!("{id} ended {}", o["state"].as_str().unwrap_or("?"))),
                None => Err(format!("{id} was not run")),
            });
        }
        // Per-run lines stay in the payload; the message carries the tally.
        let text = exec["summary"].as_str().and_then(|s| s.lines().last()).unwrap_or("").to_string();
        Ok((out, text, exec))
    }
}

impl Agent for JobAgent {
    fn descriptor(&self) -> &AgentDescriptor {
        &self.desc
    }

    fn session_tools(&mut self) -> Result<Vec<String>, AgentError> {
        match &mut self.backend {
            JobBackend::Surrogate { client, .. } => list(&mut [client]),
            JobBackend::Simulation { sim, scheduler, .. } => list(&mut [sim, scheduler]),
        }
    }

    fn turn(&mut self, phase: Phase, ctx: &mut TurnContext<'_>) -> Result<TurnOutput, AgentError> {
        if phase != Phase::RunsPending {
            return Err(AgentError::WrongPhase {
                agent: AgentName::JMA,
                phase,
            });
        }
        let pending = ctx
            .study
            .pending()
            .ok_or_else(|| AgentError::Study("no pending round to run".into()))?;
        let round = pending.round;
        let batch = pending.designs();
        let (results, text, payload) = match &mut self.backend {
            JobBackend::Surrogate { client, direction } => Self::run_surrogate(client, *direction, &batch)?,
            JobBackend::Simulation {
                sim,
                scheduler,
                staging_dir,
                time_limit_s,
                qoi,
                command,
            } => Self::run_simulation(sim, scheduler, staging_dir, *time_limit_s, qoi, command.as_ref(), &batch)?,
        };
        *ctx.results = Some(results);
        Ok(TurnOutput {
            summary: format!("round {round}: {text}"),
            next: Phase::ResultsReady,
            payload,
        })
    }
}

/// Ranks results, tracks the incumbent, proposes rounds, and calls convergence.
pub struct DesignAgent {
    desc: AgentDescriptor,
}

impl Default for DesignAgent {
    fn default() -> Self {
        Self {
            desc: AgentDescriptor {
                name: AgentName::IDA,
                role_text: "Ranks evaluated designs and proposes the next round.".into(),
                tools: Vec::new(),
                skills: vec!["propose_round".into(), "rank_candidates".into(), "check_convergence".into()],
            },
        }
    }
}

fn fmt_obj(v: Option<f64>) -> String {
    v.map_or("none".into(), |x| format!("{x:.6}"))
}

impl DesignAgent {
    fn finished(study: &Study) -> TurnOutput {
        let inc = study.incumbent();
        TurnOutput {
            summary: format!(
                "study finished ({:?}) after {} evaluations; incumbent {} at {:?}",
                study.stop_reason(),
                study.evaluations(),
                fmt_obj(inc.and_then(|c| c.objective)),
                inc.map(|c| &c.design)
            ),
            next: Phase::Done,
            payload: json!({ "stop_reason": study.stop_reason(), "incumbent": inc }),
        }
    }
}

impl Agent for DesignAgent {
    fn descriptor(&self) -> &AgentDescriptor {
        &self.desc
    }

    fn turn(&mut self, phase: Phase, ctx: &mut TurnContext<'_>) -> Result<TurnOutput, AgentError> {
        let study = &mut *ctx.study;
        match phase {
            Phase::NeedProposals => {
                if study.is_finished() {
                    return Ok(Self::finished(study));
                }
                // A round proposed by an earlier, interrupted turn is reused.
                let pending = match study.pending() {
                    Some(p) => p.clone(),
                    None => study.propose()?,
                };
                Ok(TurnOutput {
                    summary: format!(
                        "round {}: proposed {} designs ({})",
                        pending.round,
                        pending.batch.len(),
                        pending.note
                    ),
                    next: Phase::RunsPending,
                    payload: json!({ "round": pending.round, "designs": pending.designs() }),
                })
            }
            Phase::ResultsReady => {
                if let Some(results) = ctx.results.take() {
                    if let Err(e) = study.record(results.clone()) {
                        *ctx.results = Some(results);
                        return Err(e.into());
                    }
                }
                let Some(round) = study.rounds().last() else {
                    return Err(AgentError::Study("no results to rank".into()));
                };
                let best = round
                    .candidates
                    .iter()
                    .filter_map(|c| c.objective.map(|v| (v, c.eval_index)))
                    .reduce(|a, b| if study.config().direction.better(b.0, a.0) { b } else { a });
                let failed = round.candidates.iter().filter(|c| c.objective.is_none()).count();
                let inc = study.incumbent();
                let mut summary = format!(
                    "round {} ranked: best {} (eval {}), {failed} failed; incumbent {} (eval {})",
                    round.index,
                    fmt_obj(best.map(|b| b.0)),
                    best.map_or("-".into(), |b| b.1.to_string()),
                    fmt_obj(inc.and_then(|c| c.objective)),
                    inc.map_or("-".into(), |c| c.eval_index.to_string()),
                );
                let payload = json!({ "round": round.index, "incumbent": inc });
                let next = if study.is_finished() {
                    summary.push_str(&format!("; stopping ({:?})", study.stop_reason().unwrap()));
                    Phase::Done
                } else if study.awaiting_verdict() {
                    summary.push_str("; waiting for expert approval");
                    Phase::AwaitingExpert
                } else {
                    Phase::NeedProposals
                };
                Ok(TurnOutput { summary, next, payload })
            }
            other => Err(AgentError::WrongPhase {
                agent: AgentName::IDA,
                phase: other,
            }),
        }
    }
}
