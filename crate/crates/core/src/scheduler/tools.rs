//! MCP face of the scheduler.

use serde_json::{json, Value};

use super::engine::Scheduler;
use super::model::{JobId, JobStatus, ResourceSpec, RunDescription};
use crate::mcp::{arg, opt_arg, InputSchema, McpServer, ParamType};

pub const SERVER_NAME: &str = "mada-scheduler";

fn status_list(s: &Scheduler) -> Value {
    let jobs: Vec<JobStatus> = s.status_all().iter().map(|r| r.status()).collect();
    json!({ "count": jobs.len(), "jobs": jobs })
}

fn parse_id(args: &Value) -> Result<JobId, String> {
    let raw: String = arg(args, "job_id")?;
    raw.parse()
}

pub fn scheduler_server(sched: Scheduler) -> McpServer {
    let mut server = McpServer::new(SERVER_NAME);

    let s = sched.clone();
    server
        .register(
            "submit_job",
            "Submit a single command; returns its job id without waiting.",
            InputSchema::new()
                .required("spec", ParamType::Object, "ResourceSpec")
                .required("payload", ParamType::Array, "command followed by its arguments"),
            move |args| {
                let spec: ResourceSpec = arg(args, "spec")?;
                let payload: Vec<String> = arg(args, "payload")?;
                let id = s.submit_job(spec, payload).map_err(|e| e.to_string())?;
                Ok(json!({ "job_id": id }))
            },
        )
        .expect("fresh registry");

    let s = sched.clone();
    server
        .register(
            "submit_jobs_async",
            "Submit a batch of run descriptions and return job ids immediately.",
            InputSchema::new().required("runs", ParamType::Array, "RunDescription list"),
            move |args| {
                let runs: Vec<RunDescription> = arg(args, "runs")?;
                let batch = s.submit_jobs_async(&runs);
                Ok(json!({
                    "job_ids": batch.job_ids(),
                    "accepted": batch.accepted,
                    "rejected": batch.rejected,
                }))
            },
        )
        .expect("fresh registry");

    let s = sched.clone();
    server
        .register(
            "check_job_status",
            "Status of one job, or of every managed job when no id is given.",
            InputSchema::new().optional("job_id", ParamType::String, "job id"),
            move |args| match opt_arg::<String>(args, "job_id")? {
                None => Ok(status_list(&s)),
                Some(_) => {
                    let id = parse_id(args)?;
                    let r = s.status(id).map_err(|e| e.to_string())?;
                    Ok(serde_json::to_value(r.status()).unwrap())
                }
            },
        )
        .expect("fresh registry");

    let s = sched.clone();
    server
        .register(
            "execute_generated_runs",
            "Submit a batch and block until every run is terminal; returns a textual summary.",
            InputSchema::new().required("runs", ParamType::Array, "RunDescription list"),
            move |args| {
                let runs: Vec<RunDescription> = arg(args, "runs")?;
                let summary = s.execute_generated_runs(&runs);
                Ok(json!({
                    "summary": summary.text,
                    "runs": summary.runs,
                    "rejected": summary.rejected,
                    "nonzero_exits": summary.nonzero_exits,
                }))
            },
        )
        .expect("fresh registry");

    let s = sched;
    server
        .register(
            "cancel_job",
            "Cancel a pending or running job; terminal jobs are left as they are.",
            InputSchema::new().required("job_id", ParamType::String, "job id"),
            move |args| {
                let id = parse_id(args)?;
                let state = s.cancel_job(id).map_err(|e| e.to_string())?;
                Ok(json!({ "job_id": id, "state": state }))
            },
        )
        .expect("fresh registry");

    server
}
