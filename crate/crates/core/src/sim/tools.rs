use std::path::PathBuf;

use serde_json::{json, Value};

use super::{generate_runs, get_qoi, read_diagnostics, EnergyDesign, QoiParams, StagingOptions, ENERGY_BOUNDS};
use crate::mcp::{arg, opt_arg, InputSchema, McpServer, ParamType};

pub const SERVER_NAME: &str = "mada-sim";

/// Designs arrive either as `[a1, a2, a3, a4]` arrays or as `{a1, a2, a3, a4}` objects.
fn parse_designs(v: &Value) -> Result<Vec<EnergyDesign>, String> {
    let items = v.as_array().ok_or("designs must be an array")?;
    items
        .iter()
        .enumerate()
        .map(|(i, d)| {
            if let Ok(vals) = serde_json::from_value::<Vec<f64>>(d.clone()) {
                EnergyDesign::from_slice(&vals).ok_or_else(|| format!("design {i}: expected 4 values"))
            } else {
                serde_json::from_value(d.clone()).map_err(|e| format!("design {i}: {e}"))
            }
        })
        .collect()
}

pub fn sim_server() -> McpServer {
    let mut server = McpServer::new(SERVER_NAME);
    server
        .register(
            "generate_runs",
            "Stage one run deck per design and return run descriptions for the scheduler.",
            InputSchema::new()
                .required("designs", ParamType::Array, "designs as [a1,a2,a3,a4]")
                .required("staging_dir", ParamType::String, "directory receiving run_NNNN folders")
                .optional("options", ParamType::Object, "per-run resources and first index"),
            |args| {
                let designs = parse_designs(&args["designs"])?;
                let dir: PathBuf = arg(args, "staging_dir")?;
                let opts: StagingOptions = opt_arg(args, "options")?.unwrap_or_default();
                let runs = generate_runs(&designs, &dir, &opts).map_err(|e| e.to_string())?;
                Ok(json!({ "runs": runs }))
            },
        )
        .expect("fresh registry");
    server
        .register(
            "get_qoi",
            "Quantity of interest from a finished run's tracer diagnostics (lower is better).",
            InputSchema::new()
                .required("working_dir", ParamType::String, "run directory")
                .optional("params", ParamType::Object, "{lambda1, lambda2, delta}"),
            |args| {
                let wd: PathBuf = arg(args, "working_dir")?;
                let params: QoiParams = opt_arg(args, "params")?.unwrap_or_default();
                let q = get_qoi(&wd, &params).map_err(|e| e.to_string())?;
                let diag = read_diagnostics(&wd).map_err(|e| e.to_string())?;
                Ok(json!({ "qoi": q, "diagnostics": diag }))
            },
        )
        .expect("fresh registry");
    server
        .register(
            "design_space",
            "Parameter names and bounds of the energy design.",
            InputSchema::new(),
            |_| {
                let dims: Vec<Value> = ENERGY_BOUNDS
                    .iter()
                    .map(|(n, lo, hi)| json!({ "name": n, "lo": lo, "hi": hi }))
                    .collect();
                Ok(json!({ "dimensions": dims, "direction": "minimize" }))
            },
        )
        .expect("fresh registry");
    server
}
