use serde_json::{json, Value};

use super::{get_objective, predict_field, SplineDesign, SurrogateConfig, P_BOUND};
use crate::design::Direction;
use crate::mcp::{arg, opt_arg, InputSchema, McpServer, ParamType};

pub const SERVER_NAME: &str = "mada-surrogate";

fn design(args: &Value) -> Result<SplineDesign, String> {
    let p: Vec<f64> = arg(args, "design")?;
    SplineDesign::from_slice(&p).map_err(|e| e.to_string())
}

pub fn surrogate_server(cfg: SurrogateConfig) -> McpServer {
    let mut server = McpServer::new(SERVER_NAME);

    let c = cfg.clone();
    server
        .register(
            "get_objective",
            "Run the surrogate on a four-point spline design and return its jet length.",
            InputSchema::new()
                .required("design", ParamType::Array, "[P1, P2, P3, P4] in cm")
                .optional("direction", ParamType::String, "minimize or maximize (metadata only)"),
            move |args| {
                let d = design(args)?;
                let dir: Direction = match opt_arg::<String>(args, "direction")? {
                    Some(s) => s.parse()?,
                    None => Direction::Maximize,
                };
                let v = get_objective(&d, dir, &c).map_err(|e| e.to_string())?;
                Ok(json!({ "objective": v, "direction": dir }))
            },
        )
        .expect("fresh registry");

    let c = cfg;
    server
        .register(
            "predict_field",
            "Predicted density field as {nx, ny, dx, dy, x_origin, data}.",
            InputSchema::new()
                .required("design", ParamType::Array, "[P1, P2, P3, P4] in cm")
                .optional("resolution", ParamType::Integer, "grid cells per side"),
            move |args| {
                let d = design(args)?;
                let cfg = match opt_arg::<usize>(args, "resolution")? {
                    Some(n) => SurrogateConfig {
                        nx: n,
                        ny: n,
                        ..c.clone()
                    },
                    None => c.clone(),
                };
                let f = predict_field(&d, &cfg).map_err(|e| e.to_string())?;
                Ok(serde_json::to_value(f).unwrap())
            },
        )
        .expect("fresh registry");

    server
        .register(
            "design_space",
            "Control-point names and bounds.",
            InputSchema::new(),
            |_| {
                let dims: Vec<Value> = (1..=4)
                    .map(|i| json!({ "name": format!("P{i}"), "lo": -P_BOUND, "hi": P_BOUND }))
                    .collect();
                Ok(json!({ "dimensions": dims, "direction": "maximize" }))
            },
        )
        .expect("fresh registry");

    server
}
