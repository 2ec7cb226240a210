use std::collections::BTreeMap;

use serde_json::{json, Value};

use super::graph::{build_graph, serialize_graph};
use super::model::{interpret_commands, GeoModel};
use super::retrieval::{hybrid_retrieve, DocChunk};
use super::templates::{builtin_corpus, generate_script, TEMPLATES};
use super::verify::{bbox_congruent, best_match_bijection, textual_similarity, MeshGraph};
use crate::mcp::{arg, opt_arg, InputSchema, McpServer, ParamType};

pub const SERVER_NAME: &str = "mada-geometry";

fn model_of(args: &Value, key: &str) -> Result<GeoModel, String> {
    let script: String = arg(args, key)?;
    interpret_commands(&script).map_err(|e| format!("{key}: {e}"))
}

pub fn model_summary(m: &GeoModel) -> Value {
    let quads: usize = m.surfaces.iter().filter_map(|s| s.mesh.as_ref()).map(|q| q.quads.len()).sum();
    json!({
        "vertices": m.vertices.len(),
        "curves": m.curves.len(),
        "surfaces": m.surfaces.len(),
        "quads": quads,
        "bbox": m.bbox(),
    })
}

pub fn geometry_server() -> McpServer {
    let mut server = McpServer::new(SERVER_NAME);
    server
        .register(
            "interpret_commands",
            "Run a command script against a fresh model and summarize the result.",
            InputSchema::new().required("script", ParamType::String, "one command per line"),
            |args| {
                let m = model_of(args, "script")?;
                Ok(model_summary(&m))
            },
        )
        .expect("fresh registry");
    server
        .register(
            "serialize_graph",
            "Topology graph of the model built by a script, as structured text.",
            InputSchema::new().required("script", ParamType::String, "one command per line"),
            |args| {
                let m = model_of(args, "script")?;
                let g = build_graph(&m).map_err(|e| e.to_string())?;
                Ok(json!({ "graph": serialize_graph(&g) }))
            },
        )
        .expect("fresh registry");
    server
        .register(
            "hybrid_retrieve",
            "Top-k documentation chunks for a query (BM25 fused with tf-idf cosine).",
            InputSchema::new()
                .required("query", ParamType::String, "free text")
                .optional("k", ParamType::Integer, "number of hits, default 3")
                .optional("corpus", ParamType::Array, "chunks {id, function_names, text}; default built-in"),
            |args| {
                let query: String = arg(args, "query")?;
                let k: usize = opt_arg(args, "k")?.unwrap_or(3);
                let corpus: Vec<DocChunk> = opt_arg(args, "corpus")?.unwrap_or_else(builtin_corpus);
                let hits = hybrid_retrieve(&query, &corpus, k).map_err(|e| e.to_string())?;
                Ok(json!({ "hits": hits }))
            },
        )
        .expect("fresh registry");
    server
        .register(
            "bbox_congruent",
            "Whether two scripted models have matching bounding boxes within tol.",
            InputSchema::new()
                .required("a", ParamType::String, "script")
                .required("b", ParamType::String, "script")
                .optional("tol", ParamType::Number, "cm, default 1e-3"),
            |args| {
                let (a, b) = (model_of(args, "a")?, model_of(args, "b")?);
                let tol: f64 = opt_arg(args, "tol")?.unwrap_or(1e-3);
                let ok = bbox_congruent(&a, &b, tol).map_err(|e| e.to_string())?;
                Ok(json!({ "congruent": ok, "bbox_a": a.bbox(), "bbox_b": b.bbox() }))
            },
        )
        .expect("fresh registry");
    server
        .register(
            "best_match_bijection",
            "Adjacency-preserving vertex matching of two scripted meshes minimizing the largest displacement.",
            InputSchema::new()
                .required("a", ParamType::String, "reference script")
                .required("b", ParamType::String, "candidate script")
                .optional("max_dist", ParamType::Number, "cm, default 1e-2"),
            |args| {
                let (a, b) = (model_of(args, "a")?, model_of(args, "b")?);
                let max_dist: f64 = opt_arg(args, "max_dist")?.unwrap_or(1e-2);
                let r = best_match_bijection(&MeshGraph::from_model(&a), &MeshGraph::from_model(&b), max_dist)
                    .map_err(|e| e.to_string())?;
                serde_json::to_value(r).map_err(|e| e.to_string())
            },
        )
        .expect("fresh registry");
    server
        .register(
            "textual_similarity",
            "Token Jaccard similarity of a candidate script to a reference script.",
            InputSchema::new()
                .required("candidate", ParamType::String, "script")
                .required("reference", ParamType::String, "script"),
            |args| {
                let c: String = arg(args, "candidate")?;
                let r: String = arg(args, "reference")?;
                if r.trim().is_empty() {
                    return Err("reference must be nonempty".into());
                }
                Ok(json!({ "similarity": textual_similarity(&c, &r) }))
            },
        )
        .expect("fresh registry");
    server
        .register(
            "generate_geometry",
            "Retrieve the best template for a request, instantiate it, run it, and verify against an optional reference.",
            InputSchema::new()
                .required("request", ParamType::String, "what to build")
                .optional("params", ParamType::Object, "template parameter overrides")
                .optional("reference", ParamType::String, "reference script to verify against")
                .optional("tol", ParamType::Number, "cm, default 1e-3"),
            |args| {
                let request: String = arg(args, "request")?;
                let params: BTreeMap<String, f64> = opt_arg(args, "params")?.unwrap_or_default();
                let tol: f64 = opt_arg(args, "tol")?.unwrap_or(1e-3);
                let g = generate_script(&request, &params).map_err(|e| e.to_string())?;
                let m = interpret_commands(&g.script).map_err(|e| e.to_string())?;
                let mut out = json!({
                    "chunk_id": g.chunk_id,
                    "function_names": g.function_names,
                    "score": g.score,
                    "params": g.params,
                    "script": g.script,
                    "model": model_summary(&m),
                });
                if let Some(reference) = opt_arg::<String>(args, "reference")? {
                    let r = interpret_commands(&reference).map_err(|e| format!("reference: {e}"))?;
                    let bbox = bbox_congruent(&m, &r, tol).map_err(|e| e.to_string())?;
                    let bij = best_match_bijection(&MeshGraph::from_model(&r), &MeshGraph::from_model(&m), tol);
                    out["verification"] = json!({
                        "bbox_congruent": bbox,
                        "bijection": match bij {
                            Ok(b) => json!({ "ok": true, "max_distance": b.max_distance }),
                            Err(e) => json!({ "ok": false, "reason": e.to_string() }),
                        },
                        "textual_similarity": textual_similarity(&out["script"].as_str().unwrap_or(""), &reference),
                    });
                }
                Ok(out)
            },
        )
        .expect("fresh registry");
    server
        .register(
            "list_templates",
            "Built-in templates with their parameters and defaults.",
            InputSchema::new(),
            |_| {
                let t: Vec<Value> = TEMPLATES
                    .iter()
                    .map(|t| {
                        let params: BTreeMap<&str, f64> = t.params.iter().cloned().collect();
                        json!({ "id": t.chunk_id, "function_names": t.function_names, "params": params })
                    })
                    .collect();
                Ok(json!({ "templates": t }))
            },
        )
        .expect("fresh registry");
    server
}
