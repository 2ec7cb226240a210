//! Built-in documentation corpus and the parameterized command templates
//! instantiated from the best-matching chunk.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::retrieval::{DocChunk, HybridConfig, Index, RetrievalError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TemplateError {
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("no template for chunk {0}")]
    NoTemplate(String),
    #[error("unknown parameter {name} for template {template}")]
    UnknownParameter { template: String, name: String },
    #[error("parameter {name} = {value}: {reason}")]
    BadParameter { name: String, value: f64, reason: String },
}

/// A retrieved chunk plus the script instantiated from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generated {
    pub chunk_id: String,
    pub function_names: Vec<String>,
    pub score: f64,
    pub params: BTreeMap<String, f64>,
    pub script: String,
}

pub struct Template {
    pub chunk_id: &'static str,
    pub function_names: &'static [&'static str],
    pub text: &'static str,
    pub params: &'static [(&'static str, f64)],
    render: fn(&BTreeMap<String, f64>) -> String,
}

impl Template {
    pub fn chunk(&self) -> DocChunk {
        DocChunk {
            id: self.chunk_id.to_string(),
            function_names: self.function_names.iter().map(|s| s.to_string()).collect(),
            text: self.text.to_string(),
        }
    }

    pub fn render(&self, overrides: &BTreeMap<String, f64>) -> Result<(BTreeMap<String, f64>, String), TemplateError> {
        let mut p: BTreeMap<String, f64> = self.params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        for (k, v) in overrides {
            if !p.contains_key(k) {
                return Err(TemplateError::UnknownParameter {
                    template: self.chunk_id.to_string(),
                    name: k.clone(),
                });
            }
            if !v.is_finite() {
                return Err(TemplateError::BadParameter {
                    name: k.clone(),
                    value: *v,
                    reason: "must be finite".into(),
                });
            }
            p.insert(k.clone(), *v);
        }
        for (k, v) in &p {
            let positive = matches!(k.as_str(), "width" | "height" | "side" | "length" | "split");
            if positive && *v <= 0.0 {
                return Err(TemplateError::BadParameter {
                    name: k.clone(),
                    value: *v,
                    reason: "must be positive".into(),
                });
            }
            if k == "intervals" && (*v < 1.0 || v.fract() != 0.0) {
                return Err(TemplateError::BadParameter {
                    name: k.clone(),
                    value: *v,
                    reason: "must be a positive integer".into(),
                });
            }
        }
        if let (Some(s), Some(w)) = (p.get("split"), p.get("width")) {
            if s >= w {
                return Err(TemplateError::BadParameter {
                    name: "split".into(),
                    value: *s,
                    reason: "must be less than width".into(),
                });
            }
        }
        let script = (self.render)(&p);
        Ok((p, script))
    }
}

fn num(v: f64) -> String {
    let s = format!("{v}");
    if s == "-0" { "0".into() } else { s }
}

fn rect_commands(p: &BTreeMap<String, f64>, w: f64, h: f64) -> String {
    let (x, y) = (p["x0"], p["y0"]);
    format!(
        "create vertex {} {}\ncreate vertex {} {}\ncreate vertex {} {}\ncreate vertex {} {}\n\
         create curve 1 2\ncreate curve 2 3\ncreate curve 3 4\ncreate curve 4 1\n\
         create surface 1 2 3 4\n",
        num(x),
        num(y),
        num(x + w),
        num(y),
        num(x + w),
        num(y + h),
        num(x),
        num(y + h)
    )
}

fn render_vertex(p: &BTreeMap<String, f64>) -> String {
    format!("create vertex {} {}\n", num(p["x"]), num(p["y"]))
}

fn render_segment(p: &BTreeMap<String, f64>) -> String {
    let (x, y) = (p["x0"], p["y0"]);
    format!(
        "create vertex {} {}\ncreate vertex {} {}\ncreate curve 1 2\n",
        num(x),
        num(y),
        num(x + p["length"]),
        num(y)
    )
}

fn render_rectangle(p: &BTreeMap<String, f64>) -> String {
    rect_commands(p, p["width"], p["height"])
}

fn render_meshed_rectangle(p: &BTreeMap<String, f64>) -> String {
    format!("{}mesh surface 1 intervals {}\n", rect_commands(p, p["width"], p["height"]), p["intervals"])
}

fn render_meshed_square(p: &BTreeMap<String, f64>) -> String {
    format!("{}mesh surface 1 intervals {}\n", rect_commands(p, p["side"], p["side"]), p["intervals"])
}

fn render_two_block(p: &BTreeMap<String, f64>) -> String {
    let (x, y, w, h, s) = (p["x0"], p["y0"], p["width"], p["height"], p["split"]);
    let n = p["intervals"];
    format!(
        "create vertex {} {}\ncreate vertex {} {}\ncreate vertex {} {}\ncreate vertex {} {}\n\
         create vertex {} {}\ncreate vertex {} {}\n\
         create curve 1 2\ncreate curve 2 5\ncreate curve 5 6\ncreate curve 6 1\n\
         create curve 2 3\ncreate curve 3 4\ncreate curve 4 5\n\
         create surface 1 2 3 4\ncreate surface 5 6 7 2\n\
         mesh surface 1 intervals {n}\nmesh surface 2 intervals {n}\n",
        num(x),
        num(y),
        num(x + s),
        num(y),
        num(x + w),
        num(y),
        num(x + w),
        num(y + h),
        num(x + s),
        num(y + h),
        num(x),
        num(y + h),
    )
}

pub static TEMPLATES: &[Template] = &[
    Template {
        chunk_id: "create_vertex",
        function_names: &["create vertex"],
        text: "Create a single vertex (point) at Cartesian coordinates x y in centimeters. \
               Usage: create vertex 0 0",
        params: &[("x", 0.0), ("y", 0.0)],
        render: render_vertex,
    },
    Template {
        chunk_id: "create_curve",
        function_names: &["create vertex", "create curve"],
        text: "Create a straight line curve segment between two vertices given by their ids; \
               the template makes a horizontal segment of the given length. \
               Usage: create vertex 0 0 / create vertex 1 0 / create curve 1 2",
        params: &[("x0", 0.0), ("y0", 0.0), ("length", 1.0)],
        render: render_segment,
    },
    Template {
        chunk_id: "create_surface",
        function_names: &["create vertex", "create curve", "create surface"],
        text: "Create a rectangle surface with width and height bounded by a closed loop of four curves \
               through four corner vertices, without meshing. \
               Usage: create surface 1 2 3 4",
        params: &[("x0", 0.0), ("y0", 0.0), ("width", 1.0), ("height", 1.0)],
        render: render_rectangle,
    },
    Template {
        chunk_id: "mesh_rectangle",
        function_names: &["create surface", "mesh surface"],
        text: "Mesh a rectangle rectangular surface of given width and height with a structured quad mesh, \
               using the same number of intervals on every boundary curve. \
               Usage: mesh surface 1 intervals 4",
        params: &[("x0", 0.0), ("y0", 0.0), ("width", 2.0), ("height", 1.0), ("intervals", 4.0)],
        render: render_meshed_rectangle,
    },
    Template {
        chunk_id: "mesh_square",
        function_names: &["create surface", "mesh surface"],
        text: "Create and mesh a square surface of side length side with a structured quad mesh \
               of intervals by intervals elements, for example the unit square. \
               Usage: mesh surface 1 intervals 4",
        params: &[("x0", 0.0), ("y0", 0.0), ("side", 1.0), ("intervals", 4.0)],
        render: render_meshed_square,
    },
    Template {
        chunk_id: "two_block",
        function_names: &["create surface", "mesh surface"],
        text: "Create two adjacent rectangular blocks sharing an interior curve at the split position, \
               such as a liner and a backing region, and mesh both surfaces with matching intervals. \
               Usage: create surface 1 2 3 4 / create surface 5 6 7 2 / mesh surface 2 intervals 4",
        params: &[
            ("x0", 0.0),
            ("y0", 0.0),
            ("width", 2.0),
            ("height", 1.0),
            ("split", 1.0),
            ("intervals", 4.0),
        ],
        render: render_two_block,
    },
];

pub fn builtin_corpus() -> Vec<DocChunk> {
    TEMPLATES.iter().map(Template::chunk).collect()
}

pub fn template(id: &str) -> Option<&'static Template> {
    TEMPLATES.iter().find(|t| t.chunk_id == id)
}

/// Retrieve the best chunk for `request` and instantiate its template.
pub fn generate_script(request: &str, params: &BTreeMap<String, f64>) -> Result<Generated, TemplateError> {
    let index = Index::new(&builtin_corpus())?;
    let hit = index
        .search(request, 1, &HybridConfig::default())?
        .into_iter()
        .next()
        .expect("k = 1 over a nonempty corpus");
    let t = template(&hit.id).ok_or_else(|| TemplateError::NoTemplate(hit.id.clone()))?;
    let (params, script) = t.render(params)?;
    Ok(Generated {
        chunk_id: hit.id,
        function_names: t.function_names.iter().map(|s| s.to_string()).collect(),
        score: hit.score,
        params,
        script,
    })
}
