//! 2D solid model and the four-command interpreter that builds it.
//!
//! Grammar, one command per line, `#` starts a comment:
//!
//! ```text
//! create vertex <x> <y>
//! create curve <v1> <v2>
//! create surface <c1> <c2> ... <ck>        (k >= 3, closed loop in order)
//! mesh surface <s> intervals <n>            (structured quads, 4-sided only)
//! ```
//!
//! Ids are assigned densely from 1 per entity kind, in creation order.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InterpretError {
    #[error("line {line}: syntax error at '{token}': {reason}")]
    SyntaxError { line: usize, token: String, reason: String },
    #[error("line {line}: {kind} {id} does not exist")]
    DanglingReference { line: usize, kind: &'static str, id: u32 },
    #[error("line {line}: curves do not form a closed loop: {reason}")]
    OpenLoop { line: usize, reason: String },
    #[error("line {line}: {reason}")]
    Invalid { line: usize, reason: String },
    #[error("script is empty")]
    EmptyScript,
}

impl InterpretError {
    /// 1-based line of the failing command.
    pub fn line(&self) -> Option<usize> {
        match self {
            InterpretError::SyntaxError { line, .. }
            | InterpretError::DanglingReference { line, .. }
            | InterpretError::OpenLoop { line, .. }
            | InterpretError::Invalid { line, .. } => Some(*line),
            InterpretError::EmptyScript => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub vertices: [u32; 2],
    pub intervals: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub curves: Vec<u32>,
    /// Loop vertices in traversal order.
    pub corners: Vec<u32>,
    pub mesh: Option<QuadMesh>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadMesh {
    pub intervals: u32,
    pub nodes: Vec<[f64; 2]>,
    pub quads: Vec<[usize; 4]>,
}

impl QuadMesh {
    /// Unique undirected element edges, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .quads
            .iter()
            .flat_map(|q| (0..4).map(move |k| (q[k], q[(k + 1) % 4])))
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }
}

/// Entities are stored densely: id `k` lives at index `k - 1`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GeoModel {
    pub vertices: Vec<[f64; 2]>,
    pub curves: Vec<Curve>,
    pub surfaces: Vec<Surface>,
}

impl GeoModel {
    pub fn vertex(&self, id: u32) -> Option<[f64; 2]> {
        self.vertices.get((id as usize).wrapping_sub(1)).copied()
    }

    pub fn curve(&self, id: u32) -> Option<&Curve> {
        self.curves.get((id as usize).wrapping_sub(1))
    }

    pub fn surface(&self, id: u32) -> Option<&Surface> {
        self.surfaces.get((id as usize).wrapping_sub(1))
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn curve_length(&self, id: u32) -> f64 {
        let c = &self.curves[id as usize - 1];
        let a = self.vertices[c.vertices[0] as usize - 1];
        let b = self.vertices[c.vertices[1] as usize - 1];
        (b[0] - a[0]).hypot(b[1] - a[1])
    }

    /// Signed shoelace area of a surface's loop.
    pub fn signed_area(&self, id: u32) -> f64 {
        let s = &self.surfaces[id as usize - 1];
        let pts: Vec<[f64; 2]> = s.corners.iter().map(|v| self.vertices[*v as usize - 1]).collect();
        let n = pts.len();
        0.5 * (0..n)
            .map(|i| {
                let (p, q) = (pts[i], pts[(i + 1) % n]);
                p[0] * q[1] - q[0] * p[1]
            })
            .sum::<f64>()
    }

    /// Area-weighted polygon centroid.
    pub fn surface_centroid(&self, id: u32) -> [f64; 2] {
        let s = &self.surfaces[id as usize - 1];
        let pts: Vec<[f64; 2]> = s.corners.iter().map(|v| self.vertices[*v as usize - 1]).collect();
        let n = pts.len();
        let a = self.signed_area(id);
        let (mut cx, mut cy) = (0.0, 0.0);
        for i in 0..n {
            let (p, q) = (pts[i], pts[(i + 1) % n]);
            let cross = p[0] * q[1] - q[0] * p[1];
            cx += (p[0] + q[0]) * cross;
            cy += (p[1] + q[1]) * cross;
        }
        [cx / (6.0 * a), cy / (6.0 * a)]
    }

    /// Mean boundary element length.
    pub fn mesh_size(&self, id: u32) -> f64 {
        let s = &self.surfaces[id as usize - 1];
        let total: f64 = s
            .curves
            .iter()
            .map(|c| self.curve_length(*c) / self.curves[*c as usize - 1].intervals as f64)
            .sum();
        total / s.curves.len() as f64
    }

    /// All coordinates that define the model's extent.
    pub fn points(&self) -> Vec<[f64; 2]> {
        self.vertices.clone()
    }

    /// Axis-aligned bounding box `[min_x, min_y, max_x, max_y]`.
    pub fn bbox(&self) -> Option<[f64; 4]> {
        bbox_of(&self.points())
    }
}

pub fn bbox_of(points: &[[f64; 2]]) -> Option<[f64; 4]> {
    let first = points.first()?;
    let mut b = [first[0], first[1], first[0], first[1]];
    for p in points {
        b[0] = b[0].min(p[0]);
        b[1] = b[1].min(p[1]);
        b[2] = b[2].max(p[0]);
        b[3] = b[3].max(p[1]);
    }
    Some(b)
}

fn parse_num<T: std::str::FromStr>(line: usize, tok: &str, what: &str) -> Result<T, InterpretError> {
    tok.parse().map_err(|_| InterpretError::SyntaxError {
        line,
        token: tok.to_string(),
        reason: format!("expected {what}"),
    })
}

fn syntax(line: usize, token: &str, reason: &str) -> InterpretError {
    InterpretError::SyntaxError {
        line,
        token: token.to_string(),
        reason: reason.to_string(),
    }
}

/// Walk the curves in order and return the loop's vertices, or why it is open.
fn close_loop(model: &GeoModel, curves: &[u32]) -> Result<Vec<u32>, String> {
    let first = &model.curves[curves[0] as usize - 1].vertices;
    let second = &model.curves[curves[1] as usize - 1].vertices;
    // Orient the first curve so its tail meets the second curve.
    let (start, mut at) = if second.contains(&first[1]) {
        (first[0], first[1])
    } else if second.contains(&first[0]) {
        (first[1], first[0])
    } else {
        return Err(format!("curves {} and {} share no vertex", curves[0], curves[1]));
    };
    let mut corners = vec![start];
    for w in curves.windows(2) {
        let c = &model.curves[w[1] as usize - 1].vertices;
        corners.push(at);
        at = if c[0] == at {
            c[1]
        } else if c[1] == at {
            c[0]
        } else {
            return Err(format!("curve {} does not continue from vertex {at}", w[1]));
        };
    }
    if at != start {
        return Err(format!("loop ends at vertex {at}, not at start vertex {start}"));
    }
    let mut seen = corners.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != corners.len() {
        return Err("loop visits a vertex twice".into());
    }
    Ok(corners)
}

fn structured_mesh(model: &GeoModel, corners: &[u32], n: u32) -> QuadMesh {
    let c: Vec<[f64; 2]> = corners.iter().map(|v| model.vertices[*v as usize - 1]).collect();
    let n_us = n as usize;
    let mut nodes = Vec::with_capacity((n_us + 1) * (n_us + 1));
    for j in 0..=n_us {
        let v = j as f64 / n as f64;
        for i in 0..=n_us {
            let u = i as f64 / n as f64;
            let w = [(1.0 - u) * (1.0 - v), u * (1.0 - v), u * v, (1.0 - u) * v];
            nodes.push([
                w[0] * c[0][0] + w[1] * c[1][0] + w[2] * c[2][0] + w[3] * c[3][0],
                w[0] * c[0][1] + w[1] * c[1][1] + w[2] * c[2][1] + w[3] * c[3][1],
            ]);
        }
    }
    let stride = n_us + 1;
    let mut quads = Vec::with_capacity(n_us * n_us);
    for j in 0..n_us {
        for i in 0..n_us {
            let a = j * stride + i;
            quads.push([a, a + 1, a + 1 + stride, a + stride]);
        }
    }
    QuadMesh {
        intervals: n,
        nodes,
        quads,
    }
}

/// Execute a command script against a fresh model.
pub fn interpret_commands(script: &str) -> Result<GeoModel, InterpretError> {
    let mut model = GeoModel::default();
    let mut any = false;
    for (idx, raw) in script.lines().enumerate() {
        let line = idx + 1;
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        any = true;
        let toks: Vec<&str> = text.split_whitespace().collect();
        let lower: Vec<String> = toks.iter().map(|t| t.to_ascii_lowercase()).collect();
        match (lower[0].as_str(), lower.get(1).map(String::as_str)) {
            ("create", Some("vertex")) => {
                if toks.len() != 4 {
                    return Err(syntax(line, toks.get(4).unwrap_or(&text), "usage: create vertex <x> <y>"));
                }
                let x: f64 = parse_num(line, toks[2], "a number")?;
                let y: f64 = parse_num(line, toks[3], "a number")?;
                if !x.is_finite() || !y.is_finite() {
                    return Err(syntax(line, toks[2], "coordinates must be finite"));
                }
                model.vertices.push([x, y]);
            }
            ("create", Some("curve")) => {
                if toks.len() != 4 {
                    return Err(syntax(line, toks.get(4).unwrap_or(&text), "usage: create curve <v1> <v2>"));
                }
                let a: u32 = parse_num(line, toks[2], "a vertex id")?;
                let b: u32 = parse_num(line, toks[3], "a vertex id")?;
                for id in [a, b] {
                    if model.vertex(id).is_none() {
                        return Err(InterpretError::DanglingReference {
                            line,
                            kind: "vertex",
                            id,
                        });
                    }
                }
                if a == b {
                    return Err(InterpretError::Invalid {
                        line,
                        reason: format!("curve endpoints must differ (both {a})"),
                    });
                }
                model.curves.push(Curve {
                    vertices: [a, b],
                    intervals: 1,
                });
            }
            ("create", Some("surface")) => {
                if toks.len() < 5 {
                    return Err(syntax(line, text, "a surface needs at least 3 curves"));
                }
                let mut curves = Vec::with_capacity(toks.len() - 2);
                for t in &toks[2..] {
                    let id: u32 = parse_num(line, t, "a curve id")?;
                    if model.curve(id).is_none() {
                        return Err(InterpretError::DanglingReference {
                            line,
                            kind: "curve",
                            id,
                        });
                    }
                    curves.push(id);
                }
                let corners = close_loop(&model, &curves).map_err(|reason| InterpretError::OpenLoop { line, reason })?;
                model.surfaces.push(Surface {
                    curves,
                    corners,
                    mesh: None,
                });
                let id = model.surfaces.len() as u32;
                if model.signed_area(id).abs() <= f64::EPSILON {
                    model.surfaces.pop();
                    return Err(InterpretError::Invalid {
                        line,
                        reason: "surface has zero area".into(),
                    });
                }
            }
            ("mesh", Some("surface")) => {
                if toks.len() != 5 || lower[3] != "intervals" {
                    return Err(syntax(
                        line,
                        toks.get(3).unwrap_or(&text),
                        "usage: mesh surface <s> intervals <n>",
                    ));
                }
                let sid: u32 = parse_num(line, toks[2], "a surface id")?;
                let n: u32 = parse_num(line, toks[4], "a positive interval count")?;
                if n == 0 {
                    return Err(syntax(line, toks[4], "interval count must be positive"));
                }
                let Some(s) = model.surface(sid) else {
                    return Err(InterpretError::DanglingReference {
                        line,
                        kind: "surface",
                        id: sid,
                    });
                };
                if s.corners.len() != 4 {
                    return Err(InterpretError::Invalid {
                        line,
                        reason: format!("structured meshing needs 4 boundary curves, surface {sid} has {}", s.corners.len()),
                    });
                }
                let mesh = structured_mesh(&model, &s.corners, n);
                let curves = s.curves.clone();
                for c in curves {
                    model.curves[c as usize - 1].intervals = n;
                }
                model.surfaces[sid as usize - 1].mesh = Some(mesh);
            }
            _ => {
                let bad = if matches!(lower[0].as_str(), "create" | "mesh") {
                    toks.get(1).unwrap_or(&toks[0])
                } else {
                    &toks[0]
                };
                return Err(syntax(line, bad, "unknown command"));
            }
        }
    }
    if !any {
        return Err(InterpretError::EmptyScript);
    }
    Ok(model)
}
