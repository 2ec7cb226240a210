//! Topology graph of a model and its line-oriented text form.
//!
//! ```text
//! VERTEX <id> coords=(x,y) edges=[...]
//! EDGE <id> length=L centroid=(x,y) intervals=n vertices=[...] surfaces=[...]
//! SURFACE <id> centroid=(x,y) area=A normal=(0,0,1) mesh_size=h edges=[...]
//! ```
//!
//! Blocks are sorted by kind then id; reals are written with 6 decimals, so
//! parsing recovers topology exactly and reals to within 5e-7.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::model::GeoModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexNode {
    pub coords: [f64; 2],
    pub edges: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeNode {
    pub length: f64,
    pub centroid: [f64; 2],
    pub intervals: u32,
    pub vertices: Vec<u32>,
    pub surfaces: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceNode {
    pub centroid: [f64; 2],
    pub area: f64,
    pub normal: [i8; 3],
    pub mesh_size: f64,
    pub edges: Vec<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GeoGraph {
    pub vertices: BTreeMap<u32, VertexNode>,
    pub edges: BTreeMap<u32, EdgeNode>,
    pub surfaces: BTreeMap<u32, SurfaceNode>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeRef {
    Vertex(u32),
    Edge(u32),
    Surface(u32),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("inconsistent model: {0}")]
    InconsistentModel(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub fn build_graph(model: &GeoModel) -> Result<GeoGraph, GraphError> {
    let bad = |s: String| GraphError::InconsistentModel(s);
    let mut g = GeoGraph::default();
    for (i, c) in model.vertices.iter().enumerate() {
        g.vertices.insert(
            i as u32 + 1,
            VertexNode {
                coords: *c,
                edges: Vec::new(),
            },
        );
    }
    for (i, c) in model.curves.iter().enumerate() {
        let id = i as u32 + 1;
        let [a, b] = c.vertices;
        let (pa, pb) = match (model.vertex(a), model.vertex(b)) {
            (Some(pa), Some(pb)) => (pa, pb),
            _ => return Err(bad(format!("curve {id} references a missing vertex"))),
        };
        for v in [a, b] {
            g.vertices.get_mut(&v).unwrap().edges.push(id);
        }
        g.edges.insert(
            id,
            EdgeNode {
                length: (pb[0] - pa[0]).hypot(pb[1] - pa[1]),
                centroid: [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])],
                intervals: c.intervals,
                vertices: vec![a, b],
                surfaces: Vec::new(),
            },
        );
    }
    for (i, s) in model.surfaces.iter().enumerate() {
        let id = i as u32 + 1;
        for c in &s.curves {
            g.edges
                .get_mut(c)
                .ok_or_else(|| bad(format!("surface {id} references missing curve {c}")))?
                .surfaces
                .push(id);
        }
        if s.corners.iter().any(|v| model.vertex(*v).is_none()) {
            return Err(bad(format!("surface {id} has a missing corner vertex")));
        }
        let signed = model.signed_area(id);
        if !(signed.abs() > 0.0) {
            return Err(bad(format!("surface {id} has zero area")));
        }
        g.surfaces.insert(
            id,
            SurfaceNode {
                centroid: model.surface_centroid(id),
                area: signed.abs(),
                normal: [0, 0, if signed > 0.0 { 1 } else { -1 }],
                mesh_size: model.mesh_size(id),
                edges: s.curves.clone(),
            },
        );
    }
    Ok(g)
}

impl GeoGraph {
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty() && self.edges.is_empty() && self.surfaces.is_empty()
    }

    /// Incidence pairs (vertex, edge) and (edge, surface), sorted.
    pub fn links(&self) -> Vec<(NodeRef, NodeRef)> {
        let mut out = Vec::new();
        for (e, node) in &self.edges {
            for v in &node.vertices {
                out.push((NodeRef::Vertex(*v), NodeRef::Edge(*e)));
            }
            for s in &node.surfaces {
                out.push((NodeRef::Edge(*e), NodeRef::Surface(*s)));
            }
        }
        out.sort();
        out
    }

    /// Same topology and integers; reals within `tol`.
    pub fn approx_eq(&self, other: &GeoGraph, tol: f64) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= tol;
        let close2 = |a: [f64; 2], b: [f64; 2]| close(a[0], b[0]) && close(a[1], b[1]);
        self.vertices.len() == other.vertices.len()
            && self.edges.len() == other.edges.len()
            && self.surfaces.len() == other.surfaces.len()
            && self.vertices.iter().zip(&other.vertices).all(|((i, a), (j, b))| {
                i == j && a.edges == b.edges && close2(a.coords, b.coords)
            })
            && self.edges.iter().zip(&other.edges).all(|((i, a), (j, b))| {
                i == j
                    && a.vertices == b.vertices
                    && a.surfaces == b.surfaces
                    && a.intervals == b.intervals
                    && close(a.length, b.length)
                    && close2(a.centroid, b.centroid)
            })
            && self.surfaces.iter().zip(&other.surfaces).all(|((i, a), (j, b))| {
                i == j
                    && a.edges == b.edges
                    && a.normal == b.normal
                    && close(a.area, b.area)
                    && close(a.mesh_size, b.mesh_size)
                    && close2(a.centroid, b.centroid)
            })
    }
}

fn r6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

fn ids(v: &[u32]) -> String {
    let parts: Vec<String> = v.iter().map(u32::to_string).collect();
    format!("[{}]", parts.join(","))
}

pub fn serialize_graph(g: &GeoGraph) -> String {
    let mut out = String::new();
    for (id, v) in &g.vertices {
        out.push_str(&format!(
            "VERTEX {id} coords=({},{}) edges={}\n",
            r6(v.coords[0]),
            r6(v.coords[1]),
            ids(&v.edges)
        ));
    }
    for (id, e) in &g.edges {
        out.push_str(&format!(
            "EDGE {id} length={} centroid=({},{}) intervals={} vertices={} surfaces={}\n",
            r6(e.length),
            r6(e.centroid[0]),
            r6(e.centroid[1]),
            e.intervals,
            ids(&e.vertices),
            ids(&e.surfaces)
        ));
    }
    for (id, s) in &g.surfaces {
        out.push_str(&format!(
            "SURFACE {id} centroid=({},{}) area={} normal=({},{},{}) mesh_size={} edges={}\n",
            r6(s.centroid[0]),
            r6(s.centroid[1]),
            r6(s.area),
            s.normal[0],
            s.normal[1],
            s.normal[2],
            r6(s.mesh_size),
            ids(&s.edges)
        ));
    }
    out
}

struct Fields<'a> {
    line: usize,
    map: BTreeMap<&'a str, &'a str>,
}

impl<'a> Fields<'a> {
    fn get(&self, key: &str) -> Result<&'a str, GraphError> {
        self.map.get(key).copied().ok_or_else(|| GraphError::Parse {
            line: self.line,
            reason: format!("missing field '{key}'"),
        })
    }

    fn err(&self, key: &str, raw: &str) -> GraphError {
        GraphError::Parse {
            line: self.line,
            reason: format!("bad value '{raw}' for '{key}'"),
        }
    }

    fn real(&self, key: &str) -> Result<f64, GraphError> {
        let raw = self.get(key)?;
        raw.parse().map_err(|_| self.err(key, raw))
    }

    fn int<T: std::str::FromStr>(&self, key: &str) -> Result<T, GraphError> {
        let raw = self.get(key)?;
        raw.parse().map_err(|_| self.err(key, raw))
    }

    fn tuple<T: std::str::FromStr>(&self, key: &str, n: usize) -> Result<Vec<T>, GraphError> {
        let raw = self.get(key)?;
        let inner = raw
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| self.err(key, raw))?;
        let vals: Vec<T> = inner
            .split(',')
            .map(|p| p.parse().map_err(|_| self.err(key, raw)))
            .collect::<Result<_, _>>()?;
        if vals.len() != n {
            return Err(self.err(key, raw));
        }
        Ok(vals)
    }

    fn list(&self, key: &str) -> Result<Vec<u32>, GraphError> {
        let raw = self.get(key)?;
        let inner = raw
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| self.err(key, raw))?;
        if inner.is_empty() {
            return Ok(Vec::new());
        }
        inner
            .split(',')
            .map(|p| p.parse().map_err(|_| self.err(key, raw)))
            .collect()
    }
}

pub fn parse_graph(text: &str) -> Result<GeoGraph, GraphError> {
    let mut g = GeoGraph::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let mut parts = raw.split_whitespace();
        let kind = parts.next().unwrap();
        let id: u32 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| GraphError::Parse {
            line,
            reason: "missing or bad id".into(),
        })?;
        let mut map = BTreeMap::new();
        for p in parts {
            let (k, v) = p.split_once('=').ok_or_else(|| GraphError::Parse {
                line,
                reason: format!("expected key=value, got '{p}'"),
            })?;
            map.insert(k, v);
        }
        let f = Fields { line, map };
        let dup = || GraphError::Parse {
            line,
            reason: format!("duplicate {kind} {id}"),
        };
        match kind {
            "VERTEX" => {
                let c: Vec<f64> = f.tuple("coords", 2)?;
                let node = VertexNode {
                    coords: [c[0], c[1]],
                    edges: f.list("edges")?,
                };
                if g.vertices.insert(id, node).is_some() {
                    return Err(dup());
                }
            }
            "EDGE" => {
                let c: Vec<f64> = f.tuple("centroid", 2)?;
                let node = EdgeNode {
                    length: f.real("length")?,
                    centroid: [c[0], c[1]],
                    intervals: f.int("intervals")?,
                    vertices: f.list("vertices")?,
                    surfaces: f.list("surfaces")?,
                };
                if g.edges.insert(id, node).is_some() {
                    return Err(dup());
                }
            }
            "SURFACE" => {
                let c: Vec<f64> = f.tuple("centroid", 2)?;
                let n: Vec<i8> = f.tuple("normal", 3)?;
                let node = SurfaceNode {
                    centroid: [c[0], c[1]],
                    area: f.real("area")?,
                    normal: [n[0], n[1], n[2]],
                    mesh_size: f.real("mesh_size")?,
                    edges: f.list("edges")?,
                };
                if g.surfaces.insert(id, node).is_some() {
                    return Err(dup());
                }
            }
            other => {
                return Err(GraphError::Parse {
                    line,
                    reason: format!("unknown entity kind '{other}'"),
                })
            }
        }
    }
    Ok(g)
}
