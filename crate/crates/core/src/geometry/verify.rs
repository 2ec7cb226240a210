//! Result verification: bounding-box congruence, vertex bijection between
//! meshes, and textual similarity of command scripts.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::model::{bbox_of, GeoModel};

/// Above this vertex count the bijection search is greedy.
pub const EXACT_BIJECTION_LIMIT: usize = 10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifyError {
    #[error("model or mesh is empty")]
    EmptyModel,
    #[error("topology mismatch: {0}")]
    TopologyMismatch(String),
    #[error("best mapping moves a vertex {achieved}, limit {limit}")]
    DistanceExceeded { achieved: f64, limit: f64 },
}

pub fn bbox_congruent(a: &GeoModel, b: &GeoModel, tol: f64) -> Result<bool, VerifyError> {
    let (ba, bb) = match (a.bbox(), b.bbox()) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err(VerifyError::EmptyModel),
    };
    Ok(ba.iter().zip(&bb).all(|(p, q)| (p - q).abs() <= tol))
}

/// Points plus undirected adjacency.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeshGraph {
    pub points: Vec<[f64; 2]>,
    pub edges: Vec<(usize, usize)>,
}

impl MeshGraph {
    pub fn new(points: Vec<[f64; 2]>, edges: Vec<(usize, usize)>) -> Self {
        let mut e: Vec<(usize, usize)> = edges.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        e.sort_unstable();
        e.dedup();
        Self { points, edges: e }
    }

    /// Vertices and curves of a model; meshed surfaces contribute their
    /// element nodes and edges instead when any mesh exists.
    pub fn from_model(m: &GeoModel) -> Self {
        if m.surfaces.iter().any(|s| s.mesh.is_some()) {
            let mut points: Vec<[f64; 2]> = Vec::new();
            let mut edges = Vec::new();
            // Merge coincident nodes across surfaces by exact coordinates.
            let mut index: HashMap<(u64, u64), usize> = HashMap::new();
            for mesh in m.surfaces.iter().filter_map(|s| s.mesh.as_ref()) {
                let local: Vec<usize> = mesh
                    .nodes
                    .iter()
                    .map(|p| {
                        *index.entry((p[0].to_bits(), p[1].to_bits())).or_insert_with(|| {
                            points.push(*p);
                            points.len() - 1
                        })
                    })
                    .collect();
                edges.extend(mesh.edges().into_iter().map(|(a, b)| (local[a], local[b])));
            }
            return Self::new(points, edges);
        }
        let edges = m
            .curves
            .iter()
            .map(|c| (c.vertices[0] as usize - 1, c.vertices[1] as usize - 1))
            .collect();
        Self::new(m.vertices.clone(), edges)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn adjacency(&self) -> Vec<Vec<bool>> {
        let n = self.len();
        let mut adj = vec![vec![false; n]; n];
        for &(a, b) in &self.edges {
            adj[a][b] = true;
            adj[b][a] = true;
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.len()];
        for &(a, b) in &self.edges {
            d[a] += 1;
            d[b] += 1;
        }
        d
    }

    /// Subgraph induced by the points satisfying `keep`.
    pub fn induced(&self, keep: impl Fn(&[f64; 2]) -> bool) -> Self {
        let mut map = vec![None; self.len()];
        let mut points = Vec::new();
        for (i, p) in self.points.iter().enumerate() {
            if keep(p) {
                map[i] = Some(points.len());
                points.push(*p);
            }
        }
        let edges = self
            .edges
            .iter()
            .filter_map(|&(a, b)| Some((map[a]?, map[b]?)))
            .collect();
        Self::new(points, edges)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bijection {
    /// `mapping[i]` is the vertex of the (trimmed) second mesh matched to vertex `i` of the first.
    pub mapping: Vec<usize>,
    pub max_distance: f64,
    pub exact: bool,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Largest vertex displacement under `mapping`.
pub fn mapping_cost(a: &MeshGraph, b: &MeshGraph, mapping: &[usize]) -> f64 {
    mapping
        .iter()
        .enumerate()
        .map(|(i, &j)| dist(a.points[i], b.points[j]))
        .fold(0.0, f64::max)
}

/// Whether `mapping` carries edges onto edges and non-edges onto non-edges.
pub fn preserves_adjacency(a: &MeshGraph, b: &MeshGraph, mapping: &[usize]) -> bool {
    let (aa, ab) = (a.adjacency(), b.adjacency());
    (0..a.len()).all(|i| (0..a.len()).all(|k| aa[i][k] == ab[mapping[i]][mapping[k]]))
}

struct Search<'a> {
    a: &'a MeshGraph,
    b: &'a MeshGraph,
    adj_a: Vec<Vec<bool>>,
    adj_b: Vec<Vec<bool>>,
    deg_a: Vec<usize>,
    deg_b: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
}

impl Search<'_> {
    fn run(&mut self, i: usize, current: &mut Vec<usize>, used: &mut Vec<bool>, cost: f64) {
        if let Some((best, _)) = &self.best {
            if cost >= *best {
                return;
            }
        }
        if i == self.a.len() {
            self.best = Some((cost, current.clone()));
            return;
        }
        for j in 0..self.b.len() {
            if used[j] || self.deg_a[i] != self.deg_b[j] {
                continue;
            }
            if (0..i).any(|k| self.adj_a[i][k] != self.adj_b[j][current[k]]) {
                continue;
            }
            let c = cost.max(dist(self.a.points[i], self.b.points[j]));
            used[j] = true;
            current.push(j);
            self.run(i + 1, current, used, c);
            current.pop();
            used[j] = false;
        }
    }
}

fn exact_bijection(a: &MeshGraph, b: &MeshGraph) -> Option<(f64, Vec<usize>)> {
    let mut s = Search {
        a,
        b,
        adj_a: a.adjacency(),
        adj_b: b.adjacency(),
        deg_a: a.degrees(),
        deg_b: b.degrees(),
        best: None,
    };
    s.run(0, &mut Vec::with_capacity(a.len()), &mut vec![false; b.len()], 0.0);
    s.best
}

/// Nearest same-degree partner for each vertex, then pairwise swaps until
/// adjacency holds or no swap helps.
fn greedy_bijection(a: &MeshGraph, b: &MeshGraph) -> Option<(f64, Vec<usize>)> {
    let (da, db) = (a.degrees(), b.degrees());
    let mut used = vec![false; b.len()];
    let mut mapping = Vec::with_capacity(a.len());
    for i in 0..a.len() {
        let j = (0..b.len())
            .filter(|&j| !used[j] && db[j] == da[i])
            .min_by(|&x, &y| dist(a.points[i], b.points[x]).total_cmp(&dist(a.points[i], b.points[y])))?;
        used[j] = true;
        mapping.push(j);
    }
    let (aa, ab) = (a.adjacency(), b.adjacency());
    let violations = |m: &[usize]| -> usize {
        (0..a.len())
            .map(|i| (i + 1..a.len()).filter(|&k| aa[i][k] != ab[m[i]][m[k]]).count())
            .sum()
    };
    let mut bad = violations(&mapping);
    while bad > 0 {
        let mut improved = false;
        'outer: for i in 0..a.len() {
            for k in i + 1..a.len() {
                if da[i] != da[k] {
                    continue;
                }
                mapping.swap(i, k);
                let v = violations(&mapping);
                if v < bad {
                    bad = v;
                    improved = true;
                    break 'outer;
                }
                mapping.swap(i, k);
            }
        }
        if !improved {
            return None;
        }
    }
    Some((mapping_cost(a, b, &mapping), mapping))
}

/// Match the vertices of `a` onto `b`, minimizing the largest displacement.
/// When `b` has more vertices than `a`, those outside `a`'s bounding box
/// grown by `max_dist` are ignored.
pub fn best_match_bijection(a: &MeshGraph, b: &MeshGraph, max_dist: f64) -> Result<Bijection, VerifyError> {
    if a.is_empty() || b.is_empty() {
        return Err(VerifyError::EmptyModel);
    }
    let bb = bbox_of(&a.points).expect("nonempty");
    let b = if b.len() > a.len() {
        b.induced(|p| {
            p[0] >= bb[0] - max_dist && p[1] >= bb[1] - max_dist && p[0] <= bb[2] + max_dist && p[1] <= bb[3] + max_dist
        })
    } else {
        b.clone()
    };
    if a.len() != b.len() {
        return Err(VerifyError::TopologyMismatch(format!(
            "vertex counts differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let (mut da, mut db) = (a.degrees(), b.degrees());
    da.sort_unstable();
    db.sort_unstable();
    if da != db {
        return Err(VerifyError::TopologyMismatch(format!(
            "degree multisets differ: {da:?} vs {db:?}"
        )));
    }
    let exact = a.len() <= EXACT_BIJECTION_LIMIT;
    let found = if exact { exact_bijection(a, &b) } else { greedy_bijection(a, &b) };
    let Some((achieved, mapping)) = found else {
        return Err(VerifyError::TopologyMismatch("no adjacency-preserving vertex mapping".into()));
    };
    if achieved > max_dist {
        return Err(VerifyError::DistanceExceeded {
            achieved,
            limit: max_dist,
        });
    }
    Ok(Bijection {
        mapping,
        max_distance: achieved,
        exact,
    })
}

fn script_tokens(s: &str) -> HashMap<String, usize> {
    let mut m = HashMap::new();
    for line in s.lines() {
        let code = line.split('#').next().unwrap_or("");
        for t in code.split_whitespace() {
            *m.entry(t.to_lowercase()).or_insert(0) += 1;
        }
    }
    m
}

/// Multiset Jaccard over lowercased whitespace tokens; line order is ignored.
pub fn textual_similarity(candidate: &str, reference: &str) -> f64 {
    let (c, r) = (script_tokens(candidate), script_tokens(reference));
    let mut inter = 0;
    let mut union = 0;
    for (t, n) in &c {
        let m = r.get(t).copied().unwrap_or(0);
        inter += (*n).min(m);
        union += (*n).max(m);
    }
    for (t, m) in &r {
        if !c.contains_key(t) {
            union += m;
        }
    }
    if union == 0 {
        return 1.0;
    }
    inter as f64 / union as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path4() -> MeshGraph {
        MeshGraph::new(
            vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]],
            vec![(0, 1), (1, 2), (2, 3)],
        )
    }

    #[test]
    fn identity_and_mismatch() {
        let p = path4();
        let r = best_match_bijection(&p, &p, 0.0).unwrap();
        assert_eq!(r.mapping, vec![0, 1, 2, 3]);
        assert_eq!(r.max_distance, 0.0);
        let star = MeshGraph::new(p.points.clone(), vec![(0, 1), (0, 2), (0, 3)]);
        assert!(matches!(best_match_bijection(&p, &star, 1.0), Err(VerifyError::TopologyMismatch(_))));
    }

    #[test]
    fn far_geometry_is_ignored_and_distance_enforced() {
        let p = path4();
        let mut q = p.clone();
        q.points.push([50.0, 50.0]);
        q.edges.push((3, 4));
        assert!(best_match_bijection(&p, &q, 0.1).is_ok());
        let mut shifted = p.clone();
        shifted.points[0][1] = 0.005;
        assert!(matches!(
            best_match_bijection(&p, &shifted, 0.001),
            Err(VerifyError::DistanceExceeded { .. })
        ));
    }

    #[test]
    fn jaccard() {
        let r = "create vertex 0 0\ncreate vertex 1 0";
        assert_eq!(textual_similarity(r, r), 1.0);
        assert_eq!(textual_similarity("a b", "c d"), 0.0);
        assert_eq!(textual_similarity("b\na", "a\nb"), 1.0);
    }
}
