//! Brute-force oracles and generators for the geometry agent kit.

use mada::geometry::*;
use proptest::prelude::*;

pub const UNIT_SQUARE: &str = "\
create vertex 0 0
create vertex 1 0
create vertex 1 1
create vertex 0 1
create curve 1 2
create curve 2 3
create curve 3 4
create curve 4 1
create surface 1 2 3 4
mesh surface 1 intervals 4
";

pub fn square(x0: f64, y0: f64, side: f64) -> GeoModel {
    interpret_commands(&format!(
        "create vertex {x0} {y0}\ncreate vertex {} {y0}\ncreate vertex {} {}\ncreate vertex {x0} {}",
        x0 + side,
        x0 + side,
        y0 + side,
        y0 + side
    ))
    .unwrap()
}

/// Independent brute-force scorer written directly from the formulas.
pub fn oracle(query: &str, corpus: &[DocChunk], k: usize) -> Vec<(String, f64)> {
    let tok = |s: &str| -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = String::new();
        for ch in s.chars() {
            if ch.is_ascii_alphanumeric() {
                cur.push(ch.to_ascii_lowercase());
            } else if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
        out
    };
    let docs: Vec<Vec<String>> = corpus.iter().map(|c| tok(&c.text)).collect();
    let q = tok(query);
    let n = docs.len() as f64;
    let df = |t: &str| docs.iter().filter(|d| d.iter().any(|x| x == t)).count() as f64;
    let tf = |d: &[String], t: &str| d.iter().filter(|x| *x == t).count() as f64;
    let avg = docs.iter().map(|d| d.len() as f64).sum::<f64>() / n;
    let bm: Vec<f64> = docs
        .iter()
        .map(|d| {
            q.iter()
                .map(|t| {
                    let f = tf(d, t);
                    let idf = ((n - df(t) + 0.5) / (df(t) + 0.5) + 1.0).ln();
                    idf * f * 2.2 / (f + 1.2 * (0.25 + 0.75 * d.len() as f64 / avg))
                })
                .sum()
        })
        .collect();
    let w = |t: &str| ((1.0 + n) / (1.0 + df(t))).ln() + 1.0;
    let mut vocab: Vec<String> = docs.iter().flatten().chain(q.iter()).cloned().collect();
    vocab.sort();
    vocab.dedup();
    let vec_of = |d: &[String]| -> Vec<f64> { vocab.iter().map(|t| tf(d, t) * w(t)).collect() };
    let qv = vec_of(&q);
    let cos: Vec<f64> = docs
        .iter()
        .map(|d| {
            let dv = vec_of(d);
            let dot: f64 = qv.iter().zip(&dv).map(|(a, b)| a * b).sum();
            let na = qv.iter().map(|a| a * a).sum::<f64>().sqrt();
            let nb = dv.iter().map(|a| a * a).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                0.0
            } else {
                dot / (na * nb)
            }
        })
        .collect();
    let norm = |v: &[f64]| -> Vec<f64> {
        let lo = v.iter().cloned().fold(f64::MAX, f64::min);
        let hi = v.iter().cloned().fold(f64::MIN, f64::max);
        v.iter().map(|x| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 }).collect()
    };
    let (c, b) = (norm(&cos), norm(&bm));
    let mut scored: Vec<(String, f64)> = corpus
        .iter()
        .enumerate()
        .map(|(i, ch)| (ch.id.clone(), 0.5 * c[i] + 0.5 * b[i]))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

pub const WORDS: &[&str] = &[
    "create", "vertex", "curve", "surface", "mesh", "intervals", "quad", "square", "rectangle", "liner",
    "copper", "block", "split", "node", "element", "boundary", "loop", "edge", "coordinates", "length",
];

pub fn toy_corpus(n: usize, seed: u64) -> Vec<DocChunk> {
    let mut s = seed;
    let mut next = move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (s >> 33) as usize
    };
    (0..n)
        .map(|i| {
            let len = 3 + next() % 12;
            let text: Vec<&str> = (0..len).map(|_| WORDS[next() % WORDS.len()]).collect();
            DocChunk {
                id: format!("c{:03}", n - 1 - i),
                function_names: vec![WORDS[i % WORDS.len()].to_string()],
                text: text.join(" "),
            }
        })
        .collect()
}

pub fn assert_matches_oracle(query: &str, corpus: &[DocChunk], k: usize) {
    let got = hybrid_retrieve(query, corpus, k).unwrap();
    let want = oracle(query, corpus, k);
    assert_eq!(got.len(), want.len());
    for (g, (id, score)) in got.iter().zip(&want) {
        assert!((g.score - score).abs() < 1e-9, "{query}: {} {} vs {id} {score}", g.id, g.score);
    }
    // Compare orderings only where scores are separated beyond rounding.
    let separated = want.windows(2).all(|w| (w[0].1 - w[1].1).abs() > 1e-9 || w[0].1 == w[1].1);
    if separated {
        let ids: Vec<&str> = got.iter().map(|h| h.id.as_str()).collect();
        let want_ids: Vec<&str> = want.iter().map(|(i, _)| i.as_str()).collect();
        assert_eq!(ids, want_ids, "{query}");
    }
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Smallest achievable max distance over adjacency-preserving permutations.
pub fn exhaustive(a: &MeshGraph, b: &MeshGraph) -> Option<f64> {
    let ea: std::collections::HashSet<(usize, usize)> = a.edges.iter().cloned().collect();
    let eb: std::collections::HashSet<(usize, usize)> = b.edges.iter().cloned().collect();
    permutations(a.points.len())
        .into_iter()
        .filter(|p| {
            ea.len() == eb.len()
                && ea.iter().all(|&(i, j)| {
                    let (x, y) = (p[i].min(p[j]), p[i].max(p[j]));
                    eb.contains(&(x, y))
                })
        })
        .map(|p| {
            p.iter()
                .enumerate()
                .map(|(i, &j)| {
                    let (u, v) = (a.points[i], b.points[j]);
                    ((u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2)).sqrt()
                })
                .fold(0.0, f64::max)
        })
        .min_by(|x, y| x.partial_cmp(y).unwrap())
}

/// Random valid model: jittered quads on a grid plus loose vertices and curves.
pub fn arb_script() -> impl Strategy<Value = String> {
    (
        1usize..4,
        prop::collection::vec((-0.2f64..0.2, -0.2f64..0.2), 16),
        0usize..3,
        1u32..4,
        any::<bool>(),
    )
        .prop_map(|(quads, jit, loose, n, mesh)| {
            let mut s = String::new();
            let mut v = 0;
            let mut c = 0;
            for q in 0..quads {
                let x0 = q as f64 * 3.0;
                let corners = [(x0, 0.0), (x0 + 2.0, 0.0), (x0 + 2.0, 2.0), (x0, 2.0)];
                for (k, (x, y)) in corners.iter().enumerate() {
                    let (dx, dy) = jit[(q * 4 + k) % jit.len()];
                    s.push_str(&format!("create vertex {} {}\n", x + dx, y + dy));
                }
                for k in 0..4 {
                    s.push_str(&format!("create curve {} {}\n", v + 1 + k, v + 1 + (k + 1) % 4));
                }
                s.push_str(&format!("create surface {} {} {} {}\n", c + 1, c + 2, c + 3, c + 4));
                if mesh {
                    s.push_str(&format!("mesh surface {} intervals {n}\n", q + 1));
                }
                v += 4;
                c += 4;
            }
            for k in 0..loose {
                s.push_str(&format!("create vertex {} -5\n", k as f64 * 0.3));
                s.push_str(&format!("create curve {} {}\n", v + 1, 1));
                v += 1;
            }
            s
        })
}

pub fn arb_mesh(max_n: usize) -> impl Strategy<Value = (MeshGraph, MeshGraph)> {
    (2..=max_n)
        .prop_flat_map(|n| {
            (
                prop::collection::vec((0.0f64..3.0, 0.0f64..3.0), n),
                prop::collection::vec(any::<bool>(), n * (n - 1) / 2),
                Just((0..n).collect::<Vec<usize>>()).prop_shuffle(),
                prop::collection::vec((-0.05f64..0.05, -0.05f64..0.05), n),
            )
        })
        .prop_map(|(pts, mask, perm, jit)| {
            let n = pts.len();
            let pts: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
            let mut edges = Vec::new();
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if mask[k] {
                        edges.push((i, j));
                    }
                    k += 1;
                }
            }
            let mut bpts = vec![[0.0; 2]; n];
            for i in 0..n {
                bpts[perm[i]] = [pts[i][0] + jit[i].0, pts[i][1] + jit[i].1];
            }
            let bedges = edges.iter().map(|&(i, j)| (perm[i], perm[j])).collect();
            (MeshGraph::new(pts, edges), MeshGraph::new(bpts, bedges))
        })
}
