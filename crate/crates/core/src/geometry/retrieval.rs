//! Hybrid documentation retrieval: BM25 keyword scores fused with tf-idf
//! cosine similarity.
//!
//! Both legs are min-max normalized over the corpus for each query and then
//! combined with fixed weights. A leg whose scores are all equal contributes
//! zero, so a query sharing no tokens with the corpus scores zero everywhere
//! and the ranking falls back to id order.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocChunk {
    pub id: String,
    pub function_names: Vec<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RetrievalError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("chunk {0}: function_names must hold 1 to 3 names")]
    BadFunctionNames(String),
    #[error("chunk {0}: text is empty")]
    EmptyText(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    pub k1: f64,
    pub b: f64,
    pub cosine_weight: f64,
    pub bm25_weight: f64,
    /// Drop hits whose fused score is below this; `None` keeps the top k.
    pub min_score: Option<f64>,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            k1: 1.2,
            b: 0.75,
            cosine_weight: 0.5,
            bm25_weight: 0.5,
            min_score: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: String,
    pub score: f64,
}

/// Lowercased maximal runs of ASCII letters and digits.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_ascii_lowercase())
        .collect()
}

fn counts(tokens: &[String]) -> HashMap<&str, f64> {
    let mut m = HashMap::new();
    for t in tokens {
        *m.entry(t.as_str()).or_insert(0.0) += 1.0;
    }
    m
}

pub fn validate_corpus(corpus: &[DocChunk]) -> Result<(), RetrievalError> {
    if corpus.is_empty() {
        return Err(RetrievalError::EmptyCorpus);
    }
    for c in corpus {
        if c.function_names.is_empty() || c.function_names.len() > 3 {
            return Err(RetrievalError::BadFunctionNames(c.id.clone()));
        }
        if c.text.trim().is_empty() {
            return Err(RetrievalError::EmptyText(c.id.clone()));
        }
    }
    Ok(())
}

/// Pre-tokenized corpus statistics shared by both scoring legs.
#[derive(Debug, Clone)]
pub struct Index {
    ids: Vec<String>,
    docs: Vec<HashMap<String, f64>>,
    lengths: Vec<f64>,
    avg_len: f64,
    df: HashMap<String, f64>,
    norms: Vec<f64>,
}

impl Index {
    pub fn new(corpus: &[DocChunk]) -> Result<Self, RetrievalError> {
        validate_corpus(corpus)?;
        let mut docs = Vec::with_capacity(corpus.len());
        let mut lengths = Vec::with_capacity(corpus.len());
        let mut df: HashMap<String, f64> = HashMap::new();
        for c in corpus {
            let toks = tokenize(&c.text);
            lengths.push(toks.len() as f64);
            let tf: HashMap<String, f64> = counts(&toks).into_iter().map(|(k, v)| (k.to_string(), v)).collect();
            for t in tf.keys() {
                *df.entry(t.clone()).or_insert(0.0) += 1.0;
            }
            docs.push(tf);
        }
        let avg_len = lengths.iter().sum::<f64>() / lengths.len() as f64;
        let mut idx = Self {
            ids: corpus.iter().map(|c| c.id.clone()).collect(),
            docs,
            lengths,
            avg_len,
            df,
            norms: Vec::new(),
        };
        idx.norms = idx
            .docs
            .iter()
            .map(|d| d.iter().map(|(t, tf)| (tf * idx.tfidf_idf(t)).powi(2)).sum::<f64>().sqrt())
            .collect();
        Ok(idx)
    }

    fn n(&self) -> f64 {
        self.docs.len() as f64
    }

    /// `ln((N - df + 0.5) / (df + 0.5) + 1)`
    pub fn bm25_idf(&self, term: &str) -> f64 {
        let df = self.df.get(term).copied().unwrap_or(0.0);
        ((self.n() - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    /// Smoothed `ln((1 + N) / (1 + df)) + 1`.
    pub fn tfidf_idf(&self, term: &str) -> f64 {
        let df = self.df.get(term).copied().unwrap_or(0.0);
        ((1.0 + self.n()) / (1.0 + df)).ln() + 1.0
    }

    /// Query tokens count with multiplicity.
    pub fn bm25(&self, query: &[String], cfg: &HybridConfig) -> Vec<f64> {
        (0..self.docs.len())
            .map(|d| {
                let norm = cfg.k1 * (1.0 - cfg.b + cfg.b * self.lengths[d] / self.avg_len);
                query
                    .iter()
                    .map(|t| match self.docs[d].get(t) {
                        Some(tf) => self.bm25_idf(t) * tf * (cfg.k1 + 1.0) / (tf + norm),
                        None => 0.0,
                    })
                    .sum()
            })
            .collect()
    }

    pub fn cosine(&self, query: &[String]) -> Vec<f64> {
        let q = counts(query);
        let qv: Vec<(&str, f64)> = q.iter().map(|(t, tf)| (*t, tf * self.tfidf_idf(t))).collect();
        let qn = qv.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        (0..self.docs.len())
            .map(|d| {
                if qn == 0.0 || self.norms[d] == 0.0 {
                    return 0.0;
                }
                let dot: f64 = qv
                    .iter()
                    .filter_map(|(t, w)| self.docs[d].get(*t).map(|tf| w * tf * self.tfidf_idf(t)))
                    .sum();
                dot / (qn * self.norms[d])
            })
            .collect()
    }

    pub fn search(&self, query: &str, k: usize, cfg: &HybridConfig) -> Result<Vec<Hit>, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::ZeroK);
        }
        let q = tokenize(query);
        let cos = min_max(&self.cosine(&q));
        let bm = min_max(&self.bm25(&q, cfg));
        let mut hits: Vec<Hit> = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| Hit {
                id: id.clone(),
                score: cfg.cosine_weight * cos[i] + cfg.bm25_weight * bm[i],
            })
            .collect();
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
        if let Some(t) = cfg.min_score {
            hits.retain(|h| h.score >= t);
        }
        hits.truncate(k);
        Ok(hits)
    }
}

fn min_max(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

pub fn hybrid_retrieve(query: &str, corpus: &[DocChunk], k: usize) -> Result<Vec<Hit>, RetrievalError> {
    Index::new(corpus)?.search(query, k, &HybridConfig::default())
}
