use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    /// Whether `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Minimize => a < b,
            Direction::Maximize => a > b,
        }
    }

    /// Key that sorts best-first under ascending order.
    pub fn key(self, v: f64) -> f64 {
        match self {
            Direction::Minimize => v,
            Direction::Maximize => -v,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Minimize => "minimize",
            Direction::Maximize => "maximize",
        })
    }
}

impl FromStr for Direction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "minimize" | "min" => Ok(Direction::Minimize),
            "maximize" | "max" => Ok(Direction::Maximize),
            _ => Err(format!("unknown direction '{s}' (expected minimize or maximize)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSpace {
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DesignSpace {
    pub fn new(dims: &[(&str, f64, f64)]) -> Self {
        Self {
            names: dims.iter().map(|d| d.0.to_string()).collect(),
            lower: dims.iter().map(|d| d.1).collect(),
            upper: dims.iter().map(|d| d.2).collect(),
        }
    }

    /// `dim` copies of the same interval, named `p1..pN`.
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Self {
        Self {
            names: (1..=dim).map(|i| format!("p{i}")).collect(),
            lower: vec![lo; dim],
            upper: vec![hi; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<(), String> {
        let n = self.lower.len();
        if n == 0 {
            return Err("design space has no dimensions".into());
        }
        if self.upper.len() != n || self.names.len() != n {
            return Err("names, lower and upper must have equal length".into());
        }
        for i in 0..n {
            if !(self.lower[i] < self.upper[i]) || !self.lower[i].is_finite() || !self.upper[i].is_finite() {
                return Err(format!(
                    "dimension {} needs finite lower < upper, got [{}, {}]",
                    self.names[i], self.lower[i], self.upper[i]
                ));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().enumerate().all(|(i, v)| (self.lower[i]..=self.upper[i]).contains(v))
    }

    pub fn clip(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, v)| v.clamp(self.lower[i], self.upper[i]))
            .collect()
    }

    pub fn range(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn center(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| 0.5 * (self.lower[i] + self.upper[i])).collect()
    }
}
