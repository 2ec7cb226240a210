use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::space::{DesignSpace, Direction};
use crate::sim::{QoiParams, ENERGY_BOUNDS};
use crate::surrogate::{SurrogateConfig, P_BOUND};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Lhs,
    Policy,
    Expert,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub design: Vec<f64>,
    /// `None` when the evaluation failed; such candidates never rank.
    pub objective: Option<f64>,
    pub round: usize,
    pub eval_index: usize,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub index: usize,
    pub candidates: Vec<Candidate>,
    pub incumbent: Option<Candidate>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RankError {
    #[error("objective of evaluation {0} is not finite")]
    NonFiniteObjective(usize),
}

/// Best-first order; ties go to the earlier evaluation. Failed candidates
/// are dropped.
pub fn rank_candidates(cands: &[Candidate], direction: Direction) -> Result<Vec<Candidate>, RankError> {
    let mut ok: Vec<(f64, &Candidate)> = Vec::new();
    for c in cands {
        if let Some(v) = c.objective {
            if !v.is_finite() {
                return Err(RankError::NonFiniteObjective(c.eval_index));
            }
            ok.push((direction.key(v), c));
        }
    }
    ok.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.eval_index.cmp(&b.1.eval_index)));
    Ok(ok.into_iter().map(|(_, c)| c.clone()).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Surrogate,
    Simulation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Scripted,
    TrustRegion,
    External,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationSettings {
    pub nodes: u32,
    pub cores_per_node: u32,
    pub time_limit_s: f64,
    pub qoi: QoiParams,
    /// Run the mock solver as a child process instead of in-process.
    pub spawn_process: bool,
    /// Path of the mock-solver binary when `spawn_process` is set.
    pub mocksim_path: Option<PathBuf>,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            nodes: 4,
            cores_per_node: 8,
            time_limit_s: 60.0,
            qoi: QoiParams::default(),
            spawn_process: false,
            mocksim_path: None,
        }
    }
}

fn default_shrink() -> f64 {
    0.5
}

fn default_policy() -> PolicyKind {
    PolicyKind::Scripted
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub name: String,
    /// Defaults to the backend's native design space.
    #[serde(default)]
    pub space: Option<DesignSpace>,
    pub direction: Direction,
    pub backend: Backend,
    pub rounds: usize,
    pub samples_per_round: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_policy")]
    pub policy: PolicyKind,
    #[serde(default = "default_shrink")]
    pub trust_region_shrink: f64,
    #[serde(default)]
    pub approval_required: bool,
    /// Command line of the external proposer process.
    #[serde(default)]
    pub external_command: Option<Vec<String>>,
    /// Where trace, csv, and run directories go.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub simulation: SimulationSettings,
    #[serde(default)]
    pub surrogate: SurrogateConfig,
}

impl StudyConfig {
    pub fn new(name: &str, backend: Backend, direction: Direction, rounds: usize, samples_per_round: usize) -> Self {
        Self {
            name: name.into(),
            space: None,
            direction,
            backend,
            rounds,
            samples_per_round,
            seed: 0,
            policy: PolicyKind::Scripted,
            trust_region_shrink: 0.5,
            approval_required: false,
            external_command: None,
            output_dir: None,
            simulation: SimulationSettings::default(),
            surrogate: SurrogateConfig::default(),
        }
    }

    pub fn resolved_space(&self) -> DesignSpace {
        self.space.clone().unwrap_or_else(|| match self.backend {
            Backend::Surrogate => DesignSpace::new(&[
                ("P1", -P_BOUND, P_BOUND),
                ("P2", -P_BOUND, P_BOUND),
                ("P3", -P_BOUND, P_BOUND),
                ("P4", -P_BOUND, P_BOUND),
            ]),
            Backend::Simulation => DesignSpace::new(&ENERGY_BOUNDS),
        })
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(format!("study name '{}' must be a nonempty file stem", self.name));
        }
        if self.rounds < 1 {
            return Err("rounds must be >= 1".into());
        }
        if self.samples_per_round < 1 {
            return Err("samples_per_round must be >= 1".into());
        }
        if !(self.trust_region_shrink > 0.0 && self.trust_region_shrink < 1.0) {
            return Err("trust_region_shrink must lie in (0, 1)".into());
        }
        self.resolved_space().validate()
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn trace_path(&self) -> PathBuf {
        self.output_dir().join(format!("{}.trace.jsonl", self.name))
    }

    pub fn csv_path(&self) -> PathBuf {
        self.output_dir().join(format!("{}.csv", self.name))
    }
}
