//! Proposer policies: where the next round's designs come from.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::lhs::{lhs_sample, lhs_with_rng};
use super::model::{Candidate, PolicyKind, Provenance, Round, StudyConfig};
use super::space::{DesignSpace, Direction};

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("policy unavailable: {0}")]
    PolicyUnavailable(String),
    #[error("external policy protocol error: {0}")]
    Protocol(String),
}

pub struct ProposalContext<'a> {
    /// 1-based index of the round being proposed.
    pub round: usize,
    pub n: usize,
    pub space: &'a DesignSpace,
    pub direction: Direction,
    pub history: &'a [Round],
    pub incumbent: Option<&'a Candidate>,
    pub seed: u64,
}

impl ProposalContext<'_> {
    fn round_seed(&self) -> u64 {
        self.seed.wrapping_mul(1_000_003).wrapping_add(self.round as u64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub designs: Vec<Vec<f64>>,
    pub note: String,
    pub provenance: Provenance,
}

pub trait Policy: Send {
    fn name(&self) -> &'static str;
    fn propose(&mut self, ctx: &ProposalContext<'_>) -> Result<Proposal, PolicyError>;
}

pub fn build_policy(cfg: &StudyConfig) -> Result<Box<dyn Policy>, PolicyError> {
    Ok(match cfg.policy {
        PolicyKind::Scripted => Box::new(ScriptedPolicy),
        PolicyKind::TrustRegion => Box::new(TrustRegionPolicy::new(cfg.trust_region_shrink)),
        PolicyKind::External => {
            let cmd = cfg
                .external_command
                .clone()
                .filter(|c| !c.is_empty())
                .ok_or_else(|| PolicyError::PolicyUnavailable("no external_command configured".into()))?;
            Box::new(ExternalPolicy::spawn(&cmd)?)
        }
    })
}

/// Map a pattern in normalized units `[-1, 1]` onto the space, clipped.
fn from_unit(space: &DesignSpace, u: &[f64]) -> Vec<f64> {
    let x: Vec<f64> = (0..space.dim())
        .map(|i| {
            let ui = u[i % u.len()];
            space.lower[i] + 0.5 * (ui + 1.0) * space.range(i)
        })
        .collect();
    space.clip(&x)
}

fn to_unit(space: &DesignSpace, x: &[f64]) -> Vec<f64> {
    (0..space.dim())
        .map(|i| 2.0 * (x[i] - space.lower[i]) / space.range(i) - 1.0)
        .collect()
}

/// Round 1 exploration patterns, in normalized units.
const EXPLORE: [[f64; 4]; 10] = [
    [-0.88, 0.88, -0.88, 0.88],
    [1.0, 1.0, 1.0, 1.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.88, -0.88, 0.88, -0.88],
    [-1.0, -1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0, 1.0],
    [0.4, 0.0, -0.4, 0.0],
    [0.6, 0.2, -0.2, -0.6],
    [0.8, -0.4, 0.4, -0.8],
];

/// Round 2 patterns: alternations pushed to the bounds.
const SATURATE: [[f64; 4]; 8] = [
    [1.0, -1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0, 1.0],
    [1.0, -1.0, -1.0, 1.0],
    [-1.0, 1.0, 1.0, -1.0],
    [1.0, -1.0, 1.0, 1.0],
    [-1.0, -1.0, 1.0, -1.0],
    [1.0, 1.0, -1.0, 1.0],
    [-1.0, 1.0, -1.0, -1.0],
];

/// Round 3 micro-perturbation steps as fractions of each range
/// (0.01 to 0.03 on a range of 0.5).
const MICRO_STEPS: [f64; 3] = [0.02, 0.04, 0.06];

/// Fixed pattern sequence: diverse exploration, then bound-saturated
/// alternations, then small moves around the incumbent. Any shortfall is
/// filled by a seeded Latin hypercube.
#[derive(Debug, Default)]
pub struct ScriptedPolicy;

impl ScriptedPolicy {
    fn patterns(ctx: &ProposalContext<'_>) -> (Vec<Vec<f64>>, String) {
        let space = ctx.space;
        match ctx.round {
            1 => (
                EXPLORE.iter().map(|u| from_unit(space, u)).collect(),
                "explore diverse patterns: alternating signs, uniform extremes, zero, mixed".into(),
            ),
            2 => {
                let mut out = Vec::new();
                if let Some(inc) = ctx.incumbent {
                    let sat: Vec<f64> = to_unit(space, &inc.design)
                        .iter()
                        .map(|u| if *u < 0.0 { -1.0 } else { 1.0 })
                        .collect();
                    let neg: Vec<f64> = sat.iter().map(|u| -u).collect();
                    out.push(from_unit(space, &sat));
                    out.push(from_unit(space, &neg));
                }
                out.extend(SATURATE.iter().map(|u| from_unit(space, u)));
                (out, "push the leading pattern and its alternations to the bounds".into())
            }
            _ => {
                let Some(inc) = ctx.incumbent else {
                    return (Vec::new(), "no incumbent yet; sampling".into());
                };
                let dim = space.dim();
                let out = (0..ctx.n)
                    .map(|k| {
                        let j = k % dim;
                        let step = MICRO_STEPS[(k / (2 * dim)) % MICRO_STEPS.len()];
                        let sign = if (k / dim) % 2 == 0 { -1.0 } else { 1.0 };
                        let mut x = inc.design.clone();
                        x[j] += sign * step * space.range(j);
                        space.clip(&x)
                    })
                    .collect();
                (out, "refine the incumbent with small single-coordinate moves".into())
            }
        }
    }
}

impl Policy for ScriptedPolicy {
    fn name(&self) -> &'static str {
        "scripted"
    }

    fn propose(&mut self, ctx: &ProposalContext<'_>) -> Result<Proposal, PolicyError> {
        let (mut designs, note) = Self::patterns(ctx);
        designs.truncate(ctx.n);
        if designs.len() < ctx.n {
            designs.extend(lhs_sample(ctx.space, ctx.n - designs.len(), ctx.round_seed()));
        }
        Ok(Proposal {
            designs,
            note,
            provenance: Provenance::Policy,
        })
    }
}

/// Latin hypercube in a box around the incumbent whose half-width shrinks
/// geometrically with every completed round.
#[derive(Debug)]
pub struct TrustRegionPolicy {
    pub shrink: f64,
}

impl TrustRegionPolicy {
    pub fn new(shrink: f64) -> Self {
        Self { shrink }
    }

    /// The clipped box used after `completed` rounds.
    pub fn region(&self, space: &DesignSpace, center: &[f64], completed: usize) -> DesignSpace {
        let f = self.shrink.powi(completed as i32);
        let mut lower = Vec::with_capacity(space.dim());
        let mut upper = Vec::with_capacity(space.dim());
        for i in 0..space.dim() {
            let hw = f * 0.5 * space.range(i);
            let mut lo = (center[i] - hw).max(space.lower[i]);
            let mut hi = (center[i] + hw).min(space.upper[i]);
            if !(lo < hi) {
                // Degenerate after clipping: keep a sliver inside the bounds.
                lo = (hi - hw).max(space.lower[i]);
                hi = (lo + hw).min(space.upper[i]);
            }
            lower.push(lo);
            upper.push(hi);
        }
        DesignSpace {
            names: space.names.clone(),
            lower,
            upper,
        }
    }
}

impl Policy for TrustRegionPolicy {
    fn name(&self) -> &'static str {
        "trust_region"
    }

    fn propose(&mut self, ctx: &ProposalContext<'_>) -> Result<Proposal, PolicyError> {
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.round_seed());
        let Some(inc) = ctx.incumbent.filter(|_| ctx.round > 1) else {
            return Ok(Proposal {
                designs: lhs_with_rng(ctx.space, ctx.n, &mut rng),
                note: "latin hypercube over the full space".into(),
                provenance: Provenance::Lhs,
            });
        };
        let completed = ctx.round - 1;
        let region = self.region(ctx.space, &inc.design, completed);
        let designs = lhs_with_rng(&region, ctx.n, &mut rng)
            .into_iter()
            .map(|x| ctx.space.clip(&x))
            .collect();
        Ok(Proposal {
            designs,
            note: format!(
                "trust region around eval {} with half-width factor {:.4}",
                inc.eval_index,
                self.shrink.powi(completed as i32)
            ),
            provenance: Provenance::Policy,
        })
    }
}

/// Reply line expected from an external proposer.
#[derive(Debug, Deserialize)]
struct ExternalReply {
    proposals: Vec<Vec<f64>>,
    #[serde(default)]
    note: String,
}

/// Delegates proposals to a child process speaking one JSON object per line.
pub struct ExternalPolicy {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl ExternalPolicy {
    pub fn spawn(argv: &[String]) -> Result<Self, PolicyError> {
        let mut child = Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| PolicyError::PolicyUnavailable(format!("{}: {e}", argv[0])))?;
        let stdin = child.stdin.take().expect("piped");
        let stdout = BufReader::new(child.stdout.take().expect("piped"));
        Ok(Self { child, stdin, stdout })
    }
}

impl Drop for ExternalPolicy {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Policy for ExternalPolicy {
    fn name(&self) -> &'static str {
        "external"
    }

    fn propose(&mut self, ctx: &ProposalContext<'_>) -> Result<Proposal, PolicyError> {
        let rounds: Vec<_> = ctx
            .history
            .iter()
            .map(|r| {
                json!({
                    "index": r.index,
                    "note": r.note,
                    "incumbent": r.incumbent,
                    "evaluations": r.candidates.iter().map(|c| json!({
                        "design": c.design, "objective": c.objective, "eval_index": c.eval_index,
                    })).collect::<Vec<_>>(),
                })
            })
            .collect();
        let req = json!({
            "round": ctx.round,
            "n": ctx.n,
            "direction": ctx.direction,
            "space": ctx.space,
            "incumbent": ctx.incumbent,
            "history": rounds,
        });
        let io = |e: std::io::Error| PolicyError::PolicyUnavailable(e.to_string());
        writeln!(self.stdin, "{req}").map_err(io)?;
        self.stdin.flush().map_err(io)?;
        let mut line = String::new();
        if self.stdout.read_line(&mut line).map_err(io)? == 0 {
            return Err(PolicyError::PolicyUnavailable("external policy exited".into()));
        }
        let reply: ExternalReply =
            serde_json::from_str(line.trim()).map_err(|e| PolicyError::Protocol(e.to_string()))?;
        let mut designs: Vec<Vec<f64>> = reply
            .proposals
            .into_iter()
            .filter(|d| d.len() == ctx.space.dim())
            .map(|d| ctx.space.clip(&d))
            .collect();
        designs.truncate(ctx.n);
        if designs.len() < ctx.n {
            designs.extend(lhs_sample(ctx.space, ctx.n - designs.len(), ctx.round_seed()));
        }
        Ok(Proposal {
            designs,
            note: reply.note,
            provenance: Provenance::Policy,
        })
    }
}
