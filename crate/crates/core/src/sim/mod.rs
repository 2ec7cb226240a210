//! Deterministic stand-in for a hydrodynamics backend: run-deck staging, a
//! mock solver emitting tracer diagnostics, and the quantity of interest.
//!
//! The mock solver reads a flat JSON deck and integrates the clamped
//! sinusoidal energy profile
//!
//! ```text
//! e(x) = max(0, 0.1 + a1·sin(2π·a2·x + a3) + a4),   x in [0, 1]
//! ```
//!
//! with midpoint quadrature, then maps the first sine moment `A` and the
//! total energy `E` to tracer positions and velocities.

pub mod tools;

use std::f64::consts::TAU;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::scheduler::{JobContext, ResourceSpec, RunDescription, Scheduler};

pub use tools::sim_server;

pub const DECK_FILE: &str = "deck.json";
pub const DIAGNOSTICS_FILE: &str = "tracers.json";
/// Command name of the mock solver, as a binary and as an in-process callable.
pub const MOCKSIM_COMMAND: &str = "mada-mocksim";
pub const QUADRATURE_POINTS: usize = 256;
pub const BASE_ENERGY: f64 = 0.1;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("design {index}: {field} = {value} outside [{lo}, {hi}]")]
    OutOfBounds {
        index: usize,
        field: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("cannot parse deck {path}: {reason}")]
    DeckParse { path: PathBuf, reason: String },
    #[error("no diagnostics in {0}")]
    MissingDiagnostics(PathBuf),
    #[error("non-finite diagnostics in {0}")]
    NonFiniteDiagnostics(PathBuf),
    #[error("i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SimError + '_ {
    move |source| SimError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parameter names and closed bounds, in design-vector order.
pub const ENERGY_BOUNDS: [(&str, f64, f64); 4] = [
    ("a1", 0.0, 0.2),
    ("a2", 0.5, 3.0),
    ("a3", 0.0, TAU),
    ("a4", -0.05, 0.2),
];

/// Amplitude, wavenumber, phase, and offset of the energy perturbation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyDesign {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
}

impl EnergyDesign {
    pub fn from_slice(v: &[f64]) -> Option<Self> {
        match *v {
            [a1, a2, a3, a4] => Some(Self { a1, a2, a3, a4 }),
            _ => None,
        }
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.a1, self.a2, self.a3, self.a4]
    }

    pub fn check_bounds(&self, index: usize) -> Result<(), SimError> {
        for (value, (field, lo, hi)) in self.to_vec().into_iter().zip(ENERGY_BOUNDS) {
            if !(lo..=hi).contains(&value) {
                return Err(SimError::OutOfBounds {
                    index,
                    field,
                    value,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deck {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub quadrature_points: usize,
}

impl Deck {
    pub fn new(d: EnergyDesign) -> Self {
        Self {
            a1: d.a1,
            a2: d.a2,
            a3: d.a3,
            a4: d.a4,
            quadrature_points: QUADRATURE_POINTS,
        }
    }

    pub fn design(&self) -> EnergyDesign {
        EnergyDesign {
            a1: self.a1,
            a2: self.a2,
            a3: self.a3,
            a4: self.a4,
        }
    }

    pub fn read(path: &Path) -> Result<Self, SimError> {
        let text = fs::read_to_string(path).map_err(|e| SimError::DeckParse {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let deck: Deck = serde_json::from_str(&text).map_err(|e| SimError::DeckParse {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        if deck.quadrature_points == 0 {
            return Err(SimError::DeckParse {
                path: path.to_path_buf(),
                reason: "quadrature_points must be positive".into(),
            });
        }
        Ok(deck)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracerDiagnostics {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
}

impl TracerDiagnostics {
    pub fn is_finite(&self) -> bool {
        [self.x1, self.x2, self.x3, self.v1, self.v2, self.v3]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QoiParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub delta: f64,
}

impl Default for QoiParams {
    fn default() -> Self {
        Self {
            lambda1: 30.0,
            lambda2: 4.0,
            delta: 1.0,
        }
    }
}

pub fn energy_density(d: &EnergyDesign, x: f64) -> f64 {
    (BASE_ENERGY + d.a1 * (TAU * d.a2 * x + d.a3).sin() + d.a4).max(0.0)
}

/// `(A, E)`: the first sine moment and the integral of the energy profile.
///
/// Midpoints `x` and `1 - x` share one sine value with opposite signs, so a
/// profile symmetric about the centre gives `A == 0` exactly.
pub fn energy_moments(d: &EnergyDesign, points: usize) -> (f64, f64) {
    let h = 1.0 / points as f64;
    let x = |i: usize| (i as f64 + 0.5) * h;
    let mut a = 0.0;
    let mut e = 0.0;
    for i in 0..points / 2 {
        let j = points - 1 - i;
        let (ei, ej) = (energy_density(d, x(i)), energy_density(d, x(j)));
        e += ei + ej;
        a += (TAU * x(i)).sin() * (ei - ej);
    }
    if points % 2 == 1 {
        // The middle sample sits at x = 1/2 where the weight vanishes.
        e += energy_density(d, 0.5);
    }
    (a * h, e * h)
}

pub fn tracers(d: &EnergyDesign, points: usize) -> TracerDiagnostics {
    let (a, e) = energy_moments(d, points);
    let x = 0.05 * a;
    let v = -0.5 * e;
    TracerDiagnostics {
        x1: x,
        x2: x + 0.8 * a * a,
        x3: x,
        v1: v,
        v2: v,
        v3: v,
    }
}

/// Lower is better.
pub fn qoi(t: &TracerDiagnostics, p: &QoiParams) -> f64 {
    let x_outer = 0.5 * (t.x1 + t.x3);
    let v_ave = (t.v1 + t.v2 + t.v3) / 3.0;
    0.5 * p.lambda1 * (t.x2 - x_outer).powi(2) + p.lambda2 / (p.delta + v_ave.abs())
}

/// Direct evaluation without touching the filesystem.
pub fn evaluate_design(d: &EnergyDesign, p: &QoiParams) -> f64 {
    qoi(&tracers(d, QUADRATURE_POINTS), p)
}

fn diagnostics_bytes(t: &TracerDiagnostics) -> String {
    serde_json::to_string_pretty(t).expect("plain struct") + "\n"
}

/// Run the mock solver on a deck; writes the diagnostics next to it.
pub fn mock_sim(deck_path: &Path) -> Result<TracerDiagnostics, SimError> {
    let deck = Deck::read(deck_path)?;
    let t = tracers(&deck.design(), deck.quadrature_points);
    let out = deck_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(DIAGNOSTICS_FILE);
    fs::write(&out, diagnostics_bytes(&t)).map_err(io_err(&out))?;
    Ok(t)
}

pub fn read_diagnostics(working_dir: &Path) -> Result<TracerDiagnostics, SimError> {
    let path = working_dir.join(DIAGNOSTICS_FILE);
    let text = fs::read_to_string(&path).map_err(|_| SimError::MissingDiagnostics(path.clone()))?;
    let t: TracerDiagnostics =
        serde_json::from_str(&text).map_err(|_| SimError::MissingDiagnostics(path.clone()))?;
    if !t.is_finite() {
        return Err(SimError::NonFiniteDiagnostics(path));
    }
    Ok(t)
}

pub fn get_qoi(working_dir: &Path, p: &QoiParams) -> Result<f64, SimError> {
    Ok(qoi(&read_diagnostics(working_dir)?, p))
}

/// Per-run resources used when staging decks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StagingOptions {
    pub nodes: u32,
    pub tasks_per_node: u32,
    pub time_limit_s: f64,
    /// First index used in `run_NNNN` names.
    pub first_index: usize,
}

impl Default for StagingOptions {
    fn default() -> Self {
        Self {
            nodes: 1,
            tasks_per_node: 1,
            time_limit_s: 60.0,
            first_index: 0,
        }
    }
}

pub fn run_name(index: usize) -> String {
    format!("run_{index:04}")
}

/// Stage one deck per design. All designs are bounds-checked before any
/// directory is created.
pub fn generate_runs(
    designs: &[EnergyDesign],
    staging_dir: &Path,
    opts: &StagingOptions,
) -> Result<Vec<RunDescription>, SimError> {
    for (i, d) in designs.iter().enumerate() {
        d.check_bounds(i)?;
    }
    let mut runs = Vec::with_capacity(designs.len());
    for (i, d) in designs.iter().enumerate() {
        let run_id = run_name(opts.first_index + i);
        let wd = staging_dir.join(&run_id);
        fs::create_dir_all(&wd).map_err(io_err(&wd))?;
        let deck_path = wd.join(DECK_FILE);
        let text = serde_json::to_string_pretty(&Deck::new(*d)).expect("plain struct");
        fs::write(&deck_path, text).map_err(io_err(&deck_path))?;
        runs.push(RunDescription {
            resource: ResourceSpec {
                nodes: opts.nodes,
                tasks_per_node: opts.tasks_per_node,
                time_limit_s: opts.time_limit_s,
                job_name: run_id.clone(),
                working_dir: wd.clone(),
            },
            // Relative to the run directory, which is the solver's cwd.
            command: vec![MOCKSIM_COMMAND.into(), DECK_FILE.into()],
            run_id,
            working_dir: wd,
            deck_path,
        });
    }
    Ok(runs)
}

/// Scheduler payload wrapping [`mock_sim`]; args are `[deck_path]`.
pub fn mock_sim_job(ctx: &mut JobContext) -> i32 {
    use std::io::Write;
    let Some(deck) = ctx.args.first() else {
        let _ = writeln!(ctx.stderr, "usage: {MOCKSIM_COMMAND} <deck_path>");
        return 2;
    };
    let path = ctx.working_dir.join(deck);
    match mock_sim(&path) {
        Ok(t) => {
            let _ = writeln!(ctx.stdout, "{}", serde_json::to_string(&t).unwrap());
            0
        }
        Err(e) => {
            let _ = writeln!(ctx.stderr, "{e}");
            1
        }
    }
}

/// Serve the mock solver in-process so ensembles need no external binary.
pub fn register_mock_sim(sched: &Scheduler) {
    sched.register_callable(MOCKSIM_COMMAND, mock_sim_job);
}
