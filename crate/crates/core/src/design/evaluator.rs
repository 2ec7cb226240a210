//! Objective evaluators for the two backends.

use std::path::PathBuf;

use super::space::Direction;
use super::study::Evaluator;
use crate::scheduler::{JobState, Scheduler, SchedulerConfig};
use crate::sim::{self, EnergyDesign, QoiParams, StagingOptions};
use crate::surrogate::{get_objective, SplineDesign, SurrogateConfig};

#[derive(Debug, Clone)]
pub struct SurrogateEvaluator {
    pub config: SurrogateConfig,
    pub direction: Direction,
}

impl Evaluator for SurrogateEvaluator {
    fn evaluate(&mut self, batch: &[(usize, Vec<f64>)]) -> Vec<Result<f64, String>> {
        batch
            .iter()
            .map(|(_, d)| {
                let d = SplineDesign::from_slice(d).map_err(|e| e.to_string())?;
                get_objective(&d, self.direction, &self.config).map_err(|e| e.to_string())
            })
            .collect()
    }
}

/// Stages decks, runs them through the scheduler, and reads back the QoI.
/// Run directories are named after the evaluation index.
#[derive(Debug, Clone)]
pub struct SimulationEvaluator {
    pub scheduler: Scheduler,
    pub staging_dir: PathBuf,
    pub qoi: QoiParams,
    pub time_limit_s: f64,
    /// Replaces the mock-solver command, e.g. with a path to its binary.
    pub command: Option<PathBuf>,
}

impl SimulationEvaluator {
    /// A private scheduler with the mock solver served in-process.
    pub fn in_process(nodes: u32, cores: u32, staging_dir: PathBuf) -> Self {
        let scheduler = Scheduler::new(SchedulerConfig::new(nodes, cores));
        sim::register_mock_sim(&scheduler);
        Self {
            scheduler,
            staging_dir,
            qoi: QoiParams::default(),
            time_limit_s: 60.0,
            command: None,
        }
    }
}

impl Evaluator for SimulationEvaluator {
    fn evaluate(&mut self, batch: &[(usize, Vec<f64>)]) -> Vec<Result<f64, String>> {
        // Stage everything first, then run the batch as one ensemble.
        let mut out: Vec<Result<f64, String>> = Vec::with_capacity(batch.len());
        let mut runs = Vec::new();
        for (idx, d) in batch {
            let staged = EnergyDesign::from_slice(d)
                .ok_or_else(|| format!("eval {idx}: expected 4 values"))
                .and_then(|design| {
                    let opts = StagingOptions {
                        time_limit_s: self.time_limit_s,
                        first_index: *idx,
                        ..Default::default()
                    };
                    sim::generate_runs(&[design], &self.staging_dir, &opts).map_err(|e| e.to_string())
                });
            match staged {
                Ok(mut r) => {
                    let mut run = r.remove(0);
                    if let Some(cmd) = &self.command {
                        run.command[0] = cmd.display().to_string();
                    }
                    runs.push(run);
                    out.push(Ok(f64::NAN));
                }
                Err(e) => out.push(Err(e)),
            }
        }
        let summary = self.scheduler.execute_generated_runs(&runs);
        for ((idx, _), res) in batch.iter().zip(out.iter_mut()) {
            if res.is_err() {
                continue;
            }
            let run_id = sim::run_name(*idx);
            let outcome = summary.runs.iter().find(|r| r.run_id == run_id);
            *res = match outcome {
                Some(o) if o.state == JobState::Completed => {
                    sim::get_qoi(&self.staging_dir.join(&run_id), &self.qoi).map_err(|e| e.to_string())
                }
                Some(o) => Err(format!("{run_id} ended {}", o.state)),
                None => Err(summary
                    .rejected
                    .iter()
                    .find(|r| r.run_id == run_id)
                    .map_or_else(|| format!("{run_id} was not run"), |r| r.reason.clone())),
            };
        }
        out
    }
}
