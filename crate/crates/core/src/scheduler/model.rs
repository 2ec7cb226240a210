use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceSpec {
    pub nodes: u32,
    pub tasks_per_node: u32,
    pub time_limit_s: f64,
    pub job_name: String,
    pub working_dir: PathBuf,
}

impl ResourceSpec {
    pub fn single_node(job_name: impl Into<String>, working_dir: impl Into<PathBuf>, time_limit_s: f64) -> Self {
        Self {
            nodes: 1,
            tasks_per_node: 1,
            time_limit_s,
            job_name: job_name.into(),
            working_dir: working_dir.into(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.nodes < 1 {
            return Err("nodes must be >= 1".into());
        }
        if self.tasks_per_node < 1 {
            return Err("tasks_per_node must be >= 1".into());
        }
        if !(self.time_limit_s > 0.0) || !self.time_limit_s.is_finite() {
            return Err("time_limit_s must be a positive finite number".into());
        }
        Ok(())
    }
}

/// Opaque job identifier, rendered `job-NNNNNN`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JobId(pub u64);

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "job-{:06}", self.0)
    }
}

impl FromStr for JobId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix("job-")
            .and_then(|n| n.parse().ok())
            .map(JobId)
            .ok_or_else(|| format!("malformed job id '{s}'"))
    }
}

impl Serialize for JobId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for JobId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JobState {
    Submitted,
    Pending,
    Running,
    Completed,
    Failed,
    Timeout,
    Cancelled,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            JobState::Completed | JobState::Failed | JobState::Timeout | JobState::Cancelled
        )
    }

    /// Submitted→Pending→Running→{Completed|Failed|Timeout|Cancelled}, plus Pending→Cancelled.
    pub fn can_transition_to(self, to: JobState) -> bool {
        use JobState::*;
        matches!(
            (self, to),
            (Submitted, Pending)
                | (Pending, Running)
                | (Pending, Cancelled)
                | (Running, Completed)
                | (Running, Failed)
                | (Running, Timeout)
                | (Running, Cancelled)
        )
    }
}

impl fmt::Display for JobState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: JobId,
    pub spec: ResourceSpec,
    /// Command followed by its arguments.
    pub payload: Vec<String>,
    pub state: JobState,
    pub submit_ts: f64,
    pub start_ts: Option<f64>,
    pub end_ts: Option<f64>,
    pub exit_code: Option<i32>,
    pub stdout_path: PathBuf,
    pub stderr_path: PathBuf,
}

impl JobRecord {
    pub fn status(&self) -> JobStatus {
        JobStatus {
            job_id: self.job_id,
            name: self.spec.job_name.clone(),
            state: self.state,
            submit_ts: self.submit_ts,
            start_ts: self.start_ts,
            end_ts: self.end_ts,
            exit_code: self.exit_code,
        }
    }

    /// State agrees with which timestamps are set.
    pub fn is_consistent(&self) -> bool {
        let ts_ok = match (self.start_ts, self.end_ts) {
            (Some(s), Some(e)) => s <= e && self.submit_ts <= s,
            (Some(s), None) => self.submit_ts <= s,
            (None, Some(e)) => self.submit_ts <= e,
            (None, None) => true,
        };
        let shape_ok = match self.state {
            JobState::Submitted | JobState::Pending => {
                self.start_ts.is_none() && self.end_ts.is_none() && self.exit_code.is_none()
            }
            JobState::Running => self.start_ts.is_some() && self.end_ts.is_none(),
            JobState::Cancelled => self.end_ts.is_some(),
            JobState::Completed | JobState::Failed | JobState::Timeout => {
                self.start_ts.is_some() && self.end_ts.is_some() && self.exit_code.is_some()
            }
        };
        ts_ok && shape_ok
    }
}

/// Wire form of a job snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub job_id: JobId,
    pub name: String,
    pub state: JobState,
    pub submit_ts: f64,
    pub start_ts: Option<f64>,
    pub end_ts: Option<f64>,
    pub exit_code: Option<i32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub node_count: u32,
    pub cores_per_node: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunDescription {
    pub run_id: String,
    pub working_dir: PathBuf,
    pub deck_path: PathBuf,
    pub resource: ResourceSpec,
    pub command: Vec<String>,
}
