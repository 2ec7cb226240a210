//! Concurrent stress harness for the scheduler with checks replayed from the
//! transition log rather than trusted from the scheduler's own counters.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use mada::scheduler::{JobId, JobState, ResourceSpec, Scheduler, SchedulerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const NODES: u32 = 4;

pub fn spec(dir: &Path, nodes: u32, limit: f64) -> ResourceSpec {
    ResourceSpec {
        nodes,
        tasks_per_node: 1,
        time_limit_s: limit,
        job_name: "stress".into(),
        working_dir: dir.to_path_buf(),
    }
}

/// `work <ms>` sleeps cooperatively; `fail` exits 1.
pub fn register_payloads(s: &Scheduler) {
    s.register_callable("work", |ctx| {
        let ms: u64 = ctx.args.first().and_then(|a| a.parse().ok()).unwrap_or(0);
        let until = std::time::Instant::now() + Duration::from_millis(ms);
        while std::time::Instant::now() < until {
            if ctx.should_stop() {
                return 130;
            }
            thread::sleep(Duration::from_micros(200));
        }
        0
    });
    s.register_callable("fail", |_| 1);
}

#[derive(Debug, Default)]
pub struct StressReport {
    pub submitted: usize,
    pub rejected: usize,
    pub snapshots: usize,
    pub cancels: usize,
    pub illegal: Vec<String>,
    pub bad_chains: Vec<String>,
    pub torn_snapshots: usize,
    pub peak_replayed: u32,
    pub peak_reported: u32,
    pub fifo_violations: Vec<String>,
    pub duplicate_ids: usize,
    pub non_terminal: usize,
    pub final_states: BTreeMap<String, usize>,
}

impl StressReport {
    pub fn ok(&self) -> bool {
        self.illegal.is_empty()
            && self.bad_chains.is_empty()
            && self.torn_snapshots == 0
            && self.peak_replayed <= NODES
            && self.peak_replayed == self.peak_reported
            && self.fifo_violations.is_empty()
            && self.duplicate_ids == 0
            && self.non_terminal == 0
    }
}

/// Four submitters, two status pollers and one canceller race on one
/// scheduler until `jobs` submissions have been attempted.
pub fn stress(jobs: usize, seed: u64) -> StressReport {
    let dir = tempfile::tempdir().unwrap();
    let s = Scheduler::new(SchedulerConfig::new(NODES, 4));
    register_payloads(&s);
    let ids: Arc<Mutex<Vec<JobId>>> = Arc::new(Mutex::new(Vec::new()));
    let done = Arc::new(AtomicBool::new(false));
    let mut report = StressReport::default();

    let submitters: Vec<_> = (0..4)
        .map(|t| {
            let s = s.clone();
            let ids = ids.clone();
            let wd = dir.path().to_path_buf();
            thread::spawn(move || {
                let mut rng = ChaCha8Rng::seed_from_u64(seed * 31 + t);
                let mut rejected = 0;
                for _ in 0..jobs / 4 {
                    // Occasionally oversized to exercise rejection.
                    let nodes = if rng.random_bool(0.02) { NODES + 1 } else { rng.random_range(1..=NODES) };
                    let payload = if rng.random_bool(0.1) {
                        vec!["fail".to_string()]
                    } else {
                        vec!["work".to_string(), rng.random_range(0..4u32).to_string()]
                    };
                    match s.submit_job(spec(&wd, nodes, 30.0), payload) {
                        Ok(id) => ids.lock().unwrap().push(id),
                        Err(_) => rejected += 1,
                    }
                }
                rejected
            })
        })
        .collect();

    let pollers: Vec<_> = (0..2)
        .map(|_| {
            let s = s.clone();
            let ids = ids.clone();
            let done = done.clone();
            thread::spawn(move || {
                let (mut snaps, mut torn) = (0, 0);
                while !done.load(Ordering::SeqCst) {
                    for r in s.status_all() {
                        snaps += 1;
                        if !r.is_consistent() {
                            torn += 1;
                        }
                    }
                    let last = ids.lock().unwrap().last().copied();
                    if let Some(id) = last {
                        snaps += 1;
                        if !s.status(id).unwrap().is_consistent() {
                            torn += 1;
                        }
                    }
                    thread::sleep(Duration::from_micros(300));
                }
                (snaps, torn)
            })
        })
        .collect();

    let canceller = {
        let s = s.clone();
        let ids = ids.clone();
        let done = done.clone();
        thread::spawn(move || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let mut n = 0;
            while !done.load(Ordering::SeqCst) {
                let pick = {
                    let ids = ids.lock().unwrap();
                    (!ids.is_empty()).then(|| ids[rng.random_range(0..ids.len())])
                };
                if let Some(id) = pick {
                    if rng.random_bool(0.3) {
                        s.cancel_job(id).unwrap();
                        n += 1;
                    }
                }
                thread::sleep(Duration::from_micros(500));
            }
            n
        })
    };

    for h in submitters {
        report.rejected += h.join().unwrap();
    }
    let all: Vec<JobId> = ids.lock().unwrap().clone();
    s.wait_all(&all, Some(Duration::from_secs(120))).unwrap();
    done.store(true, Ordering::SeqCst);
    for h in pollers {
        let (snaps, torn) = h.join().unwrap();
        report.snapshots += snaps;
        report.torn_snapshots += torn;
    }
    report.cancels = canceller.join().unwrap();
    report.submitted = all.len();
    report.duplicate_ids = all.len() - all.iter().collect::<HashSet<_>>().len();
    report.illegal = s.illegal_transitions();
    report.peak_reported = s.peak_nodes_in_use();

    let records: BTreeMap<JobId, _> = s.status_all().into_iter().map(|r| (r.job_id, r)).collect();
    for r in records.values() {
        if !r.state.is_terminal() {
            report.non_terminal += 1;
        }
        *report.final_states.entry(r.state.to_string()).or_default() += 1;
    }

    // Replay the linearized log.
    let log = s.transitions();
    let mut chains: BTreeMap<JobId, Vec<JobState>> = BTreeMap::new();
    let mut pending_order: Vec<JobId> = Vec::new();
    let mut pending: HashSet<JobId> = HashSet::new();
    let mut running: BTreeMap<JobId, u32> = BTreeMap::new();
    for t in &log {
        let nodes = records[&t.job_id].spec.nodes;
        let chain = chains.entry(t.job_id).or_default();
        match (chain.last().copied(), t.from) {
            (None, None) => {}
            (Some(prev), Some(from)) if prev == from && from.can_transition_to(t.to) => {}
            (prev, from) => report
                .bad_chains
                .push(format!("{}: {:?} then {:?} -> {:?}", t.job_id, prev, from, t.to)),
        }
        chain.push(t.to);
        match t.to {
            JobState::Pending => {
                pending_order.push(t.job_id);
                pending.insert(t.job_id);
            }
            JobState::Running => {
                let free = NODES - running.values().sum::<u32>();
                // Every earlier-queued job still waiting must not have fit.
                for k in &pending_order {
                    if *k == t.job_id {
                        break;
                    }
                    if pending.contains(k) && records[k].spec.nodes <= free {
                        report.fifo_violations.push(format!(
                            "{} started with {free} free while earlier {} needing {} waited",
                            t.job_id, k, records[k].spec.nodes
                        ));
                    }
                }
                pending.remove(&t.job_id);
                running.insert(t.job_id, nodes);
                report.peak_replayed = report.peak_replayed.max(running.values().sum());
            }
            s if s.is_terminal() => {
                pending.remove(&t.job_id);
                running.remove(&t.job_id);
            }
            _ => {}
        }
    }
    for (id, chain) in &chains {
        let shape_ok = matches!(
            chain.as_slice(),
            [JobState::Submitted, JobState::Pending, JobState::Cancelled]
                | [JobState::Submitted, JobState::Pending, JobState::Running, _]
        ) && chain.last().unwrap().is_terminal();
        if !shape_ok {
            report.bad_chains.push(format!("{id}: {chain:?}"));
        }
    }
    report
}
