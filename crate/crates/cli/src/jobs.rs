//! Bounded worker pool for solver jobs. Jobs are dispatched in submission
//! order; a job's state only moves forward and never leaves done/failed.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Sender};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        result_id: Option<String>,
        result: Value,
    },
    Failed {
        /// HTTP status describing the failure.
        code: u16,
        error: String,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        conflicts: Vec<Value>,
    },
}

impl JobState {
    pub fn is_terminal(&self) -> bool {
        matches!(self, JobState::Done { .. } | JobState::Failed { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub kind: String,
    #[serde(flatten)]
    pub state: JobState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobFailure {
    pub code: u16,
    pub error: String,
    pub conflicts: Vec<Value>,
}

impl JobFailure {
    pub fn new(code: u16, error: impl Into<String>) -> Self {
        Self { code, error: error.into(), conflicts: Vec::new() }
    }
}

/// What a finished job produced: the id it was stored under, if any, and
/// the document to show.
pub type JobOutput = (Option<String>, Value);
type Work = Box<dyn FnOnce() -> Result<JobOutput, JobFailure> + Send>;

#[derive(Default)]
struct Table {
    next: u64,
    jobs: BTreeMap<String, Job>,
}

struct Shared {
    table: Mutex<Table>,
    changed: Condvar,
}

impl Shared {
    fn set(&self, id: &str, state: JobState) {
        let mut t = self.table.lock().unwrap();
        let job = t.jobs.get_mut(id).expect("job registered before dispatch");
        if !job.state.is_terminal() {
            job.state = state;
        }
        drop(t);
        self.changed.notify_all();
    }
}

#[derive(Clone)]
pub struct JobQueue {
    shared: Arc<Shared>,
    tx: Sender<(String, Work)>,
}

impl JobQueue {
    /// Starts `workers` threads (at least one). Workers exit once every
    /// handle to the queue is dropped.
    pub fn new(workers: usize) -> Self {
        let shared = Arc::new(Shared {
            table: Mutex::new(Table::default()),
            changed: Condvar::new(),
        });
        let (tx, rx) = unbounded::<(String, Work)>();
        for i in 0..workers.max(1) {
            let rx = rx.clone();
            let shared = Arc::clone(&shared);
            thread::Builder::new()
                .name(format!("reparo-worker-{i}"))
                .spawn(move || {
                    for (id, work) in rx {
                        shared.set(&id, JobState::Running);
                        let state = match catch_unwind(AssertUnwindSafe(work)) {
                            Ok(Ok((result_id, result))) => JobState::Done { result_id, result },
                            Ok(Err(f)) => JobState::Failed { code: f.code, error: f.error, conflicts: f.conflicts },
                            Err(panic) => {
                                let msg = panic
                                    .downcast_ref::<&str>()
                                    .map(|s| s.to_string())
                                    .or_else(|| panic.downcast_ref::<String>().cloned())
                                    .unwrap_or_else(|| "job panicked".into());
                                JobState::Failed { code: 500, error: msg, conflicts: Vec::new() }
                            }
                        };
                        shared.set(&id, state);
                    }
                })
                .expect("spawn worker thread");
        }
        Self { shared, tx }
    }

    pub fn submit(&self, kind: &str, work: impl FnOnce() -> Result<JobOutput, JobFailure> + Send + 'static) -> String {
        let id = {
            let mut t = self.shared.table.lock().unwrap();
            t.next += 1;
            let id = format!("job-{}", t.next);
            t.jobs.insert(id.clone(), Job { id: id.clone(), kind: kind.into(), state: JobState::Queued });
            id
        };
        self.tx.send((id.clone(), Box::new(work))).expect("workers outlive the queue handle");
        id
    }

    pub fn get(&self, id: &str) -> Option<Job> {
        self.shared.table.lock().unwrap().jobs.get(id).cloned()
    }

    /// Blocks until the job is terminal or `timeout` passes; returns its
    /// latest state either way.
    pub fn wait(&self, id: &str, timeout: Duration) -> Option<Job> {
        let deadline = Instant::now() + timeout;
        let mut t = self.shared.table.lock().unwrap();
        loop {
            let job = t.jobs.get(id)?;
            let now = Instant::now();
            if job.state.is_terminal() || now >= deadline {
                return Some(job.clone());
            }
            t = self.shared.changed.wait_timeout(t, deadline - now).unwrap().0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    const LONG: Duration = Duration::from_secs(10);

    #[test]
    fn jobs_finish_fail_and_survive_panics() {
        let q = JobQueue::new(2);
        let ok = q.submit("t", || Ok((Some("r-1".into()), json!(1))));
        let bad = q.submit("t", || Err(JobFailure::new(422, "infeasible")));
        let boom = q.submit("t", || panic!("kaboom"));
        assert_eq!(q.wait(&ok, LONG).unwrap().state, JobState::Done { result_id: Some("r-1".into()), result: json!(1) });
        assert!(matches!(q.wait(&bad, LONG).unwrap().state, JobState::Failed { code: 422, .. }));
        match q.wait(&boom, LONG).unwrap().state {
            JobState::Failed { code, error, .. } => assert_eq!((code, error.as_str()), (500, "kaboom")),
            s => panic!("{s:?}"),
        }
        assert!(q.get("job-99").is_none());
    }

    #[test]
    fn terminal_states_do_not_change() {
        let q = JobQueue::new(1);
        let id = q.submit("t", || Ok((None, json!("first"))));
        let done = q.wait(&id, LONG).unwrap();
        q.shared.set(&id, JobState::Running);
        q.shared.set(&id, JobState::Failed { code: 500, error: "late".into(), conflicts: vec![] });
        assert_eq!(q.get(&id).unwrap(), done);
    }

    #[test]
    fn single_worker_runs_in_submission_order() {
        let q = JobQueue::new(1);
        let log = Arc::new(Mutex::new(Vec::new()));
        let ids: Vec<_> = (0..8)
            .map(|i| {
                let log = Arc::clone(&log);
                q.submit("t", move || {
                    log.lock().unwrap().push(i);
                    Ok((None, json!(i)))
                })
            })
            .collect();
        for id in &ids {
            q.wait(id, LONG).unwrap();
        }
        assert_eq!(*log.lock().unwrap(), (0..8).collect::<Vec<_>>());
    }
}
