//! Bounded-concurrency execution of generation tasks.

use std::collections::{HashMap, VecDeque};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use super::checkpoint::now;
use super::{
    Checkpoint, CheckpointEntry, GenPipeError, GenerateError, GenerationTask, ImageClient, ImageSize, TaskStatus,
};
use crate::retry::{RetryPolicy, Sleeper, ThreadSleeper};
use crate::templates::Style;

/// Destination for generated image bytes.
pub trait ImageStore: Send + Sync {
    fn put(&self, rel_path: &str, bytes: &[u8]) -> io::Result<()>;
    fn exists(&self, rel_path: &str) -> bool;
}

/// Writes images under a directory via temp file and rename.
#[derive(Debug, Clone)]
pub struct DirStore {
    root: PathBuf,
}

impl DirStore {
    pub fn new(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(DirStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

impl ImageStore for DirStore {
    fn put(&self, rel_path: &str, bytes: &[u8]) -> io::Result<()> {
        let target = self.root.join(rel_path);
        let tmp = self.root.join(format!(".{rel_path}.part"));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &target)
    }

    fn exists(&self, rel_path: &str) -> bool {
        self.root.join(rel_path).is_file()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub concurrency: usize,
    pub retry: RetryPolicy,
    pub image_size: ImageSize,
    /// Seeds backoff jitter.
    pub seed: u64,
    /// Stop recording after this many new terminal tasks, as if the process
    /// had been killed. In-flight results beyond the limit are discarded.
    pub stop_after: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            concurrency: 8,
            retry: RetryPolicy::default(),
            image_size: ImageSize::default(),
            seed: 0,
            stop_after: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockedTask {
    pub task_id: String,
    pub item_id: String,
    pub style: Style,
    pub reason: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunReport {
    pub total: usize,
    pub succeeded: usize,
    pub blocked: usize,
    pub failed: usize,
    /// Tasks left without a terminal status (transient retries exhausted or
    /// run stopped early); a resume picks them up.
    pub pending: usize,
    /// Terminal tasks restored from the checkpoint.
    pub resumed: usize,
    /// Provider calls issued by this invocation.
    pub provider_calls: usize,
    pub moderation_log: Vec<BlockedTask>,
    #[serde(skip)]
    pub tasks: Vec<GenerationTask>,
}

impl RunReport {
    pub fn terminal(&self) -> usize {
        self.succeeded + self.blocked + self.failed
    }
}

enum Outcome {
    Done(GenerationTask),
    StorageFailed(GenerationTask, io::Error),
}

pub struct Runner<'a> {
    client: &'a dyn ImageClient,
    store: &'a dyn ImageStore,
    sleeper: Arc<dyn Sleeper>,
    options: RunOptions,
}

impl<'a> Runner<'a> {
    pub fn new(client: &'a dyn ImageClient, store: &'a dyn ImageStore, options: RunOptions) -> Self {
        Runner {
            client,
            store,
            sleeper: Arc::new(ThreadSleeper),
            options,
        }
    }

    pub fn with_sleeper(mut self, sleeper: Arc<dyn Sleeper>) -> Self {
        self.sleeper = sleeper;
        self
    }

    /// Run every task not already terminal in the checkpoint.
    ///
    /// At most `concurrency` requests are in flight. Transient errors are
    /// retried with backoff up to `max_attempts`; moderation blocks end the
    /// task immediately. Each terminal task is appended to the checkpoint by
    /// this thread alone before the next result is handled.
    pub fn run(
        &self,
        mut tasks: Vec<GenerationTask>,
        checkpoint_path: &Path,
        config_digest: &str,
    ) -> Result<RunReport, GenPipeError> {
        let (checkpoint, mut writer) = Checkpoint::open(checkpoint_path, config_digest)?;
        let mut report = RunReport {
            total: tasks.len(),
            ..RunReport::default()
        };

        let mut queue = VecDeque::new();
        for (i, task) in tasks.iter_mut().enumerate() {
            match checkpoint.completed.get(&task.task_id) {
                Some(entry) if entry.status == TaskStatus::Succeeded && !self.store.exists(&task.image_path) => {
                    warn!("{}: checkpointed image {} is missing; regenerating", task.task_id, task.image_path);
                    queue.push_back(i);
                }
                Some(entry) => {
                    task.status = entry.status;
                    task.attempts = entry.attempts;
                    task.error = entry.error.clone();
                    report.resumed += 1;
                }
                None => queue.push_back(i),
            }
        }
        info!(
            "{} tasks, {} restored from checkpoint, {} to run",
            tasks.len(),
            report.resumed,
            queue.len()
        );

        let calls = AtomicUsize::new(0);
        let stop = AtomicBool::new(false);
        let mut storage_failure = None;
        let mut checkpoint_failure = None;

        if !queue.is_empty() && self.options.stop_after != Some(0) {
            let work: Mutex<VecDeque<GenerationTask>> =
                Mutex::new(queue.iter().map(|&i| tasks[i].clone()).collect());
            let index: HashMap<String, usize> = queue.iter().map(|&i| (tasks[i].task_id.clone(), i)).collect();
            let workers = self.options.concurrency.max(1).min(queue.len());
            let (tx, rx) = mpsc::channel::<Outcome>();

            thread::scope(|scope| {
                for _ in 0..workers {
                    let tx = tx.clone();
                    let (work, calls, stop) = (&work, &calls, &stop);
                    scope.spawn(move || loop {
                        if stop.load(Ordering::SeqCst) {
                            break;
                        }
                        let Some(task) = work.lock().unwrap().pop_front() else {
                            break;
                        };
                        if tx.send(self.execute(task, calls)).is_err() {
                            break;
                        }
                    });
                }
                drop(tx);

                let mut recorded = 0usize;
                for outcome in rx {
                    let halted = stop.load(Ordering::SeqCst);
                    match outcome {
                        Outcome::StorageFailed(task, err) => {
                            stop.store(true, Ordering::SeqCst);
                            if storage_failure.is_none() {
                                storage_failure = Some((task.image_path, err));
                            }
                        }
                        Outcome::Done(task) if halted => {
                            debug!("{}: discarded after stop", task.task_id);
                        }
                        Outcome::Done(task) => {
                            let i = index[&task.task_id];
                            if task.status.is_terminal() {
                                let entry = CheckpointEntry {
                                    task_id: task.task_id.clone(),
                                    status: task.status,
                                    attempts: task.attempts,
                                    image_path: if task.status == TaskStatus::Succeeded {
                                        task.image_path.clone()
                                    } else {
                                        String::new()
                                    },
                                    error: task.error.clone(),
                                    updated_at: now(),
                                };
                                if let Err(e) = writer.append(&entry) {
                                    stop.store(true, Ordering::SeqCst);
                                    checkpoint_failure = Some(e);
                                    continue;
                                }
                                recorded += 1;
                                if Some(recorded) == self.options.stop_after {
                                    stop.store(true, Ordering::SeqCst);
                                }
                            }
                            tasks[i] = task;
                        }
                    }
                }
            });
        }

        if let Some(e) = checkpoint_failure {
            return Err(e);
        }
        if let Some((path, source)) = storage_failure {
            return Err(GenPipeError::Storage { path, source });
        }

        report.provider_calls = calls.load(Ordering::SeqCst);
        for task in &tasks {
            match task.status {
                TaskStatus::Succeeded => report.succeeded += 1,
                TaskStatus::Blocked => {
                    report.blocked += 1;
                    report.moderation_log.push(BlockedTask {
                        task_id: task.task_id.clone(),
                        item_id: task.item_id.clone(),
                        style: task.style,
                        reason: task.error.clone(),
                    });
                }
                TaskStatus::Failed => report.failed += 1,
                TaskStatus::Pending => report.pending += 1,
            }
        }
        report.tasks = tasks;
        Ok(report)
    }

    fn execute(&self, mut task: GenerationTask, calls: &AtomicUsize) -> Outcome {
        let policy = self.options.retry;
        let mut backoff = policy.backoff(self.options.seed, &task.task_id);
        loop {
            task.attempts += 1;
            calls.fetch_add(1, Ordering::SeqCst);
            match self.client.generate(&task.prompt, self.options.image_size) {
                Ok(bytes) => {
                    if let Err(e) = self.store.put(&task.image_path, &bytes) {
                        return Outcome::StorageFailed(task, e);
                    }
                    task.status = TaskStatus::Succeeded;
                    task.error.clear();
                    return Outcome::Done(task);
                }
                Err(GenerateError::Blocked(reason)) => {
                    info!("{} ({} / {}) blocked: {reason}", task.task_id, task.item_id, task.style);
                    task.status = TaskStatus::Blocked;
                    task.error = reason;
                    return Outcome::Done(task);
                }
                Err(GenerateError::Permanent(reason)) => {
                    warn!("{} failed: {reason}", task.task_id);
                    task.status = TaskStatus::Failed;
                    task.error = reason;
                    return Outcome::Done(task);
                }
                Err(GenerateError::Transient(reason)) => {
                    task.error = reason;
                    if task.attempts >= policy.max_attempts {
                        warn!("{}: giving up after {} attempts ({})", task.task_id, task.attempts, task.error);
                        return Outcome::Done(task);
                    }
                    let delay = backoff.next_delay();
                    debug!("{} attempt {} failed; retrying in {delay:?}", task.task_id, task.attempts);
                    self.sleeper.sleep(delay);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genpipe::{plan_tasks, MockImageClient};
    use crate::genpipe::tests::bundle;
    use crate::retry::RecordingSleeper;
    use std::time::Duration;

    fn tasks(n: usize) -> Vec<GenerationTask> {
        let bundles: Vec<_> = (0..n).map(|i| bundle(&format!("asset_{i:03}"), &[Style::Retro])).collect();
        plan_tasks(&bundles).unwrap()
    }

    fn opts(concurrency: usize) -> RunOptions {
        RunOptions { concurrency, ..RunOptions::default() }
    }

    struct Fixture {
        dir: tempfile::TempDir,
        store: DirStore,
    }

    impl Fixture {
        fn new() -> Self {
            let dir = tempfile::tempdir().unwrap();
            let store = DirStore::new(dir.path().join("images")).unwrap();
            Fixture { dir, store }
        }
        fn ckpt(&self) -> PathBuf {
            self.dir.path().join("ckpt.log")
        }
    }

    #[test]
    fn blocked_tasks_are_logged_not_retried() {
        let fx = Fixture::new();
        let mut ts = tasks(10);
        ts[3].prompt.push_str(" TRIGGER");
        ts[7].prompt.push_str(" TRIGGER");
        let client = MockImageClient::new().blocking(["TRIGGER"]);
        let sleeper = Arc::new(RecordingSleeper::default());
        let report = Runner::new(&client, &fx.store, opts(4))
            .with_sleeper(sleeper.clone())
            .run(ts, &fx.ckpt(), "d")
            .unwrap();
        assert_eq!((report.succeeded, report.blocked, report.failed, report.pending), (8, 2, 0, 0));
        assert_eq!(client.calls(), 10);
        assert_eq!(report.moderation_log.len(), 2);
        assert!(report.moderation_log[0].reason.contains("TRIGGER"));
        assert!(sleeper.delays.lock().unwrap().is_empty());
        for t in &report.tasks {
            match t.status {
                TaskStatus::Blocked => assert_eq!(t.attempts, 1),
                TaskStatus::Succeeded => assert!(fx.store.exists(&t.image_path)),
                _ => unreachable!(),
            }
        }
        let cp = Checkpoint::load(&fx.ckpt()).unwrap();
        assert_eq!(cp.completed.len(), 10);
    }

    #[test]
    fn resume_sends_only_remaining_tasks() {
        for k in [1, 7, 19] {
            let fx = Fixture::new();
            let first = MockImageClient::new();
            let options = RunOptions { stop_after: Some(k), ..opts(4) };
            let report = Runner::new(&first, &fx.store, options).run(tasks(20), &fx.ckpt(), "d").unwrap();
            assert_eq!(report.terminal(), k);
            assert_eq!(Checkpoint::load(&fx.ckpt()).unwrap().completed.len(), k);

            let second = MockImageClient::new();
            let report = Runner::new(&second, &fx.store, opts(4)).run(tasks(20), &fx.ckpt(), "d").unwrap();
            assert_eq!(second.calls(), 20 - k);
            assert_eq!(report.resumed, k);
            assert_eq!(report.succeeded, 20);
        }
    }

    #[test]
    fn transient_errors_retry_with_backoff() {
        let fx = Fixture::new();
        let client = MockImageClient::new().flaky(2);
        let sleeper = Arc::new(RecordingSleeper::default());
        let report = Runner::new(&client, &fx.store, opts(1))
            .with_sleeper(sleeper.clone())
            .run(tasks(3), &fx.ckpt(), "d")
            .unwrap();
        assert_eq!(report.succeeded, 3);
        assert_eq!(client.calls(), 9);
        assert!(report.tasks.iter().all(|t| t.attempts == 3));
        let delays = sleeper.delays.lock().unwrap();
        assert_eq!(delays.len(), 6);
        assert!(delays.iter().all(|d| *d <= Duration::from_secs(4)));
    }

    #[test]
    fn exhausted_retries_stay_pending_and_unrecorded() {
        let fx = Fixture::new();
        let client = MockImageClient::new().flaky(100);
        let options = RunOptions { retry: RetryPolicy::default().with_max_attempts(2), ..opts(2) };
        let report = Runner::new(&client, &fx.store, options)
            .with_sleeper(Arc::new(RecordingSleeper::default()))
            .run(tasks(3), &fx.ckpt(), "d")
            .unwrap();
        assert_eq!(report.pending, 3);
        assert_eq!(client.calls(), 6);
        assert!(report.tasks.iter().all(|t| t.attempts == 2));
        assert!(Checkpoint::load(&fx.ckpt()).unwrap().completed.is_empty());
    }

    #[test]
    fn permanent_errors_fail_once() {
        let fx = Fixture::new();
        let mut ts = tasks(2);
        ts[0].prompt.push_str(" BAD");
        let client = MockImageClient::new().rejecting(["BAD"]);
        let report = Runner::new(&client, &fx.store, opts(2)).run(ts, &fx.ckpt(), "d").unwrap();
        assert_eq!((report.succeeded, report.failed), (1, 1));
        assert_eq!(client.calls(), 2);
    }

    #[test]
    fn empty_run_writes_empty_checkpoint() {
        let fx = Fixture::new();
        let client = MockImageClient::new();
        let report = Runner::new(&client, &fx.store, opts(8)).run(vec![], &fx.ckpt(), "d").unwrap();
        assert_eq!(report.total, 0);
        let cp = Checkpoint::load(&fx.ckpt()).unwrap();
        assert_eq!(cp.config_digest, "d");
        assert!(cp.completed.is_empty());
    }

    #[test]
    fn config_mismatch_is_rejected() {
        let fx = Fixture::new();
        let client = MockImageClient::new();
        Runner::new(&client, &fx.store, opts(1)).run(tasks(1), &fx.ckpt(), "one").unwrap();
        let err = Runner::new(&client, &fx.store, opts(1)).run(tasks(1), &fx.ckpt(), "two").unwrap_err();
        assert!(matches!(err, GenPipeError::ConfigMismatch { .. }));
    }

    #[test]
    fn missing_image_is_regenerated() {
        let fx = Fixture::new();
        let client = MockImageClient::new();
        let report = Runner::new(&client, &fx.store, opts(2)).run(tasks(3), &fx.ckpt(), "d").unwrap();
        fs::remove_file(fx.store.root().join(&report.tasks[1].image_path)).unwrap();
        let again = MockImageClient::new();
        let report = Runner::new(&again, &fx.store, opts(2)).run(tasks(3), &fx.ckpt(), "d").unwrap();
        assert_eq!(again.calls(), 1);
        assert_eq!(report.succeeded, 3);
    }

    struct FailingStore;

    impl ImageStore for FailingStore {
        fn put(&self, _: &str, _: &[u8]) -> io::Result<()> {
            Err(io::Error::other("disk full"))
        }
        fn exists(&self, _: &str) -> bool {
            false
        }
    }

    #[test]
    fn storage_failure_aborts_with_checkpoint_intact() {
        let fx = Fixture::new();
        let client = MockImageClient::new();
        Runner::new(&client, &fx.store, opts(1)).run(tasks(2), &fx.ckpt(), "d").unwrap();
        let before = fs::read_to_string(fx.ckpt()).unwrap();
        let mut more = tasks(4);
        more.drain(..2);
        let err = Runner::new(&client, &FailingStore, opts(2)).run(more, &fx.ckpt(), "d").unwrap_err();
        assert!(matches!(err, GenPipeError::Storage { .. }));
        let cp = Checkpoint::load(&fx.ckpt()).unwrap();
        assert_eq!(cp.completed.len(), 2);
        assert_eq!(fs::read_to_string(fx.ckpt()).unwrap(), before);
    }

    struct GaugeClient {
        active: AtomicUsize,
        peak: AtomicUsize,
    }

    impl ImageClient for GaugeClient {
        fn generate(&self, _: &str, _: ImageSize) -> Result<Vec<u8>, GenerateError> {
            let now = self.active.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            thread::sleep(Duration::from_millis(5));
            self.active.fetch_sub(1, Ordering::SeqCst);
            Ok(vec![1])
        }
    }

    #[test]
    fn in_flight_requests_are_bounded() {
        let fx = Fixture::new();
        let client = GaugeClient { active: AtomicUsize::new(0), peak: AtomicUsize::new(0) };
        let report = Runner::new(&client, &fx.store, opts(3)).run(tasks(24), &fx.ckpt(), "d").unwrap();
        assert_eq!(report.succeeded, 24);
        let peak = client.peak.load(Ordering::SeqCst);
        assert!((1..=3).contains(&peak), "peak {peak}");
    }
}
