use std::any::Any;
use std::cell::{Cell, RefCell};
use std::collections::VecDeque;
use std::marker::PhantomData;
use std::ops::Range;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_deque::{Injector, Steal, Stealer, Worker};
use crossbeam_utils::CachePadded;
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use super::tracker::{DependenceEdge, DependencyTracker, TaskHandle, TaskId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuntimeError {
    #[error("a runtime needs at least one worker")]
    NoWorkers,
    #[error("no task completed for {waited:?} with {pending} task(s) outstanding")]
    Stalled { pending: usize, waited: Duration },
    #[error("failed to spawn worker thread: {0}")]
    Spawn(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Schedule {
    /// `T` contiguous near-equal chunks, chunk `i` on worker `i`.
    Static,
    /// Fixed-size chunks claimed in order by whichever worker is free.
    Dynamic(usize),
}

impl std::fmt::Display for Schedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Schedule::Static => f.write_str("static"),
            Schedule::Dynamic(c) => write!(f, "dynamic:{c}"),
        }
    }
}

impl std::str::FromStr for Schedule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "static" {
            return Ok(Schedule::Static);
        }
        match s.strip_prefix("dynamic:").map(str::parse::<usize>) {
            Some(Ok(c)) if c > 0 => Ok(Schedule::Dynamic(c)),
            _ => Err(format!("invalid schedule {s:?}; expected static or dynamic:<chunk>")),
        }
    }
}

/// Splits `range` into `parts` contiguous pieces whose sizes differ by at
/// most one, larger pieces first.
pub fn static_chunks(range: Range<usize>, parts: usize) -> Vec<Range<usize>> {
    let len = range.len();
    let base = len / parts;
    let rem = len % parts;
    (0..parts)
        .map(|i| {
            let start = range.start + i * base + i.min(rem);
            let size = base + usize::from(i < rem);
            start..start + size
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct RuntimeConfig {
    pub threads: usize,
    /// Seeds victim selection for reproducible steal sequences.
    pub steal_seed: Option<u64>,
    /// How long a wait may see no task completion before giving up.
    pub stall_timeout: Duration,
}

impl RuntimeConfig {
    pub fn new(threads: usize) -> Self {
        Self {
            threads,
            steal_seed: None,
            stall_timeout: Duration::from_secs(10),
        }
    }
}

type ErasedJob = Box<dyn for<'a> FnOnce(&TaskCtx<'a, 'static>) + Send + 'static>;

/// Forgets the scope lifetime of a job.
///
/// # Safety
/// The caller must guarantee the job has run (or been dropped) before
/// `'f` ends. Every scope waits for all of its tasks before returning.
unsafe fn erase<'f, 'scope, F>(f: F) -> ErasedJob
where
    F: for<'a> FnOnce(&TaskCtx<'a, 'scope>) + Send + 'f,
{
    let boxed: Box<dyn for<'a> FnOnce(&TaskCtx<'a, 'scope>) + Send + 'f> = Box::new(f);
    std::mem::transmute(boxed)
}

struct Successors {
    done: bool,
    list: Vec<Arc<TaskNode>>,
}

struct TaskNode {
    id: TaskId,
    job: Mutex<Option<ErasedJob>>,
    unmet: AtomicUsize,
    succ: Mutex<Successors>,
}

impl TaskNode {
    fn new(id: TaskId, job: ErasedJob, unmet: usize) -> Arc<Self> {
        Arc::new(Self {
            id,
            job: Mutex::new(Some(job)),
            unmet: AtomicUsize::new(unmet),
            succ: Mutex::new(Successors {
                done: false,
                list: Vec::new(),
            }),
        })
    }
}

#[derive(Clone)]
struct NodeHandle(Arc<TaskNode>);

impl TaskHandle for NodeHandle {
    fn task_id(&self) -> TaskId {
        self.0.id
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    // Jobs run under catch_unwind, so poisoning only reflects a panic that is
    // already being reported.
    m.lock().unwrap_or_else(|e| e.into_inner())
}

struct Sleep {
    lock: Mutex<()>,
    cv: Condvar,
    sleepers: AtomicUsize,
    epoch: AtomicU64,
}

impl Sleep {
    fn notify(&self, all: bool) {
        self.epoch.fetch_add(1, Ordering::SeqCst);
        if self.sleepers.load(Ordering::SeqCst) > 0 {
            let _g = lock(&self.lock);
            if all {
                self.cv.notify_all();
            } else {
                self.cv.notify_one();
            }
        }
    }
}

struct Latch {
    count: AtomicUsize,
    lock: Mutex<()>,
    cv: Condvar,
}

impl Latch {
    fn new(count: usize) -> Self {
        Self {
            count: AtomicUsize::new(count),
            lock: Mutex::new(()),
            cv: Condvar::new(),
        }
    }

    fn count_down(&self) {
        if self.count.fetch_sub(1, Ordering::AcqRel) == 1 {
            let _g = lock(&self.lock);
            self.cv.notify_all();
        }
    }

    fn wait(&self) {
        let mut g = lock(&self.lock);
        while self.count.load(Ordering::Acquire) > 0 {
            g = self.cv.wait(g).unwrap_or_else(|e| e.into_inner());
        }
    }
}

struct CountDownOnDrop(Arc<Latch>);

impl Drop for CountDownOnDrop {
    fn drop(&mut self) {
        self.0.count_down();
    }
}

struct DecOnDrop(Arc<AtomicUsize>);

impl Drop for DecOnDrop {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::AcqRel);
    }
}

struct Shared {
    threads: usize,
    injector: Injector<Arc<TaskNode>>,
    stealers: Vec<Stealer<Arc<TaskNode>>>,
    pinned: Vec<CachePadded<Mutex<VecDeque<ErasedJob>>>>,
    pinned_len: Vec<CachePadded<AtomicUsize>>,
    sleep: Sleep,
    next_id: AtomicU64,
    pending: AtomicUsize,
    completed: AtomicU64,
    done_lock: Mutex<()>,
    done_cv: Condvar,
    panic: Mutex<Option<Box<dyn Any + Send>>>,
    shutdown: AtomicBool,
    stall_timeout: Duration,
}

struct WorkerLocal {
    index: usize,
    deque: Worker<Arc<TaskNode>>,
    rng: RefCell<SmallRng>,
}

impl Shared {
    fn next_id(&self) -> TaskId {
        self.next_id.fetch_add(1, Ordering::Relaxed)
    }

    fn has_work(&self, me: usize) -> bool {
        self.pinned_len[me].load(Ordering::SeqCst) > 0
            || !self.injector.is_empty()
            || self.stealers.iter().any(|s| !s.is_empty())
    }

    fn take_pinned(&self, me: usize) -> Option<ErasedJob> {
        if self.pinned_len[me].load(Ordering::Acquire) == 0 {
            return None;
        }
        let job = lock(&self.pinned[me]).pop_front();
        if job.is_some() {
            self.pinned_len[me].fetch_sub(1, Ordering::AcqRel);
        }
        job
    }

    fn push_pinned(&self, worker: usize, job: ErasedJob) {
        lock(&self.pinned[worker]).push_back(job);
        self.pinned_len[worker].fetch_add(1, Ordering::SeqCst);
    }

    fn find_task(&self, local: &WorkerLocal) -> Option<Arc<TaskNode>> {
        if let Some(t) = local.deque.pop() {
            return Some(t);
        }
        loop {
            match self.injector.steal_batch_and_pop(&local.deque) {
                Steal::Success(t) => return Some(t),
                Steal::Empty => break,
                Steal::Retry => continue,
            }
        }
        if self.threads > 1 {
            let start = local.rng.borrow_mut().random_range(0..self.threads);
            for i in 0..self.threads {
                let victim = (start + i) % self.threads;
                if victim == local.index {
                    continue;
                }
                loop {
                    match self.stealers[victim].steal() {
                        Steal::Success(t) => return Some(t),
                        Steal::Empty => break,
                        Steal::Retry => continue,
                    }
                }
            }
        }
        None
    }

    fn record_panic(&self, p: Box<dyn Any + Send>) {
        let mut slot = lock(&self.panic);
        if slot.is_none() {
            *slot = Some(p);
        }
    }

    fn execute(&self, local: &WorkerLocal, task: Arc<TaskNode>) {
        let job = lock(&task.job).take().expect("task scheduled twice");
        let ctx = TaskCtx {
            shared: self,
            local,
            task: task.id,
            _scope: PhantomData,
        };
        if let Err(p) = catch_unwind(AssertUnwindSafe(|| job(&ctx))) {
            self.record_panic(p);
        }
        self.complete(local, &task);
    }

    fn complete(&self, local: &WorkerLocal, task: &TaskNode) {
        let successors = {
            let mut s = lock(&task.succ);
            s.done = true;
            std::mem::take(&mut s.list)
        };
        let mut readied = false;
        for s in successors {
            if s.unmet.fetch_sub(1, Ordering::AcqRel) == 1 {
                local.deque.push(s);
                readied = true;
            }
        }
        if readied {
            self.sleep.notify(false);
        }
        self.completed.fetch_add(1, Ordering::Release);
        if self.pending.fetch_sub(1, Ordering::AcqRel) == 1 {
            let _g = lock(&self.done_lock);
            self.done_cv.notify_all();
        }
    }

    fn run_pinned(&self, local: &WorkerLocal, job: ErasedJob) {
        let ctx = TaskCtx {
            shared: self,
            local,
            task: 0,
            _scope: PhantomData,
        };
        if let Err(p) = catch_unwind(AssertUnwindSafe(|| job(&ctx))) {
            self.record_panic(p);
        }
    }

    fn idle(&self, local: &WorkerLocal) {
        let epoch = self.sleep.epoch.load(Ordering::SeqCst);
        self.sleep.sleepers.fetch_add(1, Ordering::SeqCst);
        if !self.has_work(local.index) && !self.shutdown.load(Ordering::SeqCst) {
            let mut g = lock(&self.sleep.lock);
            while self.sleep.epoch.load(Ordering::SeqCst) == epoch && !self.shutdown.load(Ordering::SeqCst) {
                let (ng, timeout) = self
                    .sleep
                    .cv
                    .wait_timeout(g, Duration::from_millis(5))
                    .unwrap_or_else(|e| e.into_inner());
                g = ng;
                if timeout.timed_out() {
                    break;
                }
            }
        }
        self.sleep.sleepers.fetch_sub(1, Ordering::SeqCst);
    }

    /// Blocks until no task is pending, or reports a stall.
    fn wait_idle(&self) -> Result<(), RuntimeError> {
        let mut seen = self.completed.load(Ordering::Acquire);
        let mut last_progress = Instant::now();
        let mut g = lock(&self.done_lock);
        loop {
            let pending = self.pending.load(Ordering::Acquire);
            if pending == 0 {
                return Ok(());
            }
            let (ng, _) = self
                .done_cv
                .wait_timeout(g, Duration::from_millis(20))
                .unwrap_or_else(|e| e.into_inner());
            g = ng;
            let now_done = self.completed.load(Ordering::Acquire);
            if now_done != seen {
                seen = now_done;
                last_progress = Instant::now();
            } else if last_progress.elapsed() >= self.stall_timeout {
                let pending = self.pending.load(Ordering::Acquire);
                if pending > 0 {
                    return Err(RuntimeError::Stalled {
                        pending,
                        waited: last_progress.elapsed(),
                    });
                }
            }
        }
    }
}

fn worker_main(shared: Arc<Shared>, local: WorkerLocal) {
    let mut spins = 0u32;
    loop {
        if let Some(job) = shared.take_pinned(local.index) {
            shared.run_pinned(&local, job);
            spins = 0;
            continue;
        }
        if let Some(task) = shared.find_task(&local) {
            shared.execute(&local, task);
            spins = 0;
            continue;
        }
        if shared.shutdown.load(Ordering::Acquire) {
            break;
        }
        if spins < 16 {
            spins += 1;
            std::thread::yield_now();
        } else {
            shared.idle(&local);
            spins = 0;
        }
    }
}

/// A fixed pool of workers with per-worker deques, a global injector for
/// tasks created by the submitting thread, and pinned per-worker mailboxes
/// for loop chunks.
pub struct Runtime {
    shared: Arc<Shared>,
    workers: Vec<JoinHandle<()>>,
    scope_lock: Mutex<()>,
}

impl std::fmt::Debug for Runtime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Runtime")
            .field("threads", &self.shared.threads)
            .finish_non_exhaustive()
    }
}

impl Runtime {
    pub fn new(threads: usize) -> Result<Self, RuntimeError> {
        Self::with_config(RuntimeConfig::new(threads))
    }

    pub fn with_config(config: RuntimeConfig) -> Result<Self, RuntimeError> {
        let t = config.threads;
        if t == 0 {
            return Err(RuntimeError::NoWorkers);
        }
        let deques: Vec<Worker<Arc<TaskNode>>> = (0..t).map(|_| Worker::new_lifo()).collect();
        let shared = Arc::new(Shared {
            threads: t,
            injector: Injector::new(),
            stealers: deques.iter().map(Worker::stealer).collect(),
            pinned: (0..t).map(|_| CachePadded::new(Mutex::new(VecDeque::new()))).collect(),
            pinned_len: (0..t).map(|_| CachePadded::new(AtomicUsize::new(0))).collect(),
            sleep: Sleep {
                lock: Mutex::new(()),
                cv: Condvar::new(),
                sleepers: AtomicUsize::new(0),
                epoch: AtomicU64::new(0),
            },
            next_id: AtomicU64::new(1),
            pending: AtomicUsize::new(0),
            completed: AtomicU64::new(0),
            done_lock: Mutex::new(()),
            done_cv: Condvar::new(),
            panic: Mutex::new(None),
            shutdown: AtomicBool::new(false),
            stall_timeout: config.stall_timeout,
        });
        let mut workers = Vec::with_capacity(t);
        for (index, deque) in deques.into_iter().enumerate() {
            let rng = match config.steal_seed {
                Some(seed) => SmallRng::seed_from_u64(seed.wrapping_add(index as u64)),
                None => SmallRng::from_os_rng(),
            };
            let local = WorkerLocal {
                index,
                deque,
                rng: RefCell::new(rng),
            };
            let sh = Arc::clone(&shared);
            let handle = std::thread::Builder::new()
                .name(format!("stencil-worker-{index}"))
                .spawn(move || worker_main(sh, local))
                .map_err(|e| RuntimeError::Spawn(e.to_string()))?;
            workers.push(handle);
        }
        Ok(Self {
            shared,
            workers,
            scope_lock: Mutex::new(()),
        })
    }

    pub fn threads(&self) -> usize {
        self.shared.threads
    }

    /// Runs `f` with a task scope. Every task created in the scope has
    /// finished when this returns. A panic in any task is re-raised here.
    ///
    /// If the final wait stalls the process aborts, since outstanding tasks
    /// may still borrow from the caller.
    pub fn scope<'scope, F, R>(&self, f: F) -> R
    where
        F: FnOnce(&Scope<'scope>) -> R,
    {
        let _one_at_a_time = lock(&self.scope_lock);
        let scope = Scope {
            shared: Arc::clone(&self.shared),
            tracker: RefCell::new(DependencyTracker::new()),
            edge_log: RefCell::new(None),
            _scope: PhantomData,
        };
        let result = catch_unwind(AssertUnwindSafe(|| f(&scope)));
        if let Err(e) = self.shared.wait_idle() {
            eprintln!("task runtime: {e}; aborting");
            std::process::abort();
        }
        if let Some(p) = lock(&self.shared.panic).take() {
            resume_unwind(p);
        }
        match result {
            Ok(r) => r,
            Err(p) => resume_unwind(p),
        }
    }
}

impl Drop for Runtime {
    fn drop(&mut self) {
        self.shared.shutdown.store(true, Ordering::SeqCst);
        self.shared.sleep.notify(true);
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

/// Submitter-side handle. Only the thread that opened the scope can use it.
pub struct Scope<'scope> {
    shared: Arc<Shared>,
    tracker: RefCell<DependencyTracker<NodeHandle>>,
    edge_log: RefCell<Option<Vec<DependenceEdge>>>,
    _scope: PhantomData<Cell<&'scope mut ()>>,
}

impl<'scope> Scope<'scope> {
    pub fn threads(&self) -> usize {
        self.shared.threads
    }

    /// Starts recording every dependence edge the scope creates.
    pub fn log_edges(&self) {
        self.edge_log.borrow_mut().get_or_insert_with(Vec::new);
    }

    /// Edges recorded so far; empty unless [`Scope::log_edges`] was called.
    pub fn edges(&self) -> Vec<DependenceEdge> {
        self.edge_log.borrow().clone().unwrap_or_default()
    }

    /// Submits a task reading `ins` and writing `outs`. It starts once every
    /// earlier conflicting task that is still incomplete has finished.
    pub fn submit<F>(&self, ins: &[usize], outs: &[usize], f: F) -> TaskId
    where
        F: for<'a> FnOnce(&TaskCtx<'a, 'scope>) + Send + 'scope,
    {
        let sh = &*self.shared;
        let id = sh.next_id();
        // SAFETY: the scope waits for every task before returning.
        let node = TaskNode::new(id, unsafe { erase(f) }, 1);
        sh.pending.fetch_add(1, Ordering::AcqRel);
        let preds = self
            .tracker
            .borrow_mut()
            .submit(NodeHandle(Arc::clone(&node)), ins, outs)
            .expect("task ids come from a monotonic counter");
        let mut log = self.edge_log.borrow_mut();
        for NodeHandle(p) in preds {
            let mut s = lock(&p.succ);
            if !s.done {
                s.list.push(Arc::clone(&node));
                node.unmet.fetch_add(1, Ordering::AcqRel);
                if let Some(log) = log.as_mut() {
                    log.push(DependenceEdge::new(p.id, id));
                }
            }
        }
        if node.unmet.fetch_sub(1, Ordering::AcqRel) == 1 {
            sh.injector.push(node);
            sh.sleep.notify(false);
        }
        id
    }

    /// Creates a task with no dependences.
    pub fn spawn<F>(&self, f: F) -> TaskId
    where
        F: for<'a> FnOnce(&TaskCtx<'a, 'scope>) + Send + 'scope,
    {
        let sh = &*self.shared;
        let id = sh.next_id();
        // SAFETY: the scope waits for every task before returning.
        let node = TaskNode::new(id, unsafe { erase(f) }, 0);
        sh.pending.fetch_add(1, Ordering::AcqRel);
        sh.injector.push(node);
        sh.sleep.notify(false);
        id
    }

    /// Waits for every task created so far, including tasks spawned by tasks.
    pub fn taskwait(&self) -> Result<(), RuntimeError> {
        self.shared.wait_idle()?;
        self.tracker.borrow_mut().clear();
        Ok(())
    }

    /// Runs `body` for every index of `range` on the workers and returns when
    /// all iterations are done. Tasks spawned by the body may still be
    /// running; follow with [`Scope::taskwait`] to wait for them.
    pub fn parallel_for<F>(&self, range: Range<usize>, schedule: Schedule, body: F)
    where
        F: for<'a> Fn(&TaskCtx<'a, 'scope>, usize) + Sync,
    {
        let sh = &*self.shared;
        let t = sh.threads;
        let latch = Arc::new(Latch::new(t));
        let body = &body;
        match schedule {
            Schedule::Static => {
                for (worker, chunk) in static_chunks(range, t).into_iter().enumerate() {
                    let guard = CountDownOnDrop(Arc::clone(&latch));
                    let job = move |ctx: &TaskCtx<'_, 'scope>| {
                        let _guard = guard;
                        for i in chunk {
                            body(ctx, i);
                        }
                    };
                    // SAFETY: the latch wait below outlives every chunk job.
                    sh.push_pinned(worker, unsafe { erase(job) });
                }
            }
            Schedule::Dynamic(chunk) => {
                let chunk = chunk.max(1);
                let next = Arc::new(AtomicUsize::new(range.start));
                let end = range.end;
                for worker in 0..t {
                    let guard = CountDownOnDrop(Arc::clone(&latch));
                    let next = Arc::clone(&next);
                    let job = move |ctx: &TaskCtx<'_, 'scope>| {
                        let _guard = guard;
                        loop {
                            let start = next.fetch_add(chunk, Ordering::Relaxed);
                            if start >= end {
                                break;
                            }
                            for i in start..(start + chunk).min(end) {
                                body(ctx, i);
                            }
                        }
                    };
                    // SAFETY: as above.
                    sh.push_pinned(worker, unsafe { erase(job) });
                }
            }
        }
        sh.sleep.notify(true);
        latch.wait();
    }
}

/// Context handed to running tasks and loop bodies.
pub struct TaskCtx<'a, 'scope> {
    shared: &'a Shared,
    local: &'a WorkerLocal,
    task: TaskId,
    _scope: PhantomData<Cell<&'scope mut ()>>,
}

impl<'a, 'scope> TaskCtx<'a, 'scope> {
    pub fn worker_index(&self) -> usize {
        self.local.index
    }

    /// Id of the running task, or 0 inside a loop body.
    pub fn task_id(&self) -> TaskId {
        self.task
    }

    pub fn threads(&self) -> usize {
        self.shared.threads
    }

    /// Creates a dependency-free task on this worker's deque.
    pub fn spawn<F>(&self, f: F) -> TaskId
    where
        F: for<'b> FnOnce(&TaskCtx<'b, 'scope>) + Send + 'scope,
    {
        let sh = self.shared;
        let id = sh.next_id();
        // SAFETY: the enclosing scope waits for every task before returning.
        let node = TaskNode::new(id, unsafe { erase(f) }, 0);
        sh.pending.fetch_add(1, Ordering::AcqRel);
        self.local.deque.push(node);
        sh.sleep.notify(false);
        id
    }

    /// Spawns the jobs as tasks and returns once all of them have finished,
    /// running other ready tasks meanwhile. The first job is the first one
    /// this worker picks up itself.
    pub fn fork_join<I, F>(&self, jobs: I)
    where
        I: IntoIterator<Item = F>,
        F: for<'b> FnOnce(&TaskCtx<'b, 'scope>) + Send + 'scope,
    {
        let jobs: Vec<F> = jobs.into_iter().collect();
        let remaining = Arc::new(AtomicUsize::new(jobs.len()));
        // LIFO deque: push in reverse so the first job pops first.
        for job in jobs.into_iter().rev() {
            let guard = DecOnDrop(Arc::clone(&remaining));
            self.spawn(move |ctx: &TaskCtx<'_, 'scope>| {
                let _guard = guard;
                job(ctx)
            });
        }
        let mut misses = 0u32;
        while remaining.load(Ordering::Acquire) > 0 {
            if let Some(task) = self.shared.find_task(self.local) {
                self.shared.execute(self.local, task);
                misses = 0;
            } else if misses < 1000 {
                misses += 1;
                std::thread::yield_now();
            } else {
                std::thread::sleep(Duration::from_micros(20));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;

    #[test]
    fn static_split_examples() {
        assert_eq!(static_chunks(0..10, 3), vec![0..4, 4..7, 7..10]);
        assert_eq!(static_chunks(0..2, 4), vec![0..1, 1..2, 2..2, 2..2]);
        assert_eq!(static_chunks(5..5, 2), vec![5..5, 5..5]);
    }

    #[test]
    fn schedule_parse() {
        assert_eq!("static".parse::<Schedule>().unwrap(), Schedule::Static);
        assert_eq!("dynamic:4".parse::<Schedule>().unwrap(), Schedule::Dynamic(4));
        assert!("dynamic:0".parse::<Schedule>().is_err());
        assert!("guided".parse::<Schedule>().is_err());
    }

    #[test]
    fn zero_workers_rejected() {
        assert_eq!(Runtime::new(0).unwrap_err(), RuntimeError::NoWorkers);
    }

    #[test]
    fn taskwait_with_nothing_pending_returns() {
        let rt = Runtime::new(2).unwrap();
        rt.scope(|s| s.taskwait()).unwrap();
    }

    #[test]
    fn tasks_borrow_from_caller() {
        let rt = Runtime::new(3).unwrap();
        let hits: Vec<AtomicUsize> = (0..100).map(|_| AtomicUsize::new(0)).collect();
        rt.scope(|s| {
            for i in 0..100 {
                let hits = &hits;
                s.spawn(move |_| {
                    hits[i].fetch_add(1, Ordering::Relaxed);
                });
            }
            s.taskwait().unwrap();
            assert!(hits.iter().all(|h| h.load(Ordering::Relaxed) == 1));
        });
    }

    #[test]
    fn parallel_for_covers_range_once() {
        let rt = Runtime::new(3).unwrap();
        for schedule in [Schedule::Static, Schedule::Dynamic(1), Schedule::Dynamic(4)] {
            let hits: Vec<AtomicUsize> = (0..9).map(|_| AtomicUsize::new(0)).collect();
            rt.scope(|s| {
                s.parallel_for(0..9, schedule, |_, i| {
                    hits[i].fetch_add(1, Ordering::Relaxed);
                })
            });
            assert!(hits.iter().all(|h| h.load(Ordering::Relaxed) == 1), "{schedule}");
        }
        // empty range is a no-op
        rt.scope(|s| s.parallel_for(3..3, Schedule::Static, |_, _| panic!("ran")));
    }

    #[test]
    fn static_chunks_land_on_their_worker() {
        let rt = Runtime::new(3).unwrap();
        let owner: Vec<AtomicUsize> = (0..10).map(|_| AtomicUsize::new(usize::MAX)).collect();
        rt.scope(|s| {
            s.parallel_for(0..10, Schedule::Static, |ctx, i| {
                owner[i].store(ctx.worker_index(), Ordering::Relaxed);
            })
        });
        let owner: Vec<usize> = owner.iter().map(|o| o.load(Ordering::Relaxed)).collect();
        assert_eq!(owner, vec![0, 0, 0, 0, 1, 1, 1, 2, 2, 2]);
    }

    #[test]
    fn fork_join_waits_for_children() {
        let rt = Runtime::new(2).unwrap();
        let done = AtomicUsize::new(0);
        let seen = AtomicUsize::new(0);
        rt.scope(|s| {
            let (done, seen) = (&done, &seen);
            s.spawn(move |ctx| {
                ctx.fork_join((0..8).map(|_| {
                    move |_: &TaskCtx<'_, '_>| {
                        std::thread::sleep(Duration::from_millis(1));
                        done.fetch_add(1, Ordering::AcqRel);
                    }
                }));
                seen.store(done.load(Ordering::Acquire), Ordering::Release);
            });
        });
        assert_eq!(seen.load(Ordering::Acquire), 8);
    }

    #[test]
    fn dependences_order_execution() {
        let rt = Runtime::new(4).unwrap();
        let log = Mutex::new(Vec::new());
        rt.scope(|s| {
            s.log_edges();
            for i in 0..20usize {
                let log = &log;
                s.submit(&[], &[0], move |_| {
                    lock(log).push(i);
                });
            }
            s.taskwait().unwrap();
            // every edge was made before its source could finish, or skipped
            assert!(s.edges().iter().all(|e| e.from < e.to));
        });
        assert_eq!(log.into_inner().unwrap(), (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn task_panic_propagates() {
        let rt = Runtime::new(2).unwrap();
        let r = catch_unwind(AssertUnwindSafe(|| {
            rt.scope(|s| {
                s.spawn(|_| panic!("boom"));
            })
        }));
        assert!(r.is_err());
        // the pool stays usable
        let n = AtomicUsize::new(0);
        rt.scope(|s| {
            let n = &n;
            s.spawn(move |_| {
                n.fetch_add(1, Ordering::Relaxed);
            });
        });
        assert_eq!(n.load(Ordering::Relaxed), 1);
    }

    #[test]
    fn stall_is_detected() {
        let mut cfg = RuntimeConfig::new(1);
        cfg.stall_timeout = Duration::from_millis(200);
        let rt = Runtime::with_config(cfg).unwrap();
        let release = AtomicBool::new(false);
        rt.scope(|s| {
            let release = &release;
            s.spawn(move |_| {
                while !release.load(Ordering::Acquire) {
                    std::thread::sleep(Duration::from_millis(5));
                }
            });
            let err = s.taskwait().unwrap_err();
            assert!(matches!(err, RuntimeError::Stalled { pending: 1, .. }), "{err}");
            release.store(true, Ordering::Release);
        });
    }
}
