use thiserror::Error;

/// Submission sequence number. Runtime ids start at 1; 0 marks work that
/// did not run as a task (loop iterations, serial sweeps).
pub type TaskId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DependenceEdge {
    pub from: TaskId,
    pub to: TaskId,
}

impl DependenceEdge {
    pub fn new(from: TaskId, to: TaskId) -> Self {
        Self { from, to }
    }
}

/// The dependence-relevant part of a task: what it reads and writes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskRecord {
    pub id: TaskId,
    pub in_locs: Vec<usize>,
    pub out_locs: Vec<usize>,
}

impl TaskRecord {
    pub fn new(id: TaskId, in_locs: Vec<usize>, out_locs: Vec<usize>) -> Self {
        Self { id, in_locs, out_locs }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DependencyError {
    #[error("task id {id} submitted after id {last}; ids must strictly increase")]
    NonMonotonicId { id: TaskId, last: TaskId },
}

pub trait TaskHandle: Clone {
    fn task_id(&self) -> TaskId;
}

impl TaskHandle for TaskId {
    fn task_id(&self) -> TaskId {
        *self
    }
}

#[derive(Debug, Clone)]
struct Slot<H> {
    writer: Option<H>,
    readers: Vec<H>,
}

impl<H> Default for Slot<H> {
    fn default() -> Self {
        Self {
            writer: None,
            readers: Vec::new(),
        }
    }
}

/// Per-location bookkeeping realising `in`/`out` dependence semantics.
///
/// A reader orders after the last writer of a location; a writer orders after
/// the last writer and after every reader since that write. The tracker only
/// reports candidate predecessors; whether they are still incomplete is the
/// caller's business.
#[derive(Debug, Clone)]
pub struct DependencyTracker<H = TaskId> {
    slots: Vec<Slot<H>>,
    last: Option<TaskId>,
}

impl<H> Default for DependencyTracker<H> {
    fn default() -> Self {
        Self {
            slots: Vec::new(),
            last: None,
        }
    }
}

impl<H: TaskHandle> DependencyTracker<H> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_locations(n: usize) -> Self {
        Self {
            slots: (0..n).map(|_| Slot::default()).collect(),
            last: None,
        }
    }

    fn slot(&mut self, loc: usize) -> &mut Slot<H> {
        if loc >= self.slots.len() {
            self.slots.resize_with(loc + 1, Slot::default);
        }
        &mut self.slots[loc]
    }

    /// Registers a task and returns its distinct candidate predecessors in
    /// first-seen order.
    pub fn submit(&mut self, handle: H, ins: &[usize], outs: &[usize]) -> Result<Vec<H>, DependencyError> {
        let id = handle.task_id();
        if let Some(last) = self.last {
            if id <= last {
                return Err(DependencyError::NonMonotonicId { id, last });
            }
        }
        self.last = Some(id);

        let mut preds: Vec<H> = Vec::new();
        let mut push = |h: &H| {
            if !preds.iter().any(|p| p.task_id() == h.task_id()) {
                preds.push(h.clone());
            }
        };
        for &loc in ins {
            if let Some(w) = self.slots.get(loc).and_then(|s| s.writer.as_ref()) {
                push(w);
            }
        }
        for &loc in outs {
            if let Some(s) = self.slots.get(loc) {
                if let Some(w) = &s.writer {
                    push(w);
                }
                s.readers.iter().for_each(&mut push);
            }
        }

        for &loc in outs {
            let s = self.slot(loc);
            s.writer = Some(handle.clone());
            s.readers.clear();
        }
        for &loc in ins {
            if outs.contains(&loc) {
                continue;
            }
            self.slot(loc).readers.push(handle.clone());
        }
        Ok(preds)
    }

    /// Forgets all history. Valid once every submitted task has completed.
    pub fn clear(&mut self) {
        for s in &mut self.slots {
            s.writer = None;
            s.readers.clear();
        }
    }
}

impl DependencyTracker<TaskId> {
    /// Submits a record with nothing completed yet and returns its edges.
    pub fn submit_record(&mut self, t: &TaskRecord) -> Result<Vec<DependenceEdge>, DependencyError> {
        Ok(self
            .submit(t.id, &t.in_locs, &t.out_locs)?
            .into_iter()
            .map(|p| DependenceEdge::new(p, t.id))
            .collect())
    }
}

/// Runs a whole submission through a fresh tracker.
pub fn tracker_edges(submission: &[TaskRecord]) -> Result<Vec<DependenceEdge>, DependencyError> {
    let mut tracker = DependencyTracker::<TaskId>::new();
    let mut edges = Vec::new();
    for t in submission {
        edges.extend(tracker.submit_record(t)?);
    }
    Ok(edges)
}
