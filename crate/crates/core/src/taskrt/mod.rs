//! Dependency-aware work-stealing task runtime.
//!
//! Tasks declare the locations they read (`in`) and write (`out`); a task
//! runs only after every earlier, still incomplete task it conflicts with.
//! Besides dependent tasks the runtime offers plain tasks, fork-join inside
//! tasks, `taskwait` and a `parallel_for` with static or dynamic schedules.

mod oracle;
mod runtime;
mod tracker;

pub use oracle::oracle_edges;
pub use runtime::{static_chunks, Runtime, RuntimeConfig, RuntimeError, Schedule, Scope, TaskCtx};
pub use tracker::{
    tracker_edges, DependenceEdge, DependencyError, DependencyTracker, TaskHandle, TaskId, TaskRecord,
};
