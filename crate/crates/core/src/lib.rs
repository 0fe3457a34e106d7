//! Stencil sweep laboratory.
//!
//! Six ways of running one in-place relaxation sweep over a Cartesian grid
//! (serial, colouring, nested dissection, dependency-graph tasks and two
//! colouring/task hybrids) on a small work-stealing runtime with OpenMP-like
//! `in`/`out` dependences, plus tracing, verification and timing tools.

pub mod bench;
pub mod kernels;
pub mod mesh;
pub mod strategies;
pub mod taskrt;
pub mod trace;

pub use kernels::{residual_max, update_cell, CostModel, KernelError, Stencil, StencilKind};
pub use mesh::{CellCoord, Mesh, MeshDims, MeshError, SharedMesh};
pub use strategies::{Strategy, StrategyKind, SweepError};
pub use taskrt::{Runtime, RuntimeConfig, RuntimeError, Schedule, TaskId};
pub use trace::{ExecutionTrace, TraceRecord};
