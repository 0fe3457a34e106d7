//! Timing harness and verification suites.

mod csv_rows;
mod verify;

use std::time::Instant;

use thiserror::Error;

use crate::kernels::{CostModel, KernelError, StencilKind};
use crate::mesh::{Mesh, MeshDims};
use crate::strategies::{Fault, Strategy, StrategyKind, SweepError, Sweeper};
use crate::taskrt::{DependenceEdge, Runtime, RuntimeError, Schedule};
use crate::trace::{ExecutionTrace, TraceRecord};

pub use csv_rows::{read_csv, write_csv, BenchRow, Rep, CSV_HEADER};
pub use verify::{run_verification, CheckOutcome, Suite, VerificationReport, VerifyOptions};

pub const WARMUP_SWEEPS: usize = 3;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A benchmark campaign: every combination of `sizes` and `threads`.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub dim: usize,
    pub sizes: Vec<usize>,
    pub kind: StencilKind,
    pub cost: CostModel,
    pub strategy: StrategyKind,
    pub threads: Vec<usize>,
    pub schedule: Schedule,
    pub chunk: usize,
    pub sweeps: usize,
    pub reps: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            sizes: vec![16],
            kind: StencilKind::Fd5,
            cost: CostModel::Constant(0),
            strategy: StrategyKind::Serial,
            threads: vec![1],
            schedule: Schedule::Static,
            chunk: 1,
            sweeps: 100,
            reps: 3,
            seed: 1,
        }
    }
}

/// One measured configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BenchPoint {
    pub dim: usize,
    pub n: usize,
    pub kind: StencilKind,
    pub cost: CostModel,
    pub strategy: StrategyKind,
    pub threads: usize,
    pub schedule: Schedule,
    pub chunk: usize,
    pub sweeps: usize,
}

impl BenchPoint {
    pub fn dims(&self) -> MeshDims {
        MeshDims::new(self.dim, self.n).expect("validated point")
    }

    pub fn cell_updates(&self) -> usize {
        self.sweeps * self.dims().interior_len()
    }

    pub fn sweeper(&self) -> Result<Sweeper, SweepError> {
        let strategy = Strategy::new(self.strategy)
            .with_schedule(self.schedule)
            .with_chunk(self.chunk);
        Sweeper::new(strategy, self.kind, self.cost, self.dims(), self.threads)
    }

    /// A runtime sized for this point, or `None` for serial runs.
    pub fn runtime(&self) -> Result<Option<Runtime>, RuntimeError> {
        match self.strategy {
            StrategyKind::Serial => Ok(None),
            _ => Runtime::new(self.threads).map(Some),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if !matches!(self.dim, 2 | 3) {
            return bad(format!("dim must be 2 or 3, got {}", self.dim));
        }
        if self.kind.dim() != self.dim {
            return bad(format!("stencil {} is {}D but dim is {}", self.kind, self.kind.dim(), self.dim));
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return bad("sizes must be a non-empty list of positive integers".into());
        }
        if self.threads.is_empty() || self.threads.contains(&0) {
            return bad("threads must be a non-empty list of positive integers".into());
        }
        if self.sweeps == 0 {
            return bad("sweeps must be at least 1".into());
        }
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.chunk == 0 {
            return bad("chunk must be at least 1".into());
        }
        if let Schedule::Dynamic(0) = self.schedule {
            return bad("dynamic chunk must be at least 1".into());
        }
        for &n in &self.sizes {
            let cells = n.checked_pow(self.dim as u32).and_then(|c| c.checked_mul(self.sweeps));
            if cells.is_none() {
                return bad(format!("size {n} overflows the cell count"));
            }
        }
        Ok(())
    }

    /// Points in size-major order. Serial runs collapse to one thread.
    pub fn points(&self) -> Result<Vec<BenchPoint>, BenchError> {
        self.validate()?;
        let mut threads = self.threads.clone();
        if self.strategy == StrategyKind::Serial {
            threads = vec![1];
        }
        let mut out = Vec::new();
        for &n in &self.sizes {
            for &t in &threads {
                out.push(BenchPoint {
                    dim: self.dim,
                    n,
                    kind: self.kind,
                    cost: self.cost,
                    strategy: self.strategy,
                    threads: t,
                    schedule: self.schedule,
                    chunk: self.chunk,
                    sweeps: self.sweeps,
                });
            }
        }
        Ok(out)
    }
}

/// Timings of one point, one entry per repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub point: BenchPoint,
    pub seconds: Vec<f64>,
    pub digests: Vec<String>,
}

impl BenchResult {
    pub fn ns_per_cell_update(&self) -> Vec<f64> {
        let updates = self.point.cell_updates() as f64;
        self.seconds.iter().map(|s| s * 1e9 / updates).collect()
    }

    pub fn min_seconds(&self) -> f64 {
        self.seconds.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_seconds(&self) -> f64 {
        self.seconds.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn median_seconds(&self) -> f64 {
        median(&self.seconds)
    }

    pub fn median_ns_per_cell_update(&self) -> f64 {
        median(&self.ns_per_cell_update())
    }

    /// The digest shared by all repetitions, if they agree.
    pub fn stable_digest(&self) -> Option<&str> {
        let first = self.digests.first()?;
        self.digests.iter().all(|d| d == first).then_some(first.as_str())
    }
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Times one point: per repetition, a fresh mesh, warm-up, then `sweeps`
/// timed sweeps on the same runtime.
pub fn run_point(point: &BenchPoint, reps: usize, seed: u64) -> Result<BenchResult, BenchError> {
    let rt = point.runtime()?;
    let sweeper = point.sweeper()?;
    let mut mesh = Mesh::init(point.dims(), seed, 0.0);
    let mut seconds = Vec::with_capacity(reps);
    let mut digests = Vec::with_capacity(reps);
    for _ in 0..reps {
        mesh.reinit(seed, 0.0);
        for _ in 0..WARMUP_SWEEPS {
            sweeper.sweep(rt.as_ref(), &mut mesh, None)?;
        }
        let t0 = Instant::now();
        for _ in 0..point.sweeps {
            sweeper.sweep(rt.as_ref(), &mut mesh, None)?;
        }
        seconds.push(t0.elapsed().as_secs_f64());
        digests.push(mesh.digest());
    }
    Ok(BenchResult {
        point: *point,
        seconds,
        digests,
    })
}

pub fn run_benchmark(config: &BenchConfig) -> Result<Vec<BenchResult>, BenchError> {
    config
        .points()?
        .iter()
        .map(|p| run_point(p, config.reps, config.seed))
        .collect()
}

/// Everything a traced run produced.
#[derive(Debug, Clone)]
pub struct TracedRun {
    pub records: Vec<TraceRecord>,
    pub edges: Vec<DependenceEdge>,
    pub mesh: Mesh,
}

/// Runs `point.sweeps` traced sweeps (no warm-up) from a seeded mesh and
/// collects the records plus the dependence edges of every sweep.
pub fn trace_point(point: &BenchPoint, seed: u64, fault: Option<Fault>) -> Result<TracedRun, BenchError> {
    let rt = point.runtime()?;
    trace_point_on(rt.as_ref(), point, seed, fault)
}

/// As [`trace_point`], reusing an existing runtime.
pub fn trace_point_on(
    rt: Option<&Runtime>,
    point: &BenchPoint,
    seed: u64,
    fault: Option<Fault>,
) -> Result<TracedRun, BenchError> {
    let mut sweeper = point.sweeper()?;
    if let Some(f) = fault {
        sweeper.inject_fault(f);
    }
    let dims = point.dims();
    let workers = rt.map_or(1, Runtime::threads);
    let per_lane = point.cell_updates().div_ceil(workers) + 64;
    let trace = ExecutionTrace::new(workers, per_lane);
    let mut mesh = Mesh::init(dims, seed, 0.0);
    let mut edges = Vec::new();
    for _ in 0..point.sweeps {
        edges.extend(sweeper.sweep_logging_edges(rt, &mut mesh, Some(&trace))?);
    }
    Ok(TracedRun {
        records: trace.records(),
        edges,
        mesh,
    })
}
