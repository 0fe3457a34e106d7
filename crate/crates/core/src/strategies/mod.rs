//! The six sweep strategies. Each invocation performs exactly one in-place
//! update of every interior cell.
//!
//! A [`Sweeper`] precomputes the traversal (colour loop nests, dissection
//! tree, task dependence lists) for one mesh shape so repeated sweeps only
//! pay for scheduling and arithmetic.

mod colouring;
mod dissection;
mod taskgraph;

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use thiserror::Error;

use crate::kernels::{CostModel, KernelError, Stencil, StencilKind};
use crate::mesh::{Mesh, MeshDims, SharedMesh};
use crate::taskrt::{DependenceEdge, Runtime, RuntimeError, Schedule, Scope, TaskCtx, TaskId};
use crate::trace::ExecutionTrace;

pub use colouring::{colour_count, colour_of};
pub use dissection::{dissect, dissection_levels, DissectionNode, Region};
pub use taskgraph::{task_records, SubmissionOrder};

use colouring::ColourPass;
use taskgraph::TaskGroup;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("strategy {0} needs a task runtime")]
    NoRuntime(StrategyKind),
    #[error("mesh is {got:?} but the sweeper was built for {want:?}")]
    ShapeMismatch { want: MeshDims, got: MeshDims },
    #[error("cannot parse strategy from {0:?}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    Serial,
    Colouring,
    NestedDissection,
    TaskGraph,
    HybDepend,
    HybSync,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 6] = [
        Self::Serial,
        Self::Colouring,
        Self::NestedDissection,
        Self::TaskGraph,
        Self::HybDepend,
        Self::HybSync,
    ];

    /// Strategies whose result does not depend on the thread count or
    /// execution interleaving.
    pub fn is_thread_invariant(self) -> bool {
        !matches!(self, Self::NestedDissection)
    }

    pub fn uses_schedule(self) -> bool {
        matches!(self, Self::Colouring | Self::HybSync)
    }

    pub fn uses_chunk(self) -> bool {
        matches!(self, Self::TaskGraph | Self::HybDepend)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Serial => "serial",
            Self::Colouring => "colouring",
            Self::NestedDissection => "nd",
            Self::TaskGraph => "taskgraph",
            Self::HybDepend => "hyb-depend",
            Self::HybSync => "hyb-sync",
        })
    }
}

impl FromStr for StrategyKind {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "serial" => Self::Serial,
            "colouring" | "coloring" => Self::Colouring,
            "nd" | "nested-dissection" => Self::NestedDissection,
            "taskgraph" => Self::TaskGraph,
            "hyb-depend" => Self::HybDepend,
            "hyb-sync" => Self::HybSync,
            _ => return Err(SweepError::Parse(s.to_owned())),
        })
    }
}

/// A strategy with its tuning knobs. `schedule` applies to colouring and
/// hyb-sync, `chunk` (cells per task) to taskgraph and hyb-depend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Strategy {
    pub kind: StrategyKind,
    pub schedule: Schedule,
    pub chunk: usize,
}

impl Strategy {
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            schedule: Schedule::Static,
            chunk: 1,
        }
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_chunk(mut self, chunk: usize) -> Self {
        self.chunk = chunk.max(1);
        self
    }
}

/// Deliberate scheduling bugs for negative controls.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Colouring runs every cell in one parallel pass, so adjacent cells
    /// share a "colour".
    MergedColours,
}

/// A contiguous strided run of flat indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Line {
    pub start: usize,
    pub len: usize,
    pub step: usize,
}

impl Line {
    pub fn iter(&self) -> impl Iterator<Item = usize> {
        let (start, step) = (self.start, self.step);
        (0..self.len).map(move |i| start + i * step)
    }
}

#[derive(Debug, Clone)]
enum Plan {
    Serial(Vec<Line>),
    Colours(Vec<ColourPass>),
    Dissection(DissectionNode),
    Tasks(Vec<TaskGroup>),
}

/// Shared state of one sweep: the mesh view, the cost model and the first
/// error any update hit.
struct Relax<'m> {
    stencil: &'m Stencil,
    cells: SharedMesh<'m>,
    cost: CostModel,
    total: usize,
    trace: Option<&'m ExecutionTrace>,
    error: OnceLock<KernelError>,
}

impl Relax<'_> {
    #[inline]
    fn cell(&self, index: usize, worker: usize, task: TaskId) {
        let k = match self.cost {
            CostModel::Constant(k) => k,
            ramp => {
                let dims = self.stencil.dims();
                ramp.k_at(dims.interior_rank(dims.coord_of(index)), self.total)
            }
        };
        let result = match self.trace {
            None => self.stencil.update(&self.cells, index, k),
            Some(t) => {
                let start = t.now();
                let r = self.stencil.update(&self.cells, index, k);
                t.record(worker, task, index, start, t.now());
                r
            }
        };
        if let Err(e) = result {
            let _ = self.error.set(e);
        }
    }

    fn line(&self, line: &Line, worker: usize, task: TaskId) {
        for i in line.iter() {
            self.cell(i, worker, task);
        }
    }

    fn finish(self) -> Result<(), SweepError> {
        match self.error.into_inner() {
            Some(e) => Err(e.into()),
            None => Ok(()),
        }
    }
}

fn visit<'s>(ctx: &TaskCtx<'_, 's>, node: &'s DissectionNode, relax: &'s Relax<'s>) {
    let dims = relax.stencil.dims();
    let (worker, task) = (ctx.worker_index(), ctx.task_id());
    if node.is_leaf() {
        for line in node.region.lines(dims) {
            relax.line(&line, worker, task);
        }
        return;
    }
    ctx.fork_join(
        node.children
            .iter()
            .map(|child| move |ctx: &TaskCtx<'_, 's>| visit(ctx, child, relax)),
    );
    for &c in &node.separator {
        relax.cell(dims.index_unchecked(c), worker, task);
    }
}

fn submit_groups<'s>(scope: &Scope<'s>, groups: &'s [TaskGroup], relax: &'s Relax<'s>) {
    for g in groups {
        scope.submit(&g.ins, &g.outs, move |ctx| {
            let (worker, task) = (ctx.worker_index(), ctx.task_id());
            for &c in &g.cells {
                relax.cell(c, worker, task);
            }
        });
    }
}

/// A strategy prepared for one mesh shape, stencil and cost model.
#[derive(Debug, Clone)]
pub struct Sweeper {
    strategy: Strategy,
    stencil: Stencil,
    cost: CostModel,
    plan: Plan,
}

impl Sweeper {
    /// `threads` only matters for nested dissection, whose depth depends on it.
    pub fn new(
        strategy: Strategy,
        kind: StencilKind,
        cost: CostModel,
        dims: MeshDims,
        threads: usize,
    ) -> Result<Self, SweepError> {
        let stencil = Stencil::new(kind, dims)?;
        let plan = match strategy.kind {
            StrategyKind::Serial => Plan::Serial(Region::interior(dims).lines(dims).collect()),
            StrategyKind::Colouring | StrategyKind::HybSync => Plan::Colours(colouring::colour_passes(dims, kind)),
            StrategyKind::NestedDissection => Plan::Dissection(dissect(Region::interior(dims), threads, dims.dim())),
            StrategyKind::TaskGraph => Plan::Tasks(taskgraph::task_groups(
                &stencil,
                SubmissionOrder::Lexicographic,
                strategy.chunk,
            )),
            StrategyKind::HybDepend => Plan::Tasks(taskgraph::task_groups(
                &stencil,
                SubmissionOrder::ColourMajor,
                strategy.chunk,
            )),
        };
        Ok(Self {
            strategy,
            stencil,
            cost,
            plan,
        })
    }

    #[doc(hidden)]
    pub fn inject_fault(&mut self, fault: Fault) {
        match fault {
            Fault::MergedColours => {
                if let Plan::Colours(_) = self.plan {
                    self.plan = Plan::Colours(vec![colouring::single_pass(self.stencil.dims())]);
                }
            }
        }
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn dims(&self) -> MeshDims {
        self.stencil.dims()
    }

    pub fn kind(&self) -> StencilKind {
        self.stencil.kind()
    }

    /// The dissection tree, for nested dissection sweepers.
    pub fn dissection(&self) -> Option<&DissectionNode> {
        match &self.plan {
            Plan::Dissection(root) => Some(root),
            _ => None,
        }
    }

    /// One sweep. `rt` may be `None` only for the serial strategy.
    pub fn sweep(&self, rt: Option<&Runtime>, mesh: &mut Mesh, trace: Option<&ExecutionTrace>) -> Result<(), SweepError> {
        self.run(rt, mesh, trace, false).map(drop)
    }

    /// One sweep that also returns the dependence edges the runtime created
    /// (empty for strategies without dependent tasks).
    pub fn sweep_logging_edges(
        &self,
        rt: Option<&Runtime>,
        mesh: &mut Mesh,
        trace: Option<&ExecutionTrace>,
    ) -> Result<Vec<DependenceEdge>, SweepError> {
        self.run(rt, mesh, trace, true)
    }

    fn run(
        &self,
        rt: Option<&Runtime>,
        mesh: &mut Mesh,
        trace: Option<&ExecutionTrace>,
        log_edges: bool,
    ) -> Result<Vec<DependenceEdge>, SweepError> {
        let dims = self.stencil.dims();
        if mesh.dims() != dims {
            return Err(SweepError::ShapeMismatch {
                want: dims,
                got: mesh.dims(),
            });
        }
        let relax = Relax {
            stencil: &self.stencil,
            cells: mesh.shared(),
            cost: self.cost,
            total: dims.interior_len(),
            trace,
            error: OnceLock::new(),
        };
        let mut edges = Vec::new();

        if let Plan::Serial(lines) = &self.plan {
            for line in lines {
                relax.line(line, 0, 0);
            }
            return relax.finish().map(|()| edges);
        }

        let rt = rt.ok_or(SweepError::NoRuntime(self.strategy.kind))?;
        let relax_ref = &relax;
        let waited: Result<(), RuntimeError> = rt.scope(|s| match (&self.plan, self.strategy.kind) {
            (Plan::Colours(passes), StrategyKind::HybSync) => {
                for pass in passes {
                    s.parallel_for(0..pass.units.len(), self.strategy.schedule, |ctx, u| {
                        for line in &pass.units[u] {
                            for c in line.iter() {
                                ctx.spawn(move |ctx| relax_ref.cell(c, ctx.worker_index(), ctx.task_id()));
                            }
                        }
                    });
                    s.taskwait()?;
                }
                Ok(())
            }
            (Plan::Colours(passes), _) => {
                for pass in passes {
                    s.parallel_for(0..pass.units.len(), self.strategy.schedule, |ctx, u| {
                        for line in &pass.units[u] {
                            relax_ref.line(line, ctx.worker_index(), 0);
                        }
                    });
                }
                Ok(())
            }
            (Plan::Dissection(root), _) => {
                s.spawn(move |ctx| visit(ctx, root, relax_ref));
                s.taskwait()
            }
            (Plan::Tasks(groups), _) => {
                if log_edges {
                    s.log_edges();
                }
                submit_groups(s, groups, relax_ref);
                let r = s.taskwait();
                edges = s.edges();
                r
            }
            (Plan::Serial(_), _) => unreachable!(),
        });
        waited?;
        relax.finish().map(|()| edges)
    }
}

/// Single-threaded lexicographic sweep.
pub fn sweep_serial(mesh: &mut Mesh, kind: StencilKind, cost: CostModel) -> Result<(), SweepError> {
    Sweeper::new(Strategy::new(StrategyKind::Serial), kind, cost, mesh.dims(), 1)?.sweep(None, mesh, None)
}

/// One pass per colour; each pass is a parallel loop over the colour's
/// outer rows (2D) or planes (3D).
pub fn sweep_colouring(
    rt: &Runtime,
    mesh: &mut Mesh,
    kind: StencilKind,
    cost: CostModel,
    schedule: Schedule,
) -> Result<(), SweepError> {
    let strategy = Strategy::new(StrategyKind::Colouring).with_schedule(schedule);
    Sweeper::new(strategy, kind, cost, mesh.dims(), rt.threads())?.sweep(Some(rt), mesh, None)
}

/// Fork-join over the dissection tree: children as tasks, then the
/// node's separator on the worker that owns the node.
pub fn sweep_nested_dissection(rt: &Runtime, mesh: &mut Mesh, kind: StencilKind, cost: CostModel) -> Result<(), SweepError> {
    let strategy = Strategy::new(StrategyKind::NestedDissection);
    Sweeper::new(strategy, kind, cost, mesh.dims(), rt.threads())?.sweep(Some(rt), mesh, None)
}

/// Per-cell tasks with `out` on the cell and `in` on its neighbours,
/// submitted lexicographically.
pub fn sweep_taskgraph(
    rt: &Runtime,
    mesh: &mut Mesh,
    kind: StencilKind,
    cost: CostModel,
    chunk: usize,
) -> Result<(), SweepError> {
    let strategy = Strategy::new(StrategyKind::TaskGraph).with_chunk(chunk);
    Sweeper::new(strategy, kind, cost, mesh.dims(), rt.threads())?.sweep(Some(rt), mesh, None)
}

/// Same tasks as [`sweep_taskgraph`], submitted colour by colour with one
/// wait at the end.
pub fn sweep_hyb_depend(
    rt: &Runtime,
    mesh: &mut Mesh,
    kind: StencilKind,
    cost: CostModel,
    chunk: usize,
) -> Result<(), SweepError> {
    let strategy = Strategy::new(StrategyKind::HybDepend).with_chunk(chunk);
    Sweeper::new(strategy, kind, cost, mesh.dims(), rt.threads())?.sweep(Some(rt), mesh, None)
}

/// Colouring whose loop bodies spawn one dependency-free task per cell, with
/// a taskwait closing each colour.
pub fn sweep_hyb_sync(
    rt: &Runtime,
    mesh: &mut Mesh,
    kind: StencilKind,
    cost: CostModel,
    schedule: Schedule,
) -> Result<(), SweepError> {
    let strategy = Strategy::new(StrategyKind::HybSync).with_schedule(schedule);
    Sweeper::new(strategy, kind, cost, mesh.dims(), rt.threads())?.sweep(Some(rt), mesh, None)
}

/// Serial reference that visits cells colour by colour in lexicographic
/// order within each colour.
pub fn sweep_colour_order_serial(mesh: &mut Mesh, kind: StencilKind, cost: CostModel) -> Result<(), SweepError> {
    let dims = mesh.dims();
    let stencil = Stencil::new(kind, dims)?;
    let total = dims.interior_len();
    let cells = mesh.shared();
    for p in 0..colour_count(kind) {
        for c in dims.interior_cells().filter(|&c| colour_of(kind, c) == p) {
            let k = cost.k_at(dims.interior_rank(c), total);
            stencil.update(&cells, dims.index_unchecked(c), k)?;
        }
    }
    Ok(())
}
