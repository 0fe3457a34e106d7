use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use super::{trace_point_on, BenchError, BenchPoint};
use crate::kernels::{residual_max, CostModel, StencilKind};
use crate::mesh::{Mesh, MeshDims};
use crate::strategies::{
    sweep_colour_order_serial, task_records, Fault, Strategy, StrategyKind, SubmissionOrder, Sweeper,
};
use crate::taskrt::{oracle_edges, tracker_edges, DependenceEdge, Runtime, Schedule};
use crate::trace::{check_adjacency_exclusion, check_edge_order, write_counts};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Races,
    Deps,
    Convergence,
    Oracle,
    All,
}

impl Suite {
    fn expand(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![Suite::Deps, Suite::Oracle, Suite::Convergence, Suite::Races],
            s => vec![s],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Races => "races",
            Suite::Deps => "deps",
            Suite::Convergence => "convergence",
            Suite::Oracle => "oracle",
            Suite::All => "all",
        })
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "races" => Suite::Races,
            "deps" => Suite::Deps,
            "convergence" => Suite::Convergence,
            "oracle" => Suite::Oracle,
            "all" => Suite::All,
            _ => return Err(format!("unknown suite {s:?}")),
        })
    }
}

/// Matrix sizes for the suites. The default is the full matrix.
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Thread counts for the races suite.
    pub race_threads: Vec<usize>,
    pub race_sizes: Vec<usize>,
    pub race_reps: usize,
    pub race_sweeps: usize,
    /// Thread counts and sizes for the colouring determinism check.
    pub oracle_threads: Vec<usize>,
    pub oracle_sizes: Vec<usize>,
    pub oracle_sweeps: usize,
    /// `(kind, n)` pairs for the convergence suite.
    pub convergence: Vec<(StencilKind, usize)>,
    pub convergence_threads: usize,
    pub seed: u64,
    /// Replaces the races matrix by a stressed run of a deliberately broken
    /// colouring.
    pub fault: Option<Fault>,
    /// How long the faulted run keeps repeating while looking for a race.
    pub fault_budget: Duration,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            race_threads: vec![2, 4, 8],
            race_sizes: vec![8, 16, 32],
            race_reps: 10,
            race_sweeps: 1,
            oracle_threads: vec![1, 2, 4, 8],
            oracle_sizes: vec![8, 33],
            oracle_sweeps: 100,
            convergence: vec![(StencilKind::Fd5, 33), (StencilKind::Fd7, 17)],
            convergence_threads: 4,
            seed: 2024,
            fault: None,
            fault_budget: Duration::from_secs(30),
        }
    }
}

impl VerifyOptions {
    /// A small matrix for smoke tests.
    pub fn quick() -> Self {
        Self {
            race_threads: vec![2, 3],
            race_sizes: vec![5, 8],
            race_reps: 2,
            race_sweeps: 2,
            oracle_threads: vec![1, 3],
            oracle_sizes: vec![6],
            oracle_sweeps: 5,
            convergence: vec![(StencilKind::Fd5, 9), (StencilKind::Fe9, 7)],
            convergence_threads: 3,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub suite: Suite,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} [{}] {}: {}", self.suite, self.name, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerificationReport {
    pub outcomes: Vec<CheckOutcome>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    fn push(&mut self, suite: Suite, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.outcomes.push(CheckOutcome {
            suite,
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for o in &self.outcomes {
            writeln!(f, "{o}")?;
        }
        let failed = self.outcomes.iter().filter(|o| !o.passed).count();
        write!(f, "{} checks, {failed} failed", self.outcomes.len())
    }
}

pub fn run_verification(suite: Suite, opts: &VerifyOptions) -> Result<VerificationReport, BenchError> {
    let mut report = VerificationReport::default();
    for s in suite.expand() {
        match s {
            Suite::Deps => deps(&mut report)?,
            Suite::Oracle => oracle(&mut report, opts)?,
            Suite::Convergence => convergence(&mut report, opts)?,
            Suite::Races if opts.fault.is_some() => faulted_races(&mut report, opts)?,
            Suite::Races => races(&mut report, opts)?,
            Suite::All => unreachable!(),
        }
    }
    Ok(report)
}

fn kinds_and_sizes() -> impl Iterator<Item = (StencilKind, usize)> {
    StencilKind::ALL.into_iter().flat_map(|k| {
        let max = if k.dim() == 2 { 6 } else { 4 };
        (1..=max).map(move |n| (k, n))
    })
}

fn deps(report: &mut VerificationReport) -> Result<(), BenchError> {
    for order in [SubmissionOrder::Lexicographic, SubmissionOrder::ColourMajor] {
        for chunk in [1, 3] {
            let mut mismatches = Vec::new();
            let mut graphs = 0;
            for (kind, n) in kinds_and_sizes() {
                let dims = MeshDims::new(kind.dim(), n).expect("valid");
                let recs = task_records(dims, kind, order, chunk)?;
                let got: BTreeSet<_> = tracker_edges(&recs)
                    .expect("monotonic ids")
                    .into_iter()
                    .collect();
                if got != oracle_edges(&recs) {
                    mismatches.push(format!("{kind} n={n}"));
                }
                graphs += 1;
            }
            report.push(
                Suite::Deps,
                format!("tracker = oracle, {order:?} order, chunk {chunk}"),
                mismatches.is_empty(),
                if mismatches.is_empty() {
                    format!("{graphs} task graphs")
                } else {
                    format!("mismatch on {}", mismatches.join(", "))
                },
            );
        }
    }

    // Edges the runtime creates are oracle edges whose source had not yet
    // finished, and every one is honoured in time.
    let rt = Runtime::new(3)?;
    let mut problems = Vec::new();
    for kind in StencilKind::ALL {
        for strategy in [StrategyKind::TaskGraph, StrategyKind::HybDepend] {
            let n = if kind.dim() == 2 { 6 } else { 4 };
            let point = point(kind, n, strategy, 3, CostModel::Constant(20), 1);
            let run = trace_point_on(Some(&rt), &point, 7, None)?;
            let order = match strategy {
                StrategyKind::TaskGraph => SubmissionOrder::Lexicographic,
                _ => SubmissionOrder::ColourMajor,
            };
            let oracle = oracle_edges(&task_records(point.dims(), kind, order, 1)?);
            // runtime ids keep counting across scopes; rebase to submission order
            let base = run.records.iter().map(|r| r.task).min().unwrap_or(1) - 1;
            let rebased = |e: &DependenceEdge| DependenceEdge::new(e.from - base, e.to - base);
            if let Some(e) = run.edges.iter().map(rebased).find(|e| !oracle.contains(e)) {
                problems.push(format!("{strategy} {kind}: runtime edge {}->{} not in oracle", e.from, e.to));
            }
            let late = check_edge_order(&run.records, &run.edges);
            if !late.is_empty() {
                problems.push(format!("{strategy} {kind}: {} edges violated", late.len()));
            }
        }
    }
    report.push(
        Suite::Deps,
        "runtime edges within oracle and honoured",
        problems.is_empty(),
        if problems.is_empty() {
            "taskgraph and hyb-depend, all stencils".to_owned()
        } else {
            problems.join("; ")
        },
    );
    Ok(())
}

fn point(kind: StencilKind, n: usize, strategy: StrategyKind, threads: usize, cost: CostModel, sweeps: usize) -> BenchPoint {
    BenchPoint {
        dim: kind.dim(),
        n,
        kind,
        cost,
        strategy,
        threads,
        schedule: Schedule::Static,
        chunk: 1,
        sweeps,
    }
}

fn oracle(report: &mut VerificationReport, opts: &VerifyOptions) -> Result<(), BenchError> {
    let runtimes: Vec<Runtime> = opts
        .oracle_threads
        .iter()
        .map(|&t| Runtime::new(t))
        .collect::<Result<_, _>>()?;
    for kind in StencilKind::ALL {
        for &n in &opts.oracle_sizes {
            let dims = MeshDims::new(kind.dim(), n).expect("valid");
            let base = Mesh::init(dims, opts.seed, 0.0);
            let mut want = base.clone();
            for _ in 0..opts.oracle_sweeps {
                sweep_colour_order_serial(&mut want, kind, CostModel::Constant(0))?;
            }
            let want = want.digest();
            let mut differing = Vec::new();
            let mut runs = 0;
            for strategy in [StrategyKind::Colouring, StrategyKind::HybSync] {
                for schedule in [Schedule::Static, Schedule::Dynamic(1)] {
                    let s = Strategy::new(strategy).with_schedule(schedule);
                    let sweeper = Sweeper::new(s, kind, CostModel::Constant(0), dims, 1)?;
                    for rt in &runtimes {
                        let mut m = base.clone();
                        for _ in 0..opts.oracle_sweeps {
                            sweeper.sweep(Some(rt), &mut m, None)?;
                        }
                        runs += 1;
                        if m.digest() != want {
                            differing.push(format!("{strategy} {schedule} T={}", rt.threads()));
                        }
                    }
                }
            }
            report.push(
                Suite::Oracle,
                format!("colouring = serial colour order, {kind} n={n}"),
                differing.is_empty(),
                if differing.is_empty() {
                    format!("{runs} runs bit-identical, digest {want}")
                } else {
                    format!("differs: {}", differing.join(", "))
                },
            );
        }
    }
    Ok(())
}

/// Sweeps until the residual drops below `tol`, giving up after `limit`.
fn sweeps_to_converge(
    sweeper: &Sweeper,
    rt: Option<&Runtime>,
    mesh: &mut Mesh,
    tol: f64,
    limit: usize,
) -> Result<Option<usize>, BenchError> {
    let kind = sweeper.kind();
    for s in 1..=limit {
        sweeper.sweep(rt, mesh, None)?;
        if residual_max(mesh, kind)? < tol {
            return Ok(Some(s));
        }
    }
    Ok(None)
}

pub(crate) const CONVERGENCE_TOL: f64 = 1e-8;

fn convergence(report: &mut VerificationReport, opts: &VerifyOptions) -> Result<(), BenchError> {
    let rt = Runtime::new(opts.convergence_threads)?;
    for &(kind, n) in &opts.convergence {
        let dims = MeshDims::new(kind.dim(), n).expect("valid");
        let base = Mesh::init(dims, opts.seed, 0.0);
        let serial = Sweeper::new(Strategy::new(StrategyKind::Serial), kind, CostModel::Constant(0), dims, 1)?;
        let Some(budget) = sweeps_to_converge(&serial, None, &mut base.clone(), CONVERGENCE_TOL, 1_000_000)? else {
            report.push(Suite::Convergence, format!("{kind} n={n}"), false, "serial did not converge");
            continue;
        };
        let mut counts = vec![format!("serial {budget}")];
        let mut failed = Vec::new();
        for strategy in StrategyKind::ALL.into_iter().filter(|&s| s != StrategyKind::Serial) {
            let sweeper = Sweeper::new(Strategy::new(strategy), kind, CostModel::Constant(0), dims, rt.threads())?;
            match sweeps_to_converge(&sweeper, Some(&rt), &mut base.clone(), CONVERGENCE_TOL, 2 * budget)? {
                Some(s) => counts.push(format!("{strategy} {s}")),
                None => failed.push(format!("{strategy} > {}", 2 * budget)),
            }
        }
        report.push(
            Suite::Convergence,
            format!("{kind} n={n} residual < {CONVERGENCE_TOL:e} within 2x serial"),
            failed.is_empty(),
            if failed.is_empty() {
                format!("sweeps: {}", counts.join(", "))
            } else {
                format!("over budget: {}", failed.join(", "))
            },
        );
    }
    Ok(())
}

fn races(report: &mut VerificationReport, opts: &VerifyOptions) -> Result<(), BenchError> {
    let runtimes: Vec<Runtime> = opts
        .race_threads
        .iter()
        .map(|&t| Runtime::new(t))
        .collect::<Result<_, _>>()?;
    for strategy in StrategyKind::ALL {
        for kind in StencilKind::ALL {
            let mut problems = Vec::new();
            let mut runs = 0;
            let mut records = 0;
            for rt in &runtimes {
                for &n in &opts.race_sizes {
                    let mut p = point(kind, n, strategy, rt.threads(), CostModel::Constant(0), opts.race_sweeps);
                    p.schedule = Schedule::Dynamic(1);
                    let rt = (strategy != StrategyKind::Serial).then_some(rt);
                    for rep in 0..opts.race_reps {
                        let run = trace_point_on(rt, &p, opts.seed + rep as u64, None)?;
                        runs += 1;
                        records += run.records.len();
                        let tag = format!("T={} n={n} rep {rep}", p.threads);
                        if let Some(msg) = completeness(&run.records, &p) {
                            problems.push(format!("{tag}: {msg}"));
                        }
                        let v = check_adjacency_exclusion(&run.records, kind, p.dims());
                        if !v.is_empty() {
                            problems.push(format!("{tag}: {} overlapping neighbour updates", v.len()));
                        }
                        let late = check_edge_order(&run.records, &run.edges);
                        if !late.is_empty() {
                            problems.push(format!("{tag}: {} dependence edges violated", late.len()));
                        }
                    }
                }
            }
            report.push(
                Suite::Races,
                format!("exclusion and exactly-once, {strategy} {kind}"),
                problems.is_empty(),
                if problems.is_empty() {
                    format!("{runs} traced runs, {records} records")
                } else {
                    problems.join("; ")
                },
            );
        }
    }
    Ok(())
}

/// Record count and per-cell write count for a traced run.
fn completeness(records: &[crate::trace::TraceRecord], p: &BenchPoint) -> Option<String> {
    let dims = p.dims();
    if records.len() != p.cell_updates() {
        return Some(format!("{} records, expected {}", records.len(), p.cell_updates()));
    }
    let counts = write_counts(records, dims.len());
    for (i, &c) in counts.iter().enumerate() {
        let want = if dims.is_halo_index(i) { 0 } else { p.sweeps };
        if c != want {
            return Some(format!("cell {} written {c} times", dims.coord_of(i)));
        }
    }
    None
}

fn faulted_races(report: &mut VerificationReport, opts: &VerifyOptions) -> Result<(), BenchError> {
    let fault = opts.fault.expect("fault set");
    let mut p = point(StencilKind::Fd5, 32, StrategyKind::Colouring, 4, CostModel::Constant(100), 1);
    p.schedule = Schedule::Dynamic(1);
    let rt = Runtime::new(p.threads)?;
    let started = Instant::now();
    let mut runs = 0;
    let mut violations = 0;
    while violations == 0 && (runs == 0 || started.elapsed() < opts.fault_budget) {
        let run = trace_point_on(Some(&rt), &p, opts.seed + runs, Some(fault))?;
        violations = check_adjacency_exclusion(&run.records, p.kind, p.dims()).len();
        runs += 1;
    }
    report.push(
        Suite::Races,
        format!("exclusion under injected fault {fault:?}, colouring fd5 n=32 T=4"),
        violations == 0,
        format!("{violations} overlapping neighbour updates after {runs} runs"),
    );
    Ok(())
}
