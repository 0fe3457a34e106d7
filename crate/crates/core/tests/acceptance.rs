//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria that depend on the host (core count) print FAIL when the host
//! cannot meet their precondition but only fail the process when
//! `STENCIL_ACCEPTANCE_STRICT=1` is set.

use std::collections::{BTreeSet, HashMap};
use std::process::ExitCode;
use std::time::Instant;

use stencil_core::bench::{
    run_benchmark, run_verification, trace_point_on, BenchConfig, BenchPoint, Suite, VerifyOptions,
};
use stencil_core::strategies::{colour_of, dissect, task_records, Region, SubmissionOrder};
use stencil_core::taskrt::{oracle_edges, tracker_edges};
use stencil_core::trace::{band_contiguity, check_adjacency_exclusion, AssignmentMap};
use stencil_core::{CostModel, MeshDims, Runtime, Schedule, StencilKind, StrategyKind};

struct Outcome {
    id: u32,
    passed: bool,
    host_gated: bool,
    detail: String,
}

fn main() -> ExitCode {
    let strict = std::env::var("STENCIL_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let criteria: [fn() -> Vec<Outcome>; 9] = [
        || vec![c1_oracle_equivalence()],
        || vec![c2_wavefront()],
        || vec![c3_head_start()],
        c4_exclusion_and_c10,
        || vec![c5_colouring_determinism()],
        || vec![c6_convergence()],
        || vec![c7_assignment_maps()],
        || vec![c8_speedup()],
        || vec![c9_cheap_overhead()],
    ];
    let mut fatal = false;
    for f in criteria {
        let t = Instant::now();
        for o in f() {
            let verdict = if o.passed { "PASS" } else { "FAIL" };
            println!("{verdict} criterion {:>2}: {} [{:.1}s]", o.id, o.detail, t.elapsed().as_secs_f64());
            if !o.passed && (!o.host_gated || strict) {
                fatal = true;
            }
        }
    }
    if fatal {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn outcome(id: u32, passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        id,
        passed,
        host_gated: false,
        detail: detail.into(),
    }
}

fn c1_oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let mut graphs = 0;
    let mut bad = Vec::new();
    for kind in StencilKind::ALL {
        let max = if kind.dim() == 2 { 6 } else { 4 };
        for n in 1..=max {
            let dims = MeshDims::new(kind.dim(), n).unwrap();
            for order in [SubmissionOrder::Lexicographic, SubmissionOrder::ColourMajor] {
                let recs = task_records(dims, kind, order, 1).unwrap();
                let got: BTreeSet<_> = tracker_edges(&recs).unwrap().into_iter().collect();
                graphs += 1;
                if got != oracle_edges(&recs) {
                    bad.push(format!("{kind} n={n} {order:?}"));
                }
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(
        1,
        bad.is_empty() && secs < 60.0,
        format!("submit edges = oracle on {graphs} graphs in {secs:.2}s (limit 60s); mismatches: {bad:?}"),
    )
}

fn c2_wavefront() -> Outcome {
    let dims = MeshDims::new(2, 3).unwrap();
    let recs = task_records(dims, StencilKind::Fd5, SubmissionOrder::Lexicographic, 1).unwrap();
    let edges = tracker_edges(&recs).unwrap();
    let task = |x: usize, y: usize| ((y - 1) * 3 + x) as u64;
    let mut ok = true;
    for y in 1..=3 {
        for x in 1..=3 {
            let got: BTreeSet<u64> = edges.iter().filter(|e| e.to == task(x, y)).map(|e| e.from).collect();
            let mut want = BTreeSet::new();
            if x > 1 {
                want.insert(task(x - 1, y));
            }
            if y > 1 {
                want.insert(task(x, y - 1));
            }
            ok &= got == want;
        }
    }
    outcome(2, ok, "3x3 fd5 predecessors are exactly west and south neighbours")
}

fn c3_head_start() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    let mut check = |kind: StencilKind, n: usize, head: usize| {
        let dims = MeshDims::new(2, n).unwrap();
        let recs = task_records(dims, kind, SubmissionOrder::ColourMajor, 1).unwrap();
        let edges = tracker_edges(&recs).unwrap();
        let targets: BTreeSet<u64> = edges.iter().map(|e| e.to).collect();
        let free = (1..=head as u64).filter(|id| !targets.contains(id)).count();
        let next_has_pred = targets.contains(&(head as u64 + 1));
        ok &= free == head && next_has_pred;
        notes.push(format!("{kind} n={n}: {free}/{head} free"));
    };
    for n in [4, 6, 8] {
        check(StencilKind::Fd5, n, (n * n).div_ceil(2));
    }
    for n in [4, 6, 8] {
        let first = MeshDims::new(2, n)
            .unwrap()
            .interior_cells()
            .filter(|&c| colour_of(StencilKind::Fe9, c) == 0)
            .count();
        check(StencilKind::Fe9, n, first);
    }
    outcome(3, ok, format!("hyb-depend first colour needs no waits ({})", notes.join(", ")))
}

fn c4_exclusion_and_c10() -> Vec<Outcome> {
    let started = Instant::now();
    let threads = [2, 4, 8];
    let sizes = [8, 16, 32];
    let reps = 10;
    let sweeps = 1;
    let runtimes: Vec<Runtime> = threads.iter().map(|&t| Runtime::new(t).unwrap()).collect();
    let mut runs = 0;
    let mut violations = Vec::new();
    let mut incomplete = Vec::new();
    for strategy in StrategyKind::ALL {
        for kind in StencilKind::ALL {
            for rt in &runtimes {
                for n in sizes {
                    let p = BenchPoint {
                        dim: kind.dim(),
                        n,
                        kind,
                        cost: CostModel::Constant(0),
                        strategy,
                        threads: rt.threads(),
                        schedule: Schedule::Dynamic(1),
                        chunk: 1,
                        sweeps,
                    };
                    let dims = p.dims();
                    for rep in 0..reps {
                        let rt = (strategy != StrategyKind::Serial).then_some(rt);
                        let run = trace_point_on(rt, &p, 100 + rep, None).unwrap();
                        runs += 1;
                        let tag = format!("{strategy} {kind} T={} n={n} rep {rep}", p.threads);
                        let v = check_adjacency_exclusion(&run.records, kind, dims);
                        if !v.is_empty() {
                            violations.push(format!("{tag}: {}", v.len()));
                        }
                        let mut per_cell: HashMap<usize, usize> = HashMap::new();
                        for r in &run.records {
                            *per_cell.entry(r.cell).or_default() += 1;
                        }
                        let total = n.pow(kind.dim() as u32);
                        let exact = run.records.len() == sweeps * total
                            && per_cell.len() == total
                            && dims.interior_cells().all(|c| per_cell.get(&dims.index(c).unwrap()) == Some(&sweeps));
                        if !exact {
                            incomplete.push(tag);
                        }
                    }
                }
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    vec![
        outcome(
            4,
            violations.is_empty() && secs < 600.0,
            format!("no concurrent neighbour updates in {runs} traced runs, {secs:.1}s (limit 600s); violations: {violations:?}"),
        ),
        outcome(
            10,
            incomplete.is_empty(),
            format!("record count = sweeps x n^dim and each cell written once per sweep in {runs} runs; failures: {incomplete:?}"),
        ),
    ]
}

fn c5_colouring_determinism() -> Outcome {
    let started = Instant::now();
    let opts = VerifyOptions {
        oracle_threads: vec![1, 2, 4, 8],
        oracle_sizes: vec![8, 33],
        oracle_sweeps: 100,
        ..VerifyOptions::default()
    };
    let report = run_verification(Suite::Oracle, &opts).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let failed: Vec<String> = report.outcomes.iter().filter(|o| !o.passed).map(|o| o.to_string()).collect();
    outcome(
        5,
        report.passed() && secs < 120.0,
        format!(
            "colouring and hyb-sync bit-identical across T in {{1,2,4,8}}, static and dynamic, n in {{8,33}}, all stencils, 100 sweeps, {} configurations in {secs:.1}s (limit 120s); failures: {failed:?}",
            report.outcomes.len()
        ),
    )
}

fn c6_convergence() -> Outcome {
    let started = Instant::now();
    let opts = VerifyOptions {
        convergence: vec![(StencilKind::Fd5, 33), (StencilKind::Fd7, 17)],
        ..VerifyOptions::default()
    };
    let report = run_verification(Suite::Convergence, &opts).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let details: Vec<String> = report.outcomes.iter().map(|o| format!("{}: {}", o.name, o.detail)).collect();
    outcome(
        6,
        report.passed() && secs < 120.0,
        format!("{} [{secs:.1}s, limit 120s]", details.join("; ")),
    )
}

fn c7_assignment_maps() -> Outcome {
    let kind = StencilKind::Fd5;
    let dims = MeshDims::new(2, 10).unwrap();
    let rt = Runtime::new(3).unwrap();
    let point = |strategy| BenchPoint {
        dim: 2,
        n: 10,
        kind,
        cost: CostModel::Constant(0),
        strategy,
        threads: 3,
        schedule: Schedule::Static,
        chunk: 1,
        sweeps: 1,
    };
    let col = trace_point_on(Some(&rt), &point(StrategyKind::Colouring), 1, None).unwrap();
    let col_map = AssignmentMap::from_trace(&col.records, dims, 0).unwrap();
    let banded = band_contiguity(&col_map, |c| colour_of(kind, c));

    let nd = trace_point_on(Some(&rt), &point(StrategyKind::NestedDissection), 1, None).unwrap();
    let nd_map = AssignmentMap::from_trace(&nd.records, dims, 0).unwrap();
    let tree = dissect(Region::interior(dims), 3, 2);
    let leaves = tree.leaves();
    let mono = leaves.iter().all(|leaf| {
        let workers: BTreeSet<usize> = leaf.region.cells().map(|c| nd_map.worker(c)).collect();
        workers.len() == 1
    });
    let in_range = col_map.check_workers(3).is_ok() && nd_map.check_workers(3).is_ok();
    outcome(
        7,
        banded && mono && in_range,
        format!(
            "n=10 T=3: colouring static band contiguity {banded}; {} dissection leaf blocks monochrome {mono}",
            leaves.len()
        ),
    )
}

fn c8_speedup() -> Outcome {
    let physical = num_cpus::get_physical();
    let config = BenchConfig {
        dim: 2,
        sizes: vec![128],
        kind: StencilKind::Fd5,
        cost: CostModel::Constant(100),
        strategy: StrategyKind::Serial,
        threads: vec![1],
        schedule: Schedule::Static,
        chunk: 1,
        sweeps: 50,
        reps: 3,
        seed: 8,
    };
    let started = Instant::now();
    let serial = run_benchmark(&config).unwrap()[0].median_seconds();
    let colouring = run_benchmark(&BenchConfig {
        strategy: StrategyKind::Colouring,
        threads: vec![physical],
        ..config
    })
    .unwrap()[0]
        .median_seconds();
    let secs = started.elapsed().as_secs_f64();
    let speedup = serial / colouring;
    let enough_cores = physical >= 4;
    let mut detail = format!(
        "const:100 fd5 n=128 50 sweeps, T={physical} physical cores: colouring {speedup:.2}x serial (report at 2x, fail below 1.5x) [{secs:.1}s]"
    );
    if !enough_cores {
        detail.push_str("; host has fewer than 4 physical cores, precondition unmet");
    } else if (1.5..2.0).contains(&speedup) {
        detail.push_str("; below the 2x report threshold");
    }
    Outcome {
        id: 8,
        passed: enough_cores && speedup >= 1.5 && secs < 300.0,
        host_gated: true,
        detail,
    }
}

fn c9_cheap_overhead() -> Outcome {
    let config = BenchConfig {
        dim: 2,
        sizes: vec![4],
        kind: StencilKind::Fd5,
        cost: CostModel::Constant(0),
        strategy: StrategyKind::Serial,
        threads: vec![4],
        schedule: Schedule::Static,
        chunk: 1,
        sweeps: 2000,
        reps: 5,
        seed: 9,
    };
    let serial = run_benchmark(&config).unwrap()[0].median_ns_per_cell_update();
    let tasks = run_benchmark(&BenchConfig {
        strategy: StrategyKind::TaskGraph,
        ..config
    })
    .unwrap()[0]
        .median_ns_per_cell_update();
    outcome(
        9,
        tasks > serial,
        format!("const:0 fd5 n=4 T=4: taskgraph {tasks:.1} ns/update vs serial {serial:.1} ns/update"),
    )
}
