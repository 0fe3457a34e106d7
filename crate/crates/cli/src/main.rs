use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use stencil_core::bench::{
    run_benchmark, run_verification, trace_point, write_csv, BenchConfig, BenchError, Suite, VerifyOptions,
};
use stencil_core::strategies::{colour_of, Fault};
use stencil_core::trace::{band_contiguity, check_adjacency_exclusion, check_edge_order, write_dump, write_counts, AssignmentMap};
use stencil_core::{CostModel, Schedule, StencilKind, StrategyKind};

const EXIT_VERIFY: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "stencil-lab", version, about = "Benchmark and verify stencil sweep strategies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time sweeps and write one CSV row per repetition plus a median row.
    Run(RunArgs),
    /// Run traced sweeps, check them, and optionally write a map or dump.
    Trace(TraceArgs),
    /// Run the verification suites.
    Verify(VerifyArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long = "size", value_delimiter = ',', default_value = "16")]
    sizes: Vec<usize>,
    #[arg(long, default_value = "fd5")]
    stencil: StencilKind,
    #[arg(long, default_value = "const:0")]
    cost: CostModel,
    #[arg(long, default_value = "serial")]
    strategy: StrategyKind,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    threads: Vec<usize>,
    #[arg(long, default_value = "static")]
    schedule: Schedule,
    /// Cells per task for taskgraph and hyb-depend.
    #[arg(long, default_value_t = 1)]
    chunk: usize,
    #[arg(long, default_value_t = 100)]
    sweeps: usize,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    csv: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> BenchConfig {
        BenchConfig {
            dim: self.dim,
            sizes: self.sizes.clone(),
            kind: self.stencil,
            cost: self.cost,
            strategy: self.strategy,
            threads: self.threads.clone(),
            schedule: self.schedule,
            chunk: self.chunk,
            sweeps: self.sweeps,
            reps: self.reps,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Assignment map (binary PPM) of the first traced sweep.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Interior z plane for 3D maps.
    #[arg(long, default_value_t = 1)]
    slice: usize,
    /// Plain-text dump, one `task worker cell start end` line per update.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value = "all")]
    suite: Suite,
    /// Smaller matrices for a fast smoke run.
    #[arg(long)]
    quick: bool,
    /// Breaks colouring on purpose; the races suite is expected to fail.
    #[arg(long, hide = true)]
    inject_fault: bool,
    #[arg(long, hide = true, default_value_t = 30)]
    fault_budget_secs: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(&a),
        Command::Trace(a) => trace(&a),
        Command::Verify(a) => verify(&a),
    };
    match result {
        Ok(code) => code,
        Err(BenchError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(args: &RunArgs) -> Result<ExitCode, BenchError> {
    let config = args.config();
    config.validate()?;
    let out: Box<dyn Write> = match &args.csv {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    };
    let results = run_benchmark(&config)?;
    write_csv(&results, out)?;
    for r in &results {
        let p = r.point;
        eprintln!(
            "{} n={} T={}: median {:.3} ns/cell-update (min {:.6} s, max {:.6} s)",
            p.strategy,
            p.n,
            p.threads,
            r.median_ns_per_cell_update(),
            r.min_seconds(),
            r.max_seconds()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn trace(args: &TraceArgs) -> Result<ExitCode, BenchError> {
    let config = args.run.config();
    let points = config.points()?;
    if points.len() != 1 {
        return Err(BenchError::Config("trace takes a single size and thread count".into()));
    }
    let p = points[0];
    let run = trace_point(&p, config.seed, None)?;
    let dims = p.dims();

    let mut ok = true;
    let violations = check_adjacency_exclusion(&run.records, p.kind, dims);
    let late = check_edge_order(&run.records, &run.edges);
    let counts = write_counts(&run.records, dims.len());
    let exact = (0..dims.len()).all(|i| counts[i] == if dims.is_halo_index(i) { 0 } else { p.sweeps });
    println!("records: {} (expected {})", run.records.len(), p.cell_updates());
    println!("every interior cell written {} time(s): {}", p.sweeps, verdict(exact));
    println!("overlapping neighbour updates: {}", violations.len());
    println!("dependence edges: {}, violated: {}", run.edges.len(), late.len());
    ok &= exact && violations.is_empty() && late.is_empty() && run.records.len() == p.cell_updates();

    if let Some(path) = &args.dump {
        let mut w = BufWriter::new(File::create(path)?);
        write_dump(&run.records, &mut w)?;
        w.flush()?;
    }
    if let Some(path) = &args.map {
        let map = AssignmentMap::from_trace(&run.records, dims, 0).map_err(|e| BenchError::Config(e.to_string()))?;
        let ppm = map.to_ppm(args.slice).map_err(|e| BenchError::Config(e.to_string()))?;
        std::fs::write(path, ppm)?;
        let banded = band_contiguity(&map, |c| colour_of(p.kind, c));
        println!("band contiguity per colour: {banded}");
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(EXIT_VERIFY) })
}

fn verify(args: &VerifyArgs) -> Result<ExitCode, BenchError> {
    let mut opts = if args.quick {
        VerifyOptions::quick()
    } else {
        VerifyOptions::default()
    };
    if args.inject_fault {
        opts.fault = Some(Fault::MergedColours);
        opts.fault_budget = Duration::from_secs(args.fault_budget_secs);
    }
    let report = run_verification(args.suite, &opts)?;
    println!("{report}");
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERIFY)
    })
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "yes"
    } else {
        "NO"
    }
}
