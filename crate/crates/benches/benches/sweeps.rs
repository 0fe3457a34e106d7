use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use stencil_core::strategies::{Strategy, Sweeper};
use stencil_core::{CostModel, Mesh, MeshDims, Runtime, StencilKind, StrategyKind};

fn threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get()).min(8)
}

fn sweep(c: &mut Criterion, name: &str, kind: StencilKind, n: usize, cost: CostModel) {
    let dims = MeshDims::new(kind.dim(), n).unwrap();
    let t = threads();
    let rt = Runtime::new(t).unwrap();
    let mut group = c.benchmark_group(name);
    group.throughput(Throughput::Elements(dims.interior_len() as u64));
    for s in StrategyKind::ALL {
        let sweeper = Sweeper::new(Strategy::new(s), kind, cost, dims, t).unwrap();
        let mut mesh = Mesh::init(dims, 1, 0.0);
        let rt = (s != StrategyKind::Serial).then_some(&rt);
        group.bench_function(BenchmarkId::new(s.to_string(), t), |b| {
            b.iter(|| sweeper.sweep(rt, &mut mesh, None).unwrap())
        });
    }
    group.finish();
}

fn cheap(c: &mut Criterion) {
    sweep(c, "fd5_n64_const0", StencilKind::Fd5, 64, CostModel::Constant(0));
    sweep(c, "fd7_n16_const0", StencilKind::Fd7, 16, CostModel::Constant(0));
}

fn costly(c: &mut Criterion) {
    sweep(c, "fd5_n32_const100", StencilKind::Fd5, 32, CostModel::Constant(100));
    sweep(c, "fe9_n32_ramp", StencilKind::Fe9, 32, CostModel::Ramp);
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = cheap, costly
}
criterion_main!(benches);
