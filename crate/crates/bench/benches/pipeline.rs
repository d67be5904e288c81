use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use qorbit_core::bb::{certify, orbit_table, BbConfig};
use qorbit_core::bounding::{exact_bound, spectral_bound, BounderSpec};
use qorbit_core::estimator::{estimate, EstimatorConfig};
use qorbit_core::index_set::IndexSet;
use qorbit_core::instance::{BqopSource, CardBqop};
use qorbit_core::reduction::{find_clones, reduce_to_bqop};
use qorbit_core::subproblem::{reduce, to_qubo, NodeKey};
use qorbit_core::symmetry::{discover_automorphisms, setwise_stabilizer};
use qorbit_core::synth;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn bench_discovery(c: &mut Criterion) {
    let mut group = c.benchmark_group("discover_automorphisms");
    for k in [8usize, 16] {
        let b = synth::toroidal_grid_b(k, k, 400_000);
        group.sample_size(10);
        group.bench_with_input(BenchmarkId::from_parameter(k * k), &b, |bench, b| {
            bench.iter(|| discover_automorphisms(black_box(b)).unwrap().order())
        });
    }
    group.finish();
}

fn bench_clone_reduction(c: &mut Criterion) {
    let inst = synth::tai256c_like();
    c.bench_function("find_clones/256", |b| {
        b.iter(|| find_clones(black_box(inst.flows())).unwrap().num_classes())
    });
    c.bench_function("reduce_to_bqop/256", |b| {
        b.iter(|| reduce_to_bqop(black_box(&inst)).unwrap().cardinality())
    });
}

fn bench_node_machinery(c: &mut Criterion) {
    let inst = synth::tai256c_like();
    let bqop = reduce_to_bqop(&inst).unwrap();
    let g = discover_automorphisms(bqop.matrix()).unwrap();
    let key = NodeKey::new(IndexSet::empty(256), IndexSet::from_indices(256, [0]));
    let stab = setwise_stabilizer(&g, key.i0(), key.i1());
    let r = reduce(&bqop, &key).unwrap();

    c.bench_function("reduce_node/255", |b| {
        b.iter(|| reduce(black_box(&bqop), black_box(&key)).unwrap().dim())
    });
    c.bench_function("to_qubo/255", |b| {
        b.iter(|| to_qubo(black_box(&r), 17.0).dim())
    });
    c.bench_function("orbit_table/255", |b| {
        b.iter(|| {
            orbit_table(black_box(&bqop), black_box(&key), black_box(&stab))
                .unwrap()
                .len()
        })
    });
    let mut group = c.benchmark_group("spectral_bound");
    group.sample_size(20);
    group.bench_function("255", |b| b.iter(|| spectral_bound(black_box(&r)).unwrap()));
    group.finish();

    let mut rng = StdRng::seed_from_u64(1);
    let small = synth::random_symmetric_signed(&mut rng, 16, 9);
    let small_bqop = CardBqop::new(small, 6, 1, BqopSource::Raw).unwrap();
    let small_r = reduce(&small_bqop, &NodeKey::root(16)).unwrap();
    c.bench_function("exact_bound/16c6", |b| {
        b.iter(|| exact_bound(black_box(&small_r)).unwrap())
    });
}

fn bench_search(c: &mut Criterion) {
    let mut rng = StdRng::seed_from_u64(7);
    let inst = synth::random_selector_qap(&mut rng, 12, 4, 9);
    let bqop = reduce_to_bqop(&inst).unwrap();
    let g = discover_automorphisms(bqop.matrix()).unwrap();
    use itertools::Itertools;
    let opt = (0..12)
        .combinations(4)
        .map(|s| bqop.scale() * bqop.matrix().quad_form_support(&s))
        .min()
        .unwrap() as f64;

    let mut group = c.benchmark_group("search");
    group.sample_size(20);
    group.bench_function("certify/12", |b| {
        let cfg = BbConfig::new(opt, BounderSpec::named("spectral"));
        b.iter(|| certify(black_box(&bqop), &cfg, &g).unwrap().processed_nodes)
    });
    group.bench_function("estimate/12", |b| {
        let mut cfg = EstimatorConfig::new(opt, BounderSpec::named("spectral"), 3);
        cfg.full_width_threshold = 8;
        cfg.sample_size = 6;
        cfg.sample_cutoff = 8;
        b.iter(|| estimate(black_box(&bqop), &g, &cfg).unwrap().total_estimate)
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_discovery,
    bench_clone_reduction,
    bench_node_machinery,
    bench_search
);
criterion_main!(benches);
