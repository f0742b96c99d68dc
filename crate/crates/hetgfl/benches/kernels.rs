//! Sequential vs data-parallel kernel and epoch benchmarks.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hetgfl::graph::{make_split, synth_planted, SplitSpec};
use hetgfl::model::ModelConfig;
use hetgfl::train::{train, TrainConfig};

fn rand_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn bench_matmul(c: &mut Criterion) {
    let mut group = c.benchmark_group("matmul");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for &(m, k, n) in &[(256usize, 128usize, 128usize), (1024, 128, 128)] {
        let a = rand_vec(&mut rng, m * k);
        let b = rand_vec(&mut rng, k * n);
        let mut out = vec![0.0; m * n];
        group.bench_with_input(BenchmarkId::new("seq", format!("{m}x{k}x{n}")), &(), |bch, _| {
            bch.iter(|| hetgfl::kernels::seq::matmul(&mut out, &a, &b, m, k, n));
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("par", format!("{m}x{k}x{n}")), &(), |bch, _| {
            bch.iter(|| hetgfl::kernels::par::matmul(&mut out, &a, &b, m, k, n));
        });
    }
    group.finish();
}

fn bench_segment_sum(c: &mut Criterion) {
    let mut group = c.benchmark_group("segment_sum");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (n_arcs, d, n_nodes) = (80_000usize, 64usize, 10_000usize);
    let a = rand_vec(&mut rng, n_arcs * d);
    // roughly even segments
    let mut offsets = vec![0usize; n_nodes + 1];
    for (i, o) in offsets.iter_mut().enumerate() {
        *o = i * n_arcs / n_nodes;
    }
    let mut out = vec![0.0; n_nodes * d];
    group.bench_function("seq", |bch| {
        bch.iter(|| hetgfl::kernels::seq::segment_sum(&mut out, &a, &offsets, d));
    });
    #[cfg(feature = "parallel")]
    group.bench_function("par", |bch| {
        bch.iter(|| hetgfl::kernels::par::segment_sum(&mut out, &a, &offsets, d));
    });
    group.finish();
}

fn bench_training_epoch(c: &mut Criterion) {
    let mut group = c.benchmark_group("train_epoch");
    group.sample_size(10);
    let mut g = synth_planted(2000, 2, 4, 3, 0.9, 1).unwrap();
    let spec = SplitSpec::new(0.24, 0.06, 0.70, 2).unwrap();
    let masks = make_split(&g, &spec).unwrap();
    g.set_masks(masks).unwrap();
    let mcfg = ModelConfig {
        edge_dim: 32,
        ..ModelConfig::uniform(2, 32)
    };
    let tcfg = TrainConfig {
        lr: 0.01,
        max_epochs: 3,
        ..TrainConfig::default()
    };

    group.bench_function("default", |bch| {
        bch.iter(|| train(&g, &mcfg, &tcfg).unwrap());
    });
    #[cfg(feature = "parallel")]
    group.bench_function("single_thread_pool", |bch| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        bch.iter(|| pool.install(|| train(&g, &mcfg, &tcfg).unwrap()));
    });
    group.finish();
}

criterion_group!(benches, bench_matmul, bench_segment_sum, bench_training_epoch);
criterion_main!(benches);
