use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lobflow::batch::{map_sequential, replay_seed};
use lobflow::edge::{radau_rule, PriceMeasure};
use lobflow::synth::{BookParams, RandomSpikes};
use lobflow::Side;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn measures(count: usize) -> Vec<PriceMeasure> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..count)
        .map(|_| {
            let s = rng.random_range(11..=200);
            let mut y: Vec<f64> = (1..=200).map(|k| k as f64 / 200.0).collect();
            y.truncate(s - 1);
            y.insert(0, 0.0);
            PriceMeasure {
                side: Side::Sell,
                y,
                w: (0..s).map(|_| rng.random_range(1.0..10_000.0f64).round()).collect(),
                a: (0..s).map(|_| rng.random_range(0.0..3600.0)).collect(),
            }
        })
        .collect()
}

fn radau(c: &mut Criterion) {
    let ms = measures(2000);
    let mut g = c.benchmark_group("radau_rules");
    g.bench_function(BenchmarkId::new("sequential", ms.len()), |b| {
        b.iter(|| map_sequential(black_box(&ms), |m| radau_rule(m, 10)))
    });
    #[cfg(feature = "parallel")]
    g.bench_function(BenchmarkId::new("parallel", ms.len()), |b| {
        b.iter(|| lobflow::batch::map_parallel(black_box(&ms), |m| radau_rule(m, 10)))
    });
    g.finish();
}

fn replay(c: &mut Criterion) {
    let process = RandomSpikes::default().sample(3);
    let params = BookParams::default();
    let seeds: Vec<u64> = (0..8).collect();
    let run = |&s: &u64| replay_seed(&process, &params, 600.0, s, 50_000).map(|o| o.events);
    let mut g = c.benchmark_group("replay_seeds");
    g.sample_size(10);
    g.bench_function(BenchmarkId::new("sequential", seeds.len()), |b| b.iter(|| map_sequential(&seeds, run)));
    #[cfg(feature = "parallel")]
    g.bench_function(BenchmarkId::new("parallel", seeds.len()), |b| {
        b.iter(|| lobflow::batch::map_parallel(&seeds, run))
    });
    g.finish();
}

criterion_group!(benches, radau, replay);
criterion_main!(benches);
