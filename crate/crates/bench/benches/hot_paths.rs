use cardattack_core::attack::{run_attack, AttackConfig, NullSink};
use cardattack_core::composable::{BottomKSketchMap, ComposableMap};
use cardattack_core::linear::{Echelon, Fp, Matrix};
use cardattack_core::model::{fill_bernoulli, DEFAULT_SEPARATION};
use cardattack_core::respond::{CopyStrategy, CopyThresholdResponder, RobustWrapper};
use cardattack_core::{KeySet, RateBreakpoints, RngHandle, ThresholdPair};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use std::hint::black_box;

const N: u32 = 2048;

fn bernoulli_fill(c: &mut Criterion) {
    let mut rng = RngHandle::new(1, 0).rng();
    let mut set = KeySet::empty(N);
    let mut g = c.benchmark_group("bernoulli_fill");
    g.throughput(Throughput::Elements(N as u64));
    for q in [0.1, 0.5] {
        g.bench_function(format!("q={q}"), |b| b.iter(|| fill_bernoulli(&mut set, black_box(q), &mut rng)));
    }
    g.finish();
}

fn bottom_k_sketch(c: &mut Criterion) {
    let mut rng = RngHandle::new(2, 0).rng();
    let map = BottomKSketchMap::random(N, 8, &mut rng).unwrap();
    let mut set = KeySet::empty(N);
    fill_bernoulli(&mut set, 0.3, &mut rng);
    c.bench_function("bottom_k_sketch/k=8", |b| b.iter(|| map.sketch(black_box(&set)).unwrap()));
}

fn echelon_insert(c: &mut Criterion) {
    let f = Fp::new(257).unwrap();
    let m = Matrix::random(f, 8, 64, &mut RngHandle::new(3, 0).rng()).unwrap();
    c.bench_function("echelon_insert/F257 k=8", |b| {
        b.iter_batched(
            || Echelon::new(f, 8),
            |mut ech| {
                for col in m.columns() {
                    if ech.is_full() {
                        break;
                    }
                    ech.insert(col);
                }
                ech
            },
            BatchSize::SmallInput,
        )
    });
}

fn attack_rounds(c: &mut Criterion) {
    let t = ThresholdPair::from_ratios(0.3, 0.5, N).unwrap();
    let bp = RateBreakpoints::new(0.1, 0.2, 0.55, 0.7);
    let rounds = 1000;
    let config = AttackConfig::new(rounds, 160, t, bp, DEFAULT_SEPARATION).unwrap().with_slack(0.5).unwrap();
    let mut rng = RngHandle::new(4, 0).rng();
    let copies: Vec<_> = (0..8).map(|_| BottomKSketchMap::random(N, 8, &mut rng).unwrap()).collect();
    let mut g = c.benchmark_group("attack");
    g.throughput(Throughput::Elements(rounds));
    g.sample_size(20);
    g.bench_function("bottom_k_robust_c8/1000_rounds", |b| {
        b.iter_batched(
            || {
                let wrapper = RobustWrapper::new(copies.clone(), CopyStrategy::RandomCopy, RngHandle::new(4, 1)).unwrap();
                (wrapper, CopyThresholdResponder::new(copies.clone(), &t))
            },
            |(mut system, mut responder)| run_attack(&config, &mut system, &mut responder, RngHandle::new(4, 2), &mut NullSink).unwrap(),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

criterion_group!(benches, bernoulli_fill, bottom_k_sketch, echelon_insert, attack_rounds);
criterion_main!(benches);
