use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pandora_core::stepdist::{bernstein_optimistic, ConfidenceBudget};
use pandora_core::thresholds::{pandora_thresholds, reservation_value};
use pandora_core::{
    expected_utility, make_instance, run_episode, CostSpec, Family, InstanceSpec, Learner, LearnerConfig, Mode, StepCdf,
};

fn grid_dist(k: usize) -> StepCdf {
    let atoms: Vec<f64> = (1..=k).map(|i| i as f64 / k as f64).collect();
    let masses = vec![1.0 / k as f64; k];
    StepCdf::new(atoms, masses).unwrap()
}

fn reservation(c: &mut Criterion) {
    let mut group = c.benchmark_group("reservation_value");
    for k in [4, 64, 1024] {
        let d = grid_dist(k);
        group.bench_with_input(BenchmarkId::from_parameter(k), &d, |b, d| {
            b.iter(|| reservation_value(black_box(d), black_box(0.05)).unwrap())
        });
    }
    group.finish();
}

fn optimistic(c: &mut Criterion) {
    let emp = grid_dist(256);
    let budget = ConfidenceBudget::new(20.0, 500).unwrap();
    c.bench_function("bernstein_optimistic/256", |b| {
        b.iter(|| bernstein_optimistic(black_box(&emp), budget))
    });
}

fn evaluation(c: &mut Criterion) {
    let mut group = c.benchmark_group("expected_utility_pandora");
    for n in [4, 16, 64] {
        let dists: Vec<StepCdf> = (0..n).map(|i| grid_dist(8 + i % 5)).collect();
        let costs = vec![0.02; n];
        let sigma = pandora_thresholds(&dists, &costs).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| expected_utility(Mode::Pandora, black_box(&sigma), &costs, &dists).unwrap())
        });
    }
    group.finish();
}

fn contextual_round(c: &mut Criterion) {
    let mut group = c.benchmark_group("contextual_round");
    for d in [1, 4, 8] {
        let spec = InstanceSpec::new(5, Family::Grid, 4, CostSpec::Fixed(0.1)).contextual(d).with_seed(3);
        let env = make_instance(&spec).unwrap();
        let horizon = 512;
        let mut learner = Learner::new(LearnerConfig::new(Mode::Pandora, horizon).contextual(), env.costs().to_vec(), d).unwrap();
        run_episode(&env, &mut learner, true, horizon, 0, "bench").unwrap();
        let contexts = env.contexts_at(1, 1).unwrap().unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, _| {
            b.iter(|| learner.contextual_round(horizon + 1, black_box(&contexts)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(kernels, reservation, optimistic, evaluation, contextual_round);
criterion_main!(kernels);
