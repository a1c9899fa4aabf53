use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use flowrl::config::EvalSampler;
use flowrl::flow::{init_net, standard_normal};
use flowrl::rl::advantage::AdvantageSet;
use flowrl::rl::objective::{policy_objective, ObjectiveConfig};
use flowrl::rl::train::evaluate_prompts;
use flowrl::sde::{rollout, NoiseSchedule};
use flowrl::stats::energy_permutation_test;
use flowrl::{rng, Execution, RunConfig};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bench_eval(c: &mut Criterion) {
    let cfg = RunConfig::default();
    let net = init_net(&cfg).unwrap();
    let grid = NoiseSchedule::new(cfg.rl.noise_level).unwrap().grid(cfg.rl.t_train).unwrap();
    let mut group = c.benchmark_group("sde_eval_16x32");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| evaluate_prompts(&net, &cfg.prompts, &grid, 32, EvalSampler::Sde, 1, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_energy(c: &mut Criterion) {
    let sample = |tag: u64| -> Vec<Vec<f64>> { (0..500).map(|i| standard_normal(2, &mut rng::stream(tag, &[i]))).collect() };
    let (a, b) = (sample(1), sample(2));
    let mut group = c.benchmark_group("energy_permutation_500x500_50");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |bch| {
            bch.iter(|| energy_permutation_test(black_box(&a), black_box(&b), 50, 3, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_objective(c: &mut Criterion) {
    let cfg = RunConfig::default();
    let net = init_net(&cfg).unwrap();
    let grid = NoiseSchedule::new(cfg.rl.noise_level).unwrap().grid(cfg.rl.t_train).unwrap();
    let trajs: Vec<_> = (0..96)
        .map(|i| {
            let p = i % 8;
            rollout(&net, p, net.cond(p).unwrap(), &grid, &mut rng::stream(4, &[i as u64])).unwrap()
        })
        .collect();
    let advs = AdvantageSet::uniform((0..96).map(|i| (i as f64 * 0.37).sin()).collect(), grid.len(), 0.0, 1.0);
    let obj = ObjectiveConfig { eps_clip: 0.2, beta_kl: 0.04 };
    let mut group = c.benchmark_group("policy_objective_96x10");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| policy_objective(&net, &net, &trajs, &advs, &obj, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_eval, bench_energy, bench_objective);
criterion_main!(benches);
