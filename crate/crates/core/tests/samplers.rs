mod common;

use flowrl::exec::Execution;
use flowrl::flow::standard_normal;
use flowrl::rewards::{oracle_reward_stats, RewardTask};
use flowrl::rl::tracker::{estimate_prompt_kl, tracker_init, TrackerConfig};
use flowrl::rng;
use flowrl::sde::{ode_sample, rollout, step_logprob_under, NoiseSchedule};
use std::f64::consts::PI;

#[test]
fn pretrained_ode_samples_stay_in_support_and_logprobs_reproduce() {
    let net = common::fully_pretrained();
    let cond = net.null_cond();
    let sched = NoiseSchedule::new(0.7).unwrap();
    let grid40 = sched.grid(40).unwrap();
    for i in 0..200 {
        let noise = standard_normal(2, &mut rng::stream(1, &[i]));
        let x = ode_sample(&net, &cond, &grid40, &noise).unwrap();
        assert!((x[0] * x[0] + x[1] * x[1]).sqrt() < 3.0, "sample {x:?} left the ring support");
    }

    // Stored log-probs are reproduced by the producing parameters, and the
    // ratio against perturbed parameters matches a direct density ratio.
    let grid = sched.grid(10).unwrap();
    let mut other = net.clone();
    for (k, v) in other.mlp.values_mut().enumerate() {
        *v += 1e-3 * ((k * 7) as f64).sin();
    }
    for i in 0..20 {
        let tr = rollout(&net, 0, &cond, &grid, &mut rng::stream(2, &[i])).unwrap();
        for rec in &tr.steps {
            let lp = step_logprob_under(&net, rec, &cond).unwrap();
            assert!((lp - rec.logprob.unwrap()).abs() < 1e-12);
            let ratio = (step_logprob_under(&other, rec, &cond).unwrap() - rec.logprob.unwrap()).exp();
            // Independent ratio: product over coordinates of 1-D normal densities.
            let g = rec.grid_step();
            let v_new = other.velocity(&rec.x_t, g.t, &cond).unwrap();
            let density = |v: &[f64]| -> f64 {
                (0..2)
                    .map(|j| {
                        let c = g.sigma * g.sigma / (2.0 * g.t);
                        let m = rec.x_t[j] - g.dt * (v[j] + c * (rec.x_t[j] + (1.0 - g.t) * v[j]));
                        let z = (rec.x_next[j] - m) / rec.std;
                        (-0.5 * z * z).exp() / (rec.std * (2.0 * PI).sqrt())
                    })
                    .product()
            };
            let v_old = net.velocity(&rec.x_t, g.t, &cond).unwrap();
            let direct = density(&v_new) / density(&v_old);
            assert!((ratio - direct).abs() < 1e-10 * direct.max(1.0), "{ratio} vs {direct}");
        }
    }
}

#[test]
fn oracle_reward_statistics() {
    let cfg = common::small_config();
    let net = common::pretrained(&cfg);
    let cond = net.null_cond();
    let sched = NoiseSchedule::new(0.7).unwrap();
    let exec = Execution::default();
    let cover = RewardTask::Region { center: vec![0.0, 0.0], radius: 50.0 };
    let s = oracle_reward_stats(&cover, &net, &cond, &sched, 10, 200, 1, exec).unwrap();
    assert_eq!((s.mean, s.std), (1.0, 0.0));
    let empty = RewardTask::Region { center: vec![20.0, 20.0], radius: 1.0 };
    let s = oracle_reward_stats(&empty, &net, &cond, &sched, 10, 200, 1, exec).unwrap();
    assert!(s.mean < 1e-3);
    let mode = RewardTask::ModeTarget { target: vec![2.0, 0.0], bandwidth: 0.6 };
    let a = oracle_reward_stats(&mode, &net, &cond, &sched, 10, 2000, 11, exec).unwrap();
    let b = oracle_reward_stats(&mode, &net, &cond, &sched, 10, 2000, 12, exec).unwrap();
    let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    assert!((a.mean - b.mean).abs() < 3.0 * se, "{a:?} vs {b:?}");
    assert!(oracle_reward_stats(&mode, &net, &cond, &sched, 10, 50, 1, exec).is_err());
}

#[test]
fn prompt_kl_examples() {
    let cfg = common::small_config();
    let net = common::pretrained(&cfg);
    let cond = net.cond(0).unwrap().to_vec();
    let grid = NoiseSchedule::new(0.7).unwrap().grid(10).unwrap();
    let tc = TrackerConfig::default();
    let trajs: Vec<_> = (0..4)
        .map(|i| rollout(&net, 0, &cond, &grid, &mut rng::stream(3, &[i])).unwrap())
        .collect();
    let mut tracker = tracker_init(&[0.5; 8], &tc).unwrap();
    tracker.record_probes(&trajs.iter().collect::<Vec<_>>());
    assert_eq!(tracker.probes.len(), 32);
    assert_eq!(estimate_prompt_kl(&net, &tracker, &cond).unwrap(), 0.0);

    // Uniform mean shift of delta per coordinate: the output bias moves v by
    // u, so the mean moves by J u with J the scalar step Jacobian. Give every
    // probe the same std and shift so the expected KL is closed-form.
    let delta = 0.01;
    let mut shifted = tracker.clone();
    let std = 0.2;
    for p in &mut shifted.probes {
        p.std = std;
        let now = flowrl::sde::step_mean(&net, &p.x_t, &p.step, &cond).unwrap();
        p.mean = now.iter().map(|m| m + delta).collect();
    }
    let d = estimate_prompt_kl(&net, &shifted, &cond).unwrap();
    let expected = delta * delta * 2.0 / (2.0 * std * std);
    assert!((d - expected).abs() < 1e-12, "{d} vs {expected}");

    // Larger perturbations along a fixed random direction never decrease D.
    let mut r = rng::stream(5, &[]);
    let dir: Vec<f64> = standard_normal(net.mlp.num_params(), &mut r);
    let mut prev = 0.0;
    for k in 1..=8 {
        let mut moved = net.clone();
        for (v, d) in moved.mlp.values_mut().zip(&dir) {
            *v += 1e-3 * k as f64 * d;
        }
        let d = estimate_prompt_kl(&moved, &tracker, &cond).unwrap();
        assert!(d >= prev, "D fell from {prev} to {d} at scale {k}");
        prev = d;
    }
    assert!(prev > 0.0);

    let empty = tracker_init(&[0.5; 8], &tc).unwrap();
    assert_eq!(estimate_prompt_kl(&net, &empty, &cond).unwrap(), 0.0);
}
