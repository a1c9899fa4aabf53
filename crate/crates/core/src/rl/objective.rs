//! Clipped likelihood-ratio surrogate with a KL penalty to a frozen reference.
//!
//! For every stored step the new policy's Gaussian mean is recomputed at the
//! stored state. Per step
//!
//! ```text
//! term = min(r A, clip(r, 1 - eps, 1 + eps) A) - beta * KL(new || ref)
//! ```
//!
//! with `r = exp(logp_new - logp_old)`. Terms are averaged over the steps of a
//! trajectory, over the trajectories of a prompt group, then over groups.
//! Only the new mean carries gradient; old log-probs and reference means are
//! constants.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::policy::{PolicyGrads, VelocityNet};
use crate::rl::advantage::AdvantageSet;
use crate::sde::{gaussian_logpdf, mean_from_velocity, mean_velocity_jacobian, step_mean, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveConfig {
    pub eps_clip: f64,
    pub beta_kl: f64,
}

#[derive(Debug, Clone)]
pub struct ObjectiveOutput {
    /// `-objective`.
    pub loss: f64,
    /// Gradient of `loss`.
    pub grads: PolicyGrads,
    /// KL to the reference averaged with the same weights as the objective.
    pub mean_kl: f64,
    /// Fraction of steps where the clipped branch was selected.
    pub clip_fraction: f64,
}

/// Per-step value of the clipped surrogate and whether its gradient flows
/// (the unclipped branch is the minimum).
pub fn clipped_surrogate(ratio: f64, adv: f64, eps: f64) -> (f64, bool) {
    let unclipped = ratio * adv;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
    if unclipped <= clipped {
        (unclipped, true)
    } else {
        (clipped, false)
    }
}

struct TrajTerm {
    objective: f64,
    kl: f64,
    clipped: usize,
    steps: usize,
    grads: PolicyGrads,
}

fn trajectory_term(
    net: &VelocityNet,
    reference: &VelocityNet,
    tr: &Trajectory,
    adv: &[f64],
    weight: f64,
    cfg: &ObjectiveConfig,
) -> Result<TrajTerm> {
    let p = tr.prompt_id;
    let cond = net.cond(p)?;
    let ref_cond = reference.cond(p)?;
    let mut grads = PolicyGrads::zeros(net);
    let mut objective = 0.0;
    let mut kl_total = 0.0;
    let mut clipped = 0;
    let per_step = weight / tr.steps.len() as f64;
    for (k, rec) in tr.steps.iter().enumerate() {
        let old = match rec.logprob {
            Some(lp) if rec.std > 0.0 => lp,
            _ => {
                return Err(Error::UndefinedRatio(format!(
                    "prompt {p}, step {k}: deterministic step has no stored log-probability"
                )))
            }
        };
        let step = rec.grid_step();
        let (v, cache) = net.velocity_cached(&rec.x_t, step.t, cond)?;
        let mean = mean_from_velocity(&rec.x_t, &v, &step);
        let new_lp = gaussian_logpdf(&rec.x_next, &mean, rec.std);
        let ratio = (new_lp - old).exp();
        if !ratio.is_finite() {
            return Err(Error::NonFinite(format!(
                "likelihood ratio at prompt {p}, step {k} (t = {}): logp_new {new_lp}, logp_old {old}",
                rec.t
            )));
        }
        let a = adv[k];
        let (surrogate, flows) = clipped_surrogate(ratio, a, cfg.eps_clip);
        if !flows {
            clipped += 1;
        }
        let ref_mean = step_mean(reference, &rec.x_t, &step, ref_cond)?;
        let var = rec.std * rec.std;
        let kl: f64 = mean.iter().zip(&ref_mean).map(|(m, r)| (m - r) * (m - r)).sum::<f64>() / (2.0 * var);
        objective += per_step * (surrogate - cfg.beta_kl * kl);
        kl_total += per_step * kl;

        // d term / d mean, then chained through mean = x - dt (v + ...).
        let jac = mean_velocity_jacobian(&step);
        let grad_v: Vec<f64> = (0..mean.len())
            .map(|j| {
                let mut g = -cfg.beta_kl * (mean[j] - ref_mean[j]) / var;
                if flows {
                    g += ratio * a * (rec.x_next[j] - mean[j]) / var;
                }
                // Loss is the negated objective.
                -per_step * g * jac
            })
            .collect();
        net.backward_into(&cache, &grad_v, Some(p), &mut grads)?;
    }
    Ok(TrajTerm {
        objective,
        kl: kl_total,
        clipped,
        steps: tr.steps.len(),
        grads,
    })
}

/// Loss and gradient of the clipped objective over a batch. `advs.per_step[i]`
/// holds the step advantages of `trajs[i]`. Groups are formed by prompt id.
pub fn policy_objective(
    net: &VelocityNet,
    reference: &VelocityNet,
    trajs: &[Trajectory],
    advs: &AdvantageSet,
    cfg: &ObjectiveConfig,
    exec: Execution,
) -> Result<ObjectiveOutput> {
    if trajs.is_empty() {
        return Err(Error::InvalidArgument("policy objective needs at least one trajectory".into()));
    }
    if advs.per_step.len() != trajs.len() {
        return Err(Error::dim("advantages per trajectory", trajs.len(), advs.per_step.len()));
    }
    for (tr, a) in trajs.iter().zip(&advs.per_step) {
        if tr.steps.is_empty() {
            return Err(Error::InvalidArgument(format!("empty trajectory for prompt {}", tr.prompt_id)));
        }
        if a.len() != tr.steps.len() {
            return Err(Error::dim("step advantages", tr.steps.len(), a.len()));
        }
    }
    let mut group_sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for tr in trajs {
        *group_sizes.entry(tr.prompt_id).or_default() += 1;
    }
    let n_groups = group_sizes.len() as f64;
    let terms = exec.map_range(trajs.len(), |i| {
        let tr = &trajs[i];
        let weight = 1.0 / (n_groups * group_sizes[&tr.prompt_id] as f64);
        trajectory_term(net, reference, tr, &advs.per_step[i], weight, cfg)
    });
    let mut grads = PolicyGrads::zeros(net);
    let mut objective = 0.0;
    let mut kl = 0.0;
    let mut clipped = 0;
    let mut steps = 0;
    for t in terms {
        let t = t?;
        objective += t.objective;
        kl += t.kl;
        clipped += t.clipped;
        steps += t.steps;
        grads.add_scaled(&t.grads, 1.0);
    }
    if !objective.is_finite() {
        return Err(Error::NonFinite(format!("policy objective {objective}")));
    }
    Ok(ObjectiveOutput {
        loss: -objective,
        grads,
        mean_kl: kl,
        clip_fraction: clipped as f64 / steps as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use crate::rng;
    use crate::sde::{rollout, NoiseSchedule};

    fn net(seed: u64) -> VelocityNet {
        VelocityNet::new(2, &[16], Activation::Tanh, 2, 3, 2, &mut rng::stream(seed, &[])).unwrap()
    }

    fn batch(n: &VelocityNet, count: usize) -> Vec<Trajectory> {
        let grid = NoiseSchedule::new(0.7).unwrap().grid(4).unwrap();
        (0..count)
            .map(|i| {
                let p = i % 2;
                let mut r = rng::stream(9, &[i as u64]);
                rollout(n, p, n.cond(p).unwrap(), &grid, &mut r).unwrap()
            })
            .collect()
    }

    fn advs(trajs: &[Trajectory]) -> AdvantageSet {
        let a: Vec<f64> = (0..trajs.len()).map(|i| i as f64 * 0.37 - 0.8).collect();
        AdvantageSet::uniform(a, trajs[0].steps.len(), 0.0, 1.0)
    }

    #[test]
    fn clip_cases() {
        assert!((clipped_surrogate(1.3, 1.0, 0.2).0 - 1.2).abs() < 1e-12);
        assert!((clipped_surrogate(0.7, -1.0, 0.2).0 + 0.8).abs() < 1e-12);
        assert_eq!(clipped_surrogate(1.0, 0.5, 0.2), (0.5, true));
    }

    #[test]
    fn identity_case_gives_mean_advantage() {
        let n = net(1);
        let trajs = batch(&n, 6);
        let a = advs(&trajs);
        let cfg = ObjectiveConfig { eps_clip: 0.2, beta_kl: 0.04 };
        let out = policy_objective(&n, &n, &trajs, &a, &cfg, Execution::Sequential).unwrap();
        // Two groups of three, uniform per-step advantages.
        let g0 = (a.trajectory[0] + a.trajectory[2] + a.trajectory[4]) / 3.0;
        let g1 = (a.trajectory[1] + a.trajectory[3] + a.trajectory[5]) / 3.0;
        assert!((out.loss + (g0 + g1) / 2.0).abs() < 1e-10);
        assert!(out.mean_kl.abs() < 1e-20);
        assert_eq!(out.clip_fraction, 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let acting = net(1);
        let mut n = acting.clone();
        // Move the new policy and its embeddings off the acting one.
        for (k, v) in n.mlp.values_mut().enumerate() {
            *v += 0.01 * ((k as f64) * 0.7).sin();
        }
        for (k, v) in n.embeddings.iter_mut().enumerate() {
            *v = 0.05 * (k as f64 + 1.0).cos();
        }
        let reference = net(2);
        let trajs = batch(&acting, 6);
        let a = advs(&trajs);
        let cfg = ObjectiveConfig { eps_clip: 10.0, beta_kl: 0.3 };
        let out = policy_objective(&n, &reference, &trajs, &a, &cfg, Execution::Sequential).unwrap();
        let loss_at = |m: &VelocityNet| policy_objective(m, &reference, &trajs, &a, &cfg, Execution::Sequential).unwrap().loss;
        let h = 1e-6;
        let analytic: Vec<f64> = out.grads.mlp.values().copied().collect();
        for idx in [0, 5, 17, 40, analytic.len() - 1] {
            let mut plus = n.clone();
            let mut minus = n.clone();
            *plus.mlp.values_mut().nth(idx).unwrap() += h;
            *minus.mlp.values_mut().nth(idx).unwrap() -= h;
            let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            assert!((fd - analytic[idx]).abs() < 1e-6 * (1.0 + fd.abs()), "param {idx}: fd {fd} vs {}", analytic[idx]);
        }
        for idx in [0, 4] {
            let mut plus = n.clone();
            let mut minus = n.clone();
            plus.embeddings[idx] += h;
            minus.embeddings[idx] -= h;
            let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            let g = out.grads.embeddings[idx];
            assert!((fd - g).abs() < 1e-6 * (1.0 + fd.abs()), "embedding {idx}: fd {fd} vs {g}");
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let n = net(3);
        let trajs = batch(&n, 8);
        let a = advs(&trajs);
        let cfg = ObjectiveConfig { eps_clip: 0.2, beta_kl: 0.04 };
        let s = policy_objective(&n, &n, &trajs, &a, &cfg, Execution::Sequential).unwrap();
        let p = policy_objective(&n, &n, &trajs, &a, &cfg, Execution::Parallel).unwrap();
        assert_eq!(s.loss, p.loss);
        assert_eq!(s.grads, p.grads);
    }

    #[test]
    fn degenerate_group_has_zero_gradient() {
        let n = net(4);
        let trajs = batch(&n, 4);
        let a = AdvantageSet::uniform(vec![0.0; 4], trajs[0].steps.len(), 0.0, 0.0);
        let cfg = ObjectiveConfig { eps_clip: 0.2, beta_kl: 0.04 };
        let out = policy_objective(&n, &n, &trajs, &a, &cfg, Execution::Sequential).unwrap();
        assert_eq!(out.grads.norm(), 0.0);
    }

    #[test]
    fn deterministic_steps_are_rejected() {
        let n = net(5);
        let mut trajs = batch(&n, 2);
        trajs[1].steps[2].logprob = None;
        let a = advs(&trajs);
        let cfg = ObjectiveConfig { eps_clip: 0.2, beta_kl: 0.0 };
        let err = policy_objective(&n, &n, &trajs, &a, &cfg, Execution::Sequential).unwrap_err();
        assert!(err.to_string().contains("step 2"), "{err}");
    }
}
