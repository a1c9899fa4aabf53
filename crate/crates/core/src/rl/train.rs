//! RL fine-tuning loop shared by all variants.

use std::collections::BTreeMap;
use std::time::Instant;

use log::{debug, info};
use rand::Rng;

use crate::config::{EvalSampler, RunConfig, Variant};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::flow::standard_normal;
use crate::nn::AdamConfig;
use crate::policy::{PolicyOptimizer, VelocityNet};
use crate::rewards::{evaluate_reward, PromptSpec};
use crate::rl::advantage::{group_advantage, normalize_batch_advantages, raw_advantage, step_advantage, AdvantageSet};
use crate::rl::allocation::allocate_rollouts;
use crate::rl::objective::{policy_objective, ObjectiveConfig};
use crate::rl::tracker::{estimate_prompt_kl, forgetting_factor, tracker_init, uncertainty_weight, ValueTracker};
use crate::rng::{self, tag};
use crate::sde::{ode_sample, rollout, sde_sample, GridStep, NoiseSchedule, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogRow {
    pub iteration: usize,
    pub variant: Variant,
    pub total_rollouts_cum: u64,
    /// Mean training reward of the iteration's rollouts; empty for row 0.
    pub mean_reward: Option<f64>,
    /// Set on evaluation iterations only.
    pub eval_reward: Option<f64>,
    pub mean_abs_advantage: Option<f64>,
    pub mean_kl_to_ref: Option<f64>,
    pub entropy_proxy: f64,
    pub wallclock_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerLogRow {
    pub iteration: usize,
    pub prompt_id: usize,
    pub v_hat: f64,
    pub alpha: f64,
    pub beta: f64,
    pub w: f64,
    /// Allocation bin; 0 when the variant does not bin.
    pub bin: usize,
    /// Rollouts collected for the prompt this iteration (0 if not sampled).
    pub m: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: VelocityNet,
    pub train_log: Vec<TrainLogRow>,
    pub tracker_log: Vec<TrackerLogRow>,
    /// Final iteration's rollouts, kept only when trajectory dumps are on.
    pub last_batch: Vec<Trajectory>,
}

/// Mean reward over all prompts of `eval_samples` samples each. The noise is
/// a function of `(seed, prompt, sample)` only, so every evaluation of a run
/// sees the same starting points.
pub fn evaluate_policy(net: &VelocityNet, cfg: &RunConfig, exec: Execution) -> Result<f64> {
    let schedule = NoiseSchedule::new(cfg.rl.noise_level)?;
    let grid = schedule.grid(cfg.rl.t_eval)?;
    let per_prompt = evaluate_prompts(net, &cfg.prompts, &grid, cfg.rl.eval_samples, cfg.rl.eval_sampler, cfg.seed, exec)?;
    Ok(per_prompt.iter().sum::<f64>() / per_prompt.len() as f64)
}

/// Mean eval reward per prompt.
pub fn evaluate_prompts(
    net: &VelocityNet,
    prompts: &[PromptSpec],
    grid: &[GridStep],
    samples: usize,
    sampler: EvalSampler,
    seed: u64,
    exec: Execution,
) -> Result<Vec<f64>> {
    if prompts.is_empty() || samples == 0 {
        return Err(Error::InvalidArgument("evaluation needs prompts and samples".into()));
    }
    let rewards = exec.map_range(prompts.len() * samples, |job| {
        let p = &prompts[job / samples];
        let j = job % samples;
        let mut r = rng::stream(seed, &[tag::EVAL, p.id as u64, j as u64]);
        let cond = net.cond(p.id)?;
        let x = match sampler {
            EvalSampler::Ode => {
                let noise = standard_normal(net.dim, &mut r);
                ode_sample(net, cond, grid, &noise)?
            }
            EvalSampler::Sde => sde_sample(net, cond, grid, &mut r)?,
        };
        evaluate_reward(&p.task, &x)
    });
    let mut out = vec![0.0; prompts.len()];
    for (job, r) in rewards.into_iter().enumerate() {
        out[job / samples] += r?;
    }
    Ok(out.into_iter().map(|s| s / samples as f64).collect())
}

fn checked_reward(p: &PromptSpec, x: &[f64]) -> Result<f64> {
    let r = evaluate_reward(&p.task, x)?;
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidArgument(format!("reward {r} for prompt {} outside [0, 1]", p.id)));
    }
    Ok(r)
}

/// Collect rollouts for `(prompt, count)` pairs with streams keyed by
/// `(stream_tag, iteration, prompt, index)`.
fn collect(
    net: &VelocityNet,
    prompts: &[PromptSpec],
    plan: &[(usize, usize)],
    grid: &[GridStep],
    seed: u64,
    stream_tag: u64,
    iteration: u64,
    exec: Execution,
) -> Result<Vec<Trajectory>> {
    let jobs: Vec<(usize, usize)> = plan
        .iter()
        .flat_map(|&(p, m)| (0..m).map(move |j| (p, j)))
        .collect();
    exec.map(&jobs, |&(p, j)| {
        let mut r = rng::stream(seed, &[stream_tag, iteration, p as u64, j as u64]);
        let mut tr = rollout(net, p, net.cond(p)?, grid, &mut r)?;
        tr.reward = checked_reward(&prompts[p], &tr.x_final)?;
        Ok(tr)
    })
    .into_iter()
    .collect()
}

/// Draw `k` distinct indices with probability proportional to `weights`
/// (sequential draws, renormalizing after each pick).
pub fn weighted_sample_without_replacement<R: Rng + ?Sized>(weights: &[f64], k: usize, rng: &mut R) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..weights.len()).collect();
    let mut picked = Vec::with_capacity(k.min(weights.len()));
    while picked.len() < k && !remaining.is_empty() {
        let total: f64 = remaining.iter().map(|&i| weights[i]).sum();
        let mut u = rng.random::<f64>() * total;
        let mut pos = remaining.len() - 1;
        for (n, &i) in remaining.iter().enumerate() {
            if u < weights[i] {
                pos = n;
                break;
            }
            u -= weights[i];
        }
        picked.push(remaining.remove(pos));
    }
    picked.sort_unstable();
    picked
}

fn tracker_advantages(
    trajs: &[Trajectory],
    v_prev: &BTreeMap<usize, f64>,
    cfg: &RunConfig,
    sigmas: &[f64],
    reweight: bool,
) -> AdvantageSet {
    let steps = sigmas.len();
    // Raw per-step advantages: gamma^(T-1-k) r - v_prev, terminal reward only.
    let mut raw: Vec<Vec<f64>> = trajs
        .iter()
        .map(|tr| {
            (0..steps)
                .map(|k| raw_advantage(cfg.rl.gamma.powi((steps - 1 - k) as i32) * tr.reward, v_prev[&tr.prompt_id]))
                .collect()
        })
        .collect();
    if cfg.rl.per_group_centering {
        let mut sums: BTreeMap<usize, (Vec<f64>, usize)> = BTreeMap::new();
        for (tr, a) in trajs.iter().zip(&raw) {
            let e = sums.entry(tr.prompt_id).or_insert_with(|| (vec![0.0; steps], 0));
            e.0.iter_mut().zip(a).for_each(|(s, v)| *s += v);
            e.1 += 1;
        }
        for (tr, a) in trajs.iter().zip(raw.iter_mut()) {
            let (s, n) = &sums[&tr.prompt_id];
            a.iter_mut().zip(s).for_each(|(v, s)| *v -= s / *n as f64);
        }
    }
    let flat: Vec<f64> = raw.iter().flatten().copied().collect();
    let (norm, mean, std) = normalize_batch_advantages(&flat);
    let per_step: Vec<Vec<f64>> = norm
        .chunks(steps)
        .map(|a| {
            a.iter()
                .zip(sigmas)
                .map(|(v, s)| if reweight { step_advantage(*v, *s, cfg.rl.eta) } else { *v })
                .collect()
        })
        .collect();
    let trajectory = norm.chunks(steps).map(|a| a[steps - 1]).collect();
    AdvantageSet {
        trajectory,
        per_step,
        batch_mean: mean,
        batch_std: std,
    }
}

fn grpo_advantages(trajs: &[Trajectory], cfg: &RunConfig, sigmas: &[f64], reweight: bool) -> Result<AdvantageSet> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, tr) in trajs.iter().enumerate() {
        groups.entry(tr.prompt_id).or_default().push(i);
    }
    let mut traj_adv = vec![0.0; trajs.len()];
    for idx in groups.values() {
        let rewards: Vec<f64> = idx.iter().map(|&i| trajs[i].reward).collect();
        for (&i, a) in idx.iter().zip(group_advantage(&rewards)?) {
            traj_adv[i] = a;
        }
    }
    Ok(if reweight {
        AdvantageSet::step_weighted(traj_adv, sigmas, cfg.rl.eta, 0.0, 1.0)
    } else {
        AdvantageSet::uniform(traj_adv, sigmas.len(), 0.0, 1.0)
    })
}

/// Fine-tune `pretrained` with `variant`. The pretrained network also serves
/// as the frozen KL reference.
pub fn train(cfg: &RunConfig, variant: Variant, pretrained: &VelocityNet, exec: Execution) -> Result<TrainOutcome> {
    cfg.validate()?;
    pretrained.validate()?;
    if pretrained.n_prompts != cfg.prompts.len() {
        return Err(Error::Config(format!(
            "checkpoint has {} prompt embeddings, config defines {} prompts",
            pretrained.n_prompts,
            cfg.prompts.len()
        )));
    }
    let rl = &cfg.rl;
    let start = Instant::now();
    let clock = |log: bool| if log { start.elapsed().as_secs_f64() } else { 0.0 };
    let schedule = NoiseSchedule::new(rl.noise_level)?;
    let grid = schedule.grid(rl.t_train)?;
    let sigmas: Vec<f64> = grid.iter().map(|g| g.sigma).collect();
    let entropy_proxy = grid.iter().map(|g| g.sigma * g.dt.sqrt()).sum::<f64>() / grid.len() as f64;
    let reweight = rl.step_reweight_for(variant);
    let obj_cfg = ObjectiveConfig {
        eps_clip: rl.eps_clip,
        beta_kl: rl.beta_kl,
    };
    let n_prompts = cfg.prompts.len();
    let batch = rl.batch_prompts.min(n_prompts);

    let reference = pretrained.clone();
    let mut net = pretrained.clone();
    let mut opt = PolicyOptimizer::new(&net, AdamConfig::with_lr(rl.lr));
    let mut total_rollouts: u64 = 0;

    let mut trackers: Vec<ValueTracker> = Vec::new();
    if variant.uses_trackers() {
        let plan: Vec<(usize, usize)> = (0..n_prompts).map(|p| (p, cfg.tracker.n0)).collect();
        let init = collect(&net, &cfg.prompts, &plan, &grid, cfg.seed, tag::TRACKER_INIT, 0, exec)?;
        total_rollouts += init.len() as u64;
        for (p, chunk) in init.chunks(cfg.tracker.n0).enumerate() {
            let rewards: Vec<f64> = chunk.iter().map(|t| t.reward).collect();
            let mut tr = tracker_init(&rewards, &cfg.tracker)?;
            tr.record_probes(&chunk.iter().collect::<Vec<_>>());
            trackers.push(tr);
            debug!("prompt {p}: initial value {:.3}", trackers[p].v_hat);
        }
    }

    let baseline = evaluate_policy(&net, cfg, exec)?;
    info!("{variant}: pretrained eval reward {baseline:.4}");
    let mut train_log = vec![TrainLogRow {
        iteration: 0,
        variant,
        total_rollouts_cum: total_rollouts,
        mean_reward: None,
        eval_reward: Some(baseline),
        mean_abs_advantage: None,
        mean_kl_to_ref: None,
        entropy_proxy,
        wallclock_s: clock(rl.log_wallclock),
    }];
    let mut tracker_log = Vec::new();
    let mut last_batch = Vec::new();
    let mut acting = net.clone();

    for it in 1..=rl.iterations {
        if (it - 1) % rl.update_interval == 0 {
            acting = net.clone();
        }
        let mut select = rng::stream(cfg.seed, &[tag::PROMPT_SELECT, it as u64]);
        let weights: Vec<f64> = trackers.iter().map(|t| uncertainty_weight(t, cfg.tracker.epsilon_w)).collect();
        let mut bins = vec![0usize; n_prompts];
        let plan: Vec<(usize, usize)> = match variant {
            Variant::FlowGrpo => {
                let chosen = weighted_sample_without_replacement(&vec![1.0; n_prompts], batch, &mut select);
                chosen.into_iter().map(|p| (p, rl.group_size)).collect()
            }
            _ => {
                let chosen = weighted_sample_without_replacement(&weights, batch, &mut select);
                match variant {
                    Variant::FlowSpo => chosen.into_iter().map(|p| (p, 1)).collect(),
                    Variant::SpoFr => chosen.into_iter().map(|p| (p, rl.m_max)).collect(),
                    _ => {
                        let all: BTreeMap<usize, f64> = weights.iter().copied().enumerate().collect();
                        let alloc = allocate_rollouts(&all, rl.bins, rl.m_max, rl.invert_allocation)?;
                        for (p, b) in &alloc.bin_of {
                            bins[*p] = *b;
                        }
                        chosen.into_iter().map(|p| (p, alloc.entries[&p])).collect()
                    }
                }
            }
        };
        let trajs = collect(&acting, &cfg.prompts, &plan, &grid, cfg.seed, tag::ROLLOUT, it as u64, exec)?;
        total_rollouts += trajs.len() as u64;
        let mean_reward = trajs.iter().map(|t| t.reward).sum::<f64>() / trajs.len() as f64;

        let advs = if variant.uses_trackers() {
            let v_prev: BTreeMap<usize, f64> = plan.iter().map(|&(p, _)| (p, trackers[p].v_hat)).collect();
            tracker_advantages(&trajs, &v_prev, cfg, &sigmas, reweight)
        } else {
            grpo_advantages(&trajs, cfg, &sigmas, reweight)?
        };

        if variant.uses_trackers() {
            let mut m_of = vec![0usize; n_prompts];
            for &(p, m) in &plan {
                m_of[p] = m;
                let group: Vec<&Trajectory> = trajs.iter().filter(|t| t.prompt_id == p).collect();
                let rewards: Vec<f64> = group.iter().map(|t| t.reward).collect();
                let d = estimate_prompt_kl(&acting, &trackers[p], acting.cond(p)?)?;
                let rho = forgetting_factor(d, &cfg.tracker);
                trackers[p].update_visit(&rewards, rho)?;
                trackers[p].check(p)?;
                trackers[p].record_probes(&group);
            }
            for (p, t) in trackers.iter().enumerate() {
                tracker_log.push(TrackerLogRow {
                    iteration: it,
                    prompt_id: p,
                    v_hat: t.v_hat,
                    alpha: t.alpha,
                    beta: t.beta,
                    w: weights[p],
                    bin: bins[p],
                    m: m_of[p],
                });
            }
        }

        let mut kl_to_ref = 0.0;
        for u in 0..rl.inner_updates {
            let out = policy_objective(&net, &reference, &trajs, &advs, &obj_cfg, exec)?;
            if !out.loss.is_finite() {
                return Err(Error::NonFinite(format!("loss at iteration {it}")));
            }
            if u == 0 {
                kl_to_ref = out.mean_kl;
            }
            opt.step(&mut net, &out.grads)?;
        }

        let n_adv: usize = advs.per_step.iter().map(|a| a.len()).sum();
        let mean_abs_advantage = advs.per_step.iter().flatten().map(|a| a.abs()).sum::<f64>() / n_adv as f64;
        let eval_reward = if it % rl.eval_interval == 0 || it == rl.iterations {
            let e = evaluate_policy(&net, cfg, exec)?;
            info!("{variant} iter {it}: eval {e:.4}, train reward {mean_reward:.4}, rollouts {total_rollouts}");
            Some(e)
        } else {
            None
        };
        train_log.push(TrainLogRow {
            iteration: it,
            variant,
            total_rollouts_cum: total_rollouts,
            mean_reward: Some(mean_reward),
            eval_reward,
            mean_abs_advantage: Some(mean_abs_advantage),
            mean_kl_to_ref: Some(kl_to_ref),
            entropy_proxy,
            wallclock_s: clock(rl.log_wallclock),
        });
        if it == rl.iterations && rl.dump_trajectories {
            last_batch = trajs;
        }
    }
    Ok(TrainOutcome {
        net,
        train_log,
        tracker_log,
        last_batch,
    })
}
