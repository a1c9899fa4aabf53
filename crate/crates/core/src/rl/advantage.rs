//! Advantage estimators.

use log::warn;

use crate::error::{Error, Result};

/// Floor applied to every std that normalizes advantages.
pub const STD_FLOOR: f64 = 1e-6;

fn mean_and_population_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Group-relative advantage `(r_i - mean) / max(std, 1e-6)` with the
/// population std. Groups smaller than two have no defined spread and must
/// use a tracker baseline instead.
pub fn group_advantage(rewards: &[f64]) -> Result<Vec<f64>> {
    if rewards.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "group advantage needs at least 2 rewards, got {}",
            rewards.len()
        )));
    }
    let (mean, std) = mean_and_population_std(rewards);
    let denom = std.max(STD_FLOOR);
    Ok(rewards.iter().map(|r| (r - mean) / denom).collect())
}

/// `r - v_prev`, with `v_prev` the tracker value before this iteration's update.
pub fn raw_advantage(reward: f64, v_prev: f64) -> f64 {
    reward - v_prev
}

/// Batch normalization `(A - mean) / max(std, 1e-6)`. A batch of one has no
/// spread; it is passed through unchanged with a warning.
pub fn normalize_batch_advantages(raw: &[f64]) -> (Vec<f64>, f64, f64) {
    match raw.len() {
        0 => (Vec::new(), 0.0, 0.0),
        1 => {
            warn!("batch of one advantage: normalization undefined, passing through");
            (raw.to_vec(), 0.0, 1.0)
        }
        _ => {
            let (mean, std) = mean_and_population_std(raw);
            let denom = std.max(STD_FLOOR);
            (raw.iter().map(|a| (a - mean) / denom).collect(), mean, std)
        }
    }
}

/// Step-level re-estimate `eta * sigma_t * A_tau`.
pub fn step_advantage(a_tau: f64, sigma_t: f64, eta: f64) -> f64 {
    eta * sigma_t * a_tau
}

/// Monte-Carlo advantage `sum_{s >= t} gamma^(s - t) r_s - baseline` over a
/// per-step reward sequence indexed from 0.
pub fn discounted_advantage(rewards_per_step: &[f64], gamma: f64, baseline: f64, t: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("gamma {gamma} outside [0, 1]")));
    }
    let mut ret = 0.0;
    let mut discount = 1.0;
    for r in rewards_per_step.iter().skip(t) {
        ret += discount * r;
        discount *= gamma;
    }
    Ok(ret - baseline)
}

/// Per-trajectory and per-step advantages for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageSet {
    /// Trajectory-level advantage (after any normalization).
    pub trajectory: Vec<f64>,
    /// `per_step[i][k]`: advantage of step `k` of trajectory `i`.
    pub per_step: Vec<Vec<f64>>,
    pub batch_mean: f64,
    pub batch_std: f64,
}

impl AdvantageSet {
    /// Reuse the trajectory advantage at every step.
    pub fn uniform(trajectory: Vec<f64>, steps: usize, batch_mean: f64, batch_std: f64) -> Self {
        let per_step = trajectory.iter().map(|a| vec![*a; steps]).collect();
        Self {
            trajectory,
            per_step,
            batch_mean,
            batch_std,
        }
    }

    /// Scale each trajectory advantage by `eta * sigma_t` per step.
    pub fn step_weighted(trajectory: Vec<f64>, sigmas: &[f64], eta: f64, batch_mean: f64, batch_std: f64) -> Self {
        let per_step = trajectory
            .iter()
            .map(|a| sigmas.iter().map(|s| step_advantage(*a, *s, eta)).collect())
            .collect();
        Self {
            trajectory,
            per_step,
            batch_mean,
            batch_std,
        }
    }
}
