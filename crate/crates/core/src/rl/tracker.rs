//! Per-prompt Beta value trackers with drift-adaptive forgetting.
//!
//! Each prompt keeps `Beta(alpha, beta)` pseudo-counts of its reward. Before
//! an update both counts are discounted by `rho = 2^(-D / D_half)`, clamped to
//! `[rho_min, rho_max]`, where `D` measures how far the policy has moved since
//! it last acted on the prompt.

use log::warn;

use crate::error::{Error, Result};
use crate::policy::VelocityNet;
use crate::sde::{gaussian_step_kl, step_mean, GridStep, Trajectory};

/// Most probe states kept per prompt.
pub const MAX_PROBES: usize = 32;

/// Offset applied to a degenerate initial value of exactly 0 or 1.
const INIT_NUDGE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    pub rho_min: f64,
    pub rho_max: f64,
    pub d_half: f64,
    pub n0: usize,
    pub epsilon_w: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            rho_min: 0.875,
            rho_max: 0.99,
            d_half: 1.0,
            n0: 8,
            epsilon_w: 0.01,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rho_min > 0.0
            && self.rho_min < 1.0
            && self.rho_max <= 1.0
            && self.rho_min <= self.rho_max
            && self.d_half > 0.0
            && self.n0 >= 1
            && self.epsilon_w > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid tracker config {self:?}")))
        }
    }

    /// Equilibrium effective sample size `1 / (1 - rho_min)`.
    pub fn initial_sample_size(&self) -> f64 {
        1.0 / (1.0 - self.rho_min)
    }
}

/// A state visited on the prompt's last visit together with the transition
/// the acting policy chose there.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub x_t: Vec<f64>,
    pub step: GridStep,
    pub mean: Vec<f64>,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueTracker {
    pub alpha: f64,
    pub beta: f64,
    pub v_hat: f64,
    pub probes: Vec<Probe>,
    pub visits: u64,
}

fn check_reward(r: f64) -> Result<()> {
    if (0.0..=1.0).contains(&r) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("reward {r} outside [0, 1]")))
    }
}

/// Tracker from `n0` rewards of the initial policy.
pub fn tracker_init(rewards: &[f64], cfg: &TrackerConfig) -> Result<ValueTracker> {
    if rewards.len() != cfg.n0 {
        return Err(Error::InvalidArgument(format!(
            "tracker init expects {} rewards, got {}",
            cfg.n0,
            rewards.len()
        )));
    }
    for r in rewards {
        check_reward(*r)?;
    }
    let mut v0 = rewards.iter().sum::<f64>() / rewards.len() as f64;
    if v0 <= 0.0 {
        v0 = INIT_NUDGE;
    } else if v0 >= 1.0 {
        v0 = 1.0 - INIT_NUDGE;
    }
    let n0 = cfg.initial_sample_size();
    let alpha = n0 * v0;
    let beta = n0 * (1.0 - v0);
    Ok(ValueTracker {
        alpha,
        beta,
        v_hat: alpha / (alpha + beta),
        probes: Vec::new(),
        visits: 0,
    })
}

/// `clamp(2^(-D / D_half), rho_min, rho_max)`.
pub fn forgetting_factor(d: f64, cfg: &TrackerConfig) -> f64 {
    let raw = (-d.max(0.0) / cfg.d_half).exp2();
    raw.clamp(cfg.rho_min, cfg.rho_max)
}

/// `sqrt(v (1 - v)) + eps`.
pub fn uncertainty_weight(tracker: &ValueTracker, epsilon_w: f64) -> f64 {
    let v = tracker.v_hat.clamp(0.0, 1.0);
    (v * (1.0 - v)).sqrt() + epsilon_w
}

impl ValueTracker {
    /// `alpha <- rho alpha + r`, `beta <- rho beta + (1 - r)`.
    pub fn update(&mut self, r: f64, rho: f64) -> Result<()> {
        check_reward(r)?;
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::InvalidArgument(format!("forgetting factor {rho} outside (0, 1]")));
        }
        self.alpha = rho * self.alpha + r;
        self.beta = rho * self.beta + (1.0 - r);
        self.v_hat = self.alpha / (self.alpha + self.beta);
        Ok(())
    }

    /// Fold a visit's rewards into the tracker: the discount is applied once
    /// for the visit, then every reward is added as a pseudo-observation.
    pub fn update_visit(&mut self, rewards: &[f64], rho: f64) -> Result<()> {
        for (k, r) in rewards.iter().enumerate() {
            self.update(*r, if k == 0 { rho } else { 1.0 })?;
        }
        self.visits += 1;
        Ok(())
    }

    pub fn check(&self, prompt: usize) -> Result<()> {
        let ok = self.alpha.is_finite() && self.beta.is_finite() && self.alpha > 0.0 && self.beta > 0.0;
        if !ok {
            return Err(Error::TrackerCorrupt {
                prompt,
                msg: format!("alpha {} beta {}", self.alpha, self.beta),
            });
        }
        if (self.v_hat - self.alpha / (self.alpha + self.beta)).abs() > 1e-12 {
            return Err(Error::TrackerCorrupt {
                prompt,
                msg: format!("v_hat {} disagrees with alpha/(alpha+beta)", self.v_hat),
            });
        }
        Ok(())
    }

    /// Remember the states visited by `trajectories` (at most [`MAX_PROBES`])
    /// together with the means the acting policy produced there.
    pub fn record_probes(&mut self, trajectories: &[&Trajectory]) {
        self.probes = trajectories
            .iter()
            .flat_map(|tr| tr.steps.iter())
            .filter(|s| s.std > 0.0)
            .take(MAX_PROBES)
            .map(|s| Probe {
                x_t: s.x_t.clone(),
                step: s.grid_step(),
                mean: s.mean.clone(),
                std: s.std,
            })
            .collect();
    }
}

/// Mean Gaussian KL, over the stored probes, between the transition of `net`
/// and the transition recorded at the prompt's last visit.
pub fn estimate_prompt_kl(net: &VelocityNet, tracker: &ValueTracker, cond: &[f64]) -> Result<f64> {
    if tracker.probes.is_empty() {
        warn!("no probe states stored; treating policy drift as zero");
        return Ok(0.0);
    }
    let mut total = 0.0;
    for p in &tracker.probes {
        let now = step_mean(net, &p.x_t, &p.step, cond)?;
        total += gaussian_step_kl(&now, &p.mean, p.std)?;
    }
    Ok(total / tracker.probes.len() as f64)
}
