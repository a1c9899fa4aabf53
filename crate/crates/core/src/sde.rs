//! Reverse-time samplers.
//!
//! Time runs from `t = 1` (noise) to `t = 0` (data) on a uniform grid
//! `t_k = k / T`. The deterministic sampler is the Euler discretization of
//! `dx = v dt`; the stochastic one is Euler–Maruyama on
//!
//! ```text
//! dx = [v + sigma_t^2 / (2t) * (x + (1 - t) v)] dt + sigma_t dw
//! ```
//!
//! which shares its marginals with the ODE. Each stochastic step is an
//! isotropic Gaussian transition whose log-density is recorded for
//! likelihood-ratio updates.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::flow::standard_normal;
use crate::policy::VelocityNet;

/// `sigma_t = a * sqrt(t / (1 - t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSchedule {
    pub noise_level: f64,
}

/// One point of the integration grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridStep {
    pub t: f64,
    pub dt: f64,
    pub sigma: f64,
}

impl NoiseSchedule {
    pub fn new(noise_level: f64) -> Result<Self> {
        if !(noise_level >= 0.0) || !noise_level.is_finite() {
            return Err(Error::InvalidArgument(format!("noise level {noise_level} must be finite and >= 0")));
        }
        Ok(Self { noise_level })
    }

    pub fn sigma_at(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidArgument(format!("sigma_t needs t in (0, 1), got {t}")));
        }
        Ok(self.noise_level * (t / (1.0 - t)).sqrt())
    }

    /// Uniform grid from `t = 1` down to `t = 1/steps`, each step integrating
    /// `dt = 1/steps`. `sigma_t` diverges at `t = 1`, so it is evaluated at
    /// `min(t, 1 - 1/steps)` (the largest interior grid point; `1/2` when
    /// `steps == 1`).
    pub fn grid(&self, steps: usize) -> Result<Vec<GridStep>> {
        if steps == 0 {
            return Err(Error::InvalidArgument("need at least one sampling step".into()));
        }
        let n = steps as f64;
        let t_cap = if steps == 1 { 0.5 } else { (n - 1.0) / n };
        (1..=steps)
            .rev()
            .map(|k| {
                let t = k as f64 / n;
                Ok(GridStep {
                    t,
                    dt: 1.0 / n,
                    sigma: self.sigma_at(t.min(t_cap))?,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub sigma: f64,
    pub x_t: Vec<f64>,
    pub mean: Vec<f64>,
    /// Isotropic transition std, `sigma * sqrt(dt)`.
    pub std: f64,
    pub x_next: Vec<f64>,
    /// `None` for deterministic (`std == 0`) steps.
    pub logprob: Option<f64>,
}

impl StepRecord {
    pub fn grid_step(&self) -> GridStep {
        GridStep {
            t: self.t,
            dt: self.dt,
            sigma: self.sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub prompt_id: usize,
    pub steps: Vec<StepRecord>,
    pub x_final: Vec<f64>,
    pub reward: f64,
}

fn check_step(t: f64, dt: f64) -> Result<()> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::InvalidArgument(format!("step time {t} outside (0, 1]")));
    }
    if !(dt > 0.0) || dt > t * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!("step size {dt} must lie in (0, t = {t}]")));
    }
    Ok(())
}

fn check_finite(x: &[f64], what: &str, t: f64) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} at t = {t}: {x:?}")))
    }
}

/// Euler step toward `t = 0`: `x - dt * v(x, t, c)`.
pub fn ode_step(net: &VelocityNet, x: &[f64], t: f64, dt: f64, cond: &[f64]) -> Result<Vec<f64>> {
    check_step(t, dt)?;
    let v = net.velocity(x, t, cond)?;
    let next: Vec<f64> = x.iter().zip(&v).map(|(xi, vi)| xi - dt * vi).collect();
    check_finite(&next, "ODE state", t)?;
    Ok(next)
}

/// Transition mean given the velocity `v` at `(x, t)`.
pub fn mean_from_velocity(x: &[f64], v: &[f64], step: &GridStep) -> Vec<f64> {
    let c = step.sigma * step.sigma / (2.0 * step.t);
    x.iter()
        .zip(v)
        .map(|(xi, vi)| {
            let drift = vi + c * (xi + (1.0 - step.t) * vi);
            xi - step.dt * drift
        })
        .collect()
}

/// `d mean_i / d v_i`; the Jacobian is this scalar times the identity.
pub fn mean_velocity_jacobian(step: &GridStep) -> f64 {
    -step.dt * (1.0 + step.sigma * step.sigma * (1.0 - step.t) / (2.0 * step.t))
}

pub fn step_mean(net: &VelocityNet, x: &[f64], step: &GridStep, cond: &[f64]) -> Result<Vec<f64>> {
    check_step(step.t, step.dt)?;
    let v = net.velocity(x, step.t, cond)?;
    Ok(mean_from_velocity(x, &v, step))
}

/// Log-density of an isotropic Gaussian `N(mean, std^2 I)` at `x`.
pub fn gaussian_logpdf(x: &[f64], mean: &[f64], std: f64) -> f64 {
    let d = x.len() as f64;
    let sq: f64 = x.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
    -sq / (2.0 * std * std) - d * std.ln() - 0.5 * d * (2.0 * PI).ln()
}

/// One Euler–Maruyama step, recording the transition.
pub fn sde_step<R: Rng + ?Sized>(
    net: &VelocityNet,
    x: &[f64],
    step: &GridStep,
    cond: &[f64],
    rng: &mut R,
) -> Result<StepRecord> {
    let mean = step_mean(net, x, step, cond)?;
    check_finite(&mean, "SDE mean", step.t)?;
    let std = step.sigma * step.dt.sqrt();
    let (x_next, logprob) = if std > 0.0 {
        let next: Vec<f64> = mean
            .iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(rng);
                m + std * z
            })
            .collect();
        let lp = gaussian_logpdf(&next, &mean, std);
        (next, Some(lp))
    } else {
        (mean.clone(), None)
    };
    Ok(StepRecord {
        t: step.t,
        dt: step.dt,
        sigma: step.sigma,
        x_t: x.to_vec(),
        mean,
        std,
        x_next,
        logprob,
    })
}

/// Full stochastic trajectory from `x ~ N(0, I)`. The reward is left at zero
/// for the caller to attach.
pub fn rollout<R: Rng + ?Sized>(
    net: &VelocityNet,
    prompt_id: usize,
    cond: &[f64],
    grid: &[GridStep],
    rng: &mut R,
) -> Result<Trajectory> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty time grid".into()));
    }
    let mut x = standard_normal(net.dim, rng);
    let mut steps = Vec::with_capacity(grid.len());
    for g in grid {
        let rec = sde_step(net, &x, g, cond, rng)
            .map_err(|e| Error::NonFinite(format!("rollout for prompt {prompt_id} aborted: {e}")))?;
        x = rec.x_next.clone();
        steps.push(rec);
    }
    Ok(Trajectory {
        prompt_id,
        steps,
        x_final: x,
        reward: 0.0,
    })
}

/// Deterministic sample from the given initial noise.
pub fn ode_sample(net: &VelocityNet, cond: &[f64], grid: &[GridStep], noise: &[f64]) -> Result<Vec<f64>> {
    let mut x = noise.to_vec();
    for g in grid {
        x = ode_step(net, &x, g.t, g.dt, cond)?;
    }
    Ok(x)
}

/// Stochastic sample without keeping the per-step records.
pub fn sde_sample<R: Rng + ?Sized>(net: &VelocityNet, cond: &[f64], grid: &[GridStep], rng: &mut R) -> Result<Vec<f64>> {
    let mut x = standard_normal(net.dim, rng);
    for g in grid {
        let mean = step_mean(net, &x, g, cond)?;
        let std = g.sigma * g.dt.sqrt();
        x = mean
            .iter()
            .map(|m| {
                if std > 0.0 {
                    let z: f64 = StandardNormal.sample(rng);
                    m + std * z
                } else {
                    *m
                }
            })
            .collect();
        check_finite(&x, "SDE state", g.t)?;
    }
    Ok(x)
}

/// Log-density of `record.x_next` under `net`, evaluated at the stored state
/// `record.x_t` so that two policies are compared on identical inputs.
pub fn step_logprob_under(net: &VelocityNet, record: &StepRecord, cond: &[f64]) -> Result<f64> {
    if !(record.std > 0.0) {
        return Err(Error::UndefinedRatio(format!(
            "deterministic step at t = {} has no density",
            record.t
        )));
    }
    let mean = step_mean(net, &record.x_t, &record.grid_step(), cond)?;
    Ok(gaussian_logpdf(&record.x_next, &mean, record.std))
}

/// KL between two isotropic Gaussians with a shared std:
/// `|mean_a - mean_b|^2 / (2 std^2)`.
pub fn gaussian_step_kl(mean_a: &[f64], mean_b: &[f64], std: f64) -> Result<f64> {
    if !(std > 0.0) {
        return Err(Error::InvalidArgument(format!("KL needs std > 0, got {std}")));
    }
    if mean_a.len() != mean_b.len() {
        return Err(Error::dim("gaussian_step_kl", mean_a.len(), mean_b.len()));
    }
    let sq: f64 = mean_a.iter().zip(mean_b).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sq / (2.0 * std * std))
}

/// Debug dump: one row per step, `prompt_id,rollout_idx,t,std,logprob,reward`.
pub fn write_trajectory_csv<W: Write>(out: &mut W, trajectories: &[(usize, &Trajectory)]) -> Result<()> {
    writeln!(out, "prompt_id,rollout_idx,t,std,logprob,reward")?;
    for (idx, tr) in trajectories {
        for s in &tr.steps {
            let lp = s.logprob.map(|v| v.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{},{},{}", tr.prompt_id, idx, s.t, s.std, lp, tr.reward)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use crate::rng;

    fn net(seed: u64) -> VelocityNet {
        let mut r = rng::stream(seed, &[]);
        VelocityNet::new(2, &[16], Activation::Tanh, 2, 2, 3, &mut r).unwrap()
    }

    /// Network whose output is the constant `u` (output weights zeroed).
    fn constant_net(u: [f64; 2]) -> VelocityNet {
        let mut n = net(9);
        let last = n.mlp.layers.len() - 1;
        n.mlp.layers[last].weights.iter_mut().for_each(|w| *w = 0.0);
        n.mlp.layers[last].bias = u.to_vec();
        n
    }

    #[test]
    fn sigma_values() {
        let s = NoiseSchedule::new(0.7).unwrap();
        assert!((s.sigma_at(0.5).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(NoiseSchedule::new(0.0).unwrap().sigma_at(0.3).unwrap(), 0.0);
        let mut prev = f64::INFINITY;
        for k in (1..=50).rev() {
            let v = s.sigma_at(k as f64 / 100.0).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(s.sigma_at(1e-8).unwrap() < 1e-3);
        assert!(s.sigma_at(0.0).is_err());
        assert!(s.sigma_at(1.0).is_err());
    }

    #[test]
    fn grid_never_reaches_zero_and_clamps_at_one() {
        let s = NoiseSchedule::new(0.7).unwrap();
        let g = s.grid(10).unwrap();
        assert_eq!(g.len(), 10);
        assert_eq!(g[0].t, 1.0);
        assert_eq!(g[0].sigma, s.sigma_at(0.9).unwrap());
        assert!((g[9].t - 0.1).abs() < 1e-15);
        assert!(g.iter().all(|st| st.t > 0.0 && st.sigma.is_finite()));
        assert!(g.windows(2).all(|w| w[0].t > w[1].t));
        assert!(s.grid(0).is_err());
    }

    #[test]
    fn ode_step_cases() {
        let zero = constant_net([0.0, 0.0]);
        let c = zero.null_cond();
        assert_eq!(ode_step(&zero, &[0.3, -0.2], 0.5, 0.1, &c).unwrap(), vec![0.3, -0.2]);
        let u = constant_net([1.0, -2.0]);
        let x = ode_step(&u, &[0.3, -0.2], 0.5, 0.1, &c).unwrap();
        assert!((x[0] - 0.2).abs() < 1e-15 && (x[1] - 0.0).abs() < 1e-15);
        assert!(ode_step(&u, &[0.0, 0.0], 0.05, 0.1, &c).is_err());
    }

    #[test]
    fn zero_noise_sde_step_equals_ode_step() {
        let n = net(1);
        let c = n.cond(1).unwrap().to_vec();
        let g = NoiseSchedule::new(0.0).unwrap().grid(4).unwrap();
        let mut r = rng::stream(2, &[]);
        let x = [0.7, -1.2];
        let rec = sde_step(&n, &x, &g[1], &c, &mut r).unwrap();
        assert_eq!(rec.x_next, ode_step(&n, &x, g[1].t, g[1].dt, &c).unwrap());
        assert_eq!(rec.std, 0.0);
        assert!(rec.logprob.is_none());
        assert!(step_logprob_under(&n, &rec, &c).is_err());
    }

    #[test]
    fn gaussian_density_at_mode() {
        let lp = gaussian_logpdf(&[0.4], &[0.4], 1.0);
        assert!((lp + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
        assert!((lp + 0.918_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn empirical_step_std_matches_sigma_sqrt_dt() {
        let n = net(3);
        let c = n.null_cond();
        let g = NoiseSchedule::new(0.7).unwrap().grid(10).unwrap()[4];
        let mut r = rng::stream(4, &[]);
        let x = [0.5, 0.5];
        let draws: Vec<f64> = (0..10_000)
            .map(|_| sde_step(&n, &x, &g, &c, &mut r).unwrap().x_next[0])
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / draws.len() as f64;
        let want = g.sigma * g.dt.sqrt();
        assert!((var.sqrt() / want - 1.0).abs() < 0.02, "{} vs {want}", var.sqrt());
    }

    #[test]
    fn recorded_logprob_is_reproduced() {
        let n = net(5);
        let c = n.cond(2).unwrap().to_vec();
        let g = NoiseSchedule::new(0.7).unwrap().grid(10).unwrap();
        let mut r = rng::stream(6, &[]);
        let tr = rollout(&n, 2, &c, &g, &mut r).unwrap();
        assert_eq!(tr.steps.len(), 10);
        assert_eq!(tr.x_final, tr.steps[9].x_next);
        for s in &tr.steps {
            let lp = step_logprob_under(&n, s, &c).unwrap();
            assert!((lp - s.logprob.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn shifted_mean_lowers_logprob_by_quadratic() {
        let (delta, std) = (0.3, 0.2);
        let at_mode = gaussian_logpdf(&[1.0, 2.0], &[1.0, 2.0], std);
        let shifted = gaussian_logpdf(&[1.0, 2.0], &[1.0 + delta, 2.0], std);
        assert!((at_mode - shifted - delta * delta / (2.0 * std * std)).abs() < 1e-12);
    }

    #[test]
    fn identical_seeds_give_identical_rollouts() {
        let n = net(7);
        let c = n.cond(0).unwrap().to_vec();
        let g = NoiseSchedule::new(0.7).unwrap().grid(10).unwrap();
        let a = rollout(&n, 0, &c, &g, &mut rng::stream(8, &[1])).unwrap();
        let b = rollout(&n, 0, &c, &g, &mut rng::stream(8, &[1])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_step_deterministic_rollout() {
        let n = net(8);
        let c = n.null_cond();
        let g = NoiseSchedule::new(0.0).unwrap().grid(1).unwrap();
        let mut r = rng::stream(1, &[]);
        let tr = rollout(&n, 0, &c, &g, &mut r).unwrap();
        let mut r2 = rng::stream(1, &[]);
        let noise = standard_normal(2, &mut r2);
        assert_eq!(tr.x_final, ode_step(&n, &noise, 1.0, 1.0, &c).unwrap());
    }

    #[test]
    fn kl_cases() {
        assert_eq!(gaussian_step_kl(&[1.0, 2.0], &[1.0, 2.0], 0.5).unwrap(), 0.0);
        assert_eq!(gaussian_step_kl(&[0.0], &[1.0], 1.0).unwrap(), 0.5);
        let a = gaussian_step_kl(&[0.3, -1.0], &[1.2, 0.4], 0.7).unwrap();
        let b = gaussian_step_kl(&[1.2, 0.4], &[0.3, -1.0], 0.7).unwrap();
        assert_eq!(a, b);
        assert!(gaussian_step_kl(&[0.0], &[1.0], 0.0).is_err());
    }
}
