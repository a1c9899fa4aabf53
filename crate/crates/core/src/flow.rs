//! Rectified-flow pretraining on synthetic Gaussian mixtures.

use std::f64::consts::PI;

use log::{info, warn};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{DatasetSpec, RunConfig};
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, MlpParams};
use crate::policy::{PolicyGrads, PolicyOptimizer, VelocityNet};
use crate::rng::{self, tag};

/// `(1 - tau) * x0 + tau * x1`.
pub fn interpolate(x0: &[f64], x1: &[f64], tau: f64) -> Result<Vec<f64>> {
    if x0.len() != x1.len() {
        return Err(Error::dim("interpolate", x0.len(), x1.len()));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!("tau {tau} outside [0, 1]")));
    }
    Ok(x0.iter().zip(x1).map(|(a, b)| (1.0 - tau) * a + tau * b).collect())
}

/// One flow-matching training pair: data point, noise, and time.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSample {
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub mean: Vec<f64>,
    pub std: f64,
    pub weight: f64,
}

/// Isotropic Gaussian mixture standing in for the data distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub components: Vec<MixtureComponent>,
    pub dim: usize,
}

impl SyntheticDataset {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        let dim = components
            .first()
            .ok_or_else(|| Error::InvalidArgument("dataset needs at least one component".into()))?
            .mean
            .len();
        if dim == 0 {
            return Err(Error::InvalidArgument("dataset dimension must be positive".into()));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        for c in &components {
            if c.mean.len() != dim {
                return Err(Error::dim("mixture component", dim, c.mean.len()));
            }
            if !(c.std > 0.0) || !(c.weight > 0.0) {
                return Err(Error::InvalidArgument("component std and weight must be positive".into()));
            }
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(Self { components, dim })
    }

    /// `modes` equal-weight components evenly spaced on a circle.
    pub fn ring(modes: usize, radius: f64, std: f64) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidArgument("ring needs at least one mode".into()));
        }
        let components = (0..modes)
            .map(|k| {
                let angle = 2.0 * PI * k as f64 / modes as f64;
                MixtureComponent {
                    mean: vec![radius * angle.cos(), radius * angle.sin()],
                    std,
                    weight: 1.0 / modes as f64,
                }
            })
            .collect();
        Self::new(components)
    }

    pub fn from_spec(spec: &DatasetSpec) -> Result<Self> {
        match spec {
            DatasetSpec::Ring { modes, radius, std } => Self::ring(*modes, *radius, *std),
            DatasetSpec::Mixture { components } => Self::new(components.clone()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = &self.components[self.components.len() - 1];
        for c in &self.components {
            acc += c.weight;
            if u < acc {
                chosen = c;
                break;
            }
        }
        chosen
            .mean
            .iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(rng);
                m + chosen.std * z
            })
            .collect()
    }
}

pub fn standard_normal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Mean over the batch of `|(x1 - x0) - v(x_tau, tau, cond)|^2` and its
/// gradient with respect to the MLP parameters.
pub fn fm_loss_and_grads(net: &VelocityNet, batch: &[FlowSample], cond: &[f64]) -> Result<(f64, MlpParams)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty flow-matching batch".into()));
    }
    let mut grads = PolicyGrads::zeros(net);
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for s in batch {
        let xt = interpolate(&s.x0, &s.x1, s.tau)?;
        let (v, cache) = net.velocity_cached(&xt, s.tau, cond)?;
        let residual: Vec<f64> = v
            .iter()
            .zip(s.x1.iter().zip(&s.x0))
            .map(|(vp, (a, b))| vp - (a - b))
            .collect();
        loss += residual.iter().map(|r| r * r).sum::<f64>();
        let grad_v: Vec<f64> = residual.iter().map(|r| 2.0 * scale * r).collect();
        net.backward_into(&cache, &grad_v, None, &mut grads)?;
    }
    Ok((loss * scale, grads.mlp))
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub net: VelocityNet,
    /// Loss of every optimizer step, in order.
    pub losses: Vec<f64>,
}

/// Freshly initialized network for `cfg`.
pub fn init_net(cfg: &RunConfig) -> Result<VelocityNet> {
    let mut r = rng::stream(cfg.seed, &[tag::INIT]);
    VelocityNet::new(
        cfg.model.dim,
        &cfg.model.hidden,
        cfg.model.activation,
        cfg.model.time_freqs,
        cfg.model.emb_dim,
        cfg.prompts.len(),
        &mut r,
    )
}

pub fn draw_batch(dataset: &SyntheticDataset, size: usize, seed: u64, step: u64) -> Vec<FlowSample> {
    let mut r = rng::stream(seed, &[tag::PRETRAIN, step]);
    (0..size)
        .map(|_| {
            let x0 = dataset.sample(&mut r);
            let x1 = standard_normal(dataset.dim, &mut r);
            let tau = r.random::<f64>();
            FlowSample { x0, x1, tau }
        })
        .collect()
}

/// Train the velocity field on `dataset` with the null conditioning.
pub fn pretrain(dataset: &SyntheticDataset, cfg: &RunConfig) -> Result<PretrainOutcome> {
    let net = init_net(cfg)?;
    pretrain_from(net, dataset, cfg, |_, _| {})
}

/// Pretraining starting from `net`; `on_step` sees every `(step, loss)`.
pub fn pretrain_from(
    mut net: VelocityNet,
    dataset: &SyntheticDataset,
    cfg: &RunConfig,
    mut on_step: impl FnMut(usize, f64),
) -> Result<PretrainOutcome> {
    let p = &cfg.pretrain;
    if p.batch == 0 {
        return Err(Error::InvalidArgument("pretrain batch must be positive".into()));
    }
    if dataset.dim != net.dim {
        return Err(Error::dim("dataset vs model", net.dim, dataset.dim));
    }
    let mut opt = PolicyOptimizer::new(&net, AdamConfig::with_lr(p.lr));
    let cond = net.null_cond();
    let mut losses = Vec::with_capacity(p.steps);
    for step in 0..p.steps {
        // Linear decay to `lr_final` over the run.
        let frac = if p.steps > 1 { step as f64 / (p.steps - 1) as f64 } else { 0.0 };
        opt.mlp.config.lr = p.lr + (p.lr_final - p.lr) * frac;
        let batch = draw_batch(dataset, p.batch, cfg.seed, step as u64);
        let (loss, grads) = fm_loss_and_grads(&net, &batch, &cond)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("pretraining diverged at step {step}: loss {loss}")));
        }
        let grads = PolicyGrads {
            mlp: grads,
            embeddings: vec![0.0; net.embeddings.len()],
        };
        opt.step(&mut net, &grads)?;
        on_step(step, loss);
        losses.push(loss);
    }
    if let Some(last) = smoothed_tail(&losses, 100) {
        if last > p.warn_loss {
            warn!("pretraining ended with smoothed loss {last:.4} above warn_loss {}", p.warn_loss);
        } else {
            info!("pretraining finished, smoothed loss {last:.4}");
        }
    }
    Ok(PretrainOutcome { net, losses })
}

fn smoothed_tail(losses: &[f64], window: usize) -> Option<f64> {
    if losses.is_empty() {
        return None;
    }
    let w = window.min(losses.len());
    Some(losses[losses.len() - w..].iter().sum::<f64>() / w as f64)
}
