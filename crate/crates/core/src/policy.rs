//! The conditional velocity field `v(x, t, c)`.
//!
//! The MLP input is the concatenation of the state `x`, sinusoidal time
//! features and a learned per-prompt embedding row. Embedding rows start at
//! zero, which is also the "null" conditioning used during pretraining, so
//! every prompt initially sees the pretrained unconditional field.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{adam_step, adam_update, Activation, AdamConfig, AdamState, ForwardCache, MlpParams};

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityNet {
    pub mlp: MlpParams,
    pub dim: usize,
    pub time_freqs: usize,
    pub emb_dim: usize,
    pub n_prompts: usize,
    /// Row-major `n_prompts * emb_dim`.
    pub embeddings: Vec<f64>,
}

/// Number of time features for `freqs` frequencies: `t` plus a sin/cos pair each.
pub fn time_feature_count(freqs: usize) -> usize {
    1 + 2 * freqs
}

fn push_time_features(out: &mut Vec<f64>, t: f64, freqs: usize) {
    out.push(t);
    let mut scale = PI;
    for _ in 0..freqs {
        out.push((scale * t).sin());
        out.push((scale * t).cos());
        scale *= 2.0;
    }
}

impl VelocityNet {
    pub fn new<R: Rng + ?Sized>(
        dim: usize,
        hidden: &[usize],
        activation: Activation,
        time_freqs: usize,
        emb_dim: usize,
        n_prompts: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut dims = vec![dim + time_feature_count(time_freqs) + emb_dim];
        dims.extend_from_slice(hidden);
        dims.push(dim);
        let mlp = MlpParams::init(&dims, activation, rng)?;
        Ok(Self {
            mlp,
            dim,
            time_freqs,
            emb_dim,
            n_prompts,
            embeddings: vec![0.0; n_prompts * emb_dim],
        })
    }

    pub fn input_dim(&self) -> usize {
        self.dim + time_feature_count(self.time_freqs) + self.emb_dim
    }

    /// Checks that the MLP widths agree with the declared layout.
    pub fn validate(&self) -> Result<()> {
        if self.mlp.in_dim() != self.input_dim() {
            return Err(Error::dim("velocity net input", self.input_dim(), self.mlp.in_dim()));
        }
        if self.mlp.out_dim() != self.dim {
            return Err(Error::dim("velocity net output", self.dim, self.mlp.out_dim()));
        }
        if self.embeddings.len() != self.n_prompts * self.emb_dim {
            return Err(Error::dim("embedding table", self.n_prompts * self.emb_dim, self.embeddings.len()));
        }
        Ok(())
    }

    pub fn null_cond(&self) -> Vec<f64> {
        vec![0.0; self.emb_dim]
    }

    pub fn cond(&self, prompt: usize) -> Result<&[f64]> {
        if prompt >= self.n_prompts {
            return Err(Error::InvalidArgument(format!(
                "prompt {prompt} outside embedding table of {}",
                self.n_prompts
            )));
        }
        Ok(&self.embeddings[prompt * self.emb_dim..(prompt + 1) * self.emb_dim])
    }

    pub fn input(&self, x: &[f64], t: f64, cond: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::dim("state", self.dim, x.len()));
        }
        if cond.len() != self.emb_dim {
            return Err(Error::dim("conditioning", self.emb_dim, cond.len()));
        }
        let mut input = Vec::with_capacity(self.input_dim());
        input.extend_from_slice(x);
        push_time_features(&mut input, t, self.time_freqs);
        input.extend_from_slice(cond);
        Ok(input)
    }

    pub fn velocity(&self, x: &[f64], t: f64, cond: &[f64]) -> Result<Vec<f64>> {
        self.mlp.forward(&self.input(x, t, cond)?)
    }

    pub fn velocity_cached(&self, x: &[f64], t: f64, cond: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        self.mlp.forward_cached(&self.input(x, t, cond)?)
    }

    /// Backpropagate `grad_v` into `grads`. When `prompt` is given, the
    /// gradient reaching the conditioning slice of the input is added to that
    /// prompt's embedding row.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        grad_v: &[f64],
        prompt: Option<usize>,
        grads: &mut PolicyGrads,
    ) -> Result<()> {
        let grad_input = self.mlp.backward_into(cache, grad_v, &mut grads.mlp)?;
        if let Some(p) = prompt {
            let offset = self.dim + time_feature_count(self.time_freqs);
            let row = &mut grads.embeddings[p * self.emb_dim..(p + 1) * self.emb_dim];
            for (g, gi) in row.iter_mut().zip(&grad_input[offset..]) {
                *g += gi;
            }
        }
        Ok(())
    }
}

/// Gradient buffers shaped like a [`VelocityNet`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrads {
    pub mlp: MlpParams,
    pub embeddings: Vec<f64>,
}

impl PolicyGrads {
    pub fn zeros(net: &VelocityNet) -> Self {
        Self {
            mlp: net.mlp.zeros_like(),
            embeddings: vec![0.0; net.embeddings.len()],
        }
    }

    pub fn add_scaled(&mut self, other: &PolicyGrads, scale: f64) {
        self.mlp.add_scaled(&other.mlp, scale);
        for (a, b) in self.embeddings.iter_mut().zip(&other.embeddings) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.mlp.values_mut().for_each(|v| *v *= s);
        self.embeddings.iter_mut().for_each(|v| *v *= s);
    }

    pub fn is_finite(&self) -> bool {
        self.mlp.is_finite() && self.embeddings.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.mlp
            .values()
            .chain(self.embeddings.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Adam over both the MLP and the embedding table, sharing one step counter.
#[derive(Debug, Clone)]
pub struct PolicyOptimizer {
    pub mlp: AdamState,
    emb_m: Vec<f64>,
    emb_v: Vec<f64>,
}

impl PolicyOptimizer {
    pub fn new(net: &VelocityNet, config: AdamConfig) -> Self {
        Self {
            mlp: AdamState::new(&net.mlp, config),
            emb_m: vec![0.0; net.embeddings.len()],
            emb_v: vec![0.0; net.embeddings.len()],
        }
    }

    pub fn step(&mut self, net: &mut VelocityNet, grads: &PolicyGrads) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::NonFinite("policy gradient contains a non-finite entry".into()));
        }
        adam_step(&mut net.mlp, &grads.mlp, &mut self.mlp)?;
        let cfg = self.mlp.config;
        adam_update(
            &cfg,
            self.mlp.step_count,
            &mut net.embeddings,
            &grads.embeddings,
            &mut self.emb_m,
            &mut self.emb_v,
        );
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn net() -> VelocityNet {
        let mut r = rng::stream(1, &[]);
        let mut net = VelocityNet::new(2, &[12], Activation::Tanh, 2, 3, 4, &mut r).unwrap();
        for (i, e) in net.embeddings.iter_mut().enumerate() {
            *e = 0.1 * (i as f64).sin();
        }
        net
    }

    #[test]
    fn input_layout() {
        let n = net();
        let input = n.input(&[1.0, 2.0], 0.25, &[7.0, 8.0, 9.0]).unwrap();
        assert_eq!(input.len(), n.input_dim());
        assert_eq!(&input[..3], &[1.0, 2.0, 0.25]);
        assert!((input[3] - (PI * 0.25).sin()).abs() < 1e-15);
        assert!((input[6] - (2.0 * PI * 0.25).cos()).abs() < 1e-15);
        assert_eq!(&input[7..], &[7.0, 8.0, 9.0]);
        n.validate().unwrap();
    }

    #[test]
    fn embedding_gradient_matches_finite_difference() {
        let n = net();
        let x = [0.4, -0.2];
        let t = 0.6;
        let gv = [0.7, -1.1];
        let (_, cache) = n.velocity_cached(&x, t, n.cond(2).unwrap()).unwrap();
        let mut grads = PolicyGrads::zeros(&n);
        n.backward_into(&cache, &gv, Some(2), &mut grads).unwrap();
        let f = |m: &VelocityNet| -> f64 {
            let v = m.velocity(&x, t, m.cond(2).unwrap()).unwrap();
            v[0] * gv[0] + v[1] * gv[1]
        };
        let h = 1e-6;
        for j in 0..n.emb_dim {
            let idx = 2 * n.emb_dim + j;
            let mut p = n.clone();
            p.embeddings[idx] += h;
            let mut m = n.clone();
            m.embeddings[idx] -= h;
            let fd = (f(&p) - f(&m)) / (2.0 * h);
            assert!((grads.embeddings[idx] - fd).abs() < 1e-7);
        }
        // Other rows untouched.
        assert!(grads.embeddings[..2 * n.emb_dim].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unknown_prompt_is_rejected() {
        assert!(net().cond(4).is_err());
    }
}
