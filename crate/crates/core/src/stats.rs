//! Sample statistics used by evaluation and reporting.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng::{self, tag};

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_samples(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<usize> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("energy distance needs two non-empty samples".into()));
    }
    let d = a[0].len();
    if let Some(bad) = a.iter().chain(b).find(|x| x.len() != d) {
        return Err(Error::dim("energy distance sample", d, bad.len()));
    }
    Ok(d)
}

/// V-statistic `2 E|X - Y| - E|X - X'| - E|Y - Y'|`.
pub fn energy_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    check_samples(a, b)?;
    let mean = |u: &[Vec<f64>], v: &[Vec<f64>]| {
        u.iter().map(|x| v.iter().map(|y| dist(x, y)).sum::<f64>()).sum::<f64>() / (u.len() * v.len()) as f64
    };
    Ok(2.0 * mean(a, b) - mean(a, a) - mean(b, b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PermutationTest {
    pub observed: f64,
    /// Statistic under each label shuffle.
    pub null: Vec<f64>,
}

impl PermutationTest {
    /// Empirical `q`-quantile of the null (nearest rank).
    pub fn null_quantile(&self, q: f64) -> f64 {
        let mut sorted = self.null.clone();
        sorted.sort_by(f64::total_cmp);
        let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
        sorted[rank - 1]
    }

    /// `(1 + #{null >= observed}) / (1 + n)`.
    pub fn p_value(&self) -> f64 {
        let ge = self.null.iter().filter(|v| **v >= self.observed).count();
        (1 + ge) as f64 / (1 + self.null.len()) as f64
    }
}

const ROW_BLOCK: usize = 64;

/// Energy distance of `a` vs `b` and of `permutations` random relabellings of
/// the pooled sample.
///
/// With label weights `s_i = 1/n_a` on one group and `-1/n_b` on the other,
/// the statistic is `-s^T D s` for the pooled distance matrix `D`, so every
/// labelling is evaluated in one pass over `D` without storing it.
pub fn energy_permutation_test(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    permutations: usize,
    seed: u64,
    exec: Execution,
) -> Result<PermutationTest> {
    check_samples(a, b)?;
    let pooled: Vec<&[f64]> = a.iter().chain(b).map(|v| v.as_slice()).collect();
    let n = pooled.len();
    let labels = permutations + 1;
    let (wa, wb) = (1.0 / a.len() as f64, -1.0 / b.len() as f64);
    let mut base: Vec<f64> = (0..n).map(|i| if i < a.len() { wa } else { wb }).collect();
    // s[j * labels + p]: weight of point j under labelling p (p = 0 observed).
    let mut s = vec![0.0; n * labels];
    let mut r = rng::stream(seed, &[tag::PERMUTATION]);
    for p in 0..labels {
        if p > 0 {
            base.shuffle(&mut r);
        }
        for j in 0..n {
            s[j * labels + p] = base[j];
        }
    }
    let blocks = n.div_ceil(ROW_BLOCK);
    let partial = exec.map_range(blocks, |blk| {
        let mut acc = vec![0.0; labels];
        let mut row = vec![0.0; labels];
        for i in blk * ROW_BLOCK..((blk + 1) * ROW_BLOCK).min(n) {
            row.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..n {
                let d = dist(pooled[i], pooled[j]);
                let sj = &s[j * labels..(j + 1) * labels];
                for (rv, w) in row.iter_mut().zip(sj) {
                    *rv += d * w;
                }
            }
            let si = &s[i * labels..(i + 1) * labels];
            for ((av, rv), w) in acc.iter_mut().zip(&row).zip(si) {
                *av += rv * w;
            }
        }
        acc
    });
    let mut total = vec![0.0; labels];
    for acc in partial {
        total.iter_mut().zip(acc).for_each(|(t, v)| *t += v);
    }
    Ok(PermutationTest {
        observed: -total[0],
        null: total[1..].iter().map(|v| -v).collect(),
    })
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// First point whose value reaches `threshold`; returns its index.
pub fn first_crossing(values: &[f64], threshold: f64) -> Option<usize> {
    values.iter().position(|v| *v >= threshold)
}

/// Largest relative drop `(running_max - v) / running_max` over the points
/// with index `>= from`, the running maximum taken over the whole series.
pub fn max_drawdown_from(values: &[f64], from: usize) -> f64 {
    let mut running = f64::NEG_INFINITY;
    let mut worst: f64 = 0.0;
    for (k, v) in values.iter().enumerate() {
        running = running.max(*v);
        if k >= from && running > 0.0 {
            worst = worst.max((running - v) / running);
        }
    }
    worst
}
