//! Dynamic-group rollout allocation.
//!
//! Uncertainty scores are split into `K` equal-width bins over
//! `[min w, max w]`. Bin `k` covers `[q_{k-1}, q_k)`, the top bin is closed,
//! and a prompt in bin `b` receives `m = M_max - b + 1` rollouts. The score
//! being binned is the uncertainty weight `w(c)`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GroupAllocation {
    /// Rollout count per prompt id.
    pub entries: BTreeMap<usize, usize>,
    /// `K + 1` edges `q_0 ..= q_K`.
    pub bin_edges: Vec<f64>,
    /// 1-based bin per prompt id.
    pub bin_of: BTreeMap<usize, usize>,
}

impl GroupAllocation {
    pub fn total(&self) -> usize {
        self.entries.values().sum()
    }
}

/// `K + 1` uniform edges over `[lo, hi]`; the last edge is exactly `hi`.
pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut edges: Vec<f64> = (0..=bins).map(|k| lo + (hi - lo) * k as f64 / bins as f64).collect();
    edges[bins] = hi;
    edges
}

/// 1-based bin of `w` for the given edges.
pub fn bin_index(w: f64, edges: &[f64]) -> usize {
    let bins = edges.len() - 1;
    // Number of interior edges q_1..q_{K-1} that are <= w.
    let above = edges[1..bins].partition_point(|q| *q <= w);
    above + 1
}

/// Assign a rollout count to every prompt. With `invert` the mapping is
/// flipped so that the highest-uncertainty bin receives `M_max`.
pub fn allocate_rollouts(weights: &BTreeMap<usize, f64>, bins: usize, m_max: usize, invert: bool) -> Result<GroupAllocation> {
    if bins == 0 || m_max < bins {
        return Err(Error::InvalidArgument(format!(
            "allocation needs M_max >= K >= 1, got K = {bins}, M_max = {m_max}"
        )));
    }
    if weights.is_empty() {
        return Err(Error::InvalidArgument("allocation needs at least one prompt".into()));
    }
    if weights.values().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("uncertainty weight".into()));
    }
    let lo = weights.values().copied().fold(f64::INFINITY, f64::min);
    let hi = weights.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let edges = uniform_edges(lo, hi, bins);
    let mut entries = BTreeMap::new();
    let mut bin_of = BTreeMap::new();
    for (&id, &w) in weights {
        let b = if hi > lo { bin_index(w, &edges) } else { 1 };
        let rank = if invert { bins - b + 1 } else { b };
        bin_of.insert(id, b);
        entries.insert(id, m_max - rank + 1);
    }
    Ok(GroupAllocation {
        entries,
        bin_edges: edges,
        bin_of,
    })
}
