//! Verifiable synthetic rewards in `[0, 1]`.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::policy::VelocityNet;
use crate::rng::{self, tag};
use crate::sde::{sde_sample, NoiseSchedule};

#[derive(Debug, Clone, PartialEq)]
pub enum RewardTask {
    /// Gaussian kernel around `target`: `exp(-|x - target|^2 / (2 bw^2))`.
    ModeTarget { target: Vec<f64>, bandwidth: f64 },
    /// Indicator of the closed ball `|x - center| <= radius`.
    Region { center: Vec<f64>, radius: f64 },
    /// Primary ball plus a secondary half-plane `normal · x >= offset`:
    /// 0 outside the ball, `partial` inside the ball only, 1 when both hold.
    Hierarchical {
        center: Vec<f64>,
        radius: f64,
        normal: Vec<f64>,
        offset: f64,
        partial: f64,
    },
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl RewardTask {
    pub fn dim(&self) -> usize {
        match self {
            RewardTask::ModeTarget { target, .. } => target.len(),
            RewardTask::Region { center, .. } | RewardTask::Hierarchical { center, .. } => center.len(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            RewardTask::ModeTarget { .. } => "mode_target",
            RewardTask::Region { .. } => "region",
            RewardTask::Hierarchical { .. } => "hierarchical",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RewardTask::ModeTarget { bandwidth, .. } if !(*bandwidth > 0.0) => {
                Err(Error::InvalidArgument(format!("bandwidth {bandwidth} must be positive")))
            }
            RewardTask::Region { radius, .. } if !(*radius > 0.0) => {
                Err(Error::InvalidArgument(format!("radius {radius} must be positive")))
            }
            RewardTask::Hierarchical {
                center,
                radius,
                normal,
                partial,
                ..
            } => {
                if !(*radius > 0.0) {
                    return Err(Error::InvalidArgument(format!("radius {radius} must be positive")));
                }
                if !(*partial > 0.0 && *partial < 1.0) {
                    return Err(Error::InvalidArgument(format!("partial credit {partial} must lie in (0, 1)")));
                }
                if normal.len() != center.len() {
                    return Err(Error::dim("half-plane normal", center.len(), normal.len()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

pub fn evaluate_reward(task: &RewardTask, x: &[f64]) -> Result<f64> {
    if x.len() != task.dim() {
        return Err(Error::dim("reward input", task.dim(), x.len()));
    }
    let r = match task {
        RewardTask::ModeTarget { target, bandwidth } => (-sq_dist(x, target) / (2.0 * bandwidth * bandwidth)).exp(),
        RewardTask::Region { center, radius } => {
            if sq_dist(x, center).sqrt() <= *radius {
                1.0
            } else {
                0.0
            }
        }
        RewardTask::Hierarchical {
            center,
            radius,
            normal,
            offset,
            partial,
        } => {
            if sq_dist(x, center).sqrt() > *radius {
                0.0
            } else if normal.iter().zip(x).map(|(n, v)| n * v).sum::<f64>() >= *offset {
                1.0
            } else {
                *partial
            }
        }
    };
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSpec {
    /// Unique id; also the row of the prompt's embedding.
    pub id: usize,
    pub label: String,
    pub task: RewardTask,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardStats {
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Monte-Carlo reward statistics under `n` fresh stochastic rollouts.
pub fn oracle_reward_stats(
    task: &RewardTask,
    net: &VelocityNet,
    cond: &[f64],
    schedule: &NoiseSchedule,
    steps: usize,
    n: usize,
    seed: u64,
    exec: Execution,
) -> Result<RewardStats> {
    if n < 100 {
        return Err(Error::InvalidArgument(format!("oracle needs n >= 100, got {n}")));
    }
    let grid = schedule.grid(steps)?;
    let rewards = exec
        .map_range(n, |i| {
            let mut r = rng::stream(seed, &[tag::ORACLE, i as u64]);
            let x = sde_sample(net, cond, &grid, &mut r)?;
            evaluate_reward(task, &x)
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let mean = rewards.iter().sum::<f64>() / n as f64;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n as f64;
    Ok(RewardStats {
        mean,
        std: var.sqrt(),
        stderr: (var / n as f64).sqrt(),
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn tasks() -> Vec<RewardTask> {
        vec![
            RewardTask::ModeTarget {
                target: vec![2.0, 0.0],
                bandwidth: 0.5,
            },
            RewardTask::Region {
                center: vec![0.0, 1.0],
                radius: 1.5,
            },
            RewardTask::Hierarchical {
                center: vec![0.0, 0.0],
                radius: 2.0,
                normal: vec![1.0, 0.0],
                offset: 0.0,
                partial: 0.5,
            },
        ]
    }

    #[test]
    fn direct_cases() {
        let t = &tasks();
        assert_eq!(evaluate_reward(&t[0], &[2.0, 0.0]).unwrap(), 1.0);
        // Closed ball: the boundary counts as inside.
        assert_eq!(evaluate_reward(&t[1], &[1.5, 1.0]).unwrap(), 1.0);
        assert_eq!(evaluate_reward(&t[1], &[1.5001, 1.0]).unwrap(), 0.0);
        assert_eq!(evaluate_reward(&t[2], &[-1.0, 0.0]).unwrap(), 0.5);
        assert_eq!(evaluate_reward(&t[2], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(evaluate_reward(&t[2], &[3.0, 0.0]).unwrap(), 0.0);
        assert!(evaluate_reward(&t[0], &[1.0]).is_err());
    }

    #[test]
    fn rewards_stay_in_unit_interval() {
        let mut r = rng::stream(1, &[]);
        for task in tasks() {
            for _ in 0..10_000 {
                let x = [r.random_range(-6.0..6.0), r.random_range(-6.0..6.0)];
                let v = evaluate_reward(&task, &x).unwrap();
                assert!((0.0..=1.0).contains(&v));
                if let RewardTask::Hierarchical { .. } = task {
                    assert!(v == 0.0 || v == 0.5 || v == 1.0);
                }
            }
        }
    }

    #[test]
    fn mode_reward_decreases_with_distance() {
        let t = &tasks()[0];
        let mut prev = 2.0;
        for k in 0..100 {
            let v = evaluate_reward(t, &[2.0 + 0.03 * k as f64, 0.0]).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn invalid_tasks() {
        assert!(RewardTask::ModeTarget {
            target: vec![0.0],
            bandwidth: 0.0
        }
        .validate()
        .is_err());
        assert!(RewardTask::Hierarchical {
            center: vec![0.0],
            radius: 1.0,
            normal: vec![1.0],
            offset: 0.0,
            partial: 1.0
        }
        .validate()
        .is_err());
    }
}
