#![allow(dead_code)]

use flowrl::flow::{pretrain, SyntheticDataset};
use flowrl::policy::VelocityNet;
use flowrl::RunConfig;

/// Default pool and model with a short schedule for pipeline tests.
pub fn small_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.pretrain.steps = 400;
    cfg.pretrain.warn_loss = 10.0;
    cfg.rl.iterations = 12;
    cfg.rl.batch_prompts = 4;
    cfg.rl.m_max = 6;
    cfg.rl.bins = 3;
    cfg.rl.group_size = 6;
    cfg.rl.eval_interval = 4;
    cfg.rl.eval_samples = 8;
    cfg
}

pub fn pretrained(cfg: &RunConfig) -> VelocityNet {
    let ds = SyntheticDataset::from_spec(&cfg.dataset).unwrap();
    pretrain(&ds, cfg).unwrap().net
}

/// Pretrained with the default 5000-step schedule.
pub fn fully_pretrained() -> VelocityNet {
    let cfg = RunConfig::default();
    pretrained(&cfg)
}
