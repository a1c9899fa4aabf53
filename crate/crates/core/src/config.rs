//! Run configuration and its plain-text file format.
//!
//! The file is a flat list of `[section]` headers followed by `key = value`
//! lines. `#` starts a comment. Lists are comma separated; lists of vectors
//! (mixture means) separate vectors with `;`. Every `[prompt]` header opens a
//! new prompt block.
//!
//! ```text
//! [run]
//! seed = 1
//! [dataset]
//! kind = ring
//! modes = 8
//! [prompt]
//! id = 0
//! kind = mode_target
//! target = 2, 0
//! bandwidth = 0.6
//! ```
//!
//! Only `[dataset]` is mandatory; omitted keys and sections take the defaults
//! of [`RunConfig::default`]. `[prompt]` blocks replace the default pool as a
//! whole.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::flow::MixtureComponent;
use crate::nn::Activation;
use crate::rewards::{PromptSpec, RewardTask};
use crate::rl::tracker::TrackerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    FlowGrpo,
    FlowSpo,
    SpoFr,
    SuperFlow,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::FlowGrpo, Variant::FlowSpo, Variant::SpoFr, Variant::SuperFlow];

    pub fn name(self) -> &'static str {
        match self {
            Variant::FlowGrpo => "flow_grpo",
            Variant::FlowSpo => "flow_spo",
            Variant::SpoFr => "spo_fr",
            Variant::SuperFlow => "superflow",
        }
    }

    /// Variants that keep per-prompt value trackers.
    pub fn uses_trackers(self) -> bool {
        !matches!(self, Variant::FlowGrpo)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}; expected one of flow_grpo, flow_spo, spo_fr, superflow")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalSampler {
    Ode,
    Sde,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub time_freqs: usize,
    pub emb_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    Ring { modes: usize, radius: f64, std: f64 },
    Mixture { components: Vec<MixtureComponent> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainConfig {
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub lr_final: f64,
    /// Smoothed final loss above this only logs a warning.
    pub warn_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlConfig {
    pub variant: Variant,
    pub iterations: usize,
    /// Prompts per iteration (B).
    pub batch_prompts: usize,
    pub m_max: usize,
    /// Number of uncertainty bins (K).
    pub bins: usize,
    /// Fixed group size for flow_grpo.
    pub group_size: usize,
    pub t_train: usize,
    pub t_eval: usize,
    /// Noise level `a` of `sigma_t = a sqrt(t / (1 - t))`.
    pub noise_level: f64,
    pub eta: f64,
    pub gamma: f64,
    pub eps_clip: f64,
    pub beta_kl: f64,
    pub lr: f64,
    /// Optimizer steps per collected batch.
    pub inner_updates: usize,
    /// Iterations between refreshes of the data-collection snapshot.
    pub update_interval: usize,
    pub invert_allocation: bool,
    pub per_group_centering: bool,
    /// Scale step advantages by `eta * sigma_t`. `None` means the variant's
    /// default (on for superflow only).
    pub step_reweight: Option<bool>,
    pub eval_interval: usize,
    pub eval_samples: usize,
    pub eval_sampler: EvalSampler,
    /// Eval reward used for the rollouts-to-threshold summary.
    pub reward_threshold: f64,
    /// Largest tolerated late-training drawdown for the stability flag.
    pub max_drawdown: f64,
    pub dump_trajectories: bool,
    pub log_wallclock: bool,
}

impl RlConfig {
    pub fn step_reweight_for(&self, variant: Variant) -> bool {
        self.step_reweight.unwrap_or(variant == Variant::SuperFlow)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub model: ModelConfig,
    pub dataset: DatasetSpec,
    pub pretrain: PretrainConfig,
    pub rl: RlConfig,
    pub tracker: TrackerConfig,
    pub prompts: Vec<PromptSpec>,
}

fn ring_point(k: usize, radius: f64) -> Vec<f64> {
    let a = 2.0 * PI * k as f64 / 8.0;
    vec![round12(radius * a.cos()), round12(radius * a.sin())]
}

/// Rounded so the default file stays readable; 1e-12 is far below anything
/// the tasks resolve.
fn round12(v: f64) -> f64 {
    let r = (v * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Sixteen prompts over the 8-mode ring of radius 2: single-mode targets,
/// three-mode regions, near-certain easy regions, off-support hard targets and
/// hierarchical tasks with partial credit.
pub fn default_prompts() -> Vec<PromptSpec> {
    let mut prompts = Vec::new();
    let mut push = |label: String, task: RewardTask| {
        let id = prompts.len();
        prompts.push(PromptSpec { id, label, task });
    };
    for k in 0..6 {
        push(
            format!("mode-{k}"),
            RewardTask::ModeTarget {
                target: ring_point(k, 2.0),
                bandwidth: 0.6,
            },
        );
    }
    for k in [2, 6, 7] {
        push(
            format!("arc-{k}"),
            RewardTask::Region {
                center: ring_point(k, 2.0),
                radius: 1.8,
            },
        );
    }
    push(
        "everywhere".into(),
        RewardTask::Region {
            center: vec![0.0, 0.0],
            radius: 3.0,
        },
    );
    push(
        "ring-band".into(),
        RewardTask::Region {
            center: vec![0.0, 0.0],
            radius: 2.2,
        },
    );
    push(
        "origin".into(),
        RewardTask::ModeTarget {
            target: vec![0.0, 0.0],
            bandwidth: 0.7,
        },
    );
    push(
        "far-corner".into(),
        RewardTask::ModeTarget {
            target: vec![3.2, -3.2],
            bandwidth: 0.7,
        },
    );
    for k in [0, 3, 5] {
        let a = 2.0 * PI * k as f64 / 8.0;
        push(
            format!("arc-{k}-left"),
            RewardTask::Hierarchical {
                center: ring_point(k, 1.8),
                radius: 1.8,
                normal: vec![round12(-a.sin()), round12(a.cos())],
                offset: 0.7,
                partial: 0.5,
            },
        );
    }
    prompts
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output_dir: PathBuf::from("runs/default"),
            model: ModelConfig {
                dim: 2,
                hidden: vec![64, 64],
                activation: Activation::Tanh,
                time_freqs: 3,
                emb_dim: 8,
            },
            dataset: DatasetSpec::Ring {
                modes: 8,
                radius: 2.0,
                std: 0.1,
            },
            pretrain: PretrainConfig {
                steps: 5000,
                batch: 128,
                lr: 2e-3,
                lr_final: 2e-4,
                warn_loss: 4.0,
            },
            rl: RlConfig {
                variant: Variant::SuperFlow,
                iterations: 300,
                batch_prompts: 8,
                m_max: 24,
                bins: 4,
                group_size: 24,
                t_train: 10,
                t_eval: 40,
                noise_level: 0.7,
                eta: 1.0,
                gamma: 1.0,
                eps_clip: 0.2,
                beta_kl: 0.04,
                lr: 1e-3,
                inner_updates: 1,
                update_interval: 1,
                invert_allocation: false,
                per_group_centering: false,
                step_reweight: None,
                eval_interval: 10,
                eval_samples: 64,
                eval_sampler: EvalSampler::Ode,
                reward_threshold: 0.5,
                max_drawdown: 0.2,
                dump_trajectories: false,
                log_wallclock: false,
            },
            tracker: TrackerConfig::default(),
            prompts: default_prompts(),
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing

struct Entry {
    key: String,
    value: String,
    line: usize,
    used: bool,
}

struct Section {
    name: String,
    line: usize,
    entries: Vec<Entry>,
}

impl Section {
    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        let Some(e) = self.entries.iter_mut().find(|e| e.key == key) else {
            return Ok(None);
        };
        e.used = true;
        e.value.parse::<T>().map(Some).map_err(|_| Error::ConfigLine {
            line: e.line,
            msg: format!("[{}] {key}: cannot parse {:?}", self.name, e.value),
        })
    }

    fn set<T: FromStr>(&mut self, key: &str, slot: &mut T) -> Result<()> {
        if let Some(v) = self.take(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn raw(&mut self, key: &str) -> Option<(String, usize)> {
        let e = self.entries.iter_mut().find(|e| e.key == key)?;
        e.used = true;
        Some((e.value.clone(), e.line))
    }

    fn require_raw(&mut self, key: &str) -> Result<(String, usize)> {
        self.raw(key).ok_or_else(|| Error::ConfigLine {
            line: self.line,
            msg: format!("[{}] is missing required key `{key}`", self.name),
        })
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        let Some((value, line)) = self.raw(key) else {
            return Ok(None);
        };
        parse_list(&value).map(Some).map_err(|_| Error::ConfigLine {
            line,
            msg: format!("[{}] {key}: cannot parse list {value:?}", self.name),
        })
    }

    fn require_list<T: FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        let (value, line) = self.require_raw(key)?;
        parse_list(&value).map_err(|_| Error::ConfigLine {
            line,
            msg: format!("[{}] {key}: cannot parse list {value:?}", self.name),
        })
    }

    fn require<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let (value, line) = self.require_raw(key)?;
        value.parse().map_err(|_| Error::ConfigLine {
            line,
            msg: format!("[{}] {key}: cannot parse {value:?}", self.name),
        })
    }

    fn finish(&self) -> Result<()> {
        match self.entries.iter().find(|e| !e.used) {
            Some(e) => Err(Error::ConfigLine {
                line: e.line,
                msg: format!("unknown key `{}` in [{}]", e.key, self.name),
            }),
            None => Ok(()),
        }
    }
}

fn parse_list<T: FromStr>(value: &str) -> std::result::Result<Vec<T>, ()> {
    value
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| ()))
        .collect()
}

fn split_sections(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or_default().trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::ConfigLine {
                line,
                msg: format!("malformed section header {content:?}"),
            })?;
            let name = name.trim().to_string();
            if name.is_empty() {
                return Err(Error::ConfigLine {
                    line,
                    msg: "empty section name".into(),
                });
            }
            sections.push(Section {
                name,
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::ConfigLine {
            line,
            msg: format!("expected `key = value`, got {content:?}"),
        })?;
        let section = sections.last_mut().ok_or_else(|| Error::ConfigLine {
            line,
            msg: "key outside of any section".into(),
        })?;
        let key = key.trim().to_string();
        if section.entries.iter().any(|e| e.key == key) {
            return Err(Error::ConfigLine {
                line,
                msg: format!("duplicate key `{key}` in [{}]", section.name),
            });
        }
        section.entries.push(Entry {
            key,
            value: value.trim().to_string(),
            line,
            used: false,
        });
    }
    Ok(sections)
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

fn bool_key(sec: &mut Section, key: &str, slot: &mut bool) -> Result<()> {
    if let Some((v, line)) = sec.raw(key) {
        *slot = parse_bool(&v).ok_or_else(|| Error::ConfigLine {
            line,
            msg: format!("[{}] {key}: expected true or false, got {v:?}", sec.name),
        })?;
    }
    Ok(())
}

fn parse_dataset(sec: &mut Section) -> Result<DatasetSpec> {
    let (kind, line) = sec.require_raw("kind")?;
    match kind.as_str() {
        "ring" => {
            let mut modes = 8usize;
            let mut radius = 2.0f64;
            let mut std = 0.1f64;
            sec.set("modes", &mut modes)?;
            sec.set("radius", &mut radius)?;
            sec.set("std", &mut std)?;
            Ok(DatasetSpec::Ring { modes, radius, std })
        }
        "mixture" => {
            let (means, mline) = sec.require_raw("means")?;
            let means: Vec<Vec<f64>> = means
                .split(';')
                .map(parse_list::<f64>)
                .collect::<std::result::Result<_, ()>>()
                .map_err(|_| Error::ConfigLine {
                    line: mline,
                    msg: format!("[dataset] means: cannot parse {means:?}"),
                })?;
            let stds: Vec<f64> = sec.require_list("stds")?;
            let weights: Vec<f64> = sec.require_list("weights")?;
            if stds.len() != means.len() || weights.len() != means.len() {
                return Err(Error::ConfigLine {
                    line: mline,
                    msg: "[dataset] means, stds and weights must have equal lengths".into(),
                });
            }
            let components = means
                .into_iter()
                .zip(stds)
                .zip(weights)
                .map(|((mean, std), weight)| MixtureComponent { mean, std, weight })
                .collect();
            Ok(DatasetSpec::Mixture { components })
        }
        other => Err(Error::ConfigLine {
            line,
            msg: format!("[dataset] kind: unknown dataset kind {other:?} (ring or mixture)"),
        }),
    }
}

fn parse_prompt(sec: &mut Section) -> Result<PromptSpec> {
    let id: usize = sec.require("id")?;
    let label = sec.raw("label").map(|(v, _)| v).unwrap_or_else(|| format!("prompt-{id}"));
    let (kind, line) = sec.require_raw("kind")?;
    let task = match kind.as_str() {
        "mode_target" => RewardTask::ModeTarget {
            target: sec.require_list("target")?,
            bandwidth: sec.require("bandwidth")?,
        },
        "region" => RewardTask::Region {
            center: sec.require_list("center")?,
            radius: sec.require("radius")?,
        },
        "hierarchical" => RewardTask::Hierarchical {
            center: sec.require_list("center")?,
            radius: sec.require("radius")?,
            normal: sec.require_list("normal")?,
            offset: sec.require("offset")?,
            partial: sec.require("partial")?,
        },
        other => {
            return Err(Error::ConfigLine {
                line,
                msg: format!("[prompt] kind: unknown task kind {other:?}"),
            })
        }
    };
    task.validate().map_err(|e| Error::ConfigLine {
        line: sec.line,
        msg: format!("prompt {id}: {e}"),
    })?;
    Ok(PromptSpec { id, label, task })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut sections = split_sections(text)?;
        let mut seen = BTreeSet::new();
        let mut prompts = Vec::new();
        let mut saw_dataset = false;
        for sec in &mut sections {
            if sec.name != "prompt" && !seen.insert(sec.name.clone()) {
                return Err(Error::ConfigLine {
                    line: sec.line,
                    msg: format!("duplicate section [{}]", sec.name),
                });
            }
            match sec.name.as_str() {
                "run" => {
                    sec.set("seed", &mut cfg.seed)?;
                    if let Some((v, _)) = sec.raw("output_dir") {
                        cfg.output_dir = PathBuf::from(v);
                    }
                }
                "model" => {
                    let m = &mut cfg.model;
                    sec.set("dim", &mut m.dim)?;
                    if let Some(h) = sec.list("hidden")? {
                        m.hidden = h;
                    }
                    if let Some((v, line)) = sec.raw("activation") {
                        m.activation = Activation::parse(&v).ok_or_else(|| Error::ConfigLine {
                            line,
                            msg: format!("[model] activation: expected tanh or relu, got {v:?}"),
                        })?;
                    }
                    sec.set("time_freqs", &mut m.time_freqs)?;
                    sec.set("emb_dim", &mut m.emb_dim)?;
                }
                "dataset" => {
                    saw_dataset = true;
                    cfg.dataset = parse_dataset(sec)?;
                }
                "pretrain" => {
                    let p = &mut cfg.pretrain;
                    sec.set("steps", &mut p.steps)?;
                    sec.set("batch", &mut p.batch)?;
                    sec.set("lr", &mut p.lr)?;
                    sec.set("lr_final", &mut p.lr_final)?;
                    sec.set("warn_loss", &mut p.warn_loss)?;
                }
                "rl" => {
                    let r = &mut cfg.rl;
                    if let Some((v, line)) = sec.raw("variant") {
                        r.variant = v.parse().map_err(|e: Error| Error::ConfigLine {
                            line,
                            msg: e.to_string(),
                        })?;
                    }
                    sec.set("iterations", &mut r.iterations)?;
                    sec.set("batch_prompts", &mut r.batch_prompts)?;
                    sec.set("m_max", &mut r.m_max)?;
                    sec.set("bins", &mut r.bins)?;
                    sec.set("group_size", &mut r.group_size)?;
                    sec.set("t_train", &mut r.t_train)?;
                    sec.set("t_eval", &mut r.t_eval)?;
                    sec.set("noise_level", &mut r.noise_level)?;
                    sec.set("eta", &mut r.eta)?;
                    sec.set("gamma", &mut r.gamma)?;
                    sec.set("eps_clip", &mut r.eps_clip)?;
                    sec.set("beta_kl", &mut r.beta_kl)?;
                    sec.set("lr", &mut r.lr)?;
                    sec.set("inner_updates", &mut r.inner_updates)?;
                    sec.set("update_interval", &mut r.update_interval)?;
                    bool_key(sec, "invert_allocation", &mut r.invert_allocation)?;
                    bool_key(sec, "per_group_centering", &mut r.per_group_centering)?;
                    if let Some((v, line)) = sec.raw("step_reweight") {
                        r.step_reweight = match v.as_str() {
                            "auto" => None,
                            other => Some(parse_bool(other).ok_or_else(|| Error::ConfigLine {
                                line,
                                msg: format!("[rl] step_reweight: expected auto, true or false, got {v:?}"),
                            })?),
                        };
                    }
                    sec.set("eval_interval", &mut r.eval_interval)?;
                    sec.set("eval_samples", &mut r.eval_samples)?;
                    if let Some((v, line)) = sec.raw("eval_sampler") {
                        r.eval_sampler = match v.as_str() {
                            "ode" => EvalSampler::Ode,
                            "sde" => EvalSampler::Sde,
                            _ => {
                                return Err(Error::ConfigLine {
                                    line,
                                    msg: format!("[rl] eval_sampler: expected ode or sde, got {v:?}"),
                                })
                            }
                        };
                    }
                    sec.set("reward_threshold", &mut r.reward_threshold)?;
                    sec.set("max_drawdown", &mut r.max_drawdown)?;
                    bool_key(sec, "dump_trajectories", &mut r.dump_trajectories)?;
                    bool_key(sec, "log_wallclock", &mut r.log_wallclock)?;
                }
                "tracker" => {
                    let t = &mut cfg.tracker;
                    sec.set("rho_min", &mut t.rho_min)?;
                    sec.set("rho_max", &mut t.rho_max)?;
                    sec.set("d_half", &mut t.d_half)?;
                    sec.set("n0", &mut t.n0)?;
                    sec.set("epsilon_w", &mut t.epsilon_w)?;
                }
                "prompt" => prompts.push(parse_prompt(sec)?),
                other => {
                    return Err(Error::ConfigLine {
                        line: sec.line,
                        msg: format!("unknown section [{other}]"),
                    })
                }
            }
            sec.finish()?;
        }
        if !saw_dataset {
            return Err(Error::Config("missing required section [dataset] (field `dataset`)".into()));
        }
        if !prompts.is_empty() {
            prompts.sort_by_key(|p| p.id);
            cfg.prompts = prompts;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let r = &self.rl;
        if r.m_max < r.bins || r.bins == 0 {
            return bad(format!("need M_max >= K >= 1, got m_max = {}, bins = {}", r.m_max, r.bins));
        }
        if r.t_train == 0 || r.t_eval == 0 {
            return bad("t_train and t_eval must be >= 1".into());
        }
        if r.batch_prompts == 0 || r.eval_interval == 0 || r.eval_samples == 0 || r.update_interval == 0 {
            return bad("batch_prompts, eval_interval, eval_samples and update_interval must be positive".into());
        }
        if r.group_size < 2 {
            return bad("group_size must be at least 2".into());
        }
        if !(r.noise_level >= 0.0) || !(r.eta > 0.0) || !(0.0..=1.0).contains(&r.gamma) || !(r.eps_clip > 0.0) || !(r.beta_kl >= 0.0) || !(r.lr > 0.0) {
            return bad("noise_level >= 0, eta > 0, gamma in [0, 1], eps_clip > 0, beta_kl >= 0 and lr > 0 are required".into());
        }
        if self.pretrain.batch == 0 || !(self.pretrain.lr > 0.0) {
            return bad("pretrain batch and lr must be positive".into());
        }
        let m = &self.model;
        if m.dim == 0 || m.emb_dim == 0 || m.hidden.contains(&0) {
            return bad("model dimensions must be positive".into());
        }
        let data_dim = match &self.dataset {
            DatasetSpec::Ring { .. } => 2,
            DatasetSpec::Mixture { components } => components.first().map(|c| c.mean.len()).unwrap_or(0),
        };
        if data_dim != m.dim {
            return bad(format!("dataset dimension {data_dim} differs from model dim {}", m.dim));
        }
        self.tracker.validate().map_err(|e| Error::Config(e.to_string()))?;
        for (k, p) in self.prompts.iter().enumerate() {
            if p.id != k {
                return bad(format!("prompt ids must be unique and cover 0..{}", self.prompts.len()));
            }
            if p.task.dim() != m.dim {
                return bad(format!("prompt {} has dimension {}, model has {}", p.id, p.task.dim(), m.dim));
            }
        }
        Ok(())
    }

    /// Canonical text form; `parse(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        fn list<T: std::fmt::Display>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
        }
        let mut s = String::new();
        let w = &mut s;
        let _ = writeln!(w, "[run]\nseed = {}\noutput_dir = {}\n", self.seed, self.output_dir.display());
        let m = &self.model;
        let _ = writeln!(
            w,
            "[model]\ndim = {}\nhidden = {}\nactivation = {}\ntime_freqs = {}\nemb_dim = {}\n",
            m.dim,
            list(&m.hidden),
            m.activation.name(),
            m.time_freqs,
            m.emb_dim
        );
        match &self.dataset {
            DatasetSpec::Ring { modes, radius, std } => {
                let _ = writeln!(w, "[dataset]\nkind = ring\nmodes = {modes}\nradius = {radius}\nstd = {std}\n");
            }
            DatasetSpec::Mixture { components } => {
                let means: Vec<String> = components.iter().map(|c| list(&c.mean)).collect();
                let stds: Vec<f64> = components.iter().map(|c| c.std).collect();
                let weights: Vec<f64> = components.iter().map(|c| c.weight).collect();
                let _ = writeln!(
                    w,
                    "[dataset]\nkind = mixture\nmeans = {}\nstds = {}\nweights = {}\n",
                    means.join("; "),
                    list(&stds),
                    list(&weights)
                );
            }
        }
        let p = &self.pretrain;
        let _ = writeln!(
            w,
            "[pretrain]\nsteps = {}\nbatch = {}\nlr = {}\nlr_final = {}\nwarn_loss = {}\n",
            p.steps, p.batch, p.lr, p.lr_final, p.warn_loss
        );
        let r = &self.rl;
        let reweight = match r.step_reweight {
            None => "auto".to_string(),
            Some(b) => b.to_string(),
        };
        let sampler = match r.eval_sampler {
            EvalSampler::Ode => "ode",
            EvalSampler::Sde => "sde",
        };
        let _ = writeln!(
            w,
            "[rl]\nvariant = {}\niterations = {}\nbatch_prompts = {}\nm_max = {}\nbins = {}\ngroup_size = {}\n\
             t_train = {}\nt_eval = {}\nnoise_level = {}\neta = {}\ngamma = {}\neps_clip = {}\nbeta_kl = {}\n\
             lr = {}\ninner_updates = {}\nupdate_interval = {}\ninvert_allocation = {}\nper_group_centering = {}\n\
             step_reweight = {}\neval_interval = {}\neval_samples = {}\neval_sampler = {}\nreward_threshold = {}\n\
             max_drawdown = {}\ndump_trajectories = {}\nlog_wallclock = {}\n",
            r.variant,
            r.iterations,
            r.batch_prompts,
            r.m_max,
            r.bins,
            r.group_size,
            r.t_train,
            r.t_eval,
            r.noise_level,
            r.eta,
            r.gamma,
            r.eps_clip,
            r.beta_kl,
            r.lr,
            r.inner_updates,
            r.update_interval,
            r.invert_allocation,
            r.per_group_centering,
            reweight,
            r.eval_interval,
            r.eval_samples,
            sampler,
            r.reward_threshold,
            r.max_drawdown,
            r.dump_trajectories,
            r.log_wallclock
        );
        let t = &self.tracker;
        let _ = writeln!(
            w,
            "[tracker]\nrho_min = {}\nrho_max = {}\nd_half = {}\nn0 = {}\nepsilon_w = {}\n",
            t.rho_min, t.rho_max, t.d_half, t.n0, t.epsilon_w
        );
        for p in &self.prompts {
            let _ = writeln!(w, "[prompt]\nid = {}\nlabel = {}\nkind = {}", p.id, p.label, p.task.kind_name());
            match &p.task {
                RewardTask::ModeTarget { target, bandwidth } => {
                    let _ = writeln!(w, "target = {}\nbandwidth = {bandwidth}", list(target));
                }
                RewardTask::Region { center, radius } => {
                    let _ = writeln!(w, "center = {}\nradius = {radius}", list(center));
                }
                RewardTask::Hierarchical {
                    center,
                    radius,
                    normal,
                    offset,
                    partial,
                } => {
                    let _ = writeln!(
                        w,
                        "center = {}\nradius = {radius}\nnormal = {}\noffset = {offset}\npartial = {partial}",
                        list(center),
                        list(normal)
                    );
                }
            }
            let _ = writeln!(w);
        }
        s
    }
}
