//! Experiment orchestration behind the command-line entry points: pretraining,
//! single runs, multi-seed comparisons and report regeneration.
//!
//! Layout under the resolved output directory:
//!
//! ```text
//! pretrain_loss.csv, pretrained.ckpt, config.cfg
//! <variant>/train_log.csv, tracker_log.csv, final.ckpt, summary.csv
//! compare/compare.csv, compare_summary.csv, <variant>.svg, compare.svg
//! compare/<variant>/seed-<s>/...
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{error, info, warn};

use crate::checkpoint;
use crate::config::{RunConfig, Variant};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::flow::{pretrain, SyntheticDataset};
use crate::plot::{line_chart, Series};
use crate::policy::VelocityNet;
use crate::rl::train::{train, TrackerLogRow, TrainLogRow, TrainOutcome};
use crate::sde::write_trajectory_csv;
use crate::stats::{first_crossing, max_drawdown_from, median};

/// Relative `output_dir` values are resolved against this directory when set.
pub const OUTPUT_ROOT_ENV: &str = "FLOWRL_OUTPUT_ROOT";

pub const PRETRAIN_CKPT: &str = "pretrained.ckpt";
pub const TRAIN_LOG: &str = "train_log.csv";
pub const TRACKER_LOG: &str = "tracker_log.csv";
pub const SUMMARY: &str = "summary.csv";

const TRAIN_HEADER: [&str; 9] = [
    "iteration",
    "variant",
    "total_rollouts_cum",
    "mean_reward",
    "eval_reward",
    "mean_abs_advantage",
    "mean_kl_to_ref",
    "entropy_proxy",
    "wallclock_s",
];
const SUMMARY_HEADER: [&str; 10] = [
    "variant",
    "seed",
    "baseline_eval",
    "final_eval",
    "reward_threshold",
    "iteration_to_threshold",
    "rollouts_to_threshold",
    "max_drawdown_limit",
    "max_late_drawdown",
    "stable",
];

pub fn resolve_output_dir(cfg: &RunConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if cfg.output_dir.is_relative() => PathBuf::from(root).join(&cfg.output_dir),
        _ => cfg.output_dir.clone(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub variant: String,
    pub seed: u64,
    pub baseline_eval: f64,
    pub final_eval: f64,
    pub reward_threshold: f64,
    pub iteration_to_threshold: Option<usize>,
    pub rollouts_to_threshold: Option<u64>,
    pub max_drawdown_limit: f64,
    /// Largest drop below the running maximum over the final third.
    pub max_late_drawdown: f64,
    pub stable: bool,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub checkpoint: PathBuf,
    pub logs: Vec<PathBuf>,
    pub summary: Option<RunSummary>,
}

/// Summary record derived from the train log alone.
pub fn summarize(rows: &[TrainLogRow], seed: u64, threshold: f64, drawdown_limit: f64) -> Result<RunSummary> {
    let evals: Vec<&TrainLogRow> = rows.iter().filter(|r| r.eval_reward.is_some()).collect();
    let first = evals.first().ok_or_else(|| Error::InvalidArgument("train log has no eval rows".into()))?;
    let last = evals.last().expect("non-empty");
    let values: Vec<f64> = evals.iter().map(|r| r.eval_reward.expect("eval row")).collect();
    let hit = first_crossing(&values, threshold);
    let n_iter = rows.iter().map(|r| r.iteration).max().unwrap_or(0);
    let late_from = evals.iter().position(|r| 3 * r.iteration >= 2 * n_iter).unwrap_or(values.len());
    let dd = max_drawdown_from(&values, late_from);
    Ok(RunSummary {
        variant: first.variant.name().to_string(),
        seed,
        baseline_eval: values[0],
        final_eval: last.eval_reward.expect("eval row"),
        reward_threshold: threshold,
        iteration_to_threshold: hit.map(|k| evals[k].iteration),
        rollouts_to_threshold: hit.map(|k| evals[k].total_rollouts_cum),
        max_drawdown_limit: drawdown_limit,
        max_late_drawdown: dd,
        stable: dd <= drawdown_limit,
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_train_log(path: &Path, rows: &[TrainLogRow]) -> Result<()> {
    write_rows(
        path,
        &TRAIN_HEADER,
        rows.iter().map(|r| {
            vec![
                r.iteration.to_string(),
                r.variant.name().to_string(),
                r.total_rollouts_cum.to_string(),
                opt(r.mean_reward),
                opt(r.eval_reward),
                opt(r.mean_abs_advantage),
                opt(r.mean_kl_to_ref),
                r.entropy_proxy.to_string(),
                r.wallclock_s.to_string(),
            ]
        }),
    )
}

pub fn write_tracker_log(path: &Path, rows: &[TrackerLogRow]) -> Result<()> {
    write_rows(
        path,
        &["iteration", "prompt_id", "v_hat", "alpha", "beta", "w", "bin", "m"],
        rows.iter().map(|r| {
            vec![
                r.iteration.to_string(),
                r.prompt_id.to_string(),
                r.v_hat.to_string(),
                r.alpha.to_string(),
                r.beta.to_string(),
                r.w.to_string(),
                r.bin.to_string(),
                r.m.to_string(),
            ]
        }),
    )
}

fn summary_record(s: &RunSummary) -> Vec<String> {
    vec![
        s.variant.clone(),
        s.seed.to_string(),
        s.baseline_eval.to_string(),
        s.final_eval.to_string(),
        s.reward_threshold.to_string(),
        opt(s.iteration_to_threshold),
        opt(s.rollouts_to_threshold),
        s.max_drawdown_limit.to_string(),
        s.max_late_drawdown.to_string(),
        s.stable.to_string(),
    ]
}

pub fn write_summary(path: &Path, s: &RunSummary) -> Result<()> {
    write_rows(path, &SUMMARY_HEADER, [summary_record(s)])
}

fn read_records(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let found = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(csv_err(path, format!("unexpected header {found:?}")));
    }
    r.records().map(|rec| rec.map_err(|e| csv_err(path, e))).collect()
}

fn field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, k: usize) -> Result<T> {
    rec[k]
        .parse()
        .map_err(|_| csv_err(path, format!("bad value {:?} in column {k}", &rec[k])))
}

fn opt_field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, k: usize) -> Result<Option<T>> {
    if rec[k].is_empty() {
        Ok(None)
    } else {
        field(path, rec, k).map(Some)
    }
}

pub fn read_train_log(path: &Path) -> Result<Vec<TrainLogRow>> {
    read_records(path, &TRAIN_HEADER)?
        .iter()
        .map(|rec| {
            Ok(TrainLogRow {
                iteration: field(path, rec, 0)?,
                variant: rec[1].parse()?,
                total_rollouts_cum: field(path, rec, 2)?,
                mean_reward: opt_field(path, rec, 3)?,
                eval_reward: opt_field(path, rec, 4)?,
                mean_abs_advantage: opt_field(path, rec, 5)?,
                mean_kl_to_ref: opt_field(path, rec, 6)?,
                entropy_proxy: field(path, rec, 7)?,
                wallclock_s: field(path, rec, 8)?,
            })
        })
        .collect()
}

pub fn read_summary(path: &Path) -> Result<RunSummary> {
    let recs = read_records(path, &SUMMARY_HEADER)?;
    let rec = recs.first().ok_or_else(|| csv_err(path, "empty summary"))?;
    Ok(RunSummary {
        variant: rec[0].to_string(),
        seed: field(path, rec, 1)?,
        baseline_eval: field(path, rec, 2)?,
        final_eval: field(path, rec, 3)?,
        reward_threshold: field(path, rec, 4)?,
        iteration_to_threshold: opt_field(path, rec, 5)?,
        rollouts_to_threshold: opt_field(path, rec, 6)?,
        max_drawdown_limit: field(path, rec, 7)?,
        max_late_drawdown: field(path, rec, 8)?,
        stable: field(path, rec, 9)?,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(text.as_bytes())?;
    f.flush()?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Config(format!("output directory {} is not writable: {e}", dir.display())))
}

/// Pretrain, writing `pretrain_loss.csv` and the checkpoint into `dir`.
pub fn pretrain_into(cfg: &RunConfig, dir: &Path) -> Result<(VelocityNet, RunArtifacts)> {
    create_dir(dir)?;
    let dataset = SyntheticDataset::from_spec(&cfg.dataset)?;
    let outcome = pretrain(&dataset, cfg)?;
    let loss_path = dir.join("pretrain_loss.csv");
    write_rows(
        &loss_path,
        &["step", "loss"],
        outcome.losses.iter().enumerate().map(|(k, l)| vec![k.to_string(), l.to_string()]),
    )?;
    let ckpt = dir.join(PRETRAIN_CKPT);
    checkpoint::save(&outcome.net, &ckpt)?;
    write_text(&dir.join("config.cfg"), &cfg.to_text())?;
    info!("pretrained checkpoint written to {}", ckpt.display());
    Ok((
        outcome.net,
        RunArtifacts {
            dir: dir.to_path_buf(),
            checkpoint: ckpt,
            logs: vec![loss_path],
            summary: None,
        },
    ))
}

pub fn cmd_pretrain(config_path: &Path) -> Result<RunArtifacts> {
    let cfg = RunConfig::load(config_path)?;
    pretrain_into(&cfg, &resolve_output_dir(&cfg)).map(|(_, a)| a)
}

/// One training run from `pretrained`, logging into `dir`.
pub fn train_into(cfg: &RunConfig, variant: Variant, pretrained: &VelocityNet, dir: &Path, exec: Execution) -> Result<RunArtifacts> {
    create_dir(dir)?;
    let outcome: TrainOutcome = train(cfg, variant, pretrained, exec)?;
    let mut logs = Vec::new();
    let train_path = dir.join(TRAIN_LOG);
    write_train_log(&train_path, &outcome.train_log)?;
    logs.push(train_path);
    let tracker_path = dir.join(TRACKER_LOG);
    if variant.uses_trackers() {
        write_tracker_log(&tracker_path, &outcome.tracker_log)?;
        logs.push(tracker_path);
    } else if tracker_path.exists() {
        fs::remove_file(&tracker_path)?;
    }
    if cfg.rl.dump_trajectories {
        let path = dir.join("trajectories.csv");
        let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
        let indexed: Vec<(usize, &crate::sde::Trajectory)> = outcome
            .last_batch
            .iter()
            .map(|t| {
                let k = seen.entry(t.prompt_id).or_default();
                *k += 1;
                (*k - 1, t)
            })
            .collect();
        let mut f = BufWriter::new(File::create(&path)?);
        write_trajectory_csv(&mut f, &indexed)?;
        f.flush()?;
        logs.push(path);
    }
    let ckpt = dir.join("final.ckpt");
    checkpoint::save(&outcome.net, &ckpt)?;
    let summary = summarize(&outcome.train_log, cfg.seed, cfg.rl.reward_threshold, cfg.rl.max_drawdown)?;
    write_summary(&dir.join(SUMMARY), &summary)?;
    write_text(&dir.join("config.cfg"), &cfg.to_text())?;
    Ok(RunArtifacts {
        dir: dir.to_path_buf(),
        checkpoint: ckpt,
        logs,
        summary: Some(summary),
    })
}

/// Train `variant` (default: the config's) from the pretrained checkpoint in
/// the output directory.
pub fn cmd_train(config_path: &Path, variant: Option<Variant>) -> Result<RunArtifacts> {
    let cfg = RunConfig::load(config_path)?;
    let variant = variant.unwrap_or(cfg.rl.variant);
    let root = resolve_output_dir(&cfg);
    let pretrained = checkpoint::load(&root.join(PRETRAIN_CKPT))?;
    train_into(&cfg, variant, &pretrained, &root.join(variant.name()), Execution::default())
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub variant: Variant,
    pub seed: u64,
    pub outcome: std::result::Result<RunSummary, String>,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub dir: PathBuf,
    pub cells: Vec<CellResult>,
}

fn load_or_pretrain(cfg: &RunConfig, root: &Path) -> Result<VelocityNet> {
    let ckpt = root.join(PRETRAIN_CKPT);
    if ckpt.exists() {
        info!("reusing pretrained checkpoint {}", ckpt.display());
        checkpoint::load(&ckpt)
    } else {
        pretrain_into(cfg, root).map(|(net, _)| net)
    }
}

/// Every `(variant, seed)` cell from one shared pretrained model. A failing
/// cell is recorded and the others still run.
pub fn compare_into(cfg: &RunConfig, variants: &[Variant], seeds: &[u64], root: &Path, exec: Execution) -> Result<CompareReport> {
    if variants.is_empty() || seeds.is_empty() {
        return Err(Error::Config("compare needs at least one variant and one seed".into()));
    }
    let pretrained = load_or_pretrain(cfg, root)?;
    let dir = root.join("compare");
    create_dir(&dir)?;
    let mut cells = Vec::new();
    for &variant in variants {
        for &seed in seeds {
            let mut cell_cfg = cfg.clone();
            cell_cfg.seed = seed;
            let cell_dir = dir.join(variant.name()).join(format!("seed-{seed}"));
            let outcome = train_into(&cell_cfg, variant, &pretrained, &cell_dir, exec)
                .map(|a| a.summary.expect("train_into always summarizes"))
                .map_err(|e| {
                    error!("cell {variant} seed {seed} failed: {e}");
                    e.to_string()
                });
            cells.push(CellResult { variant, seed, outcome });
        }
    }
    write_compare_outputs(&dir, &cells)?;
    Ok(CompareReport { dir, cells })
}

pub fn cmd_compare(config_path: &Path, variants: &[Variant], seeds: &[u64]) -> Result<CompareReport> {
    let cfg = RunConfig::load(config_path)?;
    compare_into(&cfg, variants, seeds, &resolve_output_dir(&cfg), Execution::default())
}

fn cell_log(dir: &Path, variant: Variant, seed: u64) -> Result<Vec<TrainLogRow>> {
    read_train_log(&dir.join(variant.name()).join(format!("seed-{seed}")).join(TRAIN_LOG))
}

/// Median eval curve over seeds: at each eval iteration shared by all seeds,
/// `(median cumulative rollouts, median eval reward)`.
pub fn median_curve(logs: &[Vec<TrainLogRow>]) -> Vec<(f64, f64)> {
    let Some(first) = logs.first() else {
        return Vec::new();
    };
    let mut curve = Vec::new();
    for row in first.iter().filter(|r| r.eval_reward.is_some()) {
        let at: Vec<&TrainLogRow> = logs
            .iter()
            .filter_map(|l| l.iter().find(|r| r.iteration == row.iteration && r.eval_reward.is_some()))
            .collect();
        if at.len() != logs.len() {
            continue;
        }
        let xs: Vec<f64> = at.iter().map(|r| r.total_rollouts_cum as f64).collect();
        let ys: Vec<f64> = at.iter().map(|r| r.eval_reward.expect("eval row")).collect();
        curve.push((median(&xs).expect("non-empty"), median(&ys).expect("non-empty")));
    }
    curve
}

fn write_compare_outputs(dir: &Path, cells: &[CellResult]) -> Result<()> {
    let mut rows = Vec::new();
    let mut per_variant: BTreeMap<Variant, Vec<Vec<TrainLogRow>>> = BTreeMap::new();
    for c in cells.iter().filter(|c| c.outcome.is_ok()) {
        let log = cell_log(dir, c.variant, c.seed)?;
        for r in &log {
            rows.push(vec![
                c.variant.name().to_string(),
                c.seed.to_string(),
                r.iteration.to_string(),
                r.total_rollouts_cum.to_string(),
                opt(r.eval_reward),
            ]);
        }
        per_variant.entry(c.variant).or_default().push(log);
    }
    // Row order: iteration-major so each iteration's cells are adjacent.
    rows.sort_by_key(|r| r[2].parse::<usize>().unwrap_or(0));
    write_rows(
        &dir.join("compare.csv"),
        &["variant", "seed", "iteration", "total_rollouts_cum", "eval_reward"],
        rows,
    )?;
    let summary_rows = cells.iter().map(|c| match &c.outcome {
        Ok(s) => {
            let mut r = summary_record(s);
            r.push("ok".into());
            r
        }
        Err(e) => {
            let mut r = vec![String::new(); SUMMARY_HEADER.len()];
            r[0] = c.variant.name().to_string();
            r[1] = c.seed.to_string();
            r.push(format!("failed: {e}"));
            r
        }
    });
    let mut header = SUMMARY_HEADER.to_vec();
    header.push("status");
    write_rows(&dir.join("compare_summary.csv"), &header, summary_rows)?;
    write_plots(dir, &per_variant)
}

fn write_plots(dir: &Path, per_variant: &BTreeMap<Variant, Vec<Vec<TrainLogRow>>>) -> Result<()> {
    let mut all = Vec::new();
    for (variant, logs) in per_variant {
        let series = Series {
            name: variant.name().to_string(),
            points: median_curve(logs),
        };
        let title = format!("{variant}: median eval reward over {} seeds", logs.len());
        write_text(
            &dir.join(format!("{}.svg", variant.name())),
            &line_chart(&title, "cumulative rollouts", "eval reward", std::slice::from_ref(&series)),
        )?;
        all.push(series);
    }
    write_text(
        &dir.join("compare.svg"),
        &line_chart("median eval reward", "cumulative rollouts", "eval reward", &all),
    )
}

#[derive(Debug, Clone)]
pub struct ReportEntry {
    pub run_dir: PathBuf,
    pub recomputed: RunSummary,
    /// `Some(true)` when a stored summary exists and agrees exactly.
    pub matches_stored: Option<bool>,
}

fn find_train_logs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_train_logs(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == TRAIN_LOG) {
            out.push(p);
        }
    }
    Ok(())
}

/// Recompute summaries of every run below `dir` from its `train_log.csv` and
/// check them against the stored `summary.csv`. Comparison outputs (CSV and
/// plots) are regenerated when `dir` holds a comparison.
pub fn report(dir: &Path) -> Result<Vec<ReportEntry>> {
    if !dir.is_dir() {
        return Err(Error::Config(format!("{} is not a directory", dir.display())));
    }
    let mut logs = Vec::new();
    find_train_logs(dir, &mut logs)?;
    let mut entries = Vec::new();
    for log_path in logs {
        let run_dir = log_path.parent().expect("file has a parent").to_path_buf();
        let rows = read_train_log(&log_path)?;
        let stored = run_dir.join(SUMMARY);
        let (seed, threshold, limit, stored_summary) = if stored.exists() {
            let s = read_summary(&stored)?;
            (s.seed, s.reward_threshold, s.max_drawdown_limit, Some(s))
        } else {
            let cfg_path = run_dir.join("config.cfg");
            let cfg = if cfg_path.exists() { RunConfig::load(&cfg_path)? } else { RunConfig::default() };
            (cfg.seed, cfg.rl.reward_threshold, cfg.rl.max_drawdown, None)
        };
        let recomputed = summarize(&rows, seed, threshold, limit)?;
        let matches_stored = stored_summary.map(|s| s == recomputed);
        if matches_stored == Some(false) {
            warn!("summary in {} disagrees with its train log", run_dir.display());
        }
        entries.push(ReportEntry {
            run_dir,
            recomputed,
            matches_stored,
        });
    }
    for cmp in [dir.to_path_buf(), dir.join("compare")] {
        let summary_path = cmp.join("compare_summary.csv");
        if summary_path.exists() {
            let mut per_variant: BTreeMap<Variant, Vec<Vec<TrainLogRow>>> = BTreeMap::new();
            for e in &entries {
                if e.run_dir.starts_with(&cmp) && e.run_dir.parent().and_then(|p| p.parent()) == Some(cmp.as_path()) {
                    let v: Variant = e.recomputed.variant.parse()?;
                    per_variant.entry(v).or_default().push(read_train_log(&e.run_dir.join(TRAIN_LOG))?);
                }
            }
            write_plots(&cmp, &per_variant)?;
        }
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(iteration: usize, cum: u64, eval: Option<f64>) -> TrainLogRow {
        TrainLogRow {
            iteration,
            variant: Variant::SuperFlow,
            total_rollouts_cum: cum,
            mean_reward: Some(0.5),
            eval_reward: eval,
            mean_abs_advantage: Some(0.1),
            mean_kl_to_ref: Some(0.0),
            entropy_proxy: 0.2,
            wallclock_s: 0.0,
        }
    }

    #[test]
    fn summary_from_rows() {
        let rows = vec![
            row(0, 0, Some(0.2)),
            row(1, 10, None),
            row(2, 20, Some(0.4)),
            row(3, 30, None),
            row(4, 40, Some(0.6)),
            row(5, 50, Some(0.45)),
            row(6, 60, Some(0.55)),
        ];
        let s = summarize(&rows, 3, 0.5, 0.2).unwrap();
        assert_eq!(s.iteration_to_threshold, Some(4));
        assert_eq!(s.rollouts_to_threshold, Some(40));
        assert_eq!(s.final_eval, 0.55);
        assert_eq!(s.baseline_eval, 0.2);
        // Final third: iterations 4..=6, running max 0.6, worst 0.45.
        assert!((s.max_late_drawdown - 0.25).abs() < 1e-12);
        assert!(!s.stable);
    }

    #[test]
    fn logs_round_trip_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![row(0, 0, Some(0.1 + 0.2)), row(1, 7, None)];
        let path = dir.path().join(TRAIN_LOG);
        write_train_log(&path, &rows).unwrap();
        assert_eq!(read_train_log(&path).unwrap(), rows);
        let s = summarize(&rows, 1, 0.9, 0.2).unwrap();
        write_summary(&dir.path().join(SUMMARY), &s).unwrap();
        assert_eq!(read_summary(&dir.path().join(SUMMARY)).unwrap(), s);
    }

    #[test]
    fn median_curve_uses_shared_eval_points() {
        let a = vec![row(0, 0, Some(0.1)), row(1, 10, Some(0.3))];
        let b = vec![row(0, 0, Some(0.3)), row(1, 30, Some(0.5))];
        let c = vec![row(0, 0, Some(0.2)), row(1, 20, None)];
        assert_eq!(median_curve(&[a.clone(), b.clone()]), vec![(0.0, 0.2), (20.0, 0.4)]);
        assert_eq!(median_curve(&[a, b, c]), vec![(0.0, 0.2)]);
    }
}
