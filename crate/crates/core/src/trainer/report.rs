use std::path::{Path, PathBuf};

use super::{run_training, RunConfig, TrainError};
use crate::agents::AgentKind;

pub const CSV_HEADER: [&str; 8] = [
    "epoch",
    "episodes_seen",
    "s_train",
    "s_test",
    "delta_s",
    "mean_q",
    "policy_entropy",
    "wall_s",
];

#[derive(Clone, Debug, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    /// Training episodes collected so far, this epoch included.
    pub episodes_seen: usize,
    pub s_train: f64,
    pub s_test: f64,
    pub delta_s: f64,
    /// Mean over the epoch's updates of the batch-mean critic value.
    pub mean_q: f64,
    /// Mean over the epoch's updates of `-mean log π`; zero for DDPG.
    pub policy_entropy: f64,
    pub wall_s: f64,
}

/// `|s_train - s_test|`; both rates must lie in `[0, 1]`.
pub fn delta_s(s_train: f64, s_test: f64) -> Result<f64, TrainError> {
    for (name, v) in [("s_train", s_train), ("s_test", s_test)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(TrainError::Numerical(format!("{name} = {v} is outside [0, 1]")));
        }
    }
    Ok((s_train - s_test).abs())
}

pub fn write_progress_csv(path: &Path, reports: &[EpochReport]) -> Result<(), TrainError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in reports {
        w.write_record([
            r.epoch.to_string(),
            r.episodes_seen.to_string(),
            r.s_train.to_string(),
            r.s_test.to_string(),
            r.delta_s.to_string(),
            r.mean_q.to_string(),
            r.policy_entropy.to_string(),
            r.wall_s.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_progress_csv(path: &Path) -> Result<Vec<EpochReport>, TrainError> {
    let mut rd = csv::Reader::from_path(path)?;
    if rd.headers()?.iter().ne(CSV_HEADER) {
        return Err(TrainError::Io(format!("{}: unexpected header", path.display())));
    }
    let bad = |e: &dyn std::fmt::Display| TrainError::Io(format!("{}: {e}", path.display()));
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let f = |i: usize| rec[i].parse::<f64>().map_err(|e| bad(&e));
        let u = |i: usize| rec[i].parse::<usize>().map_err(|e| bad(&e));
        out.push(EpochReport {
            epoch: u(0)?,
            episodes_seen: u(1)?,
            s_train: f(2)?,
            s_test: f(3)?,
            delta_s: f(4)?,
            mean_q: f(5)?,
            policy_entropy: f(6)?,
            wall_s: f(7)?,
        });
    }
    Ok(out)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Cross-seed statistics for one epoch. Standard deviations are population
/// values, so a single seed gives zero spread.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochAggregate {
    pub epoch: usize,
    pub s_test_mean: f64,
    pub s_test_std: f64,
    pub s_train_mean: f64,
    pub s_train_std: f64,
    pub delta_s_mean: f64,
}

pub(crate) fn aggregate_epochs(per_seed: &[&[EpochReport]]) -> Vec<EpochAggregate> {
    let epochs = per_seed.iter().map(|r| r.len()).min().unwrap_or(0);
    (0..epochs)
        .map(|e| {
            let col = |f: fn(&EpochReport) -> f64| per_seed.iter().map(|r| f(&r[e])).collect::<Vec<_>>();
            let (s_test_mean, s_test_std) = mean_std(&col(|r| r.s_test));
            let (s_train_mean, s_train_std) = mean_std(&col(|r| r.s_train));
            EpochAggregate {
                epoch: e,
                s_test_mean,
                s_test_std,
                s_train_mean,
                s_train_std,
                delta_s_mean: mean_std(&col(|r| r.delta_s)).0,
            }
        })
        .collect()
}

const AGGREGATE_HEADER: [&str; 6] = ["epoch", "s_test_mean", "s_test_std", "s_train_mean", "s_train_std", "delta_s_mean"];

fn aggregate_fields(a: &EpochAggregate) -> [String; 6] {
    [
        a.epoch.to_string(),
        a.s_test_mean.to_string(),
        a.s_test_std.to_string(),
        a.s_train_mean.to_string(),
        a.s_train_std.to_string(),
        a.delta_s_mean.to_string(),
    ]
}

pub(crate) fn write_summary_csv(path: &Path, rows: &[EpochAggregate]) -> Result<(), TrainError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(AGGREGATE_HEADER)?;
    for a in rows {
        w.write_record(aggregate_fields(a))?;
    }
    w.flush()?;
    Ok(())
}

/// Methods as rows, environments as columns, three decimals.
pub fn format_delta_s_table(title: &str, envs: &[String], rows: &[(String, Vec<f64>)]) -> String {
    let first = rows.iter().map(|r| r.0.len()).chain(["Method".len()]).max().unwrap();
    let widths: Vec<usize> = envs.iter().map(|e| e.len().max(5)).collect();
    let mut out = format!("{title}\n{:<first$}", "Method");
    for (e, w) in envs.iter().zip(&widths) {
        out.push_str(&format!("  {e:>w$}"));
    }
    out.push('\n');
    for (method, values) in rows {
        out.push_str(&format!("{method:<first$}"));
        for (v, w) in values.iter().zip(&widths) {
            out.push_str(&format!("  {v:>w$.3}"));
        }
        out.push('\n');
    }
    out
}

fn final_s_test(runs: &[super::SeedRun]) -> Vec<f64> {
    runs.iter().filter_map(|r| r.reports.last().map(|e| e.s_test)).collect()
}

fn all_delta_s(runs: &[super::SeedRun]) -> Vec<f64> {
    runs.iter().flat_map(|r| r.reports.iter().map(|e| e.delta_s)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaSummary {
    pub alpha: f64,
    pub dir: PathBuf,
    /// Cross-seed mean and spread of the last epoch's `S_test`.
    pub final_s_test_mean: f64,
    pub final_s_test_std: f64,
    /// Mean `δS` over every epoch of every seed.
    pub mean_delta_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaSweep {
    pub summaries: Vec<AlphaSummary>,
    /// Set when two or more temperatures were run and every final `S_test`
    /// lies within `REVIEW_BAND` of every other.
    pub flagged: bool,
}

impl AlphaSweep {
    pub const REVIEW_BAND: f64 = 0.02;
}

/// Runs `cfg` once per temperature under `out/alpha_<α>/`, then writes
/// `alpha_comparison.csv`. A flagged sweep also writes `alpha_review.txt`.
pub fn sweep_alpha(cfg: &RunConfig, alphas: &[f64]) -> Result<AlphaSweep, TrainError> {
    if alphas.is_empty() {
        return Err(TrainError::Config("alpha list is empty".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(TrainError::Config(format!("alpha {a} must be positive")));
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut summaries = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let dir = cfg.out_dir.join(format!("alpha_{alpha}"));
        let sub = RunConfig {
            alpha,
            out_dir: dir.clone(),
            ..cfg.clone()
        };
        let runs = run_training(&sub)?;
        let (final_s_test_mean, final_s_test_std) = mean_std(&final_s_test(&runs));
        summaries.push(AlphaSummary {
            alpha,
            dir,
            final_s_test_mean,
            final_s_test_std,
            mean_delta_s: mean_std(&all_delta_s(&runs)).0,
        });
    }
    let finals: Vec<f64> = summaries.iter().map(|s| s.final_s_test_mean).collect();
    let spread = finals.iter().copied().fold(f64::NEG_INFINITY, f64::max) - finals.iter().copied().fold(f64::INFINITY, f64::min);
    let flagged = summaries.len() > 1 && spread <= AlphaSweep::REVIEW_BAND;

    let mut w = csv::Writer::from_path(cfg.out_dir.join("alpha_comparison.csv"))?;
    w.write_record(["alpha", "final_s_test_mean", "final_s_test_std", "mean_delta_s"])?;
    for s in &summaries {
        w.write_record([
            s.alpha.to_string(),
            s.final_s_test_mean.to_string(),
            s.final_s_test_std.to_string(),
            s.mean_delta_s.to_string(),
        ])?;
    }
    w.flush()?;
    if flagged {
        log::warn!("final S_test spread {spread:.4} across temperatures is within {}", AlphaSweep::REVIEW_BAND);
        std::fs::write(
            cfg.out_dir.join("alpha_review.txt"),
            format!("final S_test values {finals:?} span {spread}, within {}; review this sweep\n", AlphaSweep::REVIEW_BAND),
        )?;
    }
    Ok(AlphaSweep { summaries, flagged })
}

pub fn method_label(kind: AgentKind) -> &'static str {
    match kind {
        AgentKind::Sher => "SHER",
        AgentKind::HerDdpg => "HER",
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentComparison {
    pub kind: AgentKind,
    pub epochs: Vec<EpochAggregate>,
    /// Every per-epoch `δS` of every seed, seed-major.
    pub delta_s: Vec<f64>,
    pub mean_delta_s: f64,
    pub median_delta_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub agents: Vec<AgentComparison>,
    /// Mean `δS` table in the methods-by-environment layout.
    pub table: String,
}

/// Runs both agent kinds with `cfg`'s seeds and environment under
/// `out/<agent>/`, then writes `comparison.csv` (one row per agent per
/// epoch) and `delta_s_table.txt`.
pub fn compare_agents(cfg: &RunConfig) -> Result<Comparison, TrainError> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut agents = Vec::new();
    for kind in [AgentKind::HerDdpg, AgentKind::Sher] {
        let sub = RunConfig {
            agent: kind,
            out_dir: cfg.out_dir.join(kind.as_str()),
            ..cfg.clone()
        };
        let runs = run_training(&sub)?;
        let per_seed: Vec<&[EpochReport]> = runs.iter().map(|r| r.reports.as_slice()).collect();
        let ds = all_delta_s(&runs);
        agents.push(AgentComparison {
            kind,
            epochs: aggregate_epochs(&per_seed),
            mean_delta_s: if ds.is_empty() { 0.0 } else { mean_std(&ds).0 },
            median_delta_s: median(&ds).unwrap_or(0.0),
            delta_s: ds,
        });
    }

    let mut w = csv::Writer::from_path(cfg.out_dir.join("comparison.csv"))?;
    let mut header = vec!["agent"];
    header.extend(AGGREGATE_HEADER);
    w.write_record(&header)?;
    for e in 0..cfg.epochs {
        for a in &agents {
            if let Some(row) = a.epochs.get(e) {
                let mut rec = vec![a.kind.as_str().to_string()];
                rec.extend(aggregate_fields(row));
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;

    let rows: Vec<(String, Vec<f64>)> =
        agents.iter().map(|a| (method_label(a.kind).to_string(), vec![a.mean_delta_s])).collect();
    let table = format_delta_s_table("Mean δS values", &[cfg.env.to_string()], &rows);
    std::fs::write(cfg.out_dir.join("delta_s_table.txt"), &table)?;
    Ok(Comparison { agents, table })
}
