//! Artifact emission and aggregation: per-run evaluation CSVs, the summary
//! table with dataset and baseline rows, and a machine-readable plot
//! description. Emission is pure string building from parsed inputs, so
//! re-emitting the same runs yields byte-identical files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetStats;
use crate::envsim::EnvKind;
use crate::error::{Error, Result};
use crate::ilrewards::Algo;
use crate::math::{mean, std_dev};

use super::training::EvalPoint;

pub const EVAL_CSV_HEADER: &str = "step,seed,mean_return,std_return";

/// One run's evaluation series as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSeries {
    pub algo: Algo,
    pub env: EnvKind,
    pub seed: u64,
    pub evals: Vec<EvalPoint>,
}

/// Renders an evaluation series as CSV. Floats use shortest round-trip
/// formatting, so emission is deterministic and lossless.
pub fn eval_series_csv(seed: u64, evals: &[EvalPoint]) -> String {
    let mut s = String::from(EVAL_CSV_HEADER);
    s.push('\n');
    for e in evals {
        s.push_str(&format!("{},{},{},{}\n", e.step, seed, e.mean_return, e.std_return));
    }
    s
}

pub fn run_file_name(algo: Algo, env: EnvKind, seed: u64) -> String {
    format!("{}_{}_seed{}.csv", algo.name(), env.name(), seed)
}

/// Inverse of `run_file_name`; None for files that are not run series.
pub fn parse_run_file_name(name: &str) -> Option<(Algo, EnvKind, u64)> {
    let stem = name.strip_suffix(".csv")?;
    let (algo_name, rest) = stem.split_once('_')?;
    let (env_name, seed_part) = rest.split_once('_')?;
    let algo = Algo::parse(algo_name).ok()?;
    let env = EnvKind::parse(env_name)?;
    let seed = seed_part.strip_prefix("seed")?.parse().ok()?;
    Some((algo, env, seed))
}

/// Parses a run CSV back into a series, checking the header, the row
/// structure, and that every row carries the same seed.
pub fn parse_eval_series_csv(algo: Algo, env: EnvKind, text: &str) -> Result<RunSeries> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != EVAL_CSV_HEADER {
        return Err(Error::Format(format!(
            "bad evaluation CSV header: expected {EVAL_CSV_HEADER:?}, got {header:?}"
        )));
    }
    let mut seed: Option<u64> = None;
    let mut evals = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Format(format!("row {}: expected 4 fields", i + 2)));
        }
        let parse_f = |s: &str| {
            s.parse::<f64>().map_err(|_| Error::Format(format!("row {}: bad number {s:?}", i + 2)))
        };
        let step: u64 = fields[0]
            .parse()
            .map_err(|_| Error::Format(format!("row {}: bad step {:?}", i + 2, fields[0])))?;
        let row_seed: u64 = fields[1]
            .parse()
            .map_err(|_| Error::Format(format!("row {}: bad seed {:?}", i + 2, fields[1])))?;
        match seed {
            None => seed = Some(row_seed),
            Some(s) if s != row_seed => {
                return Err(Error::Format(format!("row {}: mixed seeds in one file", i + 2)))
            }
            _ => {}
        }
        evals.push(EvalPoint {
            step,
            mean_return: parse_f(fields[2])?,
            std_return: parse_f(fields[3])?,
        });
    }
    let seed =
        seed.ok_or_else(|| Error::Format("evaluation CSV contains no data rows".into()))?;
    Ok(RunSeries { algo, env, seed, evals })
}

/// Loads every run series in a directory, sorted by (environment, algorithm,
/// seed) so downstream emission does not depend on directory order.
pub fn collect_runs(dir: &Path) -> Result<Vec<RunSeries>> {
    let mut runs = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some((algo, env, _seed)) = parse_run_file_name(name) else { continue };
        let text = std::fs::read_to_string(entry.path())?;
        runs.push(parse_eval_series_csv(algo, env, &text)?);
    }
    runs.sort_by_key(|r| (r.env.name(), algo_order(r.algo), r.seed));
    Ok(runs)
}

fn algo_order(algo: Algo) -> usize {
    Algo::ALL.iter().position(|a| *a == algo).expect("ALL covers every algorithm")
}

/// One line of the summary table. `count` is the number of seeds behind an
/// algorithm row, or the number of trajectories behind the dataset row.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub env: EnvKind,
    pub label: String,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Aggregates final evaluation returns per (environment, algorithm) across
/// seeds, prepending a "dataset" row per environment when stats are given.
/// Rows are ordered environment-first, then dataset, then the fixed
/// algorithm order.
pub fn summarize_runs(
    runs: &[RunSeries],
    dataset: Option<(EnvKind, &DatasetStats)>,
) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for env in [EnvKind::PointMass, EnvKind::Pendulum] {
        if let Some((ds_env, stats)) = dataset {
            if ds_env == env {
                rows.push(SummaryRow {
                    env,
                    label: "dataset".into(),
                    mean: stats.mean_return,
                    std: stats.std_return,
                    count: stats.trajectories,
                });
            }
        }
        for algo in Algo::ALL {
            let finals: Vec<f64> = runs
                .iter()
                .filter(|r| r.env == env && r.algo == algo && !r.evals.is_empty())
                .map(|r| r.evals.last().expect("nonempty").mean_return)
                .collect();
            if finals.is_empty() {
                continue;
            }
            rows.push(SummaryRow {
                env,
                label: algo.name().into(),
                mean: mean(&finals),
                std: std_dev(&finals),
                count: finals.len(),
            });
        }
    }
    rows
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("environment,algorithm,mean_return,std_return,count\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{},{}\n", r.env.name(), r.label, r.mean, r.std, r.count));
    }
    s
}

/// Human-readable aligned rendering of the same rows.
pub fn summary_text(rows: &[SummaryRow]) -> String {
    let mut table = vec![[
        "environment".to_string(),
        "algorithm".to_string(),
        "return".to_string(),
        "count".to_string(),
    ]];
    for r in rows {
        table.push([
            r.env.name().to_string(),
            r.label.clone(),
            format!("{:.2} ± {:.2}", r.mean, r.std),
            r.count.to_string(),
        ]);
    }
    let mut widths = [0usize; 4];
    for row in &table {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut s = String::new();
    for row in &table {
        for (i, (w, cell)) in widths.iter().zip(row).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            s.push_str(cell);
            s.extend(std::iter::repeat(' ').take(w - cell.len()));
        }
        while s.ends_with(' ') {
            s.pop();
        }
        s.push('\n');
    }
    s
}

/// One plotted curve group: an (algorithm, environment) pair with per-seed
/// series and the across-seed mean on a shared step axis. Series are
/// truncated to their common prefix (an early-stopped seed shortens the
/// group), which must agree step-for-step.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PlotGroup {
    pub algo: String,
    pub env: String,
    pub seeds: Vec<u64>,
    pub steps: Vec<u64>,
    pub per_seed_mean: Vec<Vec<f64>>,
    pub mean_over_seeds: Vec<f64>,
    pub std_over_seeds: Vec<f64>,
}

/// Groups runs by (algorithm, environment) into plottable curves.
pub fn plot_groups(runs: &[RunSeries]) -> Result<Vec<PlotGroup>> {
    let mut groups: Vec<PlotGroup> = Vec::new();
    for env in [EnvKind::PointMass, EnvKind::Pendulum] {
        for algo in Algo::ALL {
            let members: Vec<&RunSeries> =
                runs.iter().filter(|r| r.env == env && r.algo == algo).collect();
            if members.is_empty() {
                continue;
            }
            let len = members.iter().map(|r| r.evals.len()).min().expect("nonempty");
            if len == 0 {
                return Err(Error::Format(format!(
                    "a {} run on {} has no evaluation points",
                    algo.name(),
                    env.name()
                )));
            }
            let steps: Vec<u64> = members[0].evals[..len].iter().map(|e| e.step).collect();
            for m in &members {
                let theirs: Vec<u64> = m.evals[..len].iter().map(|e| e.step).collect();
                if theirs != steps {
                    return Err(Error::Format(format!(
                        "{} on {}: seeds disagree on the evaluation schedule",
                        algo.name(),
                        env.name()
                    )));
                }
            }
            let per_seed_mean: Vec<Vec<f64>> = members
                .iter()
                .map(|m| m.evals[..len].iter().map(|e| e.mean_return).collect())
                .collect();
            let mut mean_over_seeds = Vec::with_capacity(len);
            let mut std_over_seeds = Vec::with_capacity(len);
            for p in 0..len {
                let col: Vec<f64> = per_seed_mean.iter().map(|s| s[p]).collect();
                mean_over_seeds.push(mean(&col));
                std_over_seeds.push(std_dev(&col));
            }
            groups.push(PlotGroup {
                algo: algo.name().into(),
                env: env.name().into(),
                seeds: members.iter().map(|m| m.seed).collect(),
                steps,
                per_seed_mean,
                mean_over_seeds,
                std_over_seeds,
            });
        }
    }
    Ok(groups)
}

pub fn plot_description_json(runs: &[RunSeries]) -> Result<String> {
    let groups = plot_groups(runs)?;
    Ok(serde_json::to_string_pretty(&groups)?)
}
