//! Wall-clock and peak-memory profiling under one standardized comparison
//! configuration. Each measured run executes in a child process whose
//! resident-set high-water mark is sampled from /proc every 100 ms and
//! confirmed by the child's own final query of /proc/self/status, so cells
//! are isolated from each other and from the parent. On platforms without
//! /proc the memory column is reported as unavailable.

use std::io::Read;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ilrewards::{gmmil_rewards, Algo, KernelConfig};
use crate::math::{mean, std_dev, Mat};
use crate::rng::seed_rng;

use super::config::RunConfig;

/// The cross-algorithm comparison settings: rollout 2048, 10 PPO iterations,
/// 25 pretraining epochs, 5 adversarial epochs, replay multiplier 3.
pub fn standardized(mut cfg: RunConfig) -> RunConfig {
    cfg.rollout_length = 2048;
    cfg.ppo_iterations = 10;
    cfg.pretrain_epochs = 25;
    cfg.adversarial_epochs = 5;
    cfg.replay_multiplier = 3;
    cfg
}

/// Mean and population std of a sample.
pub fn summarize(xs: &[f64]) -> (f64, f64) {
    (mean(xs), std_dev(xs))
}

/// What a profiled child reports back on stdout, as one JSON line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChildReport {
    pub pretrain_seconds: Option<f64>,
    pub train_seconds: f64,
    /// The child's own final high-water query.
    pub peak_rss_bytes: Option<u64>,
}

impl ChildReport {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("plain struct serialises")
    }

    /// Parses the last non-empty stdout line as the report.
    pub fn from_output(out: &str) -> Result<ChildReport> {
        let line = out
            .lines()
            .rev()
            .find(|l| !l.trim().is_empty())
            .ok_or_else(|| Error::Format("profiled child produced no output".into()))?;
        Ok(serde_json::from_str(line)?)
    }
}

fn parse_vm_hwm(status_text: &str) -> Option<u64> {
    let line = status_text.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

/// Peak resident set of a live process, in bytes. None off-Linux or once the
/// process has exited.
pub fn read_vm_hwm(pid: u32) -> Option<u64> {
    let text = std::fs::read_to_string(format!("/proc/{pid}/status")).ok()?;
    parse_vm_hwm(&text)
}

/// Peak resident set of the calling process, in bytes.
pub fn read_vm_hwm_self() -> Option<u64> {
    let text = std::fs::read_to_string("/proc/self/status").ok()?;
    parse_vm_hwm(&text)
}

/// Spawns the command, samples its resident-set high-water mark every 100 ms
/// until exit, and returns (stdout, sampled peak). Stdout must stay under the
/// pipe buffer — profiled children print a single summary line.
pub fn run_profiled(cmd: &mut Command) -> Result<(String, Option<u64>)> {
    let mut child = cmd.stdout(Stdio::piped()).stderr(Stdio::inherit()).spawn()?;
    let pid = child.id();
    let mut peak: Option<u64> = read_vm_hwm(pid);
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if let Some(h) = read_vm_hwm(pid) {
            peak = Some(peak.map_or(h, |p| p.max(h)));
        }
        std::thread::sleep(Duration::from_millis(100));
    };
    let mut out = String::new();
    if let Some(mut stdout) = child.stdout.take() {
        stdout.read_to_string(&mut out)?;
    }
    if !status.success() {
        return Err(Error::Config(format!("profiled child exited with {status}")));
    }
    Ok((out, peak))
}

/// One row of the profile table: per-phase wall-clock (mean, std) over the
/// repeats and the largest observed peak memory. Phases an algorithm does
/// not have are None and render as "-".
#[derive(Clone, Debug)]
pub struct ProfileCell {
    pub algo: Algo,
    pub pretrain: Option<(f64, f64)>,
    pub train: Option<(f64, f64)>,
    pub peak_rss_bytes: Option<u64>,
}

/// Folds the per-repeat child reports of one algorithm into its table row.
pub fn aggregate_cell(
    algo: Algo,
    reports: &[ChildReport],
    sampled_peaks: &[Option<u64>],
) -> ProfileCell {
    assert!(!reports.is_empty());
    let pretimes: Vec<f64> = reports.iter().filter_map(|r| r.pretrain_seconds).collect();
    let pretrain =
        if pretimes.len() == reports.len() { Some(summarize(&pretimes)) } else { None };
    let train = if algo == Algo::Bc {
        None
    } else {
        let times: Vec<f64> = reports.iter().map(|r| r.train_seconds).collect();
        Some(summarize(&times))
    };
    let peak_rss_bytes = reports
        .iter()
        .map(|r| r.peak_rss_bytes)
        .chain(sampled_peaks.iter().copied())
        .flatten()
        .max();
    ProfileCell { algo, pretrain, train, peak_rss_bytes }
}

/// Renders the cells as an aligned text table, one row per algorithm:
/// pretraining and training as `mean ± std` seconds, peak memory in MB.
pub fn render_table(cells: &[ProfileCell]) -> String {
    fn phase(v: Option<(f64, f64)>) -> String {
        match v {
            Some((m, s)) => format!("{m:.2} ± {s:.2}"),
            None => "-".into(),
        }
    }
    let mut rows = vec![[
        "algorithm".to_string(),
        "pretraining_s".to_string(),
        "training_s".to_string(),
        "peak_memory_mb".to_string(),
    ]];
    for c in cells {
        let mem = match c.peak_rss_bytes {
            Some(b) => format!("{:.1}", b as f64 / (1024.0 * 1024.0)),
            None => "unavailable".into(),
        };
        rows.push([c.algo.name().to_string(), phase(c.pretrain), phase(c.train), mem]);
    }
    let mut widths = [0usize; 4];
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut s = String::new();
    for row in &rows {
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

/// Times the kernel reward for agent batches of n and 2n points against m
/// expert points (best of `reps` passes each). The per-batch cost is
/// O(M·N + N²), so doubling the batch should come in well above 1.7×.
pub fn gmmil_batch_scaling(m: usize, n: usize, dim: usize, reps: usize, seed: u64) -> (f64, f64) {
    assert!(reps > 0);
    use rand::Rng as _;
    let mut rng = seed_rng(seed);
    let mut fill = |rows: usize| {
        let mut mat = Mat::zeros(rows, dim);
        for v in mat.data_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        mat
    };
    let expert = fill(m);
    let small = fill(n);
    let big = fill(2 * n);
    let cfg = KernelConfig { sigma1: 2.0, sigma2: 1.0, self_similarity: true };
    let time_one = |agent: &Mat| {
        let mut best = f64::INFINITY;
        for _ in 0..reps {
            let t0 = Instant::now();
            let r = gmmil_rewards(agent, &expert, agent, &cfg);
            let dt = t0.elapsed().as_secs_f64();
            assert_eq!(r.len(), agent.rows());
            best = best.min(dt);
        }
        best
    };
    (time_one(&small), time_one(&big))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardized_pins_the_comparison_settings() {
        let mut base = RunConfig::default();
        base.rollout_length = 1024;
        base.ppo_iterations = 20;
        base.pretrain_epochs = 5;
        base.adversarial_epochs = 25;
        base.replay_multiplier = 1;
        let std = standardized(base);
        assert_eq!(std.rollout_length, 2048);
        assert_eq!(std.ppo_iterations, 10);
        assert_eq!(std.pretrain_epochs, 25);
        assert_eq!(std.adversarial_epochs, 5);
        assert_eq!(std.replay_multiplier, 3);
    }

    #[test]
    fn summarize_uses_population_std() {
        let (m, s) = summarize(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        // sqrt(((1-2)² + 0 + (3-2)²) / 3) = sqrt(2/3)
        assert!((s - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn vm_hwm_parses_and_reads_self() {
        let sample = "Name:\tx\nVmHWM:\t   5124 kB\nVmRSS:\t 300 kB\n";
        assert_eq!(parse_vm_hwm(sample), Some(5124 * 1024));
        assert_eq!(parse_vm_hwm("Name:\tx\n"), None);
        if cfg!(target_os = "linux") {
            assert!(read_vm_hwm_self().unwrap() > 0);
        }
    }

    #[test]
    fn child_report_round_trips_through_its_line() {
        let r = ChildReport {
            pretrain_seconds: Some(0.25),
            train_seconds: 1.5,
            peak_rss_bytes: Some(123456),
        };
        let parsed = ChildReport::from_output(&format!("noise\n{}\n", r.to_line())).unwrap();
        assert_eq!(parsed, r);
        assert!(ChildReport::from_output("").is_err());
    }

    #[test]
    fn run_profiled_collects_output_and_failure() {
        let (out, _peak) = run_profiled(Command::new("sh").args(["-c", "echo hi"])).unwrap();
        assert_eq!(out.trim(), "hi");
        assert!(run_profiled(Command::new("sh").args(["-c", "exit 3"])).is_err());
    }

    #[test]
    fn cells_render_with_dashes_for_missing_phases() {
        let cells = [
            ProfileCell {
                algo: Algo::Bc,
                pretrain: Some((0.414, 0.01)),
                train: None,
                peak_rss_bytes: Some(12 * 1024 * 1024),
            },
            ProfileCell {
                algo: Algo::Gail,
                pretrain: None,
                train: Some((3.2, 0.08)),
                peak_rss_bytes: None,
            },
        ];
        let table = render_table(&cells);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("bc"));
        assert!(lines[1].contains("0.41 ± 0.01"));
        assert!(lines[1].contains('-'));
        assert!(lines[1].contains("12.0"));
        assert!(lines[2].contains('-'));
        assert!(lines[2].contains("unavailable"));
    }

    #[test]
    fn aggregate_cell_merges_repeats() {
        let reports = [
            ChildReport {
                pretrain_seconds: Some(1.0),
                train_seconds: 2.0,
                peak_rss_bytes: Some(100),
            },
            ChildReport {
                pretrain_seconds: Some(3.0),
                train_seconds: 4.0,
                peak_rss_bytes: Some(50),
            },
        ];
        let cell = aggregate_cell(Algo::Red, &reports, &[Some(120), None]);
        assert_eq!(cell.pretrain.unwrap().0, 2.0);
        assert_eq!(cell.train.unwrap().0, 3.0);
        assert_eq!(cell.peak_rss_bytes, Some(120));
        // A missing pretraining phase in any repeat drops the column; BC
        // reports no training column at all.
        let mixed = [
            reports[0],
            ChildReport { pretrain_seconds: None, train_seconds: 1.0, peak_rss_bytes: None },
        ];
        let cell = aggregate_cell(Algo::Bc, &mixed, &[None, None]);
        assert!(cell.pretrain.is_none());
        assert!(cell.train.is_none());
        assert_eq!(cell.peak_rss_bytes, Some(100));
    }

    #[test]
    fn kernel_batch_cost_grows_superlinearly() {
        let (t1, t2) = gmmil_batch_scaling(100, 512, 4, 3, 7);
        assert!(t1 > 0.0 && t2 > 0.0);
        // Flop ratio is 2(M + 2N) / (M + N) ≈ 3.7 here; demand a loose 1.5.
        assert!(t2 / t1 >= 1.5, "ratio {} too small", t2 / t1);
    }
}
