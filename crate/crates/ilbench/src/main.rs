//! Command-line front end: expert generation, training, evaluation,
//! hyperparameter search, profiling, and report emission. Exit codes: 0 on
//! success, 1 for configuration/data problems, 2 for numerical failures.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use clap::{Args, Parser, Subcommand};

use ilbench::approx::GaussianPolicy;
use ilbench::dataset;
use ilbench::envsim::EnvKind;
use ilbench::error::{Error, Result};
use ilbench::harness::config::RunConfig;
use ilbench::harness::profile::{
    aggregate_cell, gmmil_batch_scaling, read_vm_hwm_self, render_table, run_profiled,
    standardized, ChildReport, ProfileCell,
};
use ilbench::harness::report::{
    collect_runs, eval_series_csv, plot_description_json, run_file_name, summarize_runs,
    summary_csv, summary_text,
};
use ilbench::harness::search::hyperparameter_search;
use ilbench::harness::training::{evaluate, generate_expert, run_training};
use ilbench::ilrewards::Algo;

#[derive(Parser)]
#[command(
    name = "ilbench",
    about = "Imitation-learning benchmark: seven reward constructions under one PPO trainer"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Config-file plus flag overrides shared by the run-like subcommands. Flags
/// win over the file, which wins over the built-in defaults.
#[derive(Args, Debug, Default)]
struct Overrides {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    env: Option<String>,
    /// Expert demonstration file (.ilds).
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    subsample: Option<u32>,
    #[arg(long)]
    eval_interval: Option<u64>,
    #[arg(long)]
    eval_episodes: Option<usize>,
    #[arg(long)]
    hidden_layers: Option<usize>,
    #[arg(long)]
    hidden_size: Option<usize>,
    #[arg(long)]
    agent_lr: Option<f64>,
    #[arg(long)]
    imitation_lr: Option<f64>,
    #[arg(long)]
    rollout_length: Option<usize>,
    #[arg(long)]
    ppo_iterations: Option<usize>,
    #[arg(long)]
    entropy_coef: Option<f64>,
    #[arg(long)]
    pretrain_epochs: Option<usize>,
    #[arg(long)]
    adversarial_epochs: Option<usize>,
    #[arg(long)]
    replay_multiplier: Option<usize>,
    #[arg(long)]
    r1_coef: Option<f64>,
    /// Kernel reward variant: "on" subtracts agent self-similarity, "off"
    /// scores against expert points only.
    #[arg(long)]
    gmmil_self_similarity: Option<String>,
    #[arg(long)]
    dril_quantile: Option<f64>,
    #[arg(long)]
    dril_dropout: Option<f64>,
    #[arg(long)]
    dril_ensemble: Option<usize>,
    #[arg(long)]
    red_output_dim: Option<usize>,
    /// Stop training once an evaluation reaches this mean return.
    #[arg(long)]
    early_stop_return: Option<f64>,
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)?;
            cfg.apply_config_text(&text)?;
        }
        macro_rules! flag {
            ($field:ident, $key:literal) => {
                if let Some(v) = &self.$field {
                    cfg.set($key, &v.to_string())?;
                }
            };
        }
        flag!(algo, "algo");
        flag!(env, "env");
        if let Some(p) = &self.dataset {
            cfg.dataset = Some(p.clone());
        }
        flag!(steps, "steps");
        flag!(seed, "seed");
        flag!(subsample, "subsample");
        flag!(eval_interval, "eval_interval");
        flag!(eval_episodes, "eval_episodes");
        flag!(hidden_layers, "hidden_layers");
        flag!(hidden_size, "hidden_size");
        flag!(agent_lr, "agent_lr");
        flag!(imitation_lr, "imitation_lr");
        flag!(rollout_length, "rollout_length");
        flag!(ppo_iterations, "ppo_iterations");
        flag!(entropy_coef, "entropy_coef");
        flag!(pretrain_epochs, "pretrain_epochs");
        flag!(adversarial_epochs, "adversarial_epochs");
        flag!(replay_multiplier, "replay_multiplier");
        flag!(r1_coef, "r1_coef");
        flag!(gmmil_self_similarity, "gmmil_self_similarity");
        flag!(dril_quantile, "dril_quantile");
        flag!(dril_dropout, "dril_dropout");
        flag!(dril_ensemble, "dril_ensemble");
        flag!(red_output_dim, "red_output_dim");
        flag!(early_stop_return, "early_stop_return");
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Train PPO on the true reward, snapshot it at medium quality, and
    /// record a dense demonstration dataset from the snapshot.
    GenerateExpert {
        #[command(flatten)]
        overrides: Overrides,
        /// Episodes to record from the snapshot policy.
        #[arg(long, default_value_t = 25)]
        episodes: usize,
        /// Snapshot at the first evaluation reaching this fraction of the
        /// final return.
        #[arg(long, default_value_t = 0.75)]
        snapshot_ratio: f64,
        /// Output directory.
        #[arg(long, default_value = "runs/expert")]
        out: PathBuf,
    },
    /// Train one algorithm against a demonstration dataset (or PPO against
    /// the true reward) and write its evaluation series.
    Train {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Evaluate a saved policy deterministically on the true reward.
    Evaluate {
        /// Policy JSON written by train or generate-expert.
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value = "pointmass")]
        env: String,
        #[arg(long, default_value_t = 50)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Low-discrepancy hyperparameter search with a fixed trial budget.
    Search {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value_t = 20)]
        budget: usize,
        #[arg(long, default_value = "runs/search")]
        out: PathBuf,
    },
    /// Time each algorithm's phases and measure peak memory under the
    /// standardized comparison configuration.
    Profile {
        #[command(flatten)]
        overrides: Overrides,
        /// Comma-separated algorithms (default: all).
        #[arg(long)]
        algos: Option<String>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value = "runs/profile")]
        out: PathBuf,
    },
    /// Internal: one profiled run, reporting phase times and peak memory as
    /// a JSON line on stdout.
    #[command(hide = true)]
    ProfileChild {
        #[arg(long)]
        config: PathBuf,
    },
    /// Aggregate run CSVs into summary tables and a plot description.
    Report {
        /// Directory containing per-run evaluation CSVs.
        #[arg(long, default_value = "runs")]
        runs: PathBuf,
        /// Dataset whose statistics become the summary's "dataset" row.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Output directory (defaults to the runs directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_env(name: &str) -> Result<EnvKind> {
    EnvKind::parse(name)
        .ok_or_else(|| Error::Config(format!("unknown environment {name:?} (pointmass, pendulum)")))
}

fn load_policy(path: &Path) -> Result<GaussianPolicy> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn save_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    Ok(std::fs::write(path, serde_json::to_string(value)?)?)
}

fn cmd_generate_expert(
    overrides: &Overrides,
    episodes: usize,
    snapshot_ratio: f64,
    out: &Path,
) -> Result<()> {
    let cfg = overrides.resolve()?;
    std::fs::create_dir_all(out)?;
    let expert = generate_expert(&cfg, episodes, snapshot_ratio)?;
    let data_path = out.join(format!("{}.ilds", cfg.env.name()));
    dataset::save(&expert.dataset, &data_path)?;
    save_json(&out.join(format!("expert_policy_{}.json", cfg.env.name())), &expert.policy)?;
    std::fs::write(
        out.join(run_file_name(Algo::Ppo, cfg.env, cfg.seed)),
        eval_series_csv(cfg.seed, &expert.evals),
    )?;
    let stats = expert.dataset.stats()?;
    println!(
        "expert on {}: snapshot at step {} (return {:.2}, final {:.2})",
        cfg.env.name(),
        expert.snapshot_step,
        expert.snapshot_return,
        expert.final_return
    );
    println!(
        "dataset: {} transitions in {} episodes, return {:.2} ± {:.2} -> {}",
        stats.transitions,
        stats.trajectories,
        stats.mean_return,
        stats.std_return,
        data_path.display()
    );
    Ok(())
}

fn cmd_train(overrides: &Overrides, out: &Path) -> Result<()> {
    let cfg = overrides.resolve()?;
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let outcome = run_training(&cfg)?;
    let csv_path = out.join(run_file_name(cfg.algo, cfg.env, cfg.seed));
    std::fs::write(&csv_path, eval_series_csv(cfg.seed, &outcome.evals))?;
    save_json(
        &out.join(format!("policy_{}_{}_seed{}.json", cfg.algo.name(), cfg.env.name(), cfg.seed)),
        &outcome.policy,
    )?;
    std::fs::write(
        out.join(format!("config_{}_{}_seed{}.txt", cfg.algo.name(), cfg.env.name(), cfg.seed)),
        cfg.to_config_string(),
    )?;
    let last = outcome.evals.last();
    println!(
        "{} on {}: {} env steps, final return {} -> {}",
        cfg.algo.name(),
        cfg.env.name(),
        outcome.env_steps,
        last.map_or("n/a".into(), |e| format!("{:.2} ± {:.2}", e.mean_return, e.std_return)),
        csv_path.display()
    );
    Ok(())
}

fn cmd_evaluate(policy: &Path, env: &str, episodes: usize, seed: u64) -> Result<()> {
    let env = parse_env(env)?;
    let policy = load_policy(policy)?;
    let es = evaluate(&policy, env, episodes, seed);
    println!(
        "return over {} deterministic episodes (seed {}): {:.4} ± {:.4}",
        es.episodes, seed, es.mean, es.std
    );
    Ok(())
}

fn cmd_search(overrides: &Overrides, budget: usize, out: &Path) -> Result<()> {
    let base = overrides.resolve()?;
    std::fs::create_dir_all(out)?;
    let outcome = hyperparameter_search(&base, budget)?;

    // One row per trial: the sampled settings and the objective. Wall-clock
    // lives in the in-memory records only, keeping these files reproducible.
    let mut trials = String::from(
        "trial,agent_lr,imitation_lr,rollout_length,ppo_iterations,entropy_coef,\
         pretrain_epochs,adversarial_epochs,replay_multiplier,r1_coef,\
         gmmil_self_similarity,objective\n",
    );
    let mut evals = String::from("trial,ordinal,mean_return\n");
    for t in &outcome.trials {
        let c = &t.config;
        let objective = t.objective.map_or("incomplete".into(), |o| o.to_string());
        trials.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            t.index,
            c.agent_lr,
            c.imitation_lr,
            c.rollout_length,
            c.ppo_iterations,
            c.entropy_coef,
            c.pretrain_epochs,
            c.adversarial_epochs,
            c.replay_multiplier,
            c.r1_coef,
            if c.gmmil_self_similarity { "on" } else { "off" },
            objective
        ));
        for (i, m) in t.eval_means.iter().enumerate() {
            evals.push_str(&format!("{},{},{}\n", t.index, i, m));
        }
    }
    std::fs::write(out.join("search_trials.csv"), trials)?;
    std::fs::write(out.join("search_evals.csv"), evals)?;
    let best = &outcome.trials[outcome.best];
    std::fs::write(out.join("best_config.txt"), best.config.to_config_string())?;
    println!(
        "{} trials; best is trial {} with objective {:.4}",
        outcome.trials.len(),
        best.index,
        best.objective.expect("winner has an objective")
    );
    Ok(())
}

fn profile_algo_list(arg: Option<&str>) -> Result<Vec<Algo>> {
    match arg {
        None => Ok(Algo::ALL.to_vec()),
        Some(list) => list.split(',').map(|s| Algo::parse(s.trim())).collect(),
    }
}

fn cmd_profile(
    overrides: &Overrides,
    algos: Option<&str>,
    repeats: usize,
    out: &Path,
) -> Result<()> {
    if repeats == 0 {
        return Err(Error::Config("profiling needs at least one repeat".into()));
    }
    let base = standardized(overrides.resolve()?);
    let algos = profile_algo_list(algos)?;
    std::fs::create_dir_all(out)?;
    let exe = std::env::current_exe()?;

    let mut cells: Vec<ProfileCell> = Vec::new();
    for algo in algos {
        let mut cfg = base.clone();
        cfg.algo = algo;
        if algo == Algo::Ppo {
            cfg.dataset = None;
        }
        cfg.validate()?;
        let cfg_path = out.join(format!("profile_config_{}.txt", algo.name()));
        std::fs::write(&cfg_path, cfg.to_config_string())?;
        let mut reports = Vec::with_capacity(repeats);
        let mut peaks = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let (stdout, peak) = run_profiled(
                Command::new(&exe).arg("profile-child").arg("--config").arg(&cfg_path),
            )?;
            reports.push(ChildReport::from_output(&stdout)?);
            peaks.push(peak);
        }
        cells.push(aggregate_cell(algo, &reports, &peaks));
    }

    let mut table = render_table(&cells);
    // The complexity probe behind the kernel method's cost column: reward
    // time for one batch against double the batch, best-of-3 each.
    let (t1, t2) = gmmil_batch_scaling(250, base.rollout_length, 6, 3, base.seed);
    table.push_str(&format!(
        "\nkernel reward batch scaling: {} -> {} points takes {:.2}x\n",
        base.rollout_length,
        2 * base.rollout_length,
        t2 / t1
    ));
    std::fs::write(out.join("profile.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn cmd_profile_child(config: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config)?;
    let cfg = RunConfig::from_config_text(&text)?;
    let outcome = run_training(&cfg)?;
    let report = ChildReport {
        pretrain_seconds: outcome.pretrain_seconds,
        train_seconds: outcome.train_seconds,
        peak_rss_bytes: read_vm_hwm_self(),
    };
    println!("{}", report.to_line());
    Ok(())
}

fn cmd_report(runs: &Path, dataset: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let series = collect_runs(runs)?;
    if series.is_empty() {
        return Err(Error::Config(format!(
            "no run CSVs found in {} (expected <algo>_<env>_seed<k>.csv)",
            runs.display()
        )));
    }
    let ds = match dataset {
        Some(p) => {
            let d = dataset::load(p)?;
            let env = parse_env(&d.env_name)?;
            Some((env, d.stats()?))
        }
        None => None,
    };
    let rows = summarize_runs(&series, ds.as_ref().map(|(e, s)| (*e, s)));
    let out = out.unwrap_or(runs);
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("summary.csv"), summary_csv(&rows))?;
    let text = summary_text(&rows);
    std::fs::write(out.join("summary.txt"), &text)?;
    std::fs::write(out.join("plots.json"), plot_description_json(&series)?)?;
    print!("{text}");
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::GenerateExpert { overrides, episodes, snapshot_ratio, out } => {
            cmd_generate_expert(overrides, *episodes, *snapshot_ratio, out)
        }
        Cmd::Train { overrides, out } => cmd_train(overrides, out),
        Cmd::Evaluate { policy, env, episodes, seed } => {
            cmd_evaluate(policy, env, *episodes, *seed)
        }
        Cmd::Search { overrides, budget, out } => cmd_search(overrides, *budget, out),
        Cmd::Profile { overrides, algos, repeats, out } => {
            cmd_profile(overrides, algos.as_deref(), *repeats, out)
        }
        Cmd::ProfileChild { config } => cmd_profile_child(config),
        Cmd::Report { runs, dataset, out } => cmd_report(runs, dataset.as_deref(), out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
