//! Run configuration: one flat `key = value` file covering every tunable in
//! the suite. The same struct backs the CLI flags, the config file, and the
//! hyperparameter search; `to_config_string` emits all keys in a fixed order
//! so persisted configs are byte-deterministic.

use std::path::PathBuf;

use crate::envsim::EnvKind;
use crate::error::{Error, Result};
use crate::ilrewards::Algo;

/// Default number of evaluation points when `eval_interval` is left at 0.
pub const EVAL_POINTS: u64 = 20;

/// Search bounds shared by the agent and imitation learning rates.
pub const LR_LOW: f64 = 3e-5;
pub const LR_HIGH: f64 = 3e-4;
/// Choice sets searched over; fixed-value hyperparameters are plain defaults.
pub const ROLLOUT_CHOICES: [usize; 3] = [1024, 2048, 4096];
pub const ITERATION_CHOICES: [usize; 3] = [5, 10, 20];
pub const ENTROPY_CHOICES: [f64; 3] = [0.0, 1e-3, 1e-2];
pub const EPOCH_CHOICES: [usize; 3] = [5, 15, 25];
pub const REPLAY_CHOICES: [usize; 3] = [1, 3, 5];
pub const R1_CHOICES: [f64; 3] = [0.1, 0.5, 1.0];

/// Everything a run needs. Defaults are the desk-scale working set: network
/// width 64 instead of the reference 256 and 3×10⁵ steps instead of 2×10⁶,
/// with all optimisation constants at their reference values.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub algo: Algo,
    pub env: EnvKind,
    pub dataset: Option<PathBuf>,
    pub steps: u64,
    pub seed: u64,
    /// 0 means "steps / 20".
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub hidden_layers: usize,
    pub hidden_size: usize,
    pub init_log_std: f64,
    pub subsample: u32,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub agent_lr: f64,
    pub rollout_length: usize,
    pub max_grad_norm: f64,
    pub clip_ratio: f64,
    pub ppo_iterations: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub pretrain_epochs: usize,
    pub imitation_lr: f64,
    pub adversarial_epochs: usize,
    pub replay_multiplier: usize,
    pub r1_coef: f64,
    pub reward_cap: f64,
    pub gmmil_self_similarity: bool,
    pub dril_quantile: f64,
    pub dril_dropout: f64,
    pub dril_ensemble: usize,
    pub red_output_dim: usize,
    /// Stop training once an evaluation's mean return reaches this value.
    pub early_stop_return: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            algo: Algo::Ppo,
            env: EnvKind::PointMass,
            dataset: None,
            steps: 300_000,
            seed: 0,
            eval_interval: 0,
            eval_episodes: 50,
            hidden_layers: 2,
            hidden_size: 64,
            init_log_std: -2.0,
            subsample: 20,
            gamma: 0.99,
            gae_lambda: 0.9,
            agent_lr: 3e-4,
            rollout_length: 2048,
            max_grad_norm: 0.5,
            clip_ratio: 0.25,
            ppo_iterations: 10,
            value_coef: 0.5,
            entropy_coef: 1e-3,
            pretrain_epochs: 25,
            imitation_lr: 3e-4,
            adversarial_epochs: 5,
            replay_multiplier: 3,
            r1_coef: 0.5,
            reward_cap: 10.0,
            gmmil_self_similarity: true,
            dril_quantile: 0.98,
            dril_dropout: 0.1,
            dril_ensemble: 8,
            red_output_dim: 32,
            early_stop_return: None,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| Error::Config(format!("{key}: expected a number, got {v:?}")))
}

fn parse_int<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse::<T>()
        .map_err(|_| Error::Config(format!("{key}: expected an integer, got {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected on/off, got {v:?}"))),
    }
}

fn fmt_bool(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

impl RunConfig {
    /// Applies one `key = value` assignment. Used by both the config-file
    /// parser and the CLI flag overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "algo" => self.algo = Algo::parse(value)?,
            "env" => {
                self.env = EnvKind::parse(value).ok_or_else(|| {
                    Error::Config(format!("unknown environment {value:?} (pointmass, pendulum)"))
                })?
            }
            "dataset" => {
                self.dataset =
                    if value == "none" { None } else { Some(PathBuf::from(value)) }
            }
            "steps" => self.steps = parse_int(key, value)?,
            "seed" => self.seed = parse_int(key, value)?,
            "eval_interval" => self.eval_interval = parse_int(key, value)?,
            "eval_episodes" => self.eval_episodes = parse_int(key, value)?,
            "hidden_layers" => self.hidden_layers = parse_int(key, value)?,
            "hidden_size" => self.hidden_size = parse_int(key, value)?,
            "init_log_std" => self.init_log_std = parse_f64(key, value)?,
            "subsample" => self.subsample = parse_int(key, value)?,
            "gamma" => self.gamma = parse_f64(key, value)?,
            "gae_lambda" => self.gae_lambda = parse_f64(key, value)?,
            "agent_lr" => self.agent_lr = parse_f64(key, value)?,
            "rollout_length" => self.rollout_length = parse_int(key, value)?,
            "max_grad_norm" => self.max_grad_norm = parse_f64(key, value)?,
            "clip_ratio" => self.clip_ratio = parse_f64(key, value)?,
            "ppo_iterations" => self.ppo_iterations = parse_int(key, value)?,
            "value_coef" => self.value_coef = parse_f64(key, value)?,
            "entropy_coef" => self.entropy_coef = parse_f64(key, value)?,
            "pretrain_epochs" => self.pretrain_epochs = parse_int(key, value)?,
            "imitation_lr" => self.imitation_lr = parse_f64(key, value)?,
            "adversarial_epochs" => self.adversarial_epochs = parse_int(key, value)?,
            "replay_multiplier" => self.replay_multiplier = parse_int(key, value)?,
            "r1_coef" => self.r1_coef = parse_f64(key, value)?,
            "reward_cap" => self.reward_cap = parse_f64(key, value)?,
            "gmmil_self_similarity" => self.gmmil_self_similarity = parse_bool(key, value)?,
            "dril_quantile" => self.dril_quantile = parse_f64(key, value)?,
            "dril_dropout" => self.dril_dropout = parse_f64(key, value)?,
            "dril_ensemble" => self.dril_ensemble = parse_int(key, value)?,
            "red_output_dim" => self.red_output_dim = parse_int(key, value)?,
            "early_stop_return" => {
                self.early_stop_return =
                    if value == "none" { None } else { Some(parse_f64(key, value)?) }
            }
            _ => return Err(Error::Config(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Parses a flat `key = value` file; `#` starts a comment, blank lines are
    /// skipped, keys may not repeat.
    pub fn apply_config_text(&mut self, text: &str) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value, got {raw:?}", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key {key:?}", lineno + 1)));
            }
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn from_config_text(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        cfg.apply_config_text(text)?;
        Ok(cfg)
    }

    /// Every key in a fixed order; parsing this text reproduces the config.
    pub fn to_config_string(&self) -> String {
        let dataset = match &self.dataset {
            Some(p) => p.display().to_string(),
            None => "none".into(),
        };
        let early = match self.early_stop_return {
            Some(v) => format!("{v}"),
            None => "none".into(),
        };
        let mut s = String::new();
        let mut push = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        push("algo", self.algo.name().into());
        push("env", self.env.name().into());
        push("dataset", dataset);
        push("steps", self.steps.to_string());
        push("seed", self.seed.to_string());
        push("eval_interval", self.eval_interval.to_string());
        push("eval_episodes", self.eval_episodes.to_string());
        push("hidden_layers", self.hidden_layers.to_string());
        push("hidden_size", self.hidden_size.to_string());
        push("init_log_std", format!("{}", self.init_log_std));
        push("subsample", self.subsample.to_string());
        push("gamma", format!("{}", self.gamma));
        push("gae_lambda", format!("{}", self.gae_lambda));
        push("agent_lr", format!("{}", self.agent_lr));
        push("rollout_length", self.rollout_length.to_string());
        push("max_grad_norm", format!("{}", self.max_grad_norm));
        push("clip_ratio", format!("{}", self.clip_ratio));
        push("ppo_iterations", self.ppo_iterations.to_string());
        push("value_coef", format!("{}", self.value_coef));
        push("entropy_coef", format!("{}", self.entropy_coef));
        push("pretrain_epochs", self.pretrain_epochs.to_string());
        push("imitation_lr", format!("{}", self.imitation_lr));
        push("adversarial_epochs", self.adversarial_epochs.to_string());
        push("replay_multiplier", self.replay_multiplier.to_string());
        push("r1_coef", format!("{}", self.r1_coef));
        push("reward_cap", format!("{}", self.reward_cap));
        push("gmmil_self_similarity", fmt_bool(self.gmmil_self_similarity).into());
        push("dril_quantile", format!("{}", self.dril_quantile));
        push("dril_dropout", format!("{}", self.dril_dropout));
        push("dril_ensemble", self.dril_ensemble.to_string());
        push("red_output_dim", self.red_output_dim.to_string());
        push("early_stop_return", early);
        s
    }

    /// Evaluation interval with the "steps / 20" default resolved.
    pub fn resolved_eval_interval(&self) -> u64 {
        if self.eval_interval > 0 {
            self.eval_interval
        } else {
            (self.steps / EVAL_POINTS).max(1)
        }
    }

    /// Number of evaluation points a full run produces.
    pub fn eval_points(&self) -> u64 {
        (self.steps / self.resolved_eval_interval()).max(1)
    }

    pub fn hidden(&self) -> Vec<usize> {
        vec![self.hidden_size; self.hidden_layers]
    }

    /// Sanity checks a run must satisfy to execute at all. Values outside the
    /// reference search space are allowed here — desk-scale work legitimately
    /// uses, say, more supervised epochs on a 250-sample dataset — and
    /// `within_search_space` reports on the stricter contract.
    pub fn validate(&self) -> Result<()> {
        fn bad(msg: String) -> Result<()> {
            Err(Error::Config(msg))
        }
        if self.steps == 0 {
            return bad("steps must be positive".into());
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes must be positive".into());
        }
        if self.hidden_layers == 0 || self.hidden_size == 0 {
            return bad("network must have at least one hidden layer and unit".into());
        }
        if self.subsample == 0 {
            return bad("subsample rate must be at least 1".into());
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in [0, 1), got {}", self.gamma));
        }
        if !(self.gae_lambda >= 0.0 && self.gae_lambda <= 1.0) {
            return bad(format!("gae_lambda must lie in [0, 1], got {}", self.gae_lambda));
        }
        for (name, v) in [
            ("agent_lr", self.agent_lr),
            ("imitation_lr", self.imitation_lr),
            ("max_grad_norm", self.max_grad_norm),
            ("clip_ratio", self.clip_ratio),
            ("value_coef", self.value_coef),
            ("reward_cap", self.reward_cap),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.entropy_coef >= 0.0 && self.entropy_coef.is_finite()) {
            return bad(format!("entropy_coef must be non-negative, got {}", self.entropy_coef));
        }
        if self.rollout_length < 2 {
            return bad("rollout_length must be at least 2".into());
        }
        if self.ppo_iterations == 0 || self.pretrain_epochs == 0 || self.adversarial_epochs == 0 {
            return bad("iteration and epoch counts must be positive".into());
        }
        if self.replay_multiplier == 0 {
            return bad("replay_multiplier must be at least 1".into());
        }
        if !(self.r1_coef >= 0.0 && self.r1_coef.is_finite()) {
            return bad(format!("r1_coef must be non-negative, got {}", self.r1_coef));
        }
        if !(self.dril_quantile > 0.0 && self.dril_quantile <= 1.0) {
            return bad(format!("dril_quantile must lie in (0, 1], got {}", self.dril_quantile));
        }
        if !(self.dril_dropout >= 0.0 && self.dril_dropout < 1.0) {
            return bad(format!("dril_dropout must lie in [0, 1), got {}", self.dril_dropout));
        }
        if self.dril_ensemble < 2 {
            return bad("dril_ensemble must be at least 2".into());
        }
        if self.red_output_dim == 0 {
            return bad("red_output_dim must be positive".into());
        }
        if self.algo != Algo::Ppo && self.dataset.is_none() {
            return bad(format!("{} requires a dataset", self.algo.name()));
        }
        Ok(())
    }

    /// Whether every searched hyperparameter lies inside its reference
    /// range/choice set. The search samples inside this space by
    /// construction; defaults satisfy it.
    pub fn within_search_space(&self) -> bool {
        let in_range = |v: f64| (LR_LOW..=LR_HIGH).contains(&v);
        in_range(self.agent_lr)
            && in_range(self.imitation_lr)
            && ROLLOUT_CHOICES.contains(&self.rollout_length)
            && ITERATION_CHOICES.contains(&self.ppo_iterations)
            && ENTROPY_CHOICES.contains(&self.entropy_coef)
            && EPOCH_CHOICES.contains(&self.pretrain_epochs)
            && EPOCH_CHOICES.contains(&self.adversarial_epochs)
            && REPLAY_CHOICES.contains(&self.replay_multiplier)
            && R1_CHOICES.contains(&self.r1_coef)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_sit_inside_the_search_space() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert!(cfg.within_search_space());
        // 300000 / 20 = 15000.
        assert_eq!(cfg.resolved_eval_interval(), 15_000);
        assert_eq!(cfg.eval_points(), 20);
    }

    #[test]
    fn config_text_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.algo = Algo::Gail;
        cfg.dataset = Some(PathBuf::from("runs/expert/pointmass.ilds"));
        cfg.agent_lr = 7.5e-5;
        cfg.early_stop_return = Some(-7.25);
        cfg.gmmil_self_similarity = false;
        let text = cfg.to_config_string();
        let parsed = RunConfig::from_config_text(&text).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn comments_blanks_and_spacing_are_tolerated() {
        let text = "# header\n\n  steps=1000 # trailing\n\tseed =  9\n";
        let cfg = RunConfig::from_config_text(text).unwrap();
        assert_eq!(cfg.steps, 1000);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        assert!(RunConfig::from_config_text("stepz = 10\n").is_err());
        assert!(RunConfig::from_config_text("steps = 10\nsteps = 20\n").is_err());
        assert!(RunConfig::from_config_text("steps\n").is_err());
    }

    #[test]
    fn imitation_algorithms_require_a_dataset() {
        let mut cfg = RunConfig::default();
        cfg.algo = Algo::Bc;
        assert!(cfg.validate().is_err());
        cfg.dataset = Some(PathBuf::from("x.ilds"));
        cfg.validate().unwrap();
        cfg.algo = Algo::Ppo;
        cfg.dataset = None;
        cfg.validate().unwrap();
    }

    #[test]
    fn off_grid_values_still_validate_but_leave_the_search_space() {
        let mut cfg = RunConfig::default();
        cfg.dataset = Some(PathBuf::from("x.ilds"));
        cfg.algo = Algo::Bc;
        cfg.pretrain_epochs = 400;
        cfg.agent_lr = 1e-2;
        cfg.validate().unwrap();
        assert!(!cfg.within_search_space());
    }

    #[test]
    fn bool_and_option_parsing() {
        let mut cfg = RunConfig::default();
        cfg.set("gmmil_self_similarity", "off").unwrap();
        assert!(!cfg.gmmil_self_similarity);
        cfg.set("gmmil_self_similarity", "on").unwrap();
        assert!(cfg.gmmil_self_similarity);
        assert!(cfg.set("gmmil_self_similarity", "maybe").is_err());
        cfg.set("early_stop_return", "-3.5").unwrap();
        assert_eq!(cfg.early_stop_return, Some(-3.5));
        cfg.set("early_stop_return", "none").unwrap();
        assert_eq!(cfg.early_stop_return, None);
    }

    #[test]
    fn zero_eval_interval_resolves_to_a_twentieth_of_steps() {
        let mut cfg = RunConfig::default();
        cfg.steps = 10; // 10 / 20 = 0 → clamped to 1
        assert_eq!(cfg.resolved_eval_interval(), 1);
        cfg.steps = 4096;
        assert_eq!(cfg.resolved_eval_interval(), 204); // floor(4096 / 20)
        cfg.eval_interval = 1000;
        assert_eq!(cfg.resolved_eval_interval(), 1000);
    }
}
