//! Training orchestration: one loop per algorithm class, a shared
//! deterministic evaluation protocol, and expert generation by snapshotting a
//! true-reward PPO run at medium quality.

use std::time::Instant;

use crate::approx::{Adam, GaussianPolicy};
use crate::dataset::{self, TrajectoryDataset};
use crate::envsim::{Env, EnvKind, EnvSpec};
use crate::error::{Error, Result};
use crate::ilrewards::{
    bc_train, AdversarialProvider, Algo, DiscConfig, DrilProvider, GmmilProvider, RedProvider,
};
use crate::math::{mean, std_dev, Mat};
use crate::rlcore::{
    collect_rollout, ppo_update, Critic, EnvStream, PpoConfig, RewardMode, RolloutBuffer,
    RolloutReward,
};
use crate::rng::{stream, stream_rng};

use super::config::RunConfig;

/// One point of the evaluation series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalPoint {
    pub step: u64,
    pub mean_return: f64,
    pub std_return: f64,
}

/// Mean and spread of undiscounted returns over one evaluation pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalStats {
    pub mean: f64,
    pub std: f64,
    pub episodes: usize,
}

/// Result of one training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub policy: GaussianPolicy,
    pub evals: Vec<EvalPoint>,
    /// Wall-clock spent in supervised pretraining (reward-model or policy),
    /// None for algorithms without a pretraining phase.
    pub pretrain_seconds: Option<f64>,
    pub train_seconds: f64,
    /// Environment steps actually consumed (0 for offline training).
    pub env_steps: u64,
}

/// Runs the mean-action policy for `episodes` full episodes and reports the
/// mean ± population std of the undiscounted returns. The reset stream is
/// derived from `seed` alone, so a given seed always replays the same
/// episode set; rewards come straight from the simulator and no learned
/// reward is consulted anywhere in this path.
pub fn evaluate(policy: &GaussianPolicy, kind: EnvKind, episodes: usize, seed: u64) -> EvalStats {
    let mut rng = stream_rng(seed, stream::EVAL);
    let mut env = Env::new(kind);
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = env.reset(&mut rng);
        let mut total = 0.0;
        loop {
            let action = policy.act_mean(&obs);
            let (next_obs, reward, done) = env.step(&action);
            total += reward;
            obs = next_obs;
            if done {
                break;
            }
        }
        returns.push(total);
    }
    EvalStats { mean: mean(&returns), std: std_dev(&returns), episodes }
}

/// Seed for the `ordinal`-th evaluation of a run. Golden-ratio striding keeps
/// the per-point episode sets distinct without coupling them to how much
/// randomness training has consumed.
pub fn eval_seed(run_seed: u64, ordinal: u64) -> u64 {
    run_seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(ordinal.wrapping_add(1)))
}

/// Fraction of a reference return that `achieved` attains, oriented so that
/// 1 means parity and larger is better on both reward and cost scales. For
/// the cost-style (negative) returns of these environments the score is
/// reference / achieved: reference −6 against achieved −8 scores 0.75.
pub fn ratio_score(reference: f64, achieved: f64) -> f64 {
    match (reference < 0.0, achieved < 0.0) {
        (true, true) => reference / achieved,
        (false, false) => {
            if reference == 0.0 {
                1.0
            } else {
                achieved / reference
            }
        }
        // Achieved crossed zero upward: better than any finite ratio.
        (true, false) => f64::INFINITY,
        (false, true) => 0.0,
    }
}

/// Loads the demonstrations a config points at and reconciles subsampling:
/// a dense recording is subsampled at the configured rate, an already
/// subsampled file is accepted as-is only when the rates agree.
pub fn load_demos(cfg: &RunConfig) -> Result<TrajectoryDataset> {
    let path = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| Error::Config(format!("{} requires a dataset", cfg.algo.name())))?;
    let ds = dataset::load(path)?;
    if ds.env_name != cfg.env.name() {
        return Err(Error::Config(format!(
            "dataset was recorded on {:?} but the run targets {:?}",
            ds.env_name,
            cfg.env.name()
        )));
    }
    if ds.subsample_rate == 1 && cfg.subsample > 1 {
        ds.subsample(cfg.subsample)
    } else if ds.subsample_rate != 1 && cfg.subsample != 1 && cfg.subsample != ds.subsample_rate {
        Err(Error::Config(format!(
            "dataset is already subsampled at rate {}, cannot re-subsample at {}",
            ds.subsample_rate, cfg.subsample
        )))
    } else {
        Ok(ds)
    }
}

/// Builds the kernel reward from the first rollout it sees (which supplies
/// the initial-policy points for the first bandwidth) and scores every batch
/// with the resulting fixed reward, including that first one.
struct GmmilBootstrap {
    demo_states: Mat,
    demo_actions: Mat,
    self_similarity: bool,
    slot: Option<GmmilProvider>,
}

impl RolloutReward for GmmilBootstrap {
    fn rewards_for(
        &mut self,
        batch: &crate::rlcore::RolloutView,
        policy: &GaussianPolicy,
    ) -> Result<Vec<f64>> {
        if self.slot.is_none() {
            self.slot = Some(GmmilProvider::new(
                &self.demo_states,
                &self.demo_actions,
                batch.states,
                batch.actions,
                self.self_similarity,
            )?);
        }
        self.slot.as_mut().expect("just initialised").rewards_for(batch, policy)
    }
}

pub fn run_training(cfg: &RunConfig) -> Result<TrainOutcome> {
    run_training_inner(cfg, None)
}

fn run_training_inner(
    cfg: &RunConfig,
    mut snapshots: Option<&mut Vec<(u64, GaussianPolicy)>>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let spec = EnvSpec::new(cfg.env);
    let hidden = cfg.hidden();
    let mut init_rng = stream_rng(cfg.seed, stream::POLICY_INIT);
    let mut policy = GaussianPolicy::new(
        spec.obs_dim,
        spec.act_dim,
        &hidden,
        cfg.init_log_std,
        0.0,
        &mut init_rng,
    );
    // The critic predicts return/(1 - gamma): a unit-magnitude per-step
    // reward accumulates to about that scale, and the head tracks rescaled
    // targets at speed proportional to it.
    let mut value = Critic::new(spec.obs_dim, &hidden, 1.0 / (1.0 - cfg.gamma), 1.0, &mut init_rng);

    let demo = if cfg.algo == Algo::Ppo { None } else { Some(load_demos(cfg)?.stripped_view()) };
    let mut provider_rng = stream_rng(cfg.seed, stream::PROVIDER);

    let mut evals: Vec<EvalPoint> = Vec::new();
    let interval = cfg.resolved_eval_interval();

    // Offline branch: supervised training only, zero environment steps, but
    // the usual number of evaluation points so series stay comparable.
    if cfg.algo == Algo::Bc {
        let demo = demo.expect("validated above");
        let t0 = Instant::now();
        bc_train(
            &mut policy,
            &demo.states,
            &demo.actions,
            cfg.pretrain_epochs,
            cfg.agent_lr,
            cfg.max_grad_norm,
            &mut provider_rng,
        )?;
        let pretrain_seconds = Some(t0.elapsed().as_secs_f64());
        for i in 0..cfg.eval_points() {
            let es = evaluate(&policy, cfg.env, cfg.eval_episodes, eval_seed(cfg.seed, i));
            let step = (i + 1) * interval;
            evals.push(EvalPoint { step, mean_return: es.mean, std_return: es.std });
            if let Some(snaps) = snapshots.as_deref_mut() {
                snaps.push((step, policy.clone()));
            }
        }
        return Ok(TrainOutcome {
            policy,
            evals,
            pretrain_seconds,
            train_seconds: 0.0,
            env_steps: 0,
        });
    }

    // Reward source for the online branch.
    let mut pretrain_seconds = None;
    let mut provider: Option<Box<dyn RolloutReward>> = match cfg.algo {
        Algo::Ppo | Algo::Bc => None,
        Algo::Red => {
            let demo = demo.as_ref().expect("validated above");
            let t0 = Instant::now();
            let (red, _curve) = RedProvider::pretrain(
                &demo.states,
                &demo.actions,
                &hidden,
                cfg.red_output_dim,
                cfg.pretrain_epochs,
                cfg.imitation_lr,
                &mut provider_rng,
            )?;
            pretrain_seconds = Some(t0.elapsed().as_secs_f64());
            Some(Box::new(red))
        }
        Algo::Dril => {
            let demo = demo.as_ref().expect("validated above");
            let t0 = Instant::now();
            let dril = DrilProvider::pretrain(
                &demo.states,
                &demo.actions,
                &hidden,
                cfg.dril_dropout,
                cfg.dril_ensemble,
                cfg.dril_quantile,
                cfg.pretrain_epochs,
                cfg.imitation_lr,
                &mut provider_rng,
            )?;
            pretrain_seconds = Some(t0.elapsed().as_secs_f64());
            Some(Box::new(dril))
        }
        Algo::Gmmil => {
            let demo = demo.as_ref().expect("validated above");
            Some(Box::new(GmmilBootstrap {
                demo_states: demo.states.clone(),
                demo_actions: demo.actions.clone(),
                self_similarity: cfg.gmmil_self_similarity,
                slot: None,
            }))
        }
        Algo::Gail | Algo::Airl | Algo::Fairl => {
            let demo = demo.as_ref().expect("validated above");
            let disc_cfg = DiscConfig {
                learning_rate: cfg.imitation_lr,
                epochs: cfg.adversarial_epochs,
                r1_coef: cfg.r1_coef,
                reward_cap: cfg.reward_cap,
            };
            Some(Box::new(AdversarialProvider::new(
                cfg.algo,
                &demo.states,
                &demo.actions,
                &demo.next_states,
                &hidden,
                cfg.gamma,
                disc_cfg,
                cfg.replay_multiplier,
                &mut provider_rng,
            )?))
        }
    };

    let mut env_stream = EnvStream::new(cfg.env, cfg.seed);
    let mut sample_rng = stream_rng(cfg.seed, stream::POLICY_SAMPLE);
    let mut buf = RolloutBuffer::new(cfg.rollout_length, spec.obs_dim, spec.act_dim);
    let mut opt = Adam::new(cfg.agent_lr);
    let ppo_cfg = PpoConfig {
        clip_ratio: cfg.clip_ratio,
        iterations: cfg.ppo_iterations,
        value_coef: cfg.value_coef,
        entropy_coef: cfg.entropy_coef,
        gamma: cfg.gamma,
        gae_lambda: cfg.gae_lambda,
        max_grad_norm: cfg.max_grad_norm,
        normalize_advantages: true,
    };

    let t0 = Instant::now();
    let mut steps_done: u64 = 0;
    let mut next_eval = interval;
    'training: while steps_done < cfg.steps {
        let mode = match provider.as_mut() {
            Some(p) => RewardMode::Imitation(p.as_mut()),
            None => RewardMode::EnvTrue,
        };
        collect_rollout(&policy, &value, &mut env_stream, &mut sample_rng, mode, &mut buf)?;
        buf.compute_gae(cfg.gamma, cfg.gae_lambda);
        ppo_update(&mut policy, &mut value, &mut opt, &buf, &ppo_cfg)?;
        steps_done += cfg.rollout_length as u64;
        while steps_done >= next_eval {
            let i = evals.len() as u64;
            let es = evaluate(&policy, cfg.env, cfg.eval_episodes, eval_seed(cfg.seed, i));
            evals.push(EvalPoint { step: steps_done, mean_return: es.mean, std_return: es.std });
            if let Some(snaps) = snapshots.as_deref_mut() {
                snaps.push((steps_done, policy.clone()));
            }
            next_eval += interval;
            if let Some(target) = cfg.early_stop_return {
                if es.mean >= target {
                    break 'training;
                }
            }
        }
    }
    let train_seconds = t0.elapsed().as_secs_f64();

    Ok(TrainOutcome { policy, evals, pretrain_seconds, train_seconds, env_steps: steps_done })
}

/// Result of expert generation: the medium-quality snapshot, a dense
/// recording of its behaviour, and the PPO curve it was cut from.
pub struct ExpertOutcome {
    pub policy: GaussianPolicy,
    pub dataset: TrajectoryDataset,
    pub evals: Vec<EvalPoint>,
    pub snapshot_step: u64,
    pub snapshot_return: f64,
    pub final_return: f64,
}

/// Trains PPO on the true reward and snapshots the first evaluation point
/// reaching `snapshot_ratio` of the final return (medium quality rather than
/// fully converged), then records `episodes` deterministic episodes from the
/// snapshot. The recording is dense; consumers subsample at load time.
pub fn generate_expert(
    cfg: &RunConfig,
    episodes: usize,
    snapshot_ratio: f64,
) -> Result<ExpertOutcome> {
    if episodes == 0 {
        return Err(Error::Config("expert recording needs at least one episode".into()));
    }
    if !(snapshot_ratio > 0.0 && snapshot_ratio <= 1.0) {
        return Err(Error::Config(format!(
            "snapshot ratio must lie in (0, 1], got {snapshot_ratio}"
        )));
    }
    let mut cfg = cfg.clone();
    cfg.algo = Algo::Ppo;
    cfg.dataset = None;
    let mut snaps: Vec<(u64, GaussianPolicy)> = Vec::new();
    let out = run_training_inner(&cfg, Some(&mut snaps))?;
    let last = out
        .evals
        .last()
        .ok_or_else(|| Error::Config("run produced no evaluation points".into()))?;
    let final_return = last.mean_return;
    let pick = out
        .evals
        .iter()
        .position(|e| ratio_score(final_return, e.mean_return) >= snapshot_ratio)
        .expect("the final point scores 1.0 against itself");
    let (snapshot_step, policy) = snaps[pick].clone();
    let snapshot_return = out.evals[pick].mean_return;

    let mut env = Env::new(cfg.env);
    let mut rng = stream_rng(cfg.seed, stream::EXPERT);
    let dataset = dataset::record_expert(&policy, &mut env, episodes, false, &mut rng)?;
    Ok(ExpertOutcome {
        policy,
        dataset,
        evals: out.evals,
        snapshot_step,
        snapshot_return,
        final_return,
    })
}
