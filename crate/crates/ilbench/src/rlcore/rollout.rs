use crate::approx::GaussianPolicy;
use crate::envsim::{Env, EnvKind};
use crate::error::{Error, Result};
use crate::math::Mat;
use crate::rng::{stream, stream_rng, Rng};

use super::buffer::RolloutBuffer;
use super::ppo::Critic;

/// Read-only slice of a rollout handed to reward providers. Deliberately
/// carries no reward column: providers score behaviour from states and
/// actions alone and can never observe the simulator's own reward.
pub struct RolloutView<'a> {
    pub states: &'a Mat,
    pub actions: &'a Mat,
    pub next_states: &'a Mat,
    pub dones: &'a [bool],
}

impl RolloutView<'_> {
    pub fn len(&self) -> usize {
        self.states.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.rows() == 0
    }
}

/// A learned or nonparametric reward source scoring a whole rollout batch.
pub trait RolloutReward {
    fn rewards_for(&mut self, batch: &RolloutView, policy: &GaussianPolicy) -> Result<Vec<f64>>;
}

/// Where the trainer's reward signal comes from: the simulator itself (plain
/// RL, used for expert generation) or an imitation reward provider.
pub enum RewardMode<'a> {
    EnvTrue,
    Imitation(&'a mut dyn RolloutReward),
}

/// An environment plus its reset RNG and the current observation. Episodes
/// carry over between rollouts: a buffer boundary truncates the episode for
/// advantage purposes but the simulation itself continues where it left off.
pub struct EnvStream {
    pub env: Env,
    rng: Rng,
    obs: Vec<f64>,
}

impl EnvStream {
    pub fn new(kind: EnvKind, seed: u64) -> EnvStream {
        let mut rng = stream_rng(seed, stream::ENV);
        let mut env = Env::new(kind);
        let obs = env.reset(&mut rng);
        EnvStream { env, rng, obs }
    }

    pub fn obs(&self) -> &[f64] {
        &self.obs
    }
}

/// Fills `buf` with on-policy transitions. True environment rewards are
/// recorded only in `EnvTrue` mode; in imitation mode the provider scores the
/// finished batch in one call. The caller computes advantages afterwards.
pub fn collect_rollout(
    policy: &GaussianPolicy,
    critic: &Critic,
    stream: &mut EnvStream,
    sample_rng: &mut Rng,
    mode: RewardMode,
    buf: &mut RolloutBuffer,
) -> Result<()> {
    buf.clear();
    let env_true = matches!(mode, RewardMode::EnvTrue);
    while !buf.is_full() {
        let state = stream.obs.clone();
        let (action, log_prob) = policy.sample(&state, sample_rng);
        let v = critic.predict1(&state);
        let (next_obs, env_reward, done) = stream.env.step(&action);
        let reward = if env_true { env_reward } else { 0.0 };
        // Episodes here end only by time limit, which cuts the process off
        // rather than reaching an absorbing state, so every transition
        // bootstraps with the critic's estimate of its observed successor.
        let v_next = critic.predict1(&next_obs);
        buf.push(&state, &action, reward, done, v, v_next, log_prob, &next_obs);
        if done {
            stream.obs = stream.env.reset(&mut stream.rng);
        } else {
            stream.obs = next_obs;
        }
    }
    if let RewardMode::Imitation(provider) = mode {
        let view = RolloutView {
            states: &buf.states,
            actions: &buf.actions,
            next_states: &buf.next_states,
            dones: &buf.dones,
        };
        let rewards = provider.rewards_for(&view, policy)?;
        let n = buf.len();
        if rewards.len() != n {
            return Err(Error::Config(format!(
                "reward provider returned {} rewards for {} transitions",
                rewards.len(),
                n
            )));
        }
        buf.rewards[..n].copy_from_slice(&rewards);
    }
    Ok(())
}
