//! Expert demonstration storage: an ordered list of transitions partitioned
//! into trajectories, recorded from a policy, optionally subsampled, and
//! serialised in a compact little-endian binary format (see `io`).
//!
//! Rewards are stored for bookkeeping (summary tables), but training code
//! only ever receives a [`DemoView`], which strips them.

mod io;

pub use io::{load, save};

use crate::envsim::Env;
use crate::error::{Error, Result};
use crate::math::{mean, std_dev, Mat};
use crate::rng::Rng;

use crate::approx::GaussianPolicy;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f32>,
    pub action: Vec<f32>,
    pub reward: f32,
    pub next_state: Vec<f32>,
    pub terminal: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryDataset {
    pub state_dim: usize,
    pub action_dim: usize,
    pub transitions: Vec<Transition>,
    /// Exclusive end offset of each trajectory; strictly increasing, the last
    /// entry equals the transition count.
    pub boundaries: Vec<usize>,
    pub env_name: String,
    /// Subsampling already applied to this data (1 = none).
    pub subsample_rate: u32,
}

#[derive(Clone, Copy, Debug)]
pub struct DatasetStats {
    pub transitions: usize,
    pub trajectories: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub mean_length: f64,
}

/// Expert data as the imitation reward providers see it: states and actions
/// only, never the recorded rewards.
#[derive(Clone, Debug)]
pub struct DemoView {
    pub states: Mat,
    pub actions: Mat,
    pub next_states: Mat,
    pub terminals: Vec<bool>,
    pub boundaries: Vec<usize>,
}

impl DemoView {
    pub fn len(&self) -> usize {
        self.states.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl TrajectoryDataset {
    pub fn validate(&self) -> Result<()> {
        if self.boundaries.is_empty() != self.transitions.is_empty() {
            return Err(Error::Format("boundary list inconsistent with transitions".into()));
        }
        let mut prev = 0usize;
        for (i, &b) in self.boundaries.iter().enumerate() {
            if b <= prev {
                return Err(Error::Format(format!("boundaries not strictly increasing at {i}")));
            }
            prev = b;
        }
        if let Some(&last) = self.boundaries.last() {
            if last != self.transitions.len() {
                return Err(Error::Format("last boundary does not match transition count".into()));
            }
        }
        if self.subsample_rate == 0 {
            return Err(Error::Format("subsample rate must be at least 1".into()));
        }
        for (i, t) in self.transitions.iter().enumerate() {
            if t.state.len() != self.state_dim
                || t.next_state.len() != self.state_dim
                || t.action.len() != self.action_dim
            {
                return Err(Error::Format(format!("transition {i} has inconsistent dimensions")));
            }
        }
        Ok(())
    }

    pub fn trajectory_count(&self) -> usize {
        self.boundaries.len()
    }

    /// Transition index range of trajectory `i`.
    pub fn trajectory_range(&self, i: usize) -> std::ops::Range<usize> {
        let start = if i == 0 { 0 } else { self.boundaries[i - 1] };
        start..self.boundaries[i]
    }

    /// Keeps transitions 0, rate, 2*rate, ... of every trajectory.
    pub fn subsample(&self, rate: u32) -> Result<TrajectoryDataset> {
        if rate == 0 {
            return Err(Error::Config("subsample rate must be at least 1".into()));
        }
        if rate == 1 {
            return Ok(self.clone());
        }
        let mut transitions = Vec::new();
        let mut boundaries = Vec::new();
        for i in 0..self.trajectory_count() {
            let range = self.trajectory_range(i);
            for (k, idx) in range.enumerate() {
                if k % rate as usize == 0 {
                    transitions.push(self.transitions[idx].clone());
                }
            }
            boundaries.push(transitions.len());
        }
        Ok(TrajectoryDataset {
            state_dim: self.state_dim,
            action_dim: self.action_dim,
            transitions,
            boundaries,
            env_name: self.env_name.clone(),
            subsample_rate: self.subsample_rate.saturating_mul(rate),
        })
    }

    /// Per-trajectory undiscounted return and length statistics.
    pub fn stats(&self) -> Result<DatasetStats> {
        if self.transitions.is_empty() {
            return Err(Error::Empty("dataset has no transitions"));
        }
        let mut returns = Vec::with_capacity(self.trajectory_count());
        let mut lengths = Vec::with_capacity(self.trajectory_count());
        for i in 0..self.trajectory_count() {
            let range = self.trajectory_range(i);
            lengths.push(range.len() as f64);
            returns.push(self.transitions[range].iter().map(|t| t.reward as f64).sum());
        }
        Ok(DatasetStats {
            transitions: self.transitions.len(),
            trajectories: self.trajectory_count(),
            mean_return: mean(&returns),
            std_return: std_dev(&returns),
            mean_length: mean(&lengths),
        })
    }

    /// Reward-stripped f64 view for reward providers.
    pub fn stripped_view(&self) -> DemoView {
        let n = self.transitions.len();
        let mut states = Mat::zeros(n, self.state_dim);
        let mut actions = Mat::zeros(n, self.action_dim);
        let mut next_states = Mat::zeros(n, self.state_dim);
        let mut terminals = Vec::with_capacity(n);
        for (i, t) in self.transitions.iter().enumerate() {
            for (d, v) in states.row_mut(i).iter_mut().zip(&t.state) {
                *d = *v as f64;
            }
            for (d, v) in actions.row_mut(i).iter_mut().zip(&t.action) {
                *d = *v as f64;
            }
            for (d, v) in next_states.row_mut(i).iter_mut().zip(&t.next_state) {
                *d = *v as f64;
            }
            terminals.push(t.terminal);
        }
        DemoView { states, actions, next_states, terminals, boundaries: self.boundaries.clone() }
    }
}

/// Rolls out `episodes` full episodes of `policy` and records them. With
/// `stochastic` false the mode action is taken, which keeps the recorded
/// returns identical to the evaluation protocol's on the same reset stream.
pub fn record_expert(
    policy: &GaussianPolicy,
    env: &mut Env,
    episodes: usize,
    stochastic: bool,
    rng: &mut Rng,
) -> Result<TrajectoryDataset> {
    if episodes == 0 {
        return Err(Error::Config("cannot record zero episodes".into()));
    }
    let spec = env.spec().clone();
    assert_eq!(policy.obs_dim(), spec.obs_dim, "policy does not fit this environment");
    let mut transitions = Vec::with_capacity(episodes * spec.horizon);
    let mut boundaries = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = env.reset(rng);
        loop {
            let action = if stochastic {
                policy.sample(&obs, rng).0
            } else {
                policy.act_mean(&obs)
            };
            let (next_obs, reward, done) = env.step(&action);
            transitions.push(Transition {
                state: obs.iter().map(|v| *v as f32).collect(),
                action: action.iter().map(|v| *v as f32).collect(),
                reward: reward as f32,
                next_state: next_obs.iter().map(|v| *v as f32).collect(),
                terminal: done,
            });
            obs = next_obs;
            if done {
                break;
            }
        }
        boundaries.push(transitions.len());
    }
    let ds = TrajectoryDataset {
        state_dim: spec.obs_dim,
        action_dim: spec.act_dim,
        transitions,
        boundaries,
        env_name: spec.kind.name().to_string(),
        subsample_rate: 1,
    };
    ds.validate()?;
    Ok(ds)
}
