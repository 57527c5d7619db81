//! Imitation reward constructions. Each algorithm scores agent behaviour
//! against expert demonstrations through the same provider interface; they
//! differ in whether the reward model is pretrained, updated online, and
//! whether it actively penalises the agent's own state-action distribution.

mod adversarial;
mod bc;
mod dril;
mod gmmil;
mod kernels;
mod red;
mod replay;

pub use adversarial::{
    fairl_reward, logistic, policy_logp_batch, AdversarialProvider, DiscConfig, DiscModel,
    DiscStats,
};
pub use bc::{bc_nll_grads, bc_train};
pub use dril::{dril_score, quantile_threshold, DrilProvider};
pub use gmmil::{gmmil_init, gmmil_rewards, GmmilProvider, KernelConfig};
pub use kernels::{kernel_matrix, median_heuristic};
pub use red::{red_score, RedProvider};
pub use replay::{ImitationReplay, ReplayBatch};

use crate::error::{Error, Result};
use crate::math::Mat;

/// Algorithm selector shared by the CLI, the trainer and the providers.
/// `Ppo` trains on the simulator's own reward and is used to generate
/// experts; everything else learns from demonstrations alone.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algo {
    Bc,
    Gail,
    Airl,
    Fairl,
    Gmmil,
    Red,
    Dril,
    Ppo,
}

impl Algo {
    pub const ALL: [Algo; 8] =
        [Algo::Bc, Algo::Gail, Algo::Airl, Algo::Fairl, Algo::Gmmil, Algo::Red, Algo::Dril, Algo::Ppo];

    pub fn parse(s: &str) -> Result<Algo> {
        match s {
            "bc" => Ok(Algo::Bc),
            "gail" => Ok(Algo::Gail),
            "airl" => Ok(Algo::Airl),
            "fairl" => Ok(Algo::Fairl),
            "gmmil" => Ok(Algo::Gmmil),
            "red" => Ok(Algo::Red),
            "dril" => Ok(Algo::Dril),
            "ppo" => Ok(Algo::Ppo),
            other => Err(Error::Config(format!("unknown algorithm '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algo::Bc => "bc",
            Algo::Gail => "gail",
            Algo::Airl => "airl",
            Algo::Fairl => "fairl",
            Algo::Gmmil => "gmmil",
            Algo::Red => "red",
            Algo::Dril => "dril",
            Algo::Ppo => "ppo",
        }
    }

    /// Needs a supervised phase on the demonstrations before any rollouts.
    pub fn requires_pretraining(&self) -> bool {
        matches!(self, Algo::Bc | Algo::Red | Algo::Dril)
    }

    /// The reward model keeps changing during reinforcement learning.
    pub fn updates_online(&self) -> bool {
        matches!(self, Algo::Gail | Algo::Airl | Algo::Fairl)
    }

    /// The reward subtracts a score of the agent's own distribution. For
    /// GMMIL this is the optional self-similarity term, on by default.
    pub fn penalises_self(&self, gmmil_self_similarity: bool) -> bool {
        match self {
            Algo::Gail | Algo::Airl | Algo::Fairl => true,
            Algo::Gmmil => gmmil_self_similarity,
            _ => false,
        }
    }

    pub fn is_adversarial(&self) -> bool {
        matches!(self, Algo::Gail | Algo::Airl | Algo::Fairl)
    }

    /// Trains PPO against a learned/nonparametric reward provider.
    pub fn uses_imitation_reward(&self) -> bool {
        !matches!(self, Algo::Bc | Algo::Ppo)
    }
}

/// Per-dimension standardisation fitted on the expert demonstrations and
/// applied to every state/action fed into discriminators, kernels and
/// random-network pairs. Shared statistics keep bandwidths and network
/// scales comparable across environments.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct Normalizer {
    pub state_mean: Vec<f64>,
    pub state_std: Vec<f64>,
    pub action_mean: Vec<f64>,
    pub action_std: Vec<f64>,
}

const STD_FLOOR: f64 = 1e-8;

fn column_stats(m: &Mat) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = (m.rows(), m.cols());
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (acc, v) in mean.iter_mut().zip(m.row(i)) {
            *acc += v;
        }
    }
    for v in mean.iter_mut() {
        *v /= n as f64;
    }
    let mut var = vec![0.0; d];
    for i in 0..n {
        for ((acc, mu), v) in var.iter_mut().zip(&mean).zip(m.row(i)) {
            let c = v - mu;
            *acc += c * c;
        }
    }
    let std = var.iter().map(|v| (v / n as f64).sqrt().max(STD_FLOOR)).collect();
    (mean, std)
}

impl Normalizer {
    pub fn fit(states: &Mat, actions: &Mat) -> Normalizer {
        assert_eq!(states.rows(), actions.rows());
        assert!(states.rows() > 0, "cannot fit a normalizer on no data");
        let (state_mean, state_std) = column_stats(states);
        let (action_mean, action_std) = column_stats(actions);
        Normalizer { state_mean, state_std, action_mean, action_std }
    }

    pub fn state_dim(&self) -> usize {
        self.state_mean.len()
    }

    pub fn action_dim(&self) -> usize {
        self.action_mean.len()
    }

    fn apply(m: &Mat, mean: &[f64], std: &[f64]) -> Mat {
        let mut out = m.clone();
        for i in 0..out.rows() {
            for ((v, mu), s) in out.row_mut(i).iter_mut().zip(mean).zip(std) {
                *v = (*v - mu) / s;
            }
        }
        out
    }

    pub fn norm_states(&self, states: &Mat) -> Mat {
        assert_eq!(states.cols(), self.state_dim());
        Self::apply(states, &self.state_mean, &self.state_std)
    }

    pub fn norm_actions(&self, actions: &Mat) -> Mat {
        assert_eq!(actions.cols(), self.action_dim());
        Self::apply(actions, &self.action_mean, &self.action_std)
    }

    /// Concatenated normalised (state, action) rows.
    pub fn norm_pairs(&self, states: &Mat, actions: &Mat) -> Mat {
        assert_eq!(states.rows(), actions.rows());
        let (ds, da) = (self.state_dim(), self.action_dim());
        let mut out = Mat::zeros(states.rows(), ds + da);
        for i in 0..states.rows() {
            let row = out.row_mut(i);
            for (j, v) in states.row(i).iter().enumerate() {
                row[j] = (v - self.state_mean[j]) / self.state_std[j];
            }
            for (j, v) in actions.row(i).iter().enumerate() {
                row[ds + j] = (v - self.action_mean[j]) / self.action_std[j];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taxonomy_flags() {
        assert!(Algo::Bc.requires_pretraining());
        assert!(Algo::Red.requires_pretraining());
        assert!(Algo::Dril.requires_pretraining());
        assert!(!Algo::Gail.requires_pretraining());
        for a in [Algo::Gail, Algo::Airl, Algo::Fairl] {
            assert!(a.updates_online());
            assert!(a.penalises_self(false));
        }
        for a in [Algo::Gmmil, Algo::Red, Algo::Dril] {
            assert!(!a.updates_online());
        }
        assert!(Algo::Gmmil.penalises_self(true));
        assert!(!Algo::Gmmil.penalises_self(false));
        assert!(!Algo::Red.penalises_self(true));
        assert!(!Algo::Dril.penalises_self(true));
    }

    #[test]
    fn parse_round_trips_and_rejects_unknown() {
        for a in Algo::ALL {
            assert_eq!(Algo::parse(a.name()).unwrap(), a);
        }
        assert!(Algo::parse("dagger").is_err());
    }

    #[test]
    fn normalizer_standardises_columns() {
        // States column 0: {1, 3} -> mean 2, population std 1.
        // Actions column 0: {0, 4} -> mean 2, population std 2.
        let states = Mat::from_vec(2, 1, vec![1.0, 3.0]);
        let actions = Mat::from_vec(2, 1, vec![0.0, 4.0]);
        let n = Normalizer::fit(&states, &actions);
        assert_eq!(n.state_mean, vec![2.0]);
        assert_eq!(n.state_std, vec![1.0]);
        assert_eq!(n.action_std, vec![2.0]);
        let pairs = n.norm_pairs(&states, &actions);
        assert_eq!(pairs.row(0), &[-1.0, -1.0]);
        assert_eq!(pairs.row(1), &[1.0, 1.0]);
    }

    #[test]
    fn constant_column_gets_the_std_floor() {
        let states = Mat::from_vec(3, 1, vec![5.0, 5.0, 5.0]);
        let actions = Mat::from_vec(3, 1, vec![1.0, 2.0, 3.0]);
        let n = Normalizer::fit(&states, &actions);
        assert_eq!(n.state_std[0], STD_FLOOR);
        let z = n.norm_states(&states);
        assert_eq!(z.row(1)[0], 0.0);
    }
}
