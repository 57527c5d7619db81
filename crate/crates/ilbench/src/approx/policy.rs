use crate::math::Mat;
use crate::rng::Rng;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ForwardCache, MlpParams};

pub const LOG_2PI: f64 = 1.8378770664093453;

/// Diagonal-Gaussian policy: an MLP mean head plus a state-independent
/// log-std vector. The deterministic action is the mean.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub mean: MlpParams,
    pub log_std: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new(
        obs_dim: usize,
        act_dim: usize,
        hidden: &[usize],
        init_log_std: f64,
        dropout: f64,
        rng: &mut Rng,
    ) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(obs_dim);
        sizes.extend_from_slice(hidden);
        sizes.push(act_dim);
        // Small final-layer scale keeps initial actions near zero.
        let mean = MlpParams::init(&sizes, 0.01, dropout, rng);
        GaussianPolicy { mean, log_std: vec![init_log_std; act_dim] }
    }

    pub fn obs_dim(&self) -> usize {
        self.mean.in_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.mean.out_dim()
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|l| l.exp()).collect()
    }

    /// Deterministic (mode) action.
    pub fn act_mean(&self, obs: &[f64]) -> Vec<f64> {
        self.mean.infer1(obs)
    }

    /// Stochastic action with its log-density.
    pub fn sample(&self, obs: &[f64], rng: &mut Rng) -> (Vec<f64>, f64) {
        let mu = self.mean.infer1(obs);
        let mut a = Vec::with_capacity(mu.len());
        for (m, ls) in mu.iter().zip(&self.log_std) {
            let z: f64 = rng.sample(StandardNormal);
            a.push(m + ls.exp() * z);
        }
        let lp = log_prob_parts(&mu, &self.log_std, &a);
        (a, lp)
    }

    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> f64 {
        let mu = self.mean.infer1(obs);
        log_prob_parts(&mu, &self.log_std, action)
    }

    /// Analytic entropy; state-independent because the covariance is.
    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|ls| 0.5 * (1.0 + LOG_2PI) + ls).sum()
    }

    /// Batch of mean vectors with the cache needed for backprop.
    pub fn mean_batch(&self, obs: &Mat) -> ForwardCache {
        self.mean.forward(obs, None)
    }
}

/// log N(a; mu, diag(exp(log_std))^2)
pub fn log_prob_parts(mu: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    assert_eq!(mu.len(), action.len(), "action dimension mismatch");
    assert_eq!(mu.len(), log_std.len(), "log-std dimension mismatch");
    let mut lp = 0.0;
    for ((m, ls), a) in mu.iter().zip(log_std).zip(action) {
        let z = (a - m) / ls.exp();
        lp -= 0.5 * (z * z + LOG_2PI) + ls;
    }
    lp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seed_rng;

    #[test]
    fn standard_normal_density_at_mean() {
        // 1-D, mu = a = 0, sigma = 1: log p = -0.5*ln(2*pi).
        let lp = log_prob_parts(&[0.0], &[0.0], &[0.0]);
        assert!((lp - (-0.9189385332046727)).abs() < 1e-12);
    }

    #[test]
    fn unit_gaussian_entropy() {
        let mut rng = seed_rng(40);
        let mut pi = GaussianPolicy::new(3, 1, &[4], 0.0, 0.0, &mut rng);
        // sigma = 1: entropy = 0.5*ln(2*pi*e) per dimension.
        assert!((pi.entropy() - 1.4189385332046727).abs() < 1e-12);
        pi.log_std[0] = 0.5;
        assert!((pi.entropy() - (1.4189385332046727 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn sample_log_prob_is_consistent_with_log_prob() {
        let mut rng = seed_rng(41);
        let pi = GaussianPolicy::new(2, 2, &[8], -0.5, 0.0, &mut rng);
        let obs = [0.3, -1.2];
        let (a, lp) = pi.sample(&obs, &mut rng);
        assert!((lp - pi.log_prob(&obs, &a)).abs() < 1e-12);
    }

    #[test]
    fn mode_is_the_mean_and_more_probable_than_samples() {
        let mut rng = seed_rng(42);
        let pi = GaussianPolicy::new(2, 2, &[8], -1.0, 0.0, &mut rng);
        let obs = [0.1, 0.4];
        let mode = pi.act_mean(&obs);
        let lp_mode = pi.log_prob(&obs, &mode);
        for _ in 0..20 {
            let (a, _) = pi.sample(&obs, &mut rng);
            assert!(pi.log_prob(&obs, &a) <= lp_mode + 1e-12);
        }
    }

    #[test]
    fn init_log_std_is_applied() {
        let mut rng = seed_rng(43);
        let pi = GaussianPolicy::new(4, 3, &[8, 8], -2.0, 0.0, &mut rng);
        for s in pi.std() {
            assert!((s - (-2.0f64).exp()).abs() < 1e-12);
        }
    }
}
