use crate::approx::{Adam, GaussianPolicy, MlpParams};
use crate::error::{Error, Result};
use crate::math::Mat;
use crate::rlcore::{RolloutReward, RolloutView};
use crate::rng::Rng;

use super::Normalizer;

/// Random-network-distillation reward: a trainable predictor is fitted to a
/// frozen, randomly initialised target on the expert set, and familiarity is
/// scored as exp(-sigma * squared prediction error). `sigma` is the
/// reciprocal of the median post-training expert error, so the median expert
/// point scores e^{-1}.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct RedProvider {
    pub norm: Normalizer,
    pub target: MlpParams,
    pub predictor: MlpParams,
    pub sigma: f64,
}

/// Familiarity score of one squared prediction error.
pub fn red_score(sigma: f64, squared_error: f64) -> f64 {
    (-sigma * squared_error).exp()
}

fn median_of(mut xs: Vec<f64>) -> f64 {
    assert!(!xs.is_empty());
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Per-sample squared prediction errors |predictor(x) - target(x)|^2.
fn squared_errors(target: &MlpParams, predictor: &MlpParams, inputs: &Mat) -> Vec<f64> {
    let t = target.infer(inputs);
    let p = predictor.infer(inputs);
    (0..inputs.rows())
        .map(|i| {
            t.row(i)
                .iter()
                .zip(p.row(i))
                .map(|(a, b)| {
                    let d = a - b;
                    d * d
                })
                .sum()
        })
        .collect()
}

impl RedProvider {
    /// Fits the predictor with `epochs` full-batch steps of mean-squared
    ///-error descent, then fixes `sigma` from the residual errors. Returns
    /// the provider and the per-epoch loss curve.
    pub fn pretrain(
        demo_states: &Mat,
        demo_actions: &Mat,
        hidden: &[usize],
        output_dim: usize,
        epochs: usize,
        learning_rate: f64,
        rng: &mut Rng,
    ) -> Result<(RedProvider, Vec<f64>)> {
        if demo_states.rows() == 0 {
            return Err(Error::Empty("random-network distillation dataset"));
        }
        if output_dim == 0 {
            return Err(Error::Config("random-network output dimension must be positive".into()));
        }
        let norm = Normalizer::fit(demo_states, demo_actions);
        let inputs = norm.norm_pairs(demo_states, demo_actions);
        let mut sizes = vec![inputs.cols()];
        sizes.extend_from_slice(hidden);
        sizes.push(output_dim);
        let target = MlpParams::init(&sizes, 1.0, 0.0, rng);
        let mut predictor = MlpParams::init(&sizes, 1.0, 0.0, rng);
        let curve = fit_predictor(&target, &mut predictor, &inputs, epochs, learning_rate)?;
        let sigma = sigma_from_errors(&squared_errors(&target, &predictor, &inputs));
        Ok((RedProvider { norm, target, predictor, sigma }, curve))
    }

    pub fn rewards(&self, states: &Mat, actions: &Mat) -> Vec<f64> {
        let inputs = self.norm.norm_pairs(states, actions);
        squared_errors(&self.target, &self.predictor, &inputs)
            .into_iter()
            .map(|e| red_score(self.sigma, e))
            .collect()
    }
}

fn fit_predictor(
    target: &MlpParams,
    predictor: &mut MlpParams,
    inputs: &Mat,
    epochs: usize,
    learning_rate: f64,
) -> Result<Vec<f64>> {
    let n = inputs.rows();
    let inv_n = 1.0 / n as f64;
    let goal = target.infer(inputs);
    let mut opt = Adam::new(learning_rate);
    let mut curve = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let cache = predictor.forward(inputs, None);
        let mut d_out = Mat::zeros(n, goal.cols());
        let mut loss = 0.0;
        for i in 0..n {
            let (p, t) = (cache.output.row(i), goal.row(i));
            let dr = d_out.row_mut(i);
            for j in 0..t.len() {
                let d = p[j] - t[j];
                loss += d * d * inv_n;
                dr[j] = 2.0 * d * inv_n;
            }
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite("distillation loss".into()));
        }
        curve.push(loss);
        let (grads, _) = predictor.backward(&cache, &d_out);
        let mut ps = predictor.param_slices_mut();
        opt.step(&mut ps, &grads.slices())?;
    }
    Ok(curve)
}

/// sigma = 1 / median squared error. A zero median falls back to the
/// smallest non-zero error; a perfectly reproduced target (all errors zero)
/// leaves no scale to infer, so sigma defaults to 1.
fn sigma_from_errors(errors: &[f64]) -> f64 {
    let med = median_of(errors.to_vec());
    if med > 0.0 {
        return 1.0 / med;
    }
    match errors.iter().copied().filter(|&e| e > 0.0).fold(None, |acc: Option<f64>, e| {
        Some(acc.map_or(e, |a| a.min(e)))
    }) {
        Some(e) => 1.0 / e,
        None => 1.0,
    }
}

impl RolloutReward for RedProvider {
    fn rewards_for(&mut self, batch: &RolloutView, _policy: &GaussianPolicy) -> Result<Vec<f64>> {
        Ok(self.rewards(batch.states, batch.actions))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seed_rng;
    use rand::Rng as _;

    fn demo(n: usize, rng: &mut Rng) -> (Mat, Mat) {
        let states = Mat::from_vec(n, 3, (0..3 * n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let actions = Mat::from_vec(n, 2, (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        (states, actions)
    }

    #[test]
    fn identical_networks_trigger_the_sigma_fallback() {
        let mut rng = seed_rng(70);
        let (states, actions) = demo(9, &mut rng);
        let (mut provider, curve) =
            RedProvider::pretrain(&states, &actions, &[8], 16, 0, 1e-3, &mut rng).unwrap();
        assert!(curve.is_empty());
        provider.predictor = provider.target.clone();
        let inputs = provider.norm.norm_pairs(&states, &actions);
        let errors = squared_errors(&provider.target, &provider.predictor, &inputs);
        assert_eq!(sigma_from_errors(&errors), 1.0);
        provider.sigma = sigma_from_errors(&errors);
        let r = provider.rewards(&states, &actions);
        assert!(r.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn zero_median_with_nonzero_errors_uses_smallest_nonzero() {
        // Errors {0, 0, 0, 0, 0.25, 4}: median 0, smallest non-zero 0.25,
        // sigma = 4.
        assert_eq!(sigma_from_errors(&[0.0, 0.0, 0.0, 0.0, 0.25, 4.0]), 4.0);
    }

    #[test]
    fn training_error_trends_down() {
        let mut rng = seed_rng(71);
        let (states, actions) = demo(64, &mut rng);
        let (_, curve) =
            RedProvider::pretrain(&states, &actions, &[16], 8, 120, 3e-3, &mut rng).unwrap();
        let head: f64 = curve[..5].iter().sum::<f64>() / 5.0;
        let tail: f64 = curve[curve.len() - 5..].iter().sum::<f64>() / 5.0;
        assert!(tail < head, "no improvement: {head} -> {tail}");
    }

    #[test]
    fn median_expert_point_scores_e_to_the_minus_one() {
        // Odd demo count: one point carries exactly the median error and its
        // reward must be e^{-1} by construction of sigma.
        let mut rng = seed_rng(72);
        let (states, actions) = demo(25, &mut rng);
        let (provider, _) =
            RedProvider::pretrain(&states, &actions, &[8], 12, 30, 1e-3, &mut rng).unwrap();
        let rewards = provider.rewards(&states, &actions);
        let want = (-1.0f64).exp();
        let closest =
            rewards.iter().map(|r| (r - want).abs()).fold(f64::INFINITY, f64::min);
        assert!(closest < 1e-10, "no median point at e^-1 (closest {closest})");
    }

    #[test]
    fn reward_is_monotone_in_squared_error() {
        let mut rng = seed_rng(73);
        let sigma = 2.3;
        for _ in 0..200 {
            let a: f64 = rng.gen_range(0.0..5.0);
            let b: f64 = rng.gen_range(0.0..5.0);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let r_lo = (-sigma * lo).exp();
            let r_hi = (-sigma * hi).exp();
            assert!(r_lo >= r_hi);
        }
    }

    #[test]
    fn out_of_distribution_probes_score_below_the_expert_median() {
        let mut rng = seed_rng(74);
        let (states, actions) = demo(51, &mut rng);
        let (provider, _) =
            RedProvider::pretrain(&states, &actions, &[16], 16, 150, 3e-3, &mut rng).unwrap();
        let expert_rewards = provider.rewards(&states, &actions);
        let expert_median = median_of(expert_rewards);
        // Probes far outside the demo hull.
        let far_states = Mat::from_vec(20, 3, (0..60).map(|_| rng.gen_range(15.0..25.0)).collect());
        let far_actions = Mat::from_vec(20, 2, (0..40).map(|_| rng.gen_range(15.0..25.0)).collect());
        let far = provider.rewards(&far_states, &far_actions);
        let far_median = median_of(far);
        assert!(
            far_median < expert_median,
            "far probes {far_median} should score below expert median {expert_median}"
        );
    }

    #[test]
    fn rewards_stay_in_unit_interval() {
        let mut rng = seed_rng(75);
        let (states, actions) = demo(31, &mut rng);
        let (provider, _) =
            RedProvider::pretrain(&states, &actions, &[8], 8, 40, 1e-3, &mut rng).unwrap();
        let (probe_s, probe_a) = demo(40, &mut rng);
        for r in provider.rewards(&probe_s, &probe_a) {
            assert!(r > 0.0 && r <= 1.0);
        }
    }
}
