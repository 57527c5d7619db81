use crate::approx::{GaussianPolicy, UnitMask};
use crate::error::{Error, Result};
use crate::math::Mat;
use crate::rlcore::{RolloutReward, RolloutView};
use crate::rng::Rng;

use super::bc::bc_train;

/// Dropout-ensemble disagreement reward. One cloning policy is trained with
/// dropout; a fixed set of `E` dropout masks then acts as an ensemble whose
/// members vote through their predicted mean actions. States where the
/// members disagree more than the calibrated threshold `q` score -1,
/// familiar states score +1.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct DrilProvider {
    pub policy: GaussianPolicy,
    masks: Vec<UnitMask>,
    pub q: f64,
}

/// The k-th order statistic with k = ceil(level * n), 1-indexed; level 1
/// picks the maximum.
pub fn quantile_threshold(values: &[f64], level: f64) -> f64 {
    assert!(!values.is_empty());
    assert!(level > 0.0 && level <= 1.0, "quantile level out of range");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = (level * sorted.len() as f64).ceil() as usize;
    sorted[k.clamp(1, sorted.len()) - 1]
}

impl DrilProvider {
    /// Clones the expert with dropout active, freezes `ensemble` mask draws,
    /// and calibrates `q` as the `quantile` level of the ensemble
    /// disagreement over the demonstration states.
    #[allow(clippy::too_many_arguments)]
    pub fn pretrain(
        demo_states: &Mat,
        demo_actions: &Mat,
        hidden: &[usize],
        dropout: f64,
        ensemble: usize,
        quantile: f64,
        epochs: usize,
        learning_rate: f64,
        rng: &mut Rng,
    ) -> Result<DrilProvider> {
        if demo_states.rows() == 0 {
            return Err(Error::Empty("dropout-ensemble dataset"));
        }
        if ensemble < 2 {
            return Err(Error::Config(format!("ensemble size must be at least 2, got {ensemble}")));
        }
        if !(quantile > 0.0 && quantile <= 1.0) {
            return Err(Error::Config(format!("quantile level must be in (0, 1], got {quantile}")));
        }
        let mut policy = GaussianPolicy::new(
            demo_states.cols(),
            demo_actions.cols(),
            hidden,
            -2.0,
            dropout,
            rng,
        );
        bc_train(&mut policy, demo_states, demo_actions, epochs, learning_rate, 0.5, rng)?;
        let masks = if dropout > 0.0 {
            (0..ensemble).map(|_| UnitMask::sample(&policy.mean, rng)).collect()
        } else {
            // No dropout: every member is the same network, disagreement is
            // identically zero.
            Vec::new()
        };
        let mut provider = DrilProvider { policy, masks, q: 0.0 };
        let u = provider.uncertainty_batch(demo_states);
        provider.q = quantile_threshold(&u, quantile);
        Ok(provider)
    }

    /// Ensemble disagreement per state: the population variance of the
    /// predicted mean action across masks, summed over action dimensions.
    pub fn uncertainty_batch(&self, states: &Mat) -> Vec<f64> {
        let n = states.rows();
        if self.masks.is_empty() {
            return vec![0.0; n];
        }
        let outs: Vec<Mat> =
            self.masks.iter().map(|m| self.policy.mean.infer_shared_mask(states, m)).collect();
        let e = outs.len() as f64;
        let act_dim = outs[0].cols();
        let mut u = vec![0.0; n];
        for i in 0..n {
            for d in 0..act_dim {
                let mean: f64 = outs.iter().map(|o| o.row(i)[d]).sum::<f64>() / e;
                let var: f64 =
                    outs.iter().map(|o| (o.row(i)[d] - mean).powi(2)).sum::<f64>() / e;
                u[i] += var;
            }
        }
        u
    }
}

/// +1 for disagreement at or below the threshold, -1 above it.
pub fn dril_score(uncertainty: f64, q: f64) -> f64 {
    if uncertainty <= q {
        1.0
    } else {
        -1.0
    }
}

impl RolloutReward for DrilProvider {
    fn rewards_for(&mut self, batch: &RolloutView, _policy: &GaussianPolicy) -> Result<Vec<f64>> {
        let u = self.uncertainty_batch(batch.states);
        Ok(u.into_iter().map(|v| dril_score(v, self.q)).collect())
    }
}
