use crate::approx::{clip_global_norm, Adam, GaussianPolicy, Grads, MlpParams};
use crate::error::{Error, Result};
use crate::math::Mat;

use super::buffer::{normalize_advantages, RolloutBuffer};

/// Clipped-surrogate PPO settings. `iterations` full-batch gradient steps are
/// taken per rollout; the per-sample objective is
///   -min(ratio * A, clip(ratio) * A) + value_coef * (V - return)^2
///   - entropy_coef * H(pi)
/// and gradients are clipped to a joint global l2 norm before each step.
#[derive(Clone, Copy, Debug)]
pub struct PpoConfig {
    pub clip_ratio: f64,
    pub iterations: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            clip_ratio: 0.25,
            iterations: 10,
            value_coef: 0.5,
            entropy_coef: 1e-3,
            gamma: 0.99,
            gae_lambda: 0.9,
            max_grad_norm: 0.5,
            normalize_advantages: true,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub grad_norm: f64,
}

/// State-value head: an MLP trained to predict return/scale, multiplied back
/// on read. Adaptive-moment steps move each parameter by roughly the learning
/// rate regardless of gradient size, so a raw head crawls when returns span
/// tens or hundreds of units; the fixed output scale (typically 1/(1-gamma),
/// the accumulation factor of a unit-magnitude reward) restores a tracking
/// speed proportional to the target scale.
#[derive(Clone, Debug)]
pub struct Critic {
    pub net: MlpParams,
    pub scale: f64,
}

impl Critic {
    /// Builds `[obs_dim, hidden.., 1]` with orthogonal init and the given
    /// output-layer gain.
    pub fn new(
        obs_dim: usize,
        hidden: &[usize],
        scale: f64,
        output_gain: f64,
        rng: &mut crate::rng::Rng,
    ) -> Critic {
        assert!(scale > 0.0 && scale.is_finite(), "critic scale must be positive");
        let sizes: Vec<usize> =
            std::iter::once(obs_dim).chain(hidden.iter().copied()).chain([1]).collect();
        Critic { net: MlpParams::init(&sizes, output_gain, 0.0, rng), scale }
    }

    /// Value estimate of a single state.
    pub fn predict1(&self, obs: &[f64]) -> f64 {
        self.net.infer1(obs)[0] * self.scale
    }
}

/// Runs the configured number of full-batch updates on a completed rollout.
/// The policy mean net, log-std vector and critic share one optimiser and
/// one global gradient clip, mirroring the single combined objective.
pub fn ppo_update(
    policy: &mut GaussianPolicy,
    critic: &mut Critic,
    opt: &mut Adam,
    buf: &RolloutBuffer,
    cfg: &PpoConfig,
) -> Result<PpoStats> {
    assert!(buf.is_full(), "PPO update expects a full rollout");
    let adv = if cfg.normalize_advantages {
        normalize_advantages(&buf.advantages[..buf.len()])
    } else {
        buf.advantages[..buf.len()].to_vec()
    };
    let mut stats = PpoStats::default();
    for _ in 0..cfg.iterations {
        let (loss, mut pg, mut dlogstd, mut vg, s) = ppo_batch_grads(
            policy,
            critic,
            &buf.states,
            &buf.actions,
            &buf.log_probs[..buf.len()],
            &adv,
            &buf.returns[..buf.len()],
            cfg,
        );
        if !loss.is_finite() {
            return Err(Error::NonFinite("ppo loss".into()));
        }
        stats = s;
        {
            let mut gslices = pg.slices_mut();
            gslices.push(dlogstd.as_mut_slice());
            gslices.extend(vg.slices_mut());
            stats.grad_norm = clip_global_norm(&mut gslices, cfg.max_grad_norm);
        }
        let mut pslices = policy.mean.param_slices_mut();
        pslices.push(policy.log_std.as_mut_slice());
        pslices.extend(critic.net.param_slices_mut());
        let mut gslices: Vec<&[f64]> = pg.slices();
        gslices.push(dlogstd.as_slice());
        gslices.extend(vg.slices());
        opt.step(&mut pslices, &gslices)?;
    }
    Ok(stats)
}

/// One full-batch gradient evaluation. Returns the scalar loss, gradients for
/// the policy mean net, the log-std vector and the critic net, plus stats.
/// Public so the analytic gradients can be checked against finite differences
/// of the loss without stepping an optimiser.
#[allow(clippy::too_many_arguments)]
pub fn ppo_batch_grads(
    policy: &GaussianPolicy,
    critic: &Critic,
    states: &Mat,
    actions: &Mat,
    old_log_probs: &[f64],
    advantages: &[f64],
    returns: &[f64],
    cfg: &PpoConfig,
) -> (f64, Grads, Vec<f64>, Grads, PpoStats) {
    let b = states.rows();
    let act_dim = policy.act_dim();
    assert_eq!(actions.rows(), b);
    assert_eq!(old_log_probs.len(), b);
    assert_eq!(advantages.len(), b);
    assert_eq!(returns.len(), b);
    let inv_b = 1.0 / b as f64;

    let mean_cache = policy.mean.forward(states, None);
    let value_cache = critic.net.forward(states, None);
    let std: Vec<f64> = policy.std();
    let var: Vec<f64> = std.iter().map(|s| s * s).collect();

    let mut d_mean = Mat::zeros(b, act_dim);
    let mut dlogstd = vec![0.0; act_dim];
    let mut d_value = Mat::zeros(b, 1);
    let mut policy_loss = 0.0;
    let mut value_loss = 0.0;

    for i in 0..b {
        let mu = mean_cache.output.row(i);
        let a = actions.row(i);
        let mut logp = 0.0;
        for d in 0..act_dim {
            let z = (a[d] - mu[d]) / std[d];
            logp -= 0.5 * (z * z + crate::approx::LOG_2PI) + policy.log_std[d];
        }
        let ratio = (logp - old_log_probs[i]).exp();
        let adv = advantages[i];
        let clipped = ratio.clamp(1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio);
        let surr_un = ratio * adv;
        let surr_cl = clipped * adv;
        policy_loss -= surr_un.min(surr_cl) * inv_b;
        // The min gate: gradient flows through the unclipped branch when it
        // is the active one; the clipped branch has zero derivative wherever
        // it is active and differs.
        let d_logp = if surr_un <= surr_cl { -adv * ratio * inv_b } else { 0.0 };
        for d in 0..act_dim {
            let diff = a[d] - mu[d];
            // dlogp/dmu = (a - mu)/var, dlogp/dlogstd = diff^2/var - 1.
            d_mean.row_mut(i)[d] = d_logp * diff / var[d];
            dlogstd[d] += d_logp * (diff * diff / var[d] - 1.0);
        }
        // The head predicts return/scale; the loss is stated in value units,
        // so the chain rule puts one factor of scale into the gradient.
        let v = value_cache.output.row(i)[0] * critic.scale;
        let err = v - returns[i];
        value_loss += cfg.value_coef * err * err * inv_b;
        d_value.row_mut(i)[0] = 2.0 * cfg.value_coef * err * critic.scale * inv_b;
    }
    let entropy = policy.entropy();
    for d in dlogstd.iter_mut() {
        *d -= cfg.entropy_coef;
    }
    let loss = policy_loss + value_loss - cfg.entropy_coef * entropy;

    let (pg, _) = policy.mean.backward(&mean_cache, &d_mean);
    let (vg, _) = critic.net.backward(&value_cache, &d_value);
    let stats = PpoStats { policy_loss, value_loss, entropy, grad_norm: 0.0 };
    (loss, pg, dlogstd, vg, stats)
}
