use crate::approx::{clip_global_norm, Adam, DropoutDraw, GaussianPolicy, Grads, LOG_2PI};
use crate::error::{Error, Result};
use crate::math::Mat;
use crate::rng::Rng;

/// Mean negative log-likelihood of the expert actions under the Gaussian
/// policy, with gradients for the mean network and the log-std vector.
/// A dropout draw (one mask row per sample) makes this the ensemble-training
/// objective; `None` is plain behavioural cloning.
pub fn bc_nll_grads(
    policy: &GaussianPolicy,
    states: &Mat,
    actions: &Mat,
    draw: Option<&DropoutDraw>,
) -> (f64, Grads, Vec<f64>) {
    let b = states.rows();
    assert_eq!(actions.rows(), b);
    assert!(b > 0, "empty cloning batch");
    let act_dim = policy.act_dim();
    let inv_b = 1.0 / b as f64;
    let cache = policy.mean.forward(states, draw);
    let std = policy.std();

    let mut nll = 0.0;
    let mut d_mean = Mat::zeros(b, act_dim);
    let mut dlogstd = vec![0.0; act_dim];
    for i in 0..b {
        let mu = cache.output.row(i);
        let a = actions.row(i);
        for d in 0..act_dim {
            let z = (a[d] - mu[d]) / std[d];
            nll += (0.5 * (z * z + LOG_2PI) + policy.log_std[d]) * inv_b;
            // d(nll)/d(mu) = -z/std, d(nll)/d(log_std) = 1 - z^2, per sample.
            d_mean.row_mut(i)[d] = -z / std[d] * inv_b;
            dlogstd[d] += (1.0 - z * z) * inv_b;
        }
    }
    let (grads, _) = policy.mean.backward(&cache, &d_mean);
    (nll, grads, dlogstd)
}

/// Full-batch maximum-likelihood fitting of the policy to demonstration
/// pairs. When the mean network carries dropout, a fresh mask is drawn each
/// epoch from `rng`. Returns the per-epoch loss curve.
pub fn bc_train(
    policy: &mut GaussianPolicy,
    states: &Mat,
    actions: &Mat,
    epochs: usize,
    learning_rate: f64,
    max_grad_norm: f64,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    if states.rows() == 0 {
        return Err(Error::Empty("behavioural cloning dataset"));
    }
    let mut opt = Adam::new(learning_rate);
    let mut curve = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let draw = if policy.mean.dropout > 0.0 {
            Some(DropoutDraw::sample(&policy.mean, states.rows(), rng))
        } else {
            None
        };
        let (loss, mut grads, mut dlogstd) = bc_nll_grads(policy, states, actions, draw.as_ref());
        if !loss.is_finite() {
            return Err(Error::NonFinite("cloning loss".into()));
        }
        curve.push(loss);
        {
            let mut gs = grads.slices_mut();
            gs.push(dlogstd.as_mut_slice());
            clip_global_norm(&mut gs, max_grad_norm);
        }
        let mut ps = policy.mean.param_slices_mut();
        ps.push(policy.log_std.as_mut_slice());
        let mut gs: Vec<&[f64]> = grads.slices();
        gs.push(dlogstd.as_slice());
        opt.step(&mut ps, &gs)?;
    }
    Ok(curve)
}
