use crate::error::{Error, Result};

/// Adam with bias correction. Moment buffers are laid out to mirror whatever
/// parameter slices the caller passes; the slice structure must be identical
/// on every step.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: Vec::new(), v: Vec::new() }
    }

    /// One update step. Errors out (leaving parameters untouched) if any
    /// gradient entry is non-finite.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        assert_eq!(params.len(), grads.len(), "param/grad slice count mismatch");
        for (p, g) in params.iter().zip(grads) {
            assert_eq!(p.len(), g.len(), "param/grad slice length mismatch");
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("optimizer gradients".into()));
            }
        }
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = grads.iter().map(|g| vec![0.0; g.len()]).collect();
        }
        assert_eq!(self.m.len(), grads.len(), "optimizer state shape changed");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in
            params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Scales gradients in place so their joint l2 norm is at most `max_norm`;
/// returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let mut sq = 0.0;
    for g in grads.iter() {
        for v in g.iter() {
            sq += v * v;
        }
    }
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            for v in g.iter_mut() {
                *v *= scale;
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_each_weight_by_about_lr() {
        let mut opt = Adam::new(1e-3);
        let mut p = vec![1.0, -2.0, 0.5];
        let g = vec![10.0, -0.2, 1e-4];
        opt.step(&mut [&mut p], &[&g]).unwrap();
        // With fresh moments, m_hat = g and v_hat = g^2, so the step is
        // lr * sign(g) up to the eps regulariser.
        assert!((p[0] - (1.0 - 1e-3)).abs() < 1e-6);
        assert!((p[1] - (-2.0 + 1e-3)).abs() < 1e-6);
        assert!((p[2] - (0.5 - 1e-3)).abs() < 1e-4);
    }

    #[test]
    fn non_finite_gradients_are_rejected() {
        let mut opt = Adam::new(1e-3);
        let mut p = vec![1.0];
        let g = vec![f64::NAN];
        let err = opt.step(&mut [&mut p], &[&g]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert_eq!(p[0], 1.0, "parameters must be untouched on failure");
    }

    #[test]
    fn clip_rescales_only_above_threshold() {
        // Norm 10 vector clipped to 0.5 is scaled by 0.05.
        let mut a = vec![6.0];
        let mut b = vec![8.0];
        let norm = clip_global_norm(&mut [&mut a, &mut b], 0.5);
        assert!((norm - 10.0).abs() < 1e-12);
        assert!((a[0] - 0.3).abs() < 1e-12);
        assert!((b[0] - 0.4).abs() < 1e-12);

        let mut c = vec![0.1, 0.2];
        let norm = clip_global_norm(&mut [&mut c], 0.5);
        assert!(norm < 0.5);
        assert_eq!(c, vec![0.1, 0.2], "below-threshold gradients unchanged");
    }
}
