use crate::math::{mean, std_dev, Mat};

/// Fixed-capacity on-policy rollout storage as parallel arrays. A buffer may
/// span several episode boundaries; `dones` marks transitions that ended an
/// episode. `next_values` holds the critic's estimate for each transition's
/// successor state — zero when that successor is a true absorbing terminal,
/// the estimate of the pre-reset final state when an episode merely hit its
/// time limit. Advantages and returns are filled in by `compute_gae`.
#[derive(Clone, Debug)]
pub struct RolloutBuffer {
    pub states: Mat,
    pub actions: Mat,
    pub next_states: Mat,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub values: Vec<f64>,
    pub next_values: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    capacity: usize,
    len: usize,
}

impl RolloutBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Self {
        assert!(capacity > 0, "rollout capacity must be positive");
        RolloutBuffer {
            states: Mat::zeros(capacity, obs_dim),
            actions: Mat::zeros(capacity, act_dim),
            next_states: Mat::zeros(capacity, obs_dim),
            rewards: vec![0.0; capacity],
            dones: vec![false; capacity],
            values: vec![0.0; capacity],
            next_values: vec![0.0; capacity],
            log_probs: vec![0.0; capacity],
            advantages: vec![0.0; capacity],
            returns: vec![0.0; capacity],
            capacity,
            len: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_full(&self) -> bool {
        self.len == self.capacity
    }

    pub fn clear(&mut self) {
        self.len = 0;
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        state: &[f64],
        action: &[f64],
        reward: f64,
        done: bool,
        value: f64,
        next_value: f64,
        log_prob: f64,
        next_state: &[f64],
    ) {
        assert!(self.len < self.capacity, "rollout buffer overflow");
        let i = self.len;
        self.states.row_mut(i).copy_from_slice(state);
        self.actions.row_mut(i).copy_from_slice(action);
        self.next_states.row_mut(i).copy_from_slice(next_state);
        self.rewards[i] = reward;
        self.dones[i] = done;
        self.values[i] = value;
        self.next_values[i] = next_value;
        self.log_probs[i] = log_prob;
        self.len += 1;
    }

    /// Fills `advantages` and `returns` from the stored rewards and values.
    pub fn compute_gae(&mut self, gamma: f64, lambda: f64) {
        assert!(self.is_full(), "GAE expects a full buffer");
        let (adv, ret) = gae(
            &self.rewards[..self.len],
            &self.values[..self.len],
            &self.next_values[..self.len],
            &self.dones[..self.len],
            gamma,
            lambda,
        );
        self.advantages[..self.len].copy_from_slice(&adv);
        self.returns[..self.len].copy_from_slice(&ret);
    }
}

/// Generalised advantage estimation by backward recursion:
/// delta_t = r_t + gamma * next_values[t] - values[t] and
/// A_t = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}, so the trace
/// restarts at episode ends while each delta still bootstraps with whatever
/// successor value the caller stored (zero for an absorbing terminal, the
/// critic's estimate for a time-limit truncation or a buffer boundary).
/// Returns are advantages plus values.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    next_values: &[f64],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert_eq!(values.len(), n, "values length mismatch");
    assert_eq!(next_values.len(), n, "next values length mismatch");
    assert_eq!(dones.len(), n, "dones length mismatch");
    let mut adv = vec![0.0; n];
    let mut carry = 0.0;
    for t in (0..n).rev() {
        let delta = rewards[t] + gamma * next_values[t] - values[t];
        carry = if dones[t] { delta } else { delta + gamma * lambda * carry };
        adv[t] = carry;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// Shifts and scales to zero mean and unit (population) standard deviation.
/// Constant inputs map to all zeros rather than dividing by ~0.
pub fn normalize_advantages(xs: &[f64]) -> Vec<f64> {
    if xs.is_empty() {
        return Vec::new();
    }
    let m = mean(xs);
    let s = std_dev(xs);
    if s < 1e-8 {
        return vec![0.0; xs.len()];
    }
    xs.iter().map(|x| (x - m) / s).collect()
}
