use std::collections::HashSet;

use crate::approx::GaussianPolicy;
use crate::error::Result;
use crate::math::Mat;
use crate::rlcore::{RolloutReward, RolloutView};

use super::kernels::{kernel_matrix, median_heuristic};
use super::Normalizer;

/// Fixed two-bandwidth kernel configuration. `sigma1` comes from the median
/// of pairwise squared distances over the expert and initial-policy points
/// together; `sigma2` from the median of plain pairwise distances between
/// expert points only. Both divide the squared distance in the kernel.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct KernelConfig {
    pub sigma1: f64,
    pub sigma2: f64,
    pub self_similarity: bool,
}

/// Set union of the rows of two matrices, first occurrence kept, exact
/// bit-pattern equality. Keeps the bandwidth well-defined when the two
/// sample sets overlap or coincide.
fn row_union(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.cols(), b.cols());
    let d = a.cols();
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut rows: Vec<f64> = Vec::new();
    let mut n = 0;
    for m in [a, b] {
        for i in 0..m.rows() {
            let key: Vec<u64> = m.row(i).iter().map(|v| v.to_bits()).collect();
            if seen.insert(key) {
                rows.extend_from_slice(m.row(i));
                n += 1;
            }
        }
    }
    Mat::from_vec(n, d, rows)
}

pub fn gmmil_init(
    expert_points: &Mat,
    initial_policy_points: &Mat,
    self_similarity: bool,
) -> Result<KernelConfig> {
    let union = row_union(expert_points, initial_policy_points);
    let sigma1 = median_heuristic(&union, true)?;
    let sigma2 = median_heuristic(expert_points, false)?;
    Ok(KernelConfig { sigma1, sigma2, self_similarity })
}

/// Reward for each query point: mean kernel similarity to the expert batch,
/// minus (when self-similarity is on) mean similarity to the agent batch.
pub fn gmmil_rewards(queries: &Mat, expert: &Mat, agent: &Mat, cfg: &KernelConfig) -> Vec<f64> {
    assert!(expert.rows() > 0 && agent.rows() > 0, "empty kernel batch");
    let ke = kernel_matrix(queries, expert, cfg.sigma1, cfg.sigma2);
    let inv_m = 1.0 / expert.rows() as f64;
    let mut out: Vec<f64> =
        (0..queries.rows()).map(|i| ke.row(i).iter().sum::<f64>() * inv_m).collect();
    if cfg.self_similarity {
        let ka = kernel_matrix(queries, agent, cfg.sigma1, cfg.sigma2);
        let inv_n = 1.0 / agent.rows() as f64;
        for (i, v) in out.iter_mut().enumerate() {
            *v -= ka.row(i).iter().sum::<f64>() * inv_n;
        }
    }
    out
}

/// Nonparametric kernel-similarity reward with bandwidths frozen at
/// initialisation. Each rollout is scored against the expert set, using the
/// rollout itself as the agent batch.
#[derive(Clone, Debug)]
pub struct GmmilProvider {
    norm: Normalizer,
    expert: Mat,
    pub cfg: KernelConfig,
}

impl GmmilProvider {
    /// `initial_*` is a rollout from the untrained policy; it only
    /// contributes to the first bandwidth.
    pub fn new(
        demo_states: &Mat,
        demo_actions: &Mat,
        initial_states: &Mat,
        initial_actions: &Mat,
        self_similarity: bool,
    ) -> Result<GmmilProvider> {
        let norm = Normalizer::fit(demo_states, demo_actions);
        let expert = norm.norm_pairs(demo_states, demo_actions);
        let initial = norm.norm_pairs(initial_states, initial_actions);
        let cfg = gmmil_init(&expert, &initial, self_similarity)?;
        Ok(GmmilProvider { norm, expert, cfg })
    }
}

impl RolloutReward for GmmilProvider {
    fn rewards_for(&mut self, batch: &RolloutView, _policy: &GaussianPolicy) -> Result<Vec<f64>> {
        let points = self.norm.norm_pairs(batch.states, batch.actions);
        Ok(gmmil_rewards(&points, &self.expert, &points, &self.cfg))
    }
}
