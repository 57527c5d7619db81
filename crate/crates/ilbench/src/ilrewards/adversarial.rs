use crate::approx::{log_prob_parts, Adam, GaussianPolicy, Grads, MlpParams};
use crate::error::{Error, Result};
use crate::math::Mat;
use crate::rlcore::{RolloutReward, RolloutView};
use crate::rng::Rng;

use super::{Algo, ImitationReplay, Normalizer, ReplayBatch};

/// Numerically stable sigmoid.
pub fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// The forward variant of the logit reward: -h * e^h. Peaks at 1/e for
/// h = -1, negative for every positive logit.
pub fn fairl_reward(h: f64) -> f64 {
    -h * h.exp()
}

/// Batched log-density of the current policy at given raw state/action rows.
pub fn policy_logp_batch(policy: &GaussianPolicy, states: &Mat, actions: &Mat) -> Vec<f64> {
    let mu = policy.mean_batch(states);
    (0..states.rows())
        .map(|i| log_prob_parts(mu.output.row(i), &policy.log_std, actions.row(i)))
        .collect()
}

/// Discriminator body. The plain form maps a normalised (state, action) row
/// straight to a logit. The structured form assembles the logit from a
/// reward head g(s, a), a shaping head h(s) combined across the transition
/// as g + gamma * h(s') - h(s), minus the current policy's log-density.
#[derive(Clone, Debug)]
pub enum DiscModel {
    Plain(MlpParams),
    Structured { g: MlpParams, h: MlpParams, gamma: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct DiscConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub r1_coef: f64,
    pub reward_cap: f64,
}

impl Default for DiscConfig {
    fn default() -> Self {
        DiscConfig { learning_rate: 3e-4, epochs: 5, r1_coef: 0.5, reward_cap: 10.0 }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct DiscStats {
    pub bce: f64,
    pub r1: f64,
    pub loss: f64,
}

/// Everything one side (expert or agent) contributes to a training pass:
/// normalised inputs, and for the structured form the policy log-density and
/// its input-gradient in normalised coordinates (constant while the
/// discriminator trains).
struct Side {
    sa: Mat,
    s: Mat,
    s2: Mat,
    logp: Vec<f64>,
    polgrad: Mat,
}

/// One adversarial reward provider: discriminator, its optimiser, the
/// expert demonstrations and a replay of recent agent rollouts. Scoring a
/// rollout first trains the discriminator on the whole replay.
pub struct AdversarialProvider {
    pub algo: Algo,
    pub model: DiscModel,
    pub norm: Normalizer,
    pub replay: ImitationReplay,
    pub cfg: DiscConfig,
    opt: Adam,
    expert: ReplayBatch,
}

impl AdversarialProvider {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        algo: Algo,
        demo_states: &Mat,
        demo_actions: &Mat,
        demo_next_states: &Mat,
        hidden: &[usize],
        gamma: f64,
        cfg: DiscConfig,
        replay_multiplier: usize,
        rng: &mut Rng,
    ) -> Result<AdversarialProvider> {
        if demo_states.rows() == 0 {
            return Err(Error::Empty("adversarial demonstration set"));
        }
        let norm = Normalizer::fit(demo_states, demo_actions);
        let (ds, da) = (demo_states.cols(), demo_actions.cols());
        let pair_sizes: Vec<usize> =
            std::iter::once(ds + da).chain(hidden.iter().copied()).chain([1]).collect();
        let model = match algo {
            Algo::Gail | Algo::Fairl => DiscModel::Plain(MlpParams::init(&pair_sizes, 0.01, 0.0, rng)),
            Algo::Airl => {
                let state_sizes: Vec<usize> =
                    std::iter::once(ds).chain(hidden.iter().copied()).chain([1]).collect();
                DiscModel::Structured {
                    g: MlpParams::init(&pair_sizes, 0.01, 0.0, rng),
                    h: MlpParams::init(&state_sizes, 0.01, 0.0, rng),
                    gamma,
                }
            }
            other => {
                return Err(Error::Config(format!("{} is not an adversarial algorithm", other.name())))
            }
        };
        Ok(AdversarialProvider {
            algo,
            model,
            norm,
            replay: ImitationReplay::new(replay_multiplier)?,
            cfg,
            opt: Adam::new(cfg.learning_rate),
            expert: ReplayBatch {
                states: demo_states.clone(),
                actions: demo_actions.clone(),
                next_states: demo_next_states.clone(),
            },
        })
    }

    fn prep_side(&self, batch: &ReplayBatch, policy: &GaussianPolicy) -> Side {
        let sa = self.norm.norm_pairs(&batch.states, &batch.actions);
        let (s, s2, logp, polgrad) = if matches!(self.model, DiscModel::Structured { .. }) {
            let s = self.norm.norm_states(&batch.states);
            let s2 = self.norm.norm_states(&batch.next_states);
            let (logp, polgrad) = policy_input_grads(policy, batch, &self.norm);
            (s, s2, logp, polgrad)
        } else {
            (Mat::zeros(0, 0), Mat::zeros(0, 0), Vec::new(), Mat::zeros(0, 0))
        };
        Side { sa, s, s2, logp, polgrad }
    }

    /// Training loss and parameter gradients for one full-batch pass of the
    /// demonstrations against `agent`, without stepping the optimiser: binary
    /// cross-entropy plus the input-gradient penalty on the expert side. The
    /// gradient list holds one entry per network (pair net, then the state
    /// net for the structured form). Public so the analytic gradients can be
    /// checked against finite differences of the loss.
    pub fn loss_and_grads(
        &self,
        agent_batch: &ReplayBatch,
        policy: &GaussianPolicy,
    ) -> (DiscStats, Vec<Grads>) {
        let expert = self.prep_side(&self.expert, policy);
        let agent = self.prep_side(agent_batch, policy);
        self.sided_loss_grads(&expert, &agent)
    }

    fn sided_loss_grads(&self, expert: &Side, agent: &Side) -> (DiscStats, Vec<Grads>) {
        match &self.model {
            DiscModel::Plain(net) => {
                let (s, g) = plain_loss_grads(net, &expert.sa, &agent.sa, self.cfg.r1_coef);
                (s, vec![g])
            }
            DiscModel::Structured { g, h, gamma } => {
                let (s, gg, gh) =
                    structured_loss_grads(g, h, *gamma, expert, agent, self.cfg.r1_coef);
                (s, vec![gg, gh])
            }
        }
    }

    /// Full-batch training on the demonstrations versus the entire replay,
    /// one pass per epoch: binary cross-entropy plus the input-gradient
    /// penalty on the expert side. For the structured form the policy
    /// density is recomputed here against the current policy.
    pub fn disc_train(&mut self, policy: &GaussianPolicy) -> Result<DiscStats> {
        if self.replay.is_empty() {
            return Err(Error::Empty("imitation replay"));
        }
        let agent_batch = self.replay.concatenated();
        let expert = self.prep_side(&self.expert, policy);
        let agent = self.prep_side(&agent_batch, policy);
        let mut stats = DiscStats::default();
        for _ in 0..self.cfg.epochs {
            let (s, mut grads) = self.sided_loss_grads(&expert, &agent);
            if !s.loss.is_finite() {
                return Err(Error::NonFinite("discriminator loss".into()));
            }
            stats = s;
            let gslices: Vec<&[f64]> = grads.iter().flat_map(|g| g.slices()).collect();
            let mut pslices = match &mut self.model {
                DiscModel::Plain(net) => net.param_slices_mut(),
                DiscModel::Structured { g, h, .. } => {
                    let mut ps = g.param_slices_mut();
                    ps.extend(h.param_slices_mut());
                    ps
                }
            };
            self.opt.step(&mut pslices, &gslices)?;
            drop(pslices);
            let _ = &mut grads;
        }
        Ok(stats)
    }

    /// Discriminator logits for raw transitions under the current policy.
    pub fn logits(
        &self,
        states: &Mat,
        actions: &Mat,
        next_states: &Mat,
        policy: &GaussianPolicy,
    ) -> Vec<f64> {
        match &self.model {
            DiscModel::Plain(net) => {
                let sa = self.norm.norm_pairs(states, actions);
                let out = net.infer(&sa);
                (0..sa.rows()).map(|i| out.row(i)[0]).collect()
            }
            DiscModel::Structured { g, h, gamma } => {
                let sa = self.norm.norm_pairs(states, actions);
                let s = self.norm.norm_states(states);
                let s2 = self.norm.norm_states(next_states);
                let gv = g.infer(&sa);
                let hv = h.infer(&s);
                let hv2 = h.infer(&s2);
                let logp = policy_logp_batch(policy, states, actions);
                (0..sa.rows())
                    .map(|i| gv.row(i)[0] + gamma * hv2.row(i)[0] - hv.row(i)[0] - logp[i])
                    .collect()
            }
        }
    }

    fn reward_from_logit(&self, u: f64) -> f64 {
        let cap = self.cfg.reward_cap;
        match self.algo {
            Algo::Fairl => fairl_reward(u).clamp(-cap, cap),
            _ => u.clamp(-cap, cap),
        }
    }
}

impl RolloutReward for AdversarialProvider {
    fn rewards_for(&mut self, batch: &RolloutView, policy: &GaussianPolicy) -> Result<Vec<f64>> {
        self.replay.push(ReplayBatch {
            states: batch.states.clone(),
            actions: batch.actions.clone(),
            next_states: batch.next_states.clone(),
        });
        self.disc_train(policy)?;
        let u = self.logits(batch.states, batch.actions, batch.next_states, policy);
        Ok(u.into_iter().map(|v| self.reward_from_logit(v)).collect())
    }
}

/// Log-density of the policy at each raw (s, a) row plus its gradient with
/// respect to the discriminator's normalised (s, a) coordinates (chain rule
/// multiplies the raw gradient by the per-dimension standard deviations).
fn policy_input_grads(
    policy: &GaussianPolicy,
    batch: &ReplayBatch,
    norm: &Normalizer,
) -> (Vec<f64>, Mat) {
    let n = batch.states.rows();
    let (ds, da) = (norm.state_dim(), norm.action_dim());
    let cache = policy.mean.forward(&batch.states, None);
    let std = policy.std();
    let mut logp = Vec::with_capacity(n);
    // w = (a - mu) / sigma^2 is both dlogp/dmu and -dlogp/da.
    let mut w = Mat::zeros(n, da);
    for i in 0..n {
        let mu = cache.output.row(i);
        let a = batch.actions.row(i);
        logp.push(log_prob_parts(mu, &policy.log_std, a));
        for d in 0..da {
            w.row_mut(i)[d] = (a[d] - mu[d]) / (std[d] * std[d]);
        }
    }
    let (_, dstate) = policy.mean.backward(&cache, &w);
    let mut polgrad = Mat::zeros(n, ds + da);
    for i in 0..n {
        let row = polgrad.row_mut(i);
        for d in 0..ds {
            row[d] = dstate.row(i)[d] * norm.state_std[d];
        }
        for d in 0..da {
            row[ds + d] = -w.row(i)[d] * norm.action_std[d];
        }
    }
    (logp, polgrad)
}

/// Shared loss/penalty assembly once per-sample logits and expert-side input
/// gradients are known. Returns the stats plus the derivative of the loss
/// with respect to each expert and agent logit (the R1 part of the expert
/// weights still excludes the second-order path, handled by the callers).
struct LogitTerms {
    stats: DiscStats,
    d_ue: Vec<f64>,
    d_ua: Vec<f64>,
    /// Per-expert-sample weight for the double-backprop direction.
    w2: Vec<f64>,
}

fn logit_terms(ue: &[f64], ua: &[f64], gnorm2: &[f64], r1_coef: f64) -> LogitTerms {
    let (ne, na) = (ue.len() as f64, ua.len() as f64);
    let mut bce = 0.0;
    let mut r1 = 0.0;
    let mut d_ue = Vec::with_capacity(ue.len());
    let mut w2 = Vec::with_capacity(ue.len());
    for (i, &u) in ue.iter().enumerate() {
        bce += softplus(-u) / ne;
        let d = logistic(u);
        let s1 = d * (1.0 - d);
        let s2 = s1 * (1.0 - 2.0 * d);
        r1 += s1 * s1 * gnorm2[i] / ne;
        d_ue.push((d - 1.0) / ne + r1_coef * 2.0 * s1 * s2 * gnorm2[i] / ne);
        w2.push(r1_coef * 2.0 * s1 * s1 / ne);
    }
    let mut d_ua = Vec::with_capacity(ua.len());
    for &u in ua {
        bce += softplus(u) / na;
        d_ua.push(logistic(u) / na);
    }
    let loss = bce + r1_coef * r1;
    LogitTerms { stats: DiscStats { bce, r1, loss }, d_ue, d_ua, w2 }
}

fn column(v: &[f64]) -> Mat {
    Mat::from_vec(v.len(), 1, v.to_vec())
}

fn output_column(m: &Mat) -> Vec<f64> {
    (0..m.rows()).map(|i| m.row(i)[0]).collect()
}

fn plain_loss_grads(net: &MlpParams, xe: &Mat, xa: &Mat, r1_coef: f64) -> (DiscStats, Grads) {
    let (ne, na) = (xe.rows(), xa.rows());
    let ce = net.forward(xe, None);
    let ca = net.forward(xa, None);
    let ue = output_column(&ce.output);
    let ua = output_column(&ca.output);
    // Per-sample input gradients of the logit feed the penalty.
    let ones = Mat::from_vec(ne, 1, vec![1.0; ne]);
    let (_, g_in) = net.backward(&ce, &ones);
    let gnorm2: Vec<f64> =
        (0..ne).map(|i| g_in.row(i).iter().map(|v| v * v).sum()).collect();
    let t = logit_terms(&ue, &ua, &gnorm2, r1_coef);
    let mut grads = Grads::zeros_like(net);
    net.backward_into(&ce, &column(&t.d_ue), &mut grads);
    net.backward_into(&ca, &column(&t.d_ua), &mut grads);
    // Second-order path: d|G|^2/dparams through the tangent of the input
    // gradient in the direction of the gradient itself.
    let jc = net.jvp(&ce, &g_in);
    net.jvp_backward(&ce, &jc, &column(&t.w2), &mut grads);
    let _ = na;
    (t.stats, grads)
}

fn structured_logits_cached(
    g: &MlpParams,
    h: &MlpParams,
    gamma: f64,
    side: &Side,
) -> (crate::approx::ForwardCache, crate::approx::ForwardCache, crate::approx::ForwardCache, Vec<f64>) {
    let cg = g.forward(&side.sa, None);
    let ch = h.forward(&side.s, None);
    let ch2 = h.forward(&side.s2, None);
    let u: Vec<f64> = (0..side.sa.rows())
        .map(|i| {
            cg.output.row(i)[0] + gamma * ch2.output.row(i)[0] - ch.output.row(i)[0] - side.logp[i]
        })
        .collect();
    (cg, ch, ch2, u)
}

fn structured_loss_grads(
    g: &MlpParams,
    h: &MlpParams,
    gamma: f64,
    expert: &Side,
    agent: &Side,
    r1_coef: f64,
) -> (DiscStats, Grads, Grads) {
    let ds = expert.s.cols();
    let ne = expert.sa.rows();
    let (cg_e, ch_e, ch2_e, ue) = structured_logits_cached(g, h, gamma, expert);
    let (cg_a, ch_a, ch2_a, ua) = structured_logits_cached(g, h, gamma, agent);

    // Input gradient of the logit over (s, a): the g head over both blocks,
    // minus the shaping head over the state block, minus the policy term.
    // The h(s') evaluation depends only on s' and contributes nothing.
    let ones = Mat::from_vec(ne, 1, vec![1.0; ne]);
    let (_, gg_in) = g.backward(&cg_e, &ones);
    let (_, gh_in) = h.backward(&ch_e, &ones);
    let mut big_g = gg_in.clone();
    for i in 0..ne {
        let row = big_g.row_mut(i);
        for d in 0..ds {
            row[d] -= gh_in.row(i)[d];
        }
        for (v, p) in row.iter_mut().zip(expert.polgrad.row(i)) {
            *v -= p;
        }
    }
    let gnorm2: Vec<f64> =
        (0..ne).map(|i| big_g.row(i).iter().map(|v| v * v).sum()).collect();
    let t = logit_terms(&ue, &ua, &gnorm2, r1_coef);

    let mut g_grads = Grads::zeros_like(g);
    let mut h_grads = Grads::zeros_like(h);
    // First-order: du/dg parts are 1, du/dh is gamma at s' and -1 at s.
    let scale = |v: &[f64], c: f64| -> Mat { Mat::from_vec(v.len(), 1, v.iter().map(|x| c * x).collect()) };
    g.backward_into(&cg_e, &column(&t.d_ue), &mut g_grads);
    g.backward_into(&cg_a, &column(&t.d_ua), &mut g_grads);
    h.backward_into(&ch2_e, &scale(&t.d_ue, gamma), &mut h_grads);
    h.backward_into(&ch_e, &scale(&t.d_ue, -1.0), &mut h_grads);
    h.backward_into(&ch2_a, &scale(&t.d_ua, gamma), &mut h_grads);
    h.backward_into(&ch_a, &scale(&t.d_ua, -1.0), &mut h_grads);
    // Second-order: tangents in the direction of the full input gradient;
    // the g head sees all of it, the shaping head only the state block with
    // the sign it enters the logit with.
    let jg = g.jvp(&cg_e, &big_g);
    g.jvp_backward(&cg_e, &jg, &column(&t.w2), &mut g_grads);
    let mut gs = Mat::zeros(ne, ds);
    for i in 0..ne {
        gs.row_mut(i).copy_from_slice(&big_g.row(i)[..ds]);
    }
    let jh = h.jvp(&ch_e, &gs);
    h.jvp_backward(&ch_e, &jh, &scale(&t.w2, -1.0), &mut h_grads);
    (t.stats, g_grads, h_grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seed_rng;
    use rand::Rng as _;

    #[test]
    fn logit_reward_recovers_known_odds() {
        // D = 0.5 -> logit 0; D = 0.9 -> logit ln 9 = 2.1972245773362196.
        assert_eq!(logistic(0.0), 0.5);
        assert!((logistic(2.1972245773362196) - 0.9).abs() < 1e-15);
        let ln9 = (0.9f64 / 0.1).ln();
        assert!((ln9 - 2.1972245773362196).abs() < 1e-15);
    }

    #[test]
    fn fairl_peaks_at_minus_one_and_punishes_positive_logits() {
        // Numeric maximisation over a dense grid against the closed form.
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0.0;
        for i in 0..=120_000 {
            let x = -6.0 + i as f64 * 1e-4;
            let v = fairl_reward(x);
            if v > best {
                best = v;
                arg = x;
            }
        }
        let inv_e = (-1.0f64).exp();
        assert!((best - inv_e).abs() < 1e-8);
        assert!((arg + 1.0).abs() < 1e-3);
        assert_eq!(fairl_reward(-1.0), inv_e);
        for h in [0.1, 0.5, 1.0, 4.0] {
            assert!(fairl_reward(h) < 0.0);
        }
    }

    #[test]
    fn reward_grid_signs_and_bounds() {
        // Dense sweep over D in (1e-6, 1 - 1e-6).
        let mut saw_negative_logit = false;
        let mut saw_positive_logit = false;
        for i in 1..10_000 {
            let d = i as f64 / 10_000.0;
            let d = d.clamp(1e-6, 1.0 - 1e-6);
            assert!(d.ln() < 0.0);
            let h = (d / (1.0 - d)).ln();
            saw_negative_logit |= h < 0.0;
            saw_positive_logit |= h > 0.0;
            assert!(fairl_reward(h) <= (-1.0f64).exp() + 1e-15);
        }
        assert!(saw_negative_logit && saw_positive_logit);
        // The logit is unbounded toward both edges.
        let edge = 1e-9f64;
        assert!(((edge / (1.0 - edge)).ln()).abs() > 20.0);
        assert!((((1.0 - edge) / edge).ln()) > 20.0);
    }

    fn blob(center: (f64, f64), n: usize, rng: &mut Rng) -> (Mat, Mat, Mat) {
        let mut states = Mat::zeros(n, 1);
        let mut actions = Mat::zeros(n, 1);
        for i in 0..n {
            states.row_mut(i)[0] = center.0 + rng.gen_range(-0.3..0.3);
            actions.row_mut(i)[0] = center.1 + rng.gen_range(-0.3..0.3);
        }
        let next = states.clone();
        (states, actions, next)
    }

    fn dummy_policy(rng: &mut Rng) -> GaussianPolicy {
        GaussianPolicy::new(1, 1, &[4], -1.0, 0.0, rng)
    }

    #[test]
    fn training_separates_disjoint_clouds() {
        let mut rng = seed_rng(100);
        let (es, ea, en) = blob((2.0, 2.0), 80, &mut rng);
        let (as_, aa, an) = blob((-2.0, -2.0), 80, &mut rng);
        let cfg = DiscConfig { learning_rate: 5e-3, epochs: 200, r1_coef: 0.1, reward_cap: 10.0 };
        let mut provider =
            AdversarialProvider::new(Algo::Gail, &es, &ea, &en, &[16], 0.99, cfg, 1, &mut rng)
                .unwrap();
        provider.replay.push(ReplayBatch { states: as_.clone(), actions: aa.clone(), next_states: an });
        let policy = dummy_policy(&mut rng);
        provider.disc_train(&policy).unwrap();
        let ue = provider.logits(&es, &ea, &es, &policy);
        let ua = provider.logits(&as_, &aa, &as_, &policy);
        let correct = ue.iter().filter(|&&u| u > 0.0).count()
            + ua.iter().filter(|&&u| u < 0.0).count();
        let acc = correct as f64 / 160.0;
        assert!(acc > 0.95, "accuracy {acc}");
    }

    #[test]
    fn identical_distributions_bound_the_cross_entropy() {
        let mut rng = seed_rng(101);
        let (es, ea, en) = blob((0.0, 0.0), 60, &mut rng);
        let cfg = DiscConfig { learning_rate: 3e-3, epochs: 120, r1_coef: 0.1, reward_cap: 10.0 };
        let mut provider =
            AdversarialProvider::new(Algo::Gail, &es, &ea, &en, &[8], 0.99, cfg, 1, &mut rng)
                .unwrap();
        // Agent batch IS the expert batch: every logit contributes
        // softplus(-u) + softplus(u) >= 2 ln 2, no parameters can beat it.
        provider.replay.push(ReplayBatch {
            states: es.clone(),
            actions: ea.clone(),
            next_states: en.clone(),
        });
        let policy = dummy_policy(&mut rng);
        let stats = provider.disc_train(&policy).unwrap();
        assert!(stats.bce >= 2.0 * std::f64::consts::LN_2 - 1e-12);
        let u = provider.logits(&es, &ea, &en, &policy);
        let mean_d: f64 = u.iter().map(|&v| logistic(v)).sum::<f64>() / u.len() as f64;
        assert!((mean_d - 0.5).abs() < 0.05, "mean D {mean_d}");
    }

    #[test]
    fn constant_discriminator_has_zero_penalty() {
        let mut rng = seed_rng(102);
        let (es, ea, _) = blob((1.0, 1.0), 10, &mut rng);
        let (as_, aa, _) = blob((-1.0, -1.0), 10, &mut rng);
        let mut net = MlpParams::init(&[2, 4, 1], 0.01, 0.0, &mut rng);
        for l in &mut net.layers {
            for v in l.w.data_mut() {
                *v = 0.0;
            }
            for v in &mut l.b {
                *v = 0.0;
            }
        }
        let norm = Normalizer::fit(&es, &ea);
        let xe = norm.norm_pairs(&es, &ea);
        let xa = norm.norm_pairs(&as_, &aa);
        let (stats, _) = plain_loss_grads(&net, &xe, &xa, 1.0);
        assert_eq!(stats.r1, 0.0);
    }

    #[test]
    fn plain_gradients_match_finite_differences() {
        let mut rng = seed_rng(103);
        let net = MlpParams::init(&[3, 4, 1], 0.8, 0.0, &mut rng);
        let xe = Mat::from_vec(5, 3, (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let xa = Mat::from_vec(6, 3, (0..18).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let r1_coef = 0.7;
        let (_, grads) = plain_loss_grads(&net, &xe, &xa, r1_coef);
        let h = 1e-5;
        for idx in 0..net.param_count() {
            let mut n = net.clone();
            let orig = n.param_get(idx);
            n.param_set(idx, orig + h);
            let hi = plain_loss_grads(&n, &xe, &xa, r1_coef).0.loss;
            n.param_set(idx, orig - h);
            let lo = plain_loss_grads(&n, &xe, &xa, r1_coef).0.loss;
            let fd = (hi - lo) / (2.0 * h);
            let got = grads.param_get(idx);
            assert!(
                (got - fd).abs() < 1e-6 + 1e-5 * fd.abs().max(got.abs()),
                "param {idx}: {got} vs {fd}"
            );
        }
    }

    fn random_side(n: usize, ds: usize, da: usize, policy: &GaussianPolicy, norm: &Normalizer, rng: &mut Rng) -> Side {
        let states = Mat::from_vec(n, ds, (0..n * ds).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let actions = Mat::from_vec(n, da, (0..n * da).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let next_states =
            Mat::from_vec(n, ds, (0..n * ds).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let batch = ReplayBatch { states, actions, next_states };
        let (logp, polgrad) = policy_input_grads(policy, &batch, norm);
        Side {
            sa: norm.norm_pairs(&batch.states, &batch.actions),
            s: norm.norm_states(&batch.states),
            s2: norm.norm_states(&batch.next_states),
            logp,
            polgrad,
        }
    }

    #[test]
    fn structured_gradients_match_finite_differences() {
        let mut rng = seed_rng(104);
        let (ds, da) = (2, 1);
        let g = MlpParams::init(&[3, 4, 1], 0.8, 0.0, &mut rng);
        let hn = MlpParams::init(&[2, 4, 1], 0.8, 0.0, &mut rng);
        let policy = GaussianPolicy::new(ds, da, &[3], -0.5, 0.0, &mut rng);
        let fit_s = Mat::from_vec(8, ds, (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let fit_a = Mat::from_vec(8, da, (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let norm = Normalizer::fit(&fit_s, &fit_a);
        let expert = random_side(5, ds, da, &policy, &norm, &mut rng);
        let agent = random_side(6, ds, da, &policy, &norm, &mut rng);
        let gamma = 0.9;
        let r1_coef = 0.6;
        let (_, g_grads, h_grads) = structured_loss_grads(&g, &hn, gamma, &expert, &agent, r1_coef);
        let step = 1e-5;
        let loss_at = |g: &MlpParams, h: &MlpParams| {
            structured_loss_grads(g, h, gamma, &expert, &agent, r1_coef).0.loss
        };
        for idx in 0..g.param_count() {
            let mut n = g.clone();
            let orig = n.param_get(idx);
            n.param_set(idx, orig + step);
            let hi = loss_at(&n, &hn);
            n.param_set(idx, orig - step);
            let lo = loss_at(&n, &hn);
            let fd = (hi - lo) / (2.0 * step);
            let got = g_grads.param_get(idx);
            assert!(
                (got - fd).abs() < 1e-6 + 1e-5 * fd.abs().max(got.abs()),
                "g param {idx}: {got} vs {fd}"
            );
        }
        for idx in 0..hn.param_count() {
            let mut n = hn.clone();
            let orig = n.param_get(idx);
            n.param_set(idx, orig + step);
            let hi = loss_at(&g, &n);
            n.param_set(idx, orig - step);
            let lo = loss_at(&g, &n);
            let fd = (hi - lo) / (2.0 * step);
            let got = h_grads.param_get(idx);
            assert!(
                (got - fd).abs() < 1e-6 + 1e-5 * fd.abs().max(got.abs()),
                "h param {idx}: {got} vs {fd}"
            );
        }
    }

    #[test]
    fn structured_identity_scores_zero_when_heads_vanish() {
        // With zeroed g and h heads the logit is exactly -log pi(a|s). Pick
        // log_std so that the density at the mean is 1: each dimension
        // contributes -(log_2pi)/2 - log_std = 0 when log_std = -log_2pi/2.
        let mut rng = seed_rng(105);
        let (es, ea, en) = blob((0.5, 0.5), 6, &mut rng);
        let cfg = DiscConfig::default();
        let mut provider =
            AdversarialProvider::new(Algo::Airl, &es, &ea, &en, &[4], 0.99, cfg, 1, &mut rng)
                .unwrap();
        if let DiscModel::Structured { g, h, .. } = &mut provider.model {
            for net in [g, h] {
                for l in &mut net.layers {
                    for v in l.w.data_mut() {
                        *v = 0.0;
                    }
                    for v in &mut l.b {
                        *v = 0.0;
                    }
                }
            }
        }
        let mut policy = GaussianPolicy::new(1, 1, &[4], 0.0, 0.0, &mut rng);
        for l in &mut policy.mean.layers {
            for v in l.w.data_mut() {
                *v = 0.0;
            }
            for v in &mut l.b {
                *v = 0.0;
            }
        }
        policy.log_std[0] = -0.5 * crate::approx::LOG_2PI;
        // Query at the policy mean (action 0): log pi = 0, so u = 0 and the
        // implied D is exactly one half.
        let q_states = Mat::from_vec(1, 1, vec![0.3]);
        let q_actions = Mat::from_vec(1, 1, vec![0.0]);
        let u = provider.logits(&q_states, &q_actions, &q_states, &policy);
        assert_eq!(u[0], 0.0);
        assert_eq!(logistic(u[0]), 0.5);
        assert_eq!(provider.reward_from_logit(u[0]), 0.0);
    }

    #[test]
    fn structured_logits_track_the_current_policy() {
        let mut rng = seed_rng(106);
        let (es, ea, en) = blob((0.0, 0.0), 12, &mut rng);
        let provider = AdversarialProvider::new(
            Algo::Airl,
            &es,
            &ea,
            &en,
            &[4],
            0.99,
            DiscConfig::default(),
            1,
            &mut rng,
        )
        .unwrap();
        let pol_a = dummy_policy(&mut rng);
        let pol_b = dummy_policy(&mut rng);
        let ua = provider.logits(&es, &ea, &en, &pol_a);
        let ub = provider.logits(&es, &ea, &en, &pol_b);
        assert_ne!(ua, ub);
        // The plain form ignores the policy entirely.
        let plain = AdversarialProvider::new(
            Algo::Gail,
            &es,
            &ea,
            &en,
            &[4],
            0.99,
            DiscConfig::default(),
            1,
            &mut rng,
        )
        .unwrap();
        assert_eq!(plain.logits(&es, &ea, &en, &pol_a), plain.logits(&es, &ea, &en, &pol_b));
    }

    #[test]
    fn rewards_are_capped() {
        let mut rng = seed_rng(107);
        let (es, ea, en) = blob((0.0, 0.0), 4, &mut rng);
        let provider = AdversarialProvider::new(
            Algo::Gail,
            &es,
            &ea,
            &en,
            &[4],
            0.99,
            DiscConfig::default(),
            1,
            &mut rng,
        )
        .unwrap();
        assert_eq!(provider.reward_from_logit(1000.0), 10.0);
        assert_eq!(provider.reward_from_logit(-1000.0), -10.0);
        let fairl = AdversarialProvider::new(
            Algo::Fairl,
            &es,
            &ea,
            &en,
            &[4],
            0.99,
            DiscConfig::default(),
            1,
            &mut rng,
        )
        .unwrap();
        assert_eq!(fairl.reward_from_logit(1000.0), -10.0);
        assert!((fairl.reward_from_logit(-1.0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn scoring_trains_on_a_bounded_replay() {
        let mut rng = seed_rng(108);
        let (es, ea, en) = blob((1.0, 1.0), 20, &mut rng);
        let cfg = DiscConfig { epochs: 2, ..DiscConfig::default() };
        let mut provider =
            AdversarialProvider::new(Algo::Gail, &es, &ea, &en, &[4], 0.99, cfg, 1, &mut rng)
                .unwrap();
        let policy = dummy_policy(&mut rng);
        let push = |tag: f64, provider: &mut AdversarialProvider| {
            let states = Mat::from_vec(8, 1, vec![tag; 8]);
            let actions = Mat::from_vec(8, 1, vec![tag; 8]);
            let next = states.clone();
            let view = RolloutView {
                states: &states,
                actions: &actions,
                next_states: &next,
                dones: &[false; 8],
            };
            provider.rewards_for(&view, &policy).unwrap()
        };
        let r1 = push(0.5, &mut provider);
        assert_eq!(r1.len(), 8);
        push(-0.5, &mut provider);
        // Multiplier 1: only the newest rollout may remain.
        assert_eq!(provider.replay.len(), 1);
        assert_eq!(provider.replay.concatenated().states.row(0)[0], -0.5);
    }
}
