//! Native control environments: a 2-D point mass (damped double integrator
//! driving to the origin) and the classic underactuated pendulum swing-up.
//! Both use semi-implicit Euler at a fixed 0.05s step, clamp actions to their
//! bounds, and draw all stochasticity from the seeded reset.
//!
//! The true reward is returned by `step`, but only expert-data generation,
//! the PPO-on-true-reward baseline, and evaluation are allowed to consume it;
//! imitation reward providers never see this module's rewards.

use crate::rng::Rng;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub const DT: f64 = 0.05;
pub const HORIZON: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnvKind {
    PointMass,
    Pendulum,
}

impl EnvKind {
    pub fn parse(name: &str) -> Option<EnvKind> {
        match name {
            "pointmass" => Some(EnvKind::PointMass),
            "pendulum" => Some(EnvKind::Pendulum),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvKind::PointMass => "pointmass",
            EnvKind::Pendulum => "pendulum",
        }
    }
}

/// Static description of an environment's interface.
#[derive(Clone, Debug)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub action_low: f64,
    pub action_high: f64,
    pub horizon: usize,
}

impl EnvSpec {
    pub fn new(kind: EnvKind) -> EnvSpec {
        match kind {
            EnvKind::PointMass => EnvSpec {
                kind,
                obs_dim: 4,
                act_dim: 2,
                action_low: -1.0,
                action_high: 1.0,
                horizon: HORIZON,
            },
            EnvKind::Pendulum => EnvSpec {
                kind,
                obs_dim: 3,
                act_dim: 1,
                action_low: -2.0,
                action_high: 2.0,
                horizon: HORIZON,
            },
        }
    }
}

/// A single environment instance. `reset` must be called before `step`;
/// stepping a finished episode is a programming error and panics.
#[derive(Clone, Debug)]
pub struct Env {
    spec: EnvSpec,
    /// Physical state: [px, py, vx, vy] or [theta, omega].
    state: Vec<f64>,
    steps: usize,
    alive: bool,
}

const POINT_START_BOX: f64 = 1.0;
const POINT_DAMPING: f64 = 1.0;
const POINT_MAX_SPEED: f64 = 2.0;
const ACTION_COST: f64 = 0.01;
const PEND_G: f64 = 10.0;
const PEND_M: f64 = 1.0;
const PEND_L: f64 = 1.0;
const PEND_MAX_SPEED: f64 = 8.0;

impl Env {
    pub fn new(kind: EnvKind) -> Env {
        Env { spec: EnvSpec::new(kind), state: Vec::new(), steps: 0, alive: false }
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn is_done(&self) -> bool {
        !self.alive
    }

    /// Starts a new episode and returns the initial observation.
    pub fn reset(&mut self, rng: &mut Rng) -> Vec<f64> {
        self.state = match self.spec.kind {
            EnvKind::PointMass => vec![
                rng.gen_range(-POINT_START_BOX..=POINT_START_BOX),
                rng.gen_range(-POINT_START_BOX..=POINT_START_BOX),
                0.0,
                0.0,
            ],
            EnvKind::Pendulum => vec![
                rng.gen_range(-std::f64::consts::PI..=std::f64::consts::PI),
                rng.gen_range(-1.0..=1.0),
            ],
        };
        self.steps = 0;
        self.alive = true;
        self.observe()
    }

    /// Places the environment in an exact physical state (for tests).
    pub fn reset_to(&mut self, state: &[f64]) -> Vec<f64> {
        let expect = match self.spec.kind {
            EnvKind::PointMass => 4,
            EnvKind::Pendulum => 2,
        };
        assert_eq!(state.len(), expect, "physical state dimension mismatch");
        self.state = state.to_vec();
        self.steps = 0;
        self.alive = true;
        self.observe()
    }

    /// Advances one step; returns (observation, true reward, done). Actions
    /// are clamped to the spec bounds before use.
    pub fn step(&mut self, action: &[f64]) -> (Vec<f64>, f64, bool) {
        assert!(self.alive, "step called before reset or after episode end");
        assert_eq!(action.len(), self.spec.act_dim, "action dimension mismatch");
        let lo = self.spec.action_low;
        let hi = self.spec.action_high;
        let a: Vec<f64> = action.iter().map(|v| v.clamp(lo, hi)).collect();

        let reward = match self.spec.kind {
            EnvKind::PointMass => {
                let (px, py, vx, vy) = (self.state[0], self.state[1], self.state[2], self.state[3]);
                let r = -(px * px + py * py) - ACTION_COST * (a[0] * a[0] + a[1] * a[1]);
                // Unit mass with viscous drag -c*v; velocity first, then
                // position (semi-implicit). The drag makes the plant
                // open-loop stable, so bounded forces give bounded orbits.
                let drag = 1.0 - POINT_DAMPING * DT;
                let nvx = (drag * vx + a[0] * DT).clamp(-POINT_MAX_SPEED, POINT_MAX_SPEED);
                let nvy = (drag * vy + a[1] * DT).clamp(-POINT_MAX_SPEED, POINT_MAX_SPEED);
                self.state = vec![px + nvx * DT, py + nvy * DT, nvx, nvy];
                r
            }
            EnvKind::Pendulum => {
                let (theta, omega) = (self.state[0], self.state[1]);
                let t = angle_normalize(theta);
                let r = -(t * t + 0.1 * omega * omega + 0.001 * a[0] * a[0]);
                let accel = 3.0 * PEND_G / (2.0 * PEND_L) * theta.sin()
                    + 3.0 / (PEND_M * PEND_L * PEND_L) * a[0];
                let nomega = (omega + accel * DT).clamp(-PEND_MAX_SPEED, PEND_MAX_SPEED);
                self.state = vec![theta + nomega * DT, nomega];
                r
            }
        };

        self.steps += 1;
        if self.steps >= self.spec.horizon {
            self.alive = false;
        }
        (self.observe(), reward, !self.alive)
    }

    fn observe(&self) -> Vec<f64> {
        match self.spec.kind {
            EnvKind::PointMass => self.state.clone(),
            EnvKind::Pendulum => vec![self.state[0].cos(), self.state[0].sin(), self.state[1]],
        }
    }
}

/// Wraps an angle into (-pi, pi].
fn angle_normalize(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut t = (theta + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if t == -std::f64::consts::PI {
        t = std::f64::consts::PI;
    }
    t
}
