//! Imitation-learning benchmark suite: behavioural cloning, three adversarial
//! discriminator variants, kernel, support-estimation and ensemble-uncertainty
//! rewards, all trained by one PPO implementation on small native control
//! environments and scored under one evaluation protocol.

pub mod approx;
pub mod dataset;
pub mod envsim;
pub mod error;
pub mod harness;
pub mod ilrewards;
pub mod math;
pub mod rlcore;
pub mod rng;

pub use error::{Error, Result};
