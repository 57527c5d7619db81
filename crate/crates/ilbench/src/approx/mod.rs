//! Function approximation: a small tanh MLP with hand-written reverse-mode
//! gradients, orthogonal initialisation, Adam, and a diagonal-Gaussian policy
//! head. Everything is f64 and allocation-explicit; there is no autograd
//! framework underneath.

mod adam;
mod init;
mod mlp;
mod policy;

pub use adam::{clip_global_norm, Adam};
pub use init::orthogonal;
pub use mlp::{DropoutDraw, ForwardCache, Grads, JvpCache, Layer, LayerGrads, MlpParams, UnitMask};
pub use policy::{log_prob_parts, GaussianPolicy, LOG_2PI};
