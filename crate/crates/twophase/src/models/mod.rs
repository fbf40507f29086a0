//! Differentiable models and data.
//!
//! The two 1-D tanh tasks have landscapes small enough to scan
//! exhaustively, which is what makes them useful: the convex basin around
//! the minimum, the non-convex shoulders, and (for the two-layer family)
//! the birth of additional local minima are all directly observable. The
//! MLP is the desk-scale stand-in for real architectures, trained with
//! mean squared error against one-hot targets.

mod data;
mod idx;
mod mlp;
mod toy;

pub use data::{synthetic_digits, Dataset, Matrix};
pub use idx::{load_idx, read_idx_raw, write_idx, IdxError};
pub use mlp::{mlp_forward, mlp_loss_grad, Activation, MlpModel};
pub use toy::{
    gen_toy_tasks, toy_loss_grad, twolayer_loss_grad, ToyTanhTask, TwoLayerTask, TWO_LAYER_C_SWEEP,
};
