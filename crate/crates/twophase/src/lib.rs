//! Two-phase training of differentiable models.
//!
//! The library splits optimization into a non-convex phase handled by
//! mini-batch Adam and a convex phase handled by nonlinear conjugate
//! gradient with a golden-section line search. The handover point is
//! detected automatically from the full-batch gradient norm: the norm
//! grows while the loss descends through the non-convex region, peaks,
//! and shrinks once the trajectory enters the convex basin around the
//! minimum. [`SwapDetector`] watches the (smoothed) norm and fires when
//! it drops below a fixed fraction of its running maximum.
//!
//! What lives where:
//!
//! - [`numerics`]: the dense `f64` [`Vector`] and the handful of kernels
//!   every optimizer shares.
//! - [`models`]: differentiable test beds — two 1-D tanh tasks whose loss
//!   landscapes can be scanned exhaustively, a small MLP trained with MSE,
//!   IDX dataset ingestion, and a synthetic image-classification task.
//! - [`objective`]: the loss/gradient evaluation contract plus closed-form
//!   benchmark objectives (quadratics, Rosenbrock).
//! - [`optim`]: Adam, minimum bracketing, golden-section search, and the
//!   conjugate-gradient step/driver.
//! - [`twophase`]: the phase controller itself.
//! - [`diagnostics`]: training traces, evaluation-cost accounting,
//!   curvature probing, and the peak-count audit of the convexity
//!   hypothesis.

pub mod diagnostics;
pub mod models;
pub mod numerics;
pub mod objective;
pub mod optim;
pub mod twophase;

pub use diagnostics::{
    count_peaks, directional_curvature, grad_vs_loss, overdetermination_ratio, ConvexityProbe,
    CostMeter, EvalKind, Phase, TraceRow, TrainingTrace,
};
pub use numerics::Vector;
pub use objective::{BatchObjective, Objective};
pub use twophase::{
    run_baseline, run_baseline_with_params, run_two_phase, run_two_phase_with, smooth,
    BaselineMode, SwapDetector, TrainError, TwoPhaseConfig,
};
