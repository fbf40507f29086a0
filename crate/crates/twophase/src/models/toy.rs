//! 1-D tanh toy tasks.
//!
//! Both tasks expose a scalar-parameter square loss whose entire landscape
//! can be plotted or grid-scanned, so claims about convex and non-convex
//! regions can be checked by brute force. `ToyTanhTask` is a bank of
//! identical tanh units with a scaling parameter `p`; `TwoLayerTask`
//! stacks a second tanh layer with a mixing weight `C` that controls how
//! many local minima the landscape has.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mixing weights used by the two-layer landscape sweep. The low end has
/// a single inner convex region; by 0.55 additional local minima exist.
pub const TWO_LAYER_C_SWEEP: [f64; 5] = [0.40, 0.45, 0.50, 0.55, 0.60];

/// Single nonlinear layer of `units` identical tanh units:
/// `y(p) = units * tanh(p * x)`, square loss against the reference `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyTanhTask {
    /// Input argument, drawn from (-0.5, 0.5).
    pub x: f64,
    /// Reference output, drawn from (0, 1).
    pub r: f64,
    /// Number of tanh units.
    pub units: u32,
}

impl ToyTanhTask {
    pub fn new(x: f64, r: f64, units: u32) -> Self {
        assert!(units >= 1, "ToyTanhTask: units must be positive");
        ToyTanhTask { x, r, units }
    }
}

/// Two stacked tanh layers with a second output branch weighted by `c`:
/// `h = tanh(p * x)`, `y = tanh(h) + c * tanh(-2h)`, square loss against
/// `r`. The scaling parameter `p` plays the same role as in
/// [`ToyTanhTask`] so both families share one 1-D landscape interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLayerTask {
    pub x: f64,
    pub r: f64,
    /// Weight of the second output branch.
    pub c: f64,
}

impl TwoLayerTask {
    pub fn new(x: f64, r: f64, c: f64) -> Self {
        assert!(c.is_finite(), "TwoLayerTask: c must be finite");
        TwoLayerTask { x, r, c }
    }
}

/// Loss and derivative of the single-layer task at scaling parameter `p`.
///
/// `loss = (units * tanh(p*x) - r)^2`
pub fn toy_loss_grad(p: f64, task: &ToyTanhTask) -> (f64, f64) {
    let u = f64::from(task.units);
    let t = (p * task.x).tanh();
    let err = u * t - task.r;
    let loss = err * err;
    let dloss_dp = 2.0 * err * u * task.x * (1.0 - t * t);
    (loss, dloss_dp)
}

/// Loss and derivative of the two-layer task at scaling parameter `p`.
pub fn twolayer_loss_grad(p: f64, task: &TwoLayerTask) -> (f64, f64) {
    let h = (p * task.x).tanh();
    let th = h.tanh();
    let t2h = (2.0 * h).tanh();
    let y = th + task.c * (-t2h); // tanh(-2h) = -tanh(2h)
    let err = y - task.r;
    let loss = err * err;
    let dy_dh = (1.0 - th * th) - 2.0 * task.c * (1.0 - t2h * t2h);
    let dh_dp = task.x * (1.0 - h * h);
    let dloss_dp = 2.0 * err * dy_dh * dh_dp;
    (loss, dloss_dp)
}

/// Draw `n` single-layer tasks: `x` uniform in (-0.5, 0.5), `r` uniform in
/// (0, 1), 100 units. Deterministic per seed.
pub fn gen_toy_tasks(seed: u64, n: usize) -> Vec<ToyTanhTask> {
    assert!(n >= 1, "gen_toy_tasks: n must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x = loop {
                let x: f64 = rng.random_range(-0.5..0.5);
                // x == 0 makes the task degenerate (y is identically zero)
                if x != 0.0 {
                    break x;
                }
            };
            let r = loop {
                let r: f64 = rng.random_range(0.0..1.0);
                if r != 0.0 {
                    break r;
                }
            };
            ToyTanhTask::new(x, r, 100)
        })
        .collect()
}
