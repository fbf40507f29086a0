//! Measurement layer: training traces, evaluation-cost accounting, the
//! overdetermination ratio, directional curvature probing, and the
//! gradient-norm peak audit.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::numerics::{axpy, dot, norm, Vector};
use crate::objective::Objective;

/// Which optimizer produced an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Adam,
    Cg,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Phase::Adam => write!(f, "Adam"),
            Phase::Cg => write!(f, "CG"),
        }
    }
}

/// Noteworthy events attached to a trace row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RowFlags {
    /// The controller swapped without the detector firing (epoch cap hit).
    pub forced_swap: bool,
    /// The line search found no descent even along steepest descent.
    pub stall: bool,
    /// Gradient norm fell below the zero threshold.
    pub converged: bool,
}

impl RowFlags {
    pub fn is_empty(&self) -> bool {
        !(self.forced_swap || self.stall || self.converged)
    }
}

impl std::fmt::Display for RowFlags {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut parts = Vec::new();
        if self.forced_swap {
            parts.push("forced_swap");
        }
        if self.stall {
            parts.push("stall");
        }
        if self.converged {
            parts.push("converged");
        }
        write!(f, "{}", parts.join("+"))
    }
}

/// One epoch of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    /// 1-based epoch number, strictly increasing along a trace.
    pub epoch: usize,
    /// Full-batch loss at the end of the epoch.
    pub loss: f64,
    /// Full-batch gradient norm (raw, unsmoothed).
    pub grad_norm: f64,
    pub phase: Phase,
    /// Running maximum of the smoothed gradient norm seen by the detector.
    pub gnmax: f64,
    /// Cumulative evaluation cost at the end of the epoch.
    pub cost_units: f64,
    pub flags: RowFlags,
}

/// Per-epoch record of a whole run; the data behind every loss curve and
/// gradient-norm plot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingTrace {
    pub rows: Vec<TraceRow>,
    /// First epoch executed by the conjugate-gradient phase, if any.
    pub swap_epoch: Option<usize>,
    pub seed: u64,
    /// Identifier of the configuration that produced the run.
    pub config_digest: String,
}

impl TrainingTrace {
    pub fn new(seed: u64, config_digest: impl Into<String>) -> Self {
        TrainingTrace {
            rows: Vec::new(),
            swap_epoch: None,
            seed,
            config_digest: config_digest.into(),
        }
    }

    pub fn push(&mut self, row: TraceRow) {
        if let Some(last) = self.rows.last() {
            assert!(row.epoch > last.epoch, "trace epochs must increase");
            assert!(
                row.cost_units >= last.cost_units,
                "trace cost must be nondecreasing"
            );
        }
        assert!(row.grad_norm >= 0.0, "trace grad_norm must be nonnegative");
        if row.phase == Phase::Cg && self.swap_epoch.is_none() {
            self.swap_epoch = Some(row.epoch);
        }
        self.rows.push(row);
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.rows.last().map(|r| r.loss)
    }
}

/// What an objective evaluation computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalKind {
    /// Loss only.
    Forward,
    /// Loss and gradient (implies the forward pass).
    Gradient,
}

/// Evaluation-cost accounting in forward-pass equivalents.
///
/// Charges are per example processed and normalized by the full-batch
/// size, so one full-batch forward pass costs exactly 1 unit and one
/// full-batch gradient costs 2 (the backward pass is counted as a second
/// forward). This is the hardware-independent cost axis used to compare
/// optimizers.
#[derive(Debug, Default)]
pub struct CostMeter {
    forward_examples: AtomicU64,
    gradient_examples: AtomicU64,
    full_batch: u64,
}

impl CostMeter {
    pub fn new(full_batch_size: usize) -> Self {
        assert!(full_batch_size > 0, "CostMeter: full batch size must be positive");
        CostMeter {
            forward_examples: AtomicU64::new(0),
            gradient_examples: AtomicU64::new(0),
            full_batch: full_batch_size as u64,
        }
    }

    pub fn charge(&self, kind: EvalKind, examples: usize) {
        let counter = match kind {
            EvalKind::Forward => &self.forward_examples,
            EvalKind::Gradient => &self.gradient_examples,
        };
        counter.fetch_add(examples as u64, Ordering::Relaxed);
    }

    /// Full-batch-equivalent forward evaluations charged so far.
    pub fn forward_evals(&self) -> f64 {
        self.forward_examples.load(Ordering::Relaxed) as f64 / self.full_batch as f64
    }

    /// Full-batch-equivalent gradient evaluations charged so far.
    pub fn gradient_evals(&self) -> f64 {
        self.gradient_examples.load(Ordering::Relaxed) as f64 / self.full_batch as f64
    }

    /// `forward_evals + 2 * gradient_evals`.
    pub fn cost_units(&self) -> f64 {
        self.forward_evals() + 2.0 * self.gradient_evals()
    }
}

/// Finite-difference probe of directional curvature.
#[derive(Debug, Clone, Copy)]
pub struct ConvexityProbe {
    /// Base relative step; the effective step is scaled by the parameter
    /// norm (floored at 1).
    pub epsilon: f64,
    /// How many random directions to sample per probe point.
    pub directions_per_point: usize,
}

impl Default for ConvexityProbe {
    fn default() -> Self {
        ConvexityProbe {
            epsilon: 1e-5,
            directions_per_point: 8,
        }
    }
}

impl ConvexityProbe {
    pub fn effective_step(&self, theta: &Vector) -> f64 {
        assert!(self.epsilon > 0.0, "ConvexityProbe: epsilon must be positive");
        self.epsilon * norm(theta).max(1.0)
    }
}

/// Estimates `d' H(theta) d` from two gradient evaluations:
/// `dot(d, grad(theta + eps d) - grad(theta - eps d)) / (2 eps)`.
///
/// `d` must be a unit vector. Negative values witness non-convexity at
/// `theta` along `d`; the Hessian itself is never materialized.
pub fn directional_curvature<O: Objective + ?Sized>(
    objective: &O,
    theta: &Vector,
    d: &Vector,
    probe: &ConvexityProbe,
) -> f64 {
    assert!(
        (norm(d) - 1.0).abs() <= 1e-9,
        "directional_curvature: d must be a unit vector (norm {})",
        norm(d)
    );
    let eps = probe.effective_step(theta);
    let (_, g_plus) = objective.loss_grad(&axpy(eps, d, theta));
    let (_, g_minus) = objective.loss_grad(&axpy(-eps, d, theta));
    assert!(
        g_plus.is_finite() && g_minus.is_finite(),
        "directional_curvature: objective not finite at probe points"
    );
    let diff = axpy(-1.0, &g_minus, &g_plus);
    dot(d, &diff) / (2.0 * eps)
}

/// Overdetermination ratio `K*M / P`: training constraints over trainable
/// parameters. Values above 1 are required for a determined fit.
pub fn overdetermination_ratio(examples: usize, output_dim: usize, params: usize) -> f64 {
    assert!(params >= 1, "overdetermination_ratio: P must be positive");
    (examples as f64) * (output_dim as f64) / (params as f64)
}

/// (loss, grad_norm) pairs of a trace ordered by decreasing loss, i.e.
/// along the training direction when read right to left. Duplicates are
/// preserved.
pub fn grad_vs_loss(trace: &TrainingTrace) -> Vec<(f64, f64)> {
    assert!(!trace.rows.is_empty(), "grad_vs_loss: trace is empty");
    let mut pairs: Vec<(f64, f64)> = trace.rows.iter().map(|r| (r.loss, r.grad_norm)).collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    pairs
}

/// Number of interior local maxima (strict rise then strict fall) of the
/// series after trailing-window smoothing. The same window as the swap
/// detector keeps the audit and the controller looking at one signal.
pub fn count_peaks(series: &[f64], window: usize) -> usize {
    assert!(!series.is_empty(), "count_peaks: series is empty");
    assert!(window >= 1, "count_peaks: window must be at least 1");
    let smoothed: Vec<f64> = (0..series.len())
        .map(|i| crate::twophase::smooth(&series[..=i], window))
        .collect();
    let mut peaks = 0;
    for i in 1..smoothed.len().saturating_sub(1) {
        if smoothed[i] > smoothed[i - 1] && smoothed[i] > smoothed[i + 1] {
            peaks += 1;
        }
    }
    peaks
}
