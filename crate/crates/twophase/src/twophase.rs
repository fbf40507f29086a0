//! The two-phase controller: mini-batch Adam while the full-batch
//! gradient norm is still climbing, a one-way swap to conjugate gradient
//! once the (smoothed) norm drops below `swap_factor` times its running
//! peak.
//!
//! The gradient norm is evaluated on the full batch once per epoch so the
//! detector sees a low-noise signal, and smoothed with a short trailing
//! window because a zigzag optimization path can still wiggle the curve.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::{CostMeter, Phase, RowFlags, TraceRow, TrainingTrace};
use crate::numerics::{norm, Vector};
use crate::objective::{BatchObjective, Metered, Objective};
use crate::optim::{adam_step, cg_step, AdamConfig, AdamState, CgState, CgVariant, LineSearchConfig};

/// Trailing moving average of the last `min(window, len)` values.
pub fn smooth(history: &[f64], window: usize) -> f64 {
    assert!(!history.is_empty(), "smooth: history is empty");
    assert!(window >= 1, "smooth: window must be at least 1");
    let tail = &history[history.len().saturating_sub(window)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Watches the smoothed gradient norm for its peak and decides when the
/// Adam phase ends. The swap is one-way: once the conjugate-gradient
/// phase starts it never hands back.
#[derive(Debug, Clone)]
pub struct SwapDetector {
    /// Running maximum of the smoothed gradient norm.
    peak: f64,
    /// Swap fires when the smoothed norm drops below `peak * swap_factor`.
    swap_factor: f64,
    adam_active: bool,
    window: usize,
    history: Vec<f64>,
}

impl SwapDetector {
    pub fn new(swap_factor: f64, window: usize) -> Self {
        assert!(
            swap_factor > 0.0 && swap_factor < 1.0,
            "SwapDetector: swap_factor must lie in (0, 1)"
        );
        assert!(window >= 1, "SwapDetector: window must be at least 1");
        SwapDetector {
            peak: 0.0,
            swap_factor,
            adam_active: true,
            window,
            history: Vec::new(),
        }
    }

    /// Records one raw observation into the smoothed history and the
    /// running peak without arming the swap decision.
    fn track(&mut self, gn_raw: f64) -> f64 {
        assert!(
            gn_raw.is_finite() && gn_raw >= 0.0,
            "SwapDetector: gradient norm must be finite and nonnegative, got {gn_raw}"
        );
        self.history.push(gn_raw);
        let gn = smooth(&self.history, self.window);
        self.peak = self.peak.max(gn);
        gn
    }

    /// Feeds one raw gradient-norm observation and returns the phase to
    /// use next. The raw value is smoothed over the trailing window, the
    /// running peak updated first, then the phase decided.
    pub fn observe(&mut self, gn_raw: f64) -> Phase {
        let gn = self.track(gn_raw);
        if self.adam_active {
            self.adam_active = gn > self.peak * self.swap_factor;
        }
        self.phase()
    }

    pub fn phase(&self) -> Phase {
        if self.adam_active {
            Phase::Adam
        } else {
            Phase::Cg
        }
    }

    /// Running maximum of the smoothed gradient norm.
    pub fn peak_norm(&self) -> f64 {
        self.peak
    }

    /// Latest smoothed value, if anything was observed.
    pub fn smoothed(&self) -> Option<f64> {
        if self.history.is_empty() {
            None
        } else {
            Some(smooth(&self.history, self.window))
        }
    }

    /// Ends the Adam phase regardless of the signal (epoch-cap fallback
    /// and fixed a-priori splits).
    pub fn force_swap(&mut self) {
        self.adam_active = false;
    }
}

/// Settings for a two-phase (or baseline) training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhaseConfig {
    pub total_epochs: usize,
    /// Fraction of the smoothed-norm peak below which the swap fires.
    pub swap_factor: f64,
    pub smoothing_window: usize,
    /// Hard cap on Adam epochs; the default `total_epochs - 1` guarantees
    /// at least one conjugate-gradient epoch even without a detected peak
    /// (such rows carry the `forced_swap` flag).
    pub max_adam_epochs: Option<usize>,
    /// Fixed a-priori swap epoch; bypasses the detector entirely.
    pub fixed_swap_epoch: Option<usize>,
    /// Stop (after a whole epoch) once cumulative cost reaches this.
    pub cost_budget: Option<f64>,
    pub adam: AdamConfig,
    pub ls: LineSearchConfig,
    pub cg_variant: CgVariant,
    pub seed: u64,
}

impl Default for TwoPhaseConfig {
    fn default() -> Self {
        TwoPhaseConfig {
            total_epochs: 60,
            swap_factor: 0.9,
            smoothing_window: 5,
            max_adam_epochs: None,
            fixed_swap_epoch: None,
            cost_budget: None,
            adam: AdamConfig::default(),
            ls: LineSearchConfig::default(),
            cg_variant: CgVariant::default(),
            seed: 0,
        }
    }
}

impl TwoPhaseConfig {
    pub fn validate(&self) {
        assert!(self.total_epochs >= 2, "TwoPhaseConfig: total_epochs must be at least 2");
        assert!(
            self.swap_factor > 0.0 && self.swap_factor < 1.0,
            "TwoPhaseConfig: swap_factor must lie in (0, 1)"
        );
        assert!(
            self.smoothing_window >= 1,
            "TwoPhaseConfig: smoothing_window must be at least 1"
        );
        self.adam.validate();
        self.ls.validate();
    }
}

/// Single-algorithm reference runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMode {
    AdamOnly,
    CgOnly,
}

/// Training failed in a way the caller may want to report along with the
/// partial results.
#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("non-finite loss or gradient at epoch {epoch}")]
    NonFinite {
        epoch: usize,
        /// Rows recorded before the failure.
        trace: TrainingTrace,
    },
}

/// Runs the two-phase algorithm and returns the per-epoch trace.
///
/// Per epoch while in the Adam phase: one pass of mini-batch Adam steps
/// over a seeded shuffle (final partial batch included), then one
/// full-batch evaluation whose gradient norm feeds the detector. Per
/// epoch in the conjugate-gradient phase: one [`cg_step`] on the
/// full-batch objective.
pub fn run_two_phase<O: BatchObjective + ?Sized>(
    objective: &O,
    init: Vector,
    config: &TwoPhaseConfig,
    meter: &CostMeter,
) -> Result<TrainingTrace, TrainError> {
    run_controller(objective, init, config, meter, None).map(|(_, trace)| trace)
}

/// Like [`run_two_phase`] but also hands each finished epoch's parameters
/// to `on_epoch`, and returns the final parameters.
pub fn run_two_phase_with<O: BatchObjective + ?Sized>(
    objective: &O,
    init: Vector,
    config: &TwoPhaseConfig,
    meter: &CostMeter,
    on_epoch: impl FnMut(&TraceRow, &Vector),
) -> Result<(Vector, TrainingTrace), TrainError> {
    run_controller(objective, init, config, meter, Some(Box::new(on_epoch)))
}

/// Runs a single-algorithm baseline over the same trace schema, enabling
/// equal-cost three-way comparisons.
pub fn run_baseline<O: BatchObjective + ?Sized>(
    mode: BaselineMode,
    objective: &O,
    init: Vector,
    config: &TwoPhaseConfig,
    meter: &CostMeter,
) -> Result<TrainingTrace, TrainError> {
    run_baseline_with_params(mode, objective, init, config, meter).map(|(_, trace)| trace)
}

/// Like [`run_baseline`] but also returns the final parameters.
pub fn run_baseline_with_params<O: BatchObjective + ?Sized>(
    mode: BaselineMode,
    objective: &O,
    init: Vector,
    config: &TwoPhaseConfig,
    meter: &CostMeter,
) -> Result<(Vector, TrainingTrace), TrainError> {
    let mut config = config.clone();
    match mode {
        BaselineMode::AdamOnly => {
            // swap scheduled beyond any epoch: the signal is still
            // recorded but never acted on
            config.fixed_swap_epoch = Some(usize::MAX);
        }
        BaselineMode::CgOnly => {
            config.fixed_swap_epoch = Some(1);
        }
    }
    run_controller(objective, init, &config, meter, None)
}

type EpochCallback<'cb> = Box<dyn FnMut(&TraceRow, &Vector) + 'cb>;

fn run_controller<O: BatchObjective + ?Sized>(
    objective: &O,
    init: Vector,
    config: &TwoPhaseConfig,
    meter: &CostMeter,
    mut on_epoch: Option<EpochCallback<'_>>,
) -> Result<(Vector, TrainingTrace), TrainError> {
    config.validate();
    assert_eq!(init.len(), objective.dim(), "run: init has the wrong dimension");

    let metered = Metered::new(objective, meter);
    let mut detector = SwapDetector::new(config.swap_factor, config.smoothing_window);
    let mut adam_state = AdamState::new(init.len());
    let mut cg_state = CgState::with_variant(config.cg_variant);
    let mut params = init;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trace = TrainingTrace::new(config.seed, "");
    let max_adam_epochs = config.max_adam_epochs.unwrap_or(config.total_epochs - 1);
    let examples = objective.num_examples();
    let mut consecutive_stalls = 0usize;

    for epoch in 1..=config.total_epochs {
        if let Some(budget) = config.cost_budget {
            if meter.cost_units() >= budget {
                break;
            }
        }
        let adam_epoch = match config.fixed_swap_epoch {
            Some(fixed) => epoch < fixed,
            None => detector.phase() == Phase::Adam && epoch <= max_adam_epochs,
        };

        if adam_epoch {
            let mut order: Vec<usize> = (0..examples).collect();
            order.shuffle(&mut shuffle_rng);
            for batch in order.chunks(config.adam.batch_size) {
                let (_, grad) = metered.batch_loss_grad(&params, batch);
                if !grad.is_finite() {
                    return Err(TrainError::NonFinite { epoch, trace });
                }
                params = adam_step(&mut adam_state, &config.adam, &params, &grad);
            }
            // full-batch signal for the detector and the trace
            let (loss, grad) = metered.loss_grad(&params);
            if !loss.is_finite() || !grad.is_finite() {
                return Err(TrainError::NonFinite { epoch, trace });
            }
            let gn = norm(&grad);
            if config.fixed_swap_epoch.is_none() {
                detector.observe(gn);
            } else {
                // a-priori split: record the signal without arming the swap
                detector.track(gn);
            }
            let mut flags = RowFlags::default();
            let detector_would_continue = detector.phase() == Phase::Adam;
            if config.fixed_swap_epoch.is_none()
                && detector_would_continue
                && epoch == max_adam_epochs
                && epoch < config.total_epochs
            {
                detector.force_swap();
                flags.forced_swap = true;
            }
            let row = TraceRow {
                epoch,
                loss,
                grad_norm: gn,
                phase: Phase::Adam,
                gnmax: detector.peak_norm(),
                cost_units: meter.cost_units(),
                flags,
            };
            if let Some(cb) = on_epoch.as_mut() {
                cb(&row, &params);
            }
            trace.push(row);
        } else {
            let out = cg_step(&mut cg_state, params, &metered, &config.ls);
            params = out.params;
            if !out.loss.is_finite() {
                return Err(TrainError::NonFinite { epoch, trace });
            }
            // keep the gnmax column meaningful for CG-only runs too; the
            // swap is already committed so this cannot re-arm it
            detector.track(out.grad_norm);
            consecutive_stalls = if out.stalled {
                consecutive_stalls + 1
            } else {
                0
            };
            let row = TraceRow {
                epoch,
                loss: out.loss,
                grad_norm: out.grad_norm,
                phase: Phase::Cg,
                gnmax: detector.peak_norm(),
                cost_units: meter.cost_units(),
                flags: RowFlags {
                    forced_swap: false,
                    stall: out.stalled && consecutive_stalls >= 3,
                    converged: out.converged,
                },
            };
            if let Some(cb) = on_epoch.as_mut() {
                cb(&row, &params);
            }
            trace.push(row);
            if out.converged {
                break;
            }
        }
    }
    Ok((params, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{synthetic_digits, MlpModel};
    use crate::objective::{MlpObjective, QuadraticObjective};
    use proptest::prelude::*;

    #[test]
    fn smooth_singleton() {
        assert_eq!(smooth(&[5.0], 5), 5.0);
    }

    #[test]
    fn smooth_full_window_mean() {
        assert_eq!(smooth(&[1.0, 2.0, 3.0, 4.0, 5.0], 5), 3.0);
    }

    #[test]
    fn smooth_window_slides() {
        assert_eq!(smooth(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 5), 4.0);
    }

    #[test]
    fn detector_tolerates_dip_within_factor() {
        // 2.9 > 0.9 * 3.0: still Adam
        let mut d = SwapDetector::new(0.9, 1);
        for gn in [1.0, 2.0, 3.0, 2.9] {
            assert_eq!(d.observe(gn), Phase::Adam);
        }
    }

    #[test]
    fn detector_swaps_on_drop_below_factor() {
        // 2.6 <= 0.9 * 3.0 = 2.7: swap at the fourth observation
        let mut d = SwapDetector::new(0.9, 1);
        assert_eq!(d.observe(1.0), Phase::Adam);
        assert_eq!(d.observe(2.0), Phase::Adam);
        assert_eq!(d.observe(3.0), Phase::Adam);
        assert_eq!(d.observe(2.6), Phase::Cg);
    }

    #[test]
    fn monotone_increasing_signal_never_swaps() {
        let mut d = SwapDetector::new(0.9, 1);
        for i in 1..200 {
            assert_eq!(d.observe(i as f64), Phase::Adam);
        }
    }

    #[test]
    #[should_panic(expected = "finite and nonnegative")]
    fn detector_rejects_nan() {
        SwapDetector::new(0.9, 1).observe(f64::NAN);
    }

    #[test]
    #[should_panic(expected = "finite and nonnegative")]
    fn detector_rejects_negative() {
        SwapDetector::new(0.9, 1).observe(-1.0);
    }

    proptest! {
        /// One-way swap: the phase sequence always matches Adam* Cg*.
        #[test]
        fn phase_sequence_is_adam_then_cg(
            norms in prop::collection::vec(0.0f64..100.0, 1..60),
            window in 1usize..6,
        ) {
            let mut d = SwapDetector::new(0.9, window);
            let phases: Vec<Phase> = norms.iter().map(|&gn| d.observe(gn)).collect();
            let mut seen_cg = false;
            for p in phases {
                match p {
                    Phase::Cg => seen_cg = true,
                    Phase::Adam => prop_assert!(!seen_cg, "returned to Adam after the swap"),
                }
            }
        }

        /// Replaying a recorded sequence reproduces the swap epoch: the
        /// detector is a pure function of its input history.
        #[test]
        fn replay_reproduces_swap_epoch(
            norms in prop::collection::vec(0.0f64..100.0, 1..60),
        ) {
            let swap_of = |seq: &[f64]| {
                let mut d = SwapDetector::new(0.9, 1);
                seq.iter().position(|&gn| d.observe(gn) == Phase::Cg)
            };
            prop_assert_eq!(swap_of(&norms), swap_of(&norms));
        }

        /// The recorded peak is nondecreasing over observations.
        #[test]
        fn peak_norm_is_nondecreasing(
            norms in prop::collection::vec(0.0f64..100.0, 1..60),
        ) {
            let mut d = SwapDetector::new(0.9, 3);
            let mut prev = 0.0;
            for &gn in &norms {
                d.observe(gn);
                prop_assert!(d.peak_norm() >= prev);
                prev = d.peak_norm();
            }
        }
    }

    fn small_mlp_setup() -> (MlpModel, crate::models::Dataset) {
        let data = synthetic_digits(3, 120);
        let model = MlpModel::seeded(vec![784, 8, 10], crate::models::Activation::Tanh, 3);
        (model, data)
    }

    #[test]
    fn quadratic_with_decreasing_norm_swaps_within_first_window() {
        // gradient norm strictly decreasing from epoch 1: peak is at the
        // start, so the swap fires as soon as the smoothed value drops
        // below 0.9 * peak
        let q = QuadraticObjective::identity(4);
        let config = TwoPhaseConfig {
            total_epochs: 30,
            smoothing_window: 5,
            adam: AdamConfig {
                lr: 0.5,
                batch_size: 1,
                ..AdamConfig::default()
            },
            seed: 7,
            ..TwoPhaseConfig::default()
        };
        let meter = CostMeter::new(1);
        let trace =
            run_two_phase(&q, Vector::new(vec![3.0, -3.0, 3.0, -3.0]), &config, &meter).unwrap();
        let swap = trace.swap_epoch.expect("must swap");
        assert!(
            swap <= 1 + config.smoothing_window,
            "swap at {swap}, expected within the first smoothing window"
        );
        assert!(!trace.rows.iter().any(|r| r.flags.forced_swap));
    }

    #[test]
    fn traces_are_bit_identical_across_runs() {
        let (model, data) = small_mlp_setup();
        let objective = MlpObjective::new(&model, &data);
        let config = TwoPhaseConfig {
            total_epochs: 6,
            adam: AdamConfig {
                batch_size: 32,
                ..AdamConfig::default()
            },
            seed: 42,
            ..TwoPhaseConfig::default()
        };
        let run = || {
            let meter = CostMeter::new(data.len());
            run_two_phase(&objective, model.weights.clone(), &config, &meter).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn forced_swap_guarantees_a_cg_epoch() {
        // monotone-increasing gradient norms would keep Adam forever;
        // the cap forces one CG epoch and flags it
        let (model, data) = small_mlp_setup();
        let objective = MlpObjective::new(&model, &data);
        let config = TwoPhaseConfig {
            total_epochs: 4,
            // peak detection effectively disabled by a tiny factor
            swap_factor: 1e-9,
            seed: 1,
            ..TwoPhaseConfig::default()
        };
        let meter = CostMeter::new(data.len());
        let trace = run_two_phase(&objective, model.weights.clone(), &config, &meter).unwrap();
        assert_eq!(trace.swap_epoch, Some(4));
        assert!(trace.rows[2].flags.forced_swap);
        assert_eq!(trace.rows[3].phase, Phase::Cg);
    }

    #[test]
    fn baselines_share_the_trace_schema() {
        let (model, data) = small_mlp_setup();
        let objective = MlpObjective::new(&model, &data);
        let config = TwoPhaseConfig {
            total_epochs: 4,
            adam: AdamConfig {
                batch_size: 64,
                ..AdamConfig::default()
            },
            seed: 9,
            ..TwoPhaseConfig::default()
        };
        let meter = CostMeter::new(data.len());
        let adam = run_baseline(
            BaselineMode::AdamOnly,
            &objective,
            model.weights.clone(),
            &config,
            &meter,
        )
        .unwrap();
        assert!(adam.rows.iter().all(|r| r.phase == Phase::Adam));
        assert_eq!(adam.swap_epoch, None);

        let meter = CostMeter::new(data.len());
        let cg = run_baseline(
            BaselineMode::CgOnly,
            &objective,
            model.weights.clone(),
            &config,
            &meter,
        )
        .unwrap();
        assert!(cg.rows.iter().all(|r| r.phase == Phase::Cg));
        assert_eq!(cg.swap_epoch, Some(1));
    }

    #[test]
    fn adam_only_converges_on_quadratic() {
        let q = QuadraticObjective::identity(3);
        let config = TwoPhaseConfig {
            total_epochs: 400,
            adam: AdamConfig {
                lr: 0.1,
                batch_size: 1,
                ..AdamConfig::default()
            },
            seed: 2,
            ..TwoPhaseConfig::default()
        };
        let meter = CostMeter::new(1);
        let trace = run_baseline(
            BaselineMode::AdamOnly,
            &q,
            Vector::new(vec![2.0, -1.0, 1.5]),
            &config,
            &meter,
        )
        .unwrap();
        assert!(trace.final_loss().unwrap() < 1e-4);
    }

    #[test]
    fn cg_only_beats_adam_per_cost_unit_on_quadratic() {
        let q = QuadraticObjective::identity(5);
        let x0 = Vector::new(vec![2.0, -2.0, 1.0, -1.0, 0.5]);
        let config = TwoPhaseConfig {
            total_epochs: 20,
            seed: 3,
            adam: AdamConfig {
                lr: 0.1,
                batch_size: 1,
                ..AdamConfig::default()
            },
            ..TwoPhaseConfig::default()
        };
        let meter_cg = CostMeter::new(1);
        let cg = run_baseline(BaselineMode::CgOnly, &q, x0.clone(), &config, &meter_cg).unwrap();
        let meter_adam = CostMeter::new(1);
        let adam =
            run_baseline(BaselineMode::AdamOnly, &q, x0, &config, &meter_adam).unwrap();
        // compare losses at (approximately) matched cost
        let cg_final = cg.final_loss().unwrap();
        let adam_at_higher_cost = adam
            .rows
            .iter()
            .filter(|r| r.cost_units >= cg.rows.last().unwrap().cost_units)
            .map(|r| r.loss)
            .next_back()
            .unwrap_or(adam.final_loss().unwrap());
        assert!(
            cg_final < adam_at_higher_cost,
            "cg {cg_final} vs adam {adam_at_higher_cost}"
        );
    }

    #[test]
    fn cg_phase_loss_is_monotone_nonincreasing() {
        let (model, data) = small_mlp_setup();
        let objective = MlpObjective::new(&model, &data);
        let config = TwoPhaseConfig {
            total_epochs: 10,
            fixed_swap_epoch: Some(3),
            adam: AdamConfig {
                batch_size: 32,
                ..AdamConfig::default()
            },
            seed: 5,
            ..TwoPhaseConfig::default()
        };
        let meter = CostMeter::new(data.len());
        let trace = run_two_phase(&objective, model.weights.clone(), &config, &meter).unwrap();
        assert_eq!(trace.swap_epoch, Some(3));
        let cg_rows: Vec<&TraceRow> = trace.rows.iter().filter(|r| r.phase == Phase::Cg).collect();
        assert!(!cg_rows.is_empty());
        for pair in cg_rows.windows(2) {
            assert!(
                pair[1].loss <= pair[0].loss + 1e-12 * pair[0].loss.abs().max(1.0),
                "CG loss increased: {} -> {}",
                pair[0].loss,
                pair[1].loss
            );
        }
    }

    #[test]
    fn cost_budget_stops_the_run() {
        let (model, data) = small_mlp_setup();
        let objective = MlpObjective::new(&model, &data);
        let config = TwoPhaseConfig {
            total_epochs: 50,
            cost_budget: Some(12.0),
            adam: AdamConfig {
                batch_size: 64,
                ..AdamConfig::default()
            },
            seed: 6,
            ..TwoPhaseConfig::default()
        };
        let meter = CostMeter::new(data.len());
        let trace = run_two_phase(&objective, model.weights.clone(), &config, &meter).unwrap();
        assert!(trace.rows.len() < 50);
        let last = trace.rows.last().unwrap();
        assert!(last.cost_units >= 12.0);
    }
}
