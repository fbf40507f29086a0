//! Nonlinear conjugate gradient with restarts.
//!
//! The direction update defaults to Polak-Ribiere with the coefficient
//! clamped at zero (automatic restart on lost conjugacy);
//! Fletcher-Reeves is available for comparison. Step lengths come from
//! [`bracket_minimum`] + [`golden_section`] along the search direction,
//! using loss-only evaluations. An accepted step never increases the
//! loss: when no descending step exists the parameters stay put and the
//! step is flagged as stalled.

use super::linesearch::{bracket_minimum, golden_section, LineSearchConfig};
use crate::diagnostics::{CostMeter, Phase, RowFlags, TraceRow, TrainingTrace};
use crate::numerics::{axpy, dot, norm, Vector};
use crate::objective::{Metered, Objective};

/// Direction-update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CgVariant {
    /// Polak-Ribiere with the coefficient clamped at zero.
    #[default]
    PolakRibierePlus,
    FletcherReeves,
}

/// Relative factor defining a "zero" gradient norm; scaled by the first
/// observed gradient norm (floored at 1).
const ZERO_GRAD_FACTOR: f64 = 1e-10;

/// Conjugate-gradient iteration state. Holds the previous gradient and
/// direction, and caches the evaluation at the current point so each step
/// costs one gradient plus the line-search forwards.
#[derive(Debug, Clone)]
pub struct CgState {
    variant: CgVariant,
    g_prev: Option<Vector>,
    d_prev: Option<Vector>,
    iters_since_restart: usize,
    zero_threshold: Option<f64>,
    cached_eval: Option<(f64, Vector)>,
}

impl CgState {
    pub fn new() -> Self {
        Self::with_variant(CgVariant::default())
    }

    pub fn with_variant(variant: CgVariant) -> Self {
        CgState {
            variant,
            g_prev: None,
            d_prev: None,
            iters_since_restart: 0,
            zero_threshold: None,
            cached_eval: None,
        }
    }

    /// Direction used by the most recent step.
    pub fn direction(&self) -> Option<&Vector> {
        self.d_prev.as_ref()
    }

    pub fn variant(&self) -> CgVariant {
        self.variant
    }
}

impl Default for CgState {
    fn default() -> Self {
        Self::new()
    }
}

/// What one [`cg_step`] did.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub params: Vector,
    /// Full-batch loss at the returned parameters.
    pub loss: f64,
    /// Full-batch gradient norm at the returned parameters.
    pub grad_norm: f64,
    /// Gradient norm fell below the zero threshold; no step was taken.
    pub converged: bool,
    /// No descending step was found, even along steepest descent with a
    /// halved initial step; parameters are unchanged.
    pub stalled: bool,
    /// The direction was reset to steepest descent.
    pub restarted: bool,
    /// Accepted step length along the search direction.
    pub step_length: f64,
}

/// Direction-update coefficient.
pub(crate) fn direction_coefficient(variant: CgVariant, g_new: &Vector, g_prev: &Vector) -> f64 {
    let denom = dot(g_prev, g_prev);
    if denom == 0.0 {
        return 0.0;
    }
    match variant {
        CgVariant::PolakRibierePlus => {
            let diff = axpy(-1.0, g_prev, g_new);
            (dot(g_new, &diff) / denom).max(0.0)
        }
        CgVariant::FletcherReeves => dot(g_new, g_new) / denom,
    }
}

fn negated(v: &Vector) -> Vector {
    let mut out = v.clone();
    out.scale(-1.0);
    out
}

/// Bracket + golden section along `dir`. Returns `(step, value)` or
/// `None` when no descending step exists within the budget.
fn line_minimum<O: Objective + ?Sized>(
    objective: &O,
    params: &Vector,
    dir: &Vector,
    ls: &LineSearchConfig,
) -> Option<(f64, f64)> {
    let bracket = bracket_minimum(|a| objective.loss(&axpy(a, dir, params)), ls).ok()?;
    let golden = golden_section(
        |a| objective.loss(&axpy(a, dir, params)),
        bracket.a,
        bracket.b,
        bracket.c,
        ls,
    );
    Some((golden.alpha, golden.value))
}

/// One conjugate-gradient iteration on a full-batch objective.
///
/// Evaluates the gradient at the incoming point (unless cached from the
/// previous step), picks the search direction, line-searches it, and
/// returns the state at the new point. Restarts to steepest descent when
/// the direction is not a descent direction or after `dim` iterations.
pub fn cg_step<O: Objective + ?Sized>(
    state: &mut CgState,
    params: Vector,
    objective: &O,
    ls: &LineSearchConfig,
) -> CgOutcome {
    ls.validate();
    let (loss, g) = match state.cached_eval.take() {
        Some(cached) => cached,
        None => objective.loss_grad(&params),
    };
    let gn = norm(&g);
    let threshold = *state
        .zero_threshold
        .get_or_insert_with(|| ZERO_GRAD_FACTOR * gn.max(1.0));
    if gn < threshold {
        state.cached_eval = Some((loss, g));
        return CgOutcome {
            params,
            loss,
            grad_norm: gn,
            converged: true,
            stalled: false,
            restarted: false,
            step_length: 0.0,
        };
    }

    // search direction
    let mut restarted = false;
    let mut dir = match (&state.g_prev, &state.d_prev) {
        (Some(g_prev), Some(d_prev)) => {
            let beta = direction_coefficient(state.variant, &g, g_prev);
            let mut d = negated(&g);
            d.scaled_add(beta, d_prev);
            d
        }
        _ => {
            restarted = true;
            negated(&g)
        }
    };
    if dot(&dir, &g) >= 0.0 || state.iters_since_restart >= params.len() {
        dir = negated(&g);
        restarted = true;
    }

    // step length; fall back to steepest descent with a halved first step
    let mut stalled = false;
    let mut step = 0.0;
    match line_minimum(objective, &params, &dir, ls) {
        Some((alpha, _)) => step = alpha,
        None => {
            dir = negated(&g);
            restarted = true;
            let fallback = LineSearchConfig {
                initial_step: ls.initial_step * 0.5,
                ..*ls
            };
            match line_minimum(objective, &params, &dir, &fallback) {
                Some((alpha, _)) => step = alpha,
                None => stalled = true,
            }
        }
    }

    let (new_params, new_loss, new_g) = if stalled || step == 0.0 {
        let g_clone = g.clone();
        (params, loss, g_clone)
    } else {
        let p = axpy(step, &dir, &params);
        let (l, ng) = objective.loss_grad(&p);
        (p, l, ng)
    };
    debug_assert!(
        new_loss <= loss + 1e-12 * loss.abs().max(1.0),
        "cg_step must not increase the loss ({loss} -> {new_loss})"
    );

    state.iters_since_restart = if restarted {
        1
    } else {
        state.iters_since_restart + 1
    };
    state.g_prev = Some(g);
    state.d_prev = Some(dir);
    let grad_norm = norm(&new_g);
    state.cached_eval = Some((new_loss, new_g));
    CgOutcome {
        params: new_params,
        loss: new_loss,
        grad_norm,
        converged: false,
        stalled,
        restarted,
        step_length: step,
    }
}

/// Runs [`cg_step`] once per epoch, recording loss, gradient norm, and
/// cumulative evaluation cost. Stops early once the gradient norm falls
/// below the zero threshold.
pub fn cg_minimize<O: Objective + ?Sized>(
    params: Vector,
    objective: &O,
    epochs: usize,
    ls: &LineSearchConfig,
    meter: &CostMeter,
) -> (Vector, TrainingTrace) {
    assert!(epochs >= 1, "cg_minimize: epochs must be at least 1");
    let metered = Metered::new(objective, meter);
    let mut state = CgState::new();
    let mut trace = TrainingTrace::new(0, "");
    let mut current = params;
    let mut peak = 0.0f64;
    for epoch in 1..=epochs {
        let out = cg_step(&mut state, current, &metered, ls);
        current = out.params;
        peak = peak.max(out.grad_norm);
        trace.push(TraceRow {
            epoch,
            loss: out.loss,
            grad_norm: out.grad_norm,
            phase: Phase::Cg,
            gnmax: peak,
            cost_units: meter.cost_units(),
            flags: RowFlags {
                forced_swap: false,
                stall: out.stalled,
                converged: out.converged,
            },
        });
        if out.converged {
            break;
        }
    }
    (current, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{QuadraticObjective, RosenbrockObjective};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tight_ls() -> LineSearchConfig {
        LineSearchConfig {
            tol: 1e-11,
            max_evals: 200,
            ..LineSearchConfig::default()
        }
    }

    /// Random SPD system: A = B B' + n I.
    pub(crate) fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> QuadraticObjective {
        let b: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += b[i * n + k] * b[j * n + k];
                }
                a[i * n + j] = acc + if i == j { n as f64 } else { 0.0 };
            }
        }
        let rhs = Vector::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
        QuadraticObjective::new(a, rhs)
    }

    /// Independent direct solve by Gaussian elimination with partial
    /// pivoting: the oracle for the quadratic minimizer A^-1 b.
    pub(crate) fn solve_direct(a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m = vec![0.0; n * (n + 1)];
        for i in 0..n {
            m[i * (n + 1)..i * (n + 1) + n].copy_from_slice(&a[i * n..(i + 1) * n]);
            m[i * (n + 1) + n] = b[i];
        }
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r1, &r2| {
                    m[r1 * (n + 1) + col]
                        .abs()
                        .partial_cmp(&m[r2 * (n + 1) + col].abs())
                        .unwrap()
                })
                .unwrap();
            if pivot != col {
                for k in 0..=n {
                    m.swap(col * (n + 1) + k, pivot * (n + 1) + k);
                }
            }
            let diag = m[col * (n + 1) + col];
            for row in col + 1..n {
                let factor = m[row * (n + 1) + col] / diag;
                for k in col..=n {
                    m[row * (n + 1) + k] -= factor * m[col * (n + 1) + k];
                }
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let mut acc = m[row * (n + 1) + n];
            for k in row + 1..n {
                acc -= m[row * (n + 1) + k] * x[k];
            }
            x[row] = acc / m[row * (n + 1) + row];
        }
        x
    }

    #[test]
    fn reaches_direct_solution_on_spd_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = random_spd(5, &mut rng);
        let oracle = solve_direct(&q.a, q.b.as_slice());
        let meter = CostMeter::new(1);
        let (x, trace) = cg_minimize(Vector::zeros(5), &q, 7, &tight_ls(), &meter);
        assert!(trace.rows.len() <= 7);
        for i in 0..5 {
            assert!(
                (x[i] - oracle[i]).abs() < 1e-8,
                "component {i}: {} vs {}",
                x[i],
                oracle[i]
            );
        }
    }

    #[test]
    fn one_step_solves_isotropic_quadratic() {
        // f(x) = ||x||^2: steepest descent with an exact-enough line
        // search lands on the optimum in a single step
        let n = 6;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 2.0;
        }
        let q = QuadraticObjective::new(a, Vector::zeros(n));
        let mut state = CgState::new();
        let x0 = Vector::new(vec![3.0, -1.0, 2.0, 0.5, -4.0, 1.0]);
        let out = cg_step(&mut state, x0, &q, &tight_ls());
        assert!(norm(&out.params) < 1e-3, "left norm {}", norm(&out.params));
        assert!(out.restarted);
    }

    #[test]
    fn pr_plus_coefficient_vanishes_without_progress() {
        let g = Vector::new(vec![0.3, -0.7, 1.1]);
        assert_eq!(
            direction_coefficient(CgVariant::PolakRibierePlus, &g, &g),
            0.0
        );
        // Fletcher-Reeves instead keeps the magnitude ratio
        assert_eq!(direction_coefficient(CgVariant::FletcherReeves, &g, &g), 1.0);
    }

    #[test]
    fn pr_plus_clamps_negative_coefficients() {
        let g_prev = Vector::new(vec![1.0, 0.0]);
        let g_new = Vector::new(vec![0.5, 0.0]); // g_new . (g_new - g_prev) < 0
        assert_eq!(
            direction_coefficient(CgVariant::PolakRibierePlus, &g_new, &g_prev),
            0.0
        );
    }

    #[test]
    fn successive_directions_are_a_conjugate() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q = random_spd(8, &mut rng);
        let mut state = CgState::new();
        let mut x = Vector::new((0..8).map(|_| rng.random_range(-2.0..2.0)).collect());
        let mut prev_dir: Option<Vector> = None;
        for _ in 0..6 {
            let out = cg_step(&mut state, x, &q, &tight_ls());
            x = out.params;
            if out.converged {
                break;
            }
            let dir = state.direction().unwrap().clone();
            if let Some(prev) = prev_dir {
                if !out.restarted {
                    let a_prev = q.apply(&prev);
                    let a_dir = q.apply(&dir);
                    let cross = dot(&dir, &a_prev).abs();
                    let scale = dot(&prev, &a_prev).sqrt() * dot(&dir, &a_dir).sqrt();
                    assert!(
                        cross / scale < 1e-6,
                        "conjugacy violated: {}",
                        cross / scale
                    );
                }
            }
            prev_dir = Some(dir);
        }
    }

    #[test]
    fn minimizes_rosenbrock_from_standard_start() {
        let obj = RosenbrockObjective;
        let meter = CostMeter::new(1);
        let (x, trace) = cg_minimize(
            Vector::new(vec![-1.2, 1.0]),
            &obj,
            200,
            &LineSearchConfig {
                tol: 1e-8,
                max_evals: 200,
                ..LineSearchConfig::default()
            },
            &meter,
        );
        let loss = trace.final_loss().unwrap();
        assert!(loss < 1e-6, "loss {loss} after {} epochs", trace.rows.len());
        assert!((x[0] - 1.0).abs() < 1e-2 && (x[1] - 1.0).abs() < 1e-2);
    }

    #[test]
    fn trace_is_monotone_on_convex_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let q = random_spd(10, &mut rng);
        let meter = CostMeter::new(1);
        let x0 = Vector::new((0..10).map(|_| rng.random_range(-3.0..3.0)).collect());
        let (_, trace) = cg_minimize(x0, &q, 20, &LineSearchConfig::default(), &meter);
        for pair in trace.rows.windows(2) {
            assert!(
                pair[1].loss <= pair[0].loss + 1e-12,
                "loss increased: {} -> {}",
                pair[0].loss,
                pair[1].loss
            );
        }
    }

    #[test]
    fn already_converged_start_yields_single_converged_row() {
        let q = QuadraticObjective::identity(3);
        let meter = CostMeter::new(1);
        // the minimizer of 0.5||x||^2 is the origin
        let (x, trace) = cg_minimize(Vector::zeros(3), &q, 10, &tight_ls(), &meter);
        assert_eq!(trace.rows.len(), 1);
        assert!(trace.rows[0].flags.converged);
        assert_eq!(norm(&x), 0.0);
    }

    #[test]
    fn unbounded_descent_stalls_instead_of_diverging() {
        // f(x) = c'x has no minimum: expansion exhausts the budget, the
        // steepest-descent fallback fails too, and the step is a stall
        struct Linear;
        impl Objective for Linear {
            fn dim(&self) -> usize {
                2
            }
            fn loss(&self, p: &Vector) -> f64 {
                p[0] + 2.0 * p[1]
            }
            fn loss_grad(&self, p: &Vector) -> (f64, Vector) {
                (self.loss(p), Vector::new(vec![1.0, 2.0]))
            }
        }
        let mut state = CgState::new();
        let out = cg_step(
            &mut state,
            Vector::zeros(2),
            &Linear,
            &LineSearchConfig {
                max_evals: 40,
                ..LineSearchConfig::default()
            },
        );
        assert!(out.stalled);
        assert_eq!(out.params.as_slice(), &[0.0, 0.0]);
        assert_eq!(out.loss, 0.0);
    }
}
