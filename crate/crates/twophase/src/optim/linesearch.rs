//! Derivative-free 1-D minimization: geometric bracketing followed by
//! golden-section refinement. Line-search evaluations are loss-only
//! forward passes; gradients are never computed here.

/// Golden ratio conjugate (sqrt(5) - 1) / 2: the exact interval
/// contraction factor per golden-section iteration.
pub const GOLDEN_RATIO: f64 = 0.618_033_988_749_894_9;
const GOLDEN_COMPLEMENT: f64 = 1.0 - GOLDEN_RATIO;

/// Width floor added to the relative termination test so brackets hugging
/// zero still terminate.
const WIDTH_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchConfig {
    /// First trial step from 0.
    pub initial_step: f64,
    /// Geometric expansion factor while bracketing.
    pub growth: f64,
    /// Relative tolerance terminating the golden-section refinement.
    pub tol: f64,
    /// Evaluation budget for each of the two stages.
    pub max_evals: usize,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        LineSearchConfig {
            initial_step: 1.0,
            growth: 2.0,
            tol: 1e-4,
            max_evals: 100,
        }
    }
}

impl LineSearchConfig {
    pub fn validate(&self) {
        assert!(self.initial_step > 0.0, "LineSearchConfig: initial_step must be positive");
        assert!(self.growth > 1.0, "LineSearchConfig: growth must exceed 1");
        assert!(self.tol > 0.0, "LineSearchConfig: tol must be positive");
        assert!(self.max_evals > 0, "LineSearchConfig: max_evals must be positive");
    }
}

/// `a < b < c` with `phi(b) < phi(a)` and `phi(b) <= phi(c)`: a downhill
/// interior point guaranteeing a minimum inside `(a, c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub fa: f64,
    pub fb: f64,
    pub fc: f64,
}

/// No descending step was found within the evaluation budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no bracket: no descending step found within the evaluation budget")]
pub struct NoBracket;

/// Brackets a minimum of `phi` along positive steps from 0.
///
/// The first trial step is `initial_step`; if that does not descend the
/// step is halved (at most ten times) before giving up, so a function
/// increasing along the whole ray reports [`NoBracket`] instead of
/// silently accepting a zero step. Once a descending step is found the
/// bracket expands geometrically until the function turns upward.
pub fn bracket_minimum(
    mut phi: impl FnMut(f64) -> f64,
    config: &LineSearchConfig,
) -> Result<Bracket, NoBracket> {
    let fa = phi(0.0);
    assert!(fa.is_finite(), "bracket_minimum: phi(0) must be finite");
    let mut evals = 1usize;

    // probe shrinking steps until one descends
    let mut b = config.initial_step;
    let mut fb = phi(b);
    evals += 1;
    let mut shrinks = 0;
    while !(fb < fa) {
        shrinks += 1;
        if shrinks > 10 || evals >= config.max_evals {
            return Err(NoBracket);
        }
        b *= 0.5;
        fb = phi(b);
        evals += 1;
    }

    // geometric expansion until the function turns upward
    let mut a = 0.0;
    let mut fa = fa;
    let mut c = b * config.growth;
    let mut fc = phi(c);
    evals += 1;
    while fc < fb {
        if evals >= config.max_evals {
            return Err(NoBracket);
        }
        a = b;
        fa = fb;
        b = c;
        fb = fc;
        c *= config.growth;
        fc = phi(c);
        evals += 1;
    }
    Ok(Bracket {
        a,
        b,
        c,
        fa,
        fb,
        fc,
    })
}

/// Result of a golden-section refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenResult {
    /// Best point found.
    pub alpha: f64,
    /// `phi(alpha)`.
    pub value: f64,
    /// Function evaluations spent.
    pub evals: usize,
    /// False when the evaluation budget ran out before the interval
    /// reached the requested tolerance.
    pub converged: bool,
}

/// Golden-section search inside a valid bracket.
///
/// Interior probes sit at the 0.382/0.618 split, so the enclosing
/// interval contracts by exactly the golden ratio per iteration. The
/// search stops when the interval width falls below
/// `tol * (|x1| + |x2| + floor)`; if the evaluation budget is exhausted
/// first, the best point seen so far is returned with `converged: false`.
pub fn golden_section(
    phi: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    c: f64,
    config: &LineSearchConfig,
) -> GoldenResult {
    golden_section_with_trace(phi, a, b, c, config, |_| {})
}

/// Same as [`golden_section`], invoking `on_width` with the bracket width
/// after the initial placement and after every contraction.
pub fn golden_section_with_trace(
    mut phi: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    c: f64,
    config: &LineSearchConfig,
    mut on_width: impl FnMut(f64),
) -> GoldenResult {
    assert!(a < b && b < c, "golden_section: invalid bracket ({a}, {b}, {c})");
    let (mut x0, mut x3) = (a, c);
    let (mut x1, mut x2);
    if c - b > b - a {
        x1 = b;
        x2 = b + GOLDEN_COMPLEMENT * (c - b);
    } else {
        x2 = b;
        x1 = b - GOLDEN_COMPLEMENT * (b - a);
    }
    let mut f1 = phi(x1);
    let mut f2 = phi(x2);
    let mut evals = 2usize;
    on_width(x3 - x0);

    while (x3 - x0).abs() > config.tol * (x1.abs() + x2.abs() + WIDTH_FLOOR) {
        if evals >= config.max_evals {
            let (alpha, value) = if f1 < f2 { (x1, f1) } else { (x2, f2) };
            return GoldenResult {
                alpha,
                value,
                evals,
                converged: false,
            };
        }
        if f2 < f1 {
            x0 = x1;
            x1 = x2;
            x2 = GOLDEN_RATIO * x1 + GOLDEN_COMPLEMENT * x3;
            f1 = f2;
            f2 = phi(x2);
        } else {
            x3 = x2;
            x2 = x1;
            x1 = GOLDEN_RATIO * x2 + GOLDEN_COMPLEMENT * x0;
            f2 = f1;
            f1 = phi(x1);
        }
        evals += 1;
        on_width(x3 - x0);
    }
    let (alpha, value) = if f1 < f2 { (x1, f1) } else { (x2, f2) };
    GoldenResult {
        alpha,
        value,
        evals,
        converged: true,
    }
}
