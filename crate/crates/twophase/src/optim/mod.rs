//! Optimizers: mini-batch Adam for the non-convex phase, nonlinear
//! conjugate gradient with a bracketing + golden-section line search for
//! the convex phase.

mod adam;
mod cg;
mod linesearch;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use cg::{cg_minimize, cg_step, CgOutcome, CgState, CgVariant};
pub use linesearch::{
    bracket_minimum, golden_section, golden_section_with_trace, Bracket, GoldenResult,
    LineSearchConfig, NoBracket,
};
