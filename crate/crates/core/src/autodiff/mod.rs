//! Dense-matrix reverse-mode differentiation.
//!
//! A [`Tape`] records every primitive applied to 2-D `f64` matrices. Values
//! are addressed by [`Var`] handles; [`Tape::backward`] walks the record in
//! reverse and accumulates gradients into leaves created with
//! `requires_grad = true`. The primitive set is closed and shape contracts
//! are explicit: there is no broadcasting, and a shape mismatch panics.
//!
//! Parameters live outside the tape. Each forward pass starts from a fresh
//! tape, registers the active parameter group as gradient-carrying leaves and
//! everything else as constants.

mod adam;
mod gradcheck;
mod params;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{gradient_check, gradient_check_with};
pub use params::{adam_step, ParamGroup};
pub(crate) use tape::row_softmax;
pub use tape::{NonFinite, Tape, Var};

use ndarray::Array2;
use rand::Rng;

/// Uniform Glorot initialization, `U(-a, a)` with `a = sqrt(6 / (rows + cols))`.
pub fn glorot_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-a..=a))
}
