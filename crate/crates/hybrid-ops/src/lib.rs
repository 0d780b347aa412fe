//! Desk-scale reference sequence operators with analytic gradients.
//!
//! Gated short convolution and grouped-query attention, plus the RMSNorm
//! and SwiGLU helpers needed to compose a full pre-norm residual block.
//! Everything is `f64` and written for clarity over speed. The
//! [`reference`] module holds scalar-loop versions used as oracles, and
//! [`gradcheck`] compares every backward pass against central differences.

pub mod block;
pub mod check;
pub mod gqa;
pub mod gradcheck;
pub mod norm;
pub mod reference;
pub mod shortconv;

use thiserror::Error;

pub use block::{Block, Mixer};
pub use gqa::{gqa_backward, gqa_forward, GqaGrads, GqaParams};
pub use gradcheck::{grad_check, Differentiable, Gradients, Linear};
pub use norm::{rmsnorm_backward, rmsnorm_forward, swiglu_backward, swiglu_forward, SwiGlu};
pub use shortconv::{shortconv_backward, shortconv_forward, ShortConvGrads, ShortConvParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OpsError {
    #[error("{what}: expected shape {expected:?}, got {got:?}")]
    ShapeMismatch {
        what: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("{n_q} query heads are not divisible into {n_kv} key/value groups")]
    HeadGrouping { n_q: usize, n_kv: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(&'static str),
}

pub type Result<T> = std::result::Result<T, OpsError>;

pub(crate) fn expect_shape(what: &'static str, got: &[usize], expected: &[usize]) -> Result<()> {
    if got != expected {
        return Err(OpsError::ShapeMismatch {
            what,
            expected: expected.to_vec(),
            got: got.to_vec(),
        });
    }
    Ok(())
}

/// Uniform entries in `[-scale, scale)`.
pub fn random_matrix<R: rand::Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> ndarray::Array2<f64> {
    ndarray::Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-scale..scale))
}
