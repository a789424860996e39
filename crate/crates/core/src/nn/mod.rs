//! Numeric layers with hand-written backward passes.
//!
//! Batched sequences are stored step-major: `Seq<F>` holds one matrix per
//! timestep and step `t` only has `mask.rows(t)` rows. Rows beyond that are
//! inactive for the whole step, so callers that sort their batch by number of
//! active steps (longest first) never pay for padding.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use ndarray::{Array2, LinalgScalar, ScalarOperand};
use num_traits::Float;

pub mod attention;
pub mod dense;
pub mod embedding;
pub mod gradcheck;
pub mod lstm;

pub use attention::{attention_weighted_average, attention_weights, AttentionWeights};
pub use dense::{dense_softmax, softmax};
pub use embedding::{embedding_backward, embedding_forward};
pub use gradcheck::finite_difference_check;
pub use lstm::{bilstm_forward, lstm_cell, BiLstmWeights, LstmWeights};

use crate::error::NnError;

/// Floating point type the layers run in.
pub trait Real:
    Float
    + LinalgScalar
    + ScalarOperand
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + 'static
{
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// One matrix per timestep; step `t` has `SeqMask::rows(t)` rows.
pub type Seq<F> = Vec<Array2<F>>;

#[inline]
pub fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// Lower bound applied to probabilities before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// `-ln p[target]`, with `p` clamped below at 1e-12.
pub fn cross_entropy<F: Real>(p: &[F], target: usize) -> Result<F, NnError> {
    let value = p.get(target).ok_or(NnError::OutOfRange { index: target, size: p.len() })?;
    Ok(-value.max(F::of(PROB_FLOOR)).ln())
}

/// Batch × time activity mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeqMask {
    batch: usize,
    steps: usize,
    active: Vec<bool>,
    rows: Vec<usize>,
}

impl SeqMask {
    /// `active` is row-major `batch × steps`.
    pub fn new(batch: usize, steps: usize, active: Vec<bool>) -> Result<Self, NnError> {
        if active.len() != batch * steps {
            return Err(NnError::Shape(format!(
                "mask has {} entries, expected {batch}x{steps}",
                active.len()
            )));
        }
        let rows = (0..steps)
            .map(|t| {
                (0..batch)
                    .rev()
                    .find(|&b| active[b * steps + t])
                    .map_or(0, |b| b + 1)
            })
            .collect();
        Ok(Self { batch, steps, active, rows })
    }

    /// Single-sequence mask.
    pub fn single(mask: &[bool]) -> Self {
        Self::new(1, mask.len(), mask.to_vec()).expect("length matches")
    }

    pub fn all_active(batch: usize, steps: usize) -> Self {
        Self::new(batch, steps, vec![true; batch * steps]).expect("length matches")
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn is_active(&self, b: usize, t: usize) -> bool {
        self.active[b * self.steps + t]
    }

    /// Rows that must be computed at step `t` (one past the last active row).
    #[inline]
    pub fn rows(&self, t: usize) -> usize {
        self.rows[t]
    }

    /// True when every row below `rows(t)` is active at `t`.
    pub fn dense_at(&self, t: usize) -> bool {
        (0..self.rows[t]).all(|b| self.is_active(b, t))
    }
}

/// Fails if any value is NaN or infinite.
pub fn check_finite<F: Real>(values: &[F]) -> Result<(), NnError> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(NnError::NonFinite(v.as_f64())),
        None => Ok(()),
    }
}
