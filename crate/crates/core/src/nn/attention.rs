//! Attention-weighted average over timesteps.
//!
//! Each active timestep gets a scalar score `w·f_t + b`; scores are softmaxed
//! over active steps and the features are averaged with those weights.

use ndarray::{s, Array1, Array2, ArrayView2};

use super::{Real, Seq, SeqMask};
use crate::error::NnError;

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights<F> {
    pub w: Array1<F>,
    pub b: F,
}

impl<F: Real> AttentionWeights<F> {
    pub fn zeros(dim: usize) -> Self {
        Self { w: Array1::zeros(dim), b: F::zero() }
    }
}

pub(crate) struct AttentionCache<F> {
    /// `batch × steps`; zero at inactive positions.
    alpha: Array2<F>,
}

impl<F: Real> AttentionCache<F> {
    pub fn alpha(&self) -> &Array2<F> {
        &self.alpha
    }
}

/// Pools `feats` (step `t` is `rows(t) × D`) into a `batch × D` matrix.
pub(crate) fn attention_forward<F: Real>(
    feats: &Seq<F>,
    mask: &SeqMask,
    aw: &AttentionWeights<F>,
) -> Result<(Array2<F>, AttentionCache<F>), NnError> {
    let (batch, steps) = (mask.batch(), mask.steps());
    let dim = aw.w.len();
    let mut scores = Array2::from_elem((batch, steps), F::neg_infinity());
    for (t, f) in feats.iter().enumerate() {
        let u = f.dot(&aw.w);
        for b in 0..f.nrows() {
            if mask.is_active(b, t) {
                scores[[b, t]] = u[b] + aw.b;
            }
        }
    }

    let mut alpha = Array2::zeros((batch, steps));
    for b in 0..batch {
        let row = scores.row(b);
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        if max == F::neg_infinity() {
            return Err(NnError::EmptyMask);
        }
        let mut total = F::zero();
        for t in 0..steps {
            if mask.is_active(b, t) {
                let e = (row[t] - max).exp();
                alpha[[b, t]] = e;
                total += e;
            }
        }
        alpha.row_mut(b).mapv_inplace(|a| a / total);
    }

    let mut pooled = Array2::zeros((batch, dim));
    for (t, f) in feats.iter().enumerate() {
        for b in 0..f.nrows() {
            let a = alpha[[b, t]];
            if a != F::zero() {
                pooled.row_mut(b).scaled_add(a, &f.row(b));
            }
        }
    }
    Ok((pooled, AttentionCache { alpha }))
}

/// Returns per-step feature gradients; accumulates into `grad`.
pub(crate) fn attention_backward<F: Real>(
    feats: &Seq<F>,
    mask: &SeqMask,
    aw: &AttentionWeights<F>,
    cache: &AttentionCache<F>,
    dpooled: ArrayView2<F>,
    grad: &mut AttentionWeights<F>,
) -> Seq<F> {
    let (batch, steps) = (mask.batch(), mask.steps());
    // d alpha[b,t] = dpooled[b] · f_t[b]
    let mut dalpha = Array2::<F>::zeros((batch, steps));
    for (t, f) in feats.iter().enumerate() {
        let n = f.nrows();
        let dots = (f * &dpooled.slice(s![..n, ..])).sum_axis(ndarray::Axis(1));
        for b in 0..n {
            dalpha[[b, t]] = dots[b];
        }
    }
    let alpha = &cache.alpha;
    let mut dscore = Array2::<F>::zeros((batch, steps));
    for b in 0..batch {
        let weighted: F = (0..steps).map(|t| alpha[[b, t]] * dalpha[[b, t]]).sum();
        for t in 0..steps {
            dscore[[b, t]] = alpha[[b, t]] * (dalpha[[b, t]] - weighted);
        }
    }

    feats
        .iter()
        .enumerate()
        .map(|(t, f)| {
            let n = f.nrows();
            let mut df = Array2::zeros(f.dim());
            for b in 0..n {
                let (a, ds) = (alpha[[b, t]], dscore[[b, t]]);
                if a == F::zero() {
                    continue;
                }
                grad.w.scaled_add(ds, &f.row(b));
                grad.b += ds;
                let mut row = df.row_mut(b);
                row.scaled_add(a, &dpooled.row(b));
                row.scaled_add(ds, &aw.w);
            }
            df
        })
        .collect()
}

/// Single-sequence pooling of `feats` (`T × D`).
pub fn attention_weighted_average<F: Real>(
    feats: ArrayView2<F>,
    aw: &AttentionWeights<F>,
    mask: &[bool],
) -> Result<Array1<F>, NnError> {
    let (steps, dim) = feats.dim();
    if mask.len() != steps || aw.w.len() != dim {
        return Err(NnError::Shape(format!(
            "attention got features {:?}, mask {}, weights {}",
            feats.dim(),
            mask.len(),
            aw.w.len()
        )));
    }
    let seq_mask = SeqMask::single(mask);
    let seq: Seq<F> = (0..steps)
        .map(|t| feats.slice(s![t..t + seq_mask.rows(t), ..]).to_owned())
        .collect();
    let (pooled, _) = attention_forward(&seq, &seq_mask, aw)?;
    Ok(pooled.row(0).to_owned())
}

/// Attention weights for a single sequence (zeros at masked steps).
pub fn attention_weights<F: Real>(
    feats: ArrayView2<F>,
    aw: &AttentionWeights<F>,
    mask: &[bool],
) -> Result<Array1<F>, NnError> {
    let steps = feats.nrows();
    if mask.len() != steps || aw.w.len() != feats.ncols() {
        return Err(NnError::Shape("attention inputs disagree".into()));
    }
    let seq_mask = SeqMask::single(mask);
    let seq: Seq<F> = (0..steps)
        .map(|t| feats.slice(s![t..t + seq_mask.rows(t), ..]).to_owned())
        .collect();
    let (_, cache) = attention_forward(&seq, &seq_mask, aw)?;
    Ok(cache.alpha.row(0).to_owned())
}
