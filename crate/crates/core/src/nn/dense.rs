use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::Real;
use crate::error::NnError;

/// Softmax with max subtraction.
pub fn softmax<F: Real>(logits: ArrayView1<F>) -> Array1<F> {
    let mut out = logits.to_owned();
    softmax_in_place(out.as_slice_mut().expect("owned array is contiguous"));
    out
}

pub(crate) fn softmax_in_place<F: Real>(v: &mut [F]) {
    let max = v.iter().copied().fold(F::neg_infinity(), F::max);
    let mut total = F::zero();
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in v.iter_mut() {
        *x = *x / total;
    }
}

pub(crate) fn softmax_rows<F: Real>(m: &mut Array2<F>) {
    for mut row in m.axis_iter_mut(Axis(0)) {
        softmax_in_place(row.as_slice_mut().expect("standard layout rows"));
    }
}

/// `softmax(W v + b)`.
pub fn dense_softmax<F: Real>(v: ArrayView1<F>, w: ArrayView2<F>, b: ArrayView1<F>) -> Result<Array1<F>, NnError> {
    if w.ncols() != v.len() || w.nrows() != b.len() {
        return Err(NnError::Shape(format!(
            "dense got v {}, W {:?}, b {}",
            v.len(),
            w.dim(),
            b.len()
        )));
    }
    let logits = w.dot(&v) + b;
    Ok(softmax(logits.view()))
}
