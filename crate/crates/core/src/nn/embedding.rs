use ndarray::{Array2, ArrayView2};

use super::{Real, Seq, SeqMask};
use crate::error::NnError;

/// Row `t` of the result is `table[ids[t]]`.
pub fn embedding_forward<F: Real>(ids: &[u32], table: ArrayView2<F>) -> Result<Array2<F>, NnError> {
    let (vocab, dim) = table.dim();
    let mut out = Array2::zeros((ids.len(), dim));
    for (t, &id) in ids.iter().enumerate() {
        let id = id as usize;
        if id >= vocab {
            return Err(NnError::OutOfRange { index: id, size: vocab });
        }
        out.row_mut(t).assign(&table.row(id));
    }
    Ok(out)
}

/// Accumulates `dout` rows into the table gradient.
pub fn embedding_backward<F: Real>(ids: &[u32], dout: ArrayView2<F>, grad: &mut Array2<F>) {
    for (t, &id) in ids.iter().enumerate() {
        let mut row = grad.row_mut(id as usize);
        row += &dout.row(t);
    }
}

/// Batched gather: `ids` is row-major `batch × steps`; ids are assumed in range.
pub(crate) fn gather_seq<F: Real>(ids: &[u32], mask: &SeqMask, table: &Array2<F>) -> Seq<F> {
    let steps = mask.steps();
    let dim = table.ncols();
    (0..steps)
        .map(|t| {
            let n = mask.rows(t);
            let mut x = Array2::zeros((n, dim));
            for b in 0..n {
                x.row_mut(b).assign(&table.row(ids[b * steps + t] as usize));
            }
            x
        })
        .collect()
}

pub(crate) fn scatter_seq<F: Real>(ids: &[u32], mask: &SeqMask, dxs: &Seq<F>, grad: &mut Array2<F>) {
    let steps = mask.steps();
    for (t, dx) in dxs.iter().enumerate() {
        for b in 0..dx.nrows() {
            if mask.is_active(b, t) {
                let mut row = grad.row_mut(ids[b * steps + t] as usize);
                row += &dx.row(b);
            }
        }
    }
}
