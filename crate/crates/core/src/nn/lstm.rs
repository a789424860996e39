//! LSTM cell and (bi)directional sequence layers.
//!
//! Gate order in every weight matrix is `[input, forget, candidate, output]`.
//! Inactive (masked) timesteps carry state through unchanged and emit zeros.

use ndarray::linalg::general_mat_mul;
use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::{sigmoid, Real, Seq, SeqMask};
use crate::error::NnError;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights<F> {
    /// `4H × D` input projection.
    pub w: Array2<F>,
    /// `4H × H` recurrent projection.
    pub u: Array2<F>,
    /// `4H` bias.
    pub b: Array1<F>,
}

impl<F: Real> LstmWeights<F> {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            w: Array2::zeros((4 * hidden, input_dim)),
            u: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.u.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn check(&self) -> Result<(), NnError> {
        let h = self.hidden();
        if self.w.nrows() != 4 * h || self.u.nrows() != 4 * h || self.b.len() != 4 * h {
            return Err(NnError::Shape(format!(
                "lstm weights w {:?}, u {:?}, b {} are inconsistent",
                self.w.dim(),
                self.u.dim(),
                self.b.len()
            )));
        }
        Ok(())
    }
}

/// Forward and (optional) backward weights of one recurrent layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmWeights<F> {
    pub fwd: LstmWeights<F>,
    pub bwd: Option<LstmWeights<F>>,
}

impl<F: Real> BiLstmWeights<F> {
    pub fn zeros(input_dim: usize, hidden: usize, bidirectional: bool) -> Self {
        Self {
            fwd: LstmWeights::zeros(input_dim, hidden),
            bwd: bidirectional.then(|| LstmWeights::zeros(input_dim, hidden)),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.fwd.hidden() * if self.bwd.is_some() { 2 } else { 1 }
    }
}

pub(crate) struct StepCache<F> {
    h_prev: Array2<F>,
    c_prev: Array2<F>,
    /// Activated gates `[i, f, g, o]`, `n × 4H`.
    acts: Array2<F>,
    tanh_c: Array2<F>,
}

/// Computes one step for `n` rows; returns cache plus new `(h, c)`.
fn step_forward<F: Real>(
    x: ArrayView2<F>,
    h_prev: ArrayView2<F>,
    c_prev: ArrayView2<F>,
    w: &LstmWeights<F>,
) -> (StepCache<F>, Array2<F>, Array2<F>) {
    let n = x.nrows();
    let hidden = w.hidden();
    let mut acts = w.b.broadcast((n, 4 * hidden)).expect("bias broadcasts").to_owned();
    general_mat_mul(F::one(), &x, &w.w.t(), F::one(), &mut acts);
    general_mat_mul(F::one(), &h_prev, &w.u.t(), F::one(), &mut acts);

    let mut c = Array2::zeros((n, hidden));
    let mut tanh_c = Array2::zeros((n, hidden));
    let mut h = Array2::zeros((n, hidden));
    for r in 0..n {
        let mut z = acts.row_mut(r);
        let z = z.as_slice_mut().expect("row is contiguous");
        let cp = c_prev.row(r);
        for j in 0..hidden {
            let i = sigmoid(z[j]);
            let f = sigmoid(z[hidden + j]);
            let g = z[2 * hidden + j].tanh();
            let o = sigmoid(z[3 * hidden + j]);
            z[j] = i;
            z[hidden + j] = f;
            z[2 * hidden + j] = g;
            z[3 * hidden + j] = o;
            let cv = f * cp[j] + i * g;
            let tc = cv.tanh();
            c[[r, j]] = cv;
            tanh_c[[r, j]] = tc;
            h[[r, j]] = o * tc;
        }
    }
    let cache = StepCache {
        h_prev: h_prev.to_owned(),
        c_prev: c_prev.to_owned(),
        acts,
        tanh_c,
    };
    (cache, h, c)
}

/// Single LSTM step: returns `(h, c)`.
pub fn lstm_cell<F: Real>(
    x: ArrayView1<F>,
    h_prev: ArrayView1<F>,
    c_prev: ArrayView1<F>,
    w: &LstmWeights<F>,
) -> Result<(Array1<F>, Array1<F>), NnError> {
    w.check()?;
    let hidden = w.hidden();
    if x.len() != w.input_dim() || h_prev.len() != hidden || c_prev.len() != hidden {
        return Err(NnError::Shape(format!(
            "lstm_cell got x {}, h {}, c {} for D={}, H={hidden}",
            x.len(),
            h_prev.len(),
            c_prev.len(),
            w.input_dim()
        )));
    }
    let (_, h, c) = step_forward(
        x.insert_axis(Axis(0)),
        h_prev.insert_axis(Axis(0)),
        c_prev.insert_axis(Axis(0)),
        w,
    );
    Ok((h.row(0).to_owned(), c.row(0).to_owned()))
}

pub(crate) struct DirectionCache<F> {
    reverse: bool,
    steps: Vec<Option<StepCache<F>>>,
}

fn time_order(steps: usize, reverse: bool) -> Box<dyn Iterator<Item = usize>> {
    if reverse {
        Box::new((0..steps).rev())
    } else {
        Box::new(0..steps)
    }
}

/// Runs one direction over a batched sequence. Output step `t` is `rows(t) × H`.
pub(crate) fn direction_forward<F: Real>(
    xs: &Seq<F>,
    mask: &SeqMask,
    w: &LstmWeights<F>,
    reverse: bool,
) -> (Seq<F>, DirectionCache<F>) {
    let hidden = w.hidden();
    let steps = mask.steps();
    let mut h = Array2::zeros((mask.batch(), hidden));
    let mut c = Array2::zeros((mask.batch(), hidden));
    let mut outputs: Seq<F> = vec![Array2::zeros((0, hidden)); steps];
    let mut caches: Vec<Option<StepCache<F>>> = (0..steps).map(|_| None).collect();

    for t in time_order(steps, reverse) {
        let n = mask.rows(t);
        if n == 0 {
            continue;
        }
        let (cache, h_new, c_new) = step_forward(
            xs[t].view(),
            h.slice(s![..n, ..]),
            c.slice(s![..n, ..]),
            w,
        );
        let mut out = h_new;
        if mask.dense_at(t) {
            h.slice_mut(s![..n, ..]).assign(&out);
            c.slice_mut(s![..n, ..]).assign(&c_new);
        } else {
            for b in 0..n {
                if mask.is_active(b, t) {
                    h.row_mut(b).assign(&out.row(b));
                    c.row_mut(b).assign(&c_new.row(b));
                } else {
                    out.row_mut(b).fill(F::zero());
                }
            }
        }
        outputs[t] = out;
        caches[t] = Some(cache);
    }
    (outputs, DirectionCache { reverse, steps: caches })
}

/// Backpropagates through one direction. `douts[t]` is `rows(t) × H`.
/// Weight gradients accumulate into `grad`; returns input gradients.
pub(crate) fn direction_backward<F: Real>(
    xs: &Seq<F>,
    mask: &SeqMask,
    w: &LstmWeights<F>,
    cache: &DirectionCache<F>,
    douts: &[ArrayView2<F>],
    grad: &mut LstmWeights<F>,
) -> Seq<F> {
    let hidden = w.hidden();
    let steps = mask.steps();
    let mut dh = Array2::<F>::zeros((mask.batch(), hidden));
    let mut dc = Array2::<F>::zeros((mask.batch(), hidden));
    let mut dxs: Seq<F> = xs.iter().map(|x| Array2::zeros(x.dim())).collect();
    let one = F::one();

    for t in time_order(steps, !cache.reverse) {
        let n = mask.rows(t);
        let Some(step) = cache.steps[t].as_ref() else {
            continue;
        };
        let mut dgates = Array2::<F>::zeros((n, 4 * hidden));
        for b in 0..n {
            if !mask.is_active(b, t) {
                continue;
            }
            let acts = step.acts.row(b);
            let tanh_c = step.tanh_c.row(b);
            let c_prev = step.c_prev.row(b);
            let dout = douts[t].row(b);
            let mut dg_row = dgates.row_mut(b);
            for j in 0..hidden {
                let (i, f, g, o) = (
                    acts[j],
                    acts[hidden + j],
                    acts[2 * hidden + j],
                    acts[3 * hidden + j],
                );
                let tc = tanh_c[j];
                let dht = dh[[b, j]] + dout[j];
                let dct = dc[[b, j]] + dht * o * (one - tc * tc);
                dg_row[j] = dct * g * i * (one - i);
                dg_row[hidden + j] = dct * c_prev[j] * f * (one - f);
                dg_row[2 * hidden + j] = dct * i * (one - g * g);
                dg_row[3 * hidden + j] = dht * tc * o * (one - o);
                dc[[b, j]] = dct * f;
            }
        }
        general_mat_mul(one, &dgates.t(), &xs[t], one, &mut grad.w);
        general_mat_mul(one, &dgates.t(), &step.h_prev, one, &mut grad.u);
        grad.b += &dgates.sum_axis(Axis(0));
        general_mat_mul(one, &dgates, &w.w, F::zero(), &mut dxs[t]);
        let dh_prev = dgates.dot(&w.u);
        for b in 0..n {
            if mask.is_active(b, t) {
                dh.row_mut(b).assign(&dh_prev.row(b));
            }
        }
    }
    dxs
}

pub(crate) struct LayerCache<F> {
    fwd: DirectionCache<F>,
    bwd: Option<DirectionCache<F>>,
}

/// Output step `t` is `concat(h_fwd, h_bwd)`, `rows(t) × output_dim`.
pub(crate) fn layer_forward<F: Real>(
    xs: &Seq<F>,
    mask: &SeqMask,
    weights: &BiLstmWeights<F>,
) -> (Seq<F>, LayerCache<F>) {
    let (fwd_out, fwd) = direction_forward(xs, mask, &weights.fwd, false);
    match &weights.bwd {
        None => (fwd_out, LayerCache { fwd, bwd: None }),
        Some(bw) => {
            let (bwd_out, bwd) = direction_forward(xs, mask, bw, true);
            let out = fwd_out
                .iter()
                .zip(&bwd_out)
                .map(|(a, b)| concatenate(Axis(1), &[a.view(), b.view()]).expect("rows agree"))
                .collect();
            (out, LayerCache { fwd, bwd: Some(bwd) })
        }
    }
}

pub(crate) fn layer_backward<F: Real>(
    xs: &Seq<F>,
    mask: &SeqMask,
    weights: &BiLstmWeights<F>,
    cache: &LayerCache<F>,
    douts: &Seq<F>,
    grad: &mut BiLstmWeights<F>,
) -> Seq<F> {
    let hidden = weights.fwd.hidden();
    let fwd_d: Vec<_> = douts.iter().map(|d| d.slice(s![.., ..hidden])).collect();
    let mut dxs = direction_backward(xs, mask, &weights.fwd, &cache.fwd, &fwd_d, &mut grad.fwd);
    if let (Some(bw), Some(bc), Some(bg)) = (&weights.bwd, &cache.bwd, grad.bwd.as_mut()) {
        let bwd_d: Vec<_> = douts.iter().map(|d| d.slice(s![.., hidden..])).collect();
        let dxb = direction_backward(xs, mask, bw, bc, &bwd_d, bg);
        for (a, b) in dxs.iter_mut().zip(dxb) {
            *a += &b;
        }
    }
    dxs
}

/// Bidirectional layer over one sequence `T × D`; returns `T × 2H`.
/// Masked rows are zero and do not advance either direction's state.
pub fn bilstm_forward<F: Real>(
    x: ArrayView2<F>,
    fwd: &LstmWeights<F>,
    bwd: &LstmWeights<F>,
    mask: &[bool],
) -> Result<Array2<F>, NnError> {
    fwd.check()?;
    bwd.check()?;
    let (steps, dim) = x.dim();
    if mask.len() != steps || fwd.input_dim() != dim || bwd.input_dim() != dim || fwd.hidden() != bwd.hidden() {
        return Err(NnError::Shape(format!(
            "bilstm got x {:?}, mask {}, fwd {:?}, bwd {:?}",
            x.dim(),
            mask.len(),
            fwd.w.dim(),
            bwd.w.dim()
        )));
    }
    let seq_mask = SeqMask::single(mask);
    let xs: Seq<F> = (0..steps)
        .map(|t| x.slice(s![t..t + seq_mask.rows(t), ..]).to_owned())
        .collect();
    let weights = BiLstmWeights { fwd: fwd.clone(), bwd: Some(bwd.clone()) };
    let (out, _) = layer_forward(&xs, &seq_mask, &weights);
    let mut result = Array2::zeros((steps, 2 * fwd.hidden()));
    for (t, row) in out.iter().enumerate() {
        if row.nrows() == 1 {
            result.row_mut(t).assign(&row.row(0));
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_weights(rng: &mut ChaCha8Rng, d: usize, h: usize) -> LstmWeights<f64> {
        let mut gen = |r, c| Array2::from_shape_fn((r, c), |_| rng.gen_range(-0.8..0.8));
        let w = gen(4 * h, d);
        let u = gen(4 * h, h);
        let b = gen(1, 4 * h).row(0).to_owned();
        LstmWeights { w, u, b }
    }

    /// Scalar-loop LSTM step written directly from the gate equations.
    fn oracle_cell(x: &[f64], h: &[f64], c: &[f64], w: &LstmWeights<f64>) -> (Vec<f64>, Vec<f64>) {
        let hid = h.len();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let pre = |k: usize| {
            let mut acc = w.b[k];
            for (d, xv) in x.iter().enumerate() {
                acc += w.w[[k, d]] * xv;
            }
            for (j, hv) in h.iter().enumerate() {
                acc += w.u[[k, j]] * hv;
            }
            acc
        };
        let mut hn = vec![0.0; hid];
        let mut cn = vec![0.0; hid];
        for j in 0..hid {
            let i = sig(pre(j));
            let f = sig(pre(hid + j));
            let g = pre(2 * hid + j).tanh();
            let o = sig(pre(3 * hid + j));
            cn[j] = f * c[j] + i * g;
            hn[j] = o * cn[j].tanh();
        }
        (hn, cn)
    }

    #[test]
    fn zero_everything_gives_zero_state() {
        let w = LstmWeights::<f64>::zeros(3, 2);
        let (h, c) = lstm_cell(
            Array1::zeros(3).view(),
            Array1::zeros(2).view(),
            Array1::zeros(2).view(),
            &w,
        )
        .unwrap();
        assert_eq!(h, array![0.0, 0.0]);
        assert_eq!(c, array![0.0, 0.0]);
    }

    #[test]
    fn zero_weights_with_unit_cell() {
        let w = LstmWeights::<f64>::zeros(1, 1);
        let (h, c) = lstm_cell(array![0.0].view(), array![0.0].view(), array![1.0].view(), &w).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-15);
        assert!((h[0] - 0.5 * 0.5f64.tanh()).abs() < 1e-15);
        assert!((h[0] - 0.23106).abs() < 1e-5);
    }

    #[test]
    fn cell_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let (d, h) = (rng.gen_range(1..6), rng.gen_range(1..5));
            let w = random_weights(&mut rng, d, h);
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let hp: Vec<f64> = (0..h).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let cp: Vec<f64> = (0..h).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (hn, cn) = lstm_cell(
                ArrayView1::from(&x),
                ArrayView1::from(&hp),
                ArrayView1::from(&cp),
                &w,
            )
            .unwrap();
            let (ho, co) = oracle_cell(&x, &hp, &cp, &w);
            for j in 0..h {
                assert!((hn[j] - ho[j]).abs() < 1e-12);
                assert!((cn[j] - co[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cell_rejects_bad_shapes() {
        let w = LstmWeights::<f64>::zeros(3, 2);
        let err = lstm_cell(Array1::zeros(2).view(), Array1::zeros(2).view(), Array1::zeros(2).view(), &w);
        assert!(matches!(err, Err(NnError::Shape(_))));
    }

    #[test]
    fn single_step_bilstm_is_two_cells() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fwd = random_weights(&mut rng, 3, 2);
        let bwd = random_weights(&mut rng, 3, 2);
        let x = array![[0.3, -0.2, 0.9]];
        let out = bilstm_forward(x.view(), &fwd, &bwd, &[true]).unwrap();
        let z = Array1::zeros(2);
        let (hf, _) = lstm_cell(x.row(0), z.view(), z.view(), &fwd).unwrap();
        let (hb, _) = lstm_cell(x.row(0), z.view(), z.view(), &bwd).unwrap();
        let expected = concatenate(Axis(0), &[hf.view(), hb.view()]).unwrap();
        assert_eq!(out.row(0), expected);
    }

    #[test]
    fn all_masked_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let fwd = random_weights(&mut rng, 2, 3);
        let bwd = random_weights(&mut rng, 2, 3);
        let x = Array2::from_elem((4, 2), 0.7);
        let out = bilstm_forward(x.view(), &fwd, &bwd, &[false; 4]).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_half_is_reversed_forward_recurrence() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let fwd = random_weights(&mut rng, 3, 4);
        let bwd = random_weights(&mut rng, 3, 4);
        let x = Array2::from_shape_fn((5, 3), |_| rng.gen_range(-1.0..1.0));
        let out = bilstm_forward(x.view(), &fwd, &bwd, &[true; 5]).unwrap();

        // run the backward weights forward in time over reversed input
        let mut h = Array1::zeros(4);
        let mut c = Array1::zeros(4);
        for t in (0..5).rev() {
            let (hn, cn) = lstm_cell(x.row(t), h.view(), c.view(), &bwd).unwrap();
            for j in 0..4 {
                assert!((out[[t, 4 + j]] - hn[j]).abs() < 1e-12);
            }
            h = hn;
            c = cn;
        }
    }

    #[test]
    fn masked_prefix_matches_unpadded_sequence() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let fwd = random_weights(&mut rng, 2, 3);
        let bwd = random_weights(&mut rng, 2, 3);
        let x = Array2::from_shape_fn((6, 2), |_| rng.gen_range(-1.0..1.0));
        let padded = bilstm_forward(x.view(), &fwd, &bwd, &[false, false, true, true, true, true]).unwrap();
        let tail = x.slice(s![2.., ..]);
        let plain = bilstm_forward(tail, &fwd, &bwd, &[true; 4]).unwrap();
        assert_eq!(padded.slice(s![2.., ..]), plain);
        assert!(padded.slice(s![..2, ..]).iter().all(|&v| v == 0.0));
    }
}
