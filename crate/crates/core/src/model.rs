//! The character language model: embedding → stacked (bi)LSTMs → attention
//! pooling over the concatenation of the embedding and every LSTM output →
//! dense softmax over the vocabulary.

use ndarray::linalg::general_mat_mul;
use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{CharVocab, PAD_ID};
use crate::error::NnError;
use crate::nn::attention::{attention_backward, attention_forward, AttentionCache};
use crate::nn::dense::softmax_rows;
use crate::nn::embedding::{gather_seq, scatter_seq};
use crate::nn::lstm::{layer_backward, layer_forward, LayerCache};
use crate::nn::{AttentionWeights, BiLstmWeights, Real, Seq, SeqMask, PROB_FLOOR};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub max_length: usize,
    pub embed_dim: usize,
    pub lstm_units: usize,
    pub lstm_layers: usize,
    pub bidirectional: bool,
    pub vocab_size: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// T=40, 100-d embedding, two bidirectional 128-unit layers.
    pub fn new(vocab_size: usize) -> Self {
        Self {
            max_length: 40,
            embed_dim: 100,
            lstm_units: 128,
            lstm_layers: 2,
            bidirectional: true,
            vocab_size,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.max_length == 0 || self.embed_dim == 0 || self.lstm_units == 0 || self.lstm_layers == 0 {
            return Err(NnError::Shape(format!("all model dimensions must be >= 1: {self:?}")));
        }
        if self.vocab_size < 3 {
            return Err(NnError::Shape(format!(
                "vocabulary of size {} has no corpus characters",
                self.vocab_size
            )));
        }
        Ok(())
    }

    pub fn directions(&self) -> usize {
        if self.bidirectional {
            2
        } else {
            1
        }
    }

    pub fn layer_output_dim(&self) -> usize {
        self.lstm_units * self.directions()
    }

    /// Width of the per-step feature vector the attention layer sees.
    pub fn feature_dim(&self) -> usize {
        self.embed_dim + self.lstm_layers * self.layer_output_dim()
    }

    /// `(name, shape)` for every tensor, in storage order.
    pub fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let (v, e, h) = (self.vocab_size, self.embed_dim, self.lstm_units);
        let mut out = vec![("embedding".to_string(), vec![v, e])];
        for l in 0..self.lstm_layers {
            let input = if l == 0 { e } else { self.layer_output_dim() };
            let dirs: &[&str] = if self.bidirectional { &["fwd", "bwd"] } else { &["fwd"] };
            for dir in dirs {
                out.push((format!("lstm{l}.{dir}.w"), vec![4 * h, input]));
                out.push((format!("lstm{l}.{dir}.u"), vec![4 * h, h]));
                out.push((format!("lstm{l}.{dir}.b"), vec![4 * h]));
            }
        }
        let d = self.feature_dim();
        out.push(("attention.w".into(), vec![d]));
        out.push(("attention.b".into(), vec![]));
        out.push(("dense.w".into(), vec![v, d]));
        out.push(("dense.b".into(), vec![v]));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F> {
    pub embedding: Array2<F>,
    pub layers: Vec<BiLstmWeights<F>>,
    pub attention: AttentionWeights<F>,
    pub dense_w: Array2<F>,
    pub dense_b: Array1<F>,
}

impl<F: Real> ModelParams<F> {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let layers = (0..cfg.lstm_layers)
            .map(|l| {
                let input = if l == 0 { cfg.embed_dim } else { cfg.layer_output_dim() };
                BiLstmWeights::zeros(input, cfg.lstm_units, cfg.bidirectional)
            })
            .collect();
        Self {
            embedding: Array2::zeros((cfg.vocab_size, cfg.embed_dim)),
            layers,
            attention: AttentionWeights::zeros(cfg.feature_dim()),
            dense_w: Array2::zeros((cfg.vocab_size, cfg.feature_dim())),
            dense_b: Array1::zeros(cfg.vocab_size),
        }
    }

    /// Tensors in the order of [`ModelConfig::tensor_shapes`].
    pub fn tensors(&self) -> Vec<&[F]> {
        let mut out: Vec<&[F]> = vec![self.embedding.as_slice().expect("contiguous")];
        for layer in &self.layers {
            for dir in std::iter::once(&layer.fwd).chain(layer.bwd.as_ref()) {
                out.push(dir.w.as_slice().expect("contiguous"));
                out.push(dir.u.as_slice().expect("contiguous"));
                out.push(dir.b.as_slice().expect("contiguous"));
            }
        }
        out.push(self.attention.w.as_slice().expect("contiguous"));
        out.push(std::slice::from_ref(&self.attention.b));
        out.push(self.dense_w.as_slice().expect("contiguous"));
        out.push(self.dense_b.as_slice().expect("contiguous"));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [F]> {
        let mut out: Vec<&mut [F]> = vec![self.embedding.as_slice_mut().expect("contiguous")];
        for layer in &mut self.layers {
            for dir in std::iter::once(&mut layer.fwd).chain(layer.bwd.as_mut()) {
                out.push(dir.w.as_slice_mut().expect("contiguous"));
                out.push(dir.u.as_slice_mut().expect("contiguous"));
                out.push(dir.b.as_slice_mut().expect("contiguous"));
            }
        }
        out.push(self.attention.w.as_slice_mut().expect("contiguous"));
        out.push(std::slice::from_mut(&mut self.attention.b));
        out.push(self.dense_w.as_slice_mut().expect("contiguous"));
        out.push(self.dense_b.as_slice_mut().expect("contiguous"));
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<F> {
        self.tensors().concat()
    }

    pub fn from_flat(cfg: &ModelConfig, flat: &[F]) -> Result<Self, NnError> {
        let mut params = Self::zeros(cfg);
        if flat.len() != params.num_params() {
            return Err(NnError::Shape(format!(
                "{} values for {} parameters",
                flat.len(),
                params.num_params()
            )));
        }
        let mut offset = 0;
        for t in params.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(params)
    }

    pub fn cast<G: Real>(&self) -> ModelParams<G> {
        let map2 = |a: &Array2<F>| a.mapv(|x| G::of(x.as_f64()));
        let map1 = |a: &Array1<F>| a.mapv(|x| G::of(x.as_f64()));
        ModelParams {
            embedding: map2(&self.embedding),
            layers: self
                .layers
                .iter()
                .map(|l| BiLstmWeights {
                    fwd: crate::nn::LstmWeights { w: map2(&l.fwd.w), u: map2(&l.fwd.u), b: map1(&l.fwd.b) },
                    bwd: l.bwd.as_ref().map(|d| crate::nn::LstmWeights {
                        w: map2(&d.w),
                        u: map2(&d.u),
                        b: map1(&d.b),
                    }),
                })
                .collect(),
            attention: AttentionWeights {
                w: map1(&self.attention.w),
                b: G::of(self.attention.b.as_f64()),
            },
            dense_w: map2(&self.dense_w),
            dense_b: map1(&self.dense_b),
        }
    }

    /// Euclidean norm over every parameter, accumulated in f64.
    pub fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| {
                let v = v.as_f64();
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: F) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Glorot limit `sqrt(6 / (fan_in + fan_out))` for a tensor of the given shape.
pub fn glorot_limit(shape: &[usize]) -> f64 {
    let (fan_out, fan_in) = match shape {
        [n] => (1, *n),
        [rows, cols] => (*rows, *cols),
        _ => (1, 1),
    };
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Seeded Glorot-uniform init; biases zero except the forget gate (one).
pub fn init_model(cfg: &ModelConfig) -> Result<ModelParams<f64>, NnError> {
    cfg.validate()?;
    let mut params = ModelParams::<f64>::zeros(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let shapes = cfg.tensor_shapes();
    for ((name, shape), tensor) in shapes.iter().zip(params.tensors_mut()) {
        let is_bias = name.ends_with(".b") || name == "attention.b";
        if is_bias {
            continue;
        }
        let limit = glorot_limit(shape);
        tensor.iter_mut().for_each(|v| *v = rng.gen_range(-limit..limit));
    }
    let h = cfg.lstm_units;
    for layer in &mut params.layers {
        for dir in std::iter::once(&mut layer.fwd).chain(layer.bwd.as_mut()) {
            dir.b.slice_mut(s![h..2 * h]).fill(1.0);
        }
    }
    Ok(params)
}

/// A batch laid out longest-context-first so padding is never computed.
struct PreparedBatch {
    ids: Vec<u32>,
    mask: SeqMask,
    /// `order[i]` is the caller's index of sorted row `i`.
    order: Vec<usize>,
}

fn prepare_batch(cfg: &ModelConfig, contexts: &[&[u32]]) -> Result<PreparedBatch, NnError> {
    let steps = cfg.max_length;
    let mut active_counts = Vec::with_capacity(contexts.len());
    for ctx in contexts {
        if ctx.len() != steps {
            return Err(NnError::Shape(format!(
                "context length {} differs from max length {steps}",
                ctx.len()
            )));
        }
        if let Some(&bad) = ctx.iter().find(|&&id| id as usize >= cfg.vocab_size) {
            return Err(NnError::OutOfRange { index: bad as usize, size: cfg.vocab_size });
        }
        active_counts.push(ctx.iter().filter(|&&id| id != PAD_ID).count().max(1));
    }
    let mut order: Vec<usize> = (0..contexts.len()).collect();
    order.sort_by(|&a, &b| active_counts[b].cmp(&active_counts[a]).then(a.cmp(&b)));

    let mut ids = Vec::with_capacity(contexts.len() * steps);
    let mut active = Vec::with_capacity(contexts.len() * steps);
    for &i in &order {
        let ctx = contexts[i];
        ids.extend_from_slice(ctx);
        let row_start = active.len();
        active.extend(ctx.iter().map(|&id| id != PAD_ID));
        if !active[row_start..].contains(&true) {
            // context of pure padding: attend to the final position
            *active.last_mut().expect("steps >= 1") = true;
        }
    }
    let mask = SeqMask::new(contexts.len(), steps, active)?;
    Ok(PreparedBatch { ids, mask, order })
}

struct ForwardPass<F> {
    emb: Seq<F>,
    layer_outs: Vec<Seq<F>>,
    layer_caches: Vec<LayerCache<F>>,
    feats: Seq<F>,
    attention: AttentionCache<F>,
    pooled: Array2<F>,
    /// Sorted-row order.
    probs: Array2<F>,
}

fn run_forward<F: Real>(params: &ModelParams<F>, batch: &PreparedBatch) -> Result<ForwardPass<F>, NnError> {
    let mask = &batch.mask;
    let emb = gather_seq(&batch.ids, mask, &params.embedding);
    let mut layer_outs: Vec<Seq<F>> = Vec::with_capacity(params.layers.len());
    let mut layer_caches = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let input = layer_outs.last().unwrap_or(&emb);
        let (out, cache) = layer_forward(input, mask, layer);
        layer_outs.push(out);
        layer_caches.push(cache);
    }
    let feats: Seq<F> = (0..mask.steps())
        .map(|t| {
            let mut parts = vec![emb[t].view()];
            parts.extend(layer_outs.iter().map(|o| o[t].view()));
            concatenate(Axis(1), &parts).expect("row counts agree")
        })
        .collect();
    let (pooled, attention) = attention_forward(&feats, mask, &params.attention)?;
    let mut probs = pooled.dot(&params.dense_w.t());
    probs += &params.dense_b;
    softmax_rows(&mut probs);
    Ok(ForwardPass { emb, layer_outs, layer_caches, feats, attention, pooled, probs })
}

/// Next-character distribution for one left-padded context of length T.
pub fn forward<F: Real>(params: &ModelParams<F>, cfg: &ModelConfig, context: &[u32]) -> Result<Array1<F>, NnError> {
    let probs = forward_batch(params, cfg, &[context])?;
    Ok(probs.row(0).to_owned())
}

/// Distributions for many contexts; row `i` belongs to `contexts[i]`.
pub fn forward_batch<F: Real>(
    params: &ModelParams<F>,
    cfg: &ModelConfig,
    contexts: &[&[u32]],
) -> Result<Array2<F>, NnError> {
    let batch = prepare_batch(cfg, contexts)?;
    let pass = run_forward(params, &batch)?;
    let mut out = Array2::zeros(pass.probs.dim());
    for (sorted, &orig) in batch.order.iter().enumerate() {
        out.row_mut(orig).assign(&pass.probs.row(sorted));
    }
    Ok(out)
}

/// Attention weights over the context positions (zero at padding).
pub fn attention_profile<F: Real>(params: &ModelParams<F>, cfg: &ModelConfig, context: &[u32]) -> Result<Array1<F>, NnError> {
    let batch = prepare_batch(cfg, &[context])?;
    let pass = run_forward(params, &batch)?;
    Ok(pass.attention.alpha().row(0).to_owned())
}

/// Summed cross-entropy over `(context, target)` pairs and its gradient.
pub fn loss_and_grad<F: Real>(
    params: &ModelParams<F>,
    cfg: &ModelConfig,
    contexts: &[&[u32]],
    targets: &[u32],
) -> Result<(f64, ModelParams<F>), NnError> {
    if contexts.len() != targets.len() || contexts.is_empty() {
        return Err(NnError::Shape(format!(
            "{} contexts for {} targets",
            contexts.len(),
            targets.len()
        )));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t as usize >= cfg.vocab_size) {
        return Err(NnError::OutOfRange { index: bad as usize, size: cfg.vocab_size });
    }
    let batch = prepare_batch(cfg, contexts)?;
    let pass = run_forward(params, &batch)?;
    let mask = &batch.mask;
    let floor = F::of(PROB_FLOOR);

    let mut loss = 0.0f64;
    let mut dlogits = pass.probs.clone();
    for (row, &orig) in batch.order.iter().enumerate() {
        let target = targets[orig] as usize;
        let p = pass.probs[[row, target]];
        loss -= p.max(floor).ln().as_f64();
        if p < floor {
            // clamped: the loss is flat in the logits here
            dlogits.row_mut(row).fill(F::zero());
        } else {
            dlogits[[row, target]] -= F::one();
        }
    }

    let mut grad = ModelParams::<F>::zeros(cfg);
    general_mat_mul(F::one(), &dlogits.t(), &pass.pooled, F::zero(), &mut grad.dense_w);
    grad.dense_b = dlogits.sum_axis(Axis(0));
    let dpooled = dlogits.dot(&params.dense_w);

    let dfeats = attention_backward(
        &pass.feats,
        mask,
        &params.attention,
        &pass.attention,
        dpooled.view(),
        &mut grad.attention,
    );

    let e = cfg.embed_dim;
    let width = cfg.layer_output_dim();
    let slice_cols = |d: &Array2<F>, from: usize, to: usize| -> Array2<F> { d.slice(s![.., from..to]).to_owned() };
    let mut demb: Seq<F> = dfeats.iter().map(|d| slice_cols(d, 0, e)).collect();
    let mut douts: Vec<Seq<F>> = (0..params.layers.len())
        .map(|l| {
            let from = e + l * width;
            dfeats.iter().map(|d| slice_cols(d, from, from + width)).collect()
        })
        .collect();

    for l in (0..params.layers.len()).rev() {
        let input = if l == 0 { &pass.emb } else { &pass.layer_outs[l - 1] };
        let dxs = layer_backward(
            input,
            mask,
            &params.layers[l],
            &pass.layer_caches[l],
            &douts[l],
            &mut grad.layers[l],
        );
        let sink = if l == 0 { &mut demb } else { &mut douts[l - 1] };
        for (acc, dx) in sink.iter_mut().zip(dxs) {
            *acc += &dx;
        }
    }
    scatter_seq(&batch.ids, mask, &demb, &mut grad.embedding);
    Ok((loss, grad))
}

/// Trained weights together with the configuration and vocabulary they need.
#[derive(Debug, Clone, PartialEq)]
pub struct CharModel {
    pub config: ModelConfig,
    pub vocab: CharVocab,
    pub params: ModelParams<f64>,
}

impl CharModel {
    pub fn new(config: ModelConfig, vocab: CharVocab, params: ModelParams<f64>) -> Self {
        Self { config, vocab, params }
    }
}

/// Anything that maps a left-padded context to a next-character distribution.
pub trait LanguageModel {
    fn max_length(&self) -> usize;
    fn next_distribution(&self, context: &[u32]) -> Result<Vec<f64>, NnError>;
}

impl LanguageModel for CharModel {
    fn max_length(&self) -> usize {
        self.config.max_length
    }

    fn next_distribution(&self, context: &[u32]) -> Result<Vec<f64>, NnError> {
        Ok(forward(&self.params, &self.config, context)?.to_vec())
    }
}
