//! Mini-batch training with Adam or RMSProp and global-norm clipping.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::save_checkpoint;
use crate::encoder::{encode_lines, CharVocab, EncodedSample};
use crate::error::TrainError;
use crate::model::{loss_and_grad, ModelConfig, ModelParams};
use crate::nn::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
    Rmsprop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Precision {
    #[serde(rename = "f32")]
    F32,
    #[serde(rename = "f64")]
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// RMSProp decay.
    pub rho: f64,
    pub grad_clip_norm: f64,
    pub shuffle_seed: u64,
    pub precision: Precision,
    /// Omit wall-clock timings so reports are byte-reproducible.
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 14,
            batch_size: 128,
            learning_rate: 1e-3,
            optimizer: Optimizer::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            rho: 0.9,
            grad_clip_norm: 5.0,
            shuffle_seed: 0,
            precision: Precision::F32,
            deterministic: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch size must be >= 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be finite and non-negative");
        }
        if !(self.grad_clip_norm > 0.0) {
            return bad("gradient clip norm must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-sample cross-entropy of each epoch.
    pub epoch_losses: Vec<f64>,
    pub sample_count: usize,
    /// Empty in deterministic mode.
    pub epoch_seconds: Vec<f64>,
    pub config: TrainConfig,
    pub model: ModelConfig,
    /// File name of the last checkpoint, relative to the checkpoint directory.
    pub checkpoint: Option<String>,
    pub best_checkpoint: Option<String>,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_losses.last().copied()
    }
}

pub const LAST_CHECKPOINT: &str = "last.mgck";
pub const BEST_CHECKPOINT: &str = "best.mgck";

/// Scales `grad` so its global norm is at most `max_norm`. Returns the norm
/// before clipping.
pub fn clip_global_norm<F: Real>(grad: &mut ModelParams<F>, max_norm: f64) -> f64 {
    let norm = grad.global_norm();
    if norm > max_norm {
        grad.scale(F::of(max_norm / norm));
    }
    norm
}

struct OptimizerState<F> {
    kind: Optimizer,
    step: i32,
    first: ModelParams<F>,
    second: ModelParams<F>,
}

impl<F: Real> OptimizerState<F> {
    fn new(kind: Optimizer, cfg: &ModelConfig) -> Self {
        Self {
            kind,
            step: 0,
            first: ModelParams::zeros(cfg),
            second: ModelParams::zeros(cfg),
        }
    }

    fn apply(&mut self, params: &mut ModelParams<F>, grad: &ModelParams<F>, tc: &TrainConfig) {
        self.step += 1;
        let lr = tc.learning_rate;
        let eps = F::of(tc.epsilon);
        let grads = grad.tensors();
        match self.kind {
            Optimizer::Adam => {
                let (b1, b2) = (F::of(tc.beta1), F::of(tc.beta2));
                let step_size = F::of(lr * (1.0 - tc.beta2.powi(self.step)).sqrt() / (1.0 - tc.beta1.powi(self.step)));
                for (((p, g), m), v) in params
                    .tensors_mut()
                    .into_iter()
                    .zip(grads)
                    .zip(self.first.tensors_mut())
                    .zip(self.second.tensors_mut())
                {
                    for i in 0..p.len() {
                        m[i] = b1 * m[i] + (F::one() - b1) * g[i];
                        v[i] = b2 * v[i] + (F::one() - b2) * g[i] * g[i];
                        p[i] -= step_size * m[i] / (v[i].sqrt() + eps);
                    }
                }
            }
            Optimizer::Rmsprop => {
                let rho = F::of(tc.rho);
                let lr = F::of(lr);
                for ((p, g), v) in params.tensors_mut().into_iter().zip(grads).zip(self.second.tensors_mut()) {
                    for i in 0..p.len() {
                        v[i] = rho * v[i] + (F::one() - rho) * g[i] * g[i];
                        p[i] -= lr * g[i] / (v[i].sqrt() + eps);
                    }
                }
            }
        }
    }
}

/// Writes `last.mgck` every epoch and `best.mgck` whenever the epoch loss improves.
#[derive(Debug, Clone)]
pub struct CheckpointSink {
    pub dir: PathBuf,
    pub vocab: CharVocab,
}

/// Progress callback: `(epoch, mean_loss)`.
pub type EpochHook<'a> = &'a mut dyn FnMut(usize, f64);

#[derive(Default)]
pub struct Trainer<'a> {
    sink: Option<CheckpointSink>,
    hook: Option<EpochHook<'a>>,
}

impl<'a> Trainer<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_checkpoints(mut self, dir: impl Into<PathBuf>, vocab: CharVocab) -> Self {
        self.sink = Some(CheckpointSink { dir: dir.into(), vocab });
        self
    }

    pub fn on_epoch(mut self, hook: EpochHook<'a>) -> Self {
        self.hook = Some(hook);
        self
    }

    /// Trains `params` (stored at f64) in the configured precision.
    pub fn train(
        &mut self,
        params: ModelParams<f64>,
        cfg: &ModelConfig,
        samples: &[EncodedSample],
        tc: &TrainConfig,
    ) -> Result<(ModelParams<f64>, TrainReport), TrainError> {
        match tc.precision {
            Precision::F64 => self.train_in(params, cfg, samples, tc),
            Precision::F32 => {
                let (p, report) = self.train_in(params.cast::<f32>(), cfg, samples, tc)?;
                Ok((p.cast(), report))
            }
        }
    }

    fn train_in<F: Real>(
        &mut self,
        mut params: ModelParams<F>,
        cfg: &ModelConfig,
        samples: &[EncodedSample],
        tc: &TrainConfig,
    ) -> Result<(ModelParams<F>, TrainReport), TrainError> {
        tc.validate()?;
        cfg.validate()?;
        if samples.is_empty() {
            return Err(TrainError::NoSamples);
        }
        if let Some(dir) = self.sink.as_ref().map(|s| &s.dir) {
            std::fs::create_dir_all(dir).map_err(|e| TrainError::Checkpoint(e.into()))?;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(tc.shuffle_seed);
        let mut opt = OptimizerState::<F>::new(tc.optimizer, cfg);
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut report = TrainReport {
            epoch_losses: Vec::with_capacity(tc.epochs),
            sample_count: samples.len(),
            epoch_seconds: Vec::new(),
            config: tc.clone(),
            model: cfg.clone(),
            checkpoint: None,
            best_checkpoint: None,
        };
        let mut best = f64::INFINITY;

        for epoch in 0..tc.epochs {
            let started = Instant::now();
            order.shuffle(&mut rng);
            let mut total = 0.0f64;
            for (batch_no, chunk) in order.chunks(tc.batch_size).enumerate() {
                let contexts: Vec<&[u32]> = chunk.iter().map(|&i| samples[i].context.as_slice()).collect();
                let targets: Vec<u32> = chunk.iter().map(|&i| samples[i].target).collect();
                let (loss, mut grad) = loss_and_grad(&params, cfg, &contexts, &targets)?;
                if !loss.is_finite() || !grad.all_finite() {
                    return Err(TrainError::NonFinite { epoch, batch: batch_no, loss });
                }
                total += loss;
                grad.scale(F::of(1.0 / chunk.len() as f64));
                clip_global_norm(&mut grad, tc.grad_clip_norm);
                if tc.learning_rate > 0.0 {
                    opt.apply(&mut params, &grad, tc);
                }
            }
            let mean = total / samples.len() as f64;
            report.epoch_losses.push(mean);
            if !tc.deterministic {
                report.epoch_seconds.push(started.elapsed().as_secs_f64());
            }
            if let Some(sink) = &self.sink {
                let snapshot = params.cast::<f64>();
                save_checkpoint(&sink.dir.join(LAST_CHECKPOINT), &snapshot, cfg, &sink.vocab)?;
                report.checkpoint = Some(LAST_CHECKPOINT.into());
                if mean < best {
                    save_checkpoint(&sink.dir.join(BEST_CHECKPOINT), &snapshot, cfg, &sink.vocab)?;
                    report.best_checkpoint = Some(BEST_CHECKPOINT.into());
                }
            }
            best = best.min(mean);
            if let Some(hook) = self.hook.as_mut() {
                hook(epoch, mean);
            }
        }
        Ok((params, report))
    }
}

/// Trains without checkpoints.
pub fn train(
    params: ModelParams<f64>,
    cfg: &ModelConfig,
    samples: &[EncodedSample],
    tc: &TrainConfig,
) -> Result<(ModelParams<f64>, TrainReport), TrainError> {
    Trainer::new().train(params, cfg, samples, tc)
}

/// Result of the two-phase workflow.
#[derive(Debug, Clone)]
pub struct PretrainFinetune {
    pub params: ModelParams<f64>,
    pub pretrain: TrainReport,
    pub finetune: TrainReport,
}

/// Vocabulary covering both corpora, so fine-tuning never meets unknown ids.
pub fn union_vocab<A, B>(pretrain_lines: &[A], finetune_lines: &[B]) -> CharVocab
where
    A: AsRef<str>,
    B: AsRef<str>,
{
    CharVocab::from_lines(
        pretrain_lines
            .iter()
            .map(|l| l.as_ref())
            .chain(finetune_lines.iter().map(|l| l.as_ref())),
    )
}

/// Phase 1 on `pretrain_lines`, then phase 2 on `finetune_samples` starting
/// from the phase-1 weights with a fresh optimizer. `vocab` must cover both
/// corpora (see [`union_vocab`]).
pub fn pretrain_finetune<S: AsRef<str>>(
    params: ModelParams<f64>,
    cfg: &ModelConfig,
    vocab: &CharVocab,
    pretrain_lines: &[S],
    finetune_samples: &[EncodedSample],
    tc_pre: &TrainConfig,
    tc_fine: &TrainConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<PretrainFinetune, TrainError> {
    let pre_samples = encode_lines(pretrain_lines, vocab, cfg.max_length)?;
    let mut phase1 = Trainer::new();
    if let Some(dir) = checkpoint_dir {
        phase1 = phase1.with_checkpoints(dir.join("pretrain"), vocab.clone());
    }
    let (params, pretrain) = phase1.train(params, cfg, &pre_samples, tc_pre)?;

    let mut phase2 = Trainer::new();
    if let Some(dir) = checkpoint_dir {
        phase2 = phase2.with_checkpoints(dir.join("finetune"), vocab.clone());
    }
    let (params, finetune) = phase2.train(params, cfg, finetune_samples, tc_fine)?;
    Ok(PretrainFinetune { params, pretrain, finetune })
}
