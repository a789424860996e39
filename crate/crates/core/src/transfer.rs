//! Pretrain-then-finetune versus training from scratch, compared by how
//! table-like the generated lines are.

use serde::{Deserialize, Serialize};

use crate::corpus::{format_entry, InflectionEntry, FORM_SEPARATOR};
use crate::encoder::encode_entries;
use crate::error::EvalError;
use crate::generator::{generate, GenConfig};
use crate::model::{init_model, CharModel, ModelConfig};
use crate::trainer::{pretrain_finetune, union_vocab, TrainConfig, TrainReport, Trainer};

/// Fraction of lines that contain at least two `", "` separators.
pub fn separator_rate<S: AsRef<str>>(lines: &[S]) -> f64 {
    if lines.is_empty() {
        return 0.0;
    }
    let hits = lines
        .iter()
        .filter(|l| l.as_ref().matches(FORM_SEPARATOR).count() >= 2)
        .count();
    hits as f64 / lines.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    pub separator_rate: f64,
    pub samples: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub pretrain_lines: usize,
    pub finetune_entries: usize,
    pub pretrained: PipelineOutcome,
    pub from_scratch: PipelineOutcome,
    pub pretrain_report: TrainReport,
    pub finetune_report: TrainReport,
    pub scratch_report: TrainReport,
}

pub struct TransferModels {
    pub pretrained: CharModel,
    pub from_scratch: CharModel,
}

fn sample_lines(model: &CharModel, lemmas: &[&str], gc: &GenConfig) -> Result<PipelineOutcome, EvalError> {
    let samples = lemmas
        .iter()
        .map(|l| generate(model, &model.vocab, l, gc))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PipelineOutcome { separator_rate: separator_rate(&samples), samples })
}

/// Trains one model on prose then inflection lines and a second on the
/// inflection lines alone (same init, same fine-tuning config), then
/// generates from each `probe` lemma with both.
pub fn compare_transfer<S: AsRef<str>>(
    base: &ModelConfig,
    pretrain_lines: &[S],
    finetune: &[InflectionEntry],
    tc_pre: &TrainConfig,
    tc_fine: &TrainConfig,
    probes: &[InflectionEntry],
    gc: &GenConfig,
) -> Result<(TransferReport, TransferModels), EvalError> {
    let fine_lines: Vec<String> = finetune.iter().map(format_entry).collect();
    let probe_lines: Vec<String> = probes.iter().map(format_entry).collect();
    let vocab = union_vocab(pretrain_lines, &[fine_lines, probe_lines].concat());
    let cfg = ModelConfig { vocab_size: vocab.size(), ..base.clone() };
    let samples = encode_entries(finetune, &vocab, cfg.max_length).map_err(crate::error::TrainError::from)?;
    let init = init_model(&cfg).map_err(crate::error::TrainError::from)?;

    let two_phase = pretrain_finetune(init.clone(), &cfg, &vocab, pretrain_lines, &samples, tc_pre, tc_fine, None)?;
    let (scratch_params, scratch_report) = Trainer::new().train(init, &cfg, &samples, tc_fine)?;

    let pretrained = CharModel::new(cfg.clone(), vocab.clone(), two_phase.params);
    let from_scratch = CharModel::new(cfg, vocab, scratch_params);
    let lemmas: Vec<&str> = probes.iter().map(|e| e.lemma()).collect();
    let report = TransferReport {
        pretrain_lines: pretrain_lines.len(),
        finetune_entries: finetune.len(),
        pretrained: sample_lines(&pretrained, &lemmas, gc)?,
        from_scratch: sample_lines(&from_scratch, &lemmas, gc)?,
        pretrain_report: two_phase.pretrain,
        finetune_report: two_phase.finetune,
        scratch_report,
    };
    Ok((report, TransferModels { pretrained, from_scratch }))
}
