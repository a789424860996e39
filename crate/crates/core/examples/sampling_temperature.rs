//! Shows how temperature reshapes a next-character distribution and what
//! sampled continuations look like from a briefly trained model.

use infgen::encoder::build_vocab;
use infgen::generator::{apply_temperature, generate, GenConfig};
use infgen::model::{init_model, CharModel, ModelConfig};
use infgen::synthetic::inflection_corpus;
use infgen::trainer::{train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = [0.05, 0.15, 0.3, 0.5];
    for tau in [0.25, 0.5, 1.0, 2.0] {
        let scaled: Vec<String> = apply_temperature(&p, tau).iter().map(|x| format!("{x:.3}")).collect();
        println!("tau {tau:<4} {}", scaled.join(" "));
    }

    let entries = inflection_corpus(150, 2);
    let vocab = build_vocab(&entries);
    let cfg = ModelConfig {
        max_length: 16,
        embed_dim: 16,
        lstm_units: 32,
        lstm_layers: 1,
        bidirectional: true,
        vocab_size: vocab.size(),
        seed: 2,
    };
    let samples = infgen::encoder::encode_entries(&entries, &vocab, cfg.max_length)?;
    let tc = TrainConfig { epochs: 8, batch_size: 32, learning_rate: 5e-3, ..Default::default() };
    let (params, _) = train(init_model(&cfg)?, &cfg, &samples, &tc)?;
    let model = CharModel::new(cfg, vocab, params);

    for tau in [0.0, 0.5, 1.0, 1.5] {
        let gc = GenConfig { temperature: tau, sample_seed: 9, max_chars: 60, ..GenConfig::default() };
        println!("tau {tau:<4} {}", generate(&model, &model.vocab, entries[0].lemma(), &gc)?);
    }
    Ok(())
}
