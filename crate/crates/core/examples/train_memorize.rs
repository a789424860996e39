//! Overfits a single inflection line and regenerates it greedily from its lemma.

use infgen::corpus::{format_entry, parse_inflection_file};
use infgen::encoder::{build_vocab, encode_entries};
use infgen::generator::{generate, GenConfig};
use infgen::model::{init_model, CharModel, ModelConfig};
use infgen::trainer::{TrainConfig, Trainer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let entries = parse_inflection_file("poartă, porți, poarta, porții, porți, porți, porțile, porților")?;
    let vocab = build_vocab(&entries);
    let cfg = ModelConfig {
        max_length: 20,
        embed_dim: 16,
        lstm_units: 32,
        lstm_layers: 2,
        bidirectional: true,
        vocab_size: vocab.size(),
        seed: 5,
    };
    let samples = encode_entries(&entries, &vocab, cfg.max_length)?;
    let tc = TrainConfig { epochs: 300, batch_size: 16, learning_rate: 1e-2, ..Default::default() };
    let mut hook = |epoch: usize, loss: f64| {
        if (epoch + 1) % 50 == 0 {
            println!("epoch {:>3}  loss {loss:.5}", epoch + 1);
        }
    };
    let (params, report) = Trainer::new().on_epoch(&mut hook).train(init_model(&cfg)?, &cfg, &samples, &tc)?;
    let model = CharModel::new(cfg, vocab, params);
    let line = generate(&model, &model.vocab, entries[0].lemma(), &GenConfig::greedy())?;
    println!("final loss {:.5}", report.final_loss().unwrap_or(f64::NAN));
    println!("generated: {line}");
    println!("matches:   {}", line == format_entry(&entries[0]));
    Ok(())
}
