//! Trains the small configuration on the rule-based toy language and scores
//! greedy tables on held-out lemmas.
//!
//!     cargo run --release --example synthetic_inflection -- [epochs] [learning_rate] [batch_size]

use std::time::Instant;

use infgen::corpus::{stratified_split, compute_stats};
use infgen::encoder::{build_vocab, encode_entries};
use infgen::evaluator::evaluate;
use infgen::generator::GenConfig;
use infgen::model::{init_model, CharModel, ModelConfig};
use infgen::synthetic::inflection_corpus;
use infgen::trainer::{TrainConfig, Trainer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let epochs: usize = arg(0, "14").parse()?;
    let learning_rate: f64 = arg(1, "0.001").parse()?;
    let batch_size: usize = arg(2, "128").parse()?;

    let entries = inflection_corpus(2000, 7);
    let split = stratified_split(&entries, 0.1, 7)?;
    println!("train {} / test {}", split.train.len(), split.test.len());

    let vocab = build_vocab(&split.train);
    let cfg = ModelConfig {
        max_length: 40,
        embed_dim: 32,
        lstm_units: 64,
        lstm_layers: 2,
        bidirectional: true,
        vocab_size: vocab.size(),
        seed: 7,
    };
    let samples = encode_entries(&split.train, &vocab, cfg.max_length)?;
    let tc = TrainConfig { epochs, learning_rate, batch_size, shuffle_seed: 7, ..Default::default() };
    println!("{} samples, {} epochs, lr {learning_rate}, batch {batch_size}", samples.len(), epochs);

    let started = Instant::now();
    let mut hook = |epoch: usize, loss: f64| {
        println!("epoch {:>2}  loss {loss:.4}  ({:.0}s)", epoch + 1, started.elapsed().as_secs_f64());
    };
    let (params, _) = Trainer::new().on_epoch(&mut hook).train(init_model(&cfg)?, &cfg, &samples, &tc)?;
    let model = CharModel::new(cfg, vocab, params);

    let gc = GenConfig {
        max_chars: GenConfig::max_chars_for(compute_stats(&split.train).mean_line_length),
        ..GenConfig::greedy()
    };
    let report = evaluate(&model, &split.test, &gc, "synthetic")?;
    println!("accuracy {:.1}%  form-count MAE {:.3}", report.accuracy_percent, report.form_count_mae);
    for o in report.per_entry.iter().filter(|o| !o.exact_match).take(5) {
        println!("  miss {:<8} -> {}", o.lemma, o.generated.as_deref().unwrap_or("-"));
    }
    // anchoring the lemma boundary removes the only ambiguous decision
    let anchored = evaluate(&model, &split.test, &GenConfig { prefix_separator: true, ..gc }, "synthetic")?;
    println!("with \"lemma, \" prefix: accuracy {:.1}%", anchored.accuracy_percent);
    Ok(())
}
