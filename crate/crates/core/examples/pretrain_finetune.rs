//! Pretrains on prose-like lines, fine-tunes on inflection lines and compares
//! how often each model produces table-shaped output.

use infgen::generator::GenConfig;
use infgen::model::ModelConfig;
use infgen::synthetic::{inflection_corpus, prose_lines};
use infgen::trainer::TrainConfig;
use infgen::transfer::compare_transfer;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let prose = prose_lines(3000, 1);
    let entries = inflection_corpus(260, 2);
    let (fine, probes) = entries.split_at(200);
    let base = ModelConfig {
        max_length: 16,
        embed_dim: 16,
        lstm_units: 24,
        lstm_layers: 1,
        bidirectional: true,
        vocab_size: 0,
        seed: 3,
    };
    let tc_pre = TrainConfig { epochs: 2, batch_size: 64, learning_rate: 5e-3, ..Default::default() };
    let tc_fine = TrainConfig { epochs: 2, ..tc_pre.clone() };
    let gc = GenConfig { max_chars: 80, ..GenConfig::greedy() };
    let (report, _) = compare_transfer(&base, &prose, fine, &tc_pre, &tc_fine, probes, &gc)?;

    println!("separator rate  pretrained {:.2}  from scratch {:.2}", report.pretrained.separator_rate, report.from_scratch.separator_rate);
    for (a, b) in report.pretrained.samples.iter().zip(&report.from_scratch.samples).take(4) {
        println!("  pretrained:   {a}\n  from scratch: {b}");
    }
    Ok(())
}
