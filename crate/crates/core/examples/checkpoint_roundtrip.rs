//! Saves a model, reloads it, and shows the errors for damaged files.

use infgen::checkpoint::{decode_checkpoint, encode_checkpoint};
use infgen::encoder::CharVocab;
use infgen::model::{init_model, CharModel, ModelConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let vocab = CharVocab::from_lines(["poartă, porți"]);
    let cfg = ModelConfig { vocab_size: vocab.size(), embed_dim: 8, lstm_units: 8, max_length: 10, ..ModelConfig::new(3) };
    let model = CharModel::new(cfg.clone(), vocab, init_model(&cfg)?);

    let dir = std::env::temp_dir().join("infgen-checkpoint-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("model.mgck");
    model.save(&path)?;
    let back = CharModel::load(&path)?;
    println!("{} bytes, identical after reload: {}", std::fs::metadata(&path)?.len(), back == model);

    let bytes = encode_checkpoint(&model.params, &model.config, &model.vocab);
    println!("truncated: {}", decode_checkpoint(&bytes[..bytes.len() - 5]).unwrap_err());
    println!("bad magic: {}", decode_checkpoint(b"PNG\x0d....").unwrap_err());
    println!("header cut: {}", decode_checkpoint(&bytes[..30]).unwrap_err());
    Ok(())
}
