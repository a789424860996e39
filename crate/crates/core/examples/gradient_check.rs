//! Checks the analytic gradient of the full model against central finite differences.

use infgen::model::{init_model, loss_and_grad, ModelConfig, ModelParams};
use infgen::nn::gradcheck::{finite_difference_check, Coords};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ModelConfig {
        max_length: 6,
        embed_dim: 4,
        lstm_units: 3,
        lstm_layers: 2,
        bidirectional: true,
        vocab_size: 5,
        seed: 11,
    };
    let params = init_model(&cfg)?;
    let contexts: [&[u32]; 3] = [&[0, 0, 2, 3, 4, 2], &[0; 6], &[3, 4, 2, 2, 3, 4]];
    let targets = [4, 2, 1];
    let loss_fn = |flat: &[f64]| {
        let p = ModelParams::from_flat(&cfg, flat).expect("flat length");
        let (loss, grad) = loss_and_grad(&p, &cfg, &contexts, &targets).expect("valid batch");
        (loss, grad.to_flat())
    };
    let flat = params.to_flat();
    let worst = finite_difference_check(loss_fn, &flat, 1e-5, Coords::All)?;
    println!("{} parameters, max relative error {worst:.2e}", flat.len());

    // per tensor, to see where an error would come from
    let mut start = 0;
    for ((name, _), t) in cfg.tensor_shapes().iter().zip(params.tensors()) {
        let idx: Vec<usize> = (start..start + t.len()).collect();
        start += t.len();
        let err = finite_difference_check(loss_fn, &flat, 1e-5, Coords::Subset(&idx))?;
        println!("  {name:<16} {err:.2e}");
    }
    Ok(())
}
