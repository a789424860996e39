//! Runs a miniature experiment grid over the toy language, then reruns it to
//! show that completed cells are skipped.

use std::collections::BTreeMap;

use infgen::corpus::stratified_split;
use infgen::evaluator::{rows_to_tsv, run_ablation, AblationGrid, Corpus, GridSettings, RunSpec};
use infgen::synthetic::inflection_corpus;
use infgen::trainer::TrainConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let split = stratified_split(&inflection_corpus(240, 4), 0.1, 4)?;
    let corpora = BTreeMap::from([("toy".to_string(), Corpus { train: split.train, test: split.test })]);

    let runs = [8, 16]
        .into_iter()
        .flat_map(|t| {
            [0.0, 1.0].into_iter().map(move |temperature| RunSpec {
                dataset: "toy".into(),
                form_filter: Some(4),
                max_length: t,
                epochs: 6,
                temperature,
                seed: 1,
            })
        })
        .collect();
    let grid = AblationGrid {
        datasets: BTreeMap::new(),
        settings: GridSettings {
            embed_dim: 16,
            lstm_units: 24,
            lstm_layers: 1,
            train: TrainConfig { batch_size: 32, learning_rate: 5e-3, ..Default::default() },
            max_chars: Some(64),
            ..GridSettings::default()
        },
        runs,
    };

    let out = std::env::temp_dir().join("infgen-ablation-example");
    let _ = std::fs::remove_dir_all(&out);
    let rows = run_ablation(&grid, &corpora, &out)?;
    print!("{}", rows_to_tsv(&rows));
    // models are cached and finished rows are not recomputed
    let again = run_ablation(&grid, &corpora, &out)?;
    println!("rerun identical: {}", again == rows);
    println!("written to {}", out.display());
    Ok(())
}
