//! Parses a small inflection corpus, splits it by class and prints the
//! line-length histogram.
//!
//!     cargo run --example corpus_stats [-- path/to/corpus.txt]

use infgen::corpus::{
    compute_stats_with_bin_width, parse_inflection_file, read_inflection_file, stratified_split,
};

const SAMPLE: &str = "\
poartă, porți, poarta, porții, porți, porți, porțile, porților\t3
şcoală, şcoli, şcoala, şcolii, şcoli, şcoli, şcolile, şcolilor\t3
macht, mächte, macht, mächte, macht, mächten, macht, mächte\t5
casă, case, casa, casei, case, case, casele, caselor\t3
om, oameni, omul, omului, oameni, oameni, oamenii, oamenilor\t5
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let entries = match std::env::args().nth(1) {
        Some(path) => read_inflection_file(path.as_ref())?,
        None => parse_inflection_file(SAMPLE)?,
    };
    // cedilla letters come back as comma-below
    println!("first lemmas: {:?}", entries.iter().take(2).map(|e| e.lemma()).collect::<Vec<_>>());

    let stats = compute_stats_with_bin_width(&entries, 10);
    println!(
        "{} entries, mean line length {:.1}, max {}",
        stats.entry_count, stats.mean_line_length, stats.max_line_length
    );
    println!("form counts: {:?}", stats.form_count_distribution);
    print!("{}", stats.to_tsv());

    let split = stratified_split(&entries, 0.4, 1)?;
    println!("split: {} train / {} test", split.train.len(), split.test.len());
    Ok(())
}
