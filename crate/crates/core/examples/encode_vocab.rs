//! Builds a character vocabulary and shows the sliding-window samples of one line.

use infgen::corpus::{format_entry, parse_inflection_file};
use infgen::encoder::{build_vocab, decode, encode_line};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let entries = parse_inflection_file("poartă, porți, poarta\ncasă, case, casa\n")?;
    let vocab = build_vocab(&entries);
    println!("vocabulary ({}): {}", vocab.size(), vocab.to_json());

    let line = format_entry(&entries[0]);
    let samples = encode_line(&line, &vocab, 8)?;
    println!("{line:?} -> {} samples", samples.len());
    for s in samples.iter().take(10) {
        let shown: String = s
            .context
            .iter()
            .map(|&id| if id == 0 { '·' } else { vocab.char_of(id).unwrap_or('?') })
            .collect();
        let next = if s.target == 1 { "<eol>".to_string() } else { decode(&[s.target], &vocab)? };
        println!("  [{shown}] -> {next}");
    }
    Ok(())
}
