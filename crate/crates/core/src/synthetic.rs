//! A toy rule-based language with fully predictable inflection tables, and a
//! prose-like text generator for pretraining experiments.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::InflectionEntry;

pub const VOWELS: [char; 5] = ['a', 'e', 'i', 'o', 'u'];
pub const CONSONANTS: [char; 7] = ['b', 'd', 'k', 'l', 'm', 'n', 'r'];
pub const ALPHABET: [char; 12] = ['a', 'e', 'i', 'o', 'u', 'b', 'd', 'k', 'l', 'm', 'n', 'r'];

/// The next vowel in the cycle a → e → i → o → u → a.
pub fn shift_vowel(v: char) -> Option<char> {
    let i = VOWELS.iter().position(|&c| c == v)?;
    Some(VOWELS[(i + 1) % VOWELS.len()])
}

/// Replaces the last vowel of `stem` with its successor; stems without a
/// vowel are returned unchanged.
pub fn shift_last_vowel(stem: &str) -> String {
    let mut chars: Vec<char> = stem.chars().collect();
    if let Some(i) = chars.iter().rposition(|c| VOWELS.contains(c)) {
        chars[i] = shift_vowel(chars[i]).expect("is a vowel");
    }
    chars.into_iter().collect()
}

/// The four forms of `lemma`: itself, `-a`, `-en`, and the vowel-shifted stem plus `-er`.
pub fn inflect(lemma: &str) -> Vec<String> {
    vec![
        lemma.to_string(),
        format!("{lemma}a"),
        format!("{lemma}en"),
        format!("{}er", shift_last_vowel(lemma)),
    ]
}

fn random_word(rng: &mut ChaCha8Rng, min_len: usize, max_len: usize) -> String {
    let len = rng.gen_range(min_len..=max_len);
    (0..len).map(|_| *ALPHABET.choose(rng).expect("non-empty")).collect()
}

/// `count` distinct lemmas of length `min_len..=max_len` with letters drawn
/// uniformly, in generation order.
pub fn lemmas(count: usize, min_len: usize, max_len: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let l = random_word(&mut rng, min_len, max_len);
        if seen.insert(l.clone()) {
            out.push(l);
        }
    }
    out
}

/// A corpus of `count` entries with lemmas of length 3 to 7.
pub fn inflection_corpus(count: usize, seed: u64) -> Vec<InflectionEntry> {
    lemmas(count, 3, 7, seed)
        .iter()
        .map(|l| InflectionEntry::new(&inflect(l), None).expect("valid synthetic forms"))
        .collect()
}

/// Sentence-like lines built from the same alphabet. Words are separated by
/// single spaces and lines end with a period; commas are rare and never
/// repeated, so almost no line contains two `", "` separators.
pub fn prose_lines(count: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = lemmas(400, 1, 8, seed ^ 0x5eed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(4..=12);
            let comma_at = if rng.gen_bool(0.2) { Some(rng.gen_range(1..n)) } else { None };
            let mut line = String::new();
            for i in 0..n {
                if i > 0 {
                    line.push_str(if comma_at == Some(i) { ", " } else { " " });
                }
                line.push_str(words.choose(&mut rng).expect("non-empty"));
            }
            line.push('.');
            line
        })
        .collect()
}
