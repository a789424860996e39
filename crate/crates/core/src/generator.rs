//! Prefix-conditioned generation, one character at a time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::FORM_SEPARATOR;
use crate::encoder::{window, CharVocab, EOL_ID, PAD_ID};
use crate::error::GenerateError;
use crate::model::LanguageModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// 0 means greedy argmax.
    pub temperature: f64,
    /// Cap on generated characters (the prefix does not count).
    pub max_chars: usize,
    pub sample_seed: u64,
    /// Seed with `lemma + ", "` instead of the bare lemma.
    pub prefix_separator: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            max_chars: MIN_MAX_CHARS,
            sample_seed: 0,
            prefix_separator: false,
        }
    }
}

pub const MIN_MAX_CHARS: usize = 256;

impl GenConfig {
    pub fn greedy() -> Self {
        Self { temperature: 0.0, ..Self::default() }
    }

    /// Four times the mean training line length, at least 256.
    pub fn max_chars_for(mean_line_length: f64) -> usize {
        ((4.0 * mean_line_length).ceil() as usize).max(MIN_MAX_CHARS)
    }

    pub fn validate(&self) -> Result<(), GenerateError> {
        if self.max_chars == 0 {
            return Err(GenerateError::Config("max_chars must be >= 1".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(GenerateError::Config(format!("temperature {} must be >= 0", self.temperature)));
        }
        Ok(())
    }
}

/// Rescales `p_i ↦ p_i^(1/τ)` and renormalizes. `τ` must be positive.
pub fn apply_temperature(probs: &[f64], temperature: f64) -> Vec<f64> {
    let logs: Vec<f64> = probs
        .iter()
        .map(|&p| if p > 0.0 { p.ln() / temperature } else { f64::NEG_INFINITY })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn rng_for(seed: u64, prefix: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(prefix.as_bytes());
    let digest = hasher.finalize();
    ChaCha8Rng::seed_from_u64(u64::from_le_bytes(digest[..8].try_into().expect("8 bytes")))
}

fn pick_next(mut probs: Vec<f64>, temperature: f64, rng: &mut ChaCha8Rng) -> u32 {
    // padding is an input symbol only
    probs[PAD_ID as usize] = 0.0;
    if temperature == 0.0 {
        return argmax(&probs) as u32;
    }
    let scaled = apply_temperature(&probs, temperature);
    let draw: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, p) in scaled.iter().enumerate() {
        if *p > 0.0 {
            last_nonzero = i;
        }
        acc += p;
        if draw < acc {
            return i as u32;
        }
    }
    last_nonzero as u32
}

/// Returns `prefix` followed by the generated continuation (end-of-line excluded).
pub fn generate<M: LanguageModel + ?Sized>(
    model: &M,
    vocab: &CharVocab,
    prefix: &str,
    gc: &GenConfig,
) -> Result<String, GenerateError> {
    gc.validate()?;
    let mut ids = vocab.encode_str(prefix)?;
    let mut rng = rng_for(gc.sample_seed, prefix);
    let mut out = prefix.to_string();
    for _ in 0..gc.max_chars {
        let context = window(&ids, model.max_length());
        let probs = model.next_distribution(&context)?;
        let next = pick_next(probs, gc.temperature, &mut rng);
        if next == EOL_ID {
            break;
        }
        let ch = vocab
            .char_of(next)
            .ok_or(crate::error::EncodeError::UnknownId(next))?;
        out.push(ch);
        ids.push(next);
    }
    Ok(out)
}

/// Splits a generated line into forms.
pub fn split_forms(line: &str) -> Vec<String> {
    line.split(FORM_SEPARATOR).map(str::to_owned).collect()
}

/// The text used to seed generation for `lemma`.
pub fn seed_prefix(lemma: &str, gc: &GenConfig) -> String {
    if gc.prefix_separator {
        format!("{lemma}{FORM_SEPARATOR}")
    } else {
        lemma.to_string()
    }
}

/// Generates a full line from `lemma` and splits it on `", "`.
pub fn generate_table<M: LanguageModel + ?Sized>(
    model: &M,
    vocab: &CharVocab,
    lemma: &str,
    gc: &GenConfig,
) -> Result<Vec<String>, GenerateError> {
    let line = generate(model, vocab, &seed_prefix(lemma, gc), gc)?;
    Ok(split_forms(&line))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::NnError;
    use proptest::prelude::*;

    /// Emits a fixed script of ids, then EOL forever.
    struct Scripted {
        vocab_size: usize,
        script: Vec<u32>,
        max_length: usize,
    }

    impl LanguageModel for Scripted {
        fn max_length(&self) -> usize {
            self.max_length
        }

        fn next_distribution(&self, context: &[u32]) -> Result<Vec<f64>, NnError> {
            // the script is indexed by how many real ids the context holds
            let seen = context.iter().filter(|&&c| c != PAD_ID).count();
            let mut p = vec![0.0; self.vocab_size];
            p[*self.script.get(seen).unwrap_or(&EOL_ID) as usize] = 1.0;
            Ok(p)
        }
    }

    struct Babbler {
        id: u32,
        size: usize,
    }

    impl LanguageModel for Babbler {
        fn max_length(&self) -> usize {
            4
        }

        fn next_distribution(&self, _: &[u32]) -> Result<Vec<f64>, NnError> {
            let mut p = vec![0.0; self.size];
            p[self.id as usize] = 1.0;
            Ok(p)
        }
    }

    fn ro_vocab() -> CharVocab {
        CharVocab::from_lines(["poartă, porți, x, a"])
    }

    #[test]
    fn always_eol_returns_prefix() {
        let v = ro_vocab();
        let m = Scripted { vocab_size: v.size(), script: vec![], max_length: 10 };
        assert_eq!(generate(&m, &v, "poartă", &GenConfig::greedy()).unwrap(), "poartă");
        assert_eq!(generate_table(&m, &v, "poartă", &GenConfig::greedy()).unwrap(), vec!["poartă"]);
    }

    #[test]
    fn scripted_continuation() {
        let v = ro_vocab();
        // prefix "x" is one id; script is indexed by total non-pad ids seen
        let a = v.id_of('a').unwrap();
        let m = Scripted { vocab_size: v.size(), script: vec![0, a], max_length: 10 };
        assert_eq!(generate(&m, &v, "x", &GenConfig::greedy()).unwrap(), "xa");
    }

    #[test]
    fn table_is_split_on_separator() {
        let v = ro_vocab();
        let lemma = "poartă";
        let mut script = vec![0; lemma.chars().count()];
        script.extend(v.encode_str(", porți").unwrap());
        let m = Scripted { vocab_size: v.size(), script, max_length: 40 };
        let table = generate_table(&m, &v, lemma, &GenConfig::greedy()).unwrap();
        assert_eq!(table, vec!["poartă", "porți"]);
    }

    #[test]
    fn cap_stops_babbling() {
        let v = ro_vocab();
        let m = Babbler { id: v.id_of('a').unwrap(), size: v.size() };
        let gc = GenConfig { max_chars: 7, ..GenConfig::greedy() };
        let out = generate_table(&m, &v, "x", &gc).unwrap();
        assert_eq!(out, vec!["xaaaaaaa"]);
    }

    #[test]
    fn unknown_prefix_char() {
        let v = ro_vocab();
        let m = Babbler { id: EOL_ID, size: v.size() };
        assert!(matches!(
            generate(&m, &v, "zz", &GenConfig::greedy()),
            Err(GenerateError::Encode(_))
        ));
    }

    #[test]
    fn separator_mode_seeds_with_comma_space() {
        let gc = GenConfig { prefix_separator: true, ..GenConfig::default() };
        assert_eq!(seed_prefix("poartă", &gc), "poartă, ");
        assert_eq!(seed_prefix("poartă", &GenConfig::default()), "poartă");
    }

    #[test]
    fn argmax_prefers_lowest_id_on_ties() {
        assert_eq!(argmax(&[0.1, 0.4, 0.4, 0.1]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn max_chars_rule() {
        assert_eq!(GenConfig::max_chars_for(30.0), 256);
        assert_eq!(GenConfig::max_chars_for(100.5), 402);
        let bad = GenConfig { max_chars: 0, ..GenConfig::default() };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn temperature_keeps_argmax(raw in proptest::collection::vec(0.001f64..1.0, 2..12), tau in 0.05f64..5.0) {
            let total: f64 = raw.iter().sum();
            let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let scaled = apply_temperature(&p, tau);
            prop_assert_eq!(argmax(&scaled), argmax(&p));
            prop_assert!((scaled.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn split_then_join_is_identity(line in "[ab, ]{0,30}") {
            prop_assert_eq!(split_forms(&line).join(FORM_SEPARATOR), line);
        }
    }
}
