//! Inflection-table corpora: one noun per line, forms joined by `", "`,
//! optionally followed by a tab and an inflection-class label in `0..=20`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::CorpusError;

/// Separator between the forms of one table.
pub const FORM_SEPARATOR: &str = ", ";

/// Largest accepted inflection-class label.
pub const MAX_CLASS_LABEL: u8 = 20;

/// One noun's paradigm. `forms[0]` is the dictionary form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InflectionEntry {
    forms: Vec<String>,
    class_label: Option<u8>,
}

impl InflectionEntry {
    /// Builds a validated entry. Forms are normalized.
    pub fn new<S: AsRef<str>>(forms: &[S], class_label: Option<u8>) -> Result<Self, CorpusError> {
        if forms.is_empty() {
            return Err(CorpusError::Validation("entry has no forms".into()));
        }
        if let Some(label) = class_label {
            if label > MAX_CLASS_LABEL {
                return Err(CorpusError::Validation(format!(
                    "class label {label} outside 0..={MAX_CLASS_LABEL}"
                )));
            }
        }
        let forms = forms
            .iter()
            .map(|f| {
                let f = normalize_text(f.as_ref());
                validate_form(&f).map(|_| f)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { forms, class_label })
    }

    pub fn forms(&self) -> &[String] {
        &self.forms
    }

    /// The dictionary (base) form.
    pub fn lemma(&self) -> &str {
        &self.forms[0]
    }

    pub fn form_count(&self) -> usize {
        self.forms.len()
    }

    pub fn class_label(&self) -> Option<u8> {
        self.class_label
    }
}

fn validate_form(form: &str) -> Result<(), CorpusError> {
    if form.is_empty() {
        return Err(CorpusError::Validation("empty form".into()));
    }
    if let Some(bad) = form.chars().find(|c| matches!(c, ',' | '\n' | '\r' | '\t')) {
        return Err(CorpusError::Validation(format!(
            "form {form:?} contains forbidden character {bad:?}"
        )));
    }
    Ok(())
}

/// Canonical composed form, with Romanian cedilla letters mapped to their
/// comma-below equivalents.
pub fn normalize_text(s: &str) -> String {
    s.nfc()
        .map(|c| match c {
            '\u{015E}' => '\u{0218}',
            '\u{015F}' => '\u{0219}',
            '\u{0162}' => '\u{021A}',
            '\u{0163}' => '\u{021B}',
            other => other,
        })
        .collect()
}

/// Decodes raw bytes as UTF-8 and normalizes them.
pub fn normalize_bytes(bytes: &[u8]) -> Result<String, CorpusError> {
    let text = std::str::from_utf8(bytes).map_err(|e| CorpusError::Decode {
        offset: e.valid_up_to(),
    })?;
    Ok(normalize_text(text))
}

/// Parses an inflection file. Empty lines are skipped; CR before LF is stripped.
pub fn parse_inflection_file(text: &str) -> Result<Vec<InflectionEntry>, CorpusError> {
    let text = text.strip_prefix('\u{FEFF}').unwrap_or(text);
    let mut entries = Vec::new();
    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let (body, label) = match line.rsplit_once('\t') {
            Some((body, field)) => {
                let value: i64 = field.trim().parse().map_err(|_| CorpusError::Parse {
                    line: line_no,
                    message: format!("class label {field:?} is not an integer"),
                })?;
                if !(0..=MAX_CLASS_LABEL as i64).contains(&value) {
                    return Err(CorpusError::Validation(format!(
                        "line {line_no}: class label {value} outside 0..={MAX_CLASS_LABEL}"
                    )));
                }
                (body, Some(value as u8))
            }
            None => (line, None),
        };
        let forms: Vec<&str> = body.split(FORM_SEPARATOR).collect();
        if let Some(pos) = forms.iter().position(|f| f.is_empty()) {
            return Err(CorpusError::Parse {
                line: line_no,
                message: format!("form {} is empty", pos + 1),
            });
        }
        let entry = InflectionEntry::new(&forms, label).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

/// Reads and parses an inflection file from disk.
pub fn read_inflection_file(path: &Path) -> Result<Vec<InflectionEntry>, CorpusError> {
    let bytes = std::fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    let text = normalize_bytes(&bytes)?;
    parse_inflection_file(&text)
}

/// Reads a plain-text corpus (one training line per non-empty line).
pub fn read_text_lines(path: &Path) -> Result<Vec<String>, CorpusError> {
    let bytes = std::fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    let text = normalize_bytes(&bytes)?;
    Ok(text
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.trim().is_empty())
        .map(str::to_owned)
        .collect())
}

/// The training line for an entry: forms joined by `", "`, no label.
pub fn format_entry(e: &InflectionEntry) -> String {
    e.forms.join(FORM_SEPARATOR)
}

/// File representation of an entry, label included when present.
pub fn format_entry_line(e: &InflectionEntry) -> String {
    match e.class_label {
        Some(label) => format!("{}\t{label}", format_entry(e)),
        None => format_entry(e),
    }
}

/// Serializes entries back into the file format, one per line.
pub fn format_inflection_file(entries: &[InflectionEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&format_entry_line(e));
        out.push('\n');
    }
    out
}

/// Train set followed by dev set; duplicates are kept.
pub fn consolidate(train: &[InflectionEntry], dev: &[InflectionEntry]) -> Vec<InflectionEntry> {
    train.iter().chain(dev).cloned().collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPair {
    pub train: Vec<InflectionEntry>,
    pub test: Vec<InflectionEntry>,
}

/// Number of test items for a stratum of size `n` (round half up).
pub fn stratum_test_count(n: usize, test_fraction: f64) -> usize {
    let raw = (n as f64 * test_fraction + 0.5 + 1e-9).floor() as usize;
    raw.min(n)
}

/// Splits per inflection class so every class keeps the same test proportion.
/// Unlabeled corpora form a single stratum. Both halves keep input order.
pub fn stratified_split(
    entries: &[InflectionEntry],
    test_fraction: f64,
    seed: u64,
) -> Result<SplitPair, CorpusError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CorpusError::Validation(format!(
            "test fraction {test_fraction} not in (0, 1)"
        )));
    }
    if entries.is_empty() {
        return Ok(SplitPair::default());
    }
    let labeled = entries.iter().filter(|e| e.class_label.is_some()).count();
    if labeled != 0 && labeled != entries.len() {
        return Err(CorpusError::Validation(format!(
            "{labeled} of {} entries carry a class label; expected all or none",
            entries.len()
        )));
    }

    let mut strata: BTreeMap<Option<u8>, Vec<usize>> = BTreeMap::new();
    for (i, e) in entries.iter().enumerate() {
        strata.entry(e.class_label).or_default().push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_test = vec![false; entries.len()];
    for members in strata.values() {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        let k = stratum_test_count(members.len(), test_fraction);
        for &i in &shuffled[..k] {
            in_test[i] = true;
        }
    }

    let mut split = SplitPair::default();
    for (e, test) in entries.iter().zip(in_test) {
        if test {
            split.test.push(e.clone());
        } else {
            split.train.push(e.clone());
        }
    }
    Ok(split)
}

/// Keeps entries with exactly `n` forms.
pub fn filter_by_form_count(entries: &[InflectionEntry], n: usize) -> Vec<InflectionEntry> {
    entries.iter().filter(|e| e.form_count() == n).cloned().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub entry_count: usize,
    pub form_count_distribution: BTreeMap<usize, usize>,
    /// Lower bin edge → count.
    pub line_length_histogram: BTreeMap<usize, usize>,
    pub bin_width: usize,
    pub mean_line_length: f64,
    pub max_line_length: usize,
}

impl CorpusStats {
    /// Two-column `bin\tcount` table, ascending bins.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("bin\tcount\n");
        for (bin, count) in &self.line_length_histogram {
            let _ = writeln!(out, "{bin}\t{count}");
        }
        out
    }
}

pub fn compute_stats(entries: &[InflectionEntry]) -> CorpusStats {
    compute_stats_with_bin_width(entries, 1)
}

/// Line lengths are counted in characters of [`format_entry`].
pub fn compute_stats_with_bin_width(entries: &[InflectionEntry], bin_width: usize) -> CorpusStats {
    let bin_width = bin_width.max(1);
    let mut form_count_distribution = BTreeMap::new();
    let mut line_length_histogram = BTreeMap::new();
    let mut total = 0usize;
    let mut max_line_length = 0usize;
    for e in entries {
        let len = format_entry(e).chars().count();
        total += len;
        max_line_length = max_line_length.max(len);
        *line_length_histogram.entry(len / bin_width * bin_width).or_insert(0) += 1;
        *form_count_distribution.entry(e.form_count()).or_insert(0) += 1;
    }
    let mean_line_length = if entries.is_empty() {
        0.0
    } else {
        total as f64 / entries.len() as f64
    };
    CorpusStats {
        entry_count: entries.len(),
        form_count_distribution,
        line_length_histogram,
        bin_width,
        mean_line_length,
        max_line_length,
    }
}
