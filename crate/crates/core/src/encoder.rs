//! Character vocabulary and next-character training windows.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{format_entry, InflectionEntry};
use crate::error::EncodeError;

pub const PAD_ID: u32 = 0;
pub const EOL_ID: u32 = 1;
const RESERVED: u32 = 2;

/// Bijective character ↔ id map. Ids 0 and 1 are PAD and end-of-line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharVocab {
    chars: Vec<char>,
    ids: HashMap<char, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    chars: Vec<String>,
}

impl CharVocab {
    /// Builds a vocabulary from an explicit character list (ids assigned in
    /// list order starting at 2). Duplicates are rejected.
    pub fn from_chars(chars: Vec<char>) -> Result<Self, String> {
        let mut ids = HashMap::with_capacity(chars.len());
        for (i, &c) in chars.iter().enumerate() {
            if ids.insert(c, i as u32 + RESERVED).is_some() {
                return Err(format!("duplicate vocabulary character {c:?}"));
            }
        }
        Ok(Self { chars, ids })
    }

    /// Vocabulary over every character in `lines`, sorted by codepoint.
    pub fn from_lines<I, S>(lines: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let set: BTreeSet<char> = lines
            .into_iter()
            .flat_map(|l| l.as_ref().chars().collect::<Vec<_>>())
            .collect();
        Self::from_chars(set.into_iter().collect()).expect("set has no duplicates")
    }

    pub fn size(&self) -> usize {
        self.chars.len() + RESERVED as usize
    }

    /// Corpus characters in id order (excludes PAD and EOL).
    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn id_of(&self, c: char) -> Option<u32> {
        self.ids.get(&c).copied()
    }

    /// `None` for PAD, EOL and unknown ids.
    pub fn char_of(&self, id: u32) -> Option<char> {
        id.checked_sub(RESERVED).and_then(|i| self.chars.get(i as usize)).copied()
    }

    pub fn encode_str(&self, s: &str) -> Result<Vec<u32>, EncodeError> {
        s.chars()
            .enumerate()
            .map(|(position, ch)| self.id_of(ch).ok_or(EncodeError::UnknownChar { ch, position }))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.repr()).expect("vocab serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, String> {
        let repr: VocabRepr = serde_json::from_str(json).map_err(|e| e.to_string())?;
        Self::from_repr(repr)
    }

    fn repr(&self) -> VocabRepr {
        VocabRepr {
            chars: self.chars.iter().map(|c| c.to_string()).collect(),
        }
    }

    fn from_repr(repr: VocabRepr) -> Result<Self, String> {
        let chars = repr
            .chars
            .iter()
            .map(|s| {
                let mut it = s.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) => Ok(c),
                    _ => Err(format!("vocabulary entry {s:?} is not a single character")),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_chars(chars)
    }
}

impl Serialize for CharVocab {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.repr().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CharVocab {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = VocabRepr::deserialize(deserializer)?;
        Self::from_repr(repr).map_err(serde::de::Error::custom)
    }
}

/// Vocabulary over the formatted lines of a corpus.
pub fn build_vocab(entries: &[InflectionEntry]) -> CharVocab {
    CharVocab::from_lines(entries.iter().map(format_entry))
}

/// A fixed-length left-padded context and the id that follows it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncodedSample {
    pub context: Vec<u32>,
    pub target: u32,
}

/// Left-pads (or truncates from the left) `ids` to exactly `max_length`.
pub fn window(ids: &[u32], max_length: usize) -> Vec<u32> {
    let start = ids.len().saturating_sub(max_length);
    let tail = &ids[start..];
    let mut context = vec![PAD_ID; max_length - tail.len()];
    context.extend_from_slice(tail);
    context
}

/// One sample per character position plus a final end-of-line sample.
pub fn encode_line(line: &str, vocab: &CharVocab, max_length: usize) -> Result<Vec<EncodedSample>, EncodeError> {
    if max_length == 0 {
        return Err(EncodeError::ZeroLength);
    }
    let ids = vocab.encode_str(line)?;
    let mut samples = Vec::with_capacity(ids.len() + 1);
    for k in 0..=ids.len() {
        samples.push(EncodedSample {
            context: window(&ids[..k], max_length),
            target: ids.get(k).copied().unwrap_or(EOL_ID),
        });
    }
    Ok(samples)
}

/// Encodes every line in order.
pub fn encode_lines<I, S>(lines: I, vocab: &CharVocab, max_length: usize) -> Result<Vec<EncodedSample>, EncodeError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out = Vec::new();
    for line in lines {
        out.extend(encode_line(line.as_ref(), vocab, max_length)?);
    }
    Ok(out)
}

pub fn encode_entries(
    entries: &[InflectionEntry],
    vocab: &CharVocab,
    max_length: usize,
) -> Result<Vec<EncodedSample>, EncodeError> {
    encode_lines(entries.iter().map(format_entry), vocab, max_length)
}

/// Maps ids back to text, stopping at the first end-of-line id.
pub fn decode(ids: &[u32], vocab: &CharVocab) -> Result<String, EncodeError> {
    let mut out = String::new();
    for &id in ids {
        if id == EOL_ID {
            break;
        }
        out.push(vocab.char_of(id).ok_or(EncodeError::UnknownId(id))?);
    }
    Ok(out)
}
