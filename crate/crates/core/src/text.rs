//! Text normalization, tokenization and character-offset helpers.
//!
//! Every offset in this crate counts Unicode scalar values (`char`s), not
//! bytes, so offsets written to export files line up with the way most QA
//! tooling indexes strings.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

/// NFKC-normalizes `text`.
pub fn normalize(text: &str) -> String {
    text.nfkc().collect()
}

/// Number of chars in `text`.
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Slices `text` by char offsets. Returns `None` when the range is out of
/// bounds or reversed.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
    let begin = indices.nth(start)?;
    if start == end {
        return Some(&text[begin..begin]);
    }
    let finish = indices.nth(end - start - 1)?;
    Some(&text[begin..finish])
}

/// Collapses every whitespace run to a single space and trims the ends.
pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// A tokenized string: lowercase alphanumeric tokens plus the char range each
/// token occupies in the normalized source text.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSeq {
    pub tokens: Vec<String>,
    pub offsets: Vec<Range<usize>>,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Builds a sequence from bare tokens, assigning synthetic offsets as if
    /// the tokens were joined by single spaces.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut seq = TokenSeq::default();
        let mut pos = 0;
        for tok in tokens {
            let tok: String = tok.into();
            let n = char_len(&tok).max(1);
            seq.offsets.push(pos..pos + n);
            seq.tokens.push(tok);
            pos += n + 1;
        }
        seq
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }
}

/// NFKC-normalizes, lowercases, and splits on every non-alphanumeric run.
///
/// Offsets index chars of the NFKC form of `text`; for text that is already
/// normalized (everything past ingestion) they index `text` itself.
pub fn tokenize(text: &str) -> TokenSeq {
    let normalized = normalize(text);
    tokenize_normalized(&normalized)
}

/// Tokenizes text that is already NFKC-normalized.
pub fn tokenize_normalized(text: &str) -> TokenSeq {
    let mut seq = TokenSeq::default();
    let mut current = String::new();
    let mut start = 0;
    for (idx, ch) in text.chars().enumerate() {
        if ch.is_alphanumeric() {
            if current.is_empty() {
                start = idx;
            }
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            seq.tokens.push(std::mem::take(&mut current));
            seq.offsets.push(start..idx);
        }
    }
    if !current.is_empty() {
        let end = char_len(text);
        seq.tokens.push(current);
        seq.offsets.push(start..end);
    }
    seq
}
