use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::text::tokenize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TitleTagKind {
    ListStyle,
    Vague,
    QuestionForm,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TitleTag {
    pub post_id: String,
    pub tags: BTreeSet<TitleTagKind>,
}

const NUMBER: &str = r"(?:\d+|one|two|three|four|five|six|seven|eight|nine|ten|eleven|twelve|thirteen|fourteen|fifteen|twenty|fifty|hundred)";

const NUMBER_WORDS: &[&str] = &[
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
    "thirteen", "fourteen", "fifteen", "twenty", "fifty", "hundred",
];

const INTERROGATIVES: &[&str] = &[
    "what", "why", "how", "who", "whom", "whose", "when", "where", "which", "is", "are", "can", "do",
    "does", "did", "will", "would", "should", "could",
];

static LEADING_NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*\d+\b").unwrap());
static TOP_N: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"(?i)\btop\s+{NUMBER}\b")).unwrap());
static N_ITEMS: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"(?i)\b{NUMBER}\s+(?:\w+\s+)?(?:reasons|things|ways|tips|tricks|signs|facts|foods|secrets|habits|mistakes|rules|steps|times|people)\b"
    ))
    .unwrap()
});

/// Tags a clickbait title. Titles must be non-empty.
pub fn tag_title(post_id: &str, title: &str) -> Result<TitleTag, DatasetError> {
    if title.trim().is_empty() {
        return Err(DatasetError::EmptyTitle(post_id.to_string()));
    }
    let tokens = tokenize(title);
    let mut tags = BTreeSet::new();
    if LEADING_NUMBER.is_match(title) || TOP_N.is_match(title) || N_ITEMS.is_match(title) {
        tags.insert(TitleTagKind::ListStyle);
    }
    let starts_interrogative = tokens
        .tokens
        .first()
        .is_some_and(|t| INTERROGATIVES.contains(&t.as_str()));
    if title.trim_end().ends_with('?') || starts_interrogative {
        tags.insert(TitleTagKind::QuestionForm);
    }
    let has_quantity = tokens
        .iter()
        .any(|t| t.chars().any(|c| c.is_ascii_digit()) || NUMBER_WORDS.contains(&t));
    if tokens.len() <= 6 && !has_quantity {
        tags.insert(TitleTagKind::Vague);
    }
    Ok(TitleTag {
        post_id: post_id.to_string(),
        tags,
    })
}
