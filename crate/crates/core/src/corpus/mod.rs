//! Raw post data model and dump ingestion.

mod html;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use html::extract_article_text;

use crate::jsonl::{self, JsonlError};
use crate::text::normalize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Reddit,
    Facebook,
    Other,
}

impl Source {
    pub const ALL: [Source; 3] = [Source::Reddit, Source::Facebook, Source::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Reddit => "reddit",
            Source::Facebook => "facebook",
            Source::Other => "other",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "reddit" => Ok(Source::Reddit),
            "facebook" => Ok(Source::Facebook),
            "other" => Ok(Source::Other),
            _ => Err(CorpusError::UnknownSource(s.to_string())),
        }
    }
}

/// Advisory noise flag attached by the cleaner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFlag {
    Toxic,
    Opinion,
}

/// One scraped (article, clickbait title, user answer) triple.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickbaitPost {
    pub id: String,
    pub source: Source,
    /// The clickbait title.
    pub question: String,
    /// Plain-text article body.
    pub context: String,
    /// The user-written spoiler.
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fetched_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_flag: Option<NoiseFlag>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub count: usize,
    pub per_source_counts: BTreeMap<Source, usize>,
    pub dropped_count: usize,
    pub drop_reasons: BTreeMap<String, usize>,
}

impl CorpusStats {
    pub(crate) fn record_drop(&mut self, reason: &str) {
        self.dropped_count += 1;
        *self.drop_reasons.entry(reason.to_string()).or_default() += 1;
    }
}

/// An ordered, id-unique collection of posts. Immutable once built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    posts: Vec<ClickbaitPost>,
    stats: CorpusStats,
}

impl Corpus {
    /// Builds a corpus from already validated posts, carrying over drop
    /// statistics from an earlier stage.
    pub fn new(
        posts: Vec<ClickbaitPost>,
        dropped_count: usize,
        drop_reasons: BTreeMap<String, usize>,
    ) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        let mut per_source_counts = BTreeMap::new();
        for post in &posts {
            if !seen.insert(post.id.as_str()) {
                return Err(CorpusError::DuplicateId(post.id.clone()));
            }
            *per_source_counts.entry(post.source).or_default() += 1;
        }
        let stats = CorpusStats {
            count: posts.len(),
            per_source_counts,
            dropped_count,
            drop_reasons,
        };
        Ok(Corpus { posts, stats })
    }

    pub fn from_posts(posts: Vec<ClickbaitPost>) -> Result<Self, CorpusError> {
        Self::new(posts, 0, BTreeMap::new())
    }

    pub fn posts(&self) -> &[ClickbaitPost] {
        &self.posts
    }

    pub fn stats(&self) -> &CorpusStats {
        &self.stats
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn into_posts(self) -> Vec<ClickbaitPost> {
        self.posts
    }

    /// Concatenates corpora; ids must stay unique.
    pub fn merge(parts: Vec<Corpus>) -> Result<Corpus, CorpusError> {
        let mut posts = Vec::new();
        let mut dropped = 0;
        let mut reasons: BTreeMap<String, usize> = BTreeMap::new();
        for part in parts {
            dropped += part.stats.dropped_count;
            for (k, v) in part.stats.drop_reasons {
                *reasons.entry(k).or_default() += v;
            }
            posts.extend(part.posts);
        }
        Corpus::new(posts, dropped, reasons)
    }

    pub fn to_jsonl(&self) -> String {
        jsonl::to_jsonl(&self.posts)
    }

    /// Loads a corpus previously written with [`Corpus::to_jsonl`].
    pub fn read_jsonl(path: &Path) -> Result<Corpus, CorpusError> {
        let posts: Vec<ClickbaitPost> = jsonl::read_jsonl(path)?;
        for post in &posts {
            validate_post(post).map_err(|reason| CorpusError::InvalidPost {
                id: post.id.clone(),
                reason,
            })?;
        }
        Corpus::from_posts(posts)
    }
}

fn validate_post(post: &ClickbaitPost) -> Result<(), &'static str> {
    if post.id.trim().is_empty() {
        return Err("empty_id");
    }
    if post.question.trim().is_empty() {
        return Err("empty_title");
    }
    if post.context.trim().is_empty() {
        return Err("empty_article");
    }
    if post.answer.trim().is_empty() {
        return Err("empty_answer");
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read dump {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("unknown dump format {0:?} (expected jsonl or csv)")]
    UnknownFormat(String),
    #[error("unknown source {0:?} (expected reddit, facebook or other)")]
    UnknownSource(String),
    #[error("csv dump {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("duplicate post id {0:?}")]
    DuplicateId(String),
    #[error("post {id:?} is invalid: {reason}")]
    InvalidPost { id: String, reason: &'static str },
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DumpFormat {
    Jsonl,
    Csv,
}

impl DumpFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<DumpFormat> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "jsonl" | "ndjson" | "json" => Some(DumpFormat::Jsonl),
            "csv" => Some(DumpFormat::Csv),
            _ => None,
        }
    }
}

impl FromStr for DumpFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(DumpFormat::Jsonl),
            "csv" => Ok(DumpFormat::Csv),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct IngestOptions {
    /// When set, a title containing this delimiter is split into
    /// `title <delim> answer` if the record has no answer of its own.
    pub split_on_delimiter: Option<String>,
}

/// One record of a scraped dump, before validation.
#[derive(Clone, Debug, Default, Deserialize)]
pub struct DumpRecord {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default)]
    pub article: Option<String>,
    #[serde(default)]
    pub answer: Option<String>,
    #[serde(default)]
    pub url: Option<String>,
    #[serde(default)]
    pub fetched_at: Option<DateTime<Utc>>,
}

/// Reads a scraped dump and returns the validated corpus. Malformed records
/// are dropped and counted, never fatal.
pub fn ingest_dump(
    path: &Path,
    source: Source,
    format: DumpFormat,
    options: &IngestOptions,
) -> Result<Corpus, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let records: Vec<Result<DumpRecord, &'static str>> = match format {
        DumpFormat::Jsonl => {
            let text = fs::read_to_string(path).map_err(io_err)?;
            text.lines()
                .filter(|line| !line.trim().is_empty())
                .map(|line| serde_json::from_str::<DumpRecord>(line).map_err(|_| "malformed_record"))
                .collect()
        }
        DumpFormat::Csv => {
            let file = fs::File::open(path).map_err(io_err)?;
            let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
            let mut out = Vec::new();
            for row in reader.deserialize::<CsvRecord>() {
                match row {
                    Ok(rec) => out.push(Ok(rec.into())),
                    Err(e) if e.is_io_error() => {
                        return Err(CorpusError::Csv {
                            path: path.to_path_buf(),
                            source: e,
                        })
                    }
                    Err(_) => out.push(Err("malformed_record")),
                }
            }
            out
        }
    };
    Ok(build_corpus(records, source, options))
}

/// Validates parsed records into a corpus.
pub fn ingest_records(records: Vec<DumpRecord>, source: Source, options: &IngestOptions) -> Corpus {
    build_corpus(records.into_iter().map(Ok).collect(), source, options)
}

fn build_corpus(
    records: Vec<Result<DumpRecord, &'static str>>,
    source: Source,
    options: &IngestOptions,
) -> Corpus {
    let mut posts = Vec::new();
    let mut seen = HashSet::new();
    let mut stats = CorpusStats::default();
    for record in records {
        let post = record.and_then(|r| validate_record(r, source, options));
        match post {
            Ok(post) if !seen.insert(post.id.clone()) => stats.record_drop("duplicate_id"),
            Ok(post) => posts.push(post),
            Err(reason) => stats.record_drop(reason),
        }
    }
    Corpus::new(posts, stats.dropped_count, stats.drop_reasons).expect("ids deduplicated above")
}

#[derive(Debug, Deserialize)]
struct CsvRecord {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    article: Option<String>,
    #[serde(default)]
    answer: Option<String>,
    #[serde(default)]
    url: Option<String>,
}

impl From<CsvRecord> for DumpRecord {
    fn from(r: CsvRecord) -> Self {
        let nonempty = |s: Option<String>| s.filter(|v| !v.is_empty());
        DumpRecord {
            id: nonempty(r.id),
            title: r.title,
            article: r.article,
            answer: r.answer,
            url: nonempty(r.url),
            fetched_at: None,
        }
    }
}

/// Extracts and NFKC-normalizes until stable; normalization can surface
/// markup (fullwidth `＜` becomes `<`) and extraction can surface
/// non-normalized characters from entities.
fn plain_context(article: &str) -> String {
    let mut current = extract_article_text(&normalize(article));
    for _ in 0..8 {
        let next = extract_article_text(&normalize(&current));
        if next == current {
            break;
        }
        current = next;
    }
    current
}

fn validate_record(
    record: DumpRecord,
    source: Source,
    options: &IngestOptions,
) -> Result<ClickbaitPost, &'static str> {
    let mut title = record.title.ok_or("missing_title")?;
    let mut answer = record.answer;
    if let Some(delim) = options.split_on_delimiter.as_deref().filter(|d| !d.is_empty()) {
        let has_answer = answer.as_deref().is_some_and(|a| !a.trim().is_empty());
        if !has_answer {
            if let Some((head, tail)) = title.split_once(delim) {
                answer = Some(tail.to_string());
                title = head.to_string();
            }
        }
    }
    let answer = answer.ok_or("missing_answer")?;
    let article = record.article.ok_or("missing_article")?;

    let question = crate::text::collapse_whitespace(&normalize(&title));
    let answer = crate::text::collapse_whitespace(&normalize(&answer));
    let context = plain_context(&article);

    if question.is_empty() {
        return Err("empty_title");
    }
    if answer.is_empty() {
        return Err("empty_answer");
    }
    if context.is_empty() {
        return Err("empty_article");
    }
    let id = match record.id.map(|s| s.trim().to_string()).filter(|s| !s.is_empty()) {
        Some(id) => id,
        None => content_id(&question, &context, &answer),
    };
    Ok(ClickbaitPost {
        id,
        source,
        question,
        context,
        answer,
        url: record.url,
        fetched_at: record.fetched_at,
        noise_flag: None,
    })
}

/// Stable id derived from post content: the first 16 hex digits of
/// SHA-256(title NUL article NUL answer).
pub fn content_id(question: &str, context: &str, answer: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(question.as_bytes());
    hasher.update([0]);
    hasher.update(context.as_bytes());
    hasher.update([0]);
    hasher.update(answer.as_bytes());
    hex::encode(&hasher.finalize()[..8])
}
