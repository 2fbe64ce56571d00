//! Answer cleaning: stripping superfluous user commentary and flagging
//! criticism or toxic answers.
//!
//! Rules live in a small sectioned text format (see `rules/default.rules`):
//!
//! ```text
//! version = 1
//! [strip]
//! saved_n_clicks = saved\s+\d+\s+clicks?
//! [toxic]
//! ...
//! [opinion]
//! ...
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::fs;
use std::path::{Path, PathBuf};

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::corpus::{ClickbaitPost, Corpus, CorpusError, NoiseFlag};
use crate::text::{collapse_whitespace, normalize};

pub const DEFAULT_RULES: &str = include_str!("../rules/default.rules");

const MAX_STRIP_PASSES: usize = 8;

#[derive(Debug, thiserror::Error)]
pub enum RulesError {
    #[error("cannot read rules file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: rule {name:?} does not compile: {source}")]
    Pattern {
        line: usize,
        name: String,
        #[source]
        source: regex::Error,
    },
}

#[derive(Clone, Debug)]
pub struct NamedPattern {
    pub name: String,
    pub regex: Regex,
}

impl NamedPattern {
    pub fn new(name: &str, pattern: &str) -> Result<Self, regex::Error> {
        let regex = RegexBuilder::new(pattern).case_insensitive(true).build()?;
        Ok(NamedPattern {
            name: name.to_string(),
            regex,
        })
    }
}

/// Ordered strip rules plus toxic/opinion flag patterns.
#[derive(Clone, Debug, Default)]
pub struct RuleSet {
    pub version: Option<u32>,
    pub strip_patterns: Vec<NamedPattern>,
    pub toxic_patterns: Vec<NamedPattern>,
    pub opinion_patterns: Vec<NamedPattern>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CleaningAction {
    Kept,
    Rewritten,
    FlaggedToxic,
    FlaggedOpinion,
    Dropped,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningOutcome {
    pub post_id: String,
    pub action: CleaningAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewritten_answer: Option<String>,
    /// Empty when `action` is `kept`.
    pub matched_rule: String,
}

impl CleaningOutcome {
    fn kept(post_id: &str) -> Self {
        CleaningOutcome {
            post_id: post_id.to_string(),
            action: CleaningAction::Kept,
            rewritten_answer: None,
            matched_rule: String::new(),
        }
    }
}

/// Result of [`clean_corpus`].
#[derive(Clone, Debug)]
pub struct CleanedCorpus {
    pub corpus: Corpus,
    pub outcomes: Vec<CleaningOutcome>,
    /// Fraction of input posts flagged toxic or opinion.
    pub flagged_fraction: f64,
}

impl RuleSet {
    pub fn empty() -> Self {
        RuleSet::default()
    }

    /// The bundled default rules.
    pub fn default_rules() -> Self {
        RuleSet::parse(DEFAULT_RULES).expect("bundled rules are valid")
    }

    pub fn load(path: &Path) -> Result<Self, RulesError> {
        let text = fs::read_to_string(path).map_err(|source| RulesError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        RuleSet::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, RulesError> {
        #[derive(Clone, Copy)]
        enum Section {
            Header,
            Strip,
            Toxic,
            Opinion,
        }
        let mut rules = RuleSet::default();
        let mut section = Section::Header;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = match name.trim() {
                    "strip" => Section::Strip,
                    "toxic" => Section::Toxic,
                    "opinion" => Section::Opinion,
                    other => {
                        return Err(RulesError::Syntax {
                            line: line_no,
                            message: format!("unknown section [{other}]"),
                        })
                    }
                };
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(RulesError::Syntax {
                    line: line_no,
                    message: "expected `name = pattern`".into(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(RulesError::Syntax {
                    line: line_no,
                    message: "empty rule name or pattern".into(),
                });
            }
            let target = match section {
                Section::Header if key == "version" => {
                    let v = value.parse().map_err(|_| RulesError::Syntax {
                        line: line_no,
                        message: format!("bad version {value:?}"),
                    })?;
                    rules.version = Some(v);
                    continue;
                }
                Section::Header => {
                    return Err(RulesError::Syntax {
                        line: line_no,
                        message: format!("rule {key:?} outside of a section"),
                    })
                }
                Section::Strip => &mut rules.strip_patterns,
                Section::Toxic => &mut rules.toxic_patterns,
                Section::Opinion => &mut rules.opinion_patterns,
            };
            let pattern = NamedPattern::new(key, value).map_err(|source| RulesError::Pattern {
                line: line_no,
                name: key.to_string(),
                source,
            })?;
            target.push(pattern);
        }
        Ok(rules)
    }

    /// Removes strip-pattern matches from `answer`.
    ///
    /// Rules apply in order, each deleting all of its non-overlapping matches
    /// left to right; passes repeat until nothing matches so that cleaning an
    /// already cleaned answer is a no-op. `matched_rule` names the first rule
    /// that fired.
    pub fn clean_answer(&self, post_id: &str, answer: &str) -> (String, CleaningOutcome) {
        let mut current = normalize(answer);
        let mut first_rule: Option<&str> = None;
        for _ in 0..MAX_STRIP_PASSES {
            let mut changed = false;
            for rule in &self.strip_patterns {
                if rule.regex.is_match(&current) {
                    let next = rule.regex.replace_all(&current, " ");
                    let next = collapse_whitespace(&next);
                    if next != current {
                        first_rule.get_or_insert(rule.name.as_str());
                        current = next;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let Some(rule) = first_rule else {
            return (answer.to_string(), CleaningOutcome::kept(post_id));
        };
        let cleaned = current.trim().to_string();
        let outcome = if cleaned.is_empty() {
            CleaningOutcome {
                post_id: post_id.to_string(),
                action: CleaningAction::Dropped,
                rewritten_answer: None,
                matched_rule: rule.to_string(),
            }
        } else {
            CleaningOutcome {
                post_id: post_id.to_string(),
                action: CleaningAction::Rewritten,
                rewritten_answer: Some(cleaned.clone()),
                matched_rule: rule.to_string(),
            }
        };
        (cleaned, outcome)
    }

    /// Flags an answer matching a toxic pattern (checked first) or an opinion
    /// pattern. Flags are advisory; export decides what to do with them.
    pub fn flag_noise(&self, post_id: &str, answer: &str) -> CleaningOutcome {
        let normalized = normalize(answer);
        let hit = |patterns: &[NamedPattern]| {
            patterns
                .iter()
                .find(|p| p.regex.is_match(&normalized))
                .map(|p| p.name.clone())
        };
        if let Some(rule) = hit(&self.toxic_patterns) {
            return CleaningOutcome {
                post_id: post_id.to_string(),
                action: CleaningAction::FlaggedToxic,
                rewritten_answer: None,
                matched_rule: rule,
            };
        }
        if let Some(rule) = hit(&self.opinion_patterns) {
            return CleaningOutcome {
                post_id: post_id.to_string(),
                action: CleaningAction::FlaggedOpinion,
                rewritten_answer: None,
                matched_rule: rule,
            };
        }
        CleaningOutcome::kept(post_id)
    }
}

/// Applies `rules` to every post: rewrites answers, removes posts whose
/// answer strips to nothing, and attaches noise flags.
pub fn clean_corpus(corpus: &Corpus, rules: &RuleSet) -> Result<CleanedCorpus, CorpusError> {
    let mut posts = Vec::with_capacity(corpus.len());
    let mut outcomes = Vec::with_capacity(corpus.len());
    let mut stats = corpus.stats().clone();
    let mut flagged = 0usize;
    for post in corpus.posts() {
        let (cleaned, strip_outcome) = rules.clean_answer(&post.id, &post.answer);
        if strip_outcome.action == CleaningAction::Dropped {
            stats.record_drop("cleaned_empty");
            outcomes.push(strip_outcome);
            continue;
        }
        let flag = rules.flag_noise(&post.id, &cleaned);
        let noise_flag = match flag.action {
            CleaningAction::FlaggedToxic => Some(NoiseFlag::Toxic),
            CleaningAction::FlaggedOpinion => Some(NoiseFlag::Opinion),
            _ => None,
        };
        let outcome = if noise_flag.is_some() {
            flagged += 1;
            CleaningOutcome {
                rewritten_answer: strip_outcome.rewritten_answer,
                ..flag
            }
        } else {
            strip_outcome
        };
        outcomes.push(outcome);
        posts.push(ClickbaitPost {
            answer: cleaned,
            noise_flag,
            ..post.clone()
        });
    }
    let flagged_fraction = if corpus.is_empty() {
        0.0
    } else {
        flagged as f64 / corpus.len() as f64
    };
    let corpus = Corpus::new(posts, stats.dropped_count, stats.drop_reasons)?;
    Ok(CleanedCorpus {
        corpus,
        outcomes,
        flagged_fraction,
    })
}
