//! Human review of fuzzy span labels.
//!
//! Decisions are appended to a JSONL log (one decision per line, fsynced
//! before the caller is acknowledged). Queue state is never stored on its own;
//! it is always the result of replaying the log over the labeled examples,
//! with the latest decision per example winning.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::jsonl;
use crate::spanlab::{window_f1, LabeledExample, SpanStatus};
use crate::text::{char_len, char_slice};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewAction {
    Accept,
    Reject,
    Adjust,
}

/// Half-open char range `[start, end)` into an example's context.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub example_id: String,
    pub action: ReviewAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjusted_span: Option<CharSpan>,
    pub reviewer: String,
    pub decided_at: DateTime<Utc>,
    /// Window-F1 of the adjusted span against the answer (adjust only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// Body of a decision submission.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub action: ReviewAction,
    #[serde(default)]
    pub adjusted_span: Option<CharSpan>,
    pub reviewer: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ReviewError {
    #[error("no reviewable example with id {0:?}")]
    UnknownId(String),
    #[error("invalid span {start}..{end} for context of {len} chars")]
    InvalidSpan { start: usize, end: usize, len: usize },
    #[error("invalid decision: {0}")]
    InvalidDecision(String),
    #[error("decision log {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("decision log {path} line {line}: {message}")]
    CorruptLog {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// Counts exposed by the stats endpoint.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueStats {
    pub total: usize,
    pub pending: usize,
    pub decided: usize,
    pub accept: usize,
    pub reject: usize,
    pub adjust: usize,
}

/// Review state for the needs-review examples: full decision history plus the
/// effective (latest) decision per id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QueueState {
    /// Reviewable ids in labeled-file order.
    order: Vec<String>,
    history: HashMap<String, Vec<ReviewDecision>>,
}

impl QueueState {
    pub fn new(examples: &[LabeledExample]) -> Self {
        let order: Vec<String> = examples
            .iter()
            .filter(|e| e.span.status == SpanStatus::NeedsReview)
            .map(|e| e.id().to_string())
            .collect();
        let history = order.iter().map(|id| (id.clone(), Vec::new())).collect();
        QueueState { order, history }
    }

    pub fn contains(&self, id: &str) -> bool {
        self.history.contains_key(id)
    }

    fn apply(&mut self, decision: ReviewDecision) {
        if let Some(h) = self.history.get_mut(&decision.example_id) {
            h.push(decision);
        }
    }

    pub fn latest(&self, id: &str) -> Option<&ReviewDecision> {
        self.history.get(id).and_then(|h| h.last())
    }

    pub fn history(&self, id: &str) -> &[ReviewDecision] {
        self.history.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn pending(&self) -> impl Iterator<Item = &str> {
        self.order
            .iter()
            .filter(|id| self.history[*id].is_empty())
            .map(String::as_str)
    }

    pub fn decided(&self) -> impl Iterator<Item = &str> {
        self.order
            .iter()
            .filter(|id| !self.history[*id].is_empty())
            .map(String::as_str)
    }

    pub fn stats(&self) -> QueueStats {
        let mut stats = QueueStats {
            total: self.order.len(),
            ..Default::default()
        };
        for id in &self.order {
            match self.latest(id).map(|d| d.action) {
                None => stats.pending += 1,
                Some(action) => {
                    stats.decided += 1;
                    match action {
                        ReviewAction::Accept => stats.accept += 1,
                        ReviewAction::Reject => stats.reject += 1,
                        ReviewAction::Adjust => stats.adjust += 1,
                    }
                }
            }
        }
        stats
    }

    /// All latest decisions, in queue order.
    pub fn latest_decisions(&self) -> Vec<ReviewDecision> {
        self.order.iter().filter_map(|id| self.latest(id).cloned()).collect()
    }
}

/// Checks `request` against `example` and builds the decision to log.
pub fn build_decision(
    example: &LabeledExample,
    request: DecisionRequest,
    decided_at: DateTime<Utc>,
) -> Result<ReviewDecision, ReviewError> {
    if example.span.status != SpanStatus::NeedsReview {
        return Err(ReviewError::UnknownId(example.id().to_string()));
    }
    let score = match (request.action, request.adjusted_span) {
        (ReviewAction::Adjust, None) => {
            return Err(ReviewError::InvalidDecision("adjust requires adjusted_span".into()))
        }
        (ReviewAction::Adjust, Some(span)) => {
            let context = &example.post.context;
            let len = char_len(context);
            if !(span.start < span.end && span.end <= len) {
                return Err(ReviewError::InvalidSpan {
                    start: span.start,
                    end: span.end,
                    len,
                });
            }
            let slice = char_slice(context, span.start, span.end).expect("bounds checked");
            Some(window_f1(slice, &example.post.answer))
        }
        (_, Some(_)) => {
            return Err(ReviewError::InvalidDecision(
                "adjusted_span is only allowed with adjust".into(),
            ))
        }
        (_, None) => None,
    };
    Ok(ReviewDecision {
        example_id: example.id().to_string(),
        action: request.action,
        adjusted_span: request.adjusted_span,
        reviewer: request.reviewer,
        decided_at,
        score,
    })
}

/// Append-only decision log.
pub struct DecisionLog {
    path: PathBuf,
    file: File,
}

impl DecisionLog {
    pub fn open(path: &Path) -> Result<Self, ReviewError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| ReviewError::Io {
                path: path.to_path_buf(),
                source,
            })?;
        Ok(DecisionLog {
            path: path.to_path_buf(),
            file,
        })
    }

    /// Writes one line and fsyncs it.
    pub fn append(&mut self, decision: &ReviewDecision) -> Result<(), ReviewError> {
        let mut line = jsonl::to_canonical_string(decision);
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.sync_data())
            .map_err(|source| ReviewError::Io {
                path: self.path.clone(),
                source,
            })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Parses a decision log, validating every entry against `examples`.
/// A missing file is an empty log.
pub fn read_log(path: &Path, examples: &[LabeledExample]) -> Result<Vec<ReviewDecision>, ReviewError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => {
            return Err(ReviewError::Io {
                path: path.to_path_buf(),
                source,
            })
        }
    };
    let by_id: HashMap<&str, &LabeledExample> = examples.iter().map(|e| (e.id(), e)).collect();
    let corrupt = |line: usize, message: String| ReviewError::CorruptLog {
        path: path.to_path_buf(),
        line,
        message,
    };
    if !text.is_empty() && !text.ends_with('\n') {
        let line = text.lines().count();
        return Err(corrupt(line, "truncated final line".into()));
    }
    let mut decisions = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let decision: ReviewDecision = serde_json::from_str(raw).map_err(|e| corrupt(line, e.to_string()))?;
        let example = by_id
            .get(decision.example_id.as_str())
            .ok_or_else(|| corrupt(line, format!("unknown example id {:?}", decision.example_id)))?;
        let request = DecisionRequest {
            action: decision.action,
            adjusted_span: decision.adjusted_span,
            reviewer: decision.reviewer.clone(),
        };
        build_decision(example, request, decision.decided_at).map_err(|e| corrupt(line, e.to_string()))?;
        decisions.push(decision);
    }
    Ok(decisions)
}

/// Rebuilds queue state by replaying `decisions` in order.
pub fn replay(examples: &[LabeledExample], decisions: impl IntoIterator<Item = ReviewDecision>) -> QueueState {
    let mut state = QueueState::new(examples);
    for d in decisions {
        state.apply(d);
    }
    state
}

/// Copies `examples`, attaching each one's latest decision from `decisions`.
pub fn apply_decisions(examples: &[LabeledExample], decisions: &[ReviewDecision]) -> Vec<LabeledExample> {
    let mut latest: HashMap<&str, &ReviewDecision> = HashMap::new();
    for d in decisions {
        latest.insert(d.example_id.as_str(), d);
    }
    examples
        .iter()
        .map(|e| LabeledExample {
            review: latest.get(e.id()).map(|d| (*d).clone()).or_else(|| e.review.clone()),
            ..e.clone()
        })
        .collect()
}

/// One entry of the pending queue as served to the annotator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueueItem {
    pub id: String,
    pub title: String,
    pub answer: String,
    pub context: String,
    pub span: CharSpan,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleDetail {
    pub example: LabeledExample,
    pub history: Vec<ReviewDecision>,
}

/// Thread-safe review store: immutable examples, a read-mostly state, and a
/// single-writer commit point for the log.
pub struct ReviewStore {
    examples: Vec<LabeledExample>,
    index: HashMap<String, usize>,
    state: RwLock<QueueState>,
    log: Mutex<DecisionLog>,
}

impl ReviewStore {
    /// Replays `log_path` (creating it if needed) over `examples`.
    pub fn open(examples: Vec<LabeledExample>, log_path: &Path) -> Result<Self, ReviewError> {
        let decisions = read_log(log_path, &examples)?;
        let state = replay(&examples, decisions);
        let log = DecisionLog::open(log_path)?;
        let index = examples
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id().to_string(), i))
            .collect();
        Ok(ReviewStore {
            examples,
            index,
            state: RwLock::new(state),
            log: Mutex::new(log),
        })
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn example(&self, id: &str) -> Option<&LabeledExample> {
        self.index.get(id).map(|&i| &self.examples[i])
    }

    pub fn stats(&self) -> QueueStats {
        self.state.read().expect("state lock").stats()
    }

    pub fn snapshot(&self) -> QueueState {
        self.state.read().expect("state lock").clone()
    }

    pub fn queue(&self, limit: usize) -> Vec<QueueItem> {
        let state = self.state.read().expect("state lock");
        state
            .pending()
            .take(limit)
            .filter_map(|id| self.example(id))
            .map(|e| QueueItem {
                id: e.id().to_string(),
                title: e.post.question.clone(),
                answer: e.post.answer.clone(),
                context: e.post.context.clone(),
                span: CharSpan {
                    start: e.span.start,
                    end: e.span.end,
                },
                score: e.span.score,
            })
            .collect()
    }

    pub fn detail(&self, id: &str) -> Option<ExampleDetail> {
        let example = self.example(id)?;
        let state = self.state.read().expect("state lock");
        Some(ExampleDetail {
            example: LabeledExample {
                review: state.latest(id).cloned(),
                ..example.clone()
            },
            history: state.history(id).to_vec(),
        })
    }

    /// Validates, durably logs, then applies a decision.
    pub fn record(
        &self,
        id: &str,
        request: DecisionRequest,
        decided_at: DateTime<Utc>,
    ) -> Result<QueueStats, ReviewError> {
        let example = self
            .example(id)
            .ok_or_else(|| ReviewError::UnknownId(id.to_string()))?;
        let decision = build_decision(example, request, decided_at)?;
        let mut log = self.log.lock().expect("log lock");
        log.append(&decision)?;
        let mut state = self.state.write().expect("state lock");
        state.apply(decision);
        Ok(state.stats())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ClickbaitPost, Source};
    use crate::spanlab::{SpanLabel, SpanMethod};
    use chrono::TimeZone;

    fn example(id: &str, status: SpanStatus) -> LabeledExample {
        LabeledExample {
            post: ClickbaitPost {
                id: id.into(),
                source: Source::Reddit,
                question: "Why?".into(),
                context: "They focus only on the outcome, not the process.".into(),
                answer: "the outcome".into(),
                url: None,
                fetched_at: None,
                noise_flag: None,
            },
            span: SpanLabel {
                start: 0,
                end: 4,
                score: 0.7,
                method: SpanMethod::Fuzzy,
                status,
                reject_reason: (status == SpanStatus::Rejected)
                    .then_some(crate::spanlab::RejectReason::BelowThreshold),
            },
            review: None,
        }
    }

    fn ts(sec: i64) -> DateTime<Utc> {
        Utc.timestamp_opt(1_700_000_000 + sec, 0).unwrap()
    }

    fn req(action: ReviewAction, span: Option<(usize, usize)>) -> DecisionRequest {
        DecisionRequest {
            action,
            adjusted_span: span.map(|(start, end)| CharSpan { start, end }),
            reviewer: "ann".into(),
        }
    }

    fn fixture() -> Vec<LabeledExample> {
        vec![
            example("a", SpanStatus::NeedsReview),
            example("b", SpanStatus::AutoAccepted),
            example("c", SpanStatus::NeedsReview),
            example("d", SpanStatus::NeedsReview),
        ]
    }

    #[test]
    fn empty_log_everything_pending() {
        let dir = tempfile::tempdir().unwrap();
        let store = ReviewStore::open(fixture(), &dir.path().join("log.jsonl")).unwrap();
        let stats = store.stats();
        assert_eq!((stats.total, stats.pending, stats.decided), (3, 3, 0));
        let ids: Vec<_> = store.queue(10).into_iter().map(|q| q.id).collect();
        assert_eq!(ids, vec!["a", "c", "d"]);
        assert_eq!(store.queue(1).len(), 1);
    }

    #[test]
    fn restart_restores_decisions() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("log.jsonl");
        {
            let store = ReviewStore::open(fixture(), &log).unwrap();
            store.record("a", req(ReviewAction::Accept, None), ts(1)).unwrap();
            store.record("c", req(ReviewAction::Reject, None), ts(2)).unwrap();
            store.record("d", req(ReviewAction::Adjust, Some((19, 30))), ts(3)).unwrap();
        }
        let store = ReviewStore::open(fixture(), &log).unwrap();
        let s = store.stats();
        assert_eq!((s.decided, s.accept, s.reject, s.adjust, s.pending), (3, 1, 1, 1, 0));
    }

    #[test]
    fn latest_wins_history_kept() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("log.jsonl");
        let store = ReviewStore::open(fixture(), &log).unwrap();
        store.record("a", req(ReviewAction::Accept, None), ts(1)).unwrap();
        store.record("a", req(ReviewAction::Reject, None), ts(2)).unwrap();
        let detail = store.detail("a").unwrap();
        assert_eq!(detail.history.len(), 2);
        assert_eq!(detail.example.review.unwrap().action, ReviewAction::Reject);
        assert_eq!(fs::read_to_string(&log).unwrap().lines().count(), 2);
        assert_eq!(store.stats().reject, 1);
        assert_eq!(store.stats().accept, 0);
    }

    #[test]
    fn invalid_requests() {
        let dir = tempfile::tempdir().unwrap();
        let store = ReviewStore::open(fixture(), &dir.path().join("log.jsonl")).unwrap();
        assert!(matches!(
            store.record("zzz", req(ReviewAction::Accept, None), ts(0)),
            Err(ReviewError::UnknownId(_))
        ));
        // auto-accepted examples are not in the queue
        assert!(matches!(
            store.record("b", req(ReviewAction::Accept, None), ts(0)),
            Err(ReviewError::UnknownId(_))
        ));
        assert!(matches!(
            store.record("a", req(ReviewAction::Adjust, Some((5, 5))), ts(0)),
            Err(ReviewError::InvalidSpan { .. })
        ));
        assert!(matches!(
            store.record("a", req(ReviewAction::Adjust, Some((5, 4))), ts(0)),
            Err(ReviewError::InvalidSpan { .. })
        ));
        assert!(matches!(
            store.record("a", req(ReviewAction::Adjust, Some((0, 999))), ts(0)),
            Err(ReviewError::InvalidSpan { .. })
        ));
        assert!(matches!(
            store.record("a", req(ReviewAction::Adjust, None), ts(0)),
            Err(ReviewError::InvalidDecision(_))
        ));
        assert!(matches!(
            store.record("a", req(ReviewAction::Accept, Some((0, 4))), ts(0)),
            Err(ReviewError::InvalidDecision(_))
        ));
        assert_eq!(store.stats().decided, 0);
    }

    #[test]
    fn adjust_is_rescored() {
        let dir = tempfile::tempdir().unwrap();
        let store = ReviewStore::open(fixture(), &dir.path().join("log.jsonl")).unwrap();
        // "the outcome" sits at chars 19..30
        store.record("a", req(ReviewAction::Adjust, Some((19, 30))), ts(0)).unwrap();
        let d = store.detail("a").unwrap().example.review.unwrap();
        assert_eq!(d.score, Some(1.0));
    }

    #[test]
    fn corrupt_log_refuses_with_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("log.jsonl");
        let good = jsonl::to_canonical_string(&build_decision(&fixture()[0], req(ReviewAction::Accept, None), ts(0)).unwrap());
        fs::write(&log, format!("{good}\n{{not json}}\n")).unwrap();
        match ReviewStore::open(fixture(), &log) {
            Err(ReviewError::CorruptLog { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected corrupt log, got {:?}", other.err()),
        }
        fs::write(&log, format!("{good}\n{good}")).unwrap();
        assert!(matches!(ReviewStore::open(fixture(), &log), Err(ReviewError::CorruptLog { line: 2, .. })));
        fs::write(&log, good.replace("\"a\"", "\"nope\"") + "\n").unwrap();
        assert!(matches!(ReviewStore::open(fixture(), &log), Err(ReviewError::CorruptLog { line: 1, .. })));
    }

    #[test]
    fn log_is_append_only() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("log.jsonl");
        let store = ReviewStore::open(fixture(), &log).unwrap();
        store.record("a", req(ReviewAction::Accept, None), ts(1)).unwrap();
        let before = fs::read(&log).unwrap();
        store.record("c", req(ReviewAction::Reject, None), ts(2)).unwrap();
        let after = fs::read(&log).unwrap();
        assert!(after.starts_with(&before));
        assert!(after.len() > before.len());
    }

    #[test]
    fn apply_decisions_attaches_latest() {
        let ex = fixture();
        let d1 = build_decision(&ex[0], req(ReviewAction::Accept, None), ts(1)).unwrap();
        let d2 = build_decision(&ex[0], req(ReviewAction::Reject, None), ts(2)).unwrap();
        let merged = apply_decisions(&ex, &[d1, d2]);
        assert_eq!(merged[0].review.as_ref().unwrap().action, ReviewAction::Reject);
        assert!(merged[1].review.is_none());
    }
}
