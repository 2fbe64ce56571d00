//! Answer-span localization: finds where a user answer sits in the article.
//!
//! Matching happens on token sequences from [`crate::text::tokenize`], so it
//! is case-insensitive and ignores punctuation, while the reported spans are
//! char offsets into the raw context running from the first matched token's
//! first char to the last matched token's last char.
//!
//! An answer found verbatim exactly once is accepted automatically; found
//! more than once it is rejected as ambiguous. Otherwise token windows of
//! roughly the answer's length are scored by multiset F1 and the best region
//! goes to human review, is rejected as ambiguous when a second disjoint
//! region scores within `delta`, or is rejected outright below `tau`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::ClickbaitPost;
use crate::review::{CharSpan, ReviewAction, ReviewDecision};
use crate::text::{char_len, tokenize, tokenize_normalized, TokenSeq};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LabelerConfigError {
    #[error("tau must satisfy 0 < tau <= 1, got {0}")]
    Tau(f64),
    #[error("delta must satisfy 0 <= delta < tau, got delta={delta} tau={tau}")]
    Delta { delta: f64, tau: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelerConfig {
    /// Minimum fuzzy score for a span to be considered at all.
    pub tau: f64,
    /// Margin under which two disjoint candidates count as ambiguous.
    pub delta: f64,
    /// Window lengths range over `|answer| - slack ..= |answer| + slack` tokens.
    pub window_slack: usize,
}

impl Default for LabelerConfig {
    fn default() -> Self {
        LabelerConfig {
            tau: 0.65,
            delta: 0.05,
            window_slack: 3,
        }
    }
}

impl LabelerConfig {
    pub fn new(tau: f64, delta: f64, window_slack: usize) -> Result<Self, LabelerConfigError> {
        let cfg = LabelerConfig {
            tau,
            delta,
            window_slack,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), LabelerConfigError> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(LabelerConfigError::Tau(self.tau));
        }
        if !(self.delta >= 0.0 && self.delta < self.tau) {
            return Err(LabelerConfigError::Delta {
                delta: self.delta,
                tau: self.tau,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanMethod {
    Exact,
    Fuzzy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanStatus {
    AutoAccepted,
    NeedsReview,
    Rejected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    BelowThreshold,
    AmbiguousMultiple,
    AnswerIsSummary,
}

impl fmt::Display for SpanStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpanStatus::AutoAccepted => "auto_accepted",
            SpanStatus::NeedsReview => "needs_review",
            SpanStatus::Rejected => "rejected",
        })
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::BelowThreshold => "below_threshold",
            RejectReason::AmbiguousMultiple => "ambiguous_multiple",
            RejectReason::AnswerIsSummary => "answer_is_summary",
        })
    }
}

/// A located span before any accept/reject decision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpanCandidate {
    /// Inclusive char offset into the context.
    pub start: usize,
    /// Exclusive char offset into the context.
    pub end: usize,
    pub score: f64,
    pub method: SpanMethod,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpanLabel {
    pub start: usize,
    pub end: usize,
    pub score: f64,
    pub method: SpanMethod,
    pub status: SpanStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reject_reason: Option<RejectReason>,
}

impl SpanLabel {
    fn from_candidate(c: SpanCandidate, status: SpanStatus, reject_reason: Option<RejectReason>) -> Self {
        SpanLabel {
            start: c.start,
            end: c.end,
            score: c.score,
            method: c.method,
            status,
            reject_reason,
        }
    }

    /// Checks the label's structural invariants against its context.
    pub fn check(&self, context: &str) -> Result<(), String> {
        let len = char_len(context);
        if !(self.start < self.end && self.end <= len) {
            return Err(format!("span {}..{} invalid for context of {len} chars", self.start, self.end));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(format!("score {} outside [0, 1]", self.score));
        }
        if self.method == SpanMethod::Exact && self.score != 1.0 {
            return Err("exact span with score != 1".into());
        }
        if (self.status == SpanStatus::Rejected) != self.reject_reason.is_some() {
            return Err("reject_reason must be present iff status is rejected".into());
        }
        Ok(())
    }
}

/// Whether (and where) an example may appear in an extractive export.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Eligibility {
    Eligible(CharSpan),
    /// Needs a human decision first.
    Pending,
    Rejected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub post: ClickbaitPost,
    pub span: SpanLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review: Option<ReviewDecision>,
}

impl LabeledExample {
    pub fn id(&self) -> &str {
        &self.post.id
    }

    /// Extractive-export gate: auto-accepted spans, or a latest review
    /// decision of accept (auto span) or adjust (reviewed span).
    pub fn eligibility(&self) -> Eligibility {
        let auto = CharSpan {
            start: self.span.start,
            end: self.span.end,
        };
        match (&self.review, self.span.status) {
            (Some(d), _) => match d.action {
                ReviewAction::Accept => Eligibility::Eligible(auto),
                ReviewAction::Adjust => match d.adjusted_span {
                    Some(span) => Eligibility::Eligible(span),
                    None => Eligibility::Pending,
                },
                ReviewAction::Reject => Eligibility::Rejected,
            },
            (None, SpanStatus::AutoAccepted) => Eligibility::Eligible(auto),
            (None, SpanStatus::NeedsReview) => Eligibility::Pending,
            (None, SpanStatus::Rejected) => Eligibility::Rejected,
        }
    }
}

/// Token-multiset F1 between two strings: `2 * overlap / (|a| + |b|)`,
/// 0 when both are empty.
pub fn window_f1(window: &str, answer: &str) -> f64 {
    let w = tokenize(window);
    let a = tokenize(answer);
    if w.is_empty() && a.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, isize> = HashMap::new();
    for t in a.iter() {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in w.iter() {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    f1_score(overlap, w.len(), a.len())
}

fn f1_score(overlap: usize, window_len: usize, answer_len: usize) -> f64 {
    (2 * overlap) as f64 / (window_len + answer_len) as f64
}

/// All verbatim (token-sequence) occurrences of `answer` in `context`.
pub fn find_exact_span(context: &str, answer: &str) -> Vec<SpanCandidate> {
    let ctx = tokenize_normalized(context);
    let ans = tokenize(answer);
    exact_hits(&ctx, &ans)
}

fn exact_hits(ctx: &TokenSeq, ans: &TokenSeq) -> Vec<SpanCandidate> {
    let m = ans.len();
    if m == 0 || m > ctx.len() {
        return Vec::new();
    }
    (0..=ctx.len() - m)
        .filter(|&i| ctx.tokens[i..i + m] == ans.tokens[..])
        .map(|i| SpanCandidate {
            start: ctx.offsets[i].start,
            end: ctx.offsets[i + m - 1].end,
            score: 1.0,
            method: SpanMethod::Exact,
        })
        .collect()
}

#[derive(Clone, Copy, Debug)]
struct Window {
    start: usize,
    len: usize,
    score: f64,
}

/// Orders by score descending, then earlier start, then shorter window.
fn window_order(a: &Window, b: &Window) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.start.cmp(&b.start))
        .then(a.len.cmp(&b.len))
}

/// Every scored window of length `|answer| ± slack` over the context tokens.
fn scored_windows(ctx: &TokenSeq, ans: &TokenSeq, slack: usize) -> Vec<Window> {
    let n = ctx.len();
    let m = ans.len();
    if n == 0 || m == 0 {
        return Vec::new();
    }
    let mut vocab: HashMap<&str, usize> = HashMap::new();
    let mut answer_counts: Vec<usize> = Vec::new();
    for t in ans.iter() {
        let next = vocab.len();
        let id = *vocab.entry(t).or_insert(next);
        if id == answer_counts.len() {
            answer_counts.push(0);
        }
        answer_counts[id] += 1;
    }
    // Context tokens absent from the answer never contribute overlap.
    let ids: Vec<Option<usize>> = ctx.iter().map(|t| vocab.get(t).copied()).collect();

    let min_len = m.saturating_sub(slack).max(1);
    let max_len = (m + slack).min(n);
    let mut out = Vec::new();
    let mut window_counts = vec![0usize; answer_counts.len()];
    for len in min_len..=max_len {
        window_counts.iter_mut().for_each(|c| *c = 0);
        let mut overlap = 0usize;
        for (i, id) in ids.iter().enumerate() {
            if let Some(id) = *id {
                if window_counts[id] < answer_counts[id] {
                    overlap += 1;
                }
                window_counts[id] += 1;
            }
            if i >= len {
                if let Some(old) = ids[i - len] {
                    window_counts[old] -= 1;
                    if window_counts[old] < answer_counts[old] {
                        overlap -= 1;
                    }
                }
            }
            if i + 1 >= len {
                out.push(Window {
                    start: i + 1 - len,
                    len,
                    score: f1_score(overlap, len, m),
                });
            }
        }
    }
    out
}

fn to_candidate(ctx: &TokenSeq, w: &Window) -> SpanCandidate {
    SpanCandidate {
        start: ctx.offsets[w.start].start,
        end: ctx.offsets[w.start + w.len - 1].end,
        score: w.score,
        method: SpanMethod::Fuzzy,
    }
}

/// Keeps the best window of each region: walks windows best-first and drops
/// any that shares a token with one already kept.
fn suppress_overlapping(mut windows: Vec<Window>, n_tokens: usize) -> Vec<Window> {
    windows.sort_by(window_order);
    let mut taken = vec![false; n_tokens];
    let mut kept = Vec::new();
    for w in windows {
        let range = w.start..w.start + w.len;
        if taken[range.clone()].iter().any(|&t| t) {
            continue;
        }
        taken[range].iter_mut().for_each(|t| *t = true);
        kept.push(w);
    }
    kept
}

/// Regional-best fuzzy windows scoring at least `tau - delta`, best first.
///
/// Returned candidates never overlap each other.
pub fn find_fuzzy_span(context: &str, answer: &str, cfg: &LabelerConfig) -> Vec<SpanCandidate> {
    let ctx = tokenize_normalized(context);
    let ans = tokenize(answer);
    fuzzy_candidates(&ctx, &ans, cfg)
}

fn fuzzy_candidates(ctx: &TokenSeq, ans: &TokenSeq, cfg: &LabelerConfig) -> Vec<SpanCandidate> {
    let floor = cfg.tau - cfg.delta;
    let windows: Vec<Window> = scored_windows(ctx, ans, cfg.window_slack)
        .into_iter()
        .filter(|w| w.score > 0.0 && w.score >= floor)
        .collect();
    suppress_overlapping(windows, ctx.len())
        .iter()
        .map(|w| to_candidate(ctx, w))
        .collect()
}

/// Span reported for rejected examples: the best window at any score, or the
/// first token (whole context if it has none) when nothing overlaps.
fn fallback_span(context: &str, ctx: &TokenSeq, ans: &TokenSeq, slack: usize) -> SpanCandidate {
    if let Some(best) = scored_windows(ctx, ans, slack).into_iter().min_by(window_order) {
        if best.score > 0.0 {
            return to_candidate(ctx, &best);
        }
    }
    let (start, end) = match ctx.offsets.first() {
        Some(r) => (r.start, r.end),
        None => (0, char_len(context)),
    };
    SpanCandidate {
        start,
        end,
        score: 0.0,
        method: SpanMethod::Fuzzy,
    }
}

/// Locates the answer span of `post` and decides its status.
pub fn label_example(post: &ClickbaitPost, cfg: &LabelerConfig) -> LabeledExample {
    let ctx = tokenize_normalized(&post.context);
    let ans = tokenize(&post.answer);
    let exact = exact_hits(&ctx, &ans);
    let span = match exact.len() {
        1 => SpanLabel::from_candidate(exact[0], SpanStatus::AutoAccepted, None),
        n if n > 1 => SpanLabel::from_candidate(
            exact[0],
            SpanStatus::Rejected,
            Some(RejectReason::AmbiguousMultiple),
        ),
        _ => label_fuzzy(post, &ctx, &ans, cfg),
    };
    LabeledExample {
        post: post.clone(),
        span,
        review: None,
    }
}

fn label_fuzzy(post: &ClickbaitPost, ctx: &TokenSeq, ans: &TokenSeq, cfg: &LabelerConfig) -> SpanLabel {
    let candidates = fuzzy_candidates(ctx, ans, cfg);
    match candidates.first() {
        Some(best) if best.score >= cfg.tau => {
            let ambiguous = candidates
                .get(1)
                .is_some_and(|runner_up| runner_up.score >= best.score - cfg.delta);
            if ambiguous {
                SpanLabel::from_candidate(*best, SpanStatus::Rejected, Some(RejectReason::AmbiguousMultiple))
            } else {
                SpanLabel::from_candidate(*best, SpanStatus::NeedsReview, None)
            }
        }
        _ => {
            let best = fallback_span(&post.context, ctx, ans, cfg.window_slack);
            let reason = if best.score < cfg.tau / 2.0 {
                RejectReason::AnswerIsSummary
            } else {
                RejectReason::BelowThreshold
            };
            SpanLabel::from_candidate(best, SpanStatus::Rejected, Some(reason))
        }
    }
}

/// Status histogram for a labeling run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSummary {
    pub total: usize,
    pub by_status: BTreeMap<SpanStatus, usize>,
    pub by_reject_reason: BTreeMap<RejectReason, usize>,
}

impl LabelSummary {
    pub fn from_examples(examples: &[LabeledExample]) -> Self {
        let mut summary = LabelSummary {
            total: examples.len(),
            ..Default::default()
        };
        for ex in examples {
            *summary.by_status.entry(ex.span.status).or_default() += 1;
            if let Some(r) = ex.span.reject_reason {
                *summary.by_reject_reason.entry(r).or_default() += 1;
            }
        }
        summary
    }
}

impl fmt::Display for LabelSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "labeled {} examples", self.total)?;
        for status in [SpanStatus::AutoAccepted, SpanStatus::NeedsReview, SpanStatus::Rejected] {
            writeln!(f, "  {:<16}{}", status, self.by_status.get(&status).copied().unwrap_or(0))?;
        }
        for (reason, count) in &self.by_reject_reason {
            writeln!(f, "    {reason:<20}{count}")?;
        }
        Ok(())
    }
}

pub fn label_all(posts: &[ClickbaitPost], cfg: &LabelerConfig) -> Vec<LabeledExample> {
    posts.iter().map(|p| label_example(p, cfg)).collect()
}
