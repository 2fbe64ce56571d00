//! Spoiler evaluation metrics: ROUGE-1/2/L and an embedding-based semantic
//! score, each reported as a precision/recall/F1 triple.
//!
//! Metrics implement [`Metric`] and are selected by name from a
//! [`MetricRegistry`]; the semantic metric wraps whichever
//! [`EmbeddingProvider`] was configured.

mod provider;
mod rouge;
mod semantic;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use provider::{
    EmbeddingProvider, HashedProvider, LookupProvider, LookupRecord, OneHotProvider, ProviderError,
    ProviderFactory, ProviderRegistry, ProviderSettings, RemoteProvider, UNIT_NORM_TOLERANCE,
};
pub use rouge::{lcs_len, rouge_l, rouge_n};
pub use semantic::semantic_score;

use crate::text::TokenSeq;

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("semantic similarity is undefined for empty input")]
    EmptyInput,
    #[error("cannot aggregate an empty score list")]
    EmptyAggregate,
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricTriple {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricTriple {
    pub const fn new(precision: f64, recall: f64, f1: f64) -> Self {
        MetricTriple {
            precision,
            recall,
            f1,
        }
    }

    pub const fn zero() -> Self {
        MetricTriple::new(0.0, 0.0, 0.0)
    }

    /// F1 is the harmonic mean, 0 when both inputs are 0.
    pub fn from_precision_recall(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        MetricTriple::new(precision, recall, f1)
    }

    pub fn in_unit_range(&self) -> bool {
        [self.precision, self.recall, self.f1]
            .iter()
            .all(|v| (0.0..=1.0).contains(v))
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.precision, self.recall, self.f1]
    }
}

/// Component-wise mean (macro average).
pub fn aggregate(scores: &[MetricTriple]) -> Result<MetricTriple, MetricError> {
    if scores.is_empty() {
        return Err(MetricError::EmptyAggregate);
    }
    let n = scores.len() as f64;
    let sum = scores.iter().fold([0.0; 3], |acc, t| {
        [acc[0] + t.precision, acc[1] + t.recall, acc[2] + t.f1]
    });
    Ok(MetricTriple::new(sum[0] / n, sum[1] / n, sum[2] / n))
}

/// A scoring strategy over tokenized candidate/reference pairs.
pub trait Metric: Send + Sync {
    /// Registry key, e.g. `rouge1`.
    fn name(&self) -> &str;

    /// Column heading, e.g. `ROUGE-1`.
    fn label(&self) -> &str;

    fn score(&self, candidate: &TokenSeq, reference: &TokenSeq) -> Result<MetricTriple, MetricError>;
}

pub struct RougeN {
    n: usize,
    name: String,
    label: String,
}

impl RougeN {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        RougeN {
            n,
            name: format!("rouge{n}"),
            label: format!("ROUGE-{n}"),
        }
    }
}

impl Metric for RougeN {
    fn name(&self) -> &str {
        &self.name
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn score(&self, candidate: &TokenSeq, reference: &TokenSeq) -> Result<MetricTriple, MetricError> {
        Ok(rouge_n(candidate, reference, self.n))
    }
}

pub struct RougeL;

impl Metric for RougeL {
    fn name(&self) -> &str {
        "rougeL"
    }

    fn label(&self) -> &str {
        "ROUGE-L"
    }

    fn score(&self, candidate: &TokenSeq, reference: &TokenSeq) -> Result<MetricTriple, MetricError> {
        Ok(rouge_l(candidate, reference))
    }
}

pub struct SemanticMetric {
    provider: Arc<dyn EmbeddingProvider>,
}

impl SemanticMetric {
    pub fn new(provider: Arc<dyn EmbeddingProvider>) -> Self {
        SemanticMetric { provider }
    }
}

impl Metric for SemanticMetric {
    fn name(&self) -> &str {
        "semantic"
    }

    fn label(&self) -> &str {
        "Semantic"
    }

    fn score(&self, candidate: &TokenSeq, reference: &TokenSeq) -> Result<MetricTriple, MetricError> {
        semantic_score(candidate, reference, self.provider.as_ref())
    }
}

/// Ordered, name-addressable collection of metrics.
#[derive(Default)]
pub struct MetricRegistry {
    metrics: Vec<Box<dyn Metric>>,
}

impl MetricRegistry {
    pub fn empty() -> Self {
        MetricRegistry::default()
    }

    /// ROUGE-1, ROUGE-2, ROUGE-L, plus the semantic metric when a provider is
    /// given.
    pub fn standard(provider: Option<Arc<dyn EmbeddingProvider>>) -> Self {
        let mut reg = MetricRegistry::empty();
        reg.register(Box::new(RougeN::new(1)));
        reg.register(Box::new(RougeN::new(2)));
        reg.register(Box::new(RougeL));
        if let Some(p) = provider {
            reg.register(Box::new(SemanticMetric::new(p)));
        }
        reg
    }

    /// Adds a metric, replacing any existing one with the same name in place.
    pub fn register(&mut self, metric: Box<dyn Metric>) {
        match self.metrics.iter().position(|m| m.name() == metric.name()) {
            Some(i) => self.metrics[i] = metric,
            None => self.metrics.push(metric),
        }
    }

    pub fn get(&self, name: &str) -> Option<&dyn Metric> {
        self.metrics.iter().find(|m| m.name() == name).map(|m| m.as_ref())
    }

    pub fn require(&self, name: &str) -> Result<&dyn Metric, MetricError> {
        self.get(name).ok_or_else(|| MetricError::UnknownMetric(name.to_string()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.metrics.iter().map(|m| m.name()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    #[test]
    fn aggregate_means() {
        let agg = aggregate(&[MetricTriple::new(1.0, 1.0, 1.0), MetricTriple::zero()]).unwrap();
        assert_eq!(agg, MetricTriple::new(0.5, 0.5, 0.5));
        let one = MetricTriple::new(0.25, 0.5, 1.0 / 3.0);
        assert_eq!(aggregate(&[one]).unwrap(), one);
        let three = aggregate(&[
            MetricTriple::new(0.5, 1.0, 2.0 / 3.0),
            MetricTriple::new(2.0 / 3.0, 1.0, 0.8),
            MetricTriple::new(0.1, 0.4, 0.16),
        ])
        .unwrap();
        // (0.5 + 0.6667 + 0.1) / 3, (1 + 1 + 0.4) / 3, (0.6667 + 0.8 + 0.16) / 3
        assert!((three.precision - 1.266_666_666_666_666_6 / 3.0).abs() < 1e-12);
        assert!((three.recall - 0.8).abs() < 1e-12);
        assert!((three.f1 - 1.626_666_666_666_666_6 / 3.0).abs() < 1e-12);
        assert!(matches!(aggregate(&[]), Err(MetricError::EmptyAggregate)));
    }

    #[test]
    fn harmonic_mean() {
        let t = MetricTriple::from_precision_recall(0.5, 1.0);
        assert!((t.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(MetricTriple::from_precision_recall(0.0, 0.0).f1, 0.0);
    }

    #[test]
    fn registry_by_name() {
        let reg = MetricRegistry::standard(None);
        assert_eq!(reg.names(), vec!["rouge1", "rouge2", "rougeL"]);
        assert!(reg.get("semantic").is_none());
        let with = MetricRegistry::standard(Some(Arc::new(HashedProvider::new(1, 8))));
        assert_eq!(with.require("semantic").unwrap().label(), "Semantic");
        let s = tokenize("a b c");
        for name in with.names() {
            let t = with.require(name).unwrap().score(&s, &s).unwrap();
            assert!((t.f1 - 1.0).abs() < 1e-6, "{name}");
        }
        assert!(matches!(reg.require("bleu"), Err(MetricError::UnknownMetric(_))));
    }
}
