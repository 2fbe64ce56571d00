//! Greedy-matching cosine similarity over token embeddings.

use super::provider::{check_embeddings, EmbeddingProvider};
use super::{MetricError, MetricTriple};
use crate::text::TokenSeq;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean over `rows` of the best cosine similarity to any of `cols`.
fn mean_best_match(rows: &[Vec<f64>], cols: &[Vec<f64>]) -> f64 {
    let total: f64 = rows
        .iter()
        .map(|r| cols.iter().map(|c| dot(r, c)).fold(f64::NEG_INFINITY, f64::max))
        .sum();
    total / rows.len() as f64
}

/// Recall averages each reference token's best match among candidate tokens;
/// precision swaps the roles. No IDF weighting or baseline rescaling.
/// Precision and recall are clamped into `[0, 1]`.
pub fn semantic_score(
    candidate: &TokenSeq,
    reference: &TokenSeq,
    provider: &dyn EmbeddingProvider,
) -> Result<MetricTriple, MetricError> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let cand = provider.embed(candidate)?;
    check_embeddings(&cand, candidate.len(), provider.dimension())?;
    let refs = provider.embed(reference)?;
    check_embeddings(&refs, reference.len(), provider.dimension())?;

    let recall = mean_best_match(&refs, &cand).clamp(0.0, 1.0);
    let precision = mean_best_match(&cand, &refs).clamp(0.0, 1.0);
    Ok(MetricTriple::from_precision_recall(precision, recall))
}
