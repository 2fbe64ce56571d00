//! ROUGE-N (clipped n-gram overlap) and ROUGE-L (token LCS), both with
//! beta = 1 F-measure.

use std::collections::HashMap;

use super::MetricTriple;
use crate::text::TokenSeq;

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// ROUGE-N for `n >= 1`.
///
/// # Panics
///
/// Panics if `n == 0`.
pub fn rouge_n(candidate: &TokenSeq, reference: &TokenSeq, n: usize) -> MetricTriple {
    assert!(n >= 1, "ROUGE-N needs n >= 1");
    let cand = ngram_counts(&candidate.tokens, n);
    let refs = ngram_counts(&reference.tokens, n);
    let cand_total = candidate.len().saturating_sub(n - 1);
    let ref_total = reference.len().saturating_sub(n - 1);
    let (small, large) = if cand.len() <= refs.len() {
        (&cand, &refs)
    } else {
        (&refs, &cand)
    };
    let overlap: usize = small
        .iter()
        .map(|(gram, &c)| c.min(large.get(gram).copied().unwrap_or(0)))
        .sum();
    MetricTriple::from_precision_recall(ratio(overlap, cand_total), ratio(overlap, ref_total))
}

/// Length of the longest common subsequence, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l(candidate: &TokenSeq, reference: &TokenSeq) -> MetricTriple {
    let l = lcs_len(&candidate.tokens, &reference.tokens);
    MetricTriple::from_precision_recall(ratio(l, candidate.len()), ratio(l, reference.len()))
}
