//! chrF: the character n-gram F-score.
//!
//! All whitespace is removed, character n-grams of orders 1..=6 are
//! counted on both sides, and a per-order F-score with beta = 2
//! (recall weighted double) is averaged over the orders where at
//! least one side has n-grams. Identical strings therefore score 100
//! regardless of length.

use std::collections::HashMap;

use super::MetricsError;

const CHAR_ORDER: usize = 6;
const BETA: f64 = 2.0;
const EPS: f64 = 1e-16;

fn counts(chars: &[char], n: usize) -> HashMap<&[char], u64> {
    let mut map: HashMap<&[char], u64> = HashMap::new();
    if chars.len() >= n {
        for gram in chars.windows(n) {
            *map.entry(gram).or_insert(0) += 1;
        }
    }
    map
}

/// chrF on the 0..100 scale. The reference must contain at least one
/// non-whitespace character.
pub fn chrf(hyp: &str, reference: &str) -> Result<f64, MetricsError> {
    let hyp: Vec<char> = hyp.chars().filter(|c| !c.is_whitespace()).collect();
    let reference: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    if reference.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    let beta2 = BETA * BETA;
    let mut score = 0.0;
    let mut effective_order = 0usize;
    for n in 1..=CHAR_ORDER {
        let hyp_counts = counts(&hyp, n);
        let ref_counts = counts(&reference, n);
        let n_hyp: u64 = hyp_counts.values().sum();
        let n_ref: u64 = ref_counts.values().sum();
        if n_hyp == 0 && n_ref == 0 {
            continue;
        }
        let n_match: u64 = hyp_counts
            .iter()
            .map(|(gram, count)| (*count).min(ref_counts.get(gram).copied().unwrap_or(0)))
            .sum();
        let precision = if n_hyp > 0 {
            n_match as f64 / n_hyp as f64
        } else {
            EPS
        };
        let recall = if n_ref > 0 {
            n_match as f64 / n_ref as f64
        } else {
            EPS
        };
        let denom = beta2 * precision + recall;
        if denom > 0.0 {
            score += (1.0 + beta2) * precision * recall / denom;
        }
        effective_order += 1;
    }
    Ok(100.0 * score / effective_order as f64)
}
