//! BLEU over token sequences, following the sacreBLEU reference
//! behavior: clipped n-gram precisions for orders 1..=4, geometric
//! mean, and an exponential brevity penalty.
//!
//! The sentence-level variant applies exponential smoothing (each
//! zero-match order halves a running smoothing weight) and uses the
//! effective order, so short hypotheses are scored over the orders
//! they actually contain. The corpus-level variant pools raw counts
//! over all pairs first and applies no smoothing, which makes it
//! invariant to the order of the pairs.

use std::collections::HashMap;

use super::MetricsError;

const MAX_ORDER: usize = 4;

/// Clipped matches and totals for one hypothesis/reference pair at a
/// single n-gram order.
fn order_stats<S: AsRef<str>>(hyp: &[S], reference: &[S], n: usize) -> (u64, u64) {
    if hyp.len() < n {
        return (0, 0);
    }
    let total = (hyp.len() - n + 1) as u64;
    let mut ref_counts: HashMap<Vec<&str>, u64> = HashMap::new();
    if reference.len() >= n {
        for gram in reference.windows(n) {
            let key: Vec<&str> = gram.iter().map(|t| t.as_ref()).collect();
            *ref_counts.entry(key).or_insert(0) += 1;
        }
    }
    let mut hyp_counts: HashMap<Vec<&str>, u64> = HashMap::new();
    for gram in hyp.windows(n) {
        let key: Vec<&str> = gram.iter().map(|t| t.as_ref()).collect();
        *hyp_counts.entry(key).or_insert(0) += 1;
    }
    let matched = hyp_counts
        .iter()
        .map(|(gram, count)| (*count).min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    (matched, total)
}

fn brevity_penalty(hyp_len: u64, ref_len: u64) -> f64 {
    if hyp_len >= ref_len {
        1.0
    } else if hyp_len == 0 {
        0.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    }
}

/// Smoothed sentence BLEU on the 0..100 scale.
///
/// An empty hypothesis scores 0. The reference must be non-empty.
pub fn sentence_bleu<S: AsRef<str>>(hyp: &[S], reference: &[S]) -> Result<f64, MetricsError> {
    if reference.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    if hyp.is_empty() {
        return Ok(0.0);
    }
    let mut smooth_weight = 1.0_f64;
    let mut log_sum = 0.0_f64;
    let mut effective_order = 0usize;
    for n in 1..=MAX_ORDER {
        let (matched, total) = order_stats(hyp, reference, n);
        if total == 0 {
            break;
        }
        effective_order += 1;
        let precision = if matched == 0 {
            smooth_weight *= 2.0;
            1.0 / (smooth_weight * total as f64)
        } else {
            matched as f64 / total as f64
        };
        log_sum += precision.ln();
    }
    let bp = brevity_penalty(hyp.len() as u64, reference.len() as u64);
    Ok(100.0 * bp * (log_sum / effective_order as f64).exp())
}

/// Corpus BLEU on the 0..100 scale: counts are pooled over all pairs
/// before the precisions are formed, with no smoothing. Any order with
/// zero pooled matches yields 0.
pub fn corpus_bleu<S: AsRef<str>>(pairs: &[(Vec<S>, Vec<S>)]) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let mut matched = [0u64; MAX_ORDER];
    let mut total = [0u64; MAX_ORDER];
    let mut hyp_len = 0u64;
    let mut ref_len = 0u64;
    for (hyp, reference) in pairs {
        if reference.is_empty() {
            return Err(MetricsError::EmptyReference);
        }
        hyp_len += hyp.len() as u64;
        ref_len += reference.len() as u64;
        for n in 1..=MAX_ORDER {
            let (m, t) = order_stats(hyp.as_slice(), reference.as_slice(), n);
            matched[n - 1] += m;
            total[n - 1] += t;
        }
    }
    if hyp_len == 0 {
        return Ok(0.0);
    }
    let mut log_sum = 0.0_f64;
    for n in 0..MAX_ORDER {
        if matched[n] == 0 || total[n] == 0 {
            return Ok(0.0);
        }
        log_sum += (matched[n] as f64 / total[n] as f64).ln();
    }
    let bp = brevity_penalty(hyp_len, ref_len);
    Ok(100.0 * bp * (log_sum / MAX_ORDER as f64).exp())
}
