//! Lexical surface metrics: tokenization, BLEU and chrF.
//!
//! Both metrics operate on plain token or character sequences and
//! return scores on the conventional 0..100 scale; `normalize` maps a
//! 0..100 score onto the unit interval used by the reward.

mod bleu;
mod chrf;

pub use bleu::{corpus_bleu, sentence_bleu};
pub use chrf::chrf;

use thiserror::Error;

/// Errors produced by the lexical metrics.
#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("reference side is empty")]
    EmptyReference,
    #[error("metric needs at least one sentence pair")]
    EmptyCorpus,
    #[error("score {0} is outside the 0..100 metric range")]
    ScoreOutOfRange(f64),
}

/// How raw text is segmented before n-gram counting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum TokenizeMode {
    /// Split on whitespace runs; punctuation characters become
    /// standalone tokens.
    #[default]
    Whitespace,
    /// One token per non-whitespace character (for scripts without
    /// word boundaries).
    Char,
}

/// Segments `text` into surface tokens. Never yields empty tokens.
pub fn tokenize(text: &str, mode: TokenizeMode) -> Vec<String> {
    match mode {
        TokenizeMode::Char => text
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(String::from)
            .collect(),
        TokenizeMode::Whitespace => {
            let mut tokens = Vec::new();
            let mut word = String::new();
            for c in text.chars() {
                if c.is_whitespace() {
                    if !word.is_empty() {
                        tokens.push(std::mem::take(&mut word));
                    }
                } else if c.is_alphanumeric() {
                    word.push(c);
                } else {
                    // Punctuation and symbols separate from adjacent words.
                    if !word.is_empty() {
                        tokens.push(std::mem::take(&mut word));
                    }
                    tokens.push(String::from(c));
                }
            }
            if !word.is_empty() {
                tokens.push(word);
            }
            tokens
        }
    }
}

/// Maps a 0..100 metric score onto the unit interval.
pub fn normalize(score: f64) -> Result<f64, MetricsError> {
    if !score.is_finite() || !(0.0..=100.0).contains(&score) {
        return Err(MetricsError::ScoreOutOfRange(score));
    }
    Ok(score / 100.0)
}
