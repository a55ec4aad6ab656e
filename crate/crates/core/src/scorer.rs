//! Semantic adequacy scorers.
//!
//! A [`SemanticScorer`] judges how well a candidate translation
//! preserves the meaning of the source, returning a unit-interval
//! score without consulting a reference. Two implementations are
//! provided: an offline mock built on a synonym lexicon (concept
//! multiset F1 scaled by a local word-order factor), and a client for
//! a remote scoring service speaking a small JSON-over-HTTP protocol.

use std::collections::HashMap;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{tokenize, TokenizeMode};

/// One scoring request: source text, candidate translation, and an
/// optional reference (forwarded to remote services, unused by the
/// mock scorer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub src: String,
    pub trans: String,
    #[serde(rename = "ref")]
    pub reference: Option<String>,
}

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("source text maps to no known concepts")]
    NoSourceConcepts,
    #[error("scorer request timed out: {0}")]
    Timeout(String),
    #[error("scorer transport failed: {0}")]
    Transport(String),
    #[error("scorer returned HTTP status {0}")]
    Status(u16),
    #[error("scorer response malformed: {0}")]
    Malformed(String),
    #[error("scorer returned {0}, outside the unit interval")]
    ScoreOutOfRange(f64),
}

impl ScoreError {
    /// Transient transport-level failures may be retried; contract
    /// violations (bad score range, unmappable source) may not.
    pub fn is_retriable(&self) -> bool {
        matches!(
            self,
            ScoreError::Timeout(_)
                | ScoreError::Transport(_)
                | ScoreError::Status(_)
                | ScoreError::Malformed(_)
        )
    }
}

/// Reference-free semantic adequacy on the unit interval.
pub trait SemanticScorer: Send + Sync {
    fn score(&self, request: &ScoreRequest) -> Result<f64, ScoreError>;
}

#[derive(Debug, Error, PartialEq)]
pub enum LexiconError {
    #[error("lexicon must contain at least one concept")]
    Empty,
    #[error("concept {0} has no target synonyms")]
    NoSynonyms(usize),
    #[error("surface token {0:?} is claimed by two concepts")]
    DuplicateSurface(String),
}

/// Bilingual concept lexicon: every concept has exactly one source
/// surface token and one or more target synonyms (the first synonym
/// is the canonical rendering used in references).
#[derive(Debug, Clone)]
pub struct SynonymLexicon {
    source: Vec<String>,
    target: Vec<Vec<String>>,
    source_index: HashMap<String, usize>,
    target_index: HashMap<String, usize>,
}

impl SynonymLexicon {
    pub fn new(source: Vec<String>, target: Vec<Vec<String>>) -> Result<Self, LexiconError> {
        if source.is_empty() || source.len() != target.len() {
            return Err(LexiconError::Empty);
        }
        let mut source_index = HashMap::new();
        let mut target_index = HashMap::new();
        for (concept, token) in source.iter().enumerate() {
            if source_index.insert(token.clone(), concept).is_some() {
                return Err(LexiconError::DuplicateSurface(token.clone()));
            }
        }
        for (concept, synonyms) in target.iter().enumerate() {
            if synonyms.is_empty() {
                return Err(LexiconError::NoSynonyms(concept));
            }
            for token in synonyms {
                if target_index.insert(token.clone(), concept).is_some() {
                    return Err(LexiconError::DuplicateSurface(token.clone()));
                }
            }
        }
        Ok(Self {
            source,
            target,
            source_index,
            target_index,
        })
    }

    pub fn n_concepts(&self) -> usize {
        self.source.len()
    }

    pub fn source_token(&self, concept: usize) -> &str {
        &self.source[concept]
    }

    /// The canonical (first) target synonym for a concept.
    pub fn reference_token(&self, concept: usize) -> &str {
        &self.target[concept][0]
    }

    pub fn target_synonyms(&self, concept: usize) -> &[String] {
        &self.target[concept]
    }

    pub fn source_concept(&self, token: &str) -> Option<usize> {
        self.source_index.get(token).copied()
    }

    pub fn target_concept(&self, token: &str) -> Option<usize> {
        self.target_index.get(token).copied()
    }

    /// Every surface token of both languages, source side first.
    pub fn all_tokens(&self) -> Vec<String> {
        let mut tokens = self.source.clone();
        for synonyms in &self.target {
            tokens.extend(synonyms.iter().cloned());
        }
        tokens
    }
}

fn concept_multiset(concepts: &[usize]) -> HashMap<usize, u64> {
    let mut counts = HashMap::new();
    for &c in concepts {
        *counts.entry(c).or_insert(0) += 1;
    }
    counts
}

fn bigram_multiset(concepts: &[usize]) -> HashMap<(usize, usize), u64> {
    let mut counts = HashMap::new();
    for pair in concepts.windows(2) {
        *counts.entry((pair[0], pair[1])).or_insert(0) += 1;
    }
    counts
}

/// Concept-overlap score: F1 between the concept multisets of source
/// and translation, scaled by the fraction of adjacent source concept
/// pairs preserved in the translation (floored at 0.5). Tokens that
/// map to no concept are ignored. The score is synonym-invariant by
/// construction.
pub fn mock_synonym_score(
    lexicon: &SynonymLexicon,
    request: &ScoreRequest,
) -> Result<f64, ScoreError> {
    let src_concepts: Vec<usize> = tokenize(&request.src, TokenizeMode::Whitespace)
        .iter()
        .filter_map(|t| lexicon.source_concept(t))
        .collect();
    if src_concepts.is_empty() {
        return Err(ScoreError::NoSourceConcepts);
    }
    let trans_concepts: Vec<usize> = tokenize(&request.trans, TokenizeMode::Whitespace)
        .iter()
        .filter_map(|t| lexicon.target_concept(t))
        .collect();
    if trans_concepts.is_empty() {
        return Ok(0.0);
    }

    let src_counts = concept_multiset(&src_concepts);
    let trans_counts = concept_multiset(&trans_concepts);
    let overlap: u64 = src_counts
        .iter()
        .map(|(c, n)| (*n).min(trans_counts.get(c).copied().unwrap_or(0)))
        .sum();
    if overlap == 0 {
        return Ok(0.0);
    }
    let precision = overlap as f64 / trans_concepts.len() as f64;
    let recall = overlap as f64 / src_concepts.len() as f64;
    let f1 = 2.0 * precision * recall / (precision + recall);

    let src_bigrams = bigram_multiset(&src_concepts);
    let total_bigrams: u64 = src_bigrams.values().sum();
    let order_factor = if total_bigrams == 0 {
        1.0
    } else {
        let trans_bigrams = bigram_multiset(&trans_concepts);
        let preserved: u64 = src_bigrams
            .iter()
            .map(|(b, n)| (*n).min(trans_bigrams.get(b).copied().unwrap_or(0)))
            .sum();
        (preserved as f64 / total_bigrams as f64).max(0.5)
    };
    Ok(f1 * order_factor)
}

/// Offline scorer wrapping [`mock_synonym_score`].
#[derive(Debug, Clone)]
pub struct MockSynonymScorer {
    lexicon: SynonymLexicon,
}

impl MockSynonymScorer {
    pub fn new(lexicon: SynonymLexicon) -> Self {
        Self { lexicon }
    }

    pub fn lexicon(&self) -> &SynonymLexicon {
        &self.lexicon
    }
}

impl SemanticScorer for MockSynonymScorer {
    fn score(&self, request: &ScoreRequest) -> Result<f64, ScoreError> {
        mock_synonym_score(&self.lexicon, request)
    }
}

/// Counting semaphore bounding concurrent remote requests.
struct Permits {
    available: Mutex<usize>,
    signal: Condvar,
}

impl Permits {
    fn new(count: usize) -> Self {
        Self {
            available: Mutex::new(count.max(1)),
            signal: Condvar::new(),
        }
    }

    fn acquire(&self) -> PermitGuard<'_> {
        let mut available = self.available.lock().unwrap();
        while *available == 0 {
            available = self.signal.wait(available).unwrap();
        }
        *available -= 1;
        PermitGuard { permits: self }
    }
}

struct PermitGuard<'a> {
    permits: &'a Permits,
}

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.permits.available.lock().unwrap() += 1;
        self.permits.signal.notify_one();
    }
}

#[derive(Deserialize)]
struct ScoreResponse {
    score: f64,
}

/// Client for a remote scoring service.
///
/// Requests are `POST {endpoint}/score` with body
/// `{"src": ..., "trans": ..., "ref": ...}`; the service answers
/// `{"score": s}` with `s` in the unit interval. Scores outside the
/// interval are protocol errors, not clamped away. At most
/// `max_in_flight` requests are outstanding at a time.
pub struct RemoteScorer {
    url: String,
    client: reqwest::blocking::Client,
    permits: Permits,
}

impl RemoteScorer {
    pub fn new(
        endpoint: &str,
        timeout: Duration,
        max_in_flight: usize,
    ) -> Result<Self, ScoreError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ScoreError::Transport(e.to_string()))?;
        Ok(Self {
            url: format!("{}/score", endpoint.trim_end_matches('/')),
            client,
            permits: Permits::new(max_in_flight),
        })
    }
}

impl SemanticScorer for RemoteScorer {
    fn score(&self, request: &ScoreRequest) -> Result<f64, ScoreError> {
        let _permit = self.permits.acquire();
        let response = self
            .client
            .post(&self.url)
            .json(request)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    ScoreError::Timeout(e.to_string())
                } else {
                    ScoreError::Transport(e.to_string())
                }
            })?;
        let status = response.status();
        if !status.is_success() {
            return Err(ScoreError::Status(status.as_u16()));
        }
        let body: ScoreResponse = response
            .json()
            .map_err(|e| ScoreError::Malformed(e.to_string()))?;
        if !body.score.is_finite() || !(0.0..=1.0).contains(&body.score) {
            return Err(ScoreError::ScoreOutOfRange(body.score));
        }
        Ok(body.score)
    }
}
