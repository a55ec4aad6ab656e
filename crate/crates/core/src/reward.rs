//! The mixed format/quality reward.
//!
//! A response first passes the format gate: an invalid response earns
//! `-1 - penalty` (default -3) and no metric is ever computed for it.
//! A valid response earns `1 + S_metric`, where the metric half is a
//! normalized sentence BLEU against the reference (Lex), a semantic
//! adequacy score against the source (Sem), or their sum (Mix). The
//! gap between the worst valid reward (1) and the invalid reward
//! keeps format learning dominant early in training.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{normalize, sentence_bleu, tokenize, MetricsError, TokenizeMode};
use crate::protocol::{ParsedResponse, PromptInstance};
use crate::scorer::{ScoreError, ScoreRequest, SemanticScorer};

/// Default penalty subtracted from the format score on top of the -1,
/// so an invalid response scores -3.
pub const DEFAULT_FORMAT_PENALTY: f64 = 2.0;

/// Which quality metric feeds the reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Lex,
    Sem,
    Mix,
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricKind::Lex => write!(f, "lex"),
            MetricKind::Sem => write!(f, "sem"),
            MetricKind::Mix => write!(f, "mix"),
        }
    }
}

/// Reward configuration: the metric choice plus whether the think
/// block is required by the response grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardMode {
    pub metric: MetricKind,
    pub thinking_required: bool,
}

/// Fully itemized reward for one response.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardBreakdown {
    pub s_format: i32,
    pub s_metric: Option<f64>,
    pub r: f64,
    pub mode: RewardMode,
}

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("metric {0} needs a reference translation but the instance has none")]
    MissingReference(MetricKind),
    #[error("metric_score called on a response that failed the format gate")]
    FormatGateViolation,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Scorer(#[from] ScoreError),
}

/// Lexical quality on the unit interval. Abstracted so tests can pin
/// exact metric values and count invocations.
pub trait LexicalScorer: Send + Sync {
    fn score(&self, translation: &str, reference: &str) -> Result<f64, RewardError>;
}

/// Sentence BLEU (smoothed) of the translation against the reference,
/// normalized to the unit interval.
#[derive(Debug, Clone, Copy, Default)]
pub struct BleuLexical {
    pub tokenize_mode: TokenizeMode,
}

impl LexicalScorer for BleuLexical {
    fn score(&self, translation: &str, reference: &str) -> Result<f64, RewardError> {
        let hyp = tokenize(translation, self.tokenize_mode);
        let reference = tokenize(reference, self.tokenize_mode);
        Ok(normalize(sentence_bleu(&hyp, &reference)?)?)
    }
}

fn reference_text(
    instance: &PromptInstance,
    metric: MetricKind,
) -> Result<&str, RewardError> {
    instance
        .ref_text
        .as_deref()
        .ok_or(RewardError::MissingReference(metric))
}

/// The quality half of the reward for a format-valid response.
/// Lex and Sem lie in [0, 1], Mix in [0, 2].
pub fn metric_score(
    parsed: &ParsedResponse,
    instance: &PromptInstance,
    mode: RewardMode,
    lex: &dyn LexicalScorer,
    sem: &dyn SemanticScorer,
) -> Result<f64, RewardError> {
    if !parsed.format_ok {
        return Err(RewardError::FormatGateViolation);
    }
    let lex_part = |metric| -> Result<f64, RewardError> {
        lex.score(&parsed.translate_text, reference_text(instance, metric)?)
    };
    let sem_part = || -> Result<f64, RewardError> {
        let request = ScoreRequest {
            src: instance.src_text.clone(),
            trans: parsed.translate_text.clone(),
            reference: instance.ref_text.clone(),
        };
        Ok(sem.score(&request)?)
    };
    match mode.metric {
        MetricKind::Lex => lex_part(MetricKind::Lex),
        MetricKind::Sem => sem_part(),
        MetricKind::Mix => Ok(lex_part(MetricKind::Mix)? + sem_part()?),
    }
}

/// The final scalar reward with its breakdown. Invalid format short-
/// circuits to `-1 - penalty` without invoking any metric.
pub fn final_reward(
    parsed: &ParsedResponse,
    instance: &PromptInstance,
    mode: RewardMode,
    lex: &dyn LexicalScorer,
    sem: &dyn SemanticScorer,
    penalty: f64,
) -> Result<RewardBreakdown, RewardError> {
    if !parsed.format_ok {
        return Ok(RewardBreakdown {
            s_format: -1,
            s_metric: None,
            r: -1.0 - penalty,
            mode,
        });
    }
    let s = metric_score(parsed, instance, mode, lex, sem)?;
    Ok(RewardBreakdown {
        s_format: 1,
        s_metric: Some(s),
        r: 1.0 + s,
        mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{parse_response, ThinkMode};
    use crate::scorer::{MockSynonymScorer, SynonymLexicon};
    use std::sync::atomic::{AtomicUsize, Ordering};

    pub(crate) struct CountingLex {
        pub value: f64,
        pub calls: AtomicUsize,
    }

    impl CountingLex {
        pub fn new(value: f64) -> Self {
            Self {
                value,
                calls: AtomicUsize::new(0),
            }
        }
    }

    impl LexicalScorer for CountingLex {
        fn score(&self, _t: &str, _r: &str) -> Result<f64, RewardError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(self.value)
        }
    }

    pub(crate) struct CountingSem {
        pub value: f64,
        pub calls: AtomicUsize,
    }

    impl CountingSem {
        pub fn new(value: f64) -> Self {
            Self {
                value,
                calls: AtomicUsize::new(0),
            }
        }
    }

    impl SemanticScorer for CountingSem {
        fn score(&self, _req: &ScoreRequest) -> Result<f64, ScoreError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(self.value)
        }
    }

    fn instance() -> PromptInstance {
        PromptInstance::new("A", "B", "s0 s1 s2 s3", Some("t0 t1 t2 t3".into())).unwrap()
    }

    fn valid(translate: &str) -> ParsedResponse {
        parse_response(
            &format!("<think>x</think><translate>{translate}</translate>"),
            ThinkMode::Required,
        )
    }

    fn invalid() -> ParsedResponse {
        parse_response("broken", ThinkMode::Required)
    }

    fn mode(metric: MetricKind) -> RewardMode {
        RewardMode {
            metric,
            thinking_required: true,
        }
    }

    #[test]
    fn invalid_format_scores_minus_three_without_metric_calls() {
        for metric in [MetricKind::Lex, MetricKind::Sem, MetricKind::Mix] {
            let lex = CountingLex::new(1.0);
            let sem = CountingSem::new(1.0);
            let b = final_reward(&invalid(), &instance(), mode(metric), &lex, &sem, 2.0).unwrap();
            assert_eq!(b.s_format, -1);
            assert_eq!(b.s_metric, None);
            assert_eq!(b.r, -3.0);
            assert_eq!(lex.calls.load(Ordering::SeqCst), 0);
            assert_eq!(sem.calls.load(Ordering::SeqCst), 0);
        }
    }

    #[test]
    fn valid_format_rewards_one_plus_metric_across_the_grid() {
        for metric in [MetricKind::Lex, MetricKind::Sem, MetricKind::Mix] {
            for value in [0.0, 0.5, 1.0] {
                let lex = CountingLex::new(value);
                let sem = CountingSem::new(value);
                let b =
                    final_reward(&valid("t0"), &instance(), mode(metric), &lex, &sem, 2.0)
                        .unwrap();
                let expected = match metric {
                    MetricKind::Lex | MetricKind::Sem => 1.0 + value,
                    MetricKind::Mix => 1.0 + 2.0 * value,
                };
                assert_eq!(b.s_format, 1);
                assert_eq!(b.r, expected, "{metric:?} at {value}");
                let (lex_calls, sem_calls) = match metric {
                    MetricKind::Lex => (1, 0),
                    MetricKind::Sem => (0, 1),
                    MetricKind::Mix => (1, 1),
                };
                assert_eq!(lex.calls.load(Ordering::SeqCst), lex_calls);
                assert_eq!(sem.calls.load(Ordering::SeqCst), sem_calls);
            }
        }
    }

    #[test]
    fn reward_ranges_hold_at_default_penalty() {
        for metric in [MetricKind::Lex, MetricKind::Sem, MetricKind::Mix] {
            for value in [0.0, 0.25, 0.75, 1.0] {
                let lex = CountingLex::new(value);
                let sem = CountingSem::new(value);
                let b =
                    final_reward(&valid("t0"), &instance(), mode(metric), &lex, &sem, 2.0)
                        .unwrap();
                let hi = if metric == MetricKind::Mix { 3.0 } else { 2.0 };
                assert!((1.0..=hi).contains(&b.r));
            }
        }
    }

    #[test]
    fn exact_match_under_lex_scores_two() {
        let lex = BleuLexical::default();
        let sem = CountingSem::new(0.0);
        let b = final_reward(
            &valid("t0 t1 t2 t3"),
            &instance(),
            mode(MetricKind::Lex),
            &lex,
            &sem,
            2.0,
        )
        .unwrap();
        assert!((b.r - 2.0).abs() < 1e-12);
        assert_eq!(b.s_metric, Some(1.0));
    }

    #[test]
    fn perfect_mix_scores_three_with_real_scorers() {
        let source = (0..5).map(|i| format!("s{i}")).collect();
        let target = (0..5).map(|i| vec![format!("t{i}")]).collect();
        let lexicon = SynonymLexicon::new(source, target).unwrap();
        let sem = MockSynonymScorer::new(lexicon);
        let lex = BleuLexical::default();
        let b = final_reward(
            &valid("t0 t1 t2 t3"),
            &instance(),
            mode(MetricKind::Mix),
            &lex,
            &sem,
            2.0,
        )
        .unwrap();
        assert!((b.r - 3.0).abs() < 1e-12);
    }

    #[test]
    fn missing_reference_fails_lex_and_mix_only() {
        let no_ref = PromptInstance::new("A", "B", "s0 s1", None).unwrap();
        let lex = CountingLex::new(1.0);
        let sem = CountingSem::new(0.5);
        assert!(matches!(
            final_reward(&valid("t0"), &no_ref, mode(MetricKind::Lex), &lex, &sem, 2.0),
            Err(RewardError::MissingReference(MetricKind::Lex))
        ));
        assert!(matches!(
            final_reward(&valid("t0"), &no_ref, mode(MetricKind::Mix), &lex, &sem, 2.0),
            Err(RewardError::MissingReference(MetricKind::Mix))
        ));
        let b = final_reward(&valid("t0"), &no_ref, mode(MetricKind::Sem), &lex, &sem, 2.0)
            .unwrap();
        assert_eq!(b.r, 1.5);
    }

    #[test]
    fn metric_score_refuses_invalid_responses() {
        let lex = CountingLex::new(1.0);
        let sem = CountingSem::new(1.0);
        assert!(matches!(
            metric_score(&invalid(), &instance(), mode(MetricKind::Lex), &lex, &sem),
            Err(RewardError::FormatGateViolation)
        ));
    }

    #[test]
    fn configurable_penalty_moves_the_invalid_reward() {
        let lex = CountingLex::new(0.0);
        let sem = CountingSem::new(0.0);
        let b = final_reward(&invalid(), &instance(), mode(MetricKind::Lex), &lex, &sem, 5.0)
            .unwrap();
        assert_eq!(b.r, -6.0);
    }
}
