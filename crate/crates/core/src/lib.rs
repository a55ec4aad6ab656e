//! Desk-scale reinforcement learning for tiny autoregressive translation
//! policies.
//!
//! The crate wires together a strict tag-structured prompt/response
//! protocol, rule-based lexical metrics (sentence/corpus BLEU, chrF),
//! pluggable semantic scorers, a mixed format+quality reward, a small
//! gated-recurrent policy with reverse-mode gradients, and a GRPO
//! trainer with group-standardized advantages and an optional KL
//! penalty against the frozen initial policy.

pub mod corpus;
pub mod grpo;
pub mod metrics;
pub mod optim;
pub mod policy;
pub mod protocol;
pub mod reward;
pub mod scorer;
pub mod tape;

pub use corpus::{
    generate_corpus, load_parallel_file, pseudo_word, vocabulary_from_instances, Corpus,
    CorpusError, EpochSampler, FileFormat, LanguageSpec, LoadReport, ReorderRule,
};
pub use grpo::{
    compute_advantages, evaluate, kl_approx, surrogate_loss_grad, surrogate_loss_value,
    EvalOptions, EvalReport, GrpoError, StepMetrics, TokenAgg, TrainConfig, Trainer, Trajectory,
};
pub use metrics::{chrf, corpus_bleu, normalize, sentence_bleu, tokenize, TokenizeMode};
pub use optim::{adam_step, AdamHyper, AdamState};
pub use policy::{
    ForwardTrace, GradBuffer, GruPolicy, ParamBlock, PolicyError, PolicyParams, SampleOutcome,
    Vocabulary,
};
pub use protocol::{
    format_score, parse_response, render_prompt, ParsedResponse, PromptInstance, ThinkMode,
};
pub use reward::{final_reward, metric_score, MetricKind, RewardBreakdown, RewardMode};
pub use scorer::{
    mock_synonym_score, MockSynonymScorer, RemoteScorer, ScoreRequest, SemanticScorer,
    SynonymLexicon,
};
pub use tape::{NodeId, PassId, Tape};
