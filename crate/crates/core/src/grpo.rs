//! Group-relative policy optimization over the translation protocol.
//!
//! Each training step samples a group of responses per prompt from the
//! current policy, scores them with the mixed format/quality reward,
//! standardizes rewards within each group into advantages, and ascends
//! a clipped importance-ratio surrogate with an optional KL penalty
//! toward the frozen reference policy. One optimizer update is applied
//! per inner epoch; with a single epoch the sampled forward passes are
//! reused directly, so importance ratios are exactly one.

use serde::{Deserialize, Serialize};

use crate::optim::{adam_step, AdamHyper, AdamState};
use crate::policy::{
    rollout_rng, ForwardTrace, GradBuffer, GruPolicy, PolicyError, Vocabulary, BOS_ID,
};
use crate::protocol::{parse_response, PromptInstance, ThinkMode};
use crate::reward::{
    final_reward, LexicalScorer, MetricKind, RewardError, RewardMode, DEFAULT_FORMAT_PENALTY,
};
use crate::scorer::SemanticScorer;
use crate::tape::{NodeId, Tape};

/// How token-level surrogate terms pool into a group objective:
/// per-sequence means averaged across the group, or one flat mean over
/// every token the group produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TokenAgg {
    #[default]
    Sequence,
    Token,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("{field} must be at least {min}, got {got}")]
    TooSmall {
        field: &'static str,
        min: usize,
        got: usize,
    },
    #[error("{field} must be positive and finite, got {got}")]
    NotPositive { field: &'static str, got: f64 },
    #[error("{field} must be finite and non-negative, got {got}")]
    Negative { field: &'static str, got: f64 },
    #[error("clip_eps must lie in (0, 1), got {0}")]
    BadClip(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Rollouts sampled per prompt (the group).
    pub group_size: usize,
    /// Prompts per optimization step.
    pub batch_prompts: usize,
    pub lr: f64,
    pub clip_eps: f64,
    /// Weight of the KL penalty toward the reference policy.
    pub kl_beta: f64,
    pub temperature: f64,
    pub max_gen_len: usize,
    /// Inner optimization epochs per sampled batch.
    pub ppo_epochs: usize,
    pub seed: u64,
    pub token_agg: TokenAgg,
    pub metric: MetricKind,
    pub think_mode: ThinkMode,
    pub format_penalty: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            group_size: 8,
            batch_prompts: 8,
            lr: 5e-4,
            clip_eps: 0.2,
            kl_beta: 0.0,
            temperature: 1.0,
            max_gen_len: 64,
            ppo_epochs: 1,
            seed: 0,
            token_agg: TokenAgg::Sequence,
            metric: MetricKind::Lex,
            think_mode: ThinkMode::Required,
            format_penalty: DEFAULT_FORMAT_PENALTY,
        }
    }
}

impl TrainConfig {
    pub fn reward_mode(&self) -> RewardMode {
        RewardMode {
            metric: self.metric,
            thinking_required: self.think_mode == ThinkMode::Required,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.group_size < 2 {
            return Err(ConfigError::TooSmall {
                field: "group_size",
                min: 2,
                got: self.group_size,
            });
        }
        if self.batch_prompts < 1 {
            return Err(ConfigError::TooSmall {
                field: "batch_prompts",
                min: 1,
                got: self.batch_prompts,
            });
        }
        if self.max_gen_len < 1 {
            return Err(ConfigError::TooSmall {
                field: "max_gen_len",
                min: 1,
                got: self.max_gen_len,
            });
        }
        if self.ppo_epochs < 1 {
            return Err(ConfigError::TooSmall {
                field: "ppo_epochs",
                min: 1,
                got: self.ppo_epochs,
            });
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(ConfigError::NotPositive {
                field: "lr",
                got: self.lr,
            });
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(ConfigError::NotPositive {
                field: "temperature",
                got: self.temperature,
            });
        }
        if !(self.clip_eps.is_finite() && self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(ConfigError::BadClip(self.clip_eps));
        }
        if !(self.kl_beta.is_finite() && self.kl_beta >= 0.0) {
            return Err(ConfigError::Negative {
                field: "kl_beta",
                got: self.kl_beta,
            });
        }
        if !(self.format_penalty.is_finite() && self.format_penalty >= 0.0) {
            return Err(ConfigError::Negative {
                field: "format_penalty",
                got: self.format_penalty,
            });
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GrpoError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(
        "reference/policy log-probability gap {delta} exceeds 50; \
         KL estimate would overflow"
    )]
    KlOverflow { delta: f64 },
}

/// One sampled response with everything the loss and the logs need.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub prompt_tokens: Vec<usize>,
    pub output_tokens: Vec<usize>,
    /// Log-probabilities under the sampling policy (the old policy of
    /// the importance ratio).
    pub logprobs_old: Vec<f64>,
    /// Log-probabilities under the frozen reference policy.
    pub logprobs_ref: Vec<f64>,
    pub reward: f64,
    pub advantage: f64,
    pub format_ok: bool,
    pub s_metric: Option<f64>,
}

struct SampledGroup {
    trajectories: Vec<Trajectory>,
    traces: Vec<Option<ForwardTrace>>,
}

/// Per-step training log record. Serialized field order is the file
/// format; optional fields are omitted when absent so identical runs
/// produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: u64,
    pub mean_reward: f64,
    pub format_error_rate: f64,
    pub mean_response_len_tokens: f64,
    pub mean_kl: f64,
    pub loss: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_metric_lex: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_metric_sem: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eval_bleu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eval_chrf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eval_sem: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eval_format_error_rate: Option<f64>,
    /// Wall-clock time is reported on stderr, never in the log file,
    /// so reruns stay byte-identical.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_ms: Option<u64>,
}

/// Group-standardized advantages using the population standard
/// deviation. A group whose rewards are all equal carries no learning
/// signal and gets zero advantage everywhere.
pub fn compute_advantages(rewards: &[f64]) -> Vec<f64> {
    assert!(!rewards.is_empty(), "empty reward group");
    let lo = rewards.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return vec![0.0; rewards.len()];
    }
    let g = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / g;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / g;
    let std = var.sqrt();
    rewards.iter().map(|r| (r - mean) / std).collect()
}

/// Per-token KL estimate `exp(ref - cur) - (ref - cur) - 1`, which is
/// non-negative and zero exactly when the two log-probabilities agree.
pub fn kl_approx(logp_cur: f64, logp_ref: f64) -> Result<f64, GrpoError> {
    let delta = logp_ref - logp_cur;
    if delta > 50.0 {
        return Err(GrpoError::KlOverflow { delta });
    }
    Ok((delta.exp() - delta - 1.0).max(0.0))
}

/// Model-side prompt conditioning: a begin marker followed by the
/// source tokens.
pub fn encode_prompt(vocab: &Vocabulary, instance: &PromptInstance) -> Vec<usize> {
    let mut ids = vec![BOS_ID];
    ids.extend(vocab.encode_text(&instance.src_text));
    ids
}

const PURPOSE_EVAL: u64 = 2;

struct BuiltLoss {
    loss: NodeId,
    mean_kl: f64,
    max_ratio_dev: f64,
}

pub struct Trainer {
    pub policy: GruPolicy,
    /// Frozen copy of the initial policy, the target of the KL penalty.
    pub reference: GruPolicy,
    pub opt: AdamState,
    pub config: TrainConfig,
    pub global_step: u64,
    /// Largest `|ratio - 1|` observed while building the most recent
    /// first-epoch loss; diagnostic for the reuse invariant.
    pub last_ratio_dev: f64,
}

impl Trainer {
    pub fn new(policy: GruPolicy, config: TrainConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let (d, v) = (policy.params.d, policy.params.v);
        let reference = policy.clone();
        Ok(Self {
            policy,
            reference,
            opt: AdamState::zeros(d, v),
            config,
            global_step: 0,
            last_ratio_dev: 0.0,
        })
    }

    /// Rebuilds a trainer mid-run: current parameters and optimizer
    /// state from a checkpoint, the reference policy reconstructed by
    /// the caller (it is a pure function of the initialization seed).
    pub fn resume(
        policy: GruPolicy,
        reference: GruPolicy,
        opt: AdamState,
        global_step: u64,
        config: TrainConfig,
    ) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Self {
            policy,
            reference,
            opt,
            config,
            global_step,
            last_ratio_dev: 0.0,
        })
    }

    /// Samples one rollout, retrying exactly once on a transient
    /// scorer failure; a second failure (or any non-retriable error)
    /// aborts the step.
    #[allow(clippy::too_many_arguments)]
    fn sample_rollout(
        &self,
        step: u64,
        prompt_idx: u64,
        rollout_idx: u64,
        instance: &PromptInstance,
        prompt_tokens: &[usize],
        lex: &dyn LexicalScorer,
        sem: &dyn SemanticScorer,
    ) -> Result<(Trajectory, ForwardTrace), GrpoError> {
        let cfg = &self.config;
        let mut attempt: u64 = 0;
        loop {
            let mut rng = rollout_rng(cfg.seed, step, prompt_idx, rollout_idx, attempt);
            let sampled = self.policy.sample_response(
                prompt_tokens,
                cfg.max_gen_len,
                cfg.temperature,
                &mut rng,
            )?;
            let text = self.policy.vocab.decode(&sampled.tokens);
            let parsed = parse_response(&text, cfg.think_mode);
            match final_reward(
                &parsed,
                instance,
                cfg.reward_mode(),
                lex,
                sem,
                cfg.format_penalty,
            ) {
                Ok(breakdown) => {
                    let logprobs_ref = self.reference.sequence_logprobs(
                        prompt_tokens,
                        &sampled.tokens,
                        cfg.temperature,
                    )?;
                    let trajectory = Trajectory {
                        prompt_tokens: prompt_tokens.to_vec(),
                        output_tokens: sampled.tokens,
                        logprobs_old: sampled.logprobs,
                        logprobs_ref,
                        reward: breakdown.r,
                        advantage: 0.0,
                        format_ok: breakdown.s_format > 0,
                        s_metric: breakdown.s_metric,
                    };
                    return Ok((trajectory, sampled.trace));
                }
                Err(RewardError::Scorer(e)) if e.is_retriable() && attempt == 0 => {
                    attempt = 1;
                }
                Err(e) => return Err(e.into()),
            }
        }
    }

    fn sample_group(
        &self,
        step: u64,
        prompt_idx: u64,
        instance: &PromptInstance,
        lex: &dyn LexicalScorer,
        sem: &dyn SemanticScorer,
    ) -> Result<SampledGroup, GrpoError> {
        let prompt_tokens = encode_prompt(&self.policy.vocab, instance);
        let g = self.config.group_size;
        let mut trajectories = Vec::with_capacity(g);
        let mut traces = Vec::with_capacity(g);
        for rollout_idx in 0..g {
            let (trajectory, trace) = self.sample_rollout(
                step,
                prompt_idx,
                rollout_idx as u64,
                instance,
                &prompt_tokens,
                lex,
                sem,
            )?;
            trajectories.push(trajectory);
            traces.push(Some(trace));
        }
        let rewards: Vec<f64> = trajectories.iter().map(|t| t.reward).collect();
        for (t, a) in trajectories.iter_mut().zip(compute_advantages(&rewards)) {
            t.advantage = a;
        }
        Ok(SampledGroup {
            trajectories,
            traces,
        })
    }

    /// Builds the batch loss on the tape. The first epoch consumes the
    /// forward passes recorded at sampling time (parameters have not
    /// moved yet); later epochs re-run the policy on the fixed token
    /// sequences.
    fn build_loss(
        &self,
        tape: &mut Tape,
        groups: &mut [SampledGroup],
        epoch: usize,
    ) -> Result<BuiltLoss, GrpoError> {
        build_surrogate(tape, &self.policy, &self.config, groups, epoch)
    }
}

/// Evaluates the clipped-surrogate batch loss for a fixed set of
/// scored trajectories under `policy`'s current parameters. The stored
/// `logprobs_old` and `logprobs_ref` stay fixed, so this is the loss
/// as a pure function of the parameters.
pub fn surrogate_loss_value(
    policy: &GruPolicy,
    config: &TrainConfig,
    groups: &[Vec<Trajectory>],
) -> Result<f64, GrpoError> {
    let mut tape = Tape::new();
    let mut wrapped = wrap_groups(groups);
    let built = build_surrogate(&mut tape, policy, config, &mut wrapped, 1)?;
    Ok(tape.value(built.loss))
}

/// Like [`surrogate_loss_value`] but also backpropagates, returning
/// the analytic parameter gradient of the loss.
pub fn surrogate_loss_grad(
    policy: &GruPolicy,
    config: &TrainConfig,
    groups: &[Vec<Trajectory>],
) -> Result<(f64, GradBuffer), GrpoError> {
    let mut tape = Tape::new();
    let mut wrapped = wrap_groups(groups);
    let built = build_surrogate(&mut tape, policy, config, &mut wrapped, 1)?;
    let value = tape.value(built.loss);
    let mut grads = GradBuffer::zeros(policy.params.d, policy.params.v);
    tape.backward(built.loss, policy, &mut grads)?;
    Ok((value, grads))
}

fn wrap_groups(groups: &[Vec<Trajectory>]) -> Vec<SampledGroup> {
    groups
        .iter()
        .map(|trajectories| {
            let traces = vec![None; trajectories.len()];
            SampledGroup {
                trajectories: trajectories.clone(),
                traces,
            }
        })
        .collect()
}

fn build_surrogate(
    tape: &mut Tape,
    policy: &GruPolicy,
    config: &TrainConfig,
    groups: &mut [SampledGroup],
    epoch: usize,
) -> Result<BuiltLoss, GrpoError> {
    let cfg = config;
        let (lo, hi) = (1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        let zero = tape.constant(0.0);
        let one = tape.constant(1.0);
        let beta = tape.constant(cfg.kl_beta);

        let mut group_objectives = Vec::with_capacity(groups.len());
        let mut kl_sum = 0.0;
        let mut max_ratio_dev = 0.0_f64;

        for group in groups.iter_mut() {
            let mut seq_terms = Vec::with_capacity(group.trajectories.len());
            let mut token_terms = Vec::new();
            let mut kl_terms = Vec::new();

            for (i, traj) in group.trajectories.iter().enumerate() {
                let trace = if epoch == 0 {
                    group.traces[i]
                        .take()
                        .expect("sampling trace already consumed")
                } else {
                    policy.teacher_trace(
                        &traj.prompt_tokens,
                        &traj.output_tokens,
                        cfg.temperature,
                    )?
                };
                let pass = tape.register_trace(trace);
                let advantage = tape.constant(traj.advantage);
                let mut surr_tokens = Vec::with_capacity(traj.output_tokens.len());
                for t in 0..traj.output_tokens.len() {
                    let lp = tape.seq_logprob(pass, t);
                    let lp_old = tape.constant(traj.logprobs_old[t]);
                    let diff = tape.sub(lp, lp_old);
                    let ratio = tape.exp(diff);
                    max_ratio_dev = max_ratio_dev.max((tape.value(ratio) - 1.0).abs());
                    let unclipped = tape.mul(ratio, advantage);
                    let clipped_ratio = tape.clip(ratio, lo, hi);
                    let clipped = tape.mul(clipped_ratio, advantage);
                    let surr = tape.min(unclipped, clipped);
                    surr_tokens.push(surr);

                    let delta_value = traj.logprobs_ref[t] - tape.value(lp);
                    if delta_value > 50.0 {
                        return Err(GrpoError::KlOverflow { delta: delta_value });
                    }
                    let lp_ref = tape.constant(traj.logprobs_ref[t]);
                    let delta = tape.sub(lp_ref, lp);
                    let ekl = tape.exp(delta);
                    let lin = tape.add(delta, one);
                    let raw = tape.sub(ekl, lin);
                    let kl = tape.max(raw, zero);
                    kl_terms.push(kl);
                }
                match cfg.token_agg {
                    TokenAgg::Sequence => {
                        let m = tape.mean(&surr_tokens);
                        seq_terms.push(m);
                    }
                    TokenAgg::Token => token_terms.extend(surr_tokens),
                }
            }

            let objective = match cfg.token_agg {
                TokenAgg::Sequence => tape.mean(&seq_terms),
                TokenAgg::Token => tape.mean(&token_terms),
            };
            let group_kl = tape.mean(&kl_terms);
            kl_sum += tape.value(group_kl);
            let penalty = tape.mul(beta, group_kl);
            group_objectives.push(tape.sub(objective, penalty));
        }

        let batch_objective = tape.mean(&group_objectives);
        let loss = tape.neg(batch_objective);
        Ok(BuiltLoss {
            loss,
            mean_kl: kl_sum / groups.len() as f64,
            max_ratio_dev,
        })
    }

impl Trainer {
    /// One full optimization step over a batch of prompts.
    pub fn train_step(
        &mut self,
        batch: &[PromptInstance],
        lex: &dyn LexicalScorer,
        sem: &dyn SemanticScorer,
    ) -> Result<StepMetrics, GrpoError> {
        assert!(!batch.is_empty(), "empty prompt batch");
        let step = self.global_step;

        let mut groups = Vec::with_capacity(batch.len());
        for (p_idx, instance) in batch.iter().enumerate() {
            groups.push(self.sample_group(step, p_idx as u64, instance, lex, sem)?);
        }

        let mut loss_value = 0.0;
        let mut mean_kl = 0.0;
        for epoch in 0..self.config.ppo_epochs {
            let mut tape = Tape::new();
            let built = self.build_loss(&mut tape, &mut groups, epoch)?;
            if epoch == 0 {
                loss_value = tape.value(built.loss);
                mean_kl = built.mean_kl;
                self.last_ratio_dev = built.max_ratio_dev;
            }
            let mut grads = GradBuffer::zeros(self.policy.params.d, self.policy.params.v);
            tape.backward(built.loss, &self.policy, &mut grads)?;
            adam_step(
                &mut self.policy.params,
                &grads,
                &mut self.opt,
                &AdamHyper::with_lr(self.config.lr),
            );
        }
        self.global_step += 1;

        let all: Vec<&Trajectory> = groups.iter().flat_map(|g| g.trajectories.iter()).collect();
        let n = all.len() as f64;
        let mean_reward = all.iter().map(|t| t.reward).sum::<f64>() / n;
        let format_error_rate =
            all.iter().filter(|t| !t.format_ok).count() as f64 / n;
        let mean_response_len_tokens =
            all.iter().map(|t| t.output_tokens.len() as f64).sum::<f64>() / n;
        let metric_values: Vec<f64> = all.iter().filter_map(|t| t.s_metric).collect();
        let mean_metric = if metric_values.is_empty() {
            None
        } else {
            Some(metric_values.iter().sum::<f64>() / metric_values.len() as f64)
        };
        let (mean_metric_lex, mean_metric_sem) = match self.config.metric {
            MetricKind::Lex => (mean_metric, None),
            MetricKind::Sem => (None, mean_metric),
            MetricKind::Mix => (None, None),
        };

        Ok(StepMetrics {
            step,
            mean_reward,
            format_error_rate,
            mean_response_len_tokens,
            mean_kl,
            loss: loss_value,
            mean_metric_lex,
            mean_metric_sem,
            eval_bleu: None,
            eval_chrf: None,
            eval_sem: None,
            eval_format_error_rate: None,
            wall_ms: None,
        })
    }
}

/// Held-out evaluation summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub n: usize,
    pub corpus_bleu: f64,
    pub mean_chrf: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_sem: Option<f64>,
    pub format_error_rate: f64,
}

/// Decoding settings for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub temperature: f64,
    pub seed: u64,
    pub greedy: bool,
    pub max_gen_len: usize,
    pub think_mode: ThinkMode,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            temperature: 0.2,
            seed: 0,
            greedy: false,
            max_gen_len: 64,
            think_mode: ThinkMode::Required,
        }
    }
}

/// Decodes every instance once and reports corpus-level translation
/// quality. A response that fails the protocol counts as an empty
/// translation: it drags corpus statistics down instead of being
/// silently dropped.
pub fn evaluate(
    policy: &GruPolicy,
    instances: &[PromptInstance],
    options: &EvalOptions,
    sem: Option<&dyn SemanticScorer>,
) -> Result<EvalReport, GrpoError> {
    use crate::metrics::{chrf, corpus_bleu, tokenize, TokenizeMode};
    use crate::scorer::ScoreRequest;

    assert!(!instances.is_empty(), "empty evaluation set");
    let mut pairs: Vec<(Vec<String>, Vec<String>)> = Vec::with_capacity(instances.len());
    let mut chrf_sum = 0.0;
    let mut sem_sum = 0.0;
    let mut invalid = 0usize;

    for (i, instance) in instances.iter().enumerate() {
        let reference = instance
            .ref_text
            .as_deref()
            .ok_or(RewardError::MissingReference(MetricKind::Lex))?;
        let prompt_tokens = encode_prompt(&policy.vocab, instance);
        let out = if options.greedy {
            policy.greedy_response(&prompt_tokens, options.max_gen_len, options.temperature)?
        } else {
            let mut rng = rollout_rng(options.seed, 0, i as u64, 0, PURPOSE_EVAL);
            policy.sample_response(
                &prompt_tokens,
                options.max_gen_len,
                options.temperature,
                &mut rng,
            )?
        };
        let text = policy.vocab.decode(&out.tokens);
        let parsed = parse_response(&text, options.think_mode);
        if !parsed.format_ok {
            invalid += 1;
        }
        let hyp = tokenize(&parsed.translate_text, TokenizeMode::Whitespace);
        let refr = tokenize(reference, TokenizeMode::Whitespace);
        chrf_sum += chrf(&parsed.translate_text, reference)
            .map_err(RewardError::Metrics)?;
        if let Some(scorer) = sem {
            if parsed.format_ok {
                let request = ScoreRequest {
                    src: instance.src_text.clone(),
                    trans: parsed.translate_text.clone(),
                    reference: Some(reference.to_string()),
                };
                sem_sum += scorer.score(&request).map_err(RewardError::Scorer)?;
            }
        }
        pairs.push((hyp, refr));
    }

    let n = instances.len();
    Ok(EvalReport {
        n,
        corpus_bleu: corpus_bleu(&pairs).map_err(RewardError::Metrics)?,
        mean_chrf: chrf_sum / n as f64,
        mean_sem: sem.map(|_| sem_sum / n as f64),
        format_error_rate: invalid as f64 / n as f64,
    })
}
