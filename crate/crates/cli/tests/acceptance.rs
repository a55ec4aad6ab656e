//! End-to-end acceptance gate. Each test prints one `criterion N
//! (label): PASS|FAIL` line; run with `-- --nocapture` to see them.
//!
//! The training-based criteria (5, 8, 9) share cached run artifacts so
//! the full suite stays inside a desk-scale time budget.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;
use std::time::Instant;

use mtrl_cli::{run_train, ExperimentConfig, TrainOutcome};
use mtrl_core::corpus::{generate_corpus, LanguageSpec, ReorderRule};
use mtrl_core::grpo::{self, TokenAgg, TrainConfig, Trainer, Trajectory};
use mtrl_core::policy::{GradBuffer, GruPolicy, ParamBlock, PolicyParams, Vocabulary};
use mtrl_core::protocol::{parse_response, PromptInstance, ThinkMode};
use mtrl_core::reward::{
    final_reward, LexicalScorer, MetricKind, RewardError, RewardMode, DEFAULT_FORMAT_PENALTY,
};
use mtrl_core::scorer::{ScoreError, ScoreRequest, SemanticScorer};
use mtrl_core::tape::Tape;
use mtrl_core::{compute_advantages, kl_approx};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

fn report(criterion: u32, label: &str, ok: bool, detail: &str) {
    println!(
        "criterion {criterion} ({label}): {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion} ({label}) failed: {detail}");
}

// ---------------------------------------------------------------
// Criterion 1: reward formula, exhaustive over format x metric x
// boundary values, with scorer-invocation counting.
// ---------------------------------------------------------------

struct FixedLex {
    value: f64,
    calls: AtomicUsize,
}

impl LexicalScorer for FixedLex {
    fn score(&self, _t: &str, _r: &str) -> Result<f64, RewardError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(self.value)
    }
}

struct FixedSem {
    value: f64,
    calls: AtomicUsize,
}

impl SemanticScorer for FixedSem {
    fn score(&self, _req: &ScoreRequest) -> Result<f64, ScoreError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(self.value)
    }
}

#[test]
fn criterion_1_reward_formula() {
    let start = Instant::now();
    let instance = PromptInstance::new("Kovari", "Selmic", "bala bema", Some("nopa ruti".into()))
        .unwrap();
    let valid = parse_response(
        "<think>plan</think><translate> nopa ruti </translate>",
        ThinkMode::Required,
    );
    let invalid = parse_response("nopa ruti", ThinkMode::Required);
    assert!(valid.format_ok && !invalid.format_ok);

    let mut ok = true;
    let mut detail = String::new();
    for metric in [MetricKind::Lex, MetricKind::Sem, MetricKind::Mix] {
        let mode = RewardMode {
            metric,
            thinking_required: true,
        };
        for boundary in [0.0, 0.5, 1.0] {
            let lex = FixedLex {
                value: boundary,
                calls: AtomicUsize::new(0),
            };
            let sem = FixedSem {
                value: boundary,
                calls: AtomicUsize::new(0),
            };

            let bad = final_reward(&invalid, &instance, mode, &lex, &sem, DEFAULT_FORMAT_PENALTY)
                .unwrap();
            if bad.r != -3.0 || bad.s_format != -1 || bad.s_metric.is_some() {
                ok = false;
                detail = format!("bad-format reward {:?} for {metric}", bad.r);
            }
            if lex.calls.load(Ordering::SeqCst) != 0 || sem.calls.load(Ordering::SeqCst) != 0 {
                ok = false;
                detail = format!("scorer invoked on bad format for {metric}");
            }

            let good = final_reward(&valid, &instance, mode, &lex, &sem, DEFAULT_FORMAT_PENALTY)
                .unwrap();
            let expected_metric = match metric {
                MetricKind::Lex | MetricKind::Sem => boundary,
                MetricKind::Mix => 2.0 * boundary,
            };
            if good.r != 1.0 + expected_metric || good.s_format != 1 {
                ok = false;
                detail = format!(
                    "valid reward {} != {} for {metric} at boundary {boundary}",
                    good.r,
                    1.0 + expected_metric
                );
            }
            let hi = match metric {
                MetricKind::Mix => 3.0,
                _ => 2.0,
            };
            if !(good.r >= 1.0 && good.r <= hi) {
                ok = false;
                detail = format!("valid reward {} outside [1,{hi}] for {metric}", good.r);
            }
            let expected_lex_calls = match metric {
                MetricKind::Lex | MetricKind::Mix => 1,
                MetricKind::Sem => 0,
            };
            let expected_sem_calls = match metric {
                MetricKind::Sem | MetricKind::Mix => 1,
                MetricKind::Lex => 0,
            };
            if lex.calls.load(Ordering::SeqCst) != expected_lex_calls
                || sem.calls.load(Ordering::SeqCst) != expected_sem_calls
            {
                ok = false;
                detail = format!("unexpected scorer call counts for {metric}");
            }
        }
    }
    let elapsed = start.elapsed();
    if elapsed.as_secs_f64() >= 1.0 {
        ok = false;
        detail = format!("took {elapsed:?}, budget 1 s");
    }
    if ok {
        detail = format!("18 cells exact, no gated scorer calls, {elapsed:?}");
    }
    report(1, "reward formula", ok, &detail);
}

// ---------------------------------------------------------------
// Criterion 2: BLEU and chrF match an independent reference
// implementation on randomized pairs within 1e-6.
// ---------------------------------------------------------------

#[derive(Deserialize)]
struct OracleFixture {
    sentence: Vec<SentenceCase>,
    corpus: Vec<CorpusCase>,
    chrf: Vec<ChrfCase>,
}

#[derive(Deserialize)]
struct SentenceCase {
    hyp: Vec<String>,
    #[serde(rename = "ref")]
    reference: Vec<String>,
    bleu: f64,
}

#[derive(Deserialize)]
struct CorpusCase {
    pairs: Vec<(Vec<String>, Vec<String>)>,
    bleu: f64,
}

#[derive(Deserialize)]
struct ChrfCase {
    hyp: String,
    #[serde(rename = "ref")]
    reference: String,
    chrf: f64,
}

#[test]
fn criterion_2_lexical_metric_oracle() {
    let start = Instant::now();
    let raw = include_str!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../core/tests/data/lexical_oracle.json"
    ));
    let fx: OracleFixture = serde_json::from_str(raw).unwrap();
    let mut ok = fx.sentence.len() >= 200 && fx.chrf.len() >= 200;
    let mut worst = 0.0_f64;
    for case in &fx.sentence {
        let got = mtrl_core::metrics::sentence_bleu(&case.hyp, &case.reference).unwrap();
        worst = worst.max((got - case.bleu).abs());
    }
    for case in &fx.corpus {
        let got = mtrl_core::metrics::corpus_bleu(&case.pairs).unwrap();
        worst = worst.max((got - case.bleu).abs());
    }
    for case in &fx.chrf {
        let got = mtrl_core::metrics::chrf(&case.hyp, &case.reference).unwrap();
        worst = worst.max((got - case.chrf).abs());
    }
    ok &= worst < 1e-6;
    let elapsed = start.elapsed();
    ok &= elapsed.as_secs_f64() < 10.0;
    report(
        2,
        "lexical metric oracle",
        ok,
        &format!(
            "{} sentence + {} corpus + {} chrF cases, max abs dev {worst:.2e}, {elapsed:?}",
            fx.sentence.len(),
            fx.corpus.len(),
            fx.chrf.len()
        ),
    );
}

// ---------------------------------------------------------------
// Criterion 3: analytic gradients match central finite differences.
// ---------------------------------------------------------------

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

const FD_H: f64 = 1e-4;
const FD_TOL: f64 = 1e-4;

fn tiny_vocab() -> Vocabulary {
    let words: Vec<String> = (0..6).map(|i| format!("w{i}")).collect();
    Vocabulary::new(words).unwrap()
}

/// (a) quadratic loss sum_i (w_i - c_i)^2 over every parameter.
fn quadratic_max_err(seed: u64) -> f64 {
    let vocab = tiny_vocab();
    let params = PolicyParams::init(3, &vocab, seed, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
    let mut centers = Vec::new();
    let loss_of = |p: &PolicyParams, centers: &[f64]| -> f64 {
        let mut i = 0;
        let mut total = 0.0;
        for block in ParamBlock::ALL {
            for &w in p.block(block) {
                total += (w - centers[i]) * (w - centers[i]);
                i += 1;
            }
        }
        total
    };
    for block in ParamBlock::ALL {
        for _ in params.block(block) {
            centers.push(rng.gen_range(-1.0..1.0));
        }
    }

    let mut tape = Tape::new();
    let mut terms = Vec::new();
    let mut i = 0;
    for block in ParamBlock::ALL {
        for (idx, &w) in params.block(block).iter().enumerate() {
            let node = tape.param(w, block, idx);
            let c = tape.constant(centers[i]);
            let d = tape.sub(node, c);
            terms.push(tape.mul(d, d));
            i += 1;
        }
    }
    let loss = tape.sum(&terms);
    let policy = GruPolicy::new(tiny_vocab(), params.clone());
    let mut grads = GradBuffer::zeros(3, policy.params.v);
    tape.backward(loss, &policy, &mut grads).unwrap();

    let mut worst = 0.0_f64;
    let mut i = 0;
    for block in ParamBlock::ALL {
        for idx in 0..params.block(block).len() {
            let mut plus = params.clone();
            plus.block_mut(block)[idx] += FD_H;
            let mut minus = params.clone();
            minus.block_mut(block)[idx] -= FD_H;
            let fd = (loss_of(&plus, &centers) - loss_of(&minus, &centers)) / (2.0 * FD_H);
            worst = worst.max(rel_err(grads.block(block)[idx], fd));
            i += 1;
        }
    }
    let _ = i;
    worst
}

/// (b) sequence negative log-likelihood of a fixed output sequence.
fn nll_max_err(seed: u64) -> f64 {
    let vocab = tiny_vocab();
    let d = 4;
    let params = PolicyParams::init(d, &vocab, seed, 1.0);
    let policy = GruPolicy::new(vocab.clone(), params.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbeef);
    let prompt = [1usize, 8, 9, 10];
    let sampled = policy.sample_response(&prompt, 10, 1.0, &mut rng).unwrap();
    let outputs = sampled.tokens;

    let nll_of = |p: &PolicyParams| -> f64 {
        let pl = GruPolicy::new(vocab.clone(), p.clone());
        -pl.sequence_logprobs(&prompt, &outputs, 1.0)
            .unwrap()
            .iter()
            .sum::<f64>()
    };

    let trace = policy.teacher_trace(&prompt, &outputs, 1.0).unwrap();
    let mut grads = GradBuffer::zeros(d, policy.params.v);
    let seeds = vec![-1.0; outputs.len()];
    policy.backprop_trace(&trace, &seeds, &mut grads);

    let mut worst = 0.0_f64;
    for block in ParamBlock::ALL {
        for idx in 0..params.block(block).len() {
            let mut plus = params.clone();
            plus.block_mut(block)[idx] += FD_H;
            let mut minus = params.clone();
            minus.block_mut(block)[idx] -= FD_H;
            let fd = (nll_of(&plus) - nll_of(&minus)) / (2.0 * FD_H);
            worst = worst.max(rel_err(grads.block(block)[idx], fd));
        }
    }
    worst
}

/// (c) the full GRPO loss on a 2-prompt, G=2 micro-batch, evaluated
/// away from the sampling parameters so ratios differ from 1.
fn grpo_max_err(seed: u64) -> f64 {
    let vocab = tiny_vocab();
    let d = 4;
    let old_params = PolicyParams::init(d, &vocab, seed, 1.0);
    let old_policy = GruPolicy::new(vocab.clone(), old_params.clone());
    let config = TrainConfig {
        group_size: 2,
        batch_prompts: 2,
        clip_eps: 0.2,
        kl_beta: 0.7,
        token_agg: if seed % 2 == 0 {
            TokenAgg::Sequence
        } else {
            TokenAgg::Token
        },
        ..TrainConfig::default()
    };

    let prompts = [vec![1usize, 8, 9], vec![1usize, 10, 11, 12]];
    let rewards = [[1.4, -3.0], [1.0, 1.9]];
    let mut groups = Vec::new();
    for (p_idx, prompt) in prompts.iter().enumerate() {
        let mut trajectories = Vec::new();
        let advantages = compute_advantages(&rewards[p_idx]);
        for g in 0..2 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed * 100 + (p_idx * 2 + g) as u64);
            let sampled = old_policy.sample_response(prompt, 8, 1.0, &mut rng).unwrap();
            trajectories.push(Trajectory {
                prompt_tokens: prompt.clone(),
                output_tokens: sampled.tokens,
                logprobs_old: sampled.logprobs.clone(),
                logprobs_ref: sampled.logprobs,
                reward: rewards[p_idx][g],
                advantage: advantages[g],
                format_ok: true,
                s_metric: None,
            });
        }
        groups.push(trajectories);
    }

    // Evaluate at parameters displaced from the sampling point, skipping
    // perturbations that park an importance ratio on a clip boundary
    // where the loss is not differentiable.
    let mut attempt = 0;
    let params = loop {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0xd15c + attempt));
        let mut p = old_params.clone();
        for block in ParamBlock::ALL {
            for w in p.block_mut(block) {
                *w += rng.gen_range(-0.02..0.02);
            }
        }
        let policy = GruPolicy::new(vocab.clone(), p.clone());
        let mut near_kink = false;
        for group in &groups {
            for traj in group {
                let lps = policy
                    .sequence_logprobs(&traj.prompt_tokens, &traj.output_tokens, 1.0)
                    .unwrap();
                for (lp, lp_old) in lps.iter().zip(&traj.logprobs_old) {
                    let ratio = (lp - lp_old).exp();
                    if (ratio - 0.8).abs() < 1e-3 || (ratio - 1.2).abs() < 1e-3 {
                        near_kink = true;
                    }
                }
            }
        }
        if !near_kink {
            break p;
        }
        attempt += 1;
        assert!(attempt < 20, "no kink-free perturbation found");
    };

    let policy = GruPolicy::new(vocab.clone(), params.clone());
    let (_, grads) = grpo::surrogate_loss_grad(&policy, &config, &groups).unwrap();

    let mut worst = 0.0_f64;
    for block in ParamBlock::ALL {
        for idx in 0..params.block(block).len() {
            let mut plus = params.clone();
            plus.block_mut(block)[idx] += FD_H;
            let mut minus = params.clone();
            minus.block_mut(block)[idx] -= FD_H;
            let lp = grpo::surrogate_loss_value(
                &GruPolicy::new(vocab.clone(), plus),
                &config,
                &groups,
            )
            .unwrap();
            let lm = grpo::surrogate_loss_value(
                &GruPolicy::new(vocab.clone(), minus),
                &config,
                &groups,
            )
            .unwrap();
            let fd = (lp - lm) / (2.0 * FD_H);
            worst = worst.max(rel_err(grads.block(block)[idx], fd));
        }
    }
    worst
}

#[test]
fn criterion_3_gradient_correctness() {
    let start = Instant::now();
    let mut worst_quad = 0.0_f64;
    let mut worst_nll = 0.0_f64;
    let mut worst_grpo = 0.0_f64;
    for seed in 0..5 {
        worst_quad = worst_quad.max(quadratic_max_err(seed));
        worst_nll = worst_nll.max(nll_max_err(seed));
        worst_grpo = worst_grpo.max(grpo_max_err(seed));
    }
    let elapsed = start.elapsed();
    let ok = worst_quad < FD_TOL
        && worst_nll < FD_TOL
        && worst_grpo < FD_TOL
        && elapsed.as_secs_f64() < 60.0;
    report(
        3,
        "gradient correctness",
        ok,
        &format!(
            "max rel err quadratic {worst_quad:.2e}, nll {worst_nll:.2e}, grpo {worst_grpo:.2e} over 5 seeds, {elapsed:?}"
        ),
    );
}

// ---------------------------------------------------------------
// Criterion 4: GRPO math invariants.
// ---------------------------------------------------------------

#[test]
fn criterion_4_grpo_math() {
    let mut ok = true;
    let mut detail = String::new();

    // Advantage normalization and the degenerate case.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n = rng.gen_range(2..12);
        let rewards: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let adv = compute_advantages(&rewards);
        let mean = adv.iter().sum::<f64>() / n as f64;
        let var = adv.iter().map(|a| a * a).sum::<f64>() / n as f64;
        if mean.abs() >= 1e-9 || (var.sqrt() - 1.0).abs() >= 1e-9 {
            ok = false;
            detail = format!("advantage mean {mean:.2e} or std {:.2e} off", var.sqrt());
        }
    }
    let degenerate = compute_advantages(&[1.5, 1.5, 1.5]);
    if degenerate != vec![0.0, 0.0, 0.0] {
        ok = false;
        detail = "degenerate group advantages not all-zero".into();
    }

    // KL estimator sign.
    for _ in 0..500 {
        let a = rng.gen_range(-8.0..0.0);
        let b = rng.gen_range(-8.0..0.0);
        let kl = kl_approx(a, b).unwrap();
        if kl < 0.0 {
            ok = false;
            detail = format!("kl_approx({a},{b}) = {kl} < 0");
        }
        if a != b && kl == 0.0 {
            ok = false;
            detail = format!("kl_approx({a},{b}) = 0 with unequal logprobs");
        }
    }
    if kl_approx(-1.25, -1.25).unwrap() != 0.0 {
        ok = false;
        detail = "kl_approx not exactly zero at equal logprobs".into();
    }

    // First-epoch importance ratios are exactly 1.
    let spec = LanguageSpec {
        n_concepts: 6,
        min_len: 2,
        max_len: 4,
        ..LanguageSpec::default()
    };
    let vocab = spec.vocabulary().unwrap();
    let corpus = generate_corpus(&spec, 8, 2, 3).unwrap();
    let config = TrainConfig {
        group_size: 3,
        batch_prompts: 2,
        ppo_epochs: 2,
        max_gen_len: 16,
        ..TrainConfig::default()
    };
    let params = PolicyParams::init(8, &vocab, 5, 4.0);
    let policy = GruPolicy::new(vocab, params);
    let mut trainer = Trainer::new(policy, config).unwrap();
    let lex = mtrl_core::reward::BleuLexical::default();
    let sem = FixedSem {
        value: 0.5,
        calls: AtomicUsize::new(0),
    };
    for step in 0..3 {
        trainer
            .train_step(&corpus.train[..2].to_vec(), &lex, &sem)
            .unwrap();
        if trainer.last_ratio_dev > 1e-12 {
            ok = false;
            detail = format!(
                "first-epoch ratio deviates by {:.2e} at step {step}",
                trainer.last_ratio_dev
            );
        }
    }

    // Clip truth table: a single-token trajectory per branch.
    let vocab = tiny_vocab();
    let params = PolicyParams::init(4, &vocab, 9, 0.0);
    let policy = GruPolicy::new(vocab.clone(), params);
    let clip_cfg = TrainConfig {
        group_size: 1,
        batch_prompts: 1,
        clip_eps: 0.2,
        kl_beta: 0.0,
        ..TrainConfig::default()
    };
    let prompt = vec![1usize, 8];
    let outputs = vec![2usize];
    let lp = policy.sequence_logprobs(&prompt, &outputs, 1.0).unwrap()[0];
    for (ratio_target, advantage) in [(1.35, 1.0), (0.7, 1.0), (0.7, -1.0), (1.35, -1.0)] {
        let lp_old = lp - f64::ln(ratio_target);
        let traj = Trajectory {
            prompt_tokens: prompt.clone(),
            output_tokens: outputs.clone(),
            logprobs_old: vec![lp_old],
            logprobs_ref: vec![lp],
            reward: 0.0,
            advantage,
            format_ok: true,
            s_metric: None,
        };
        let groups = vec![vec![traj]];
        let loss = grpo::surrogate_loss_value(&policy, &clip_cfg, &groups).unwrap();
        let ratio = (lp - lp_old).exp();
        let expected = -f64::min(
            ratio * advantage,
            ratio.clamp(0.8, 1.2) * advantage,
        );
        if loss != expected {
            ok = false;
            detail = format!(
                "clip branch (ratio {ratio_target}, A {advantage}): loss {loss} != {expected}"
            );
        }
    }

    if ok {
        detail = "advantages, kl sign, unit first-epoch ratios, 4 clip branches".into();
    }
    report(4, "grpo math", ok, &detail);
}

// ---------------------------------------------------------------
// Criteria 5, 8, 9: desk-scale training runs on the synthetic corpus.
// ---------------------------------------------------------------

fn training_config(seed: u64, think_mode: ThinkMode) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.train = TrainConfig {
        group_size: 8,
        batch_prompts: 8,
        lr: 2e-3,
        clip_eps: 0.2,
        kl_beta: 0.02,
        temperature: 1.0,
        max_gen_len: 48,
        ppo_epochs: 3,
        seed,
        token_agg: TokenAgg::Sequence,
        metric: MetricKind::Lex,
        think_mode,
        format_penalty: 2.0,
    };
    cfg.hidden_dim = 96;
    cfg.format_prior = 8.0;
    cfg.language = LanguageSpec {
        reorder: ReorderRule::Reverse,
        ..LanguageSpec::default()
    };
    cfg.n_train = 512;
    cfg.n_test = 128;
    cfg.corpus_seed = 0;
    cfg.steps = 2000;
    cfg.checkpoint_interval = 0;
    cfg.eval_interval = 0;
    cfg
}

struct RunArtifacts {
    outcome: TrainOutcome,
    _dir: tempfile::TempDir,
    wall_s: f64,
}

fn train_once(cfg: &ExperimentConfig) -> RunArtifacts {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let outcome = run_train(cfg, dir.path(), None).unwrap();
    RunArtifacts {
        outcome,
        _dir: dir,
        wall_s: start.elapsed().as_secs_f64(),
    }
}

fn with_think_run() -> &'static RunArtifacts {
    static RUN: OnceLock<RunArtifacts> = OnceLock::new();
    RUN.get_or_init(|| train_once(&training_config(0, ThinkMode::Required)))
}

#[test]
fn criterion_5_training_run() {
    let run = with_think_run();
    let metrics = &run.outcome.metrics;
    let mut ok = true;
    let mut detail = String::new();

    let first_low = metrics
        .iter()
        .find(|m| m.format_error_rate < 0.05)
        .map(|m| m.step);
    match first_low {
        Some(s0) if s0 < 400 => {
            if let Some(bad) = metrics
                .iter()
                .find(|m| m.step > s0 && m.format_error_rate >= 0.10)
            {
                ok = false;
                detail = format!(
                    "format error {:.3} at step {} after first dip at {s0}",
                    bad.format_error_rate, bad.step
                );
            }
        }
        other => {
            ok = false;
            detail = format!("format error never fell below 0.05 by step 400 ({other:?})");
        }
    }

    let base = run.outcome.baseline_eval.as_ref().unwrap().corpus_bleu;
    let fin = run.outcome.final_eval.as_ref().unwrap().corpus_bleu;
    if fin - base < 20.0 {
        ok = false;
        detail = format!("BLEU gain {:.2} (base {base:.2} -> final {fin:.2}) < 20", fin - base);
    }
    if run.wall_s > 30.0 * 60.0 {
        ok = false;
        detail = format!("run took {:.0} s, budget 1800 s", run.wall_s);
    }
    if ok {
        detail = format!(
            "format ok, BLEU {base:.2} -> {fin:.2} (+{:.2}), {:.0} s",
            fin - base,
            run.wall_s
        );
    }
    report(5, "desk-scale training run", ok, &detail);
}

#[test]
fn criterion_8_thinking_ablation() {
    let with_bleu = with_think_run()
        .outcome
        .final_eval
        .as_ref()
        .unwrap()
        .corpus_bleu;
    let without = train_once(&training_config(0, ThinkMode::Optional));
    let without_bleu = without.outcome.final_eval.as_ref().unwrap().corpus_bleu;
    let gap = without_bleu - with_bleu;
    let ok = gap.abs() <= 5.0;
    report(
        8,
        "thinking ablation",
        ok,
        &format!("with {with_bleu:.2} vs without {without_bleu:.2} (gap {gap:+.2}, budget ±5)"),
    );
}

#[test]
fn criterion_9_determinism() {
    let first = with_think_run();
    let again = train_once(&training_config(0, ThinkMode::Required));
    let a = std::fs::read(&first.outcome.metrics_path).unwrap();
    let b = std::fs::read(&again.outcome.metrics_path).unwrap();
    let ok = a == b && !a.is_empty();
    report(
        9,
        "determinism",
        ok,
        &format!("metrics logs {} bytes, byte-identical: {}", a.len(), a == b),
    );
}

// ---------------------------------------------------------------
// Criterion 6: reward-metric choice drives the trained behavior.
// ---------------------------------------------------------------

#[test]
fn criterion_6_metric_ablation() {
    let mut ok = true;
    let mut strict_bleu = 0;
    let mut strict_sem = 0;
    let mut detail = String::new();
    let mut summaries = Vec::new();
    for seed in [0u64, 1, 2] {
        let mut lex_cfg = training_config(seed, ThinkMode::Required);
        lex_cfg.steps = 700;
        let mut sem_cfg = lex_cfg.clone();
        sem_cfg.train.metric = MetricKind::Sem;

        let lex_run = train_once(&lex_cfg);
        let sem_run = train_once(&sem_cfg);
        let lex_eval = lex_run.outcome.final_eval.as_ref().unwrap();
        let sem_eval = sem_run.outcome.final_eval.as_ref().unwrap();
        let (bl, bs) = (lex_eval.corpus_bleu, sem_eval.corpus_bleu);
        let (sl, ss) = (lex_eval.mean_sem.unwrap(), sem_eval.mean_sem.unwrap());
        summaries.push(format!(
            "seed {seed}: bleu {bl:.1}/{bs:.1} sem {sl:.3}/{ss:.3}"
        ));
        if bl < bs || ss < sl {
            ok = false;
            detail = format!("ordering violated on seed {seed}");
        }
        if bl > bs {
            strict_bleu += 1;
        }
        if ss > sl {
            strict_sem += 1;
        }
    }
    if strict_bleu < 2 || strict_sem < 2 {
        ok = false;
        detail = format!("strict on {strict_bleu}/{strict_sem} of 3 seeds, need 2");
    }
    if ok {
        detail = format!("lex/sem — {}", summaries.join("; "));
    }
    report(6, "metric ablation", ok, &detail);
}

// ---------------------------------------------------------------
// Criterion 7: the KL penalty holds the policy near the reference.
// ---------------------------------------------------------------

fn param_l2(a: &PolicyParams, b: &PolicyParams) -> f64 {
    let mut total = 0.0;
    for block in ParamBlock::ALL {
        for (x, y) in a.block(block).iter().zip(b.block(block)) {
            total += (x - y) * (x - y);
        }
    }
    total.sqrt()
}

#[test]
fn criterion_7_kl_ablation() {
    let spec = LanguageSpec {
        n_concepts: 12,
        min_len: 2,
        max_len: 5,
        ..LanguageSpec::default()
    };
    let vocab = spec.vocabulary().unwrap();
    let corpus = generate_corpus(&spec, 32, 4, 1).unwrap();
    let lex = mtrl_core::reward::BleuLexical::default();
    let sem = FixedSem {
        value: 0.5,
        calls: AtomicUsize::new(0),
    };

    let mut distance = [0.0_f64; 2];
    let mut kl_ok = true;
    for (i, beta) in [1.0, 0.0].into_iter().enumerate() {
        let config = TrainConfig {
            group_size: 4,
            batch_prompts: 4,
            kl_beta: beta,
            max_gen_len: 24,
            seed: 7,
            ..TrainConfig::default()
        };
        let params = PolicyParams::init(16, &vocab, 7, 5.0);
        let policy = GruPolicy::new(vocab.clone(), params);
        let mut trainer = Trainer::new(policy, config).unwrap();
        let sampler = mtrl_core::corpus::EpochSampler::new(corpus.train.len(), 4, 7);
        for step in 0..250u64 {
            let batch: Vec<PromptInstance> = sampler
                .batch_at(step)
                .into_iter()
                .map(|j| corpus.train[j].clone())
                .collect();
            let m = trainer.train_step(&batch, &lex, &sem).unwrap();
            if m.mean_kl < 0.0 {
                kl_ok = false;
            }
        }
        distance[i] = param_l2(&trainer.policy.params, &trainer.reference.params);
    }
    let ok = kl_ok && distance[0] < distance[1];
    report(
        7,
        "kl ablation",
        ok,
        &format!(
            "L2 from reference: beta=1 {:.4} vs beta=0 {:.4}, kl nonnegative {kl_ok}",
            distance[0], distance[1]
        ),
    );
}
