//! Command implementations, usable as a library so integration tests
//! can drive complete runs without spawning the binary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context};
use mtrl_core::corpus::{
    generate_corpus, load_parallel_file, vocabulary_from_instances, EpochSampler,
};
use mtrl_core::grpo::{evaluate, EvalOptions, EvalReport, StepMetrics, Trainer};
use mtrl_core::policy::checkpoint;
use mtrl_core::policy::{GruPolicy, PolicyParams, Vocabulary};
use mtrl_core::protocol::{parse_response, PromptInstance};
use mtrl_core::reward::{final_reward, BleuLexical, MetricKind, RewardBreakdown};
use mtrl_core::scorer::{
    MockSynonymScorer, RemoteScorer, ScoreError, ScoreRequest, SemanticScorer, SynonymLexicon,
};
use serde::Serialize;

use crate::config::{ExperimentConfig, ScorerKind};

/// Training and test instances plus the vocabulary they induce.
pub struct Dataset {
    pub train: Vec<PromptInstance>,
    pub test: Vec<PromptInstance>,
    pub vocab: Vocabulary,
    /// Present only for generated language pairs; powers the mock
    /// semantic scorer.
    pub lexicon: Option<SynonymLexicon>,
}

/// Materializes the dataset a config describes: parallel files when
/// `train_file` is set, otherwise a generated language pair.
pub fn build_dataset(cfg: &ExperimentConfig) -> anyhow::Result<Dataset> {
    if let Some(train_file) = &cfg.train_file {
        let test_file = cfg
            .test_file
            .as_ref()
            .expect("validated: train_file and test_file come together");
        let lang = &cfg.language;
        let (train, train_report) = load_parallel_file(
            train_file,
            cfg.file_format,
            &lang.src_lang,
            &lang.tgt_lang,
            cfg.min_chars,
        )
        .with_context(|| format!("loading {}", train_file.display()))?;
        let (test, test_report) = load_parallel_file(
            test_file,
            cfg.file_format,
            &lang.src_lang,
            &lang.tgt_lang,
            cfg.min_chars,
        )
        .with_context(|| format!("loading {}", test_file.display()))?;
        eprintln!(
            "loaded {} train ({} malformed, {} short), {} test ({} malformed, {} short)",
            train_report.loaded,
            train_report.skipped_malformed,
            train_report.skipped_short,
            test_report.loaded,
            test_report.skipped_malformed,
            test_report.skipped_short,
        );
        ensure!(!train.is_empty(), "no usable training pairs survived loading");
        let mut all = train.clone();
        all.extend(test.iter().cloned());
        let vocab = vocabulary_from_instances(&all)?;
        Ok(Dataset {
            train,
            test,
            vocab,
            lexicon: None,
        })
    } else {
        let corpus = generate_corpus(&cfg.language, cfg.n_train, cfg.n_test, cfg.corpus_seed)?;
        let vocab = cfg.language.vocabulary()?;
        let lexicon = cfg.language.lexicon()?;
        Ok(Dataset {
            train: corpus.train,
            test: corpus.test,
            vocab,
            lexicon: Some(lexicon),
        })
    }
}

/// Semantic scorer selected by the config, if one can be built.
pub fn build_semantic_scorer(
    cfg: &ExperimentConfig,
    lexicon: Option<&SynonymLexicon>,
) -> anyhow::Result<Option<Box<dyn SemanticScorer>>> {
    match cfg.scorer {
        ScorerKind::Mock => Ok(lexicon
            .map(|lx| Box::new(MockSynonymScorer::new(lx.clone())) as Box<dyn SemanticScorer>)),
        ScorerKind::Remote => match &cfg.scorer_endpoint {
            Some(endpoint) => {
                let scorer = RemoteScorer::new(
                    endpoint,
                    cfg.scorer_timeout(),
                    cfg.scorer_max_in_flight,
                )?;
                Ok(Some(Box::new(scorer)))
            }
            None => Ok(None),
        },
    }
}

/// Stand-in used when the reward never consults the semantic scorer;
/// calling it is a configuration bug and fails loudly.
struct NoScorer;

impl SemanticScorer for NoScorer {
    fn score(&self, _request: &ScoreRequest) -> Result<f64, ScoreError> {
        Err(ScoreError::Malformed(
            "no semantic scorer configured; set scorer=remote with scorer_endpoint, \
             or use a generated language pair for the mock"
                .into(),
        ))
    }
}

fn require_scorer_for_metric(
    cfg: &ExperimentConfig,
    sem: &Option<Box<dyn SemanticScorer>>,
) -> anyhow::Result<()> {
    if cfg.train.metric != MetricKind::Lex && sem.is_none() {
        bail!(
            "metric {:?} needs a semantic scorer: configure scorer=remote with a \
             scorer_endpoint (or {} in the environment), or train on a generated \
             language pair so the mock scorer applies",
            cfg.train.metric,
            crate::config::SCORER_ENDPOINT_ENV,
        );
    }
    Ok(())
}

fn initial_params(cfg: &ExperimentConfig, vocab: &Vocabulary) -> PolicyParams {
    PolicyParams::init(cfg.hidden_dim, vocab, cfg.train.seed, cfg.format_prior)
}

fn eval_options(cfg: &ExperimentConfig) -> EvalOptions {
    EvalOptions {
        temperature: cfg.eval_temperature,
        seed: cfg.train.seed,
        greedy: cfg.eval_greedy,
        max_gen_len: cfg.train.max_gen_len,
        think_mode: cfg.train.think_mode,
    }
}

fn load_checkpoint_for(
    path: &Path,
    vocab: &Vocabulary,
    cfg: &ExperimentConfig,
) -> anyhow::Result<checkpoint::Checkpoint> {
    let ck = checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
    ensure!(
        ck.vocab_hash == vocab.hash(),
        "checkpoint {} was trained with a different vocabulary (hash {:#x}, expected {:#x}); \
         the corpus settings must match the training run",
        path.display(),
        ck.vocab_hash,
        vocab.hash(),
    );
    ensure!(
        ck.params.d == cfg.hidden_dim,
        "checkpoint hidden size {} does not match hidden_dim {}",
        ck.params.d,
        cfg.hidden_dim,
    );
    Ok(ck)
}

pub struct TrainOutcome {
    pub metrics: Vec<StepMetrics>,
    /// Test-set report for the freshly initialized policy (fresh runs
    /// with a non-empty test split only).
    pub baseline_eval: Option<EvalReport>,
    /// Test-set report for the final parameters.
    pub final_eval: Option<EvalReport>,
    pub final_checkpoint: PathBuf,
    pub metrics_path: PathBuf,
}

/// Runs (or resumes) a training run. Per-step metrics go to
/// `out_dir/metrics.jsonl` exactly as returned, so reruns with the
/// same config are byte-identical; wall-clock timings go to stderr
/// only. Checkpoints land every `checkpoint_interval` steps plus a
/// final `ckpt-final.bin`.
pub fn run_train(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    resume: Option<&Path>,
) -> anyhow::Result<TrainOutcome> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let data = build_dataset(cfg)?;
    let vocab = data.vocab.clone();
    let vocab_hash = vocab.hash();

    let sem_box = build_semantic_scorer(cfg, data.lexicon.as_ref())?;
    require_scorer_for_metric(cfg, &sem_box)?;
    let no_scorer = NoScorer;
    let sem_for_reward: &dyn SemanticScorer = sem_box.as_deref().unwrap_or(&no_scorer);
    let sem_for_eval: Option<&dyn SemanticScorer> = sem_box.as_deref();
    let lex = BleuLexical::default();

    let init = initial_params(cfg, &vocab);
    let mut trainer = match resume {
        None => Trainer::new(GruPolicy::new(vocab.clone(), init), cfg.train.clone())?,
        Some(path) => {
            let ck = load_checkpoint_for(path, &vocab, cfg)?;
            ensure!(
                ck.global_step < cfg.steps,
                "checkpoint is already at step {}, nothing to do for steps={}",
                ck.global_step,
                cfg.steps,
            );
            Trainer::resume(
                GruPolicy::new(vocab.clone(), ck.params),
                GruPolicy::new(vocab.clone(), init),
                ck.opt,
                ck.global_step,
                cfg.train.clone(),
            )?
        }
    };

    let snapshot_path = out_dir.join("config.json");
    std::fs::write(&snapshot_path, serde_json::to_vec_pretty(cfg)?)?;

    let opts = eval_options(cfg);
    let baseline_eval = if trainer.global_step == 0 && !data.test.is_empty() {
        let report = evaluate(&trainer.policy, &data.test, &opts, sem_for_eval)?;
        eprintln!("baseline eval: {}", serde_json::to_string(&report)?);
        Some(report)
    } else {
        None
    };

    let sampler = EpochSampler::new(data.train.len(), cfg.train.batch_prompts, cfg.train.seed);
    let metrics_path = out_dir.join("metrics.jsonl");
    let mut log = BufWriter::new(
        File::create(&metrics_path)
            .with_context(|| format!("creating {}", metrics_path.display()))?,
    );

    let mut all_metrics = Vec::with_capacity((cfg.steps - trainer.global_step) as usize);
    while trainer.global_step < cfg.steps {
        let t0 = Instant::now();
        let step = trainer.global_step;
        let indices = sampler.batch_at(step);
        let batch: Vec<PromptInstance> =
            indices.iter().map(|&i| data.train[i].clone()).collect();
        let mut metrics = trainer.train_step(&batch, &lex, sem_for_reward)?;
        let done = trainer.global_step;

        if cfg.eval_interval > 0 && done % cfg.eval_interval == 0 && !data.test.is_empty() {
            let report = evaluate(&trainer.policy, &data.test, &opts, sem_for_eval)?;
            metrics.eval_bleu = Some(report.corpus_bleu);
            metrics.eval_chrf = Some(report.mean_chrf);
            metrics.eval_sem = report.mean_sem;
            metrics.eval_format_error_rate = Some(report.format_error_rate);
        }

        let mut line = serde_json::to_string(&metrics)?;
        line.push('\n');
        log.write_all(line.as_bytes())?;

        eprintln!(
            "step {done}/{} loss {:.4} reward {:.3} fmt_err {:.2} wall_ms {}",
            cfg.steps,
            metrics.loss,
            metrics.mean_reward,
            metrics.format_error_rate,
            t0.elapsed().as_millis(),
        );

        if cfg.checkpoint_interval > 0 && done % cfg.checkpoint_interval == 0 && done < cfg.steps
        {
            let path = out_dir.join(format!("ckpt-{done:06}.bin"));
            checkpoint::save(&path, vocab_hash, &trainer.policy.params, done, &trainer.opt)?;
        }
        all_metrics.push(metrics);
    }
    log.flush()?;
    drop(log);

    let final_checkpoint = out_dir.join("ckpt-final.bin");
    checkpoint::save(
        &final_checkpoint,
        vocab_hash,
        &trainer.policy.params,
        trainer.global_step,
        &trainer.opt,
    )?;

    let final_eval = if data.test.is_empty() {
        None
    } else {
        let report = evaluate(&trainer.policy, &data.test, &opts, sem_for_eval)?;
        std::fs::write(out_dir.join("eval.json"), serde_json::to_vec_pretty(&report)?)?;
        Some(report)
    };

    Ok(TrainOutcome {
        metrics: all_metrics,
        baseline_eval,
        final_eval,
        final_checkpoint,
        metrics_path,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Evaluates a checkpoint on one split of the configured dataset.
pub fn run_eval(
    cfg: &ExperimentConfig,
    checkpoint_path: &Path,
    split: Split,
    opts: &EvalOptions,
) -> anyhow::Result<EvalReport> {
    let data = build_dataset(cfg)?;
    let instances = match split {
        Split::Train => &data.train,
        Split::Test => &data.test,
    };
    ensure!(!instances.is_empty(), "{split:?} split is empty");
    let ck = load_checkpoint_for(checkpoint_path, &data.vocab, cfg)?;
    let policy = GruPolicy::new(data.vocab.clone(), ck.params);
    let sem_box = build_semantic_scorer(cfg, data.lexicon.as_ref())?;
    Ok(evaluate(&policy, instances, opts, sem_box.as_deref())?)
}

/// Scores one raw response string under the configured reward.
pub fn run_score(
    cfg: &ExperimentConfig,
    src: &str,
    reference: Option<&str>,
    response: &str,
) -> anyhow::Result<RewardBreakdown> {
    let instance = PromptInstance::new(
        cfg.language.src_lang.clone(),
        cfg.language.tgt_lang.clone(),
        src,
        reference.map(str::to_string),
    )?;
    let lexicon = if cfg.train_file.is_none() {
        Some(cfg.language.lexicon()?)
    } else {
        None
    };
    let sem_box = build_semantic_scorer(cfg, lexicon.as_ref())?;
    require_scorer_for_metric(cfg, &sem_box)?;
    let no_scorer = NoScorer;
    let sem: &dyn SemanticScorer = sem_box.as_deref().unwrap_or(&no_scorer);
    let parsed = parse_response(response, cfg.train.think_mode);
    let breakdown = final_reward(
        &parsed,
        &instance,
        cfg.train.reward_mode(),
        &BleuLexical::default(),
        sem,
        cfg.train.format_penalty,
    )?;
    Ok(breakdown)
}

#[derive(Serialize)]
struct CorpusLine<'a> {
    src: &'a str,
    #[serde(rename = "ref")]
    reference: &'a str,
    src_lang: &'a str,
    tgt_lang: &'a str,
}

fn write_split(path: &Path, instances: &[PromptInstance]) -> anyhow::Result<()> {
    let mut out = BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    for instance in instances {
        let line = CorpusLine {
            src: &instance.src_text,
            reference: instance
                .ref_text
                .as_deref()
                .expect("generated corpora always carry references"),
            src_lang: &instance.src_lang,
            tgt_lang: &instance.tgt_lang,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub struct GeneratedFiles {
    pub train_path: PathBuf,
    pub test_path: PathBuf,
    pub n_train: usize,
    pub n_test: usize,
}

/// Writes `train.jsonl` and `test.jsonl` for the configured language
/// pair; the files round-trip through `load_parallel_file`.
pub fn run_generate(cfg: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<GeneratedFiles> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let corpus = generate_corpus(&cfg.language, cfg.n_train, cfg.n_test, cfg.corpus_seed)?;
    let train_path = out_dir.join("train.jsonl");
    let test_path = out_dir.join("test.jsonl");
    write_split(&train_path, &corpus.train)?;
    write_split(&test_path, &corpus.test)?;
    Ok(GeneratedFiles {
        train_path,
        test_path,
        n_train: corpus.train.len(),
        n_test: corpus.test.len(),
    })
}
