use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use mtrl_cli::config::ExperimentConfig;
use mtrl_cli::{parse_override, run_eval, run_generate, run_score, run_train, Split};
use mtrl_core::grpo::EvalOptions;

#[derive(Parser)]
#[command(
    name = "mtrl",
    version,
    about = "Train and evaluate tiny translation policies with group-relative policy optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Flat `key = value` experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set lr=0.001`. Repeatable;
    /// beats the file and the environment.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self, extra: &[(String, String)]) -> anyhow::Result<ExperimentConfig> {
        let mut overrides = Vec::new();
        for arg in &self.overrides {
            overrides.push(parse_override(arg)?);
        }
        overrides.extend(extra.iter().cloned());
        Ok(ExperimentConfig::load(self.config.as_deref(), &overrides)?)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a policy; logs one JSON object per step to
    /// OUT_DIR/metrics.jsonl and checkpoints periodically.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "runs/default")]
        out_dir: PathBuf,
        /// Continue from a checkpoint written by an earlier run with
        /// the same config.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Shorthand for `--set steps=N`.
        #[arg(long)]
        steps: Option<u64>,
        /// Shorthand for `--set seed=N`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Decode a checkpoint over one split and report corpus quality.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        /// Decode by argmax instead of seeded sampling.
        #[arg(long)]
        greedy: bool,
        /// Sampling temperature (defaults to eval_temperature).
        #[arg(long)]
        temperature: Option<f64>,
        /// Sampling seed (defaults to the training seed).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score one raw response under the configured reward.
    Score {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        src: String,
        #[arg(long = "ref")]
        reference: Option<String>,
        #[arg(long)]
        response: String,
    },
    /// Write train.jsonl and test.jsonl for the configured language
    /// pair.
    GenerateCorpus {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "data")]
        out_dir: PathBuf,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Train {
            config,
            out_dir,
            resume,
            steps,
            seed,
        } => {
            let mut extra = Vec::new();
            if let Some(s) = steps {
                extra.push(("steps".to_string(), s.to_string()));
            }
            if let Some(s) = seed {
                extra.push(("seed".to_string(), s.to_string()));
            }
            let cfg = config.load(&extra)?;
            let outcome = run_train(&cfg, &out_dir, resume.as_deref())?;
            if let Some(report) = &outcome.final_eval {
                println!("{}", serde_json::to_string_pretty(report)?);
            }
            eprintln!(
                "wrote {} and {}",
                outcome.metrics_path.display(),
                outcome.final_checkpoint.display()
            );
        }
        Command::Eval {
            config,
            checkpoint,
            split,
            greedy,
            temperature,
            seed,
        } => {
            let cfg = config.load(&[])?;
            let opts = EvalOptions {
                temperature: temperature.unwrap_or(cfg.eval_temperature),
                seed: seed.unwrap_or(cfg.train.seed),
                greedy: greedy || cfg.eval_greedy,
                max_gen_len: cfg.train.max_gen_len,
                think_mode: cfg.train.think_mode,
            };
            let split = match split {
                SplitArg::Train => Split::Train,
                SplitArg::Test => Split::Test,
            };
            let report = run_eval(&cfg, &checkpoint, split, &opts)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Score {
            config,
            src,
            reference,
            response,
        } => {
            let cfg = config.load(&[])?;
            let breakdown = run_score(&cfg, &src, reference.as_deref(), &response)?;
            println!("{}", serde_json::to_string_pretty(&breakdown)?);
        }
        Command::GenerateCorpus { config, out_dir } => {
            let cfg = config.load(&[])?;
            let files = run_generate(&cfg, &out_dir)?;
            eprintln!(
                "wrote {} ({} pairs) and {} ({} pairs)",
                files.train_path.display(),
                files.n_train,
                files.test_path.display(),
                files.n_test
            );
        }
    }
    Ok(())
}
