use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use chartcorpus::corpus::{
    build_corpus, evaluate, export_truth, read_manifest, validate_corpus, write_jsonl, BuildOptions, CorpusConfig,
    CorpusError, EvalMode, Split,
};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "chartcorpus", version, about = "Build, validate and evaluate synthetic chart QA corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a corpus from a JSON config.
    Build {
        #[arg(long)]
        config: PathBuf,
        /// Replace the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: one per core).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Replace a non-empty output directory.
        #[arg(long)]
        overwrite: bool,
    },
    /// Re-check digests, schemas, annotation invariants and answers.
    Validate {
        path: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Score predictions against a built corpus.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, value_parser = parse_split, default_value = "test")]
        split: Split,
        /// Character error rate for simulated OCR in end_to_end mode;
        /// defaults to the corpus config's rate, if any.
        #[arg(long)]
        ocr_rate: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the report as JSON here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write a split's ground truth as a predictions file.
    ExportTruth {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_parser = parse_split, default_value = "test")]
        split: Split,
        #[arg(long)]
        out: PathBuf,
        /// Fraction of elements to leave out, chosen uniformly.
        #[arg(long, default_value_t = 0.0)]
        drop: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Detection,
    Qa,
    #[value(name = "end_to_end", alias = "end-to-end")]
    EndToEnd,
}

fn parse_split(s: &str) -> Result<Split, String> {
    Split::from_id(s).ok_or_else(|| format!("unknown split {s:?}; expected train, test or novel_test"))
}

/// Errors a user fixes by changing the invocation or config.
fn is_usage(e: &anyhow::Error) -> bool {
    matches!(
        e.downcast_ref::<CorpusError>(),
        Some(CorpusError::Config(_) | CorpusError::Hygiene(_) | CorpusError::NotEmpty(_))
    )
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Build { config, seed, workers, overwrite } => {
            let mut cfg = CorpusConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let manifest = build_corpus(&cfg, BuildOptions { workers, overwrite })?;
            for (split, entry) in &manifest.splits {
                let c = &entry.counts;
                println!(
                    "{split}: {} charts, {} questions, {} skipped draws",
                    c.charts, c.questions, c.skipped_questions
                );
            }
            println!("wrote {}", cfg.output_path().display());
            Ok(0)
        }
        Command::Validate { path, json } => {
            let report = validate_corpus(&path)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                for v in &report.violations {
                    println!("{:?}\t{}\t{}", v.kind, v.location, v.message);
                }
                println!(
                    "{} charts, {} questions, {} violations",
                    report.charts,
                    report.questions,
                    report.violations.len()
                );
            }
            Ok(if report.is_clean() { 0 } else { EXIT_FAILURE })
        }
        Command::Evaluate { predictions, corpus, mode, split, ocr_rate, seed, report } => {
            let mode = match mode {
                Mode::Detection => EvalMode::Detection,
                Mode::Qa => EvalMode::Qa,
                Mode::EndToEnd => EvalMode::EndToEnd,
            };
            let rate = match ocr_rate {
                Some(r) => Some(r),
                None => read_manifest(&corpus)?.config.get("ocr_noise_rate").and_then(|v| v.as_f64()),
            };
            if let Some(r) = rate {
                anyhow::ensure!((0.0..=1.0).contains(&r), CorpusError::Config(format!("ocr rate {r} outside [0, 1]")));
                info!("simulated OCR at character error rate {r}");
            }
            let result = evaluate(&predictions, &corpus, split, mode, rate.map(|r| (r, seed)))?;
            print!("{}", result.to_text());
            if let Some(path) = report {
                std::fs::write(&path, serde_json::to_vec_pretty(&result)?)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(0)
        }
        Command::ExportTruth { corpus, split, out, drop, seed } => {
            anyhow::ensure!((0.0..=1.0).contains(&drop), CorpusError::Config(format!("drop {drop} outside [0, 1]")));
            let preds = export_truth(&corpus, split, drop, seed)?;
            write_jsonl(&out, &preds)?;
            println!("wrote {} predictions to {}", preds.len(), out.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_usage(&e) { EXIT_USAGE } else { EXIT_FAILURE })
        }
    }
}
