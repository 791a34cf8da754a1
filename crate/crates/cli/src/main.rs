use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use senmo_core::io::config::RunConfig;
use senmo_core::pipeline;
use senmo_core::{Error, Result};
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "senmo", version, about = "Multi-omics survival and cancer-type pipeline")]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "survival|classification")]
    task: Option<String>,
    /// Input directory (cohort TSVs for `ingest`, an ingested dataset otherwise).
    #[arg(long, global = true, value_name = "DIR")]
    data: Option<PathBuf>,
    /// Override any configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic cohort in the ingest layout.
    Synth,
    /// Preprocess cohort TSVs into a design matrix and manifest.
    Ingest,
    /// Cross-validated training with a held-out test split.
    Train,
    /// Score one checkpoint (or a directory of them).
    Evaluate {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
    },
    /// Average the predictions of every checkpoint in a directory.
    Ensemble {
        #[arg(long, value_name = "DIR")]
        checkpoint: PathBuf,
    },
    /// Continue training a checkpoint on new data.
    Finetune {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
    },
    /// Risk groups, Kaplan-Meier curves and pairwise log-rank tests.
    Stratify {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
    },
    /// Random hyperparameter search.
    Hpsearch {
        /// Base model, required for the fine-tuning search space.
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
}

fn overrides(cli: &Cli) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for s in &cli.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{s}`")))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    let path = |p: &Path| p.to_string_lossy().into_owned();
    if let Some(s) = cli.seed {
        out.push(("seed".into(), s.to_string()));
    }
    if let Some(t) = &cli.task {
        out.push(("task".into(), t.clone()));
    }
    if let Some(o) = &cli.out {
        out.push(("out_dir".into(), path(o)));
    }
    if let Some(d) = &cli.data {
        out.push(("data_dir".into(), path(d)));
    }
    Ok(out)
}

fn run(cli: &Cli) -> Result<Value> {
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides(cli)?)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    match &cli.command {
        Command::Synth => pipeline::synth_command(&cfg),
        Command::Ingest => pipeline::ingest_command(&cfg),
        Command::Train => pipeline::train_command(&cfg),
        Command::Evaluate { checkpoint } => pipeline::evaluate_command(&cfg, checkpoint),
        Command::Ensemble { checkpoint } => pipeline::ensemble_command(&cfg, checkpoint),
        Command::Finetune { checkpoint } => pipeline::finetune_command(&cfg, checkpoint),
        Command::Stratify { checkpoint } => pipeline::stratify_command(&cfg, checkpoint),
        Command::Hpsearch { checkpoint } => pipeline::hpsearch_command(&cfg, checkpoint.as_deref()),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors and 0 for --help/--version.
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("serializable summary"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            let err = json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{err}");
            ExitCode::from(1)
        }
    }
}
