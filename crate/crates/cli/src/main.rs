//! `sememe`: build a sememe knowledge base from a corpus and word vectors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};
use sememe_core::config::{Overrides, PipelineConfig, Profile};
use sememe_core::embeddings::AlignmentMode;
use sememe_core::pipeline;
use sememe_core::report::{render_report, ReportFormat};
use sememe_core::Error;

#[derive(Parser)]
#[command(name = "sememe", version, about = "Unsupervised sememe prediction pipeline")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for artifacts; overrides `paths.workdir`.
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    /// Preset defaults the config file is layered over.
    #[arg(long, global = true, value_parser = ["desk", "paper"])]
    profile: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Split, tokenize and index the corpus, then balance the index.
    Prepare,
    /// Fit a linear map from one language's vectors into another's.
    Align {
        source: String,
        target: String,
        #[arg(long, default_value = "orthogonal")]
        mode: AlignmentMode,
        /// Pair identically spelled words instead of reading a dictionary.
        #[arg(long)]
        identical: bool,
    },
    /// Train the autoencoder and initialise the sememe space.
    Pretrain,
    /// Jointly refine the autoencoder and the sememe space.
    Finetune,
    /// Report the sememes of a word.
    Predict {
        word: String,
        /// Number of sememes shown; defaults to `report.top`.
        #[arg(long)]
        top: Option<usize>,
        /// Description language, repeatable; defaults to `report.languages`.
        #[arg(long = "lang")]
        languages: Vec<String>,
        #[arg(long, default_value = "text", value_parser = ["text", "json"])]
        format: String,
        /// Write the report here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::DegenerateDictionary(_) | Error::TooFewPoints { .. } => 3,
        Error::TokenNotInSid(_) | Error::TokenNotInEmbeddings(_) => 4,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let overrides = Overrides {
        profile: cli.common.profile.as_deref().map(str::parse::<Profile>).transpose()?,
        seed: cli.common.seed,
        workdir: cli.common.workdir,
    };
    let cfg = PipelineConfig::load(cli.common.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Prepare => {
            let s = pipeline::prepare(&cfg)?;
            println!("sentences={} vocab={} sid_words={} capped={} dropped={}", s.sentences, s.vocab, s.sid_words, s.capped, s.dropped);
        }
        Command::Align { source, target, mode, identical } => {
            let map = pipeline::align(&cfg, &source, &target, mode, identical)?;
            println!("residual={}", map.residual);
        }
        Command::Pretrain | Command::Finetune => {
            let s = if matches!(cli.command, Command::Pretrain) { pipeline::pretrain(&cfg)? } else { pipeline::finetune(&cfg)? };
            let last = s.final_reconstruction.map(|v| v.to_string()).unwrap_or_else(|| "n/a".into());
            println!("words={} batches={} final_l_n={last}", s.words, s.batches);
        }
        Command::Predict { word, top, languages, format, output } => {
            let report = pipeline::predict(&cfg, &word, &languages)?;
            let text = render_report(&report, top.unwrap_or(cfg.report.top), format.parse::<ReportFormat>()?)?;
            match output {
                Some(p) => {
                    fs::write(&p, text).map_err(|e| Error::Io { path: p.clone(), source: e })?;
                    info!("report written to {}", p.display());
                }
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                Error::TokenNotInSid(w) => error!("word not found in SID: {w}"),
                other => error!("{other}"),
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
