//! `spoilkit`: ingest, clean, label, review, split, export and evaluate.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use config::ProviderFlags;

#[derive(Debug, Parser)]
#[command(name = "spoilkit", version, about = "Spoiler QA dataset pipeline")]
pub struct Cli {
    /// TOML config file; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExportFormat {
    Extractive,
    Abstractive,
    PredictionsTemplate,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InputFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportFormatArg {
    Text,
    Csv,
    Jsonl,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read scraped dumps into one validated corpus.
    Ingest {
        /// SOURCE=PATH, where SOURCE is reddit, facebook or other. Repeatable.
        #[arg(long = "in", value_name = "SOURCE=PATH", required = true)]
        inputs: Vec<String>,
        /// Dump format; guessed from the extension when omitted.
        #[arg(long, value_enum)]
        format: Option<InputFormat>,
        /// Split titles of the form "title <DELIM> answer" when a record has no answer.
        #[arg(long, value_name = "DELIM")]
        split_on_delimiter: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write corpus statistics as JSON.
        #[arg(long)]
        stats_out: Option<PathBuf>,
    },
    /// Rewrite boilerplate answers and flag noisy ones.
    Clean {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Rules file; the bundled rules are used when omitted.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write one cleaning outcome per input post.
        #[arg(long)]
        outcomes_out: Option<PathBuf>,
    },
    /// Find answer spans in article text.
    Label {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Minimum fuzzy span score.
        #[arg(long)]
        tau: Option<f64>,
        /// Ambiguity margin between competing spans.
        #[arg(long)]
        delta: Option<f64>,
        /// Window length slack around the answer length, in tokens.
        #[arg(long)]
        window_slack: Option<usize>,
        /// Also write title tags.
        #[arg(long)]
        tags_out: Option<PathBuf>,
    },
    /// Seeded, source-stratified 8/1/1 train/validation/test split.
    Split {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write training or prediction-template files for one split part.
    Export {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        split: Option<PathBuf>,
        /// train, validation or test.
        #[arg(long, default_value = "test")]
        part: String,
        #[arg(long, value_enum, default_value = "extractive")]
        format: ExportFormat,
        /// Review decision log to apply.
        #[arg(long)]
        decisions: Option<PathBuf>,
        /// Keep posts flagged as toxic or opinion.
        #[arg(long)]
        include_flagged: bool,
        /// Leave out unreviewed spans instead of failing.
        #[arg(long)]
        allow_pending: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score prediction files against reference answers.
    Eval {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        part: String,
        /// [NAME=]PATH of a {id, prediction} JSONL file. Repeatable; NAME defaults to the file stem.
        #[arg(long)]
        predictions: Vec<String>,
        #[arg(long)]
        include_flagged: bool,
        #[command(flatten)]
        provider: ProviderFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render an evaluation report.
    Report {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormatArg,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the review queue over HTTP.
    ServeReview {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Decision log, created if missing.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        bind: Option<String>,
        /// Directory of static UI assets.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(commands::EXIT_VALIDATION),
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
