//! `kanon`: build background-knowledge indexes, annotate corpora with
//! k-anonymity driven masks, and evaluate the result.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kanon_core::masker::{Strategy, DEFAULT_K, DEFAULT_MAX_ARITY, DEFAULT_PLACEHOLDER};

/// Exit status 1: bad input or configuration. Exit status 2: I/O.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<kanon_core::Error> for Failure {
    fn from(e: kanon_core::Error) -> Self {
        if e.is_io() {
            Failure::io(e.to_string())
        } else {
            Failure::validation(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(name = "kanon", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a KAIX1 index from a KG-JSONL file.
    BuildIndex(BuildIndexArgs),
    /// Predict spans to mask for every document of a corpus.
    Annotate(AnnotateArgs),
    /// Count the individuals matching a set of terms.
    Query(QueryArgs),
    /// Score predictions against gold annotations.
    Evaluate(EvaluateArgs),
    /// Write token-level BIO training data from predicted spans.
    ExportBio(ExportBioArgs),
    /// Entity-type and identifier-type summaries of the gold annotations.
    Stats(StatsArgs),
    /// Inter-annotator agreement on identifier types.
    Agreement(AgreementArgs),
}

#[derive(clap::Args)]
pub struct BuildIndexArgs {
    /// KG-JSONL input: one `{"id": int, "terms": [...]}` per line.
    #[arg(long, env = "KANON_KG")]
    pub kg: PathBuf,
    /// One word per line, `#` comments. Defaults to a built-in list.
    #[arg(long, env = "KANON_WHITELIST")]
    pub whitelist: Option<PathBuf>,
    /// Disable the whitelist entirely.
    #[arg(long, env = "KANON_NO_WHITELIST", conflicts_with = "whitelist")]
    pub no_whitelist: bool,
    /// Expand dates, person names, nationalities and locations into variants.
    #[arg(long, env = "KANON_VARIANTS")]
    pub variants: bool,
    /// TSV `country<TAB>demonym`.
    #[arg(long, env = "KANON_NATIONALITIES", requires = "variants")]
    pub nationalities: Option<PathBuf>,
    /// TSV `canonical<TAB>alias`.
    #[arg(long, env = "KANON_LOCATIONS", requires = "variants")]
    pub locations: Option<PathBuf>,
    #[arg(long, short, env = "KANON_OUT")]
    pub out: PathBuf,
}

#[derive(clap::Args)]
pub struct AnnotateArgs {
    #[arg(long, env = "KANON_INDEX")]
    pub index: PathBuf,
    #[arg(long, env = "KANON_CORPUS")]
    pub corpus: PathBuf,
    #[arg(long, env = "KANON_K", default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, env = "KANON_MAX_ARITY", default_value_t = DEFAULT_MAX_ARITY)]
    pub max_arity: usize,
    #[arg(long, env = "KANON_STRATEGY", default_value = "greedy", value_parser = parse_strategy)]
    pub strategy: Strategy,
    #[arg(long, env = "KANON_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = one per core, 1 = sequential).
    #[arg(long, env = "KANON_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// Per-document decision traces as JSONL.
    #[arg(long, env = "KANON_TRACE")]
    pub trace: Option<PathBuf>,
    /// Redacted texts as JSONL `{"doc_id", "text"}`.
    #[arg(long, env = "KANON_REDACTED")]
    pub redacted: Option<PathBuf>,
    #[arg(long, env = "KANON_PLACEHOLDER", default_value = DEFAULT_PLACEHOLDER)]
    pub placeholder: String,
    #[arg(long, short, env = "KANON_OUT")]
    pub out: PathBuf,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: kanon_core::Error| e.to_string())
}

#[derive(clap::Args)]
pub struct QueryArgs {
    #[arg(long, env = "KANON_INDEX")]
    pub index: PathBuf,
    #[arg(required = true)]
    pub terms: Vec<String>,
}

#[derive(clap::Args)]
pub struct EvaluateArgs {
    #[arg(long, env = "KANON_GOLD")]
    pub gold: PathBuf,
    #[arg(long, env = "KANON_PRED")]
    pub pred: PathBuf,
    /// JSON with `strip_chars` and `function_words`.
    #[arg(long, env = "KANON_TOLERANCE_CONFIG")]
    pub tolerance_config: Option<PathBuf>,
    /// Gold layer to score against when documents have several annotators.
    #[arg(long, env = "KANON_ANNOTATOR")]
    pub annotator: Option<String>,
}

#[derive(clap::Args)]
pub struct ExportBioArgs {
    #[arg(long, env = "KANON_CORPUS")]
    pub corpus: PathBuf,
    #[arg(long, short, env = "KANON_OUT")]
    pub out: PathBuf,
}

#[derive(clap::Args)]
pub struct StatsArgs {
    #[arg(long, env = "KANON_CORPUS")]
    pub corpus: PathBuf,
    #[arg(long, env = "KANON_JSON")]
    pub json: bool,
}

#[derive(clap::Args)]
pub struct AgreementArgs {
    #[arg(long, env = "KANON_CORPUS")]
    pub corpus: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::BuildIndex(a) => commands::build_index(&a),
        Command::Annotate(a) => commands::annotate(&a),
        Command::Query(a) => commands::query(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::ExportBio(a) => commands::export_bio(&a),
        Command::Stats(a) => commands::stats(&a),
        Command::Agreement(a) => commands::agreement(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
