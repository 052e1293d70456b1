//! `gtnm`: extract method contexts from Java projects, train the recommender,
//! evaluate it, and suggest names.
//!
//! Exit status is 0 on success, 1 on a runtime failure, and 2 on a usage,
//! configuration, or input-compatibility error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Preset;

#[derive(Debug, Parser)]
#[command(name = "gtnm", version, about = "Method name recommendation from local, project, and doc contexts")]
struct Cli {
    /// JSON configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a Java project and write one JSON record per method.
    Extract(ExtractArgs),
    /// Report how often name subtokens occur in each context level.
    Stats(StatsArgs),
    /// Build the code and documentation vocabularies from records.
    BuildVocab(VocabArgs),
    /// Split records, train a model, and write checkpoints and a log.
    Train(TrainArgs),
    /// Score predictions against targets.
    Eval(EvalArgs),
    /// Recommend names for one method of a Java file.
    Suggest(SuggestArgs),
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long)]
    project: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Include method names from imported project files.
    #[arg(long)]
    crossfile: bool,
    /// Keep only methods with a Javadoc first sentence.
    #[arg(long)]
    require_doc: bool,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    records: Option<PathBuf>,
    /// JSON report; the table goes to standard output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VocabArgs {
    #[arg(long)]
    records: Option<PathBuf>,
    /// Directory receiving `code.vocab` and `doc.vocab`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    code_size: Option<usize>,
    #[arg(long)]
    doc_size: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    records: Option<PathBuf>,
    #[arg(long)]
    vocab_dir: Option<PathBuf>,
    /// Best checkpoint by validation loss.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Resumable state after the last epoch [default: <out>.state].
    #[arg(long)]
    state: Option<PathBuf>,
    /// Per-epoch JSON Lines log [default: <out>.log.jsonl].
    #[arg(long)]
    log: Option<PathBuf>,
    /// Also write the test split as JSON Lines.
    #[arg(long)]
    test_out: Option<PathBuf>,
    /// Continue from a state file written by an earlier run.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// `file` or `cross-project`.
    #[arg(long)]
    split_mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    warmup: Option<u64>,
    /// Turn off global gradient-norm clipping.
    #[arg(long)]
    no_clip: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Prediction dump with `target`, `prediction`, and optional `pcs`
    /// per line, instead of decoding with a model.
    #[arg(long, conflicts_with_all = ["checkpoint", "records"])]
    dump: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    vocab_dir: Option<PathBuf>,
    #[arg(long)]
    records: Option<PathBuf>,
    /// JSON report.
    #[arg(long)]
    out: PathBuf,
    /// Write the decoded predictions as a dump.
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long)]
    beam_width: Option<usize>,
}

#[derive(Debug, Args)]
struct SuggestArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    vocab_dir: Option<PathBuf>,
    #[arg(long)]
    file: PathBuf,
    /// Method name, or a line number inside the method.
    #[arg(long)]
    method: String,
    /// Project root for cross-file context [default: the file's directory].
    #[arg(long)]
    project: Option<PathBuf>,
    #[arg(long)]
    crossfile: bool,
    #[arg(long, default_value_t = 5)]
    top_k: usize,
    #[arg(long)]
    beam_width: Option<usize>,
}

/// Failure classes, mapped to exit codes 2 and 1.
#[derive(Debug)]
pub enum Fail {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<gtnm_core::Error> for Fail {
    fn from(e: gtnm_core::Error) -> Self {
        use gtnm_core::Error as E;
        match e {
            E::Config(_) | E::InvalidInput(_) | E::Corrupt(_) | E::Json(_) => Fail::Usage(e.to_string()),
            other => Fail::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for Fail {
    fn from(e: anyhow::Error) -> Self {
        Fail::Runtime(e)
    }
}

fn run(cli: Cli) -> Result<(), Fail> {
    let file = config::FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Extract(a) => commands::extract(&file, a),
        Command::Stats(a) => commands::stats(&file, a),
        Command::BuildVocab(a) => commands::build_vocab(&file, a),
        Command::Train(a) => commands::train(&file, a),
        Command::Eval(a) => commands::eval(&file, a),
        Command::Suggest(a) => commands::suggest(&file, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // Caps extraction and decoding parallelism.
    if let Some(n) = std::env::var("GTNM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Fail::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
