//! `spanwise`: ingest corpora, serve sessions, apply and evaluate labels, and
//! run scripted annotation sessions.
//!
//! Exit codes: 0 success, 2 input error, 3 project state error.

mod commands;
mod evaluate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use spanwise_core::corpus::Split;
use spanwise_core::labelmodel::ModelKind;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] spanwise_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Input(String),
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error(transparent)]
    Serve(#[from] spanwise_service::ServeError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        use spanwise_core::Error as E;
        match self {
            Self::Core(E::NoSnapshot | E::StaleSnapshot | E::EmptySelection | E::Exhausted | E::FitFailed(_)) => 3,
            Self::Serve(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Model {
    Majority,
    Generative,
    Hmm,
}

impl From<Model> for ModelKind {
    fn from(m: Model) -> Self {
        match m {
            Model::Majority => ModelKind::Majority,
            Model::Generative => ModelKind::Generative,
            Model::Hmm => ModelKind::Hmm,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitArg {
    Train,
    Dev,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Dev => Split::Dev,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SynthKind {
    /// Two classes planted by known tag, embedding and surface rules.
    Planted,
    /// Document count, length and class mix of the BC5CDR corpus.
    Bc5cdr,
    /// Document count, length and class mix of the Yelp restaurants corpus.
    Yelp,
}

#[derive(Parser, Debug)]
#[command(name = "spanwise", version, about = "Span-level data programming by demonstration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a corpus with its sidecars, print statistics and write a new project file.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        emb_a: PathBuf,
        #[arg(long)]
        emb_b: PathBuf,
        #[arg(long)]
        sent: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Project file to create.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "generative")]
        model: Model,
        #[arg(long, default_value_t = spanwise_core::rules::DEFAULT_TAU)]
        tau: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Serve the HTTP API for a project; the project is saved on shutdown.
    Serve {
        #[arg(long)]
        project: PathBuf,
        #[arg(long, default_value_t = 8000)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Write probabilistic labels for a split as JSON lines.
    Apply {
        #[arg(long)]
        project: PathBuf,
        #[arg(long, value_enum)]
        split: SplitArg,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Export even if the selection changed since the last fit.
        #[arg(long)]
        force: bool,
    },
    /// Token-level precision, recall and F1 of predictions against gold.
    Evaluate {
        /// JSON lines with `id` and `hard` (or `gold`) label sequences.
        #[arg(long)]
        pred: PathBuf,
        /// JSON lines with `id` and `gold` (or `hard`) label sequences.
        #[arg(long)]
        gold: PathBuf,
        /// Label set file; by default the classes seen in either file.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Run a scripted annotation session and write its learning curve as CSV.
    Simulate {
        #[arg(long)]
        project: PathBuf,
        #[arg(long)]
        budget: usize,
        /// Defaults to the project's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Defaults to the project's model.
        #[arg(long, value_enum)]
        model: Option<Model>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic corpus with sidecars and a label set.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "planted")]
        kind: SynthKind,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 800)]
        train: usize,
        #[arg(long, default_value_t = 100)]
        dev: usize,
        #[arg(long, default_value_t = 100)]
        test: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest {
            corpus,
            emb_a,
            emb_b,
            sent,
            labels,
            out,
            model,
            tau,
            seed,
        } => commands::ingest(
            spanwise_core::corpus::CorpusPaths {
                corpus,
                emb_a,
                emb_b,
                sent,
                labels,
            },
            &out,
            model.into(),
            tau,
            seed,
        ),
        Command::Serve { project, port, host } => commands::serve(&project, &host, port),
        Command::Apply {
            project,
            split,
            out,
            force,
        } => commands::apply(&project, split.into(), out.as_deref(), force),
        Command::Evaluate {
            pred,
            gold,
            labels,
            json,
        } => evaluate::run(&pred, &gold, labels.as_deref(), json),
        Command::Simulate {
            project,
            budget,
            seed,
            model,
            out,
        } => commands::simulate(&project, budget, seed, model.map(Into::into), out.as_deref()),
        Command::Synth {
            out,
            kind,
            seed,
            train,
            dev,
            test,
            noise,
        } => commands::synth(&out, kind, seed, train, dev, test, noise),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
