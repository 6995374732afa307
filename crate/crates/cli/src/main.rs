//! `sieve` command-line entry point.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 external-service failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sieve_core::{AnalyzedMode, ScorerSpec};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_EXTERNAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "sieve", version, about = "Passage retrieval and training-data refinery")]
pub struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,

    /// Pairs per request sent to a remote scorer.
    #[arg(long, global = true, default_value_t = 32, value_parser = clap::value_parser!(u32).range(1..))]
    pub batch_size: u32,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a BM25 index over a passage corpus.
    Index(IndexArgs),
    /// Retrieve top-k passages for each query.
    Search(SearchArgs),
    /// Match questions to passages: BM25, rerank, verify.
    Match(MatchArgs),
    /// Mine hard negatives for a pairs dataset.
    Mine(MineArgs),
    /// Filter noisy pairs.
    Denoise(DenoiseArgs),
    /// Convert NLI premise/hypothesis records into pairs.
    ConvertNli(ConvertNliArgs),
    /// Score a run against relevance judgments.
    Eval(EvalArgs),
    /// Print question and pair counts of a pairs file.
    Stats(StatsArgs),
    /// Export trainer-ready records.
    ExportTrain(ExportTrainArgs),
}

#[derive(Args, Debug)]
pub struct IndexArgs {
    /// Passage corpus JSONL.
    pub corpus: PathBuf,
    /// Lemma dictionary, `surface<TAB>lemma` per line.
    #[arg(long)]
    pub lemmas: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Analyzed::Lemma)]
    pub analyzed: Analyzed,
    #[arg(long, default_value_t = 1.2)]
    pub k1: f64,
    #[arg(long, default_value_t = 0.75)]
    pub b: f64,
    /// Prepend passage titles to the indexed text.
    #[arg(long)]
    pub use_title: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("backend").required(true).args(["index", "embeddings"]))]
pub struct SearchArgs {
    /// BM25 index directory.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Passage vector file; ids are read from the sibling `.ids` file.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// L2-normalize passage and query vectors at load time (cosine similarity).
    #[arg(long, requires = "embeddings")]
    pub normalize: bool,
    /// Questions JSONL for BM25, query vector file for dense search.
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    pub k: u32,
    #[arg(long, value_enum, default_value_t = OutputFormat::Jsonl)]
    pub format: OutputFormat,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct MatchArgs {
    #[arg(long)]
    pub questions: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub index: PathBuf,
    /// `oracle`, `file:PATH` or `remote:URL`.
    #[arg(long, default_value = "oracle", value_parser = parse_scorer)]
    pub scorer: ScorerSpec,
    #[arg(long, default_value = "oracle", value_parser = parse_scorer)]
    pub verifier: ScorerSpec,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// [default: 100]
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub bm25_top: Option<u32>,
    /// [default: 5]
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub rerank_top: Option<u32>,
    /// [default: 0.5]
    #[arg(long)]
    pub verify_threshold: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct MineArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long, default_value = "oracle", value_parser = parse_scorer)]
    pub scorer: ScorerSpec,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// [default: 10]
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub bm25_top: Option<u32>,
    /// [default: 0.5]
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DenoiseArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long, default_value = "oracle", value_parser = parse_scorer)]
    pub scorer: ScorerSpec,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Lemma dictionary used by the overlap filter and the oracle scorer.
    #[arg(long)]
    pub lemmas: Option<PathBuf>,
    /// Rejection report JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ConvertNliArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Run file, JSONL or TREC (chosen by extension).
    #[arg(long)]
    pub run: PathBuf,
    /// Pairs JSONL or TREC qrels (chosen by extension).
    #[arg(long)]
    pub qrels: PathBuf,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    pub k: u32,
    /// Row label in the printed table.
    #[arg(long, default_value = "run")]
    pub name: String,
    /// Report JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-question scores JSONL.
    #[arg(long)]
    pub per_question: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub pairs: Vec<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExportTrainArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long, value_enum, default_value_t = TrainFormat::DprJsonl)]
    pub format: TrainFormat,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Analyzed {
    Surface,
    Lemma,
}

impl From<Analyzed> for AnalyzedMode {
    fn from(a: Analyzed) -> Self {
        match a {
            Analyzed::Surface => AnalyzedMode::Surface,
            Analyzed::Lemma => AnalyzedMode::Lemma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Jsonl,
    Trec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrainFormat {
    #[value(name = "dpr_jsonl", alias = "dpr-jsonl")]
    DprJsonl,
}

fn parse_scorer(s: &str) -> Result<ScorerSpec, String> {
    s.parse().map_err(|e: sieve_core::Error| e.to_string())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<sieve_core::Error>() {
        Some(e) if e.is_external() => EXIT_EXTERNAL,
        _ => EXIT_DATA,
    }
}

/// The error chain joined by ": ", skipping causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut last = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !last.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
        last = text;
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
