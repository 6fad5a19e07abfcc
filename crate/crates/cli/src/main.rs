mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

use config::{Config, ConfigFlags, Layers};

/// Reasoning-then-embed retrieval toolkit.
#[derive(Debug, Parser)]
#[command(name = "rankreason", version, about)]
struct Cli {
    #[command(flatten)]
    flags: ConfigFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Side {
    Query,
    Doc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Encode `{"id","text"}` JSONL into embedding records
    Encode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        side: Side,
        /// Output JSONL [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build an index file from a text corpus or from encoded records
    Index {
        /// Corpus JSONL encoded with the document template
        #[arg(
            long,
            conflicts_with = "embeddings",
            required_unless_present = "embeddings"
        )]
        corpus: Option<PathBuf>,
        /// Records written by `encode --side doc`
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Search the index with text or embedding queries, writing a TREC run
    Search {
        /// JSONL with `{"id","text"}` or `{"id","embedding"}` per line
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, default_value_t = rankreason::eval::DEFAULT_K)]
        k: usize,
        /// Run file [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "rankreason")]
        tag: String,
    },
    /// Score `{"positives","negatives","tau"?,"output"?}` JSONL records
    Reward {
        #[arg(long)]
        input: PathBuf,
        /// Output JSONL [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stage-weighted training loss for `{"query","positive","negatives",...}` JSONL
    Loss {
        #[arg(long)]
        input: PathBuf,
        /// Output JSONL [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run GRPO on the synthetic environment and write a per-iteration CSV
    ToyTrain {
        /// CSV [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the synthetic environment as index, queries and qrels
    ToyExport {
        #[arg(long)]
        out: PathBuf,
    },
    /// nDCG@k of a TREC run against qrels
    Eval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long, default_value_t = rankreason::eval::DEFAULT_K)]
        k: usize,
        /// Whitespace-separated `query_id task` lines [default: one task]
        #[arg(long)]
        task_map: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
        format: ReportFormat,
        /// Also write the JSON report here
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
    /// Print the resolved configuration with the source of every value
    ShowConfig,
    /// Regenerate the reference pages, or check them for drift
    Docs {
        #[arg(long, default_value = "docs")]
        out: PathBuf,
        #[arg(long)]
        check: bool,
    },
}

const EXIT_INPUT: u8 = 1;
const EXIT_BACKEND: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<rankreason::Error>() {
        Some(e) if e.is_backend() => EXIT_BACKEND,
        Some(e) if e.is_invariant() => EXIT_INVARIANT,
        _ => EXIT_INPUT,
    }
}

fn run(cli: Cli) -> Result<()> {
    let layers = Layers::load(&cli.flags)?;
    if let Command::ShowConfig = cli.command {
        Config::from_layers(&layers)?;
        print!("{}", layers.render());
        return Ok(());
    }
    let config = Config::from_layers(&layers)?;
    match cli.command {
        Command::Encode { input, side, out } => {
            commands::encode::run(&config, &input, side, out.as_deref())
        }
        Command::Index { corpus, embeddings } => {
            commands::index::run(&config, corpus.as_deref(), embeddings.as_deref())
        }
        Command::Search {
            queries,
            k,
            out,
            tag,
        } => commands::search::run(&config, &queries, k, out.as_deref(), &tag),
        Command::Reward { input, out } => commands::reward::run(&config, &input, out.as_deref()),
        Command::Loss { input, out } => commands::loss::run(&config, &input, out.as_deref()),
        Command::ToyTrain { out } => commands::toy::train(&config, out.as_deref()),
        Command::ToyExport { out } => commands::toy::export(&config, &out),
        Command::Eval {
            run,
            qrels,
            k,
            task_map,
            format,
            json_out,
        } => commands::eval::run(
            &run,
            &qrels,
            k,
            task_map.as_deref(),
            format,
            json_out.as_deref(),
        ),
        Command::Docs { out, check } => commands::docs::run(&out, check),
        Command::ShowConfig => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
