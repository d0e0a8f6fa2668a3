//! `jueju`: prepare a quatrain corpus, train the three generation blocks and
//! the language model, generate poems from keywords, evaluate and probe.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jueju::corpus::LengthClass;
use jueju::model::Inversion;
use jueju::trainer::BlockKind;

use commands::{Coded, Probe, EXIT_IO};
use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "jueju", version, about = "Quatrain generation with attention encoder-decoders")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// key = value run configuration; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    beam: Option<usize>,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true, value_parser = ["5", "7"])]
    length: Option<String>,
    #[arg(long, global = true, value_enum)]
    invert: Option<InvertArg>,
    /// Enforce tone requirements at every position, not just the tail
    #[arg(long, global = true)]
    strict_tones: bool,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    embed: Option<usize>,
    #[arg(long, global = true)]
    hidden: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InvertArg {
    None,
    Source,
    Target,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BlockArg {
    Spb,
    Cpb,
    Wpb,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse the corpus and write pairs, vocabulary, splits and stats
    Prepare {
        /// One quatrain per line, lines separated by `|`; defaults to the bundled sample
        corpus: Option<PathBuf>,
    },
    /// Train the line-to-line block
    TrainSpb,
    /// Train the two-line-context block
    TrainCpb,
    /// Train the character language model on single lines
    TrainLm,
    /// Continue training the SPB on keyword-to-line pairs
    FinetuneWpb,
    /// Generate quatrains from keywords
    Generate {
        keywords: Vec<String>,
        /// Poems per keyword, from successive first-line candidates
        #[arg(long)]
        poems: Option<usize>,
    },
    /// BLEU-2, ranking scores and compliance on the test split
    Evaluate,
    /// Probe a trained block
    Analyze {
        #[arg(long, value_enum, default_value = "spb")]
        block: BlockArg,
        #[command(subcommand)]
        probe: ProbeCmd,
    },
}

#[derive(Subcommand, Debug)]
enum ProbeCmd {
    /// Nearest lines by embedding cosine, next to longest-common-subsequence neighbours
    Knn {
        query: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
    /// Reset and update gate tendencies between adjacent characters
    Gates { line: String },
    /// Attention weights of a teacher-forced pass
    Attention { source: String, target: String },
    /// Embeddings of every training line
    Embeddings,
}

fn run_config(c: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p).map_err(|e| commands::coded(EXIT_IO, format!("{e:#}")))?,
        None => RunConfig::default(),
    };
    if let Some(v) = &c.out {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.beam {
        cfg.beam = v;
        cfg.n = cfg.n.min(v);
    }
    if let Some(v) = c.n {
        cfg.n = v;
    }
    if let Some(v) = c.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = &c.length {
        cfg.length = v.parse::<LengthClass>()?;
    }
    if let Some(v) = c.invert {
        cfg.inversion = match v {
            InvertArg::None => Inversion::None,
            InvertArg::Source => Inversion::Source,
            InvertArg::Target => Inversion::Target,
        };
    }
    if c.strict_tones {
        cfg.strict_tones = true;
    }
    if let Some(v) = c.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = c.embed {
        cfg.embed = v;
    }
    if let Some(v) = c.hidden {
        cfg.hidden = v;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = run_config(&cli.common)?;
    match cli.command {
        Command::Prepare { corpus } => {
            if corpus.is_some() {
                cfg.corpus = corpus;
            }
            cfg.validate()?;
            commands::prepare(&cfg)
        }
        Command::TrainSpb => commands::train_block(&cfg, BlockKind::Spb),
        Command::TrainCpb => commands::train_block(&cfg, BlockKind::Cpb),
        Command::TrainLm => commands::train_lm(&cfg),
        Command::FinetuneWpb => commands::finetune_wpb(&cfg),
        Command::Generate { keywords, poems } => {
            if let Some(p) = poems {
                cfg.poems_per_keyword = p;
            }
            cfg.validate()?;
            commands::generate(&cfg, &keywords)
        }
        Command::Evaluate => {
            cfg.validate()?;
            commands::evaluate(&cfg)
        }
        Command::Analyze { block, probe } => {
            let block = match block {
                BlockArg::Spb => BlockKind::Spb,
                BlockArg::Cpb => BlockKind::Cpb,
                BlockArg::Wpb => BlockKind::Wpb,
            };
            let probe = match probe {
                ProbeCmd::Knn { query, k } => Probe::Knn { query, k },
                ProbeCmd::Gates { line } => Probe::Gates { line },
                ProbeCmd::Attention { source, target } => Probe::Attention { source, target },
                ProbeCmd::Embeddings => Probe::Embeddings,
            };
            commands::analyze(&cfg, block, probe)
        }
    }
}

fn main() -> ExitCode {
    // usage errors exit 1; 2 is reserved for I/O failures
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<Coded>().map_or(1, |c| c.code);
            ExitCode::from(code as u8)
        }
    }
}
