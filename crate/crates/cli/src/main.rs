//! `btsampler` — targeted sampling of monolingual sentences for
//! back-translation.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors. Warnings
//! go to stderr; output files carry only data, and every file-producing run
//! writes a `<out>.manifest.json` snapshot sufficient to reproduce its
//! outputs byte for byte.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use crate::config::Config;

#[derive(Parser)]
#[command(name = "btsampler", version, about = "Targeted sampling for back-translation")]
struct Cli {
    /// Seed for all pseudo-random draws.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Config file (key=value lines) overriding built-in defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a corpus with the n-gram oracle and write loss records.
    Score {
        /// Corpus to score.
        #[arg(long)]
        input: PathBuf,
        /// Training corpus for the oracle; defaults to the scored corpus.
        #[arg(long)]
        train: Option<PathBuf>,
        /// N-gram order.
        #[arg(long)]
        order: Option<usize>,
        /// Additive smoothing constant.
        #[arg(long)]
        smoothing: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate loss records into per-token statistics.
    Stats {
        #[arg(long)]
        records: PathBuf,
        /// Report row order.
        #[arg(long, value_enum, default_value_t = OrderByArg::MeanLossDesc)]
        order_by: OrderByArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two statistics tables token by token.
    Diff {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        retrained: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select difficult tokens from a statistics table.
    Difficulty {
        #[arg(long)]
        stats: PathBuf,
        #[arg(long, value_enum)]
        criterion: CriterionArg,
        /// Frequency threshold (freq criterion).
        #[arg(long)]
        eta: Option<u64>,
        /// Mean-loss threshold (mean-loss and mean-std criteria).
        #[arg(long)]
        mu: Option<f64>,
        /// Standard-deviation threshold (mean-std criterion).
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample sentences from a monolingual corpus.
    Sample {
        #[arg(long, value_enum)]
        algo: AlgoArg,
        /// Monolingual corpus to sample from.
        #[arg(long)]
        corpus: PathBuf,
        /// Number of sentences to sample.
        #[arg(long)]
        n: Option<usize>,
        /// Statistics table for computing the difficulty set inline.
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Difficulty criterion for --stats.
        #[arg(long, value_enum)]
        criterion: Option<CriterionArg>,
        #[arg(long)]
        eta: Option<u64>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
        /// Precomputed difficulty token list (alternative to --stats).
        #[arg(long)]
        difficulty: Option<PathBuf>,
        /// Loss records for occurrence-level sampling (ratio, context).
        #[arg(long)]
        records: Option<PathBuf>,
        /// Occurrence-loss threshold; defaults to mu.
        #[arg(long)]
        theta: Option<f64>,
        /// Bitext target side holding the difficult contexts (context algo).
        #[arg(long)]
        bitext_target: Option<PathBuf>,
        /// Context definition (context algo).
        #[arg(long, value_enum)]
        ctx: Option<CtxArg>,
        /// Window width for --ctx window.
        #[arg(long)]
        w: Option<usize>,
        /// Similarity measure (context algo).
        #[arg(long, value_enum)]
        sim: Option<SimArg>,
        /// Embedding table in word2vec text format (--sim emb).
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Similarity threshold (strictly exceeded to accept).
        #[arg(long)]
        s: Option<f64>,
        /// Subword join marker for --ctx subword.
        #[arg(long)]
        marker: Option<String>,
        /// Output prefix: writes `<out>.txt`, `<out>.prov.tsv`, `<out>.manifest.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Mix a real bitext with synthetic pairs at a real:syn ratio.
    Mix {
        #[arg(long)]
        real_source: PathBuf,
        #[arg(long)]
        real_target: PathBuf,
        #[arg(long)]
        syn_source: PathBuf,
        #[arg(long)]
        syn_target: PathBuf,
        /// Ratio of real to synthetic pairs, e.g. 1:4.
        #[arg(long)]
        ratio: String,
        /// Training epoch whose shuffle order to emit.
        #[arg(long, default_value_t = 0)]
        epoch: u64,
        /// Output prefix: writes `<out>.source`, `<out>.target`, `<out>.manifest.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the effective configuration as key=value lines.
    Config,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum AlgoArg {
    Random,
    Diffsampling,
    Ratio,
    Context,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CriterionArg {
    Freq,
    MeanLoss,
    MeanStd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CtxArg {
    Window,
    Subword,
    Sentence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SimArg {
    Match,
    Emb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OrderByArg {
    MeanLossDesc,
    FreqAsc,
}

/// A bad flag combination; distinguished from data errors for the exit code.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl std::error::Error for UsageError {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(message.into()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("usage error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path).map_err(|e| usage(format!("{e:#}")))?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.sampling.seed = seed;
    }
    match cli.command {
        Command::Score {
            input,
            train,
            order,
            smoothing,
            out,
        } => commands::score(&config, &input, train.as_deref(), order, smoothing, &out),
        Command::Stats {
            records,
            order_by,
            out,
        } => commands::stats(&config, &records, order_by, &out),
        Command::Diff {
            base,
            retrained,
            out,
        } => commands::diff(&config, &base, &retrained, &out),
        Command::Difficulty {
            stats,
            criterion,
            eta,
            mu,
            rho,
            out,
        } => commands::difficulty(&config, &stats, criterion, eta, mu, rho, &out),
        Command::Sample {
            algo,
            corpus,
            n,
            stats,
            criterion,
            eta,
            mu,
            rho,
            difficulty,
            records,
            theta,
            bitext_target,
            ctx,
            w,
            sim,
            embeddings,
            s,
            marker,
            out,
        } => commands::sample(
            &config,
            SampleArgs {
                algo,
                corpus,
                n,
                stats,
                criterion,
                eta,
                mu,
                rho,
                difficulty,
                records,
                theta,
                bitext_target,
                ctx,
                w,
                sim,
                embeddings,
                s,
                marker,
                out,
            },
        ),
        Command::Mix {
            real_source,
            real_target,
            syn_source,
            syn_target,
            ratio,
            epoch,
            out,
        } => commands::mix(
            &config,
            &real_source,
            &real_target,
            &syn_source,
            &syn_target,
            &ratio,
            epoch,
            &out,
        ),
        Command::Config => {
            print!("{}", config.dump());
            Ok(())
        }
    }
}

/// Flattened arguments of the `sample` subcommand.
struct SampleArgs {
    algo: AlgoArg,
    corpus: PathBuf,
    n: Option<usize>,
    stats: Option<PathBuf>,
    criterion: Option<CriterionArg>,
    eta: Option<u64>,
    mu: Option<f64>,
    rho: Option<f64>,
    difficulty: Option<PathBuf>,
    records: Option<PathBuf>,
    theta: Option<f64>,
    bitext_target: Option<PathBuf>,
    ctx: Option<CtxArg>,
    w: Option<usize>,
    sim: Option<SimArg>,
    embeddings: Option<PathBuf>,
    s: Option<f64>,
    marker: Option<String>,
    out: PathBuf,
}
