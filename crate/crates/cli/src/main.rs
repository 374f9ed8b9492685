use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use plstm_cli::{
    cmd_benchmark, cmd_eval, cmd_stats, cmd_train, BenchmarkArgs, CliError, EvalArgs, StatsArgs,
    TrainArgs,
};

/// Parallel bidirectional LSTM sarcasm classifier.
#[derive(Debug, Parser)]
#[command(name = "plstm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Word frequencies and corpus size.
    Stats {
        /// Labeled (.tsv/.csv/.jsonl) or plain-text corpus.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 100)]
        top_k: usize,
        /// Frequency CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train all four branches and write a checkpoint with logs.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        /// TOML run configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, env = "PLSTM_SEED")]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, env = "PLSTM_OUT")]
        out: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        verbose: Option<u8>,
    },
    /// Precision, recall, F1 and accuracy of a checkpoint on labeled data.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Defaults to config.toml beside the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to vocab.txt beside the checkpoint.
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Directory for eval.csv; defaults to the checkpoint's directory.
        #[arg(long, env = "PLSTM_OUT")]
        out: Option<PathBuf>,
    },
    /// Cross-training benchmark over several corpora.
    Benchmark {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated corpus paths. A plain-text corpus takes its
        /// labels from `<stem>.labels` beside it.
        #[arg(long, value_delimiter = ',', required = true)]
        datasets: Vec<PathBuf>,
        #[arg(long, env = "PLSTM_OUT")]
        out: Option<PathBuf>,
        #[arg(long, env = "PLSTM_SEED")]
        seed: Option<u64>,
    },
}

fn run(command: Command) -> Result<(), CliError> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match command {
        Command::Stats {
            data,
            top_k,
            out: path,
        } => cmd_stats(
            &StatsArgs {
                data,
                top_k,
                out: path,
            },
            &mut out,
        ),
        Command::Train {
            data,
            config,
            seed,
            out: dir,
            epochs,
            hidden,
            verbose,
        } => cmd_train(
            &TrainArgs {
                data,
                config,
                seed,
                out: dir,
                epochs,
                hidden,
                verbose,
            },
            &mut out,
        ),
        Command::Eval {
            checkpoint,
            data,
            config,
            vocab,
            out: dir,
        } => cmd_eval(
            &EvalArgs {
                checkpoint,
                data,
                config,
                vocab,
                out: dir,
            },
            &mut out,
        ),
        Command::Benchmark {
            config,
            datasets,
            out: dir,
            seed,
        } => cmd_benchmark(
            &BenchmarkArgs {
                config,
                datasets,
                out: dir,
                seed,
            },
            &mut out,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors count as configuration errors
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
