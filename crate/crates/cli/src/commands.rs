use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use plstm::corpus::Fraction;
use plstm::corpus::{
    build_vocabulary, documents, frequency_table, full_frequency_table, load_label_file,
    load_labeled_dataset, load_plain_text, DatasetFormat, Document, LabeledExample, Vocabulary,
};
use plstm::eval::{
    benchmark_corpus, benchmark_table, evaluate, write_benchmark_csv, BenchmarkConfig,
    BenchmarkOutcome, Corpus, CorpusData,
};
use plstm::model::summary;
use plstm::train::{encode_samples, progress_lines, train_with, write_epoch_csv};
use plstm::ParallelModel;

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::{CliError, RunConfig};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const EPOCHS_FILE: &str = "epochs.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const EVAL_FILE: &str = "eval.csv";
pub const BENCHMARK_CSV: &str = "benchmark.csv";
pub const BENCHMARK_TABLE: &str = "benchmark.txt";

/// A corpus as read from disk: labeled rows or plain lines.
#[derive(Debug, Clone)]
pub enum Loaded {
    Labeled(Vec<LabeledExample>),
    Plain(Vec<Document>),
}

impl Loaded {
    pub fn documents(&self) -> Vec<Document> {
        match self {
            Loaded::Labeled(ex) => documents(ex),
            Loaded::Plain(docs) => docs.clone(),
        }
    }
}

/// `.tsv`, `.csv` and `.jsonl` files are labeled; anything else is read as
/// plain text, one document per line.
pub fn read_corpus(path: &Path) -> Result<Loaded, CliError> {
    let ctx = path.display();
    match DatasetFormat::from_path(path) {
        Some(fmt) => load_labeled_dataset(path, fmt)
            .map(Loaded::Labeled)
            .map_err(|e| CliError::data(ctx, e)),
        None => load_plain_text(path)
            .map(Loaded::Plain)
            .map_err(|e| CliError::data(ctx, e)),
    }
}

fn read_labeled(path: &Path) -> Result<Vec<LabeledExample>, CliError> {
    match read_corpus(path)? {
        Loaded::Labeled(ex) => Ok(ex),
        Loaded::Plain(_) => Err(CliError::Data(format!(
            "{}: expected a labeled .tsv, .csv or .jsonl file",
            path.display()
        ))),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::data(path.display(), e))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::data(dir.display(), e))
}

fn say(out: &mut dyn Write, line: impl std::fmt::Display) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(|e| CliError::data("stdout", e))
}

#[derive(Debug, Clone)]
pub struct StatsArgs {
    pub data: PathBuf,
    pub top_k: usize,
    pub out: PathBuf,
}

/// Word-frequency CSV plus a one-line corpus summary.
pub fn cmd_stats(args: &StatsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let docs = read_corpus(&args.data)?.documents();
    let full = full_frequency_table(&docs);
    let top = frequency_table(&docs, args.top_k);
    let mut csv = Vec::new();
    top.write_csv(&mut csv)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_file(&args.out, &csv)?;
    say(
        out,
        format_args!(
            "documents: {}, tokens: {}, vocabulary: {}",
            docs.len(),
            full.total_tokens,
            full.entries.len()
        ),
    )?;
    if let Some(first) = top.entries.first() {
        say(
            out,
            format_args!("most frequent: {:?} ({})", first.word, first.count),
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct TrainArgs {
    pub data: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub epochs: Option<usize>,
    pub hidden: Option<usize>,
    pub verbose: Option<u8>,
}

/// Trains on a labeled file and writes checkpoint, vocabulary, epoch CSV,
/// resolved config and model summary into the output directory.
pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut config = RunConfig::load_or_default(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(epochs) = args.epochs {
        config.epochs = epochs;
    }
    if let Some(hidden) = args.hidden {
        config.hidden = hidden;
    }
    if let Some(v) = args.verbose {
        config.verbose = v;
    }
    if args.data.is_some() {
        config.data = args.data.clone();
    }
    if args.out.is_some() {
        config.out = args.out.clone();
    }
    config.validate()?;
    let data = config
        .data
        .clone()
        .ok_or_else(|| CliError::Config("no training data given (--data or `data`)".into()))?;
    let dir = config
        .out
        .clone()
        .ok_or_else(|| CliError::Config("no output directory given (--out or `out`)".into()))?;

    let examples = read_labeled(&data)?;
    let vocab = build_vocabulary(&documents(&examples), config.min_count)?;
    let samples = encode_samples(&examples, &vocab, config.seq_len)?;
    let mut model = ParallelModel::init(&config.model_config(vocab.table_size()), config.seed)?;
    let train_config = config.train_config();

    let mut printed = Ok(());
    let logs = train_with(&mut model, &samples, &train_config, |log| {
        for line in progress_lines(log, &train_config) {
            if printed.is_ok() {
                printed = say(out, &line);
            }
        }
    })?;
    printed?;

    create_dir(&dir)?;
    config.checkpoint = Some(dir.join(CHECKPOINT_FILE));
    save_checkpoint(&model, dir.join(CHECKPOINT_FILE))
        .map_err(|e| CliError::data(dir.display(), e))?;
    vocab
        .save(dir.join(VOCAB_FILE))
        .map_err(|e| CliError::data(dir.display(), e))?;
    let mut csv = Vec::new();
    write_epoch_csv(&logs, &mut csv, config.log_timing)?;
    write_file(&dir.join(EPOCHS_FILE), &csv)?;
    write_file(&dir.join(CONFIG_FILE), config.to_toml().as_bytes())?;
    write_file(&dir.join(SUMMARY_FILE), summary(&model).as_bytes())?;

    if let Some(last) = logs.last() {
        let accs: Vec<String> = last
            .branches
            .iter()
            .map(|b| format!("{} {:.2}%", b.branch, b.accuracy))
            .collect();
        say(
            out,
            format_args!("final training accuracy: {}", accs.join(", ")),
        )?;
    }
    say(out, format_args!("wrote {}", dir.display()))
}

#[derive(Debug, Clone, Default)]
pub struct EvalArgs {
    pub checkpoint: PathBuf,
    pub data: PathBuf,
    /// Defaults to `config.toml` beside the checkpoint, then built-in defaults.
    pub config: Option<PathBuf>,
    /// Defaults to `vocab.txt` beside the checkpoint.
    pub vocab: Option<PathBuf>,
    /// Directory for `eval.csv`; defaults to the checkpoint's directory.
    pub out: Option<PathBuf>,
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new("")).join(name)
}

/// Per-branch precision, recall, F1 and accuracy of a saved model.
pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => {
            let beside = sibling(&args.checkpoint, CONFIG_FILE);
            if beside.is_file() {
                RunConfig::load(&beside)?
            } else {
                RunConfig::default()
            }
        }
    };
    let model = load_checkpoint(&args.checkpoint, &config.model_config(2))
        .map_err(|e| CliError::data(args.checkpoint.display(), e))?;
    let vocab_path = args
        .vocab
        .clone()
        .unwrap_or_else(|| sibling(&args.checkpoint, VOCAB_FILE));
    let vocab =
        Vocabulary::load(&vocab_path).map_err(|e| CliError::data(vocab_path.display(), e))?;
    if vocab.table_size() != model.vocab_size() {
        return Err(CliError::Data(format!(
            "{}: vocabulary needs {} embedding rows, checkpoint has {}",
            vocab_path.display(),
            vocab.table_size(),
            model.vocab_size()
        )));
    }
    let examples = read_labeled(&args.data)?;
    let samples = encode_samples(&examples, &vocab, model.seq_len)?;
    let report = evaluate(&model, &samples)?;

    let dir = args
        .out
        .clone()
        .unwrap_or_else(|| sibling(&args.checkpoint, ""));
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    if !dir.as_os_str().is_empty() {
        create_dir(&dir)?;
    }
    write_file(&dir.join(EVAL_FILE), &csv)?;
    say(out, &report)
}

#[derive(Debug, Clone, Default)]
pub struct BenchmarkArgs {
    pub config: Option<PathBuf>,
    pub datasets: Vec<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Labels for a plain-text corpus live beside it as `<stem>.labels`.
pub fn label_file_for(path: &Path) -> PathBuf {
    path.with_extension("labels")
}

fn corpus_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn load_for_benchmark(path: &Path) -> Result<Corpus, String> {
    let name = corpus_name(path);
    let data = match read_corpus(path).map_err(|e| e.to_string())? {
        Loaded::Labeled(ex) => CorpusData::Labeled(ex),
        Loaded::Plain(docs) => {
            let lf = label_file_for(path);
            let labels = if lf.is_file() {
                Some(load_label_file(&lf).map_err(|e| format!("{}: {e}", lf.display()))?)
            } else {
                None
            };
            CorpusData::Plain {
                documents: docs,
                labels,
            }
        }
    };
    Ok(Corpus { name, data })
}

/// Fold protocol over each dataset. A dataset that cannot be read or run is
/// reported as skipped; the command fails only if every dataset was skipped.
pub fn cmd_benchmark(args: &BenchmarkArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut config = RunConfig::load_or_default(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.out.is_some() {
        config.out = args.out.clone();
    }
    config.validate()?;
    if args.datasets.is_empty() {
        return Err(CliError::Config("no datasets given".into()));
    }
    let dir = config
        .out
        .clone()
        .ok_or_else(|| CliError::Config("no output directory given (--out or `out`)".into()))?;
    let bench = BenchmarkConfig {
        model: config.model_config(2),
        train: config.train_config(),
        folds: config.folds,
        train_fraction: Fraction::from_ratio(3, 2),
        min_count: config.min_count,
    };

    let mut outcomes = Vec::with_capacity(args.datasets.len());
    for path in &args.datasets {
        let outcome = match load_for_benchmark(path) {
            Ok(corpus) => {
                benchmark_corpus(&bench, &corpus).unwrap_or_else(|e| BenchmarkOutcome::Skipped {
                    dataset: corpus.name.clone(),
                    reason: e.to_string(),
                })
            }
            Err(reason) => BenchmarkOutcome::Skipped {
                dataset: corpus_name(path),
                reason,
            },
        };
        outcomes.push(outcome);
    }

    create_dir(&dir)?;
    let mut csv = Vec::new();
    write_benchmark_csv(&outcomes, &mut csv)?;
    write_file(&dir.join(BENCHMARK_CSV), &csv)?;
    let table = benchmark_table(&outcomes);
    write_file(&dir.join(BENCHMARK_TABLE), table.as_bytes())?;
    write!(out, "{table}").map_err(|e| CliError::data("stdout", e))?;

    if outcomes
        .iter()
        .any(|o| matches!(o, BenchmarkOutcome::Done(_)))
    {
        Ok(())
    } else {
        Err(CliError::Data("no dataset could be benchmarked".into()))
    }
}
