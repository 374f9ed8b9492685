//! Confusion-matrix metrics and the cross-training benchmark.
//!
//! Metrics are kept as exact integer ratios and only rounded when rendered.
//! The benchmark's second accuracy column scores the last fold's model on the
//! whole corpus, training rows included, and is labeled accordingly.

use std::fmt;
use std::io::Write;

use crate::corpus::{
    build_vocabulary, documents, make_folds, Document, Fraction, Label, LabeledExample,
};
use crate::error::{Error, Result};
use crate::model::{BranchKind, ModelConfig, ParallelModel, BRANCH_ORDER};
use crate::train::{encode_samples, epoch_metrics, train, Sample, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub true_neg: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }
}

/// Counts with [`Label::Sarcastic`] as the positive class.
pub fn confusion(predictions: &[Label], truths: &[Label]) -> Result<ConfusionCounts> {
    if predictions.len() != truths.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} labels",
            predictions.len(),
            truths.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    let mut c = ConfusionCounts::default();
    for (p, t) in predictions.iter().zip(truths) {
        match (p, t) {
            (Label::Sarcastic, Label::Sarcastic) => c.true_pos += 1,
            (Label::Sarcastic, Label::NonSarcastic) => c.false_pos += 1,
            (Label::NonSarcastic, Label::Sarcastic) => c.false_neg += 1,
            (Label::NonSarcastic, Label::NonSarcastic) => c.true_neg += 1,
        }
    }
    Ok(c)
}

/// A non-negative fraction `num / den`; `0 / 0` reads as zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        if den == 0 {
            Self { num: 0, den: 1 }
        } else {
            Self { num, den }
        }
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Fixed four-decimal rendering, halves rounded up.
    pub fn render(self) -> String {
        let scaled = (20_000 * self.num as u128 + self.den as u128) / (2 * self.den as u128);
        format!("{}.{:04}", scaled / 10_000, scaled % 10_000)
    }
}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&self.render())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassificationReport {
    pub precision: Ratio,
    pub recall: Ratio,
    pub f1: Ratio,
    pub accuracy: Ratio,
}

/// Precision, recall, F1 and accuracy. F1 is `2tp / (2tp + fp + fn)`, which
/// equals the harmonic mean of precision and recall whenever that is defined.
pub fn classification_report(counts: &ConfusionCounts) -> Result<ClassificationReport> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::Empty("confusion counts"));
    }
    let tp = counts.true_pos;
    Ok(ClassificationReport {
        precision: Ratio::new(tp, tp + counts.false_pos),
        recall: Ratio::new(tp, tp + counts.false_neg),
        f1: Ratio::new(2 * tp, 2 * tp + counts.false_pos + counts.false_neg),
        accuracy: Ratio::new(tp + counts.true_neg, total),
    })
}

/// Harmonic mean of already-rounded precision and recall.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Per-branch reports plus the report of the aggregated prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub branches: Vec<(BranchKind, ClassificationReport)>,
    pub combined: ClassificationReport,
    pub examples: usize,
}

pub fn evaluate(model: &ParallelModel, samples: &[Sample]) -> Result<EvaluationReport> {
    if samples.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let truths: Vec<Label> = samples.iter().map(|s| s.label).collect();
    let mut per_branch: Vec<Vec<Label>> =
        vec![Vec::with_capacity(samples.len()); BRANCH_ORDER.len()];
    let mut combined = Vec::with_capacity(samples.len());
    for s in samples {
        let pred = model.predict(&s.input)?;
        for (k, bp) in pred.per_branch.iter().enumerate() {
            per_branch[k].push(bp.label);
        }
        combined.push(pred.final_label);
    }
    let branches = BRANCH_ORDER
        .iter()
        .zip(&per_branch)
        .map(|(&kind, preds)| Ok((kind, classification_report(&confusion(preds, &truths)?)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvaluationReport {
        branches,
        combined: classification_report(&confusion(&combined, &truths)?)?,
        examples: samples.len(),
    })
}

impl EvaluationReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "model,precision,recall,f1,accuracy")?;
        let rows = self
            .branches
            .iter()
            .map(|(k, r)| (format!("plstm+{k}"), r))
            .chain(std::iter::once(("plstm".to_string(), &self.combined)));
        for (name, r) in rows {
            writeln!(
                out,
                "{name},{},{},{},{}",
                r.precision, r.recall, r.f1, r.accuracy
            )?;
        }
        Ok(())
    }
}

impl fmt::Display for EvaluationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<20} {:>9} {:>9} {:>9} {:>9}",
            "Model", "Precision", "Recall", "F1-Score", "Accuracy"
        )?;
        let rows = self
            .branches
            .iter()
            .map(|(k, r)| (format!("pLSTM + {k}"), r))
            .chain(std::iter::once((
                "pLSTM (aggregate)".to_string(),
                &self.combined,
            )));
        for (name, r) in rows {
            writeln!(
                f,
                "{name:<20} {:>9} {:>9} {:>9} {:>9}",
                r.precision.render(),
                r.recall.render(),
                r.f1.render(),
                r.accuracy.render()
            )?;
        }
        write!(f, "{} examples", self.examples)
    }
}

/// A named corpus entering the benchmark.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub name: String,
    pub data: CorpusData,
}

#[derive(Debug, Clone)]
pub enum CorpusData {
    Labeled(Vec<LabeledExample>),
    /// Plain text, optionally paired with one label per document.
    Plain {
        documents: Vec<Document>,
        labels: Option<Vec<Label>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    /// Shape of each fold's model; `vocab_size` is replaced per corpus.
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub folds: usize,
    pub train_fraction: Fraction,
    pub min_count: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            folds: 5,
            train_fraction: Fraction::from_ratio(3, 2),
            min_count: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchBenchmark {
    pub branch: BranchKind,
    pub mean_train_acc: f64,
    pub entire_corpus_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    pub dataset: String,
    pub vocab_size: usize,
    pub branches: Vec<BranchBenchmark>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BenchmarkOutcome {
    Done(BenchmarkResult),
    Skipped { dataset: String, reason: String },
}

impl Corpus {
    fn labeled(&self) -> Result<std::result::Result<Vec<LabeledExample>, String>> {
        match &self.data {
            CorpusData::Labeled(ex) => Ok(Ok(ex.clone())),
            CorpusData::Plain { labels: None, .. } => {
                Ok(Err("plain text corpus without a label file".to_string()))
            }
            CorpusData::Plain {
                documents,
                labels: Some(labels),
            } => {
                if documents.len() != labels.len() {
                    return Err(Error::InvalidArgument(format!(
                        "{}: {} documents but {} labels",
                        self.name,
                        documents.len(),
                        labels.len()
                    )));
                }
                Ok(Ok(documents
                    .iter()
                    .zip(labels)
                    .map(|(d, &label)| LabeledExample {
                        doc: d.clone(),
                        label,
                    })
                    .collect()))
            }
        }
    }
}

/// Runs the fold protocol on one corpus: vocabulary over the whole corpus,
/// a fresh model per fold, mean training accuracy across folds, and the last
/// fold's model scored on every row of the corpus.
pub fn benchmark_corpus(config: &BenchmarkConfig, corpus: &Corpus) -> Result<BenchmarkOutcome> {
    let examples = match corpus.labeled()? {
        Ok(ex) => ex,
        Err(reason) => {
            return Ok(BenchmarkOutcome::Skipped {
                dataset: corpus.name.clone(),
                reason,
            })
        }
    };
    let vocab = build_vocabulary(&documents(&examples), config.min_count)?;
    let samples = encode_samples(&examples, &vocab, config.model.seq_len)?;
    let model_config = ModelConfig {
        vocab_size: vocab.table_size(),
        ..config.model.clone()
    };
    let plan = make_folds(
        samples.len(),
        config.folds,
        config.train_fraction,
        config.train.seed,
    )?;

    let mut train_sums = [0.0; 4];
    let mut last = None;
    for (f, fold) in plan.folds.iter().enumerate() {
        let seed = config.train.seed.wrapping_add(f as u64);
        let mut model = ParallelModel::init(&model_config, seed)?;
        let subset: Vec<Sample> = fold.train.iter().map(|&i| samples[i].clone()).collect();
        let fold_config = TrainConfig {
            seed,
            ..config.train.clone()
        };
        train(&mut model, &subset, &fold_config)?;
        for (k, (_, acc)) in epoch_metrics(&model, &subset)?.into_iter().enumerate() {
            train_sums[k] += acc;
        }
        last = Some(model);
    }
    let last = last.ok_or(Error::Empty("folds"))?;
    let whole = epoch_metrics(&last, &samples)?;
    let folds = plan.folds.len() as f64;
    Ok(BenchmarkOutcome::Done(BenchmarkResult {
        dataset: corpus.name.clone(),
        vocab_size: vocab.len(),
        branches: whole
            .into_iter()
            .enumerate()
            .map(|(k, (branch, acc))| BranchBenchmark {
                branch,
                mean_train_acc: train_sums[k] / folds,
                entire_corpus_acc: acc,
            })
            .collect(),
    }))
}

pub fn benchmark(config: &BenchmarkConfig, corpora: &[Corpus]) -> Result<Vec<BenchmarkOutcome>> {
    corpora
        .iter()
        .map(|c| benchmark_corpus(config, c))
        .collect()
}

pub fn write_benchmark_csv<W: Write>(outcomes: &[BenchmarkOutcome], mut out: W) -> Result<()> {
    writeln!(out, "dataset,V,branch,mean_train_acc,entire_corpus_acc")?;
    for o in outcomes {
        if let BenchmarkOutcome::Done(r) = o {
            for b in &r.branches {
                writeln!(
                    out,
                    "{},{},{},{:.2},{:.2}",
                    r.dataset, r.vocab_size, b.branch, b.mean_train_acc, b.entire_corpus_acc
                )?;
            }
        }
    }
    Ok(())
}

/// Aligned text table; skipped corpora get one line with their reason.
pub fn benchmark_table(outcomes: &[BenchmarkOutcome]) -> String {
    let mut s = format!(
        "{:<24} {:>7} {:<8} {:>15} {:>20}\n",
        "Dataset", "V", "Branch", "Mean train acc", "Entire-corpus acc"
    );
    for o in outcomes {
        match o {
            BenchmarkOutcome::Done(r) => {
                for b in &r.branches {
                    s += &format!(
                        "{:<24} {:>7} {:<8} {:>14.2}% {:>19.2}%\n",
                        r.dataset, r.vocab_size, b.branch, b.mean_train_acc, b.entire_corpus_acc
                    );
                }
            }
            BenchmarkOutcome::Skipped { dataset, reason } => {
                s += &format!("{dataset:<24} skipped: {reason}\n");
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Source;
    use crate::tensor::RngStream;
    use proptest::prelude::*;

    use Label::{NonSarcastic as N, Sarcastic as S};

    #[test]
    fn confusion_examples() {
        let c = confusion(&[S, S, N], &[S, S, N]).unwrap();
        assert_eq!(
            (c.true_pos, c.true_neg, c.false_pos, c.false_neg),
            (2, 1, 0, 0)
        );
        let c = confusion(&[S], &[N]).unwrap();
        assert_eq!(
            c,
            ConfusionCounts {
                false_pos: 1,
                ..Default::default()
            }
        );
        assert!(confusion(&[S], &[S, N]).is_err());
        assert!(matches!(confusion(&[], &[]), Err(Error::Empty(_))));
    }

    #[test]
    fn confusion_matches_tally() {
        let mut rng = RngStream::new(5);
        let mut draw = || {
            if rng.next_u64().is_multiple_of(2) {
                S
            } else {
                N
            }
        };
        let preds: Vec<Label> = (0..10_000).map(|_| draw()).collect();
        let truths: Vec<Label> = (0..10_000).map(|_| draw()).collect();
        let c = confusion(&preds, &truths).unwrap();
        let mut tally = [[0u64; 2]; 2];
        for i in 0..preds.len() {
            tally[preds[i].index()][truths[i].index()] += 1;
        }
        assert_eq!(c.true_pos, tally[1][1]);
        assert_eq!(c.false_pos, tally[1][0]);
        assert_eq!(c.false_neg, tally[0][1]);
        assert_eq!(c.true_neg, tally[0][0]);
    }

    fn counts(tp: u64, fp: u64, fneg: u64, tn: u64) -> ConfusionCounts {
        ConfusionCounts {
            true_pos: tp,
            false_pos: fp,
            false_neg: fneg,
            true_neg: tn,
        }
    }

    #[test]
    fn symmetric_report() {
        let r = classification_report(&counts(9, 1, 1, 9)).unwrap();
        for v in [r.precision, r.recall, r.f1, r.accuracy] {
            assert_eq!(v.render(), "0.9000");
        }
    }

    #[test]
    fn degenerate_precision() {
        let r = classification_report(&counts(0, 0, 5, 5)).unwrap();
        assert_eq!(r.precision.value(), 0.0);
        assert_eq!(r.recall.value(), 0.0);
        assert_eq!(r.f1.value(), 0.0);
        assert_eq!(r.accuracy.render(), "0.5000");
        assert!(classification_report(&counts(0, 0, 0, 0)).is_err());
    }

    #[test]
    fn f1_from_rounded_precision_and_recall() {
        let f = f1_score(0.99, 0.98);
        assert!((f - 2.0 * 0.9702 / 1.97).abs() < 1e-15);
        assert_eq!(format!("{f:.4}"), "0.9850");
        // 197 tp, 2 fp, 4 fn: P = 197/199, R = 197/201
        let r = classification_report(&counts(197, 2, 4, 0)).unwrap();
        assert!((r.f1.value() - f1_score(r.precision.value(), r.recall.value())).abs() < 1e-15);
    }

    #[test]
    fn half_up_rendering() {
        assert_eq!(Ratio::new(1, 8).render(), "0.1250");
        assert_eq!(Ratio::new(1, 20_000).render(), "0.0001");
        assert_eq!(Ratio::new(1, 20_001).render(), "0.0000");
        assert_eq!(Ratio::new(3, 3).render(), "1.0000");
        assert_eq!(Ratio::new(2, 3).render(), "0.6667");
    }

    proptest! {
        #[test]
        fn harmonic_mean_bound(tp in 0u64..500, fp in 0u64..500, fneg in 0u64..500, tn in 0u64..500) {
            prop_assume!(tp + fp + fneg + tn > 0);
            let r = classification_report(&counts(tp, fp, fneg, tn)).unwrap();
            let (lo, hi) = if r.precision <= r.recall { (r.precision, r.recall) } else { (r.recall, r.precision) };
            if tp > 0 {
                prop_assert!(lo <= r.f1 && r.f1 <= hi);
            } else {
                prop_assert_eq!(r.f1.num, 0);
            }
            prop_assert!(r.accuracy.num <= r.accuracy.den);
        }

        #[test]
        fn pipeline_matches_single_pass(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..200)) {
            let lab = |b: bool| if b { S } else { N };
            let preds: Vec<Label> = pairs.iter().map(|p| lab(p.0)).collect();
            let truths: Vec<Label> = pairs.iter().map(|p| lab(p.1)).collect();
            let r = classification_report(&confusion(&preds, &truths).unwrap()).unwrap();
            let (mut hit, mut tp, mut pp, mut ap) = (0u64, 0u64, 0u64, 0u64);
            for (p, t) in &pairs {
                hit += (p == t) as u64;
                tp += (*p && *t) as u64;
                pp += *p as u64;
                ap += *t as u64;
            }
            prop_assert_eq!(r.accuracy, Ratio::new(hit, pairs.len() as u64));
            prop_assert!(r.precision == Ratio::new(tp, pp) || pp == 0);
            prop_assert!(r.recall == Ratio::new(tp, ap) || ap == 0);
            // F1 as the cross-multiplied harmonic mean
            prop_assert_eq!(r.f1.num as u128 * (pp + ap) as u128, 2 * tp as u128 * r.f1.den as u128);
        }
    }

    // Sarcastic rows draw from words "a*", the rest from "b*".
    fn separable(n: usize, seed: u64) -> Vec<LabeledExample> {
        let mut rng = RngStream::new(seed);
        (0..n)
            .map(|i| {
                let label = if i % 2 == 0 { S } else { N };
                let prefix = if label == S { "a" } else { "b" };
                let len = 3 + (rng.next_u64() % 4) as usize;
                let text: Vec<String> = (0..len)
                    .map(|_| format!("{prefix}{}", rng.next_u64() % 6))
                    .collect();
                LabeledExample {
                    doc: Document {
                        id: i as u64 + 1,
                        text: text.join(" "),
                        source: Source::LabeledDialogue,
                    },
                    label,
                }
            })
            .collect()
    }

    fn small_config(epochs: usize) -> BenchmarkConfig {
        BenchmarkConfig {
            model: ModelConfig {
                embed_dim: 8,
                hidden: 8,
                seq_len: 8,
                ..ModelConfig::default()
            },
            train: TrainConfig {
                epochs,
                verbose: 0,
                seed: 11,
                ..TrainConfig::default()
            },
            ..BenchmarkConfig::default()
        }
    }

    #[test]
    fn separable_corpus_smoke_bound() {
        let corpus = Corpus {
            name: "synthetic".into(),
            data: CorpusData::Labeled(separable(200, 3)),
        };
        let BenchmarkOutcome::Done(r) = benchmark_corpus(&small_config(8), &corpus).unwrap() else {
            panic!("skipped");
        };
        assert_eq!(r.vocab_size, 12);
        assert_eq!(r.branches.len(), 4);
        for b in &r.branches {
            assert!((0.0..=100.0).contains(&b.mean_train_acc));
            assert!((0.0..=100.0).contains(&b.entire_corpus_acc));
        }
        let soft = &r.branches[0];
        assert!(
            soft.entire_corpus_acc >= soft.mean_train_acc - 10.0,
            "{soft:?}"
        );
    }

    #[test]
    fn benchmark_is_deterministic() {
        let corpus = Corpus {
            name: "tiny".into(),
            data: CorpusData::Labeled(separable(20, 9)),
        };
        let a = benchmark(&small_config(2), std::slice::from_ref(&corpus)).unwrap();
        let b = benchmark(&small_config(2), std::slice::from_ref(&corpus)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unlabeled_corpus_is_skipped() {
        let corpus = Corpus {
            name: "book".into(),
            data: CorpusData::Plain {
                documents: crate::corpus::parse_plain_text("one line\nanother line\n"),
                labels: None,
            },
        };
        let out = benchmark_corpus(&small_config(1), &corpus).unwrap();
        assert!(
            matches!(out, BenchmarkOutcome::Skipped { ref reason, .. } if reason.contains("label"))
        );
        let table = benchmark_table(&[out]);
        assert!(table.contains("book") && table.contains("skipped: "));
    }

    #[test]
    fn label_count_mismatch_is_an_error() {
        let corpus = Corpus {
            name: "book".into(),
            data: CorpusData::Plain {
                documents: crate::corpus::parse_plain_text("one\ntwo\n"),
                labels: Some(vec![S]),
            },
        };
        assert!(benchmark_corpus(&small_config(1), &corpus).is_err());
    }

    #[test]
    fn csv_layout() {
        let outcomes = vec![
            BenchmarkOutcome::Done(BenchmarkResult {
                dataset: "d".into(),
                vocab_size: 42,
                branches: vec![BranchBenchmark {
                    branch: BranchKind::Softmax,
                    mean_train_acc: 99.125,
                    entire_corpus_acc: 50.0,
                }],
            }),
            BenchmarkOutcome::Skipped {
                dataset: "e".into(),
                reason: "x".into(),
            },
        ];
        let mut buf = Vec::new();
        write_benchmark_csv(&outcomes, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("dataset,V,branch,mean_train_acc,entire_corpus_acc")
        );
        assert!(lines.next().unwrap().starts_with("d,42,softmax,99.1"));
        assert_eq!(lines.next(), None);
    }
}
