//! Adam training of the four branches with categorical cross-entropy.
//!
//! Each branch optimizes its own loss with its own Adam state. The shared
//! embedding receives the sum of the branches' embedding gradients, added in
//! [`BRANCH_ORDER`] so single-threaded and parallel runs agree bitwise.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::{encode, EncodedSequence, Label, LabeledExample, Vocabulary, PAD_ID};
use crate::error::{shape_err, Error, Result};
use crate::model::{
    branch_backward, branch_forward, branch_index, Branch, BranchKind, ParallelModel, BRANCH_ORDER,
};
use crate::tensor::{LossKind, Matrix, ParamSet, RngStream};

/// Stream ids under the training seed.
const DROPOUT_STREAM: u64 = 16;
const SHUFFLE_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moments for every block of one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new<P: ParamSet + ?Sized>(config: AdamConfig, params: &P) -> Self {
        let zeros = |p: &P| -> Vec<Vec<f64>> {
            (0..p.block_count())
                .map(|b| vec![0.0; p.block(b).len()])
                .collect()
        };
        Self {
            config,
            m: zeros(params),
            v: zeros(params),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of `params` from `grads`.
pub fn adam_step<P, G>(state: &mut AdamState, params: &mut P, grads: &G) -> Result<()>
where
    P: ParamSet + ?Sized,
    G: ParamSet + ?Sized,
{
    if params.block_count() != state.m.len() || grads.block_count() != state.m.len() {
        return Err(shape_err("adam: block count mismatch"));
    }
    for b in 0..state.m.len() {
        let n = state.m[b].len();
        if params.block(b).len() != n || grads.block(b).len() != n {
            return Err(shape_err(format!("adam: block {b} size mismatch")));
        }
    }
    let AdamConfig {
        learning_rate: lr,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    state.t += 1;
    let bias1 = 1.0 - beta1.powi(state.t as i32);
    let bias2 = 1.0 - beta2.powi(state.t as i32);
    for b in 0..state.m.len() {
        let g = grads.block(b);
        let p = params.block_mut(b);
        let (m, v) = (&mut state.m[b], &mut state.v[b]);
        for i in 0..p.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}

/// An encoded input with its target class.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: EncodedSequence,
    pub label: Label,
}

/// Tokenizes and encodes labeled examples against `vocab`.
pub fn encode_samples(
    examples: &[LabeledExample],
    vocab: &Vocabulary,
    seq_len: usize,
) -> Result<Vec<Sample>> {
    examples
        .iter()
        .map(|ex| {
            Ok(Sample {
                input: encode(&ex.tokens(), vocab, seq_len)?,
                label: ex.label,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// 0 silent, 1 a line per branch every 100 epochs, 2 every epoch.
    pub verbose: u8,
    pub adam: AdamConfig,
    /// Global-norm clip per branch per batch; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub loss: LossKind,
    /// Run the four branch backward passes on separate threads.
    pub parallel: bool,
    /// Branches that take part in the run. Absent branches are neither
    /// evaluated nor updated.
    pub branches: Vec<BranchKind>,
    /// Participating branches whose parameters are not updated and which
    /// contribute nothing to the embedding gradient.
    pub frozen: Vec<BranchKind>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            batch_size: 32,
            seed: 0,
            verbose: 1,
            adam: AdamConfig::default(),
            clip_norm: Some(5.0),
            parallel: false,
            branches: BRANCH_ORDER.to_vec(),
            frozen: Vec::new(),
            loss: LossKind::default(),
        }
    }
}

impl TrainConfig {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail too
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "batch_size must be at least 1".into(),
            ));
        }
        if !(self.adam.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(
                "learning_rate must be positive".into(),
            ));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::InvalidArgument("clip_norm must be positive".into()));
            }
        }
        if self.branches.is_empty() {
            return Err(Error::InvalidArgument("no branches selected".into()));
        }
        Ok(())
    }

    fn participates(&self, kind: BranchKind) -> bool {
        self.branches.contains(&kind)
    }

    fn learns(&self, kind: BranchKind) -> bool {
        self.participates(kind) && !self.frozen.contains(&kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchEpochStats {
    pub branch: BranchKind,
    /// Mean training-mode cross-entropy over the epoch.
    pub loss: f64,
    /// Evaluation-mode accuracy on the training set after the epoch, percent.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    pub branches: Vec<BranchEpochStats>,
    pub seconds: f64,
}

impl EpochLog {
    pub fn branch(&self, kind: BranchKind) -> Option<&BranchEpochStats> {
        self.branches.iter().find(|b| b.branch == kind)
    }
}

/// Writes `epoch,branch,loss,accuracy,seconds`. With `timing` off the
/// seconds column is written as 0 so that reruns are byte-identical.
pub fn write_epoch_csv<W: Write>(logs: &[EpochLog], mut out: W, timing: bool) -> Result<()> {
    writeln!(out, "epoch,branch,loss,accuracy,seconds")?;
    for log in logs {
        let secs = if timing { log.seconds } else { 0.0 };
        for b in &log.branches {
            writeln!(
                out,
                "{},{},{:.6},{:.4},{:.3}",
                log.epoch, b.branch, b.loss, b.accuracy, secs
            )?;
        }
    }
    Ok(())
}

/// Gradients of one branch over one batch.
struct BranchBatch {
    loss_sum: f64,
    grads: Branch,
    // per token id, accumulated in example/position order
    embed: BTreeMap<u32, Vec<f64>>,
}

impl BranchBatch {
    fn squared_norm(&self) -> f64 {
        let mut s = 0.0;
        for b in 0..self.grads.block_count() {
            s += self.grads.block(b).iter().map(|v| v * v).sum::<f64>();
        }
        for row in self.embed.values() {
            s += row.iter().map(|v| v * v).sum::<f64>();
        }
        s
    }

    fn scale(&mut self, factor: f64) {
        for b in 0..self.grads.block_count() {
            self.grads
                .block_mut(b)
                .iter_mut()
                .for_each(|v| *v *= factor);
        }
        for row in self.embed.values_mut() {
            row.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

fn add_into(acc: &mut Branch, g: &Branch) {
    for b in 0..acc.block_count() {
        for (a, x) in acc.block_mut(b).iter_mut().zip(g.block(b)) {
            *a += x;
        }
    }
}

/// Forward + backward of one branch over a batch. The loss is the batch
/// mean, so each example's score gradient is scaled by `1 / batch_len`.
fn branch_batch(
    branch: &Branch,
    embedded: &[Matrix],
    batch: &[&Sample],
    mut rng: Option<&mut RngStream>,
    loss_kind: LossKind,
    backward: bool,
) -> Result<BranchBatch> {
    let n = batch.len() as f64;
    let mut out = BranchBatch {
        loss_sum: 0.0,
        grads: branch.zeros_like(),
        embed: BTreeMap::new(),
    };
    let training = rng.is_some();
    for (x, s) in embedded.iter().zip(batch) {
        let (scores, cache) =
            branch_forward(branch, x, &s.input.mask, rng.as_deref_mut(), training)?;
        let probs =
            Matrix::from_vec(1, 2, scores).map_err(|_| Error::NonFinite("branch scores"))?;
        let target = Matrix::from_vec(1, 2, s.label.one_hot().to_vec())?;
        let (loss, d_scores) = loss_kind.evaluate(&probs, &target)?;
        out.loss_sum += loss;
        if !backward {
            continue;
        }
        let d: Vec<f64> = d_scores.data().iter().map(|v| v / n).collect();
        let (g, d_embedded) = branch_backward(branch, &cache, &d)?;
        add_into(&mut out.grads, &g);
        for (t, (&id, &real)) in s.input.ids.iter().zip(&s.input.mask).enumerate() {
            if !real || id == PAD_ID {
                continue;
            }
            let row = out
                .embed
                .entry(id)
                .or_insert_with(|| vec![0.0; d_embedded.cols()]);
            for (a, v) in row.iter_mut().zip(d_embedded.row(t)) {
                *a += v;
            }
        }
    }
    Ok(out)
}

/// Per-branch mean losses and the full gradient (model layout) for one
/// batch, without clipping. With `rngs` present the batch runs in training
/// mode (dropout on); without, in evaluation mode. Used by the gradient
/// checker; [`train`] runs the same per-branch computation.
pub fn compute_gradients(
    model: &ParallelModel,
    batch: &[Sample],
    loss: LossKind,
    mut rngs: Option<&mut [RngStream]>,
) -> Result<(Vec<f64>, ParallelModel)> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let refs: Vec<&Sample> = batch.iter().collect();
    let embedded = embed_batch(model, &refs)?;
    let mut grads = model.zeros_like();
    let mut losses = Vec::with_capacity(model.branches.len());
    for (k, branch) in model.branches.iter().enumerate() {
        let rng = rngs.as_deref_mut().map(|r| &mut r[k]);
        let bb = branch_batch(branch, &embedded, &refs, rng, loss, true)?;
        losses.push(bb.loss_sum / batch.len() as f64);
        grads.branches[k] = bb.grads;
        for (id, row) in &bb.embed {
            for (a, v) in grads
                .embedding
                .vectors
                .row_mut(*id as usize)
                .iter_mut()
                .zip(row)
            {
                *a += v;
            }
        }
    }
    Ok((losses, grads))
}

/// Sum of the per-branch mean losses, matching [`compute_gradients`].
pub fn total_loss(
    model: &ParallelModel,
    batch: &[Sample],
    loss: LossKind,
    rngs: Option<&mut [RngStream]>,
) -> Result<f64> {
    let refs: Vec<&Sample> = batch.iter().collect();
    let embedded = embed_batch(model, &refs)?;
    let mut rngs = rngs;
    let mut total = 0.0;
    for (k, branch) in model.branches.iter().enumerate() {
        let rng = rngs.as_deref_mut().map(|r| &mut r[k]);
        total +=
            branch_batch(branch, &embedded, &refs, rng, loss, false)?.loss_sum / batch.len() as f64;
    }
    Ok(total)
}

fn embed_batch(model: &ParallelModel, batch: &[&Sample]) -> Result<Vec<Matrix>> {
    batch
        .iter()
        .map(|s| {
            if s.input.ids.len() != s.input.mask.len() {
                return Err(shape_err("ids and mask differ in length"));
            }
            model.embedding.lookup(&s.input.ids)
        })
        .collect()
}

/// One dropout stream per branch, derived from the training seed.
pub fn dropout_streams(seed: u64) -> Vec<RngStream> {
    (0..BRANCH_ORDER.len() as u64)
        .map(|k| RngStream::substream(seed, DROPOUT_STREAM + k))
        .collect()
}

/// The visiting order of epoch `epoch`: a pure function of `(seed, epoch)`.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    RngStream::substream(seed, SHUFFLE_STREAM + epoch as u64).shuffle(&mut idx);
    idx
}

/// Evaluation-mode accuracy (percent) of each branch.
pub fn epoch_metrics(model: &ParallelModel, samples: &[Sample]) -> Result<Vec<(BranchKind, f64)>> {
    if samples.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let mut correct = [0usize; 4];
    for s in samples {
        let p = model.predict(&s.input)?;
        for (k, b) in p.per_branch.iter().enumerate() {
            if b.label == s.label {
                correct[k] += 1;
            }
        }
    }
    Ok(model
        .branches
        .iter()
        .enumerate()
        .map(|(k, b)| (b.kind, 100.0 * correct[k] as f64 / samples.len() as f64))
        .collect())
}

/// Runs the epoch loop, printing progress to stdout per `config.verbose`.
pub fn train(
    model: &mut ParallelModel,
    samples: &[Sample],
    config: &TrainConfig,
) -> Result<Vec<EpochLog>> {
    train_with(model, samples, config, |log| {
        for line in progress_lines(log, config) {
            println!("{line}");
        }
    })
}

/// Progress lines for `log`: at verbose 1 on every 100th and the final
/// epoch, at verbose 2 on every epoch.
pub fn progress_lines(log: &EpochLog, config: &TrainConfig) -> Vec<String> {
    let due = match config.verbose {
        0 => false,
        1 => log.epoch.is_multiple_of(100) || log.epoch == config.epochs,
        _ => true,
    };
    if !due {
        return Vec::new();
    }
    log.branches
        .iter()
        .map(|b| {
            format!(
                "epoch {:>4}, branch {}, loss {:.4}, acc {:.2}%",
                log.epoch, b.branch, b.loss, b.accuracy
            )
        })
        .collect()
}

/// [`train`] with a callback after every epoch.
pub fn train_with(
    model: &mut ParallelModel,
    samples: &[Sample],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<Vec<EpochLog>> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut embed_adam = AdamState::new(config.adam, &model.embedding.vectors);
    let mut branch_adam: Vec<AdamState> = model
        .branches
        .iter()
        .map(|b| AdamState::new(config.adam, b))
        .collect();
    let mut rngs = dropout_streams(config.seed);
    let active: Vec<usize> = BRANCH_ORDER
        .iter()
        .filter(|k| config.participates(**k))
        .map(|&k| branch_index(k))
        .collect();

    let mut logs = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let start = Instant::now();
        let order = epoch_order(samples.len(), config.seed, epoch);
        let mut loss_sums = [0.0f64; 4];
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
            let embedded = embed_batch(model, &batch)?;
            let results = run_branches(model, &embedded, &batch, &mut rngs, &active, config)?;

            let mut embed_grad = Matrix::zeros(model.vocab_size(), model.embed_dim());
            let mut any_learner = false;
            for (k, mut bb) in results {
                loss_sums[k] += bb.loss_sum;
                if !config.learns(BRANCH_ORDER[k]) {
                    continue;
                }
                any_learner = true;
                if let Some(max) = config.clip_norm {
                    let norm = bb.squared_norm().sqrt();
                    if norm > max {
                        bb.scale(max / norm);
                    }
                }
                for (id, row) in &bb.embed {
                    for (a, v) in embed_grad.row_mut(*id as usize).iter_mut().zip(row) {
                        *a += v;
                    }
                }
                adam_step(&mut branch_adam[k], &mut model.branches[k], &bb.grads)?;
            }
            if any_learner {
                embed_grad.row_mut(PAD_ID as usize).fill(0.0);
                adam_step(&mut embed_adam, &mut model.embedding.vectors, &embed_grad)?;
            }
        }

        let accuracy = epoch_metrics(model, samples)?;
        let branches = active
            .iter()
            .map(|&k| BranchEpochStats {
                branch: BRANCH_ORDER[k],
                loss: loss_sums[k] / samples.len() as f64,
                accuracy: accuracy[k].1,
            })
            .collect();
        let log = EpochLog {
            epoch,
            branches,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&log);
        logs.push(log);
    }
    Ok(logs)
}

fn run_branches(
    model: &ParallelModel,
    embedded: &[Matrix],
    batch: &[&Sample],
    rngs: &mut [RngStream],
    active: &[usize],
    config: &TrainConfig,
) -> Result<Vec<(usize, BranchBatch)>> {
    let mut jobs: Vec<(usize, &Branch, &mut RngStream)> = Vec::with_capacity(active.len());
    for (k, rng) in rngs.iter_mut().enumerate() {
        if active.contains(&k) {
            jobs.push((k, &model.branches[k], rng));
        }
    }
    let backward = |kind: BranchKind| config.learns(kind);
    if config.parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = jobs
                .into_iter()
                .map(|(k, branch, rng)| {
                    let learn = backward(branch.kind);
                    scope.spawn(move || {
                        branch_batch(branch, embedded, batch, Some(rng), config.loss, learn)
                            .map(|b| (k, b))
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("branch worker panicked"))
                .collect()
        })
    } else {
        jobs.into_iter()
            .map(|(k, branch, rng)| {
                branch_batch(
                    branch,
                    embedded,
                    batch,
                    Some(rng),
                    config.loss,
                    backward(branch.kind),
                )
                .map(|b| (k, b))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::tensor::ActivationKind;

    fn scalar_state(lr: f64) -> AdamState {
        AdamState::new(
            AdamConfig {
                learning_rate: lr,
                ..AdamConfig::default()
            },
            &vec![vec![0.0]],
        )
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut theta = vec![vec![0.3, -1.7, 2.5]];
        let before = theta.clone();
        let mut st = AdamState::new(AdamConfig::default(), &theta);
        adam_step(&mut st, &mut theta, &vec![vec![0.0; 3]]).unwrap();
        assert_eq!(theta, before);
        assert_eq!(st.t, 1);
    }

    // m = 0.4, v = 0.016; bias-corrected 4 and 16; step 0.01 * 4 / (4 + 1e-8).
    #[test]
    fn scalar_hand_check() {
        let mut st = scalar_state(0.01);
        let mut theta = vec![vec![1.0]];
        adam_step(&mut st, &mut theta, &vec![vec![4.0]]).unwrap();
        let expect = 1.0 - 0.01 * 4.0 / (4.0 + 1e-8);
        assert!((theta[0][0] - expect).abs() < 1e-12);
        assert!((theta[0][0] - 0.99).abs() < 1e-6);
        assert!((st.m[0][0] - 0.4).abs() < 1e-12);
        assert!((st.v[0][0] - 0.016).abs() < 1e-12);
    }

    #[test]
    fn first_step_magnitude_is_learning_rate() {
        for g in [1e-3, 1.0, 1e3] {
            let mut st = scalar_state(0.01);
            let mut theta = vec![vec![0.0]];
            adam_step(&mut st, &mut theta, &vec![vec![g]]).unwrap();
            assert!(
                (theta[0][0].abs() - 0.01).abs() < 1e-6,
                "g={g}: {}",
                theta[0][0]
            );
        }
    }

    #[test]
    fn adam_shape_mismatch() {
        let mut st = scalar_state(0.01);
        assert!(adam_step(&mut st, &mut vec![vec![0.0, 1.0]], &vec![vec![0.0, 1.0]]).is_err());
        assert!(adam_step(&mut st, &mut vec![vec![0.0]], &vec![vec![0.0], vec![1.0]]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn second_moment_non_negative(grads in prop::collection::vec(-1e3f64..1e3, 1..50)) {
                let mut theta = vec![vec![0.0]];
                let mut st = AdamState::new(AdamConfig::default(), &theta);
                for g in grads {
                    adam_step(&mut st, &mut theta, &vec![vec![g]]).unwrap();
                    prop_assert!(st.v[0][0] >= 0.0);
                }
            }
        }
    }

    fn tiny_model(seed: u64) -> ParallelModel {
        ParallelModel::init(
            &ModelConfig {
                seq_len: 6,
                ..ModelConfig::new(12, 5, 4)
            },
            seed,
        )
        .unwrap()
    }

    // Class decided by which half of the vocabulary the tokens come from.
    fn toy_samples(n: usize, seed: u64) -> Vec<Sample> {
        let mut rng = RngStream::new(seed);
        (0..n)
            .map(|i| {
                let label = if i % 2 == 0 {
                    Label::Sarcastic
                } else {
                    Label::NonSarcastic
                };
                let base = if label == Label::Sarcastic { 2 } else { 7 };
                let len = 2 + (rng.next_u64() % 4) as usize;
                let mut ids = vec![PAD_ID; 6];
                let mut mask = vec![false; 6];
                for t in 0..len {
                    ids[t] = base + (rng.next_u64() % 5) as u32;
                    mask[t] = true;
                }
                Sample {
                    input: EncodedSequence {
                        ids,
                        mask,
                        length: len,
                    },
                    label,
                }
            })
            .collect()
    }

    fn quiet(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 4,
            seed: 3,
            verbose: 0,
            ..TrainConfig::default()
        }
    }

    fn strip_time(mut logs: Vec<EpochLog>) -> Vec<EpochLog> {
        logs.iter_mut().for_each(|l| l.seconds = 0.0);
        logs
    }

    #[test]
    fn zero_epochs_rejected() {
        let mut m = tiny_model(1);
        let r = train(&mut m, &toy_samples(8, 1), &quiet(0));
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn empty_dataset_rejected() {
        let mut m = tiny_model(1);
        assert!(matches!(
            train(&mut m, &[], &quiet(1)),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn one_epoch_one_log_per_branch() {
        let mut m = tiny_model(1);
        let logs = train(&mut m, &toy_samples(8, 1), &quiet(1)).unwrap();
        assert_eq!(logs.len(), 1);
        assert_eq!(logs[0].epoch, 1);
        let kinds: Vec<BranchKind> = logs[0].branches.iter().map(|b| b.branch).collect();
        assert_eq!(kinds, BRANCH_ORDER.to_vec());
        for b in &logs[0].branches {
            assert!((0.0..=100.0).contains(&b.accuracy));
            assert!(b.loss.is_finite());
        }
    }

    #[test]
    fn reruns_are_bitwise_identical() {
        let data = toy_samples(10, 2);
        let mut a = tiny_model(4);
        let mut b = tiny_model(4);
        let la = train(&mut a, &data, &quiet(5)).unwrap();
        let lb = train(&mut b, &data, &quiet(5)).unwrap();
        assert_eq!(strip_time(la), strip_time(lb));
        assert_eq!(a, b);
    }

    #[test]
    fn parallel_matches_serial() {
        let data = toy_samples(10, 2);
        let mut a = tiny_model(4);
        let mut b = tiny_model(4);
        let la = train(&mut a, &data, &quiet(4)).unwrap();
        let par = TrainConfig {
            parallel: true,
            ..quiet(4)
        };
        let lb = train(&mut b, &data, &par).unwrap();
        assert_eq!(strip_time(la), strip_time(lb));
        assert_eq!(a, b);
    }

    #[test]
    fn frozen_branches_do_not_disturb_the_others() {
        let data = toy_samples(12, 5);
        let frozen = TrainConfig {
            frozen: vec![ActivationKind::Relu, ActivationKind::Tanh],
            ..quiet(4)
        };
        let absent = TrainConfig {
            branches: vec![ActivationKind::Softmax, ActivationKind::Sigmoid],
            ..quiet(4)
        };
        let mut a = tiny_model(6);
        let mut b = tiny_model(6);
        let la = train(&mut a, &data, &frozen).unwrap();
        let lb = train(&mut b, &data, &absent).unwrap();
        for (x, y) in la.iter().zip(&lb) {
            for kind in [ActivationKind::Softmax, ActivationKind::Sigmoid] {
                assert_eq!(x.branch(kind), y.branch(kind));
            }
            assert!(y.branch(ActivationKind::Relu).is_none());
        }
        assert_eq!(
            a.branch(ActivationKind::Softmax),
            b.branch(ActivationKind::Softmax)
        );
        assert_eq!(a.embedding, b.embedding);
        // frozen parameters really stayed put
        let init = tiny_model(6);
        assert_eq!(
            a.branch(ActivationKind::Tanh),
            init.branch(ActivationKind::Tanh)
        );
    }

    #[test]
    fn pad_row_never_moves() {
        let data = toy_samples(10, 8);
        let mut m = tiny_model(2);
        train(&mut m, &data, &quiet(3)).unwrap();
        assert!(m.embedding.vectors.row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shuffle_is_a_function_of_seed_and_epoch() {
        assert_eq!(epoch_order(20, 1, 3), epoch_order(20, 1, 3));
        assert_ne!(epoch_order(20, 1, 3), epoch_order(20, 1, 4));
        assert_ne!(epoch_order(20, 1, 3), epoch_order(20, 2, 3));
        let mut sorted = epoch_order(20, 1, 3);
        sorted.sort_unstable();
        assert_eq!(sorted, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn metrics_examples() {
        let m = ParallelModel::zeros(&ModelConfig {
            seq_len: 6,
            ..ModelConfig::new(12, 5, 4)
        })
        .unwrap();
        // a zero model predicts non_sarcastic everywhere
        let mut data = toy_samples(2, 1);
        data[0].label = Label::NonSarcastic;
        data[1].label = Label::NonSarcastic;
        let acc = epoch_metrics(&m, &data).unwrap();
        assert!(acc.iter().all(|(_, a)| *a == 100.0));
        data[0].label = Label::Sarcastic;
        let acc = epoch_metrics(&m, &data).unwrap();
        assert!(acc.iter().all(|(_, a)| *a == 50.0));
        assert!(epoch_metrics(&m, &[]).is_err());
    }

    #[test]
    fn random_model_is_near_chance() {
        let m = tiny_model(17);
        let data = toy_samples(1000, 9);
        for (kind, acc) in epoch_metrics(&m, &data).unwrap() {
            if kind == ActivationKind::Softmax {
                assert!((40.0..=60.0).contains(&acc), "{kind}: {acc}");
            }
        }
    }

    #[test]
    fn epoch_csv_is_stable_without_timing() {
        let logs = vec![EpochLog {
            epoch: 1,
            branches: vec![BranchEpochStats {
                branch: ActivationKind::Softmax,
                loss: 0.5,
                accuracy: 75.0,
            }],
            seconds: 1.25,
        }];
        let mut a = Vec::new();
        write_epoch_csv(&logs, &mut a, false).unwrap();
        assert_eq!(
            String::from_utf8(a).unwrap(),
            "epoch,branch,loss,accuracy,seconds\n1,softmax,0.500000,75.0000,0.000\n"
        );
        let mut b = Vec::new();
        write_epoch_csv(&logs, &mut b, true).unwrap();
        assert!(String::from_utf8(b).unwrap().ends_with(",1.250\n"));
    }

    #[test]
    fn progress_cadence() {
        let log = |epoch| EpochLog {
            epoch,
            branches: vec![BranchEpochStats {
                branch: ActivationKind::Sigmoid,
                loss: 0.25,
                accuracy: 87.5,
            }],
            seconds: 0.0,
        };
        let cfg = |verbose| TrainConfig {
            epochs: 250,
            verbose,
            ..TrainConfig::default()
        };
        let due: Vec<usize> = (1..=250)
            .filter(|&e| !progress_lines(&log(e), &cfg(1)).is_empty())
            .collect();
        assert_eq!(due, vec![100, 200, 250]);
        assert!(progress_lines(&log(100), &cfg(0)).is_empty());
        assert_eq!(progress_lines(&log(7), &cfg(2)).len(), 1);
        assert_eq!(
            progress_lines(&log(100), &cfg(1))[0],
            "epoch  100, branch sigmoid, loss 0.2500, acc 87.50%"
        );
    }

    #[test]
    fn loss_decreases_on_toy_task() {
        let data = toy_samples(16, 4);
        let mut m = tiny_model(8);
        let cfg = TrainConfig {
            adam: AdamConfig::default(),
            ..quiet(40)
        };
        let logs = train(&mut m, &data, &cfg).unwrap();
        let first = logs[0].branch(ActivationKind::Softmax).unwrap().loss;
        let last = logs
            .last()
            .unwrap()
            .branch(ActivationKind::Softmax)
            .unwrap()
            .loss;
        assert!(last < first, "{first} -> {last}");
    }
}
