//! The parallel architecture: one shared embedding table feeding four
//! independent branches, each a bidirectional LSTM followed by a two-unit
//! dense head with its own output activation (softmax, sigmoid, relu, tanh).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{EncodedSequence, Label, DEFAULT_SEQ_LEN, PAD_ID};
use crate::error::{shape_err, Error, Result};
use crate::lstm::{bidirectional_encode, bptt, BidirectionalCache, BidirectionalLayer, Gate};
use crate::tensor::matrix::{axpy, gemv_acc, gemv_t_acc, outer_acc};
use crate::tensor::{
    activate_grad_slice, activate_slice, ActivationKind, DropoutMask, Matrix, ParamSet, RngStream,
};

/// A branch is identified by its output activation.
pub type BranchKind = ActivationKind;

/// Fixed branch order used for storage, reductions and serialization.
pub const BRANCH_ORDER: [BranchKind; 4] = ActivationKind::ALL;

pub const INIT_SCALE: f64 = 0.05;
pub const FORGET_BIAS: f64 = 1.0;

/// Where a branch's own activation is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateMode {
    /// Sigmoid gates; the branch activation only sits on the output head.
    #[default]
    Standard,
    /// The branch activation also replaces the gate nonlinearity of the
    /// input/output/forget gates.
    BranchGates,
}

impl GateMode {
    pub fn gate_activation(self, branch: BranchKind) -> ActivationKind {
        match self {
            GateMode::Standard => ActivationKind::Sigmoid,
            GateMode::BranchGates => branch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// The softmax branch decides.
    #[default]
    PrimaryBranch,
    /// Sarcastic only with at least three of four votes.
    MajorityVote,
}

impl Aggregation {
    pub fn combine(self, labels: &[(BranchKind, Label)]) -> Label {
        match self {
            Aggregation::PrimaryBranch => labels
                .iter()
                .find(|(k, _)| *k == ActivationKind::Softmax)
                .map_or(Label::NonSarcastic, |(_, l)| *l),
            Aggregation::MajorityVote => {
                let votes = labels
                    .iter()
                    .filter(|(_, l)| *l == Label::Sarcastic)
                    .count();
                if 2 * votes > labels.len() {
                    Label::Sarcastic
                } else {
                    Label::NonSarcastic
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Embedding rows, including the pad and unknown ids.
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub seq_len: usize,
    pub gate_mode: GateMode,
    pub dropout_embed: f64,
    pub dropout_recurrent: f64,
    pub aggregation: Aggregation,
}

impl ModelConfig {
    pub fn new(vocab_size: usize, embed_dim: usize, hidden: usize) -> Self {
        Self {
            vocab_size,
            embed_dim,
            hidden,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.embed_dim == 0 || self.hidden == 0 || self.seq_len == 0 {
            return Err(Error::InvalidArgument(format!(
                "model dimensions must be positive: vocab={} embed={} hidden={} seq_len={}",
                self.vocab_size, self.embed_dim, self.hidden, self.seq_len
            )));
        }
        for rate in [self.dropout_embed, self.dropout_recurrent] {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::InvalidArgument(format!(
                    "dropout rate {rate} outside [0, 1)"
                )));
            }
        }
        Ok(())
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vocab_size: 2,
            embed_dim: 400,
            hidden: 64,
            seq_len: DEFAULT_SEQ_LEN,
            gate_mode: GateMode::Standard,
            dropout_embed: 0.6,
            dropout_recurrent: 0.4,
            aggregation: Aggregation::PrimaryBranch,
        }
    }
}

/// `V*E + 4 * (2 * 4 * (H*E + H*H + H) + 2*H + 2)`
pub fn parameter_count(vocab_size: usize, embed_dim: usize, hidden: usize) -> usize {
    let (v, e, h) = (vocab_size, embed_dim, hidden);
    let direction = 4 * (h * e + h * h + h);
    let branch = 2 * direction + 2 * h + 2;
    v * e + 4 * branch
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    /// vocab_size x embed_dim; row 0 is the pad vector and stays zero.
    pub vectors: Matrix,
}

impl EmbeddingTable {
    pub fn vocab_size(&self) -> usize {
        self.vectors.rows()
    }

    pub fn embed_dim(&self) -> usize {
        self.vectors.cols()
    }

    /// One row per id.
    pub fn lookup(&self, ids: &[u32]) -> Result<Matrix> {
        let e = self.embed_dim();
        let mut out = Matrix::zeros(ids.len(), e);
        for (t, &id) in ids.iter().enumerate() {
            let id = id as usize;
            if id >= self.vocab_size() {
                return Err(Error::InvalidArgument(format!(
                    "token id {id} outside vocabulary of {}",
                    self.vocab_size()
                )));
            }
            out.row_mut(t).copy_from_slice(self.vectors.row(id));
        }
        Ok(out)
    }
}

/// One parallel network. Gradient buffers reuse this type.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub kind: BranchKind,
    pub layer: BidirectionalLayer,
    /// 2 x hidden
    pub head_w: Matrix,
    pub head_b: Vec<f64>,
    pub dropout_embed: f64,
    pub dropout_recurrent: f64,
}

impl Branch {
    pub fn zeros(kind: BranchKind, embed: usize, hidden: usize, gate_mode: GateMode) -> Self {
        Self {
            kind,
            layer: BidirectionalLayer::zeros(hidden, embed, gate_mode.gate_activation(kind)),
            head_w: Matrix::zeros(2, hidden),
            head_b: vec![0.0; 2],
            dropout_embed: 0.0,
            dropout_recurrent: 0.0,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            kind: self.kind,
            layer: self.layer.zeros_like(),
            head_w: Matrix::zeros(2, self.hidden()),
            head_b: vec![0.0; 2],
            dropout_embed: self.dropout_embed,
            dropout_recurrent: self.dropout_recurrent,
        }
    }

    pub fn hidden(&self) -> usize {
        self.layer.hidden()
    }

    pub fn embed(&self) -> usize {
        self.layer.embed()
    }

    fn init(&mut self, rng: &mut RngStream) {
        for b in 0..self.block_count() {
            let name = self.block_name(b);
            let is_bias = name.ends_with(".b");
            for v in self.block_mut(b) {
                *v = if is_bias {
                    0.0
                } else {
                    rng.uniform(-INIT_SCALE, INIT_SCALE)
                };
            }
        }
        for dir in [&mut self.layer.forward, &mut self.layer.backward] {
            dir.gate_mut(Gate::Forget).b.fill(FORGET_BIAS);
        }
    }
}

/// Layer blocks (24) followed by `head.W` and `head.b`.
impl ParamSet for Branch {
    fn block_count(&self) -> usize {
        26
    }

    fn block_name(&self, index: usize) -> String {
        match index {
            24 => "head.W".into(),
            25 => "head.b".into(),
            i => self.layer.block_name(i),
        }
    }

    fn block(&self, index: usize) -> &[f64] {
        match index {
            24 => self.head_w.data(),
            25 => &self.head_b,
            i => self.layer.block(i),
        }
    }

    fn block_mut(&mut self, index: usize) -> &mut [f64] {
        match index {
            24 => self.head_w.data_mut(),
            25 => &mut self.head_b,
            i => self.layer.block_mut(i),
        }
    }
}

/// Intermediates of one branch forward pass.
#[derive(Debug, Clone)]
pub struct BranchCache {
    // one mask per real (unmasked) position, in order
    embed_masks: Vec<(usize, DropoutMask)>,
    encode: BidirectionalCache,
    pooled_mask: Option<DropoutMask>,
    head_input: Vec<f64>,
    scores: Vec<f64>,
    seq_len: usize,
}

impl BranchCache {
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
}

/// Embedding dropout → bidirectional encoding → pooled dropout → dense
/// head → head activation. Dropout only runs when `training` is set, and
/// masks are drawn for real positions only.
pub fn branch_forward(
    branch: &Branch,
    embedded: &Matrix,
    mask: &[bool],
    rng: Option<&mut RngStream>,
    training: bool,
) -> Result<(Vec<f64>, BranchCache)> {
    if embedded.cols() != branch.embed() {
        return Err(shape_err(format!(
            "embedded width {} for branch embed size {}",
            embedded.cols(),
            branch.embed()
        )));
    }
    let mut rng = if training { rng } else { None };
    let mut inputs = embedded.clone();
    let mut embed_masks = Vec::new();
    if let Some(r) = rng.as_deref_mut() {
        if branch.dropout_embed > 0.0 {
            for (t, &real) in mask.iter().enumerate() {
                if real {
                    let m = DropoutMask::sample(inputs.cols(), branch.dropout_embed, r)?;
                    m.apply(inputs.row_mut(t));
                    embed_masks.push((t, m));
                }
            }
        }
    }

    let (mut pooled, encode) = bidirectional_encode(&branch.layer, &inputs, mask)?;
    let mut pooled_mask = None;
    if let Some(r) = rng {
        if branch.dropout_recurrent > 0.0 {
            let m = DropoutMask::sample(pooled.len(), branch.dropout_recurrent, r)?;
            m.apply(&mut pooled);
            pooled_mask = Some(m);
        }
    }

    let mut scores = branch.head_b.clone();
    gemv_acc(&branch.head_w, &pooled, &mut scores);
    activate_slice(branch.kind, &mut scores);

    let cache = BranchCache {
        embed_masks,
        encode,
        pooled_mask,
        head_input: pooled,
        scores: scores.clone(),
        seq_len: embedded.rows(),
    };
    Ok((scores, cache))
}

/// Backward of [`branch_forward`] given the gradient with respect to the
/// two scores. Returns parameter gradients and the gradient with respect to
/// the embedded input rows.
pub fn branch_backward(
    branch: &Branch,
    cache: &BranchCache,
    d_scores: &[f64],
) -> Result<(Branch, Matrix)> {
    if d_scores.len() != 2 {
        return Err(shape_err("score gradient must have length 2"));
    }
    let mut grads = branch.zeros_like();
    let mut d_pre = vec![0.0; 2];
    activate_grad_slice(branch.kind, &cache.scores, d_scores, &mut d_pre);
    outer_acc(&mut grads.head_w, &d_pre, &cache.head_input);
    axpy(1.0, &d_pre, &mut grads.head_b);

    let mut d_pooled = vec![0.0; branch.hidden()];
    gemv_t_acc(&branch.head_w, &d_pre, &mut d_pooled);
    if let Some(m) = &cache.pooled_mask {
        m.apply(&mut d_pooled);
    }
    let (layer_grads, mut d_inputs) = bptt(&branch.layer, &cache.encode, &d_pooled)?;
    grads.layer = layer_grads;
    for (t, m) in &cache.embed_masks {
        m.apply(d_inputs.row_mut(*t));
    }
    debug_assert_eq!(d_inputs.rows(), cache.seq_len);
    Ok((grads, d_inputs))
}

/// Argmax over two scores; ties go to index 0.
pub fn argmax_label(scores: &[f64]) -> Label {
    if scores[1] > scores[0] {
        Label::Sarcastic
    } else {
        Label::NonSarcastic
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPrediction {
    pub kind: BranchKind,
    pub scores: [f64; 2],
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub per_branch: Vec<BranchPrediction>,
    pub final_label: Label,
}

impl Prediction {
    pub fn branch(&self, kind: BranchKind) -> Option<&BranchPrediction> {
        self.per_branch.iter().find(|p| p.kind == kind)
    }
}

/// Output of [`ParallelModel::forward`]. Caches are kept only in training
/// mode.
#[derive(Debug, Clone)]
pub struct ModelForward {
    pub prediction: Prediction,
    pub caches: Option<Vec<BranchCache>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParallelModel {
    pub embedding: EmbeddingTable,
    /// Always four, in [`BRANCH_ORDER`].
    pub branches: Vec<Branch>,
    pub aggregation: Aggregation,
    pub seq_len: usize,
    pub gate_mode: GateMode,
}

impl ParallelModel {
    /// All-zero model; mostly useful as a gradient buffer or a fixed point.
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let branches = BRANCH_ORDER
            .iter()
            .map(|&k| {
                let mut b = Branch::zeros(k, config.embed_dim, config.hidden, config.gate_mode);
                b.dropout_embed = config.dropout_embed;
                b.dropout_recurrent = config.dropout_recurrent;
                b
            })
            .collect();
        Ok(Self {
            embedding: EmbeddingTable {
                vectors: Matrix::zeros(config.vocab_size, config.embed_dim),
            },
            branches,
            aggregation: config.aggregation,
            seq_len: config.seq_len,
            gate_mode: config.gate_mode,
        })
    }

    /// Weights uniform in ±0.05, biases zero except the forget gates (1.0),
    /// pad row zero. The embedding draws from substream 0 of `seed` and
    /// branch `k` from substream `k + 1`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        let mut rng = RngStream::substream(seed, 0);
        for v in model.embedding.vectors.data_mut() {
            *v = rng.uniform(-INIT_SCALE, INIT_SCALE);
        }
        model.embedding.vectors.row_mut(PAD_ID as usize).fill(0.0);
        for (k, branch) in model.branches.iter_mut().enumerate() {
            branch.init(&mut RngStream::substream(seed, k as u64 + 1));
        }
        Ok(model)
    }

    pub fn config(&self) -> ModelConfig {
        let b = &self.branches[0];
        ModelConfig {
            vocab_size: self.vocab_size(),
            embed_dim: self.embed_dim(),
            hidden: self.hidden(),
            seq_len: self.seq_len,
            gate_mode: self.gate_mode,
            dropout_embed: b.dropout_embed,
            dropout_recurrent: b.dropout_recurrent,
            aggregation: self.aggregation,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.vocab_size()
    }

    pub fn embed_dim(&self) -> usize {
        self.embedding.embed_dim()
    }

    pub fn hidden(&self) -> usize {
        self.branches[0].hidden()
    }

    pub fn branch(&self, kind: BranchKind) -> &Branch {
        &self.branches[branch_index(kind)]
    }

    pub fn branch_mut(&mut self, kind: BranchKind) -> &mut Branch {
        &mut self.branches[branch_index(kind)]
    }

    /// Gradient buffer with this model's layout.
    pub fn zeros_like(&self) -> Self {
        Self {
            embedding: EmbeddingTable {
                vectors: Matrix::zeros(self.vocab_size(), self.embed_dim()),
            },
            branches: self.branches.iter().map(Branch::zeros_like).collect(),
            aggregation: self.aggregation,
            seq_len: self.seq_len,
            gate_mode: self.gate_mode,
        }
    }

    /// One shared embedding lookup, then every branch. `rngs` holds one
    /// dropout stream per branch and is only consulted when `training`.
    pub fn forward(
        &self,
        encoded: &EncodedSequence,
        mut rngs: Option<&mut [RngStream]>,
        training: bool,
    ) -> Result<ModelForward> {
        if encoded.mask.len() != encoded.ids.len() {
            return Err(shape_err("ids and mask differ in length"));
        }
        if let Some(r) = rngs.as_deref() {
            if r.len() != self.branches.len() {
                return Err(shape_err("need one dropout stream per branch"));
            }
        }
        let embedded = self.embedding.lookup(&encoded.ids)?;
        let mut per_branch = Vec::with_capacity(4);
        let mut caches = Vec::with_capacity(4);
        for (k, branch) in self.branches.iter().enumerate() {
            let rng = rngs.as_deref_mut().map(|r| &mut r[k]);
            let (scores, cache) = branch_forward(branch, &embedded, &encoded.mask, rng, training)?;
            per_branch.push(BranchPrediction {
                kind: branch.kind,
                scores: [scores[0], scores[1]],
                label: argmax_label(&scores),
            });
            caches.push(cache);
        }
        let labels: Vec<(BranchKind, Label)> =
            per_branch.iter().map(|p| (p.kind, p.label)).collect();
        Ok(ModelForward {
            prediction: Prediction {
                final_label: self.aggregation.combine(&labels),
                per_branch,
            },
            caches: training.then_some(caches),
        })
    }

    /// Evaluation-mode forward pass.
    pub fn predict(&self, encoded: &EncodedSequence) -> Result<Prediction> {
        Ok(self.forward(encoded, None, false)?.prediction)
    }
}

pub fn branch_index(kind: BranchKind) -> usize {
    BRANCH_ORDER
        .iter()
        .position(|&k| k == kind)
        .expect("branch kinds are exhaustive")
}

/// `embedding` first, then each branch's 26 blocks in branch order.
impl ParamSet for ParallelModel {
    fn block_count(&self) -> usize {
        1 + 26 * self.branches.len()
    }

    fn block_name(&self, index: usize) -> String {
        if index == 0 {
            return "embedding".into();
        }
        let b = &self.branches[(index - 1) / 26];
        format!("{}.{}", b.kind, b.block_name((index - 1) % 26))
    }

    fn block(&self, index: usize) -> &[f64] {
        if index == 0 {
            return self.embedding.vectors.data();
        }
        self.branches[(index - 1) / 26].block((index - 1) % 26)
    }

    fn block_mut(&mut self, index: usize) -> &mut [f64] {
        if index == 0 {
            return self.embedding.vectors.data_mut();
        }
        self.branches[(index - 1) / 26].block_mut((index - 1) % 26)
    }
}

/// Keras-style layer table with per-branch rows and parameter totals.
pub fn summary(model: &ParallelModel) -> String {
    let (v, e, h, l) = (
        model.vocab_size(),
        model.embed_dim(),
        model.hidden(),
        model.seq_len,
    );
    let rule = "-".repeat(72);
    let double = "=".repeat(72);
    let mut s = String::new();
    let _ = writeln!(s, "Model: pLSTM (4 parallel bidirectional LSTM branches)");
    let _ = writeln!(
        s,
        "vocab_size={v} embed_dim={e} hidden={h} seq_len={l} gate_mode={} aggregation={}",
        enum_name(&model.gate_mode),
        enum_name(&model.aggregation)
    );
    let _ = writeln!(s, "{rule}");
    let _ = writeln!(
        s,
        "{:<40}{:<20}{:>12}",
        "Layer (type)", "Output Shape", "Param #"
    );
    let _ = writeln!(s, "{double}");
    let row = |s: &mut String, name: &str, shape: String, n: usize| {
        let _ = writeln!(s, "{name:<40}{shape:<20}{n:>12}");
    };
    let embed_params = model.embedding.vectors.len();
    row(
        &mut s,
        "embedding (Embedding, shared)",
        format!("({l}, {e})"),
        embed_params,
    );
    let mut total = embed_params;
    for b in &model.branches {
        let k = b.kind;
        let per_dir: usize = (0..12).map(|i| b.layer.forward.block(i).len()).sum();
        let _ = writeln!(s, "{rule}");
        row(
            &mut s,
            &format!("{k}/dropout_embed ({})", b.dropout_embed),
            format!("({l}, {e})"),
            0,
        );
        row(
            &mut s,
            &format!("{k}/lstm_forward (LSTM)"),
            format!("({h},)"),
            per_dir,
        );
        row(
            &mut s,
            &format!("{k}/lstm_backward (LSTM)"),
            format!("({h},)"),
            per_dir,
        );
        row(
            &mut s,
            &format!("{k}/bidirectional_sum (Add)"),
            format!("({h},)"),
            0,
        );
        row(
            &mut s,
            &format!("{k}/dropout_recurrent ({})", b.dropout_recurrent),
            format!("({h},)"),
            0,
        );
        let head = b.head_w.len() + b.head_b.len();
        row(&mut s, &format!("{k}/dense (Dense)"), "(2,)".into(), head);
        row(&mut s, &format!("{k}/activation ({k})"), "(2,)".into(), 0);
        let branch_total = 2 * per_dir + head;
        row(
            &mut s,
            &format!("{k} branch total"),
            String::new(),
            branch_total,
        );
        total += branch_total;
    }
    let _ = writeln!(s, "{double}");
    let _ = writeln!(s, "Total params: {total}");
    let _ = writeln!(s, "Trainable params: {}", total - e);
    let _ = writeln!(s, "Non-trainable params: {e} (pad embedding row)");
    s
}

fn enum_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.as_str().map(str::to_string))
        .unwrap_or_default()
}
