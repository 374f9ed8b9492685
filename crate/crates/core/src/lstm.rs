//! Bidirectional LSTM layer with backpropagation through time.
//!
//! Gate equations, per time step with input `x` and previous state
//! `(h_prev, c_prev)`:
//!
//! ```text
//! i  = g(W_i x + U_i h_prev + b_i)
//! o  = g(W_o x + U_o h_prev + b_o)
//! f  = g(W_f x + U_f h_prev + b_f)
//! c~ = tanh(W_n x + U_n h_prev + b_n)
//! c  = f * c_prev + i * c~
//! h  = o * tanh(c)
//! ```
//!
//! `g` is the cell's gate activation (sigmoid unless the branch runs in
//! literal gate mode). The two directions of a layer are combined by summing
//! their final hidden states.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::tensor::matrix::{axpy, gemv_acc, gemv_t_acc, outer_acc};
use crate::tensor::{activate_grad_slice, activate_slice, ActivationKind, Matrix, ParamSet};

/// Affine map feeding one gate.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    /// hidden x embed
    pub w: Matrix,
    /// hidden x hidden
    pub u: Matrix,
    pub b: Vec<f64>,
}

impl GateParams {
    pub fn zeros(hidden: usize, embed: usize) -> Self {
        Self {
            w: Matrix::zeros(hidden, embed),
            u: Matrix::zeros(hidden, hidden),
            b: vec![0.0; hidden],
        }
    }

    fn pre_activation(&self, x: &[f64], h_prev: &[f64]) -> Vec<f64> {
        let mut z = self.b.clone();
        gemv_acc(&self.w, x, &mut z);
        gemv_acc(&self.u, h_prev, &mut z);
        z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gate {
    Input,
    Output,
    Forget,
    Candidate,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Output, Gate::Forget, Gate::Candidate];

    pub fn name(self) -> &'static str {
        match self {
            Gate::Input => "input",
            Gate::Output => "output",
            Gate::Forget => "forget",
            Gate::Candidate => "candidate",
        }
    }
}

/// Parameters of one LSTM direction. Gradient buffers reuse this type.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    pub input: GateParams,
    pub output: GateParams,
    pub forget: GateParams,
    pub candidate: GateParams,
    pub gate_activation: ActivationKind,
}

impl LstmCellParams {
    pub fn zeros(hidden: usize, embed: usize, gate_activation: ActivationKind) -> Self {
        Self {
            input: GateParams::zeros(hidden, embed),
            output: GateParams::zeros(hidden, embed),
            forget: GateParams::zeros(hidden, embed),
            candidate: GateParams::zeros(hidden, embed),
            gate_activation,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.hidden(), self.embed(), self.gate_activation)
    }

    pub fn hidden(&self) -> usize {
        self.input.b.len()
    }

    pub fn embed(&self) -> usize {
        self.input.w.cols()
    }

    pub fn gate(&self, gate: Gate) -> &GateParams {
        match gate {
            Gate::Input => &self.input,
            Gate::Output => &self.output,
            Gate::Forget => &self.forget,
            Gate::Candidate => &self.candidate,
        }
    }

    pub fn gate_mut(&mut self, gate: Gate) -> &mut GateParams {
        match gate {
            Gate::Input => &mut self.input,
            Gate::Output => &mut self.output,
            Gate::Forget => &mut self.forget,
            Gate::Candidate => &mut self.candidate,
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.embed() {
            return Err(shape_err(format!(
                "input of length {} for embed size {}",
                x.len(),
                self.embed()
            )));
        }
        Ok(())
    }
}

/// Block order: for each gate (input, output, forget, candidate) its W, U, b.
impl ParamSet for LstmCellParams {
    fn block_count(&self) -> usize {
        12
    }

    fn block_name(&self, index: usize) -> String {
        let part = ["W", "U", "b"][index % 3];
        format!("{}.{part}", Gate::ALL[index / 3].name())
    }

    fn block(&self, index: usize) -> &[f64] {
        let g = self.gate(Gate::ALL[index / 3]);
        match index % 3 {
            0 => g.w.data(),
            1 => g.u.data(),
            _ => &g.b,
        }
    }

    fn block_mut(&mut self, index: usize) -> &mut [f64] {
        let g = self.gate_mut(Gate::ALL[index / 3]);
        match index % 3 {
            0 => g.w.data_mut(),
            1 => g.u.data_mut(),
            _ => &mut g.b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Everything a time step needs for its backward pass.
#[derive(Debug, Clone)]
struct StepCache {
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    o: Vec<f64>,
    n: Vec<f64>,
    tanh_c: Vec<f64>,
}

fn step(params: &LstmCellParams, x: &[f64], prev: &LstmState) -> (LstmState, StepCache) {
    let act = params.gate_activation;
    let mut i = params.input.pre_activation(x, &prev.h);
    let mut o = params.output.pre_activation(x, &prev.h);
    let mut f = params.forget.pre_activation(x, &prev.h);
    let mut n = params.candidate.pre_activation(x, &prev.h);
    activate_slice(act, &mut i);
    activate_slice(act, &mut o);
    activate_slice(act, &mut f);
    activate_slice(ActivationKind::Tanh, &mut n);

    let hidden = i.len();
    let mut c = Vec::with_capacity(hidden);
    let mut tanh_c = Vec::with_capacity(hidden);
    let mut h = Vec::with_capacity(hidden);
    for j in 0..hidden {
        let cj = f[j] * prev.c[j] + i[j] * n[j];
        let tj = cj.tanh();
        c.push(cj);
        tanh_c.push(tj);
        h.push(o[j] * tj);
    }
    let cache = StepCache {
        h_prev: prev.h.clone(),
        c_prev: prev.c.clone(),
        i,
        f,
        o,
        n,
        tanh_c,
    };
    (LstmState { h, c }, cache)
}

/// One LSTM time step.
pub fn cell_step(params: &LstmCellParams, x: &[f64], prev: &LstmState) -> Result<LstmState> {
    params.check_input(x)?;
    let hidden = params.hidden();
    if prev.h.len() != hidden || prev.c.len() != hidden {
        return Err(shape_err(format!(
            "state of size ({}, {}) for hidden size {hidden}",
            prev.h.len(),
            prev.c.len()
        )));
    }
    Ok(step(params, x, prev).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn visit_order(self, len: usize) -> Box<dyn Iterator<Item = usize>> {
        match self {
            Direction::Forward => Box::new(0..len),
            Direction::Backward => Box::new((0..len).rev()),
        }
    }
}

/// Per-call cache of a directional pass. Steps are stored in sequence order;
/// masked steps hold `None`.
#[derive(Debug, Clone)]
pub struct DirectionalCache {
    direction: Direction,
    inputs: Matrix,
    steps: Vec<Option<StepCache>>,
}

impl DirectionalCache {
    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct DirectionalPass {
    /// Hidden output at every position, in sequence order. A masked position
    /// repeats the state carried through it.
    pub outputs: Vec<Vec<f64>>,
    pub final_state: LstmState,
    pub cache: DirectionalCache,
}

fn check_sequence(params: &LstmCellParams, sequence: &Matrix, mask: &[bool]) -> Result<()> {
    if sequence.rows() == 0 {
        return Err(Error::Empty("sequence"));
    }
    if sequence.cols() != params.embed() {
        return Err(shape_err(format!(
            "sequence width {} for embed size {}",
            sequence.cols(),
            params.embed()
        )));
    }
    if mask.len() != sequence.rows() {
        return Err(shape_err(format!(
            "mask of length {} for {} time steps",
            mask.len(),
            sequence.rows()
        )));
    }
    Ok(())
}

/// Runs one direction over `sequence` (one row per time step) from the zero
/// state. Masked steps copy the state through unchanged.
pub fn directional_pass(
    params: &LstmCellParams,
    sequence: &Matrix,
    mask: &[bool],
    direction: Direction,
) -> Result<DirectionalPass> {
    check_sequence(params, sequence, mask)?;
    let len = sequence.rows();
    let mut state = LstmState::zeros(params.hidden());
    let mut outputs = vec![Vec::new(); len];
    let mut steps: Vec<Option<StepCache>> = vec![None; len];
    for t in direction.visit_order(len) {
        if mask[t] {
            let (next, cache) = step(params, sequence.row(t), &state);
            state = next;
            steps[t] = Some(cache);
        }
        outputs[t] = state.h.clone();
    }
    Ok(DirectionalPass {
        outputs,
        final_state: state,
        cache: DirectionalCache {
            direction,
            inputs: sequence.clone(),
            steps,
        },
    })
}

/// Forward and backward LSTM directions with independent parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BidirectionalLayer {
    pub forward: LstmCellParams,
    pub backward: LstmCellParams,
}

impl BidirectionalLayer {
    pub fn zeros(hidden: usize, embed: usize, gate_activation: ActivationKind) -> Self {
        Self {
            forward: LstmCellParams::zeros(hidden, embed, gate_activation),
            backward: LstmCellParams::zeros(hidden, embed, gate_activation),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            forward: self.forward.zeros_like(),
            backward: self.backward.zeros_like(),
        }
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden()
    }

    pub fn embed(&self) -> usize {
        self.forward.embed()
    }
}

impl ParamSet for BidirectionalLayer {
    fn block_count(&self) -> usize {
        24
    }

    fn block_name(&self, index: usize) -> String {
        if index < 12 {
            format!("fwd.{}", self.forward.block_name(index))
        } else {
            format!("bwd.{}", self.backward.block_name(index - 12))
        }
    }

    fn block(&self, index: usize) -> &[f64] {
        if index < 12 {
            self.forward.block(index)
        } else {
            self.backward.block(index - 12)
        }
    }

    fn block_mut(&mut self, index: usize) -> &mut [f64] {
        if index < 12 {
            self.forward.block_mut(index)
        } else {
            self.backward.block_mut(index - 12)
        }
    }
}

#[derive(Debug, Clone)]
pub struct BidirectionalCache {
    pub forward: DirectionalCache,
    pub backward: DirectionalCache,
}

/// Pooled representation: final forward hidden state (after the last real
/// token) plus final backward hidden state (after the first real token).
pub fn bidirectional_encode(
    layer: &BidirectionalLayer,
    sequence: &Matrix,
    mask: &[bool],
) -> Result<(Vec<f64>, BidirectionalCache)> {
    if layer.forward.hidden() != layer.backward.hidden()
        || layer.forward.embed() != layer.backward.embed()
    {
        return Err(shape_err("forward and backward directions differ in size"));
    }
    let fwd = directional_pass(&layer.forward, sequence, mask, Direction::Forward)?;
    let bwd = directional_pass(&layer.backward, sequence, mask, Direction::Backward)?;
    let pooled = fwd
        .final_state
        .h
        .iter()
        .zip(&bwd.final_state.h)
        .map(|(a, b)| a + b)
        .collect();
    Ok((
        pooled,
        BidirectionalCache {
            forward: fwd.cache,
            backward: bwd.cache,
        },
    ))
}

/// Backpropagation through time for a bidirectional layer.
///
/// `upstream` is the gradient with respect to the pooled representation.
/// Returns parameter gradients (same layout as the layer) and the gradient
/// with respect to every input row; masked rows get exactly zero.
pub fn bptt(
    layer: &BidirectionalLayer,
    cache: &BidirectionalCache,
    upstream: &[f64],
) -> Result<(BidirectionalLayer, Matrix)> {
    if upstream.len() != layer.hidden() {
        return Err(shape_err(format!(
            "upstream of length {} for hidden size {}",
            upstream.len(),
            layer.hidden()
        )));
    }
    let inputs = &cache.forward.inputs;
    if inputs.cols() != layer.embed() || cache.backward.inputs.shape() != inputs.shape() {
        return Err(shape_err("cache does not match layer"));
    }
    let mut grads = layer.zeros_like();
    let mut dx = Matrix::zeros(inputs.rows(), inputs.cols());
    directional_bptt(
        &layer.forward,
        &cache.forward,
        upstream,
        &mut grads.forward,
        &mut dx,
    )?;
    directional_bptt(
        &layer.backward,
        &cache.backward,
        upstream,
        &mut grads.backward,
        &mut dx,
    )?;
    Ok((grads, dx))
}

fn directional_bptt(
    params: &LstmCellParams,
    cache: &DirectionalCache,
    dh_final: &[f64],
    grads: &mut LstmCellParams,
    dx: &mut Matrix,
) -> Result<()> {
    let hidden = params.hidden();
    let len = cache.steps.len();
    let mut dh = dh_final.to_vec();
    let mut dc = vec![0.0; hidden];

    let mut d_i = vec![0.0; hidden];
    let mut d_o = vec![0.0; hidden];
    let mut d_f = vec![0.0; hidden];
    let mut d_n = vec![0.0; hidden];
    let mut pre = [
        vec![0.0; hidden],
        vec![0.0; hidden],
        vec![0.0; hidden],
        vec![0.0; hidden],
    ];

    // Undo the visitation order of the forward pass.
    let order: Vec<usize> = cache.direction.visit_order(len).collect();
    for &t in order.iter().rev() {
        let Some(s) = &cache.steps[t] else {
            continue;
        };
        if s.i.len() != hidden {
            return Err(shape_err("cache does not match layer"));
        }
        for j in 0..hidden {
            d_o[j] = dh[j] * s.tanh_c[j];
            let dct = dc[j] + dh[j] * s.o[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]);
            d_f[j] = dct * s.c_prev[j];
            d_i[j] = dct * s.n[j];
            d_n[j] = dct * s.i[j];
            dc[j] = dct * s.f[j];
        }
        let act = params.gate_activation;
        activate_grad_slice(act, &s.i, &d_i, &mut pre[0]);
        activate_grad_slice(act, &s.o, &d_o, &mut pre[1]);
        activate_grad_slice(act, &s.f, &d_f, &mut pre[2]);
        activate_grad_slice(ActivationKind::Tanh, &s.n, &d_n, &mut pre[3]);

        let x = cache.inputs.row(t);
        let mut dh_prev = vec![0.0; hidden];
        for (gate, dz) in Gate::ALL.into_iter().zip(&pre) {
            let g = grads.gate_mut(gate);
            outer_acc(&mut g.w, dz, x);
            outer_acc(&mut g.u, dz, &s.h_prev);
            axpy(1.0, dz, &mut g.b);
            let p = params.gate(gate);
            gemv_t_acc(&p.w, dz, dx.row_mut(t));
            gemv_t_acc(&p.u, dz, &mut dh_prev);
        }
        dh = dh_prev;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{grad_check, RngStream};

    fn random_params(
        hidden: usize,
        embed: usize,
        rng: &mut RngStream,
        scale: f64,
    ) -> LstmCellParams {
        let mut p = LstmCellParams::zeros(hidden, embed, ActivationKind::Sigmoid);
        for b in 0..p.block_count() {
            for v in p.block_mut(b) {
                *v = rng.uniform(-scale, scale);
            }
        }
        p
    }

    fn random_layer(hidden: usize, embed: usize, rng: &mut RngStream) -> BidirectionalLayer {
        BidirectionalLayer {
            forward: random_params(hidden, embed, rng, 0.8),
            backward: random_params(hidden, embed, rng, 0.8),
        }
    }

    fn random_seq(len: usize, embed: usize, rng: &mut RngStream) -> Matrix {
        let data = (0..len * embed).map(|_| rng.uniform(-1.0, 1.0)).collect();
        Matrix::from_vec(len, embed, data).unwrap()
    }

    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    // Term-by-term scalar evaluation of the gate equations.
    fn scalar_oracle(p: &LstmCellParams, x: &[f64], prev: &LstmState) -> LstmState {
        let hidden = p.hidden();
        let gate = |g: &GateParams, j: usize| -> f64 {
            let mut s = g.b[j];
            for (k, xk) in x.iter().enumerate() {
                s += g.w.get(j, k) * xk;
            }
            for m in 0..hidden {
                s += g.u.get(j, m) * prev.h[m];
            }
            s
        };
        let mut out = LstmState::zeros(hidden);
        for j in 0..hidden {
            let i = sigmoid(gate(&p.input, j));
            let o = sigmoid(gate(&p.output, j));
            let f = sigmoid(gate(&p.forget, j));
            let n = gate(&p.candidate, j).tanh();
            out.c[j] = f * prev.c[j] + i * n;
            out.h[j] = o * out.c[j].tanh();
        }
        out
    }

    #[test]
    fn zero_params_zero_state() {
        let p = LstmCellParams::zeros(3, 2, ActivationKind::Sigmoid);
        let s = cell_step(&p, &[0.3, -0.7], &LstmState::zeros(3)).unwrap();
        assert_eq!(s, LstmState::zeros(3));
    }

    #[test]
    fn zero_params_carry_half_the_cell() {
        let p = LstmCellParams::zeros(1, 1, ActivationKind::Sigmoid);
        let prev = LstmState {
            h: vec![0.9],
            c: vec![1.0],
        };
        let s = cell_step(&p, &[0.0], &prev).unwrap();
        assert_eq!(s.c, vec![0.5]);
        assert!((s.h[0] - 0.231_058_578_630_004_9).abs() < 1e-12);
    }

    #[test]
    fn matches_scalar_oracle() {
        let mut rng = RngStream::new(99);
        for _ in 0..1000 {
            let p = random_params(3, 2, &mut rng, 1.0);
            let x = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
            let prev = LstmState {
                h: (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect(),
                c: (0..3).map(|_| rng.uniform(-2.0, 2.0)).collect(),
            };
            let got = cell_step(&p, &x, &prev).unwrap();
            let want = scalar_oracle(&p, &x, &prev);
            for (a, b) in got.h.iter().chain(&got.c).zip(want.h.iter().chain(&want.c)) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn cell_step_dimension_errors() {
        let p = LstmCellParams::zeros(2, 3, ActivationKind::Sigmoid);
        assert!(cell_step(&p, &[0.0; 2], &LstmState::zeros(2)).is_err());
        assert!(cell_step(&p, &[0.0; 3], &LstmState::zeros(3)).is_err());
    }

    #[test]
    fn single_step_direction_irrelevant() {
        let mut rng = RngStream::new(4);
        let p = random_params(3, 2, &mut rng, 0.5);
        let seq = random_seq(1, 2, &mut rng);
        let expect = cell_step(&p, seq.row(0), &LstmState::zeros(3)).unwrap().h;
        for dir in [Direction::Forward, Direction::Backward] {
            let pass = directional_pass(&p, &seq, &[true], dir).unwrap();
            assert_eq!(pass.outputs, vec![expect.clone()]);
        }
    }

    #[test]
    fn fully_masked_stays_at_zero() {
        let mut rng = RngStream::new(5);
        let p = random_params(3, 2, &mut rng, 0.5);
        let seq = random_seq(4, 2, &mut rng);
        let pass = directional_pass(&p, &seq, &[false; 4], Direction::Forward).unwrap();
        assert_eq!(pass.final_state, LstmState::zeros(3));
    }

    #[test]
    fn empty_sequence_rejected() {
        let p = LstmCellParams::zeros(2, 2, ActivationKind::Sigmoid);
        let r = directional_pass(&p, &Matrix::zeros(0, 2), &[], Direction::Forward);
        assert!(matches!(r, Err(Error::Empty(_))));
    }

    #[test]
    fn palindrome_reverses_outputs() {
        let mut rng = RngStream::new(6);
        let p = random_params(3, 2, &mut rng, 0.7);
        let a = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
        let b = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
        let seq = Matrix::from_rows(&[a, b, a]).unwrap();
        let mask = [true; 3];
        let fwd = directional_pass(&p, &seq, &mask, Direction::Forward).unwrap();
        let bwd = directional_pass(&p, &seq, &mask, Direction::Backward).unwrap();
        let mut rev = bwd.outputs.clone();
        rev.reverse();
        assert_eq!(fwd.outputs, rev);
    }

    #[test]
    fn encode_sums_the_directions() {
        let mut rng = RngStream::new(7);
        let layer = random_layer(3, 2, &mut rng);
        let seq = random_seq(4, 2, &mut rng);
        let mask = [true; 4];
        let (pooled, _) = bidirectional_encode(&layer, &seq, &mask).unwrap();

        let mut s = LstmState::zeros(3);
        for t in 0..4 {
            s = cell_step(&layer.forward, seq.row(t), &s).unwrap();
        }
        let mut r = LstmState::zeros(3);
        for t in (0..4).rev() {
            r = cell_step(&layer.backward, seq.row(t), &r).unwrap();
        }
        let expect: Vec<f64> = s.h.iter().zip(&r.h).map(|(a, b)| a + b).collect();
        assert_eq!(pooled, expect);
    }

    #[test]
    fn zero_layer_pools_to_zero() {
        let layer = BidirectionalLayer::zeros(3, 2, ActivationKind::Sigmoid);
        let mut rng = RngStream::new(8);
        let (pooled, _) =
            bidirectional_encode(&layer, &random_seq(3, 2, &mut rng), &[true; 3]).unwrap();
        assert_eq!(pooled, vec![0.0; 3]);
    }

    #[test]
    fn zero_backward_reduces_to_forward() {
        let mut rng = RngStream::new(9);
        let mut layer = random_layer(3, 2, &mut rng);
        layer.backward = layer.backward.zeros_like();
        let seq = random_seq(5, 2, &mut rng);
        let mask = [true, true, true, false, false];
        let (pooled, _) = bidirectional_encode(&layer, &seq, &mask).unwrap();
        let fwd = directional_pass(&layer.forward, &seq, &mask, Direction::Forward).unwrap();
        assert_eq!(pooled, fwd.final_state.h);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = RngStream::new(10);
        let layer = random_layer(2, 2, &mut rng);
        let seq = random_seq(3, 2, &mut rng);
        let (_, cache) = bidirectional_encode(&layer, &seq, &[true; 3]).unwrap();
        let (g, dx) = bptt(&layer, &cache, &[0.0, 0.0]).unwrap();
        for b in 0..g.block_count() {
            assert!(g.block(b).iter().all(|&v| v == 0.0));
        }
        assert!(dx.data().iter().all(|&v| v == 0.0));
    }

    // Scalar loss <r, pooled> with gradient r, checked against central
    // differences on every parameter and every input coordinate.
    #[test]
    fn bptt_matches_finite_differences() {
        let mut rng = RngStream::new(11);
        for gate_act in [
            ActivationKind::Sigmoid,
            ActivationKind::Softmax,
            ActivationKind::Tanh,
        ] {
            let mut layer = random_layer(2, 2, &mut rng);
            layer.forward.gate_activation = gate_act;
            layer.backward.gate_activation = gate_act;
            let seq = random_seq(3, 2, &mut rng);
            let mask = [true, true, true];
            let r = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
            let loss = |l: &BidirectionalLayer, s: &Matrix| -> f64 {
                let (p, _) = bidirectional_encode(l, s, &mask).unwrap();
                p.iter().zip(&r).map(|(a, b)| a * b).sum()
            };
            let (_, cache) = bidirectional_encode(&layer, &seq, &mask).unwrap();
            let (grads, dx) = bptt(&layer, &cache, &r).unwrap();

            let report = grad_check(&mut layer.clone(), &grads, |l| loss(l, &seq), 1e-5, 1e-5);
            assert!(report.passed(), "{gate_act}\n{report}");

            let mut inputs = vec![seq.data().to_vec()];
            let analytic = vec![dx.data().to_vec()];
            let report = grad_check(
                &mut inputs,
                &analytic,
                |x| loss(&layer, &Matrix::from_vec(3, 2, x[0].clone()).unwrap()),
                1e-5,
                1e-5,
            );
            assert!(report.passed(), "inputs {gate_act}\n{report}");
        }
    }

    #[test]
    fn masked_step_gets_zero_input_gradient() {
        let mut rng = RngStream::new(12);
        let layer = random_layer(3, 2, &mut rng);
        let seq = random_seq(4, 2, &mut rng);
        let mask = [true, false, true, true];
        let (_, cache) = bidirectional_encode(&layer, &seq, &mask).unwrap();
        let (_, dx) = bptt(&layer, &cache, &[0.3, -0.2, 0.9]).unwrap();
        assert_eq!(dx.row(1), &[0.0, 0.0]);
        assert!(dx.row(0).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn upstream_size_checked() {
        let layer = BidirectionalLayer::zeros(3, 2, ActivationKind::Sigmoid);
        let (_, cache) = bidirectional_encode(&layer, &Matrix::zeros(2, 2), &[true; 2]).unwrap();
        assert!(bptt(&layer, &cache, &[0.0; 2]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn pad(seq: &Matrix, extra: usize) -> Matrix {
            let mut data = seq.data().to_vec();
            data.extend(std::iter::repeat_n(0.0, extra * seq.cols()));
            Matrix::from_vec(seq.rows() + extra, seq.cols(), data).unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn pad_invariance(seed in any::<u64>(), len in 1usize..6, extra in 1usize..5) {
                let mut rng = RngStream::new(seed);
                let layer = random_layer(3, 2, &mut rng);
                let seq = random_seq(len, 2, &mut rng);
                let up: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect();
                let mask = vec![true; len];
                let (p1, c1) = bidirectional_encode(&layer, &seq, &mask).unwrap();
                let (g1, dx1) = bptt(&layer, &c1, &up).unwrap();

                let padded = pad(&seq, extra);
                let mut mask2 = mask.clone();
                mask2.extend(std::iter::repeat_n(false, extra));
                let (p2, c2) = bidirectional_encode(&layer, &padded, &mask2).unwrap();
                let (g2, dx2) = bptt(&layer, &c2, &up).unwrap();

                prop_assert_eq!(p1, p2);
                prop_assert_eq!(g1, g2);
                prop_assert_eq!(dx1.data(), &dx2.data()[..len * 2]);
                prop_assert!(dx2.data()[len * 2..].iter().all(|&v| v == 0.0));
            }

            #[test]
            fn cell_and_hidden_bounds(seed in any::<u64>(), len in 1usize..12) {
                let mut rng = RngStream::new(seed);
                let p = random_params(4, 3, &mut rng, 3.0);
                let seq = Matrix::from_vec(
                    len, 3, (0..len * 3).map(|_| rng.uniform(-5.0, 5.0)).collect()
                ).unwrap();
                let mut s = LstmState::zeros(4);
                for t in 0..len {
                    s = cell_step(&p, seq.row(t), &s).unwrap();
                    for j in 0..4 {
                        prop_assert!(s.c[j].abs() <= (t + 1) as f64);
                        prop_assert!(s.h[j].abs() <= 1.0);
                    }
                }
            }
        }
    }
}
