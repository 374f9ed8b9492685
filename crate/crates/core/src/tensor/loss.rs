use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{shape_err, Error, Result};

/// Probabilities are clipped to `[CLIP_EPS, 1 - CLIP_EPS]` before the log.
pub const CLIP_EPS: f64 = 1e-7;

/// Mean categorical cross-entropy over the rows of `probs`.
///
/// Returns the loss and its gradient with respect to `probs` (not logits):
/// heads other than softmax feed their raw activations in here, so the
/// caller composes the head's own activation gradient afterwards. Inside the
/// clipped region the gradient is zero.
pub fn categorical_cross_entropy(probs: &Matrix, targets: &Matrix) -> Result<(f64, Matrix)> {
    probs.check_same_shape(targets)?;
    let n = probs.rows();
    if n == 0 {
        return Err(shape_err("cross-entropy over zero rows"));
    }
    let mut grad = Matrix::zeros(n, probs.cols());
    let mut total = 0.0;
    for r in 0..n {
        let t = one_hot_index(targets.row(r))
            .ok_or_else(|| Error::InvalidArgument(format!("target row {r} is not one-hot")))?;
        let p = probs.get(r, t);
        let clipped = p.clamp(CLIP_EPS, 1.0 - CLIP_EPS);
        total -= clipped.ln();
        if p > CLIP_EPS && p < 1.0 - CLIP_EPS {
            grad.set(r, t, -1.0 / (p * n as f64));
        }
    }
    Ok((total / n as f64, grad))
}

/// Mean cross-entropy after rescaling each row of `scores` to sum to one.
///
/// This is how framework-style categorical cross-entropy treats heads that
/// are not already distributions. Without it a sigmoid head can drive both
/// outputs to 1 at zero loss. Rows whose sum is not positive and finite are
/// scored as they are. The gradient is with respect to the raw scores.
pub fn normalized_cross_entropy(scores: &Matrix, targets: &Matrix) -> Result<(f64, Matrix)> {
    scores.check_same_shape(targets)?;
    let n = scores.rows();
    if n == 0 {
        return Err(shape_err("cross-entropy over zero rows"));
    }
    let mut grad = Matrix::zeros(n, scores.cols());
    let mut total = 0.0;
    for r in 0..n {
        let t = one_hot_index(targets.row(r))
            .ok_or_else(|| Error::InvalidArgument(format!("target row {r} is not one-hot")))?;
        let row = scores.row(r);
        let sum: f64 = row.iter().sum();
        let raw = row[t];
        let normalize = sum > 0.0 && sum.is_finite();
        let p = if normalize { raw / sum } else { raw };
        total -= p.clamp(CLIP_EPS, 1.0 - CLIP_EPS).ln();
        if p > CLIP_EPS && p < 1.0 - CLIP_EPS {
            if normalize {
                // d/ds_j of -ln(s_t / sum) = 1/sum - [j == t] / s_t
                for (j, g) in grad.row_mut(r).iter_mut().enumerate() {
                    let own = if j == t { 1.0 / raw } else { 0.0 };
                    *g = (1.0 / sum - own) / n as f64;
                }
            } else {
                grad.set(r, t, -1.0 / (p * n as f64));
            }
        }
    }
    Ok((total / n as f64, grad))
}

/// Which cross-entropy the trainer applies to branch scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// [`normalized_cross_entropy`]
    #[default]
    Normalized,
    /// [`categorical_cross_entropy`] on the raw scores.
    Raw,
}

impl LossKind {
    pub fn evaluate(self, scores: &Matrix, targets: &Matrix) -> Result<(f64, Matrix)> {
        match self {
            LossKind::Normalized => normalized_cross_entropy(scores, targets),
            LossKind::Raw => categorical_cross_entropy(scores, targets),
        }
    }
}

fn one_hot_index(row: &[f64]) -> Option<usize> {
    let mut hot = None;
    for (i, &v) in row.iter().enumerate() {
        if v == 1.0 {
            if hot.is_some() {
                return None;
            }
            hot = Some(i);
        } else if v != 0.0 {
            return None;
        }
    }
    hot
}
