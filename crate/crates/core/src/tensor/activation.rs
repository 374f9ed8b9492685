use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{shape_err, Error, Result};

/// The four output classifiers a branch can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Softmax,
    Sigmoid,
    Relu,
    Tanh,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 4] = [
        ActivationKind::Softmax,
        ActivationKind::Sigmoid,
        ActivationKind::Relu,
        ActivationKind::Tanh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Softmax => "softmax",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Relu => "relu",
            ActivationKind::Tanh => "tanh",
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ActivationKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown activation {s:?}")))
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Applies `kind` in place. Softmax treats the whole slice as one logit
/// vector and subtracts its maximum first.
pub fn activate_slice(kind: ActivationKind, x: &mut [f64]) {
    match kind {
        ActivationKind::Sigmoid => x.iter_mut().for_each(|v| *v = sigmoid(*v)),
        ActivationKind::Tanh => x.iter_mut().for_each(|v| *v = v.tanh()),
        ActivationKind::Relu => x.iter_mut().for_each(|v| *v = v.max(0.0)),
        ActivationKind::Softmax => {
            let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in x.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in x.iter_mut() {
                *v /= sum;
            }
        }
    }
}

/// Vector-Jacobian product given the forward output `y` and the upstream
/// gradient; writes the gradient with respect to the pre-activation.
pub fn activate_grad_slice(kind: ActivationKind, y: &[f64], upstream: &[f64], out: &mut [f64]) {
    debug_assert_eq!(y.len(), upstream.len());
    debug_assert_eq!(y.len(), out.len());
    match kind {
        ActivationKind::Sigmoid => {
            for ((o, &y), &u) in out.iter_mut().zip(y).zip(upstream) {
                *o = u * y * (1.0 - y);
            }
        }
        ActivationKind::Tanh => {
            for ((o, &y), &u) in out.iter_mut().zip(y).zip(upstream) {
                *o = u * (1.0 - y * y);
            }
        }
        ActivationKind::Relu => {
            // Subgradient at exactly zero is 0.
            for ((o, &y), &u) in out.iter_mut().zip(y).zip(upstream) {
                *o = if y > 0.0 { u } else { 0.0 };
            }
        }
        ActivationKind::Softmax => {
            let dot: f64 = y.iter().zip(upstream).map(|(a, b)| a * b).sum();
            for ((o, &y), &u) in out.iter_mut().zip(y).zip(upstream) {
                *o = y * (u - dot);
            }
        }
    }
}

/// Elementwise activation; softmax is applied row by row.
pub fn activate(kind: ActivationKind, x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for r in 0..out.rows() {
        activate_slice(kind, out.row_mut(r));
    }
    out
}

/// Backward of [`activate`]: `y` is the forward output, `upstream` the
/// gradient with respect to it.
pub fn activate_grad(kind: ActivationKind, y: &Matrix, upstream: &Matrix) -> Result<Matrix> {
    if y.shape() != upstream.shape() {
        return Err(shape_err(format!(
            "activation output {:?} vs upstream {:?}",
            y.shape(),
            upstream.shape()
        )));
    }
    let mut out = Matrix::zeros(y.rows(), y.cols());
    for r in 0..y.rows() {
        let (yr, ur) = (y.row(r), upstream.row(r));
        activate_grad_slice(kind, yr, ur, out.row_mut(r));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{relative_error, RngStream};

    fn row(v: &[f64]) -> Matrix {
        Matrix::row_vector(v.to_vec()).unwrap()
    }

    #[test]
    fn fixed_points() {
        assert_eq!(
            activate(ActivationKind::Sigmoid, &row(&[0.0])).data(),
            &[0.5]
        );
        assert_eq!(activate(ActivationKind::Tanh, &row(&[0.0])).data(), &[0.0]);
        assert_eq!(
            activate(ActivationKind::Relu, &row(&[-3.0, 2.0])).data(),
            &[0.0, 2.0]
        );
    }

    #[test]
    fn softmax_symmetric_and_analytic() {
        assert_eq!(
            activate(ActivationKind::Softmax, &row(&[0.0, 0.0])).data(),
            &[0.5, 0.5]
        );
        assert_eq!(
            activate(ActivationKind::Softmax, &row(&[1.0, 1.0, 1.0, 1.0])).data(),
            &[0.25; 4]
        );
        let y = activate(ActivationKind::Softmax, &row(&[2f64.ln(), 0.0]));
        assert!((y.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((y.get(0, 1) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_is_row_wise() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [2f64.ln(), 0.0]]).unwrap();
        let y = activate(ActivationKind::Softmax, &x);
        assert_eq!(y.row(0), &[0.5, 0.5]);
        assert!((y.get(1, 0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_grad_at_half() {
        let g = activate_grad(ActivationKind::Sigmoid, &row(&[0.5]), &row(&[1.0])).unwrap();
        assert_eq!(g.data(), &[0.25]);
    }

    #[test]
    fn relu_dead_unit_has_zero_grad() {
        let y = activate(ActivationKind::Relu, &row(&[-1.0, 0.0]));
        let g = activate_grad(ActivationKind::Relu, &y, &row(&[5.0, 5.0])).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0]);
    }

    #[test]
    fn grad_shape_mismatch() {
        let r = activate_grad(ActivationKind::Tanh, &row(&[0.0]), &row(&[0.0, 1.0]));
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    // Central-difference oracle for the vector-Jacobian product
    // d/dx <u, act(x)>.
    fn numeric_vjp(kind: ActivationKind, x: &[f64], u: &[f64], h: f64) -> Vec<f64> {
        let f = |x: &[f64]| -> f64 {
            let mut y = x.to_vec();
            activate_slice(kind, &mut y);
            y.iter().zip(u).map(|(a, b)| a * b).sum()
        };
        (0..x.len())
            .map(|j| {
                let mut p = x.to_vec();
                let mut m = x.to_vec();
                p[j] += h;
                m[j] -= h;
                (f(&p) - f(&m)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn every_kind_matches_finite_differences() {
        let mut rng = RngStream::new(2024);
        for kind in ActivationKind::ALL {
            for _ in 0..20 {
                let x: Vec<f64> = (0..4)
                    .map(|_| {
                        // keep relu inputs away from the kink
                        let v = rng.uniform(-2.0, 2.0);
                        if v.abs() < 0.05 {
                            v + 0.1
                        } else {
                            v
                        }
                    })
                    .collect();
                let u: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
                let y = activate(kind, &row(&x));
                let g = activate_grad(kind, &y, &row(&u)).unwrap();
                let n = numeric_vjp(kind, &x, &u, 1e-5);
                for (a, b) in g.data().iter().zip(&n) {
                    assert!(relative_error(*a, *b) <= 1e-6, "{kind}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!(
            "TANH".parse::<ActivationKind>().unwrap(),
            ActivationKind::Tanh
        );
        assert!("gelu".parse::<ActivationKind>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn softmax_rows_are_distributions(v in prop::collection::vec(-15.0f64..15.0, 1..12)) {
                let y = activate(ActivationKind::Softmax, &row(&v));
                let s: f64 = y.data().iter().sum();
                prop_assert!((s - 1.0).abs() <= 1e-12);
                if v.len() > 1 {
                    prop_assert!(y.data().iter().all(|&p| p > 0.0 && p < 1.0));
                }
            }

            // Logits on a 1/8 grid shifted by integers keep the subtraction
            // exact, so shift invariance holds bitwise.
            #[test]
            fn softmax_shift_invariant(
                v in prop::collection::vec(-64i32..64, 1..8),
                shift in -50i32..50,
            ) {
                let x: Vec<f64> = v.iter().map(|&k| k as f64 / 8.0).collect();
                let xs: Vec<f64> = x.iter().map(|&a| a + shift as f64).collect();
                let a = activate(ActivationKind::Softmax, &row(&x));
                let b = activate(ActivationKind::Softmax, &row(&xs));
                prop_assert_eq!(a, b);
            }

            #[test]
            fn ranges(x in -30.0f64..30.0) {
                let s = activate(ActivationKind::Sigmoid, &row(&[x])).get(0, 0);
                prop_assert!(s > 0.0 && s < 1.0);
                let t = activate(ActivationKind::Tanh, &row(&[x / 4.0])).get(0, 0);
                prop_assert!(t > -1.0 && t < 1.0);
                prop_assert!(activate(ActivationKind::Relu, &row(&[x])).get(0, 0) >= 0.0);
            }
        }
    }
}
