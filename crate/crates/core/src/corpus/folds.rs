use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::RngStream;

/// Exact fraction `num / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    /// Train share of a `train:test` ratio, e.g. `from_ratio(3, 2)` is 3/5.
    pub fn from_ratio(train: u64, test: u64) -> Self {
        Self {
            num: train,
            den: train + test,
        }
    }

    /// `round(self * n)`, halves rounded up, in integer arithmetic.
    pub fn round_mul(self, n: usize) -> usize {
        let n = n as u128;
        ((2 * n * self.num as u128 + self.den as u128) / (2 * self.den as u128)) as usize
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub folds: Vec<Fold>,
    pub seed: u64,
    pub train_fraction: Fraction,
}

/// `k` independent seeded shuffles of `0..n`; each fold takes the first
/// `round(train_fraction * n)` shuffled indices for training and the rest
/// for testing.
pub fn make_folds(n: usize, k: usize, train_fraction: Fraction, seed: u64) -> Result<SplitPlan> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("cannot split {n} examples")));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    if train_fraction.den == 0
        || train_fraction.num == 0
        || train_fraction.num >= train_fraction.den
    {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let n_train = train_fraction.round_mul(n);
    if n_train == 0 || n_train == n {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} of {n} leaves an empty side"
        )));
    }
    let folds = (0..k)
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            RngStream::substream(seed, f as u64).shuffle(&mut idx);
            let test = idx.split_off(n_train);
            Fold { train: idx, test }
        })
        .collect();
    Ok(SplitPlan {
        folds,
        seed,
        train_fraction,
    })
}
