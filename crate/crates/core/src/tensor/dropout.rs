use super::{Matrix, RngStream};
use crate::error::{Error, Result};

/// Inverted-dropout mask: each entry is either 0 or `1 / (1 - rate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    scale: Vec<f64>,
}

impl DropoutMask {
    pub fn sample(len: usize, rate: f64, rng: &mut RngStream) -> Result<Self> {
        check_rate(rate)?;
        let keep = 1.0 / (1.0 - rate);
        let scale = (0..len)
            .map(|_| if rng.next_f64() < rate { 0.0 } else { keep })
            .collect();
        Ok(Self { scale })
    }

    pub fn len(&self) -> usize {
        self.scale.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scale.is_empty()
    }

    pub fn factors(&self) -> &[f64] {
        &self.scale
    }

    /// Multiplies `x` by the mask in place; also used for the backward pass.
    pub fn apply(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.scale.len());
        for (v, s) in x.iter_mut().zip(&self.scale) {
            *v *= s;
        }
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!(
            "dropout rate {rate} outside [0, 1)"
        )));
    }
    Ok(())
}

/// Inverted dropout. Identity when `training` is false or `rate` is zero.
pub fn dropout(x: &Matrix, rate: f64, rng: &mut RngStream, training: bool) -> Result<Matrix> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(x.clone());
    }
    let mask = DropoutMask::sample(x.len(), rate, rng)?;
    let mut out = x.clone();
    mask.apply(out.data_mut());
    Ok(out)
}
