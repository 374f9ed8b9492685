//! Dense numerical kernel shared by the recurrent layers, the model and the
//! trainer. Everything is `f64` and row-major.

mod activation;
mod dropout;
mod gradcheck;
mod loss;
pub(crate) mod matrix;
mod rng;

pub use activation::{
    activate, activate_grad, activate_grad_slice, activate_slice, ActivationKind,
};
pub use dropout::{dropout, DropoutMask};
pub use gradcheck::{grad_check, relative_error, BlockReport, GradCheckReport, ParamSet};
pub use loss::{categorical_cross_entropy, normalized_cross_entropy, LossKind, CLIP_EPS};
pub use matrix::Matrix;
pub use rng::RngStream;
