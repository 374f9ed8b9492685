//! Parallel bidirectional LSTM text classifier.
//!
//! Four bidirectional LSTM branches share one embedding table and differ in
//! the activation on their two-class output head (softmax, sigmoid, relu,
//! tanh). Each branch is trained independently with Adam; their predictions
//! are reported side by side and optionally combined.
//!
//! ```
//! use plstm::{ModelConfig, ParallelModel};
//! use plstm::corpus::EncodedSequence;
//!
//! let model = ParallelModel::init(&ModelConfig::new(10, 4, 3), 7).unwrap();
//! let input = EncodedSequence { ids: vec![2, 5, 0], mask: vec![true, true, false], length: 2 };
//! let prediction = model.predict(&input).unwrap();
//! assert_eq!(prediction.per_branch.len(), 4);
//! ```

pub mod corpus;
mod error;
pub mod eval;
pub mod lstm;
pub mod model;
pub mod tensor;
pub mod train;

pub use corpus::{EncodedSequence, Label, LabeledExample, Vocabulary};
pub use error::{Error, Result};
pub use eval::{ClassificationReport, ConfusionCounts, EvaluationReport};
pub use model::{Aggregation, BranchKind, GateMode, ModelConfig, ParallelModel, Prediction};
pub use tensor::{ActivationKind, LossKind, Matrix, ParamSet, RngStream};
pub use train::{EpochLog, Sample, TrainConfig};
