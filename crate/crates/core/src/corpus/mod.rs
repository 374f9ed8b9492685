//! Corpus ingestion: tokenizing, vocabularies, frequency tables, fixed-length
//! encoding, dataset loaders and cross-training fold plans.

mod dataset;
mod folds;
mod frequency;
mod tokenize;
mod vocab;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use dataset::{
    load_label_file, load_labeled_dataset, load_plain_text, parse_labeled, parse_plain_text,
    DatasetFormat,
};
pub use folds::{make_folds, Fold, Fraction, SplitPlan};
pub use frequency::{frequency_table, full_frequency_table, FrequencyEntry, FrequencyTable};
pub use tokenize::tokenize;
pub use vocab::{build_vocabulary, encode, EncodedSequence, Vocabulary, PAD_ID, UNK_ID};

/// Default fixed sequence length: the longest dialogue in the training corpus
/// runs to 65 words.
pub const DEFAULT_SEQ_LEN: usize = 65;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    LabeledDialogue,
    PlainLiterature,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: u64,
    pub text: String,
    pub source: Source,
}

/// Binary class. The index doubles as the position in a two-way score
/// vector; ties always resolve toward index 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    NonSarcastic = 0,
    Sarcastic = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        match i {
            0 => Some(Label::NonSarcastic),
            1 => Some(Label::Sarcastic),
            _ => None,
        }
    }

    /// One-hot target row.
    pub fn one_hot(self) -> [f64; 2] {
        match self {
            Label::NonSarcastic => [1.0, 0.0],
            Label::Sarcastic => [0.0, 1.0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::NonSarcastic => "non_sarcastic",
            Label::Sarcastic => "sarcastic",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim() {
            "0" => Ok(Label::NonSarcastic),
            "1" => Ok(Label::Sarcastic),
            t if t.eq_ignore_ascii_case("non_sarcastic") => Ok(Label::NonSarcastic),
            t if t.eq_ignore_ascii_case("sarcastic") => Ok(Label::Sarcastic),
            other => Err(Error::InvalidArgument(format!("invalid label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    pub doc: Document,
    pub label: Label,
}

impl LabeledExample {
    pub fn tokens(&self) -> Vec<String> {
        tokenize(&self.doc.text)
    }
}

/// Documents of a labeled set, for vocabulary and frequency work.
pub fn documents(examples: &[LabeledExample]) -> Vec<Document> {
    examples.iter().map(|e| e.doc.clone()).collect()
}
