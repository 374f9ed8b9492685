use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::frequency::word_counts;
use super::Document;
use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;

const PAD_TOKEN: &str = "<pad>";
const UNK_TOKEN: &str = "<unk>";

/// Token ↔ id map. Ids 0 and 1 are reserved for padding and unknown words;
/// content words occupy the dense range `2..=V+1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    word_to_id: HashMap<String, u32>,
    // content words, id - 2
    id_to_word: Vec<String>,
}

impl Vocabulary {
    /// Builds a vocabulary from words listed in id order (first word gets
    /// id 2). Duplicates are rejected.
    pub fn from_words<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut word_to_id = HashMap::new();
        let mut id_to_word = Vec::new();
        for w in words {
            let w = w.into();
            let id = id_to_word.len() as u32 + 2;
            if word_to_id.insert(w.clone(), id).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate vocabulary word {w:?}"
                )));
            }
            id_to_word.push(w);
        }
        Ok(Self {
            word_to_id,
            id_to_word,
        })
    }

    /// Number of content words (V).
    pub fn len(&self) -> usize {
        self.id_to_word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_word.is_empty()
    }

    /// Rows needed in an embedding table: V plus the two reserved ids.
    pub fn table_size(&self) -> usize {
        self.id_to_word.len() + 2
    }

    pub fn get(&self, word: &str) -> Option<u32> {
        self.word_to_id.get(word).copied()
    }

    /// Id for `word`, or [`UNK_ID`].
    pub fn id(&self, word: &str) -> u32 {
        self.get(word).unwrap_or(UNK_ID)
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        match id {
            PAD_ID => Some(PAD_TOKEN),
            UNK_ID => Some(UNK_TOKEN),
            _ => self.id_to_word.get(id as usize - 2).map(String::as_str),
        }
    }

    /// Content words in id order.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.id_to_word.iter().map(String::as_str)
    }

    /// One content word per line, in id order.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        for w in &self.id_to_word {
            out.push_str(w);
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_words(text.lines().filter(|l| !l.is_empty()))
    }
}

/// Every token with corpus count ≥ `min_count`, ids in descending count
/// order with ties broken by first occurrence.
pub fn build_vocabulary(documents: &[Document], min_count: usize) -> Result<Vocabulary> {
    let min_count = min_count.max(1);
    let counts = word_counts(documents);
    if counts.is_empty() {
        return Err(Error::Empty("corpus has no tokens"));
    }
    let words: Vec<String> = counts
        .into_iter()
        .filter(|(_, c)| *c >= min_count)
        .map(|(w, _)| w)
        .collect();
    if words.is_empty() {
        return Err(Error::EmptyVocabulary(min_count));
    }
    Vocabulary::from_words(words)
}

/// Fixed-length id sequence. Padding sits at the tail and is masked out.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncodedSequence {
    pub ids: Vec<u32>,
    pub mask: Vec<bool>,
    pub length: usize,
}

impl EncodedSequence {
    pub fn capacity(&self) -> usize {
        self.ids.len()
    }
}

/// Maps the first `min(len, seq_len)` tokens to ids (unknown words to
/// [`UNK_ID`]) and pads the tail with [`PAD_ID`].
pub fn encode<S: AsRef<str>>(
    tokens: &[S],
    vocab: &Vocabulary,
    seq_len: usize,
) -> Result<EncodedSequence> {
    if seq_len == 0 {
        return Err(Error::InvalidArgument(
            "sequence length must be at least 1".into(),
        ));
    }
    let length = tokens.len().min(seq_len);
    let mut ids = vec![PAD_ID; seq_len];
    let mut mask = vec![false; seq_len];
    for (t, tok) in tokens.iter().take(length).enumerate() {
        ids[t] = vocab.id(tok.as_ref());
        mask[t] = true;
    }
    Ok(EncodedSequence { ids, mask, length })
}
