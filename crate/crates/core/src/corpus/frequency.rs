use std::io::Write;

use indexmap::IndexMap;

use super::{tokenize, Document};
use crate::error::Result;

/// Token counts, highest first; equal counts keep first-occurrence order.
pub(crate) fn word_counts(documents: &[Document]) -> Vec<(String, usize)> {
    let mut counts: IndexMap<String, usize> = IndexMap::new();
    for doc in documents {
        for tok in tokenize(&doc.text) {
            *counts.entry(tok).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<(String, usize)> = counts.into_iter().collect();
    // stable: ties stay in insertion order
    entries.sort_by_key(|e| std::cmp::Reverse(e.1));
    entries
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyEntry {
    pub word: String,
    pub count: usize,
    /// `100 * count / total_tokens`
    pub distribution: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    pub entries: Vec<FrequencyEntry>,
    pub total_tokens: usize,
}

impl FrequencyTable {
    /// CSV with header `rank,word,count,distribution_pct`; percentages to
    /// two decimals.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rank", "word", "count", "distribution_pct"])
            .map_err(csv_io)?;
        for (rank, e) in self.entries.iter().enumerate() {
            w.write_record([
                (rank + 1).to_string(),
                e.word.clone(),
                e.count.to_string(),
                format!("{:.2}", e.distribution),
            ])
            .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> crate::Error {
    crate::Error::Io(std::io::Error::other(e))
}

/// The full, untruncated table.
pub fn full_frequency_table(documents: &[Document]) -> FrequencyTable {
    let counts = word_counts(documents);
    let total_tokens: usize = counts.iter().map(|(_, c)| c).sum();
    let entries = counts
        .into_iter()
        .map(|(word, count)| FrequencyEntry {
            word,
            count,
            distribution: 100.0 * count as f64 / total_tokens as f64,
        })
        .collect();
    FrequencyTable {
        entries,
        total_tokens,
    }
}

/// The `top_k` most frequent tokens. `total_tokens` still counts the whole
/// corpus.
pub fn frequency_table(documents: &[Document], top_k: usize) -> FrequencyTable {
    let mut table = full_frequency_table(documents);
    table.entries.truncate(top_k);
    table
}
