//! Inputs for the kernel benchmarks.

use plstm::corpus::{EncodedSequence, Label};
use plstm::tensor::{Matrix, RngStream};
use plstm::train::Sample;

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = RngStream::new(seed);
    let data = (0..rows * cols).map(|_| rng.uniform(-1.0, 1.0)).collect();
    Matrix::from_vec(rows, cols, data).expect("sizes agree")
}

/// `n` sequences padded to `seq_len`, each between half and full length,
/// with ids drawn from `2..vocab_rows`.
pub fn random_batch(n: usize, seq_len: usize, vocab_rows: usize, seed: u64) -> Vec<Sample> {
    let mut rng = RngStream::new(seed);
    (0..n)
        .map(|i| {
            let length = seq_len / 2 + (rng.next_u64() as usize % (seq_len - seq_len / 2 + 1));
            let ids = (0..seq_len)
                .map(|t| {
                    if t < length {
                        2 + (rng.next_u64() % (vocab_rows as u64 - 2)) as u32
                    } else {
                        0
                    }
                })
                .collect();
            Sample {
                input: EncodedSequence {
                    ids,
                    mask: (0..seq_len).map(|t| t < length).collect(),
                    length,
                },
                label: if i % 2 == 0 {
                    Label::Sarcastic
                } else {
                    Label::NonSarcastic
                },
            }
        })
        .collect()
}
