//! Seeded train / validation / test partition of an image list.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Indices into the original list for each part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

pub fn split_corpus(len: usize, counts: (usize, usize, usize), seed: u64) -> Result<CorpusSplit> {
    let needed = counts.0 + counts.1 + counts.2;
    if needed > len {
        return Err(Error::InsufficientImages { needed, available: len });
    }
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (a, b) = (counts.0, counts.0 + counts.1);
    Ok(CorpusSplit {
        train: order[..a].to_vec(),
        validation: order[a..b].to_vec(),
        test: order[b..needed].to_vec(),
        seed,
    })
}

/// Applies a split to a slice, cloning the selected items.
pub fn pick<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}
