use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::data::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{rng_from, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub x: Matrix,
    pub y: Vec<usize>,
}

/// Endless stream of shuffled mini-batches. Each epoch is a fresh permutation
/// drawn from the seeded stream; the final partial batch of an epoch is dropped.
#[derive(Debug, Clone)]
pub struct BatchIterator<'a> {
    dataset: &'a EmbeddingDataset,
    batch_size: usize,
    rng: Rng,
    order: Vec<usize>,
    cursor: usize,
    epoch: usize,
}

impl<'a> BatchIterator<'a> {
    pub fn new(dataset: &'a EmbeddingDataset, batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size == 0 || batch_size > dataset.len() {
            return Err(Error::Config(format!(
                "batch size {batch_size} must be in 1..={} (dataset size)",
                dataset.len()
            )));
        }
        let mut it = Self {
            dataset,
            batch_size,
            rng: rng_from(seed),
            order: (0..dataset.len()).collect(),
            cursor: 0,
            epoch: 0,
        };
        it.order.shuffle(&mut it.rng);
        Ok(it)
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.dataset.len() / self.batch_size
    }

    /// Number of completed passes.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Next batch of indices without materializing the embeddings.
    pub fn next_indices(&mut self) -> Vec<usize> {
        if self.cursor + self.batch_size > self.order.len() {
            self.order.sort_unstable();
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
            self.epoch += 1;
        }
        let out = self.order[self.cursor..self.cursor + self.batch_size].to_vec();
        self.cursor += self.batch_size;
        out
    }
}

impl Iterator for BatchIterator<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        let indices = self.next_indices();
        let x = self.dataset.embeddings.select_rows(&indices);
        let y = indices.iter().map(|&i| self.dataset.speakers.labels[i]).collect();
        Some(Batch { indices, x, y })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Factor;
    use alloc::collections::BTreeMap;
    use alloc::string::ToString;

    fn toy(n: usize) -> EmbeddingDataset {
        EmbeddingDataset::new(
            Matrix::from_vec(n, 1, (0..n).map(|i| i as f64).collect()).unwrap(),
            Factor::from_labels((0..n).map(|i| i % 2).collect()),
            BTreeMap::new(),
            (0..n).map(|i| i.to_string()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn floor_division_and_no_duplicates() {
        let ds = toy(10);
        let mut it = BatchIterator::new(&ds, 3, 1).unwrap();
        assert_eq!(it.batches_per_epoch(), 3);
        let mut seen: Vec<usize> = (0..3).flat_map(|_| it.next().unwrap().indices).collect();
        assert_eq!(it.epoch(), 0);
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 9);
        it.next();
        assert_eq!(it.epoch(), 1);
    }

    #[test]
    fn batch_rows_match_indices() {
        let ds = toy(7);
        let b = BatchIterator::new(&ds, 4, 3).unwrap().next().unwrap();
        for (row, &i) in b.indices.iter().enumerate() {
            assert_eq!(b.x[(row, 0)], i as f64);
            assert_eq!(b.y[row], i % 2);
        }
    }

    #[test]
    fn same_seed_same_sequence() {
        let ds = toy(20);
        let a: Vec<_> = BatchIterator::new(&ds, 6, 5).unwrap().take(10).collect();
        let b: Vec<_> = BatchIterator::new(&ds, 6, 5).unwrap().take(10).collect();
        assert_eq!(a, b);
        let c: Vec<_> = BatchIterator::new(&ds, 6, 6).unwrap().take(10).collect();
        assert_ne!(a, c);
    }

    #[test]
    fn oversized_batch_is_rejected() {
        let ds = toy(4);
        assert!(matches!(BatchIterator::new(&ds, 5, 0), Err(Error::Config(_))));
        assert!(BatchIterator::new(&ds, 0, 0).is_err());
    }
}
