//! Seeded, epoch-wise shuffled mini-batches.

use std::sync::Arc;

use alae_autodiff::Array;
use rand::seq::SliceRandom;

use super::{ImageCorpus, VectorDataset};
use crate::rng::stream;
use crate::trainer::{BatchPosition, BatchSource};

/// Index stream over `n` items. Each epoch is a fresh permutation derived
/// from `(seed, epoch)`; an epoch ends when fewer than `batch` unused items
/// remain (the partial batch is dropped).
#[derive(Clone, Debug)]
pub struct BatchIterator {
    n: usize,
    seed: u64,
    epoch: u64,
    cursor: usize,
    perm: Vec<usize>,
}

fn permutation(n: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream(seed, &format!("epoch-{epoch}")));
    perm
}

impl BatchIterator {
    pub fn new(n: usize, seed: u64) -> Self {
        BatchIterator {
            n,
            seed,
            epoch: 0,
            cursor: 0,
            perm: permutation(n, seed, 0),
        }
    }

    /// Full batches per epoch.
    pub fn batches_per_epoch(&self, batch: usize) -> usize {
        self.n / batch
    }

    pub fn next_indices(&mut self, batch: usize) -> Vec<usize> {
        assert!(batch >= 1 && batch <= self.n, "batch size {batch} exceeds dataset size {}", self.n);
        if self.cursor + batch > self.n {
            self.seek(BatchPosition {
                epoch: self.epoch + 1,
                cursor: 0,
            });
        }
        let out = self.perm[self.cursor..self.cursor + batch].to_vec();
        self.cursor += batch;
        out
    }

    /// Indices of every full batch of the current epoch, then advances to
    /// the next epoch.
    pub fn epoch(&mut self, batch: usize) -> Vec<Vec<usize>> {
        let out = (0..self.batches_per_epoch(batch))
            .map(|_| self.next_indices(batch))
            .collect();
        self.seek(BatchPosition {
            epoch: self.epoch + 1,
            cursor: 0,
        });
        out
    }

    pub fn position(&self) -> BatchPosition {
        BatchPosition {
            epoch: self.epoch,
            cursor: self.cursor as u64,
        }
    }

    pub fn seek(&mut self, pos: BatchPosition) {
        if pos.epoch != self.epoch {
            self.perm = permutation(self.n, self.seed, pos.epoch);
            self.epoch = pos.epoch;
        }
        self.cursor = pos.cursor as usize;
    }
}

/// Batches of a vector dataset (the level argument is ignored).
pub struct VectorBatches {
    pub data: Arc<VectorDataset>,
    pub iter: BatchIterator,
}

impl VectorBatches {
    pub fn new(data: Arc<VectorDataset>, seed: u64) -> Self {
        let iter = BatchIterator::new(data.len(), seed);
        VectorBatches { data, iter }
    }
}

impl BatchSource<f32> for VectorBatches {
    fn next_batch(&mut self, batch: usize, _level: usize) -> Array<f32> {
        let idx = self.iter.next_indices(batch);
        self.data.gather(&idx)
    }
    fn position(&self) -> BatchPosition {
        self.iter.position()
    }
    fn seek(&mut self, pos: BatchPosition) {
        self.iter.seek(pos)
    }
}

/// Batches of an image corpus at the requested pyramid level.
pub struct ImageBatches {
    pub corpus: Arc<ImageCorpus>,
    pub iter: BatchIterator,
}

impl ImageBatches {
    pub fn new(corpus: Arc<ImageCorpus>, seed: u64) -> Self {
        let iter = BatchIterator::new(corpus.len(), seed);
        ImageBatches { corpus, iter }
    }
}

impl BatchSource<f32> for ImageBatches {
    fn next_batch(&mut self, batch: usize, level: usize) -> Array<f32> {
        assert!(level <= self.corpus.max_level(), "corpus has no level {level}");
        let idx = self.iter.next_indices(batch);
        self.corpus.gather(&idx, level)
    }
    fn position(&self) -> BatchPosition {
        self.iter.position()
    }
    fn seek(&mut self, pos: BatchPosition) {
        self.iter.seek(pos)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_arithmetic() {
        let mut it = BatchIterator::new(50_000, 1);
        assert_eq!(it.batches_per_epoch(128), 390);
        let epoch = it.epoch(128);
        assert_eq!(epoch.len(), 390);
        let mut seen = vec![false; 50_000];
        for b in &epoch {
            for &i in b {
                assert!(!seen[i], "index {i} repeated");
                seen[i] = true;
            }
        }
    }

    #[test]
    fn seeded_and_seekable() {
        let mut a = BatchIterator::new(1000, 9);
        let mut b = BatchIterator::new(1000, 9);
        let first: Vec<_> = (0..20).map(|_| a.next_indices(64)).collect();
        let again: Vec<_> = (0..20).map(|_| b.next_indices(64)).collect();
        assert_eq!(first, again);
        let pos = a.position();
        let next = a.next_indices(64);
        let mut c = BatchIterator::new(1000, 9);
        c.seek(pos);
        assert_eq!(c.next_indices(64), next);
        assert_ne!(BatchIterator::new(1000, 10).next_indices(64), first[0]);
    }

    #[test]
    fn partial_batch_dropped() {
        let mut it = BatchIterator::new(10, 0);
        it.next_indices(4);
        it.next_indices(4);
        assert_eq!(it.position().epoch, 0);
        it.next_indices(4);
        assert_eq!(it.position(), BatchPosition { epoch: 1, cursor: 4 });
    }
}
