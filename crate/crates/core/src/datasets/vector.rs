//! MNIST as flat 784-D vectors, and the two split protocols.

use std::path::Path;

use alae_autodiff::Array;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::images::normalize;
use super::{read_idx_images, read_idx_labels, DataError};
use crate::rng::stream;

/// Seed of the same-writer partition. Fixed so that results are
/// comparable across runs and implementations.
pub const SW_SPLIT_SEED: u64 = 20_200_401;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// Same writers: 50k / 10k carved out of the official training set.
    Sw,
    /// Different writers: the official 60k / 10k split.
    Dw,
}

#[derive(Clone, Debug)]
pub struct VectorDataset {
    /// `[n, 784]`, values in `[-1, 1]`.
    pub samples: Array<f32>,
    pub labels: Vec<u8>,
    /// Positions in the source corpus.
    pub indices: Vec<usize>,
}

impl VectorDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.shape()[1]
    }

    /// Rows `idx` as a new `[idx.len(), dim]` array.
    pub fn gather(&self, idx: &[usize]) -> Array<f32> {
        let d = self.dim();
        let mut out = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            out.extend_from_slice(&self.samples.data()[i * d..(i + 1) * d]);
        }
        Array::from_vec(vec![idx.len(), d], out)
    }

    pub fn subset(&self, idx: &[usize]) -> VectorDataset {
        VectorDataset {
            samples: self.gather(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            indices: idx.iter().map(|&i| self.indices[i]).collect(),
        }
    }

    /// Builds a dataset from 8-bit pixel rows.
    pub fn from_bytes(pixels: &[u8], dim: usize, labels: Vec<u8>) -> Result<Self, DataError> {
        if pixels.len() != labels.len() * dim {
            return Err(DataError::Invalid(format!(
                "{} pixels do not match {} labels of dimension {dim}",
                pixels.len(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 9) {
            return Err(DataError::Invalid(format!("label {l} outside 0..=9")));
        }
        let n = labels.len();
        Ok(VectorDataset {
            samples: Array::from_vec(vec![n, dim], pixels.iter().map(|&p| normalize(p)).collect()),
            labels,
            indices: (0..n).collect(),
        })
    }
}

fn load_pair(dir: &Path, images: &str, labels: &str) -> Result<VectorDataset, DataError> {
    let img = read_idx_images(&dir.join(images))?;
    let lab = read_idx_labels(&dir.join(labels))?;
    if img.count != lab.len() {
        return Err(DataError::Invalid(format!(
            "{images} has {} images but {labels} has {} labels",
            img.count,
            lab.len()
        )));
    }
    VectorDataset::from_bytes(&img.pixels, img.rows * img.cols, lab)
}

/// Official (train, test) corpora from a directory of uncompressed IDX files.
pub fn load_mnist(dir: &Path) -> Result<(VectorDataset, VectorDataset), DataError> {
    Ok((
        load_pair(dir, "train-images-idx3-ubyte", "train-labels-idx1-ubyte")?,
        load_pair(dir, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")?,
    ))
}

/// The seeded permutation behind the same-writer split: the first 50k
/// positions form the training part.
pub fn sw_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream(seed, "sw-split"));
    perm
}

/// Applies a split protocol to the official corpora.
pub fn make_sw_dw_splits(
    official_train: &VectorDataset,
    official_test: &VectorDataset,
    mode: SplitMode,
    seed: u64,
) -> Result<(VectorDataset, VectorDataset), DataError> {
    if official_train.len() != 60_000 || official_test.len() != 10_000 {
        return Err(DataError::Invalid(format!(
            "expected 60000 training and 10000 test items, got {} and {}",
            official_train.len(),
            official_test.len()
        )));
    }
    match mode {
        SplitMode::Dw => Ok((official_train.clone(), official_test.clone())),
        SplitMode::Sw => {
            let perm = sw_permutation(official_train.len(), seed);
            let mut train = perm[..50_000].to_vec();
            let mut test = perm[50_000..].to_vec();
            train.sort_unstable();
            test.sort_unstable();
            Ok((official_train.subset(&train), official_train.subset(&test)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake(n: usize) -> VectorDataset {
        let pixels: Vec<u8> = (0..n * 2).map(|i| (i % 256) as u8).collect();
        VectorDataset::from_bytes(&pixels, 2, (0..n).map(|i| (i % 10) as u8).collect()).unwrap()
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let (tr, te) = (fake(60_000), fake(10_000));
        let (a, b) = make_sw_dw_splits(&tr, &te, SplitMode::Dw, SW_SPLIT_SEED).unwrap();
        assert_eq!((a.len(), b.len()), (60_000, 10_000));
        let (a, b) = make_sw_dw_splits(&tr, &te, SplitMode::Sw, SW_SPLIT_SEED).unwrap();
        assert_eq!((a.len(), b.len()), (50_000, 10_000));
        let mut all: Vec<usize> = a.indices.iter().chain(&b.indices).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..60_000).collect::<Vec<_>>());
        let (a2, _) = make_sw_dw_splits(&tr, &te, SplitMode::Sw, SW_SPLIT_SEED).unwrap();
        assert_eq!(a.indices, a2.indices);
        assert!(make_sw_dw_splits(&fake(100), &te, SplitMode::Sw, 0).is_err());
    }
}
