//! Exact k-nearest-neighbour classification under Euclidean distance.

use alae_autodiff::Array;

use super::{EvalError, FeatureSet};

/// Test rows processed per distance block.
const BLOCK: usize = 128;

pub(crate) fn check_pair(train: &FeatureSet, test: &FeatureSet) -> Result<(), EvalError> {
    if train.is_empty() {
        return Err(EvalError::Empty("training feature set"));
    }
    if test.is_empty() {
        return Err(EvalError::Empty("test feature set"));
    }
    if train.kind != test.kind {
        return Err(EvalError::Mismatch(format!(
            "{} train features vs {} test features",
            train.kind.name(),
            test.kind.name()
        )));
    }
    if train.dim() != test.dim() {
        return Err(EvalError::Mismatch(format!("dimension {} vs {}", train.dim(), test.dim())));
    }
    Ok(())
}

/// Fraction of test rows whose `k` nearest training rows vote for their
/// label. Distance ties go to the lower training index; vote ties go to
/// the class whose best-ranked member is nearest.
pub fn knn_accuracy(train: &FeatureSet, test: &FeatureSet, k: usize) -> Result<f64, EvalError> {
    check_pair(train, test)?;
    if k == 0 || k > train.len() {
        return Err(EvalError::Config(format!("k = {k} with {} training rows", train.len())));
    }
    let d = train.dim();
    let n_train = train.len();
    let train_sq: Vec<f64> = (0..n_train).map(|j| train.row(j).iter().map(|v| v * v).sum()).collect();

    let mut correct = 0usize;
    let mut start = 0;
    while start < test.len() {
        let end = (start + BLOCK).min(test.len());
        let block = Array::from_vec(vec![end - start, d], test.matrix.data()[start * d..end * d].to_vec());
        let dots = block.matmul(&train.matrix, false, true);
        for (bi, i) in (start..end).enumerate() {
            let row = &dots.data()[bi * n_train..(bi + 1) * n_train];
            let test_sq: f64 = test.row(i).iter().map(|v| v * v).sum();
            // Squared distances, kept non-negative against cancellation.
            let dist = |j: usize| (train_sq[j] + test_sq - 2.0 * row[j]).max(0.0);
            let predicted = if k == 1 {
                let mut best = 0;
                let mut best_d = dist(0);
                for j in 1..n_train {
                    let dj = dist(j);
                    if dj < best_d {
                        best = j;
                        best_d = dj;
                    }
                }
                train.labels[best]
            } else {
                let mut order: Vec<(f64, usize)> = (0..n_train).map(|j| (dist(j), j)).collect();
                order.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).unwrap());
                let mut nearest = order[..k].to_vec();
                nearest.sort_by(|a, b| a.partial_cmp(b).unwrap());
                vote(nearest.iter().map(|&(_, j)| train.labels[j]))
            };
            if predicted == test.labels[i] {
                correct += 1;
            }
        }
        start = end;
    }
    Ok(correct as f64 / test.len() as f64)
}

/// Majority vote over labels given nearest first.
fn vote(labels: impl Iterator<Item = u8>) -> u8 {
    let mut counts = [0usize; 256];
    let mut first_seen = [usize::MAX; 256];
    for (rank, l) in labels.enumerate() {
        counts[l as usize] += 1;
        first_seen[l as usize] = first_seen[l as usize].min(rank);
    }
    (0..=255u8)
        .filter(|&l| counts[l as usize] > 0)
        .max_by(|&a, &b| {
            counts[a as usize]
                .cmp(&counts[b as usize])
                .then(first_seen[b as usize].cmp(&first_seen[a as usize]))
        })
        .unwrap_or(0)
}
