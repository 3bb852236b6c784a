//! Stratified k-fold assignment.

use super::EvalError;
use crate::data::DepthClass;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Fold id per sample index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    k: usize,
    assignment: Vec<usize>,
}

impl FoldSplit {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        self.assignment.iter().for_each(|&f| sizes[f] += 1);
        sizes
    }
}

/// Shuffles each class with `seed`, then deals its members round-robin.
///
/// Each class starts dealing where the previous one stopped, so fold sizes
/// also stay within one of each other. Classes absent from `labels` are
/// ignored; a present class with fewer than `k` members is an error.
pub fn stratified_kfold(labels: &[DepthClass], k: usize, seed: u64) -> Result<FoldSplit, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidK(k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut offset = 0;
    for class in DepthClass::ALL {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            return Err(EvalError::ClassTooSmall {
                class,
                count: members.len(),
                k,
            });
        }
        members.shuffle(&mut rng);
        for (j, &i) in members.iter().enumerate() {
            assignment[i] = (offset + j) % k;
        }
        offset = (offset + members.len()) % k;
    }
    Ok(FoldSplit { k, assignment })
}
