use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassLabel, DatasetError, EpochSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    pub test_subject: String,
    pub train_subjects: Vec<String>,
}

/// One fold per subject; each subject is the test subject exactly once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }
}

pub fn make_loso_folds(subject_ids: &[String]) -> Result<FoldPlan, DatasetError> {
    let mut seen = BTreeSet::new();
    for id in subject_ids {
        if !seen.insert(id.as_str()) {
            return Err(DatasetError::DuplicateSubject(id.clone()));
        }
    }
    if subject_ids.len() < 2 {
        return Err(DatasetError::TooFewSubjects(subject_ids.len()));
    }
    let folds = subject_ids
        .iter()
        .enumerate()
        .map(|(index, test)| Fold {
            index,
            test_subject: test.clone(),
            train_subjects: subject_ids.iter().filter(|s| *s != test).cloned().collect(),
        })
        .collect();
    Ok(FoldPlan { folds })
}

/// Stratified train/validation split.
///
/// For each class present, the trials are shuffled with a generator seeded by
/// `seed` and `floor(ratio · n_class)` go to the training part; the rest go to
/// validation. Both parts keep the original trial order.
pub fn split_train_val(
    epochs: &EpochSet,
    ratio: f64,
    seed: u64,
) -> Result<(EpochSet, EpochSet), DatasetError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DatasetError::InvalidRatio(ratio));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::new();
    let mut val_idx = Vec::new();
    for label in ClassLabel::ALL {
        let mut idx: Vec<usize> = epochs
            .labels()
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == label)
            .map(|(i, _)| i)
            .collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(DatasetError::ClassTooSmall {
                label,
                count: idx.len(),
            });
        }
        idx.shuffle(&mut rng);
        let n_train = (ratio * idx.len() as f64).floor() as usize;
        train_idx.extend_from_slice(&idx[..n_train]);
        val_idx.extend_from_slice(&idx[n_train..]);
    }
    train_idx.sort_unstable();
    val_idx.sort_unstable();
    Ok((epochs.subset(&train_idx), epochs.subset(&val_idx)))
}
