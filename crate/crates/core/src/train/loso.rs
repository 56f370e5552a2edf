use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::LosoReport;
use super::{evaluate, train_guarded, EpochRecord, TrainConfig, TrainError};
use crate::dataset::{make_loso_folds, split_train_val, EpochSet};
use crate::decoders::{build_model, ArchitectureConfig};
use crate::nn::init_params;
use crate::seed::derive;
use crate::signal::standardize;

/// Share of each source subject's trials used for training.
const TRAIN_RATIO: f64 = 0.8;

// Salts separating the seed streams of one (fold, repetition) task.
const SALT_SPLIT: u64 = 1;
const SALT_INIT: u64 = 2;
const SALT_TRAIN: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub test_subject: String,
    /// 1-based.
    pub repetition: usize,
    pub test_accuracy: f64,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosoOutcome {
    pub report: LosoReport,
    /// Fold-major, repetition-minor.
    pub runs: Vec<RunResult>,
}

/// Errors unless `set` is free of `test_subject` trials.
pub fn assert_no_leakage(set: &EpochSet, test_subject: &str, part: &'static str) -> Result<(), TrainError> {
    if set.subject_ids().iter().any(|s| s == test_subject) {
        return Err(TrainError::Leakage {
            subject: test_subject.to_string(),
            part,
        });
    }
    Ok(())
}

/// One subject id per set; errors when a set mixes subjects.
fn subject_of(set: &EpochSet) -> Result<String, TrainError> {
    let subjects = set.subjects();
    match subjects.len() {
        1 => Ok(subjects.into_iter().next().unwrap().to_string()),
        0 => Err(TrainError::EmptySet("subject")),
        n => Err(TrainError::InvalidConfig(format!(
            "expected one subject per epoch set, found {n}"
        ))),
    }
}

/// Checks shapes and subject ids; returns the id of every set.
fn prepare(arch: &ArchitectureConfig, data: &[EpochSet], cfg: &TrainConfig) -> Result<Vec<String>, TrainError> {
    cfg.validate()?;
    let ids = data.iter().map(subject_of).collect::<Result<Vec<_>, _>>()?;
    make_loso_folds(&ids)?;
    for set in data {
        if set.n_channels() != arch.n_channels || set.n_samples() != arch.n_samples {
            return Err(TrainError::InvalidConfig(format!(
                "architecture expects {} x {} epochs, data has {} x {}",
                arch.n_channels,
                arch.n_samples,
                set.n_channels(),
                set.n_samples()
            )));
        }
    }
    // fail before spawning any task
    build_model(arch)?;
    Ok(ids)
}

/// Fold `f` (held-out subject `data[f]`), repetition `r` (0-based).
fn run_task(
    arch: &ArchitectureConfig,
    data: &[EpochSet],
    ids: &[String],
    cfg: &TrainConfig,
    f: usize,
    r: usize,
) -> Result<RunResult, TrainError> {
    let test_subject = &ids[f];
    let wrap = |e| TrainError::Fold {
        subject: test_subject.clone(),
        repetition: r + 1,
        source: Box::new(e),
    };
    let task_seed = derive(cfg.seed, &[f as u64, r as u64]);
    let (train_parts, val_parts) = source_splits(data, f, task_seed).map_err(wrap)?;
    let run = || -> Result<RunResult, TrainError> {
        let train_set = EpochSet::concat(&train_parts.iter().collect::<Vec<_>>())?;
        let val_set = EpochSet::concat(&val_parts.iter().collect::<Vec<_>>())?;
        fit_and_score(arch, &train_set, &val_set, &data[f], test_subject, cfg, task_seed, r)
    };
    run().map_err(wrap)
}

/// Train/validation split of every source subject of fold `f`.
fn source_splits(data: &[EpochSet], f: usize, task_seed: u64) -> Result<(Vec<EpochSet>, Vec<EpochSet>), TrainError> {
    let mut train_parts = Vec::new();
    let mut val_parts = Vec::new();
    for (s, set) in data.iter().enumerate() {
        if s == f {
            continue;
        }
        let (tr, va) = split_train_val(set, TRAIN_RATIO, derive(task_seed, &[SALT_SPLIT, s as u64]))?;
        train_parts.push(tr);
        val_parts.push(va);
    }
    Ok((train_parts, val_parts))
}

/// A single LOSO task: holds out `test_subject` and uses the seeds of
/// repetition `repetition` (1-based), so the result equals the matching cell
/// of [`run_loso`] on the same data.
pub fn run_fold(
    arch: &ArchitectureConfig,
    data: &[EpochSet],
    cfg: &TrainConfig,
    test_subject: &str,
    repetition: usize,
) -> Result<RunResult, TrainError> {
    let ids = prepare(arch, data, cfg)?;
    if repetition == 0 {
        return Err(TrainError::InvalidConfig("repetitions are numbered from 1".into()));
    }
    let f = ids
        .iter()
        .position(|id| id == test_subject)
        .ok_or_else(|| TrainError::InvalidConfig(format!("no epoch set for subject {test_subject:?}")))?;
    run_task(arch, data, &ids, cfg, f, repetition - 1)
}

/// Leave-one-subject-out evaluation of `arch` over per-subject epoch sets.
///
/// Every (fold, repetition) task derives its split, initialisation and
/// shuffling seeds from `cfg.seed` and its position alone, so the result does
/// not depend on `jobs` (0 means one worker per core).
pub fn run_loso(
    arch: &ArchitectureConfig,
    data: &[EpochSet],
    cfg: &TrainConfig,
    n_repetitions: usize,
    jobs: usize,
) -> Result<LosoOutcome, TrainError> {
    let ids = prepare(arch, data, cfg)?;
    if n_repetitions == 0 {
        return Err(TrainError::InvalidConfig("n_repetitions must be at least 1".into()));
    }
    let tasks: Vec<(usize, usize)> = (0..ids.len())
        .flat_map(|f| (0..n_repetitions).map(move |r| (f, r)))
        .collect();
    let run_task = |&(f, r): &(usize, usize)| run_task(arch, data, &ids, cfg, f, r);

    let runs: Vec<RunResult> = if jobs == 1 {
        tasks.iter().map(run_task).collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| TrainError::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| tasks.par_iter().map(run_task).collect::<Result<_, _>>())?
    };

    let cells: Vec<Vec<f64>> = (0..ids.len())
        .map(|f| {
            (0..n_repetitions)
                .map(|r| runs[f * n_repetitions + r].test_accuracy)
                .collect()
        })
        .collect();
    let report = LosoReport::new(arch.variant().to_string(), ids, cells)?;
    Ok(LosoOutcome { report, runs })
}

/// Standardises with training statistics, trains a fresh model and scores
/// the held-out subject. Refuses any set that carries the test subject.
#[allow(clippy::too_many_arguments)]
pub(crate) fn fit_and_score(
    arch: &ArchitectureConfig,
    train_set: &EpochSet,
    val_set: &EpochSet,
    test_set: &EpochSet,
    test_subject: &str,
    cfg: &TrainConfig,
    task_seed: u64,
    repetition: usize,
) -> Result<RunResult, TrainError> {
    assert_no_leakage(train_set, test_subject, "training")?;
    assert_no_leakage(val_set, test_subject, "validation")?;
    if test_set.subject_ids().iter().any(|s| s != test_subject) {
        return Err(TrainError::InvalidConfig(format!(
            "test set of {test_subject} carries other subjects"
        )));
    }
    let (train_std, rest) = standardize(train_set, &[val_set.clone(), test_set.clone()])?;
    let (val_std, test_std) = (&rest[0], &rest[1]);
    let stack = build_model(arch)?;
    let params = init_params(&stack, derive(task_seed, &[SALT_INIT]));
    let train_cfg = TrainConfig {
        seed: derive(task_seed, &[SALT_TRAIN]),
        ..cfg.clone()
    };
    let out = train_guarded(&stack, params, &train_std, val_std, &train_cfg, Some(test_subject))?;
    let test_accuracy = evaluate(&stack, &out.params, test_std)?;
    Ok(RunResult {
        test_subject: test_subject.to_string(),
        repetition: repetition + 1,
        test_accuracy,
        best_epoch: out.best_epoch,
        history: out.history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ClassLabel;
    use crate::decoders::Backbone;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    const C: usize = 3;
    const T: usize = 16;

    /// Class k raises channel k; every subject has its own offset.
    fn subject(id: &str, per_class: usize, seed: u64) -> EpochSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let offset: f64 = rng.sample(StandardNormal);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for i in 0..3 * per_class {
            let label = ClassLabel::ALL[i % 3];
            for ch in 0..C {
                for _ in 0..T {
                    let s = if ch == label.index() { 1.5 } else { 0.0 };
                    data.push(s + offset * 0.1 + rng.sample::<f64, _>(StandardNormal) * 0.5);
                }
            }
            labels.push(label);
        }
        EpochSet::new(
            data,
            C,
            T,
            labels,
            vec![id.to_string(); 3 * per_class],
            (0..C).map(|c| format!("c{c}")).collect(),
            100.0,
        )
        .unwrap()
    }

    fn arch() -> ArchitectureConfig {
        let mut a = ArchitectureConfig {
            backbone: Backbone::Shallow,
            n_channels: C,
            n_samples: T,
            ..Default::default()
        };
        a.shallow.n_filters = 4;
        a.shallow.kernel_len = 3;
        a.shallow.pool_len = 6;
        a.shallow.pool_stride = 4;
        a
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            learning_rate: 1e-2,
            batch_size: 16,
            max_epochs: 4,
            patience: 4,
            seed: 7,
            ..Default::default()
        }
    }

    fn subjects(n: usize) -> Vec<EpochSet> {
        (0..n).map(|i| subject(&format!("S{i}"), 6, i as u64)).collect()
    }

    #[test]
    fn report_shape_and_parallel_equivalence() {
        let data = subjects(3);
        let a = run_loso(&arch(), &data, &cfg(), 2, 1).unwrap();
        let b = run_loso(&arch(), &data, &cfg(), 2, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.report.subjects.len(), 3);
        assert!(a.report.cells.iter().all(|r| r.len() == 2));
        assert_eq!(a.runs.len(), 6);
        assert!(a.report.cells.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        let c = run_loso(&arch(), &data, &TrainConfig { seed: 8, ..cfg() }, 2, 1).unwrap();
        assert_ne!(a.runs, c.runs);
    }

    #[test]
    fn repetitions_draw_distinct_splits() {
        let data = subjects(4);
        let split = |r: u64| source_splits(&data, 0, derive(cfg().seed, &[0, r])).unwrap();
        let (a, b) = (split(0), split(1));
        assert_eq!(split(0), a);
        assert_eq!(a.0.len(), 3);
        assert_ne!(a, b);
        for (x, y) in a.0.iter().zip(&b.0) {
            assert_eq!(x.n_trials(), y.n_trials());
        }
    }

    #[test]
    fn single_fold_matches_loso_cell() {
        let data = subjects(3);
        let all = run_loso(&arch(), &data, &cfg(), 2, 1).unwrap();
        let one = run_fold(&arch(), &data, &cfg(), "S1", 2).unwrap();
        assert_eq!(one, all.runs[3]);
        assert!(run_fold(&arch(), &data, &cfg(), "S9", 1).is_err());
        assert!(run_fold(&arch(), &data, &cfg(), "S1", 0).is_err());
    }

    #[test]
    fn leakage_probe_fires() {
        let data = subjects(3);
        let (tr, va) = split_train_val(&data[1], 0.8, 0).unwrap();
        // inject the test subject into the training pool
        let poisoned = EpochSet::concat(&[&tr, &data[0]]).unwrap();
        let err = fit_and_score(&arch(), &poisoned, &va, &data[0], "S0", &cfg(), 0, 0).unwrap_err();
        assert!(matches!(err, TrainError::Leakage { part: "training", .. }), "{err}");
        let poisoned_val = EpochSet::concat(&[&va, &data[0]]).unwrap();
        let err = fit_and_score(&arch(), &tr, &poisoned_val, &data[0], "S0", &cfg(), 0, 0).unwrap_err();
        assert!(matches!(err, TrainError::Leakage { part: "validation", .. }));
    }

    #[test]
    fn rejects_mixed_or_mismatched_sets() {
        let data = subjects(2);
        let mixed = EpochSet::concat(&[&data[0], &data[1]]).unwrap();
        assert!(run_loso(&arch(), &[mixed, data[1].clone()], &cfg(), 1, 1).is_err());
        let wrong = ArchitectureConfig {
            n_samples: T + 1,
            ..arch()
        };
        assert!(run_loso(&wrong, &data, &cfg(), 1, 1).is_err());
        assert!(run_loso(&arch(), &data[..1], &cfg(), 1, 1).is_err());
    }
}
