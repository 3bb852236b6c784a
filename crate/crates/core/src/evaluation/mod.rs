//! Stratified cross-validation, metrics and the ablation harness.

pub mod kfold;
pub mod metrics;

use crate::data::{DataError, Dataset, DepthClass};
use crate::model::ModelError;
use crate::optim::OptimizerKind;
use crate::scalar::Scalar;
use crate::seed::{derive, derive_indexed};
use crate::training::{predict_dataset, train_single_phase, train_two_phase, TrainConfig, TrainError};
use kfold::{stratified_kfold, FoldSplit};
use metrics::{ConfusionCounts, Metrics, DEFAULT_THRESHOLD};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("k must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("class {class} has {count} samples, fewer than k = {k}")]
    ClassTooSmall { class: DepthClass, count: usize, k: usize },
    #[error("split covers {found} samples but the dataset has {expected}")]
    SplitMismatch { expected: usize, found: usize },
    #[error("fold {fold}: {source}")]
    Train { fold: usize, source: TrainError },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("could not start worker pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    TwoPhase,
    SinglePhase,
}

/// One sample's held-out prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OofPrediction {
    pub id: String,
    pub fold: usize,
    pub thickness: Option<f64>,
    pub label: DepthClass,
    pub p_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub seed: u64,
    pub train_size: usize,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
    pub final_train_loss: Option<f64>,
    pub predictions: Vec<OofPrediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossvalReport {
    pub k: usize,
    pub folds: Vec<FoldResult>,
    pub pooled_counts: ConfusionCounts,
    /// Metrics of the summed confusion counts (headline).
    pub pooled: Metrics,
    /// Fold-averaged metrics.
    pub macro_avg: Metrics,
}

impl CrossvalReport {
    /// Held-out predictions of all folds, in dataset order.
    pub fn oof_predictions(&self, ds: &Dataset) -> Vec<OofPrediction> {
        let mut by_id: std::collections::HashMap<&str, &OofPrediction> = std::collections::HashMap::new();
        for p in self.folds.iter().flat_map(|f| &f.predictions) {
            by_id.insert(&p.id, p);
        }
        ds.iter()
            .filter_map(|s| by_id.get(s.id()).map(|p| (*p).clone()))
            .collect()
    }
}

/// Runs `f` over `0..n` with at most `jobs` threads (`0` = all cores),
/// preserving index order in the output.
pub fn run_indexed<R, F>(n: usize, jobs: usize, f: F) -> Result<Vec<R>, EvalError>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    if jobs == 1 {
        return Ok((0..n).map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| EvalError::ThreadPool(e.to_string()))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
}

/// Split used by [`crossval`] for a given root seed.
pub fn crossval_split(ds: &Dataset, k: usize, seed: u64) -> Result<FoldSplit, EvalError> {
    stratified_kfold(&ds.labels(), k, derive(seed, "kfold"))
}

/// Stratified k-fold cross-validation; fold `f` trains with seed
/// `derive_indexed(seed, "fold", f)`, so results do not depend on `jobs`.
pub fn crossval<T: Scalar>(
    ds: &Dataset,
    cfg: &TrainConfig<T>,
    mode: TrainMode,
    k: usize,
    seed: u64,
    jobs: usize,
) -> Result<CrossvalReport, EvalError> {
    let split = crossval_split(ds, k, seed)?;
    crossval_with_split(ds, &split, cfg, mode, seed, jobs)
}

pub fn crossval_with_split<T: Scalar>(
    ds: &Dataset,
    split: &FoldSplit,
    cfg: &TrainConfig<T>,
    mode: TrainMode,
    seed: u64,
    jobs: usize,
) -> Result<CrossvalReport, EvalError> {
    if split.assignment().len() != ds.len() {
        return Err(EvalError::SplitMismatch {
            expected: ds.len(),
            found: split.assignment().len(),
        });
    }
    let folds = run_indexed(split.k(), jobs, |f| run_fold(ds, split, cfg, mode, seed, f))?
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let pooled_counts: ConfusionCounts = folds.iter().map(|f| f.counts).sum();
    let per_fold: Vec<Metrics> = folds.iter().map(|f| f.metrics).collect();
    Ok(CrossvalReport {
        k: split.k(),
        pooled: pooled_counts.metrics(),
        macro_avg: Metrics::macro_average(&per_fold),
        pooled_counts,
        folds,
    })
}

fn run_fold<T: Scalar>(
    ds: &Dataset,
    split: &FoldSplit,
    base: &TrainConfig<T>,
    mode: TrainMode,
    seed: u64,
    fold: usize,
) -> Result<FoldResult, EvalError> {
    let train = ds.subset(&split.train_indices(fold));
    let test = ds.subset(&split.test_indices(fold));
    let fold_seed = derive_indexed(seed, "fold", fold as u64);
    let cfg = TrainConfig {
        seed: fold_seed,
        ..*base
    };
    let trained = match mode {
        TrainMode::TwoPhase => train_two_phase(&train, &test, &cfg),
        TrainMode::SinglePhase => train_single_phase(&train, &test, &cfg),
    };
    let (params, history) = trained.map_err(|source| EvalError::Train { fold, source })?;
    let p_high = predict_dataset(&params, &test)?;
    let counts = ConfusionCounts::from_probabilities(&test.labels(), &p_high, T::of(DEFAULT_THRESHOLD));
    let predictions = test
        .iter()
        .zip(&p_high)
        .map(|(s, p)| OofPrediction {
            id: s.id().to_string(),
            fold,
            thickness: s.thickness().map(|t| t.value()),
            label: s.label(),
            p_high: p.to_f64_lossy(),
        })
        .collect();
    Ok(FoldResult {
        fold,
        seed: fold_seed,
        train_size: train.len(),
        counts,
        metrics: counts.metrics(),
        final_train_loss: history.epochs.last().map(|e| e.train_loss),
        predictions,
    })
}

/// Ablation variants, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Full,
    NoFocal,
    NoScheduler,
    SinglePhase,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Self::Full, Self::NoFocal, Self::NoScheduler, Self::SinglePhase];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::NoFocal => "no-focal",
            Self::NoScheduler => "no-scheduler",
            Self::SinglePhase => "single-phase",
        }
    }

    /// The variant's training config and mode derived from `base`.
    pub fn apply<T: Scalar>(self, base: &TrainConfig<T>) -> (TrainConfig<T>, TrainMode) {
        let mut cfg = *base;
        let mut mode = TrainMode::TwoPhase;
        match self {
            Self::Full => {}
            Self::NoFocal => cfg.focal.gamma = T::zero(),
            Self::NoScheduler => cfg.optimizer = OptimizerKind::Adam,
            Self::SinglePhase => mode = TrainMode::SinglePhase,
        }
        (cfg, mode)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown variant `{s}` (expected full, no-focal, no-scheduler or single-phase)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub report: CrossvalReport,
}

/// Cross-validates every variant on one shared split.
pub fn ablate<T: Scalar>(
    ds: &Dataset,
    base: &TrainConfig<T>,
    variants: &[Variant],
    k: usize,
    seed: u64,
    jobs: usize,
) -> Result<Vec<AblationRow>, EvalError> {
    let split = crossval_split(ds, k, seed)?;
    variants
        .iter()
        .map(|&variant| {
            let (cfg, mode) = variant.apply(base);
            let report = crossval_with_split(ds, &split, &cfg, mode, seed, jobs)?;
            Ok(AblationRow { variant, report })
        })
        .collect()
}
