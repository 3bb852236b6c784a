//! Two-phase and single-phase training of [`ModelParams`].
//!
//! Phase 1 trains the head over a fully frozen adapter; phase 2 unfreezes the
//! last blocks and continues with a fresh optimizer at a lower rate. Only the
//! trainable parameters are handed to the optimizer, so frozen blocks never
//! change. The frozen prefix of the adapter is evaluated once per phase and
//! cached.

use crate::data::{Dataset, DepthClass};
use crate::evaluation::metrics::{ConfusionCounts, Metrics};
use crate::focal::{focal_loss, FocalConfig, FocalError};
use crate::model::{fill_dropout_mask, ModelError, ModelParams, NormStats, Workspace};
use crate::optim::{AdamConfig, OptimError, Optimizer, OptimizerKind};
use crate::scalar::Scalar;
use crate::seed::{derive, derive_indexed};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("training set is empty")]
    Empty,
    #[error("training set contains only {0} samples; both classes are required")]
    SingleClass(DepthClass),
    #[error("validation set has dimension {found}, training set {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Focal(#[from] FocalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct TrainConfig<T> {
    pub focal: FocalConfig<T>,
    pub dropout: T,
    pub lr_phase1: T,
    pub lr_phase2: T,
    pub epochs_phase1: usize,
    pub epochs_phase2: usize,
    /// Adapter depth.
    pub blocks: usize,
    pub unfreeze_blocks: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub warmup_steps: u64,
    /// Std of the adapter's identity perturbation and of the head weights.
    pub init_noise: T,
    /// Early stop after this many epochs without validation-loss improvement.
    pub patience: Option<usize>,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            focal: FocalConfig::default(),
            dropout: T::of(0.3),
            lr_phase1: T::of(1e-3),
            lr_phase2: T::of(1e-5),
            epochs_phase1: 50,
            epochs_phase2: 50,
            blocks: 6,
            unfreeze_blocks: 4,
            batch_size: 32,
            seed: 0,
            optimizer: OptimizerKind::ScheduleFree,
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
            warmup_steps: 0,
            init_noise: T::of(0.01),
            patience: None,
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        self.focal.validate()?;
        if !(self.dropout >= T::zero() && self.dropout < T::one()) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.unfreeze_blocks > self.blocks {
            return bad("unfreeze_blocks exceeds the number of adapter blocks");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.init_noise.is_finite() && self.init_noise >= T::zero()) {
            return bad("init_noise must be finite and >= 0");
        }
        if self.patience == Some(0) {
            return bad("patience must be positive");
        }
        self.adam(self.lr_phase1).validate()?;
        self.adam(self.lr_phase2).validate()?;
        Ok(())
    }

    fn adam(&self, lr: T) -> AdamConfig<T> {
        AdamConfig {
            lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            warmup_steps: self.warmup_steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Head,
    FineTune,
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValRecord {
    pub loss: f64,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: Phase,
    pub train_loss: f64,
    pub val: Option<ValRecord>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Index of the first epoch after phase 1.
    pub phase_boundary: usize,
    pub stopped_early: bool,
}

/// Standardized inputs and targets.
struct Prepared<T> {
    xs: Vec<Vec<T>>,
    labels: Vec<DepthClass>,
}

impl<T: Scalar> Prepared<T> {
    fn new(ds: &Dataset, params: &ModelParams<T>) -> Result<Self, ModelError> {
        let xs = ds
            .iter()
            .map(|s| {
                let x: Vec<T> = s.features().iter().map(|&v| T::of(v)).collect();
                params.standardize(&x)
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            xs,
            labels: ds.labels(),
        })
    }
}

fn check_inputs<T: Scalar>(train: &Dataset, val: &Dataset, cfg: &TrainConfig<T>) -> Result<(), TrainError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::Empty);
    }
    let counts = train.class_counts();
    for c in DepthClass::ALL {
        if counts.get(c) == train.len() {
            return Err(TrainError::SingleClass(c));
        }
    }
    if !val.is_empty() && val.dim() != train.dim() {
        return Err(TrainError::DimensionMismatch {
            expected: train.dim(),
            found: val.dim(),
        });
    }
    Ok(())
}

fn initial_params<T: Scalar>(train: &Dataset, cfg: &TrainConfig<T>) -> ModelParams<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, "init"));
    let mut params = ModelParams::init(train.dim(), cfg.blocks, cfg.init_noise, &mut rng);
    params.set_norm_stats(NormStats::fit(train.iter().map(|s| s.features()), train.dim()));
    params
}

/// Head-only phase, then fine-tuning of the last `unfreeze_blocks` blocks.
pub fn train_two_phase<T: Scalar>(
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig<T>,
) -> Result<(ModelParams<T>, TrainHistory), TrainError> {
    check_inputs(train, val, cfg)?;
    let mut params = initial_params(train, cfg);
    let tr = Prepared::new(train, &params)?;
    let va = Prepared::new(val, &params)?;
    let mut history = TrainHistory::default();

    params.freeze_all();
    run_phase(
        &mut params,
        &tr,
        &va,
        cfg,
        Phase::Head,
        cfg.lr_phase1,
        cfg.epochs_phase1,
        &mut history,
    )?;
    history.phase_boundary = history.epochs.len();
    if cfg.epochs_phase2 > 0 && !history.stopped_early {
        params.unfreeze_last(cfg.unfreeze_blocks);
        run_phase(
            &mut params,
            &tr,
            &va,
            cfg,
            Phase::FineTune,
            cfg.lr_phase2,
            cfg.epochs_phase2,
            &mut history,
        )?;
    }
    Ok((params, history))
}

/// Everything trainable from the first step, at `lr_phase1`, for the combined
/// epoch budget.
pub fn train_single_phase<T: Scalar>(
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig<T>,
) -> Result<(ModelParams<T>, TrainHistory), TrainError> {
    check_inputs(train, val, cfg)?;
    let mut params = initial_params(train, cfg);
    let tr = Prepared::new(train, &params)?;
    let va = Prepared::new(val, &params)?;
    let mut history = TrainHistory::default();

    params.unfreeze_last(cfg.blocks);
    let epochs = cfg.epochs_phase1 + cfg.epochs_phase2;
    run_phase(
        &mut params,
        &tr,
        &va,
        cfg,
        Phase::Joint,
        cfg.lr_phase1,
        epochs,
        &mut history,
    )?;
    history.phase_boundary = history.epochs.len();
    Ok((params, history))
}

#[allow(clippy::too_many_arguments)]
fn run_phase<T: Scalar>(
    params: &mut ModelParams<T>,
    train: &Prepared<T>,
    val: &Prepared<T>,
    cfg: &TrainConfig<T>,
    phase: Phase,
    lr: T,
    epochs: usize,
    history: &mut TrainHistory,
) -> Result<(), TrainError> {
    if epochs == 0 {
        return Ok(());
    }
    let start = params.first_trainable_block();
    let cache: Vec<Vec<T>> = train
        .xs
        .iter()
        .map(|h| params.run_blocks(h.clone(), 0..start))
        .collect();
    let targets: Vec<usize> = train.labels.iter().map(|c| c.index()).collect();

    let flat = params.pack_trainable();
    let groups = params.param_groups(lr, lr);
    let mut opt = Optimizer::new(cfg.optimizer, &flat, &groups, cfg.adam(lr))?;

    let phase_tag = phase as u64;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_indexed(cfg.seed, "shuffle", phase_tag));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_indexed(cfg.seed, "dropout", phase_tag));
    let use_dropout = cfg.dropout > T::zero();
    let dim = params.dim();

    let mut order: Vec<usize> = (0..cache.len()).collect();
    let mut masks: Vec<Vec<T>> = vec![vec![T::one(); dim]; cfg.batch_size];
    let mut ws = Workspace::new();
    let mut best = f64::INFINITY;
    let mut stale = 0;

    for _ in 0..epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            if use_dropout {
                for m in &mut masks[..batch.len()] {
                    fill_dropout_mask(m, cfg.dropout, &mut dropout_rng)?;
                }
            }
            let scale = T::one() / T::of(batch.len() as f64);
            let mut batch_loss = T::zero();
            let mut failure = None;
            let step = opt.step(|y| {
                let mut grad = vec![T::zero(); y.len()];
                if let Err(e) = params.unpack_trainable(y) {
                    failure = Some(e);
                    return grad;
                }
                batch_loss = T::zero();
                for (b, &i) in batch.iter().enumerate() {
                    let mask = use_dropout.then(|| masks[b].as_slice());
                    match params.accumulate_gradient(
                        &cache[i], start, targets[i], mask, &cfg.focal, scale, &mut grad, &mut ws,
                    ) {
                        Ok(l) => batch_loss += l,
                        Err(e) => {
                            failure = Some(e);
                            grad.fill(T::nan());
                            break;
                        }
                    }
                }
                grad
            });
            if let Some(e) = failure {
                return Err(e.into());
            }
            step?;
            epoch_loss += batch_loss.to_f64_lossy();
        }
        params.unpack_trainable(opt.eval_point())?;

        let val_record = evaluate(params, val, &cfg.focal)?;
        let val_loss = val_record.as_ref().map(|v| v.loss);
        history.epochs.push(EpochRecord {
            phase,
            train_loss: epoch_loss / train.xs.len() as f64,
            val: val_record,
        });
        if let (Some(p), Some(loss)) = (cfg.patience, val_loss) {
            if loss < best {
                best = loss;
                stale = 0;
            } else {
                stale += 1;
                if stale >= p {
                    history.stopped_early = true;
                    break;
                }
            }
        }
    }
    params.unpack_trainable(opt.eval_point())?;
    Ok(())
}

fn evaluate<T: Scalar>(
    params: &ModelParams<T>,
    val: &Prepared<T>,
    focal: &FocalConfig<T>,
) -> Result<Option<ValRecord>, TrainError> {
    if val.xs.is_empty() {
        return Ok(None);
    }
    let mut loss = 0.0;
    let mut p_high = Vec::with_capacity(val.xs.len());
    for (h, label) in val.xs.iter().zip(&val.labels) {
        let z = params.logits_standardized(h);
        loss += focal_loss(z, label.index(), focal)?.to_f64_lossy();
        p_high.push(crate::focal::ProbOutput::from_logits(z).p_high());
    }
    let counts = ConfusionCounts::from_probabilities(&val.labels, &p_high, T::of(0.5));
    Ok(Some(ValRecord {
        loss: loss / val.xs.len() as f64,
        counts,
        metrics: counts.metrics(),
    }))
}

/// Eval-mode `P(High)` for every sample of `ds`.
pub fn predict_dataset<T: Scalar>(params: &ModelParams<T>, ds: &Dataset) -> Result<Vec<T>, ModelError> {
    ds.iter()
        .map(|s| {
            let x: Vec<T> = s.features().iter().map(|&v| T::of(v)).collect();
            params.predict(&x).map(|p| p.p_high())
        })
        .collect()
}

/// Adapter outputs (standardized, after every block) for every sample.
pub fn adapter_features<T: Scalar>(params: &ModelParams<T>, ds: &Dataset) -> Result<Vec<Vec<T>>, ModelError> {
    ds.iter()
        .map(|s| {
            let x: Vec<T> = s.features().iter().map(|&v| T::of(v)).collect();
            params.adapter_output(&x)
        })
        .collect()
}
