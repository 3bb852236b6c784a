//! Binary focal loss with per-class weights and label smoothing.
//!
//! For logits `z`, softmax probabilities `p` and the smoothed target
//! distribution `q` (`q_target = 1 - ε`, `q_other = ε`):
//!
//! ```text
//! L(z) = Σ_c q_c · α_c · (1 - p_c)^γ · (-log p_c)
//! ```
//!
//! With `γ = 0` this is class-weighted, label-smoothed cross-entropy.
//! Log-probabilities come from the shifted log-sum-exp; `1 - p_c` is taken as
//! the other class's probability and clamped to `MIN_FOCAL_BASE` inside the
//! focal factor only.

use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lower clamp for `1 - p_c` inside `(1 - p_c)^γ`.
pub const MIN_FOCAL_BASE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FocalError {
    #[error("logits must be finite")]
    NonFiniteLogits,
    #[error("target class {0} out of range for a binary head")]
    InvalidTarget(usize),
    #[error("gamma must be finite and >= 0")]
    InvalidGamma,
    #[error("class weights must be finite and > 0")]
    InvalidAlpha,
    #[error("label smoothing must lie in [0, 1)")]
    InvalidSmoothing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct FocalConfig<T> {
    pub gamma: T,
    pub alpha: [T; 2],
    pub smoothing: T,
}

impl<T: Scalar> FocalConfig<T> {
    pub fn new(gamma: T, alpha: [T; 2], smoothing: T) -> Result<Self, FocalError> {
        let cfg = Self {
            gamma,
            alpha,
            smoothing,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), FocalError> {
        if !(self.gamma.is_finite() && self.gamma >= T::zero()) {
            return Err(FocalError::InvalidGamma);
        }
        if !self.alpha.iter().all(|a| a.is_finite() && *a > T::zero()) {
            return Err(FocalError::InvalidAlpha);
        }
        if !(self.smoothing >= T::zero() && self.smoothing < T::one()) {
            return Err(FocalError::InvalidSmoothing);
        }
        Ok(())
    }

    /// Smoothed target mass for class `c` given the true class `target`.
    #[inline]
    pub fn target_mass(&self, c: usize, target: usize) -> T {
        if c == target {
            T::one() - self.smoothing
        } else {
            self.smoothing
        }
    }
}

impl<T: Scalar> Default for FocalConfig<T> {
    /// γ = 0.3, α = (1, 5), ε = 0.1.
    fn default() -> Self {
        Self {
            gamma: T::of(0.3),
            alpha: [T::one(), T::of(5.0)],
            smoothing: T::of(0.1),
        }
    }
}

/// Softmax probabilities of a binary head; entries sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbOutput<T> {
    pub probs: [T; 2],
}

impl<T: Scalar> ProbOutput<T> {
    pub fn from_logits(logits: [T; 2]) -> Self {
        let lp = log_softmax2(logits);
        Self {
            probs: [lp[0].exp(), lp[1].exp()],
        }
    }

    /// Probability of the positive (High) class.
    #[inline]
    pub fn p_high(&self) -> T {
        self.probs[1]
    }
}

/// Numerically stable log-softmax of two logits.
#[inline]
pub fn log_softmax2<T: Scalar>(z: [T; 2]) -> [T; 2] {
    let m = z[0].max(z[1]);
    let lse = m + ((z[0] - m).exp() + (z[1] - m).exp()).ln();
    [z[0] - lse, z[1] - lse]
}

fn check_inputs<T: Scalar>(logits: [T; 2], target: usize) -> Result<(), FocalError> {
    if !(logits[0].is_finite() && logits[1].is_finite()) {
        return Err(FocalError::NonFiniteLogits);
    }
    if target > 1 {
        return Err(FocalError::InvalidTarget(target));
    }
    Ok(())
}

/// Loss and its gradient with respect to the logits.
pub fn focal_loss_and_grad<T: Scalar>(
    logits: [T; 2],
    target: usize,
    cfg: &FocalConfig<T>,
) -> Result<(T, [T; 2]), FocalError> {
    check_inputs(logits, target)?;
    let logp = log_softmax2(logits);
    let p = [logp[0].exp(), logp[1].exp()];
    let gamma = cfg.gamma;
    let floor = T::of(MIN_FOCAL_BASE);

    let mut loss = T::zero();
    // d(loss_c)/d(p_c) · p_c, per class, weighted.
    let mut wg = [T::zero(); 2];
    for c in 0..2 {
        let w = cfg.target_mass(c, target) * cfg.alpha[c];
        let base = p[1 - c].max(floor);
        let focal = base.powf(gamma);
        let nll = -logp[c];
        loss += w * focal * nll;
        let dfocal = if gamma == T::zero() {
            T::zero()
        } else {
            gamma * base.powf(gamma - T::one()) * p[c] * nll
        };
        wg[c] = w * (-dfocal - focal);
    }
    let s = wg[0] + wg[1];
    let grad = [wg[0] - p[0] * s, wg[1] - p[1] * s];
    Ok((loss, grad))
}

pub fn focal_loss<T: Scalar>(logits: [T; 2], target: usize, cfg: &FocalConfig<T>) -> Result<T, FocalError> {
    focal_loss_and_grad(logits, target, cfg).map(|(l, _)| l)
}

pub fn focal_loss_grad<T: Scalar>(logits: [T; 2], target: usize, cfg: &FocalConfig<T>) -> Result<[T; 2], FocalError> {
    focal_loss_and_grad(logits, target, cfg).map(|(_, g)| g)
}

/// Arithmetic-mean focal loss over a batch of `(logits, target)` pairs.
pub fn mean_focal_loss<T: Scalar>(batch: &[([T; 2], usize)], cfg: &FocalConfig<T>) -> Result<T, FocalError> {
    if batch.is_empty() {
        return Ok(T::zero());
    }
    let mut total = T::zero();
    for &(z, y) in batch {
        total += focal_loss(z, y, cfg)?;
    }
    Ok(total / T::of(batch.len() as f64))
}
