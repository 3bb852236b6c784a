//! Schedule-free Adam and plain Adam.
//!
//! Schedule-free step `t → t+1` (learning rate `η`, per-parameter scale):
//!
//! ```text
//! y  = (1 - β1)·z + β1·x          gradient g is evaluated at y
//! v  = β2·v + (1 - β2)·g²
//! z  = z - η·g / (sqrt(v / (1 - β2^(t+1))) + eps)
//! x  = (1 - c)·x + c·z            c = w_t² / Σ_{i≤t} w_i²
//! ```
//!
//! `w_t` is the warmup factor `min(1, (t+1)/warmup)`; with no warmup it is 1
//! and `c = 1/(t+1)`, so `x` is the running mean of the `z` iterates.
//! Evaluation uses `x`.

use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("learning rate must be finite and > 0")]
    NonPositiveLr,
    #[error("{name} must lie in [0, 1)")]
    InvalidBeta { name: &'static str },
    #[error("eps must be finite and > 0")]
    InvalidEps,
    #[error("gradient component {index} is not finite; step rejected")]
    NonFiniteGradient { index: usize },
    #[error("expected {expected} values, got {found}")]
    LengthMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    ScheduleFree,
    Adam,
}

impl OptimizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ScheduleFree => "schedule-free",
            Self::Adam => "adam",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "schedule-free" => Ok(Self::ScheduleFree),
            "adam" => Ok(Self::Adam),
            _ => Err(format!("unknown optimizer `{s}` (expected schedule-free or adam)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct AdamConfig<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub warmup_steps: u64,
}

impl<T: Scalar> Default for AdamConfig<T> {
    fn default() -> Self {
        Self {
            lr: T::of(1e-3),
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
            warmup_steps: 0,
        }
    }
}

impl<T: Scalar> AdamConfig<T> {
    pub fn validate(&self) -> Result<(), OptimError> {
        if !(self.lr.is_finite() && self.lr > T::zero()) {
            return Err(OptimError::NonPositiveLr);
        }
        let unit = |b: T| b >= T::zero() && b < T::one();
        if !unit(self.beta1) {
            return Err(OptimError::InvalidBeta { name: "beta1" });
        }
        if !unit(self.beta2) {
            return Err(OptimError::InvalidBeta { name: "beta2" });
        }
        if !(self.eps.is_finite() && self.eps > T::zero()) {
            return Err(OptimError::InvalidEps);
        }
        Ok(())
    }

    fn warmup_factor(&self, t: u64) -> T {
        if self.warmup_steps == 0 || t >= self.warmup_steps {
            T::one()
        } else {
            T::of((t + 1) as f64 / self.warmup_steps as f64)
        }
    }
}

/// A contiguous run of parameters sharing one learning rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamGroup<T> {
    pub len: usize,
    pub lr: T,
}

fn expand_groups<T: Scalar>(n: usize, groups: &[ParamGroup<T>]) -> Result<Vec<T>, OptimError> {
    let total: usize = groups.iter().map(|g| g.len).sum();
    if total != n {
        return Err(OptimError::LengthMismatch {
            expected: n,
            found: total,
        });
    }
    let mut lrs = Vec::with_capacity(n);
    for g in groups {
        if !(g.lr.is_finite() && g.lr > T::zero()) {
            return Err(OptimError::NonPositiveLr);
        }
        lrs.extend(std::iter::repeat_n(g.lr, g.len));
    }
    Ok(lrs)
}

fn checked_grad<T: Scalar>(g: Vec<T>, n: usize) -> Result<Vec<T>, OptimError> {
    if g.len() != n {
        return Err(OptimError::LengthMismatch {
            expected: n,
            found: g.len(),
        });
    }
    if let Some(index) = g.iter().position(|v| !v.is_finite()) {
        return Err(OptimError::NonFiniteGradient { index });
    }
    Ok(g)
}

/// State of a schedule-free Adam run.
#[derive(Debug, Clone, PartialEq)]
pub struct SfAdamState<T> {
    z: Vec<T>,
    x: Vec<T>,
    v: Vec<T>,
    t: u64,
    lr: Vec<T>,
    weight_sum: T,
    cfg: AdamConfig<T>,
}

/// Starts a schedule-free run at `params` with a single learning rate.
pub fn sf_adam_init<T: Scalar>(params: &[T], cfg: AdamConfig<T>) -> Result<SfAdamState<T>, OptimError> {
    SfAdamState::with_groups(
        params,
        &[ParamGroup {
            len: params.len(),
            lr: cfg.lr,
        }],
        cfg,
    )
}

impl<T: Scalar> SfAdamState<T> {
    /// Starts a run where each group uses its own learning rate
    /// (`cfg.lr` is then only validated).
    pub fn with_groups(params: &[T], groups: &[ParamGroup<T>], cfg: AdamConfig<T>) -> Result<Self, OptimError> {
        cfg.validate()?;
        let lr = expand_groups(params.len(), groups)?;
        Ok(Self {
            z: params.to_vec(),
            x: params.to_vec(),
            v: vec![T::zero(); params.len()],
            t: 0,
            lr,
            weight_sum: T::zero(),
            cfg,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn base(&self) -> &[T] {
        &self.z
    }

    pub fn second_moment(&self) -> &[T] {
        &self.v
    }

    pub fn config(&self) -> &AdamConfig<T> {
        &self.cfg
    }

    /// The averaged iterate `x`, used for evaluation.
    pub fn eval_point(&self) -> &[T] {
        &self.x
    }

    /// Point at which the next gradient is evaluated.
    pub fn query_point(&self) -> Vec<T> {
        let b1 = self.cfg.beta1;
        self.z
            .iter()
            .zip(&self.x)
            .map(|(&z, &x)| (T::one() - b1) * z + b1 * x)
            .collect()
    }

    /// One step. On a non-finite gradient the state is left untouched.
    pub fn step<F>(&mut self, mut grad_at: F) -> Result<(), OptimError>
    where
        F: FnMut(&[T]) -> Vec<T>,
    {
        let y = self.query_point();
        let g = checked_grad(grad_at(&y), self.z.len())?;
        let AdamConfig { beta2, eps, .. } = self.cfg;
        let bias2 = T::one() - beta2.powi((self.t + 1).min(i32::MAX as u64) as i32);
        let w = self.cfg.warmup_factor(self.t);
        self.weight_sum += w * w;
        let c = w * w / self.weight_sum;
        for i in 0..self.z.len() {
            let gi = g[i];
            self.v[i] = beta2 * self.v[i] + (T::one() - beta2) * gi * gi;
            let denom = (self.v[i] / bias2).sqrt() + eps;
            self.z[i] -= self.lr[i] * w * gi / denom;
            self.x[i] = (T::one() - c) * self.x[i] + c * self.z[i];
        }
        self.t += 1;
        Ok(())
    }
}

/// State of a plain Adam run; its evaluation point is the iterate itself.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    z: Vec<T>,
    m: Vec<T>,
    v: Vec<T>,
    t: u64,
    lr: Vec<T>,
    cfg: AdamConfig<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &[T], cfg: AdamConfig<T>) -> Result<Self, OptimError> {
        Self::with_groups(
            params,
            &[ParamGroup {
                len: params.len(),
                lr: cfg.lr,
            }],
            cfg,
        )
    }

    pub fn with_groups(params: &[T], groups: &[ParamGroup<T>], cfg: AdamConfig<T>) -> Result<Self, OptimError> {
        cfg.validate()?;
        let lr = expand_groups(params.len(), groups)?;
        let n = params.len();
        Ok(Self {
            z: params.to_vec(),
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
            lr,
            cfg,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn eval_point(&self) -> &[T] {
        &self.z
    }

    pub fn query_point(&self) -> Vec<T> {
        self.z.clone()
    }

    pub fn step<F>(&mut self, mut grad_at: F) -> Result<(), OptimError>
    where
        F: FnMut(&[T]) -> Vec<T>,
    {
        let g = checked_grad(grad_at(&self.z), self.z.len())?;
        let AdamConfig { beta1, beta2, eps, .. } = self.cfg;
        let step = (self.t + 1).min(i32::MAX as u64) as i32;
        let bias1 = T::one() - beta1.powi(step);
        let bias2 = T::one() - beta2.powi(step);
        let w = self.cfg.warmup_factor(self.t);
        for i in 0..self.z.len() {
            let gi = g[i];
            self.m[i] = beta1 * self.m[i] + (T::one() - beta1) * gi;
            self.v[i] = beta2 * self.v[i] + (T::one() - beta2) * gi * gi;
            let mhat = self.m[i] / bias1;
            let vhat = self.v[i] / bias2;
            self.z[i] -= self.lr[i] * w * mhat / (vhat.sqrt() + eps);
        }
        self.t += 1;
        Ok(())
    }
}

/// Either optimizer behind one interface.
#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer<T> {
    ScheduleFree(SfAdamState<T>),
    Adam(AdamState<T>),
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(
        kind: OptimizerKind,
        params: &[T],
        groups: &[ParamGroup<T>],
        cfg: AdamConfig<T>,
    ) -> Result<Self, OptimError> {
        Ok(match kind {
            OptimizerKind::ScheduleFree => Self::ScheduleFree(SfAdamState::with_groups(params, groups, cfg)?),
            OptimizerKind::Adam => Self::Adam(AdamState::with_groups(params, groups, cfg)?),
        })
    }

    pub fn step<F>(&mut self, grad_at: F) -> Result<(), OptimError>
    where
        F: FnMut(&[T]) -> Vec<T>,
    {
        match self {
            Self::ScheduleFree(s) => s.step(grad_at),
            Self::Adam(s) => s.step(grad_at),
        }
    }

    pub fn eval_point(&self) -> &[T] {
        match self {
            Self::ScheduleFree(s) => s.eval_point(),
            Self::Adam(s) => s.eval_point(),
        }
    }

    pub fn step_count(&self) -> u64 {
        match self {
            Self::ScheduleFree(s) => s.step_count(),
            Self::Adam(s) => s.step_count(),
        }
    }
}
