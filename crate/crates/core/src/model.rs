//! Classifier over deep features.
//!
//! `x → standardize → B adapter blocks → dropout → dense head → softmax`.
//!
//! Each adapter block stands in for one tail block of a convolutional
//! backbone. It is residual: `h' = h + φ((W − I)·h + b)`, where `φ` is the
//! shifted softplus `ln(1 + eᵘ) − ln 2` (smooth ramp with `φ(0) = 0`). An
//! identity `W` with zero bias is therefore the identity map, and the
//! near-identity initialization `W = I + noise` starts every block close to it.

use crate::focal::{focal_loss_and_grad, FocalConfig, FocalError, ProbOutput};
use crate::optim::ParamGroup;
use crate::scalar::{dot, Scalar};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Name of the fixed block nonlinearity, echoed in run reports.
pub const ACTIVATION: &str = "shifted-softplus";

/// Standard deviations below this are treated as 1 when standardizing.
const MIN_STD: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dropout rate must lie in [0, 1)")]
    InvalidDropout,
    #[error("parameter vector has {found} values, expected {expected}")]
    ParamLength { expected: usize, found: usize },
    #[error(transparent)]
    Loss(#[from] FocalError),
}

/// Shifted softplus, `ln(1 + eᵘ) − ln 2`.
#[inline]
pub fn ramp<T: Scalar>(u: T) -> T {
    u.max(T::zero()) + (-u.abs()).exp().ln_1p() - T::of(std::f64::consts::LN_2)
}

/// Derivative of [`ramp`]: the logistic sigmoid.
#[inline]
pub fn ramp_grad<T: Scalar>(u: T) -> T {
    if u >= T::zero() {
        T::one() / (T::one() + (-u).exp())
    } else {
        let e = u.exp();
        e / (T::one() + e)
    }
}

/// Per-feature standardization statistics, fixed once computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct NormStats<T> {
    mean: Vec<T>,
    std: Vec<T>,
}

impl<T: Scalar> NormStats<T> {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![T::zero(); dim],
            std: vec![T::one(); dim],
        }
    }

    /// Mean and population standard deviation of each feature.
    pub fn fit<'a, I>(rows: I, dim: usize) -> Self
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut n = 0usize;
        let mut mean = vec![0.0f64; dim];
        let mut m2 = vec![0.0f64; dim];
        for row in rows {
            n += 1;
            for j in 0..dim {
                let d = row[j] - mean[j];
                mean[j] += d / n as f64;
                m2[j] += d * (row[j] - mean[j]);
            }
        }
        let std = m2
            .iter()
            .map(|&s| {
                let sd = if n > 0 { (s / n as f64).sqrt() } else { 1.0 };
                T::of(if sd > MIN_STD { sd } else { 1.0 })
            })
            .collect();
        Self {
            mean: mean.into_iter().map(T::of).collect(),
            std,
        }
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn std(&self) -> &[T] {
        &self.std
    }

    pub fn apply_into(&self, x: &[T], out: &mut [T]) {
        for j in 0..x.len() {
            out[j] = (x[j] - self.mean[j]) / self.std[j];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct AdapterBlock<T> {
    /// `dim × dim`, row-major.
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub frozen: bool,
}

impl<T: Scalar> AdapterBlock<T> {
    pub fn identity(dim: usize) -> Self {
        let mut weight = vec![T::zero(); dim * dim];
        for i in 0..dim {
            weight[i * dim + i] = T::one();
        }
        Self {
            weight,
            bias: vec![T::zero(); dim],
            frozen: true,
        }
    }

    /// Writes the block output into `out` and `φ'(pre-activation)` into `slope`.
    fn forward_into(&self, h: &[T], out: &mut [T], slope: Option<&mut [T]>) {
        let dim = h.len();
        let mut slope = slope;
        for i in 0..dim {
            let a = dot(&self.weight[i * dim..(i + 1) * dim], h) + self.bias[i] - h[i];
            out[i] = h[i] + ramp(a);
            if let Some(s) = slope.as_deref_mut() {
                s[i] = ramp_grad(a);
            }
        }
    }

    fn param_len(dim: usize) -> usize {
        dim * dim + dim
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Head<T> {
    /// `2 × dim`, row-major.
    pub weight: Vec<T>,
    pub bias: [T; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode<T> {
    Eval,
    Train { dropout: T },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct ModelParams<T> {
    dim: usize,
    pub blocks: Vec<AdapterBlock<T>>,
    norm: NormStats<T>,
    pub head: Head<T>,
}

impl<T: Scalar> ModelParams<T> {
    /// Identity adapter, identity normalization and a zero head.
    pub fn identity(dim: usize, blocks: usize) -> Self {
        Self {
            dim,
            blocks: (0..blocks).map(|_| AdapterBlock::identity(dim)).collect(),
            norm: NormStats::identity(dim),
            head: Head {
                weight: vec![T::zero(); 2 * dim],
                bias: [T::zero(); 2],
            },
        }
    }

    /// Near-identity adapter (`W = I + N(0, noise²)`, zero bias, all
    /// frozen) and a head drawn from `N(0, noise²)`.
    pub fn init<R: Rng + ?Sized>(dim: usize, blocks: usize, noise: T, rng: &mut R) -> Self {
        let mut p = Self::identity(dim, blocks);
        let mut gauss = || T::of(StandardNormal.sample(rng)) * noise;
        for b in &mut p.blocks {
            for w in &mut b.weight {
                *w += gauss();
            }
        }
        for w in &mut p.head.weight {
            *w = gauss();
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm_stats(&self) -> &NormStats<T> {
        &self.norm
    }

    pub(crate) fn set_norm_stats(&mut self, norm: NormStats<T>) {
        self.norm = norm;
    }

    pub fn freeze_all(&mut self) {
        self.blocks.iter_mut().for_each(|b| b.frozen = true);
    }

    /// Unfreezes the last `n` blocks (all of them if `n` exceeds the count).
    pub fn unfreeze_last(&mut self, n: usize) {
        let b = self.blocks.len();
        for blk in &mut self.blocks[b.saturating_sub(n)..] {
            blk.frozen = false;
        }
    }

    /// Index of the first trainable block, or the block count if none.
    pub fn first_trainable_block(&self) -> usize {
        self.blocks.iter().position(|b| !b.frozen).unwrap_or(self.blocks.len())
    }

    /// Checks that every tensor has the length implied by `dim`.
    pub fn check_shapes(&self) -> Result<(), ModelError> {
        let d = self.dim;
        let expect = |expected: usize, found: usize| {
            if expected == found {
                Ok(())
            } else {
                Err(ModelError::ParamLength { expected, found })
            }
        };
        expect(d, self.norm.mean.len())?;
        expect(d, self.norm.std.len())?;
        expect(2 * d, self.head.weight.len())?;
        for b in &self.blocks {
            expect(d * d, b.weight.len())?;
            expect(d, b.bias.len())?;
        }
        Ok(())
    }

    fn check_dim(&self, x: &[T]) -> Result<(), ModelError> {
        if x.len() != self.dim {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn standardize(&self, x: &[T]) -> Result<Vec<T>, ModelError> {
        self.check_dim(x)?;
        let mut out = vec![T::zero(); self.dim];
        self.norm.apply_into(x, &mut out);
        Ok(out)
    }

    /// Runs blocks `range` on an already standardized vector.
    pub fn run_blocks(&self, mut h: Vec<T>, range: std::ops::Range<usize>) -> Vec<T> {
        let mut next = vec![T::zero(); self.dim];
        for b in &self.blocks[range] {
            b.forward_into(&h, &mut next, None);
            std::mem::swap(&mut h, &mut next);
        }
        h
    }

    /// Standardized features after the whole adapter.
    pub fn adapter_output(&self, x: &[T]) -> Result<Vec<T>, ModelError> {
        let h = self.standardize(x)?;
        Ok(self.run_blocks(h, 0..self.blocks.len()))
    }

    fn head_logits(&self, d: &[T]) -> [T; 2] {
        let w = &self.head.weight;
        [
            dot(&w[..self.dim], d) + self.head.bias[0],
            dot(&w[self.dim..], d) + self.head.bias[1],
        ]
    }

    /// Logits; in train mode dropout (inverted scaling) is sampled from `rng`.
    pub fn logits<R: Rng + ?Sized>(&self, x: &[T], mode: Mode<T>, rng: &mut R) -> Result<[T; 2], ModelError> {
        let mut d = self.adapter_output(x)?;
        if let Mode::Train { dropout } = mode {
            let mask = sample_dropout_mask(self.dim, dropout, rng)?;
            d.iter_mut().zip(&mask).for_each(|(v, m)| *v *= *m);
        }
        Ok(self.head_logits(&d))
    }

    pub fn forward<R: Rng + ?Sized>(&self, x: &[T], mode: Mode<T>, rng: &mut R) -> Result<ProbOutput<T>, ModelError> {
        self.logits(x, mode, rng).map(ProbOutput::from_logits)
    }

    /// Eval-mode probabilities for an already standardized vector.
    pub fn predict_standardized(&self, h: &[T]) -> ProbOutput<T> {
        let d = self.run_blocks(h.to_vec(), 0..self.blocks.len());
        ProbOutput::from_logits(self.head_logits(&d))
    }

    /// Eval-mode logits for an already standardized vector.
    pub fn logits_standardized(&self, h: &[T]) -> [T; 2] {
        let d = self.run_blocks(h.to_vec(), 0..self.blocks.len());
        self.head_logits(&d)
    }

    /// Eval-mode probabilities.
    pub fn predict(&self, x: &[T]) -> Result<ProbOutput<T>, ModelError> {
        let d = self.adapter_output(x)?;
        Ok(ProbOutput::from_logits(self.head_logits(&d)))
    }

    fn head_len(&self) -> usize {
        2 * self.dim + 2
    }

    /// Number of values in the trainable parameter vector.
    pub fn trainable_len(&self) -> usize {
        self.head_len() + self.blocks.iter().filter(|b| !b.frozen).count() * AdapterBlock::<T>::param_len(self.dim)
    }

    /// Trainable parameters flattened: head weight, head bias, then each
    /// unfrozen block's weight and bias in block order.
    pub fn pack_trainable(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.trainable_len());
        out.extend_from_slice(&self.head.weight);
        out.extend_from_slice(&self.head.bias);
        for b in self.blocks.iter().filter(|b| !b.frozen) {
            out.extend_from_slice(&b.weight);
            out.extend_from_slice(&b.bias);
        }
        out
    }

    pub fn unpack_trainable(&mut self, flat: &[T]) -> Result<(), ModelError> {
        let expected = self.trainable_len();
        if flat.len() != expected {
            return Err(ModelError::ParamLength {
                expected,
                found: flat.len(),
            });
        }
        let dd = self.dim * self.dim;
        let (w, rest) = flat.split_at(2 * self.dim);
        self.head.weight.copy_from_slice(w);
        self.head.bias.copy_from_slice(&rest[..2]);
        let mut off = 2;
        for b in self.blocks.iter_mut().filter(|b| !b.frozen) {
            b.weight.copy_from_slice(&rest[off..off + dd]);
            b.bias.copy_from_slice(&rest[off + dd..off + dd + self.dim]);
            off += dd + self.dim;
        }
        Ok(())
    }

    /// Learning-rate groups matching [`Self::pack_trainable`].
    pub fn param_groups(&self, head_lr: T, adapter_lr: T) -> Vec<ParamGroup<T>> {
        let mut g = vec![ParamGroup {
            len: self.head_len(),
            lr: head_lr,
        }];
        let adapter = self.trainable_len() - self.head_len();
        if adapter > 0 {
            g.push(ParamGroup {
                len: adapter,
                lr: adapter_lr,
            });
        }
        g
    }

    /// Adds `scale · ∂loss/∂θ` for one sample to `grad` (layout of
    /// [`Self::pack_trainable`]) and returns the unscaled loss.
    ///
    /// `h_in` is the input to block `start`; blocks before `start` must be
    /// frozen. `mask` is the dropout multiplier per feature, if any.
    #[allow(clippy::too_many_arguments)]
    pub fn accumulate_gradient(
        &self,
        h_in: &[T],
        start: usize,
        target: usize,
        mask: Option<&[T]>,
        focal: &FocalConfig<T>,
        scale: T,
        grad: &mut [T],
        ws: &mut Workspace<T>,
    ) -> Result<T, ModelError> {
        let dim = self.dim;
        let nb = self.blocks.len() - start;
        ws.ensure(nb, dim);
        ws.hs[0].copy_from_slice(h_in);
        for k in 0..nb {
            let (lo, hi) = ws.hs.split_at_mut(k + 1);
            self.blocks[start + k].forward_into(&lo[k], &mut hi[0], Some(&mut ws.slopes[k]));
        }
        let last = &ws.hs[nb];
        for j in 0..dim {
            ws.delta[j] = match mask {
                Some(m) => last[j] * m[j],
                None => last[j],
            };
        }
        let logits = self.head_logits(&ws.delta);
        let (loss, dz) = focal_loss_and_grad(logits, target, focal)?;
        let dz = [dz[0] * scale, dz[1] * scale];

        // Head gradient; `delta` then becomes ∂loss/∂(adapter output).
        let (gw, rest) = grad.split_at_mut(2 * dim);
        for j in 0..dim {
            let d = ws.delta[j];
            gw[j] += dz[0] * d;
            gw[dim + j] += dz[1] * d;
        }
        rest[0] += dz[0];
        rest[1] += dz[1];
        let w = &self.head.weight;
        for j in 0..dim {
            let back = dz[0] * w[j] + dz[1] * w[dim + j];
            ws.delta[j] = match mask {
                Some(m) => back * m[j],
                None => back,
            };
        }

        let offsets = self.block_offsets();
        let dd = dim * dim;
        for k in (0..nb).rev() {
            let bi = start + k;
            let blk = &self.blocks[bi];
            for i in 0..dim {
                ws.s[i] = ws.slopes[k][i] * ws.delta[i];
            }
            if let Some(off) = offsets[bi] {
                let h = &ws.hs[k];
                let g = &mut grad[off..off + dd + dim];
                for i in 0..dim {
                    let si = ws.s[i];
                    if si != T::zero() {
                        for (gv, &hv) in g[i * dim..(i + 1) * dim].iter_mut().zip(h) {
                            *gv += si * hv;
                        }
                    }
                    g[dd + i] += si;
                }
            }
            if k > 0 || bi > 0 {
                // delta ← delta + Wᵀ s − s
                let mut back = std::mem::take(&mut ws.back);
                back.clear();
                back.extend(ws.delta.iter().zip(&ws.s).map(|(&d, &s)| d - s));
                for i in 0..dim {
                    let si = ws.s[i];
                    if si != T::zero() {
                        for (bv, &wv) in back.iter_mut().zip(&blk.weight[i * dim..(i + 1) * dim]) {
                            *bv += si * wv;
                        }
                    }
                }
                ws.delta.copy_from_slice(&back);
                ws.back = back;
            }
        }
        Ok(loss)
    }

    /// Offset of each block's parameters in the trainable vector.
    fn block_offsets(&self) -> Vec<Option<usize>> {
        let mut off = self.head_len();
        self.blocks
            .iter()
            .map(|b| {
                if b.frozen {
                    None
                } else {
                    let o = off;
                    off += AdapterBlock::<T>::param_len(self.dim);
                    Some(o)
                }
            })
            .collect()
    }
}

/// Inverted-dropout multipliers: `0` with probability `rate`, else `1/(1-rate)`.
pub fn sample_dropout_mask<T: Scalar, R: Rng + ?Sized>(dim: usize, rate: T, rng: &mut R) -> Result<Vec<T>, ModelError> {
    let mut mask = vec![T::one(); dim];
    fill_dropout_mask(&mut mask, rate, rng)?;
    Ok(mask)
}

pub fn fill_dropout_mask<T: Scalar, R: Rng + ?Sized>(mask: &mut [T], rate: T, rng: &mut R) -> Result<(), ModelError> {
    if !(rate >= T::zero() && rate < T::one()) {
        return Err(ModelError::InvalidDropout);
    }
    if rate == T::zero() {
        mask.iter_mut().for_each(|m| *m = T::one());
        return Ok(());
    }
    let keep = T::one() / (T::one() - rate);
    let r = rate.to_f64_lossy();
    for m in mask.iter_mut() {
        *m = if rng.random::<f64>() < r { T::zero() } else { keep };
    }
    Ok(())
}

/// Scratch buffers reused across [`ModelParams::accumulate_gradient`] calls.
#[derive(Debug, Clone, Default)]
pub struct Workspace<T> {
    hs: Vec<Vec<T>>,
    slopes: Vec<Vec<T>>,
    delta: Vec<T>,
    s: Vec<T>,
    back: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    pub fn new() -> Self {
        Self {
            hs: Vec::new(),
            slopes: Vec::new(),
            delta: Vec::new(),
            s: Vec::new(),
            back: Vec::new(),
        }
    }

    fn ensure(&mut self, blocks: usize, dim: usize) {
        if self.delta.len() != dim {
            self.hs.clear();
            self.slopes.clear();
            self.delta = vec![T::zero(); dim];
            self.s = vec![T::zero(); dim];
            self.back = Vec::with_capacity(dim);
        }
        while self.hs.len() < blocks + 1 {
            self.hs.push(vec![T::zero(); dim]);
        }
        while self.slopes.len() < blocks {
            self.slopes.push(vec![T::zero(); dim]);
        }
    }
}
