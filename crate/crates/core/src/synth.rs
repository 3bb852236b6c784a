//! Seeded synthetic feature datasets with thickness-graded class structure.
//!
//! Each sample gets a thickness `t` and the feature vector
//! `(λ(t) − ½)·separation·u + noise·s(t)·ξ`, with `u` a random unit
//! direction shared by the dataset and `ξ` standard normal. The gradation
//! `λ` ramps from 0 to 1 across `[0.4, 1.0)` mm along a logistic curve
//! centred on the 0.76 mm class threshold, and keeps drifting slowly outside
//! the band (linearly below, logarithmically above), so features become more
//! typical of their class the more extreme the thickness is. Noise is
//! `mid_noise` times larger inside the band, where the classes mix.

use crate::data::{depth_class_of, DataError, Dataset, DepthClass, Sample, ThicknessMm, DEPTH_THRESHOLD_MM};
use crate::seed::derive;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BAND_LO_MM: f64 = 0.4;
pub const BAND_HI_MM: f64 = 1.0;
pub const SOURCE: &str = "synth";
const MAX_DRAWS_PER_SAMPLE: usize = 100_000;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("n must be at least 10, got {0}")]
    TooFew(usize),
    #[error("invalid synth parameter: {0}")]
    InvalidParam(&'static str),
    #[error("ratio {ratio} leaves an empty class at n = {n}")]
    InfeasibleRatio { n: usize, ratio: f64 },
    #[error("thickness distribution almost never reaches the {0:?} class")]
    Unreachable(DepthClass),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub dim: usize,
    /// Target `count(Low) / count(High)`.
    pub ratio: f64,
    /// Noise multiplier inside `[0.4, 1.0)` mm.
    pub mid_noise: f64,
    /// Distance between the two class prototypes.
    pub separation: f64,
    /// Base noise standard deviation.
    pub noise: f64,
    pub median_mm: f64,
    /// Log-space standard deviation of the thickness distribution.
    pub log_sigma: f64,
    pub max_mm: f64,
    /// Slope of the gradation outside the ramp band.
    pub outer_drift: f64,
    /// Steepness (per mm) of the logistic ramp centred on the class
    /// threshold; 0 gives a linear ramp.
    pub ramp_steepness: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 1162,
            dim: 32,
            ratio: 2.58,
            mid_noise: 6.0,
            separation: 6.0,
            noise: 0.2,
            median_mm: 0.6,
            log_sigma: 1.5,
            max_mm: 8.0,
            outer_drift: 0.25,
            ramp_steepness: 40.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if self.n < 10 {
            return Err(SynthError::TooFew(self.n));
        }
        if self.dim == 0 {
            return Err(SynthError::InvalidParam("dim must be positive"));
        }
        if !pos(self.ratio) {
            return Err(SynthError::InvalidParam("ratio must be > 0"));
        }
        if !pos(self.mid_noise) || !pos(self.noise) {
            return Err(SynthError::InvalidParam("noise levels must be > 0"));
        }
        if !nonneg(self.separation) || !nonneg(self.outer_drift) || !nonneg(self.ramp_steepness) {
            return Err(SynthError::InvalidParam(
                "separation, outer_drift and ramp_steepness must be >= 0",
            ));
        }
        if !pos(self.median_mm)
            || !pos(self.log_sigma)
            || !(self.max_mm.is_finite() && self.max_mm > DEPTH_THRESHOLD_MM)
        {
            return Err(SynthError::InvalidParam(
                "thickness distribution parameters out of range",
            ));
        }
        Ok(())
    }

    /// `(low, high)` counts implied by `n` and `ratio`.
    pub fn class_counts(&self) -> Result<(usize, usize), SynthError> {
        let low = (self.n as f64 * self.ratio / (1.0 + self.ratio)).round() as usize;
        let high = self.n.saturating_sub(low);
        if low == 0 || high == 0 {
            return Err(SynthError::InfeasibleRatio {
                n: self.n,
                ratio: self.ratio,
            });
        }
        Ok((low, high))
    }

    /// Position along the prototype axis, 0 at the Low end of the band and 1
    /// at the High end.
    pub fn gradation(&self, t: f64) -> f64 {
        let ramp = self.ramp((t.clamp(BAND_LO_MM, BAND_HI_MM) - BAND_LO_MM) / (BAND_HI_MM - BAND_LO_MM));
        let drift = if t < BAND_LO_MM {
            (t - BAND_LO_MM) / BAND_LO_MM
        } else if t >= BAND_HI_MM {
            t.ln()
        } else {
            0.0
        };
        ramp + self.outer_drift * drift
    }

    /// Monotone map of `[0, 1]` onto itself fixing both ends.
    fn ramp(&self, x: f64) -> f64 {
        if self.ramp_steepness <= 0.0 {
            return x;
        }
        let k = self.ramp_steepness * (BAND_HI_MM - BAND_LO_MM);
        let c = (DEPTH_THRESHOLD_MM - BAND_LO_MM) / (BAND_HI_MM - BAND_LO_MM);
        let sig = |v: f64| 1.0 / (1.0 + (-k * (v - c)).exp());
        let (lo, hi) = (sig(0.0), sig(1.0));
        ((sig(x) - lo) / (hi - lo)).clamp(0.0, 1.0)
    }

    pub fn noise_scale(&self, t: f64) -> f64 {
        if (BAND_LO_MM..BAND_HI_MM).contains(&t) {
            self.noise * self.mid_noise
        } else {
            self.noise
        }
    }
}

/// The unit prototype direction `u` used by [`generate`] for `cfg`.
pub fn prototype_direction(cfg: &SynthConfig) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, "synth/direction"));
    loop {
        let u: Vec<f64> = (0..cfg.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return u.into_iter().map(|v| v / norm).collect();
        }
    }
}

/// Draws thicknesses of one class by rejection from the truncated
/// log-normal, rounded to micrometers.
fn draw_thickness(
    cfg: &SynthConfig,
    class: DepthClass,
    count: usize,
    dist: &LogNormal<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ThicknessMm>, SynthError> {
    let mut out = Vec::with_capacity(count);
    let mut draws = 0usize;
    while out.len() < count {
        draws += 1;
        if draws > MAX_DRAWS_PER_SAMPLE * count.max(1) {
            return Err(SynthError::Unreachable(class));
        }
        let t = (dist.sample(rng) * 1000.0).round() / 1000.0;
        if t <= 0.0 || t > cfg.max_mm {
            continue;
        }
        let t = ThicknessMm::new(t)?;
        if depth_class_of(t) == class {
            out.push(t);
        }
    }
    Ok(out)
}

/// Generates the dataset; class counts hit the target ratio exactly.
pub fn generate(cfg: &SynthConfig) -> Result<Dataset, SynthError> {
    cfg.validate()?;
    let (n_low, n_high) = cfg.class_counts()?;
    let u = prototype_direction(cfg);
    let dist = LogNormal::new(cfg.median_mm.ln(), cfg.log_sigma).map_err(|_| SynthError::InvalidParam("log_sigma"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, "synth/thickness"));
    let mut thickness = draw_thickness(cfg, DepthClass::Low, n_low, &dist, &mut rng)?;
    thickness.extend(draw_thickness(cfg, DepthClass::High, n_high, &dist, &mut rng)?);
    thickness.shuffle(&mut rng);

    let mut rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, "synth/features"));
    let samples = thickness
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let tv = t.value();
            let shift = (cfg.gradation(tv) - 0.5) * cfg.separation;
            let scale = cfg.noise_scale(tv);
            let features = u
                .iter()
                .map(|&uj| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    shift * uj + scale * e
                })
                .collect();
            Sample::with_thickness(format!("{SOURCE}/{i:06}"), SOURCE, features, t)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset::new(cfg.dim, samples)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n: 200,
            dim: 8,
            seed: 5,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn default_counts_match_target_ratio() {
        let cfg = SynthConfig {
            seed: 11,
            ..SynthConfig::default()
        };
        assert_eq!(cfg.class_counts().unwrap(), (837, 325));
        let ds = generate(&cfg).unwrap();
        assert_eq!(ds.len(), 1162);
        let c = ds.class_counts();
        assert_eq!((c.low, c.high), (837, 325));
        assert!(ds.iter().all(|s| s.thickness().is_some()));
    }

    #[test]
    fn same_seed_same_dataset() {
        assert_eq!(generate(&small()).unwrap(), generate(&small()).unwrap());
        let other = SynthConfig { seed: 6, ..small() };
        assert_ne!(generate(&small()).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn gradation_is_monotone_and_continuous() {
        let cfg = SynthConfig::default();
        let mut prev = f64::NEG_INFINITY;
        for i in 1..=8000 {
            let t = i as f64 / 1000.0;
            let g = cfg.gradation(t);
            assert!(g >= prev, "t = {t}");
            prev = g;
        }
        assert!((cfg.gradation(BAND_LO_MM) - 0.0).abs() < 1e-15);
        assert!((cfg.gradation(BAND_HI_MM - 1e-12) - 1.0).abs() < 1e-9);
        assert_eq!(cfg.gradation(BAND_HI_MM), 1.0);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(
            generate(&SynthConfig { n: 5, ..small() }),
            Err(SynthError::TooFew(5))
        ));
        assert!(generate(&SynthConfig { ratio: 0.0, ..small() }).is_err());
        assert!(matches!(
            generate(&SynthConfig {
                ratio: 1000.0,
                ..small()
            }),
            Err(SynthError::InfeasibleRatio { .. })
        ));
        assert!(generate(&SynthConfig { noise: -1.0, ..small() }).is_err());
    }

    #[test]
    fn direction_is_unit() {
        let u = prototype_direction(&small());
        let n: f64 = u.iter().map(|v| v * v).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }
}
