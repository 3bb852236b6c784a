//! Polynomial fits of `P(High)` against thickness, segment R² and binned
//! statistics.

use crate::linalg::{lstsq, LinalgError, Matrix};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Segment boundaries in mm: `[0, 0.4)`, `[0.4, 1.0)`, `[1.0, ∞)`.
pub const SEGMENT_BOUNDS: [f64; 2] = [0.4, 1.0];
pub const DEFAULT_BIN_WIDTH: f64 = 0.1;
const RANK_TOL: f64 = 1e-10;
/// Relative distance to a bin edge under which a value snaps onto it.
const EDGE_SNAP: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressionError {
    #[error("degree must be 1, 2 or 3, got {0}")]
    InvalidDegree(usize),
    #[error("degree {degree} needs {needed} distinct thickness values, found {found}")]
    TooFewDistinct { degree: usize, needed: usize, found: usize },
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("response has zero variance; R² is undefined")]
    ZeroVariance,
    #[error("at least {0} points are required")]
    TooFewPoints(usize),
    #[error("non-finite value in point {0}")]
    NonFinite(usize),
    #[error("bin width must be finite and > 0")]
    InvalidWidth,
}

impl From<LinalgError> for RegressionError {
    fn from(_: LinalgError) -> Self {
        Self::RankDeficient
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct ThicknessPrediction<T> {
    pub thickness: T,
    pub p_high: T,
}

/// Least-squares polynomial `p_high ≈ Σ cₖ·tᵏ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct RegressionFit<T> {
    pub degree: usize,
    /// Monomial coefficients, constant term first.
    pub coefficients: Vec<T>,
    pub r2_overall: T,
    /// Coefficients in the internal variable `(t − center)/scale`.
    scaled: Vec<T>,
    center: T,
    scale: T,
}

impl<T: Scalar> RegressionFit<T> {
    pub fn eval(&self, t: T) -> T {
        let s = (t - self.center) / self.scale;
        self.scaled.iter().rev().fold(T::zero(), |acc, &c| acc * s + c)
    }
}

fn check_finite<T: Scalar>(points: &[ThicknessPrediction<T>]) -> Result<(), RegressionError> {
    match points
        .iter()
        .position(|p| !(p.thickness.is_finite() && p.p_high.is_finite()))
    {
        Some(i) => Err(RegressionError::NonFinite(i)),
        None => Ok(()),
    }
}

fn count_distinct<T: Scalar>(points: &[ThicknessPrediction<T>]) -> usize {
    let mut t: Vec<T> = points.iter().map(|p| p.thickness).collect();
    t.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    t.dedup();
    t.len()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Ordinary least squares by Householder QR on a centred, scaled abscissa.
pub fn polyfit<T: Scalar>(
    points: &[ThicknessPrediction<T>],
    degree: usize,
) -> Result<RegressionFit<T>, RegressionError> {
    if !(1..=3).contains(&degree) {
        return Err(RegressionError::InvalidDegree(degree));
    }
    check_finite(points)?;
    let found = count_distinct(points);
    if found < degree + 1 {
        return Err(RegressionError::TooFewDistinct {
            degree,
            needed: degree + 1,
            found,
        });
    }
    let (lo, hi) = points.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), p| {
        (lo.min(p.thickness), hi.max(p.thickness))
    });
    let center = (lo + hi) / T::of(2.0);
    let scale = (hi - lo) / T::of(2.0);
    let mut design = Matrix::zeros(points.len(), degree + 1);
    for (i, p) in points.iter().enumerate() {
        let s = (p.thickness - center) / scale;
        let mut pow = T::one();
        for k in 0..=degree {
            design[(i, k)] = pow;
            pow *= s;
        }
    }
    let y: Vec<T> = points.iter().map(|p| p.p_high).collect();
    let scaled = lstsq(&design, &y, T::of(RANK_TOL))?;

    // p(t) = Σ cₖ·((t − m)/h)ᵏ expanded into powers of t.
    let mut coefficients = vec![T::zero(); degree + 1];
    for (k, &c) in scaled.iter().enumerate() {
        let ck = c / scale.powi(k as i32);
        for j in 0..=k {
            coefficients[j] += ck * T::of(binomial(k, j)) * (-center).powi((k - j) as i32);
        }
    }
    let mut fit = RegressionFit {
        degree,
        coefficients,
        r2_overall: T::zero(),
        scaled,
        center,
        scale,
    };
    fit.r2_overall = match r_squared(points, &fit) {
        Ok(r2) => r2,
        Err(RegressionError::ZeroVariance) => T::zero(),
        Err(e) => return Err(e),
    };
    Ok(fit)
}

/// `1 − SS_res/SS_tot` of `fit` over `points`; negative when the fit is
/// worse than the points' own mean.
pub fn r_squared<T: Scalar>(points: &[ThicknessPrediction<T>], fit: &RegressionFit<T>) -> Result<T, RegressionError> {
    if points.len() < 2 {
        return Err(RegressionError::TooFewPoints(2));
    }
    check_finite(points)?;
    let n = T::of(points.len() as f64);
    let mean = points.iter().map(|p| p.p_high).sum::<T>() / n;
    let ss_tot: T = points.iter().map(|p| (p.p_high - mean).powi(2)).sum();
    let scale: T = points.iter().map(|p| p.p_high * p.p_high).sum();
    if ss_tot <= T::epsilon() * T::of(16.0) * scale {
        return Err(RegressionError::ZeroVariance);
    }
    let ss_res: T = points.iter().map(|p| (p.p_high - fit.eval(p.thickness)).powi(2)).sum();
    Ok(T::one() - ss_res / ss_tot)
}

/// Largest `|Xᵀr|ⱼ / (‖Xⱼ‖·‖r‖)` over the monomial design columns, where `r`
/// is the residual of `fit`; zero for an exact least-squares solution.
pub fn residual_orthogonality<T: Scalar>(points: &[ThicknessPrediction<T>], fit: &RegressionFit<T>) -> T {
    let r: Vec<T> = points.iter().map(|p| p.p_high - fit.eval(p.thickness)).collect();
    let rn = r.iter().map(|v| *v * *v).sum::<T>().sqrt();
    if rn == T::zero() {
        return T::zero();
    }
    (0..=fit.degree)
        .map(|k| {
            let col: Vec<T> = points
                .iter()
                .map(|p| ((p.thickness - fit.center) / fit.scale).powi(k as i32))
                .collect();
            let cn = col.iter().map(|v| *v * *v).sum::<T>().sqrt();
            let d: T = col.iter().zip(&r).map(|(a, b)| *a * *b).sum();
            d.abs() / (cn * rn)
        })
        .fold(T::zero(), T::max)
}

fn segment_of<T: Scalar>(t: T, bounds: [f64; 2]) -> usize {
    if t < T::of(bounds[0]) {
        0
    } else if t < T::of(bounds[1]) {
        1
    } else {
        2
    }
}

fn split_segments<T: Scalar>(points: &[ThicknessPrediction<T>], bounds: [f64; 2]) -> [Vec<ThicknessPrediction<T>>; 3] {
    let mut segs: [Vec<ThicknessPrediction<T>>; 3] = Default::default();
    for p in points {
        segs[segment_of(p.thickness, bounds)].push(*p);
    }
    segs
}

/// R² of one segment under both readings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct SegmentR2<T> {
    pub lo: f64,
    /// `None` for the unbounded last segment.
    pub hi: Option<f64>,
    pub count: usize,
    /// The global fit restricted to this segment; `None` if undefined.
    pub global: Option<T>,
    /// A fit of the same degree refitted on this segment alone.
    pub refit: Option<T>,
}

/// R² of the global `fit` restricted to each segment (`None` where fewer
/// than two points or no response variance).
pub fn segment_r2<T: Scalar>(
    points: &[ThicknessPrediction<T>],
    fit: &RegressionFit<T>,
    bounds: [f64; 2],
) -> [Option<T>; 3] {
    split_segments(points, bounds).map(|seg| r_squared(&seg, fit).ok())
}

/// R² of per-segment refits of `degree`.
pub fn segment_r2_refit<T: Scalar>(
    points: &[ThicknessPrediction<T>],
    degree: usize,
    bounds: [f64; 2],
) -> [Option<T>; 3] {
    split_segments(points, bounds).map(|seg| {
        let fit = polyfit(&seg, degree).ok()?;
        r_squared(&seg, &fit).ok()
    })
}

pub fn segment_report<T: Scalar>(
    points: &[ThicknessPrediction<T>],
    fit: &RegressionFit<T>,
    bounds: [f64; 2],
) -> Vec<SegmentR2<T>> {
    let global = segment_r2(points, fit, bounds);
    let refit = segment_r2_refit(points, fit.degree, bounds);
    let counts = split_segments(points, bounds).map(|s| s.len());
    let edges = [(0.0, Some(bounds[0])), (bounds[0], Some(bounds[1])), (bounds[1], None)];
    (0..3)
        .map(|i| SegmentR2 {
            lo: edges[i].0,
            hi: edges[i].1,
            count: counts[i],
            global: global[i],
            refit: refit[i],
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dispersion {
    Low,
    Mid,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Bin<T> {
    pub index: i64,
    pub lo: T,
    pub hi: T,
    pub center: T,
    pub count: usize,
    pub mean: T,
    /// Unbiased sample standard deviation; 0 for a single point.
    pub std: T,
    pub singleton: bool,
    pub dispersion: Dispersion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct BinStats<T> {
    pub width: T,
    /// Non-empty bins in increasing order.
    pub bins: Vec<Bin<T>>,
}

/// Index of the half-open bin `[i·w, (i+1)·w)` holding `t`. Values within
/// a relative 1e-9 of an edge are placed on that edge, so decimal
/// thicknesses such as 0.3 land in the bin they name.
pub fn bin_index<T: Scalar>(t: T, width: T) -> i64 {
    let q = (t / width).to_f64_lossy();
    let r = q.round();
    if (q - r).abs() <= EDGE_SNAP * r.abs().max(1.0) {
        r as i64
    } else {
        q.floor() as i64
    }
}

pub fn bin_stats<T: Scalar>(points: &[ThicknessPrediction<T>], width: T) -> Result<BinStats<T>, RegressionError> {
    if !(width.is_finite() && width > T::zero()) {
        return Err(RegressionError::InvalidWidth);
    }
    if points.is_empty() {
        return Err(RegressionError::TooFewPoints(1));
    }
    check_finite(points)?;
    let mut groups: std::collections::BTreeMap<i64, Vec<T>> = std::collections::BTreeMap::new();
    for p in points {
        groups.entry(bin_index(p.thickness, width)).or_default().push(p.p_high);
    }
    let mut bins: Vec<Bin<T>> = groups
        .into_iter()
        .map(|(index, vals)| {
            let n = vals.len();
            let mean = vals.iter().copied().sum::<T>() / T::of(n as f64);
            let std = if n > 1 {
                (vals.iter().map(|v| (*v - mean).powi(2)).sum::<T>() / T::of((n - 1) as f64)).sqrt()
            } else {
                T::zero()
            };
            let lo = T::of(index as f64) * width;
            Bin {
                index,
                lo,
                hi: lo + width,
                center: lo + width / T::of(2.0),
                count: n,
                mean,
                std,
                singleton: n == 1,
                dispersion: Dispersion::Low,
            }
        })
        .collect();

    // Tercile of each bin's std rank (ties broken by position).
    let mut order: Vec<usize> = (0..bins.len()).collect();
    order.sort_by(|&a, &b| bins[a].std.partial_cmp(&bins[b].std).expect("finite").then(a.cmp(&b)));
    let n = bins.len();
    for (rank, &i) in order.iter().enumerate() {
        bins[i].dispersion = match 3 * rank / n {
            0 => Dispersion::Low,
            1 => Dispersion::Mid,
            _ => Dispersion::High,
        };
    }
    Ok(BinStats { width, bins })
}
