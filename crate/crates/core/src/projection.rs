//! Two-dimensional views of the feature space: PCA with Fisher-score axis
//! selection, two-component PLS, group ellipses and 1-D Gaussian fits.

use crate::data::DepthClass;
use crate::linalg::{jacobi_svd, solve, sym2_eigen, Matrix};
use crate::scalar::{dot, norm, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default ellipse half-axis length in standard deviations.
pub const DEFAULT_COVERAGE: f64 = 2.0;
const DEGENERATE_RATIO: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("both classes must be present")]
    SingleClass,
    #[error("features have zero covariance with the response")]
    ZeroCovariance,
    #[error("axis {index} out of range (basis has {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("expected {expected} values, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("component {0} is singular")]
    Singular(usize),
}

/// Sign convention: flip `v` so its largest-magnitude entry (first on ties)
/// is positive.
fn orient<T: Scalar>(v: &mut [T]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < T::zero()) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct PcaBasis<T> {
    pub mean: Vec<T>,
    /// Per-feature divisor applied after centring, when standardized.
    pub scale: Option<Vec<T>>,
    /// Unit axes, by decreasing variance.
    pub axes: Vec<Vec<T>>,
    pub variances: Vec<T>,
}

impl<T: Scalar> PcaBasis<T> {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn prepare(&self, x: &[T]) -> Result<Vec<T>, ProjectionError> {
        if x.len() != self.dim() {
            return Err(ProjectionError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let mut c: Vec<T> = x.iter().zip(&self.mean).map(|(a, m)| *a - *m).collect();
        if let Some(s) = &self.scale {
            c.iter_mut().zip(s).for_each(|(v, s)| *v /= *s);
        }
        Ok(c)
    }

    /// Coordinates of every row of `x` on the chosen axes.
    pub fn project(&self, x: &Matrix<T>, axes: &[usize]) -> Result<Matrix<T>, ProjectionError> {
        for &index in axes {
            if index >= self.axes.len() {
                return Err(ProjectionError::IndexOutOfRange {
                    index,
                    len: self.axes.len(),
                });
            }
        }
        let mut out = Matrix::zeros(x.rows(), axes.len());
        for i in 0..x.rows() {
            let c = self.prepare(x.row(i))?;
            for (j, &a) in axes.iter().enumerate() {
                out[(i, j)] = dot(&c, &self.axes[a]);
            }
        }
        Ok(out)
    }

    pub fn total_variance(&self) -> T {
        self.variances.iter().copied().sum()
    }
}

/// PCA of the rows of `x` through the SVD of the centred data. With
/// `standardize`, each feature is also divided by its population std
/// (zero std is left unscaled).
pub fn pca_fit<T: Scalar>(x: &Matrix<T>, standardize: bool) -> Result<PcaBasis<T>, ProjectionError> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(ProjectionError::TooFewSamples { needed: 2, found: n });
    }
    let mean = x.column_means();
    let mut centered = x.centered(&mean);
    let scale = standardize.then(|| {
        (0..d)
            .map(|j| {
                let var = (0..n).map(|i| centered[(i, j)].powi(2)).sum::<T>() / T::of(n as f64);
                let sd = var.sqrt();
                if sd > T::zero() {
                    sd
                } else {
                    T::one()
                }
            })
            .collect::<Vec<T>>()
    });
    if let Some(s) = &scale {
        for i in 0..n {
            centered.row_mut(i).iter_mut().zip(s).for_each(|(v, s)| *v /= *s);
        }
    }
    let svd = jacobi_svd(&centered);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        svd.singular[b]
            .partial_cmp(&svd.singular[a])
            .expect("finite singular values")
            .then(a.cmp(&b))
    });
    let denom = T::of((n - 1) as f64);
    let mut axes = Vec::with_capacity(d);
    let mut variances = Vec::with_capacity(d);
    for &j in &order {
        let mut axis = svd.v.column(j);
        orient(&mut axis);
        axes.push(axis);
        variances.push(svd.singular[j].powi(2) / denom);
    }
    Ok(PcaBasis {
        mean,
        scale,
        axes,
        variances,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct FisherScores<T> {
    /// Between-class over pooled within-class variance, per axis.
    pub scores: Vec<T>,
    /// The two best axes, best first.
    pub top2: [usize; 2],
}

/// Fisher criterion of every basis axis.
pub fn fisher_axis_scores<T: Scalar>(
    basis: &PcaBasis<T>,
    x: &Matrix<T>,
    labels: &[DepthClass],
) -> Result<FisherScores<T>, ProjectionError> {
    if labels.len() != x.rows() {
        return Err(ProjectionError::DimensionMismatch {
            expected: x.rows(),
            found: labels.len(),
        });
    }
    let n1 = labels.iter().filter(|&&c| c == DepthClass::High).count();
    let n0 = labels.len() - n1;
    if n0 == 0 || n1 == 0 {
        return Err(ProjectionError::SingleClass);
    }
    let all: Vec<usize> = (0..basis.axes.len()).collect();
    let proj = basis.project(x, &all)?;
    let n = labels.len();
    let scores: Vec<T> = (0..basis.axes.len())
        .map(|a| {
            let mut sum = [T::zero(); 2];
            for i in 0..n {
                sum[labels[i].index()] += proj[(i, a)];
            }
            let m = [sum[0] / T::of(n0 as f64), sum[1] / T::of(n1 as f64)];
            let grand = (sum[0] + sum[1]) / T::of(n as f64);
            let between = T::of(n0 as f64) * (m[0] - grand).powi(2) + T::of(n1 as f64) * (m[1] - grand).powi(2);
            let within_ss: T = (0..n).map(|i| (proj[(i, a)] - m[labels[i].index()]).powi(2)).sum();
            let dof = n.saturating_sub(2).max(1);
            let within = within_ss / T::of(dof as f64);
            if within > T::zero() {
                between / within
            } else if between > T::zero() {
                T::max_value()
            } else {
                T::zero()
            }
        })
        .collect();
    let mut order = all;
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("finite scores")
            .then(a.cmp(&b))
    });
    let top2 = [order[0], *order.get(1).unwrap_or(&order[0])];
    Ok(FisherScores { scores, top2 })
}

/// Two-component (or more) PLS with a single response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct PlsBasis<T> {
    pub x_mean: Vec<T>,
    pub y_mean: T,
    /// Unit weight vectors, one per component.
    pub weights: Vec<Vec<T>>,
    pub loadings: Vec<Vec<T>>,
    /// `W·(PᵀW)⁻¹`: maps centred features straight to scores.
    pub rotations: Vec<Vec<T>>,
    /// Scores of the fitted samples, `n × components`.
    pub scores: Matrix<T>,
}

impl<T: Scalar> PlsBasis<T> {
    pub fn project(&self, x: &Matrix<T>) -> Result<Matrix<T>, ProjectionError> {
        let d = self.x_mean.len();
        if x.cols() != d {
            return Err(ProjectionError::DimensionMismatch {
                expected: d,
                found: x.cols(),
            });
        }
        let k = self.rotations.len();
        let mut out = Matrix::zeros(x.rows(), k);
        for i in 0..x.rows() {
            let c: Vec<T> = x.row(i).iter().zip(&self.x_mean).map(|(a, m)| *a - *m).collect();
            for j in 0..k {
                out[(i, j)] = dot(&c, &self.rotations[j]);
            }
        }
        Ok(out)
    }
}

/// `Xᵀy` normalized; `None` when it vanishes.
fn pls_weight<T: Scalar>(x: &Matrix<T>, y: &[T]) -> Option<Vec<T>> {
    let mut w = vec![T::zero(); x.cols()];
    for i in 0..x.rows() {
        for (wj, &xij) in w.iter_mut().zip(x.row(i)) {
            *wj += xij * y[i];
        }
    }
    let nw = norm(&w);
    let scale =
        x.as_slice().iter().fold(T::zero(), |m, v| m.max(v.abs())) * y.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if nw <= T::epsilon() * T::of(x.rows() as f64) * scale || nw == T::zero() {
        return None;
    }
    Some(w.into_iter().map(|v| v / nw).collect())
}

/// NIPALS PLS of centred `x` against centred `y`; only `x` is deflated.
pub fn pls_fit<T: Scalar>(x: &Matrix<T>, y: &[T], n_components: usize) -> Result<PlsBasis<T>, ProjectionError> {
    let (n, d) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(ProjectionError::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if n <= n_components {
        return Err(ProjectionError::TooFewSamples {
            needed: n_components + 1,
            found: n,
        });
    }
    let x_mean = x.column_means();
    let y_mean = y.iter().copied().sum::<T>() / T::of(n as f64);
    let yc: Vec<T> = y.iter().map(|v| *v - y_mean).collect();
    let mut xr = x.centered(&x_mean);
    let mut weights = Vec::new();
    let mut loadings = Vec::new();
    let mut scores = Matrix::zeros(n, n_components);
    for comp in 0..n_components {
        let w = pls_weight(&xr, &yc).ok_or(if comp == 0 {
            ProjectionError::ZeroCovariance
        } else {
            ProjectionError::Singular(comp)
        })?;
        let t = xr.mat_vec(&w);
        let tt = dot(&t, &t);
        if tt <= T::zero() {
            return Err(ProjectionError::Singular(comp));
        }
        let mut p = vec![T::zero(); d];
        for i in 0..n {
            for (pj, &xij) in p.iter_mut().zip(xr.row(i)) {
                *pj += xij * t[i];
            }
        }
        p.iter_mut().for_each(|v| *v /= tt);
        for i in 0..n {
            let ti = t[i];
            xr.row_mut(i).iter_mut().zip(&p).for_each(|(v, pj)| *v -= ti * *pj);
            scores[(i, comp)] = ti;
        }
        weights.push(w);
        loadings.push(p);
    }
    let k = n_components;
    let w_mat = Matrix::from_vec(
        d,
        k,
        (0..d)
            .flat_map(|i| weights.iter().map(move |w| w[i]))
            .collect::<Vec<T>>(),
    )
    .expect("shape");
    let mut ptw = Matrix::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            ptw[(a, b)] = dot(&loadings[a], &weights[b]);
        }
    }
    let inv = solve(&ptw, &Matrix::identity(k)).map_err(|_| ProjectionError::Singular(k - 1))?;
    let r = w_mat.matmul(&inv).expect("shape");
    let rotations = (0..k).map(|j| r.column(j)).collect();
    Ok(PlsBasis {
        x_mean,
        y_mean,
        weights,
        loadings,
        rotations,
        scores,
    })
}

/// `‖w' − w‖` after one more NIPALS update of the first weight vector.
pub fn pls_fixed_point_residual<T: Scalar>(basis: &PlsBasis<T>, x: &Matrix<T>, y: &[T]) -> T {
    let xc = x.centered(&basis.x_mean);
    let yc: Vec<T> = y.iter().map(|v| *v - basis.y_mean).collect();
    // One round: u = y, w' = Xᵀu/‖Xᵀu‖, t = Xw', q = yᵀt/tᵀt, u = y/q.
    let Some(w1) = pls_weight(&xc, &yc) else {
        return T::infinity();
    };
    let t = xc.mat_vec(&w1);
    let q = dot(&yc, &t) / dot(&t, &t);
    let u: Vec<T> = yc.iter().map(|v| *v / q).collect();
    let Some(w2) = pls_weight(&xc, &u) else {
        return T::infinity();
    };
    let w2 = if dot(&w2, &w1) < T::zero() {
        w2.iter().map(|v| -*v).collect()
    } else {
        w2
    };
    let w0 = &basis.weights[0];
    w2.iter().zip(w0).map(|(a, b)| (*a - *b).powi(2)).sum::<T>().sqrt()
}

/// Sample covariance of the projected data with a `y`, along `dir`.
pub fn response_covariance<T: Scalar>(x: &Matrix<T>, y: &[T], dir: &[T]) -> T {
    let mean = x.column_means();
    let n = x.rows();
    let y_mean = y.iter().copied().sum::<T>() / T::of(n as f64);
    let t: Vec<T> = (0..n)
        .map(|i| {
            x.row(i)
                .iter()
                .zip(&mean)
                .zip(dir)
                .map(|((a, m), w)| (*a - *m) * *w)
                .sum()
        })
        .collect();
    t.iter().zip(y).map(|(ti, yi)| *ti * (*yi - y_mean)).sum::<T>() / T::of((n - 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Ellipse<T> {
    pub center: [T; 2],
    pub semi_major: T,
    pub semi_minor: T,
    /// Angle of the major axis, in `[0, π)`.
    pub angle: T,
    pub coverage: T,
    /// Set when the covariance is (numerically) rank one or zero; the shape
    /// is then the segment `center ± semi_major·(cos, sin)(angle)`.
    pub degenerate: bool,
}

impl<T: Scalar> Ellipse<T> {
    pub fn contains(&self, p: [T; 2]) -> bool {
        if self.degenerate {
            return false;
        }
        let (s, c) = self.angle.sin_cos();
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let u = (c * dx + s * dy) / self.semi_major;
        let v = (-s * dx + c * dy) / self.semi_minor;
        u * u + v * v <= T::one()
    }

    pub fn area(&self) -> T {
        T::of(std::f64::consts::PI) * self.semi_major * self.semi_minor
    }

    /// Axis-aligned bounding box `[xmin, ymin, xmax, ymax]`.
    pub fn bounding_box(&self) -> [T; 4] {
        let (s, c) = self.angle.sin_cos();
        let hx = ((self.semi_major * c).powi(2) + (self.semi_minor * s).powi(2)).sqrt();
        let hy = ((self.semi_major * s).powi(2) + (self.semi_minor * c).powi(2)).sqrt();
        [
            self.center[0] - hx,
            self.center[1] - hy,
            self.center[0] + hx,
            self.center[1] + hy,
        ]
    }

    /// End points of the major axis.
    pub fn segment(&self) -> [[T; 2]; 2] {
        let (s, c) = self.angle.sin_cos();
        let (dx, dy) = (self.semi_major * c, self.semi_major * s);
        [
            [self.center[0] - dx, self.center[1] - dy],
            [self.center[0] + dx, self.center[1] + dy],
        ]
    }
}

/// Ellipse of the points' mean and covariance, half-axes `coverage` standard
/// deviations long.
pub fn fit_ellipse<T: Scalar>(points: &[[T; 2]], coverage: T) -> Result<Ellipse<T>, ProjectionError> {
    let n = points.len();
    if n < 3 {
        return Err(ProjectionError::TooFewSamples { needed: 3, found: n });
    }
    let nt = T::of(n as f64);
    let cx = points.iter().map(|p| p[0]).sum::<T>() / nt;
    let cy = points.iter().map(|p| p[1]).sum::<T>() / nt;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for p in points {
        let (dx, dy) = (p[0] - cx, p[1] - cy);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let dof = T::of((n - 1) as f64);
    let (l1, l2, angle) = sym2_eigen(sxx / dof, sxy / dof, syy / dof);
    let degenerate = l2 <= T::of(DEGENERATE_RATIO) * l1 || l1 <= T::zero();
    Ok(Ellipse {
        center: [cx, cy],
        semi_major: coverage * l1.max(T::zero()).sqrt(),
        semi_minor: if degenerate { T::zero() } else { coverage * l2.sqrt() },
        angle,
        coverage,
        degenerate,
    })
}

/// Monte Carlo estimate of the area shared by two ellipses.
pub fn overlap_area<T: Scalar>(a: &Ellipse<T>, b: &Ellipse<T>, samples: usize, seed: u64) -> T {
    if a.degenerate || b.degenerate || samples == 0 {
        return T::zero();
    }
    let ba = a.bounding_box();
    let bb = b.bounding_box();
    let lo = [ba[0].max(bb[0]), ba[1].max(bb[1])];
    let hi = [ba[2].min(bb[2]), ba[3].min(bb[3])];
    if lo[0] >= hi[0] || lo[1] >= hi[1] {
        return T::zero();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (hi[0] - lo[0], hi[1] - lo[1]);
    let hits = (0..samples)
        .filter(|_| {
            let p = [
                lo[0] + w * T::of(rng.random::<f64>()),
                lo[1] + h * T::of(rng.random::<f64>()),
            ];
            a.contains(p) && b.contains(p)
        })
        .count();
    w * h * T::of(hits as f64 / samples as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Gaussian1D<T> {
    pub mu: T,
    /// Unbiased sample standard deviation.
    pub sigma: T,
    pub n: usize,
    pub degenerate: bool,
}

impl<T: Scalar> Gaussian1D<T> {
    pub fn pdf(&self, x: T) -> T {
        if self.degenerate {
            return T::zero();
        }
        let z = (x - self.mu) / self.sigma;
        (-(z * z) / T::of(2.0)).exp() / (self.sigma * T::of((2.0 * std::f64::consts::PI).sqrt()))
    }
}

pub fn fit_gaussian_1d<T: Scalar>(values: &[T]) -> Result<Gaussian1D<T>, ProjectionError> {
    let n = values.len();
    if n < 2 {
        return Err(ProjectionError::TooFewSamples { needed: 2, found: n });
    }
    let mu = values.iter().copied().sum::<T>() / T::of(n as f64);
    let var = values.iter().map(|v| (*v - mu).powi(2)).sum::<T>() / T::of((n - 1) as f64);
    let sigma = var.sqrt();
    Ok(Gaussian1D {
        mu,
        sigma,
        n,
        degenerate: sigma == T::zero(),
    })
}

/// Thickness groups used for the ellipse and Gaussian views.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ThicknessGroup {
    Low,
    Mid,
    High,
}

impl ThicknessGroup {
    pub const ALL: [ThicknessGroup; 3] = [Self::Low, Self::Mid, Self::High];

    /// `Low < 0.4 ≤ Mid < 1.0 ≤ High` (mm).
    pub fn of(thickness_mm: f64) -> Self {
        if thickness_mm < 0.4 {
            Self::Low
        } else if thickness_mm < 1.0 {
            Self::Mid
        } else {
            Self::High
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Low => "Low",
            Self::Mid => "Mid",
            Self::High => "High",
        }
    }
}
