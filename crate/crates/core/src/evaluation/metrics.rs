//! Binary classification metrics with `High` as the positive class.
//!
//! Degenerate ratios (`0/0`) are defined as 0, so precision is 0 when
//! nothing is predicted positive and F1 is always defined.

use crate::data::DepthClass;
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign};

/// Decision threshold on `P(High)`.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// `High` iff `p_high ≥ threshold`.
pub fn classify<T: Scalar>(p_high: T, threshold: T) -> DepthClass {
    if p_high >= threshold {
        DepthClass::High
    } else {
        DepthClass::Low
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, truth: DepthClass, predicted: DepthClass) {
        match (truth, predicted) {
            (DepthClass::High, DepthClass::High) => self.tp += 1,
            (DepthClass::Low, DepthClass::High) => self.fp += 1,
            (DepthClass::High, DepthClass::Low) => self.fn_ += 1,
            (DepthClass::Low, DepthClass::Low) => self.tn += 1,
        }
    }

    pub fn from_predictions(truth: &[DepthClass], predicted: &[DepthClass]) -> Self {
        assert_eq!(truth.len(), predicted.len(), "truth/prediction length mismatch");
        let mut c = Self::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            c.record(t, p);
        }
        c
    }

    pub fn from_probabilities<T: Scalar>(truth: &[DepthClass], p_high: &[T], threshold: T) -> Self {
        assert_eq!(truth.len(), p_high.len(), "truth/probability length mismatch");
        let mut c = Self::default();
        for (&t, &p) in truth.iter().zip(p_high) {
            c.record(t, classify(p, threshold));
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn metrics(&self) -> Metrics {
        Metrics::from_confusion(self)
    }
}

impl Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub recall: f64,
    pub precision: f64,
    pub accuracy: f64,
    pub f1: f64,
}

impl Metrics {
    pub fn from_confusion(c: &ConfusionCounts) -> Self {
        let recall = ratio(c.tp, c.tp + c.fn_);
        let precision = ratio(c.tp, c.tp + c.fp);
        let accuracy = ratio(c.tp + c.tn, c.total());
        let f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_);
        Self {
            recall,
            precision,
            accuracy,
            f1,
        }
    }

    /// Unweighted mean of each metric across `parts` (fold-averaged).
    pub fn macro_average(parts: &[Metrics]) -> Self {
        if parts.is_empty() {
            return Self::default();
        }
        let n = parts.len() as f64;
        let mean = |f: fn(&Metrics) -> f64| parts.iter().map(f).sum::<f64>() / n;
        Self {
            recall: mean(|m| m.recall),
            precision: mean(|m| m.precision),
            accuracy: mean(|m| m.accuracy),
            f1: mean(|m| m.f1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_case() {
        let c = ConfusionCounts {
            tp: 2,
            fp: 1,
            fn_: 0,
            tn: 3,
        };
        let m = c.metrics();
        assert_eq!(m.recall, 1.0);
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.accuracy - 5.0 / 6.0).abs() < 1e-15);
        assert!((m.f1 - 0.8).abs() < 1e-15);
    }

    #[test]
    fn perfect_predictions() {
        let m = ConfusionCounts {
            tp: 4,
            fp: 0,
            fn_: 0,
            tn: 7,
        }
        .metrics();
        assert_eq!((m.recall, m.precision, m.accuracy, m.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn no_positive_predictions() {
        let m = ConfusionCounts {
            tp: 0,
            fp: 0,
            fn_: 3,
            tn: 5,
        }
        .metrics();
        assert_eq!((m.recall, m.precision, m.f1), (0.0, 0.0, 0.0));
        assert_eq!(m.accuracy, 5.0 / 8.0);
    }

    #[test]
    fn threshold_is_inclusive() {
        assert_eq!(classify(0.5f64, 0.5), DepthClass::High);
        assert_eq!(classify(0.4999f64, 0.5), DepthClass::Low);
        let truth = [DepthClass::High, DepthClass::Low, DepthClass::Low];
        let c = ConfusionCounts::from_probabilities(&truth, &[0.5f32, 0.7, 0.1], 0.5);
        assert_eq!(
            c,
            ConfusionCounts {
                tp: 1,
                fp: 1,
                fn_: 0,
                tn: 1
            }
        );
    }

    #[test]
    fn sums_counts() {
        let a = ConfusionCounts {
            tp: 1,
            fp: 2,
            fn_: 3,
            tn: 4,
        };
        let total: ConfusionCounts = [a, a].into_iter().sum();
        assert_eq!(total.total(), 20);
        assert_eq!(total.fn_, 6);
    }
}
