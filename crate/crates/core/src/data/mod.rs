//! Samples, Breslow staging, binary depth classes and dataset assembly.

mod feature_file;

pub use feature_file::{
    parse_feature_file, parse_feature_str, write_feature_file, write_feature_file_with_comments, write_feature_string,
};

use crate::linalg::Matrix;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Breslow thickness separating the low- and high-depth classes, in mm.
pub const DEPTH_THRESHOLD_MM: f64 = 0.76;

/// Lower bounds (mm) of stages II, III and IV.
const STAGE_BOUNDS_MM: [f64; 3] = [0.76, 1.5, 4.0];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid thickness {0}: must be finite and non-negative")]
    InvalidThickness(f64),
    #[error("sample `{id}`: feature {index} is not finite")]
    NonFiniteFeature { id: String, index: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
    #[error("sample `{id}`: label {label} disagrees with thickness {thickness} mm")]
    LabelMismatch {
        id: String,
        label: DepthClass,
        thickness: f64,
    },
    #[error("invalid {field} `{value}`: must be non-empty, free of tabs and newlines, and not start with `#`")]
    InvalidField { field: &'static str, value: String },
    #[error("nothing to merge")]
    EmptyMerge,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Breslow thickness in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ThicknessMm(f64);

impl ThicknessMm {
    pub fn new(value: f64) -> Result<Self, DataError> {
        if value.is_finite() && value >= 0.0 {
            Ok(Self(value))
        } else {
            Err(DataError::InvalidThickness(value))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn stage(self) -> BreslowStage {
        stage_of(self)
    }

    pub fn depth_class(self) -> DepthClass {
        depth_class_of(self)
    }
}

impl TryFrom<f64> for ThicknessMm {
    type Error = DataError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<ThicknessMm> for f64 {
    fn from(t: ThicknessMm) -> f64 {
        t.0
    }
}

impl fmt::Display for ThicknessMm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BreslowStage {
    I,
    II,
    III,
    IV,
}

impl BreslowStage {
    pub const ALL: [BreslowStage; 4] = [Self::I, Self::II, Self::III, Self::IV];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::I => "I",
            Self::II => "II",
            Self::III => "III",
            Self::IV => "IV",
        }
    }
}

impl fmt::Display for BreslowStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Binary depth class; `High` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DepthClass {
    Low,
    High,
}

impl DepthClass {
    pub const ALL: [DepthClass; 2] = [Self::Low, Self::High];

    /// Class index used by the classifier head (Low = 0, High = 1).
    #[inline]
    pub fn index(self) -> usize {
        match self {
            Self::Low => 0,
            Self::High => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Self::Low),
            1 => Some(Self::High),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Low => "Low",
            Self::High => "High",
        }
    }
}

impl fmt::Display for DepthClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DepthClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Low" => Ok(Self::Low),
            "High" => Ok(Self::High),
            other => Err(format!("unknown depth class `{other}` (expected Low or High)")),
        }
    }
}

/// Stage for a thickness, using half-open intervals `[lo, hi)`.
pub fn stage_of(t: ThicknessMm) -> BreslowStage {
    let v = t.value();
    match STAGE_BOUNDS_MM.iter().position(|&b| v < b) {
        Some(0) => BreslowStage::I,
        Some(1) => BreslowStage::II,
        Some(2) => BreslowStage::III,
        _ => BreslowStage::IV,
    }
}

pub fn depth_class_of(t: ThicknessMm) -> DepthClass {
    if t.value() < DEPTH_THRESHOLD_MM {
        DepthClass::Low
    } else {
        DepthClass::High
    }
}

fn check_field(field: &'static str, value: &str) -> Result<(), DataError> {
    if value.is_empty() || value.starts_with('#') || value.contains(['\t', '\n', '\r']) {
        return Err(DataError::InvalidField {
            field,
            value: value.to_string(),
        });
    }
    Ok(())
}

/// One lesion: its deep-feature vector plus labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    id: String,
    source: String,
    features: Vec<f64>,
    thickness: Option<ThicknessMm>,
    label: DepthClass,
}

impl Sample {
    pub fn new(
        id: impl Into<String>,
        source: impl Into<String>,
        features: Vec<f64>,
        thickness: Option<ThicknessMm>,
        label: DepthClass,
    ) -> Result<Self, DataError> {
        let id = id.into();
        let source = source.into();
        check_field("id", &id)?;
        check_field("source", &source)?;
        if let Some(index) = features.iter().position(|f| !f.is_finite()) {
            return Err(DataError::NonFiniteFeature { id, index });
        }
        if let Some(t) = thickness {
            if depth_class_of(t) != label {
                return Err(DataError::LabelMismatch {
                    id,
                    label,
                    thickness: t.value(),
                });
            }
        }
        Ok(Self {
            id,
            source,
            features,
            thickness,
            label,
        })
    }

    /// Builds a sample whose id is `<source>/<local_id>`.
    pub fn namespaced(
        source: &str,
        local_id: &str,
        features: Vec<f64>,
        thickness: Option<ThicknessMm>,
        label: DepthClass,
    ) -> Result<Self, DataError> {
        Self::new(format!("{source}/{local_id}"), source, features, thickness, label)
    }

    /// Sample with a known thickness; the label is derived from it.
    pub fn with_thickness(
        id: impl Into<String>,
        source: impl Into<String>,
        features: Vec<f64>,
        thickness: ThicknessMm,
    ) -> Result<Self, DataError> {
        Self::new(id, source, features, Some(thickness), depth_class_of(thickness))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn thickness(&self) -> Option<ThicknessMm> {
        self.thickness
    }

    pub fn label(&self) -> DepthClass {
        self.label
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub low: usize,
    pub high: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.low + self.high
    }

    pub fn add(&mut self, class: DepthClass) {
        match class {
            DepthClass::Low => self.low += 1,
            DepthClass::High => self.high += 1,
        }
    }

    pub fn get(&self, class: DepthClass) -> usize {
        match class {
            DepthClass::Low => self.low,
            DepthClass::High => self.high,
        }
    }

    /// `low / high`, or `None` when there are no high samples.
    pub fn imbalance_ratio(&self) -> Option<f64> {
        (self.high > 0).then(|| self.low as f64 / self.high as f64)
    }
}

impl std::ops::AddAssign for ClassCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.low += rhs.low;
        self.high += rhs.high;
    }
}

/// An ordered collection of samples sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    dim: usize,
    source_counts: BTreeMap<String, ClassCounts>,
}

impl Dataset {
    pub fn new(dim: usize, samples: Vec<Sample>) -> Result<Self, DataError> {
        let mut seen = HashSet::with_capacity(samples.len());
        let mut source_counts: BTreeMap<String, ClassCounts> = BTreeMap::new();
        for s in &samples {
            if s.features.len() != dim {
                return Err(DataError::DimensionMismatch {
                    expected: dim,
                    found: s.features.len(),
                });
            }
            if !seen.insert(s.id.as_str()) {
                return Err(DataError::DuplicateId(s.id.clone()));
            }
            source_counts.entry(s.source.clone()).or_default().add(s.label);
        }
        Ok(Self {
            samples,
            dim,
            source_counts,
        })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            samples: Vec::new(),
            dim,
            source_counts: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sample> {
        self.samples.iter()
    }

    pub fn source_counts(&self) -> &BTreeMap<String, ClassCounts> {
        &self.source_counts
    }

    pub fn class_counts(&self) -> ClassCounts {
        self.source_counts.values().fold(ClassCounts::default(), |mut acc, c| {
            acc += *c;
            acc
        })
    }

    pub fn imbalance_ratio(&self) -> Option<f64> {
        self.class_counts().imbalance_ratio()
    }

    pub fn labels(&self) -> Vec<DepthClass> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// The samples at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let samples: Vec<Sample> = indices.iter().map(|&i| self.samples[i].clone()).collect();
        let mut source_counts: BTreeMap<String, ClassCounts> = BTreeMap::new();
        for s in &samples {
            source_counts.entry(s.source.clone()).or_default().add(s.label);
        }
        Dataset {
            samples,
            dim: self.dim,
            source_counts,
        }
    }

    /// Features as an `n × dim` matrix, one row per sample.
    pub fn feature_matrix(&self) -> Matrix<f64> {
        let data = self.samples.iter().flat_map(|s| s.features.iter().copied()).collect();
        Matrix::from_vec(self.samples.len(), self.dim, data).expect("rows share the dataset dim")
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a Sample;
    type IntoIter = std::slice::Iter<'a, Sample>;

    fn into_iter(self) -> Self::IntoIter {
        self.samples.iter()
    }
}

/// Concatenates datasets in order.
pub fn merge_datasets(parts: &[Dataset]) -> Result<Dataset, DataError> {
    let first = parts.first().ok_or(DataError::EmptyMerge)?;
    let dim = first.dim;
    if let Some(bad) = parts.iter().find(|p| p.dim != dim) {
        return Err(DataError::DimensionMismatch {
            expected: dim,
            found: bad.dim,
        });
    }
    let samples = parts.iter().flat_map(|p| p.samples.iter().cloned()).collect();
    Dataset::new(dim, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(v: f64) -> ThicknessMm {
        ThicknessMm::new(v).unwrap()
    }

    #[test]
    fn stages_follow_half_open_table() {
        assert_eq!(stage_of(t(0.5)), BreslowStage::I);
        assert_eq!(stage_of(t(2.0)), BreslowStage::III);
        assert_eq!(stage_of(t(0.76)), BreslowStage::II);
        assert_eq!(stage_of(t(4.5)), BreslowStage::IV);
        assert_eq!(stage_of(t(0.0)), BreslowStage::I);
        assert_eq!(stage_of(t(1.5)), BreslowStage::III);
        assert_eq!(stage_of(t(4.0)), BreslowStage::IV);
    }

    #[test]
    fn depth_classes() {
        assert_eq!(depth_class_of(t(0.3)), DepthClass::Low);
        assert_eq!(depth_class_of(t(0.76)), DepthClass::High);
        assert_eq!(depth_class_of(t(3.2)), DepthClass::High);
    }

    #[test]
    fn thickness_rejects_bad_values() {
        assert!(ThicknessMm::new(-0.1).is_err());
        assert!(ThicknessMm::new(f64::NAN).is_err());
        assert!(ThicknessMm::new(f64::INFINITY).is_err());
    }

    #[test]
    fn stage_and_class_agree_on_dense_grid() {
        for i in 0..=100_000 {
            let v = i as f64 * 1e-4;
            let th = t(v);
            assert_eq!(
                depth_class_of(th) == DepthClass::Low,
                stage_of(th) == BreslowStage::I,
                "disagree at {v}"
            );
        }
    }

    fn part(source: &str, low: usize, high: usize, dim: usize) -> Dataset {
        let mut samples = Vec::new();
        for i in 0..low + high {
            let label = if i < low { DepthClass::Low } else { DepthClass::High };
            samples.push(Sample::namespaced(source, &i.to_string(), vec![0.0; dim], None, label).unwrap());
        }
        Dataset::new(dim, samples).unwrap()
    }

    #[test]
    fn merging_the_four_sources_gives_the_pooled_ratio() {
        let parts = [
            part("isic", 385, 35, 4),
            part("atlas", 177, 89, 4),
            part("private1", 168, 119, 4),
            part("private2", 107, 82, 4),
        ];
        let merged = merge_datasets(&parts).unwrap();
        let c = merged.class_counts();
        assert_eq!((c.low, c.high), (837, 325));
        assert_eq!(merged.len(), 1162);
        assert!((merged.imbalance_ratio().unwrap() - 2.58).abs() <= 0.01);
        assert_eq!(merged.source_counts()["atlas"], ClassCounts { low: 177, high: 89 });
    }

    #[test]
    fn merge_of_one_part_is_identity() {
        let a = part("a", 3, 2, 5);
        assert_eq!(merge_datasets(std::slice::from_ref(&a)).unwrap(), a);
    }

    #[test]
    fn merge_rejects_mismatched_dimensions() {
        let err = merge_datasets(&[part("a", 2, 2, 32), part("b", 2, 2, 16)]).unwrap_err();
        assert!(matches!(
            err,
            DataError::DimensionMismatch {
                expected: 32,
                found: 16
            }
        ));
    }

    #[test]
    fn merge_rejects_duplicate_ids() {
        let err = merge_datasets(&[part("a", 2, 2, 3), part("a", 1, 1, 3)]).unwrap_err();
        assert!(matches!(err, DataError::DuplicateId(_)));
    }

    #[test]
    fn merge_of_nothing_is_an_error() {
        assert!(matches!(merge_datasets(&[]), Err(DataError::EmptyMerge)));
    }

    #[test]
    fn sample_validation() {
        let bad = Sample::new("a", "s", vec![1.0, f64::INFINITY], None, DepthClass::Low);
        assert!(matches!(bad, Err(DataError::NonFiniteFeature { index: 1, .. })));
        let mismatch = Sample::new("a", "s", vec![1.0], Some(t(2.0)), DepthClass::Low);
        assert!(matches!(mismatch, Err(DataError::LabelMismatch { .. })));
        assert!(Sample::new("a\tb", "s", vec![], None, DepthClass::Low).is_err());
        assert!(Sample::new("a", "", vec![], None, DepthClass::Low).is_err());
    }

    proptest! {
        #[test]
        fn merge_is_associative_in_counts(
            a in (0usize..20, 0usize..20),
            b in (0usize..20, 0usize..20),
            c in (0usize..20, 0usize..20),
        ) {
            let (pa, pb, pc) = (part("a", a.0, a.1, 2), part("b", b.0, b.1, 2), part("c", c.0, c.1, 2));
            let left = merge_datasets(&[merge_datasets(&[pa.clone(), pb.clone()]).unwrap(), pc.clone()]).unwrap();
            let right = merge_datasets(&[pa, merge_datasets(&[pb, pc]).unwrap()]).unwrap();
            prop_assert_eq!(left.source_counts(), right.source_counts());
            prop_assert_eq!(left, right);
        }
    }
}
