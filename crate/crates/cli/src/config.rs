//! Run configuration: defaults, then a `key = value` file, then flags.

use breslow_core::evaluation::Variant;
use breslow_core::focal::FocalConfig;
use breslow_core::optim::OptimizerKind;
use breslow_core::synth::SynthConfig;
use breslow_core::training::TrainConfig;
use breslow_core::Scalar;
use serde::{Serialize, Serializer};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F64,
    F32,
}

impl FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "f64" => Ok(Self::F64),
            "f32" => Ok(Self::F32),
            _ => Err(format!("unknown precision `{s}` (expected f64 or f32)")),
        }
    }
}

/// Which segment R² the regression report leads with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentMode {
    /// A separate fit per segment.
    Refit,
    /// The global fit restricted to each segment.
    Global,
}

impl FromStr for SegmentMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "refit" => Ok(Self::Refit),
            "global" => Ok(Self::Global),
            _ => Err(format!("unknown segment mode `{s}` (expected refit or global)")),
        }
    }
}

/// Comma-separated variant names; empty selects the command's default.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VariantList(pub Vec<Variant>);

impl FromStr for VariantList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim().is_empty() {
            return Ok(Self::default());
        }
        s.split(',')
            .map(|v| v.trim().parse())
            .collect::<Result<_, _>>()
            .map(Self)
    }
}

impl Serialize for VariantList {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.0.iter().map(|v| v.as_str()))
    }
}

/// Two increasing segment boundaries in mm, written `lo,hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds(pub [f64; 2]);

impl FromStr for Bounds {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [lo, hi] = parts.as_slice() else {
            return Err(format!("expected two comma-separated boundaries, got `{s}`"));
        };
        let lo: f64 = lo.parse().map_err(|_| format!("bad boundary `{lo}`"))?;
        let hi: f64 = hi.parse().map_err(|_| format!("bad boundary `{hi}`"))?;
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
            return Err(format!("boundaries must satisfy 0 < lo < hi, got {lo},{hi}"));
        }
        Ok(Self([lo, hi]))
    }
}

impl fmt::Display for Bounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.0[0], self.0[1])
    }
}

macro_rules! run_config {
    ($( $(#[$meta:meta])* $field:ident : $ty:ty = $default:expr, )*) => {
        /// Every knob of a run. Serialized into each report.
        #[derive(Debug, Clone, PartialEq, Serialize)]
        pub struct RunConfig {
            pub input: Option<PathBuf>,
            pub out_dir: PathBuf,
            pub checkpoint: Option<PathBuf>,
            $( pub $field: $ty, )*
        }

        impl Default for RunConfig {
            fn default() -> Self {
                Self {
                    input: None,
                    out_dir: PathBuf::from("."),
                    checkpoint: None,
                    $( $field: $default, )*
                }
            }
        }

        /// Flags shared by every subcommand; each overrides the same-named
        /// config key.
        #[derive(Debug, Clone, Default, clap::Args)]
        pub struct Overrides {
            /// Input file (feature file, thickness list or predictions,
            /// depending on the command).
            #[arg(long)]
            pub input: Option<PathBuf>,
            /// Directory receiving all artifacts.
            #[arg(long)]
            pub out_dir: Option<PathBuf>,
            /// Model checkpoint, written by `train` and read by `predict`.
            #[arg(long)]
            pub checkpoint: Option<PathBuf>,
            $(
                $(#[$meta])*
                #[arg(long)]
                pub $field: Option<$ty>,
            )*
        }

        impl RunConfig {
            /// Sets one key from its text form. Hyphens and underscores are
            /// interchangeable in `key`.
            pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
                match key.replace('-', "_").as_str() {
                    "input" => self.input = Some(PathBuf::from(value)),
                    "out_dir" => self.out_dir = PathBuf::from(value),
                    "checkpoint" => self.checkpoint = Some(PathBuf::from(value)),
                    $(
                        stringify!($field) => {
                            self.$field = value
                                .parse::<$ty>()
                                .map_err(|e| format!("invalid value `{value}` for `{}`: {e}", stringify!($field)))?
                        }
                    )*
                    other => return Err(format!("unknown key `{other}`")),
                }
                Ok(())
            }

            pub fn apply(&mut self, o: &Overrides) {
                if let Some(v) = &o.input {
                    self.input = Some(v.clone());
                }
                if let Some(v) = &o.out_dir {
                    self.out_dir = v.clone();
                }
                if let Some(v) = &o.checkpoint {
                    self.checkpoint = Some(v.clone());
                }
                $(
                    if let Some(v) = &o.$field {
                        self.$field = v.clone();
                    }
                )*
            }
        }
    };
}

run_config! {
    /// Root seed; every random stream is derived from it.
    seed: u64 = 0,
    /// Number of cross-validation folds.
    k: usize = 10,
    /// Fold-parallel worker threads (0 = all cores).
    jobs: usize = 1,
    /// Training precision: f64 or f32.
    precision: Precision = Precision::F64,

    /// Focusing exponent of the focal loss.
    gamma: f64 = 0.3,
    /// Class weight of Low.
    alpha_low: f64 = 1.0,
    /// Class weight of High.
    alpha_high: f64 = 5.0,
    /// Label smoothing mass moved to the other class.
    smoothing: f64 = 0.1,
    /// Dropout rate before the head.
    dropout: f64 = 0.3,
    /// Learning rate of the head phase.
    lr1: f64 = 1e-3,
    /// Learning rate of the fine-tuning phase.
    lr2: f64 = 1e-5,
    /// Epochs of the head phase.
    epochs1: usize = 50,
    /// Epochs of the fine-tuning phase.
    epochs2: usize = 50,
    /// Residual blocks in the adapter.
    blocks: usize = 6,
    /// Blocks unfrozen in the fine-tuning phase.
    unfreeze: usize = 4,
    /// Mini-batch size.
    batch: usize = 32,
    /// schedule-free or adam.
    optimizer: OptimizerKind = OptimizerKind::ScheduleFree,
    /// Adam first-moment decay.
    beta1: f64 = 0.9,
    /// Adam second-moment decay.
    beta2: f64 = 0.999,
    /// Adam denominator offset.
    adam_eps: f64 = 1e-8,
    /// Warmup steps of the optimizer.
    warmup: u64 = 0,
    /// Initial weight noise.
    init_noise: f64 = 0.01,
    /// Early-stop patience in epochs (0 disables).
    patience: usize = 0,
    /// Training variants, comma-separated: full, no-focal, no-scheduler,
    /// single-phase. Defaults to `full` for crossval/train and to all of
    /// them for ablate.
    variant: VariantList = VariantList::default(),

    /// Synthetic sample count.
    n: usize = 1162,
    /// Synthetic feature dimension.
    dim: usize = 32,
    /// Synthetic Low/High ratio.
    ratio: f64 = 2.58,
    /// Noise multiplier inside the 0.4-1.0 mm band.
    mid_noise: f64 = 6.0,
    /// Distance between class prototypes.
    separation: f64 = 6.0,
    /// Base feature noise.
    noise: f64 = 0.2,
    /// Median synthetic thickness (mm).
    median: f64 = 0.6,
    /// Log-space spread of synthetic thickness.
    log_sigma: f64 = 1.5,
    /// Largest synthetic thickness (mm).
    max_mm: f64 = 8.0,
    /// Gradation slope outside the 0.4-1.0 mm band.
    outer_drift: f64 = 0.25,
    /// Steepness of the gradation ramp (0 = linear).
    ramp_steepness: f64 = 40.0,

    /// Polynomial degree of the headline regression fit.
    degree: usize = 1,
    /// Segment boundaries in mm, `lo,hi`.
    segments: Bounds = Bounds([0.4, 1.0]),
    /// refit or global.
    segment_mode: SegmentMode = SegmentMode::Refit,
    /// Bin width in mm.
    bin_width: f64 = 0.1,
    /// Drop predictions without thickness instead of failing.
    #[arg(num_args = 0..=1, default_missing_value = "true")]
    skip_missing: bool = false,

    /// Ellipse half-axes in standard deviations.
    coverage: f64 = 2.0,
    /// Standardize features before PCA.
    #[arg(num_args = 0..=1, default_missing_value = "true")]
    standardize: bool = true,
    /// Monte Carlo samples per ellipse overlap.
    overlap_samples: usize = 100_000,

    /// Also write SVG renderings.
    #[arg(num_args = 0..=1, default_missing_value = "true")]
    svg: bool = false,
}

impl RunConfig {
    /// Defaults, then `file` (if any), then `overrides`.
    pub fn load(file: Option<&Path>, overrides: &Overrides) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.display().to_string(),
                source,
            })?;
            cfg.merge_str(&text)?;
        }
        cfg.apply(overrides);
        Ok(cfg)
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn merge_str(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| ConfigError::Line { line: i + 1, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            self.set(key.trim(), value.trim()).map_err(err)?;
        }
        Ok(())
    }

    pub fn synth(&self) -> SynthConfig {
        SynthConfig {
            n: self.n,
            dim: self.dim,
            ratio: self.ratio,
            mid_noise: self.mid_noise,
            separation: self.separation,
            noise: self.noise,
            median_mm: self.median,
            log_sigma: self.log_sigma,
            max_mm: self.max_mm,
            outer_drift: self.outer_drift,
            ramp_steepness: self.ramp_steepness,
            seed: self.seed,
        }
    }

    pub fn train<T: Scalar>(&self) -> TrainConfig<T> {
        TrainConfig {
            focal: FocalConfig {
                gamma: T::of(self.gamma),
                alpha: [T::of(self.alpha_low), T::of(self.alpha_high)],
                smoothing: T::of(self.smoothing),
            },
            dropout: T::of(self.dropout),
            lr_phase1: T::of(self.lr1),
            lr_phase2: T::of(self.lr2),
            epochs_phase1: self.epochs1,
            epochs_phase2: self.epochs2,
            blocks: self.blocks,
            unfreeze_blocks: self.unfreeze,
            batch_size: self.batch,
            seed: self.seed,
            optimizer: self.optimizer,
            beta1: T::of(self.beta1),
            beta2: T::of(self.beta2),
            eps: T::of(self.adam_eps),
            warmup_steps: self.warmup,
            init_noise: T::of(self.init_noise),
            patience: (self.patience > 0).then_some(self.patience),
        }
    }

    /// The variant list, or `default` when none was given.
    pub fn variants_or(&mut self, default: &[Variant]) -> Vec<Variant> {
        if self.variant.0.is_empty() {
            self.variant = VariantList(default.to_vec());
        }
        self.variant.0.clone()
    }

    /// Exactly one variant, defaulting to `full`.
    pub fn single_variant(&mut self) -> Result<Variant, ConfigError> {
        match self.variants_or(&[Variant::Full]).as_slice() {
            [v] => Ok(*v),
            more => Err(ConfigError::Invalid(format!(
                "this command takes one variant, got {}",
                more.len()
            ))),
        }
    }
}
