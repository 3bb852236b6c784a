//! Versioned JSON checkpoints of a trained model and its configuration.
//!
//! Floats are written in shortest round-trip form, so `load(save(c)) == c`
//! bit for bit.

use crate::model::{ModelError, ModelParams};
use crate::scalar::Scalar;
use crate::training::TrainConfig;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use thiserror::Error;

pub const FORMAT: &str = "breslow-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed checkpoint: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not a checkpoint (format tag `{0}`)")]
    Format(String),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint holds {found} parameters, expected {expected}")]
    Precision { expected: String, found: String },
    #[error("checkpoint parameters are inconsistent: {0}")]
    Shape(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Checkpoint<T> {
    pub format: String,
    pub version: u32,
    /// `f32` or `f64`.
    pub precision: String,
    pub seed: u64,
    pub config: TrainConfig<T>,
    pub params: ModelParams<T>,
}

fn precision_of<T>() -> String {
    std::any::type_name::<T>().to_string()
}

impl<T: Scalar + Serialize + for<'de> Deserialize<'de>> Checkpoint<T> {
    pub fn new(config: TrainConfig<T>, params: ModelParams<T>) -> Self {
        Self {
            format: FORMAT.to_string(),
            version: VERSION,
            precision: precision_of::<T>(),
            seed: config.seed,
            config,
            params,
        }
    }

    pub fn to_json(&self) -> Result<String, CheckpointError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
            version: u32,
            precision: String,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.format != FORMAT {
            return Err(CheckpointError::Format(header.format));
        }
        if header.version != VERSION {
            return Err(CheckpointError::Version(header.version));
        }
        if header.precision != precision_of::<T>() {
            return Err(CheckpointError::Precision {
                expected: precision_of::<T>(),
                found: header.precision,
            });
        }
        let ck: Self = serde_json::from_str(text)?;
        ck.params.check_shapes()?;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        fs::write(path, self.to_json()?).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let text = fs::read_to_string(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample<T: Scalar>() -> (TrainConfig<T>, ModelParams<T>) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = ModelParams::init(5, 3, T::of(0.37), &mut rng);
        p.unfreeze_last(2);
        let cfg = TrainConfig {
            seed: 99,
            ..TrainConfig::default()
        };
        (cfg, p)
    }

    #[test]
    fn roundtrip_is_exact() {
        let (cfg, p) = sample::<f64>();
        let ck = Checkpoint::new(cfg, p);
        assert_eq!(Checkpoint::from_json(&ck.to_json().unwrap()).unwrap(), ck);
        let (cfg, p) = sample::<f32>();
        let ck = Checkpoint::new(cfg, p);
        assert_eq!(Checkpoint::from_json(&ck.to_json().unwrap()).unwrap(), ck);
        assert_eq!(ck.seed, 99);
    }

    #[test]
    fn rejects_foreign_files() {
        let (cfg, p) = sample::<f64>();
        let json = Checkpoint::new(cfg, p).to_json().unwrap();
        assert!(matches!(
            Checkpoint::<f32>::from_json(&json),
            Err(CheckpointError::Precision { .. })
        ));
        let bumped = json.replacen("\"version\": 1", "\"version\": 7", 1);
        assert!(matches!(
            Checkpoint::<f64>::from_json(&bumped),
            Err(CheckpointError::Version(7))
        ));
        let other = json.replacen(FORMAT, "something-else", 1);
        assert!(matches!(
            Checkpoint::<f64>::from_json(&other),
            Err(CheckpointError::Format(_))
        ));
        assert!(matches!(
            Checkpoint::<f64>::from_json("{"),
            Err(CheckpointError::Json(_))
        ));
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let (cfg, p) = sample::<f64>();
        let ck = Checkpoint::new(cfg, p);
        ck.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);
        assert!(matches!(
            Checkpoint::<f64>::load(&dir.path().join("missing.json")),
            Err(CheckpointError::Io { .. })
        ));
    }
}
