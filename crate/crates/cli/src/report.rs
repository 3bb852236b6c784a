//! JSON report envelope and tab-separated prediction files.

use crate::config::RunConfig;
use breslow_core::data::DepthClass;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, line {line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// The field excluded from reproducibility comparisons.
pub const TIMESTAMP_FIELD: &str = "generated_at_unix";

#[derive(Serialize)]
struct Envelope<'a, R> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    run_id: String,
    seed: u64,
    generated_at_unix: u64,
    input_sha256: Option<&'a str>,
    config: &'a RunConfig,
    result: &'a R,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Content hash of an input file, if the run has one.
pub fn input_digest(cfg: &RunConfig) -> Result<Option<String>, ReportError> {
    cfg.input
        .as_ref()
        .map(|p| {
            fs::read(p).map(|b| sha256_hex(&b)).map_err(|source| ReportError::Read {
                path: p.display().to_string(),
                source,
            })
        })
        .transpose()
}

/// First 16 hex digits of the hash of command, config and input.
pub fn run_id(command: &str, cfg: &RunConfig, input_sha: Option<&str>) -> Result<String, ReportError> {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update(b"\n");
    h.update(serde_json::to_vec(cfg)?);
    h.update(b"\n");
    h.update(input_sha.unwrap_or("").as_bytes());
    Ok(sha256_hex(&h.finalize())[..16].to_string())
}

/// Collects the artifacts of one command under the output directory.
pub struct Writer<'a> {
    pub cfg: &'a RunConfig,
    pub command: &'a str,
    pub input_sha: Option<String>,
    pub written: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    pub fn new(command: &'a str, cfg: &'a RunConfig) -> Result<Self, ReportError> {
        fs::create_dir_all(&cfg.out_dir).map_err(|source| ReportError::Write {
            path: cfg.out_dir.display().to_string(),
            source,
        })?;
        Ok(Self {
            cfg,
            command,
            input_sha: input_digest(cfg)?,
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<PathBuf, ReportError> {
        let path = self.path(name);
        fs::write(&path, body).map_err(|source| ReportError::Write {
            path: path.display().to_string(),
            source,
        })?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Pretty JSON without the envelope.
    pub fn json<R: Serialize>(&mut self, name: &str, value: &R) -> Result<PathBuf, ReportError> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.text(name, &body)
    }

    /// The main report: `result` wrapped with config echo, seed and run id.
    pub fn report<R: Serialize>(&mut self, name: &str, result: &R) -> Result<PathBuf, ReportError> {
        let sha = self.input_sha.clone();
        let env = Envelope {
            tool: "breslow",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            run_id: run_id(self.command, self.cfg, sha.as_deref())?,
            seed: self.cfg.seed,
            generated_at_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            input_sha256: sha.as_deref(),
            config: self.cfg,
            result,
        };
        self.json(name, &env)
    }
}

/// One row of a prediction file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRow {
    pub id: String,
    pub thickness: Option<f64>,
    pub label: DepthClass,
    pub p_high: f64,
}

pub const PREDICTION_HEADER: &str = "#id\tthickness_mm\tlabel\tp_high";

/// `id<TAB>thickness_or_empty<TAB>label<TAB>p_high`, after a `#` header.
/// Floats use the shortest form that reads back exactly.
pub fn write_predictions(rows: &[PredictionRow]) -> String {
    let mut out = String::from(PREDICTION_HEADER);
    out.push('\n');
    for r in rows {
        let t = r.thickness.map(|t| t.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{}\t{}\t{}\t{}", r.id, t, r.label, r.p_high);
    }
    out
}

pub fn parse_predictions(text: &str, path: &str) -> Result<Vec<PredictionRow>, ReportError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| ReportError::Parse {
            path: path.to_string(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, t, label, p] = fields.as_slice() else {
            return Err(err(format!("expected 4 tab-separated fields, found {}", fields.len())));
        };
        let thickness = if t.is_empty() {
            None
        } else {
            let v: f64 = t.parse().map_err(|_| err(format!("bad thickness `{t}`")))?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(err(format!("thickness must be finite and >= 0, got {t}")));
            }
            Some(v)
        };
        let label = label.parse().map_err(|e: String| err(e))?;
        let p_high: f64 = p.parse().map_err(|_| err(format!("bad probability `{p}`")))?;
        if !(0.0..=1.0).contains(&p_high) {
            return Err(err(format!("p_high must lie in [0, 1], got {p}")));
        }
        rows.push(PredictionRow {
            id: id.to_string(),
            thickness,
            label,
            p_high,
        });
    }
    Ok(rows)
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>, ReportError> {
    let text = fs::read_to_string(path).map_err(|source| ReportError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_predictions(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predictions_round_trip() {
        let rows = vec![
            PredictionRow {
                id: "a/1".into(),
                thickness: Some(0.3),
                label: DepthClass::Low,
                p_high: 0.1 + 0.2,
            },
            PredictionRow {
                id: "b".into(),
                thickness: None,
                label: DepthClass::High,
                p_high: 1.0,
            },
        ];
        assert_eq!(parse_predictions(&write_predictions(&rows), "x").unwrap(), rows);
    }

    #[test]
    fn bad_rows_name_their_line() {
        let e = parse_predictions("#h\na\t0.1\tLow\n", "f").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        assert!(parse_predictions("a\t0.1\tLow\t1.5\n", "f").is_err());
        assert!(parse_predictions("a\t-1\tLow\t0.5\n", "f").is_err());
    }

    #[test]
    fn run_id_tracks_config() {
        let a = RunConfig::default();
        let b = RunConfig {
            seed: 1,
            ..RunConfig::default()
        };
        assert_ne!(run_id("x", &a, None).unwrap(), run_id("x", &b, None).unwrap());
        assert_eq!(run_id("x", &a, None).unwrap(), run_id("x", &a, None).unwrap());
        assert_eq!(run_id("x", &a, None).unwrap().len(), 16);
    }
}
