//! Tab-separated feature file.
//!
//! ```text
//! #dim=<D>
//! [# free-form comment lines]
//! id<TAB>source<TAB>thickness_mm_or_empty<TAB>Low|High<TAB>f1<TAB>...<TAB>fD
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so a write followed
//! by a parse reproduces every field bit for bit.

use super::{DataError, Dataset, DepthClass, Sample, ThicknessMm};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

const FIXED_COLUMNS: usize = 4;

fn parse_err(line: usize, message: impl Into<String>) -> DataError {
    DataError::Parse {
        line,
        message: message.into(),
    }
}

pub fn parse_feature_file(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let text = fs::read_to_string(path)?;
    parse_feature_str(&text)
}

pub fn parse_feature_str(text: &str) -> Result<Dataset, DataError> {
    let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines
        .next()
        .filter(|(_, l)| !l.is_empty())
        .ok_or_else(|| parse_err(1, "missing `#dim=<D>` header"))?;
    let dim: usize = header
        .strip_prefix("#dim=")
        .and_then(|d| d.parse().ok())
        .filter(|&d| d > 0)
        .ok_or_else(|| parse_err(1, format!("malformed header `{header}`")))?;

    let mut samples = Vec::new();
    let mut in_preamble = true;
    for (lineno, line) in lines {
        if line.ends_with('\r') {
            return Err(parse_err(lineno, "CR line ending (expected LF)"));
        }
        if line.is_empty() {
            continue;
        }
        if in_preamble && line.starts_with('#') {
            continue;
        }
        in_preamble = false;
        samples.push(parse_row(lineno, line, dim)?);
    }
    Dataset::new(dim, samples)
}

fn parse_row(lineno: usize, line: &str, dim: usize) -> Result<Sample, DataError> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != FIXED_COLUMNS + dim {
        return Err(parse_err(
            lineno,
            format!("expected {} columns, found {}", FIXED_COLUMNS + dim, fields.len()),
        ));
    }
    let thickness = match fields[2] {
        "" => None,
        raw => {
            let v: f64 = raw
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad thickness `{raw}`")))?;
            Some(ThicknessMm::new(v).map_err(|e| parse_err(lineno, e.to_string()))?)
        }
    };
    let label: DepthClass = fields[3].parse().map_err(|e: String| parse_err(lineno, e))?;
    let features = fields[FIXED_COLUMNS..]
        .iter()
        .enumerate()
        .map(|(j, raw)| {
            let v: f64 = raw
                .parse()
                .map_err(|_| parse_err(lineno, format!("feature {}: bad number `{raw}`", j + 1)))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(parse_err(
                    lineno,
                    format!("feature {}: non-finite value `{raw}`", j + 1),
                ))
            }
        })
        .collect::<Result<Vec<f64>, DataError>>()?;
    Sample::new(fields[0], fields[1], features, thickness, label).map_err(|e| parse_err(lineno, e.to_string()))
}

/// Serializes `ds`; `comments` are emitted as `# ...` lines after the header.
pub fn write_feature_string(ds: &Dataset, comments: &[&str]) -> String {
    let mut out = String::with_capacity(ds.len() * (ds.dim() * 20 + 32) + 16);
    let _ = writeln!(out, "#dim={}", ds.dim());
    for c in comments {
        for line in c.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    for s in ds {
        out.push_str(s.id());
        out.push('\t');
        out.push_str(s.source());
        out.push('\t');
        if let Some(t) = s.thickness() {
            let _ = write!(out, "{}", t.value());
        }
        out.push('\t');
        out.push_str(s.label().as_str());
        for f in s.features() {
            let _ = write!(out, "\t{f}");
        }
        out.push('\n');
    }
    out
}

pub fn write_feature_file(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    write_feature_file_with_comments(ds, path, &[])
}

pub fn write_feature_file_with_comments(
    ds: &Dataset,
    path: impl AsRef<Path>,
    comments: &[&str],
) -> Result<(), DataError> {
    fs::write(path, write_feature_string(ds, comments))?;
    Ok(())
}
