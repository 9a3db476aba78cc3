//! Artifact names, provenance headers and upstream checks.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const ASSOC: &str = "assoc.tsv";
pub const COVERAGE: &str = "coverage.tsv";
pub const SELECTION: &str = "selection.tsv";
pub const VECTORS_TEXT: &str = "vectors.txt";
pub const VECTORS_BIN: &str = "vectors.bin";
pub const MODEL_META: &str = "model.meta";
pub const OBJECTIVE: &str = "objective.csv";
pub const REPORT: &str = "report.csv";
pub const SYNTH_META: &str = "synth.meta";
pub const SWEEP_LOG: &str = "sweep_log.csv";
pub const SWEEP_REPORT: &str = "sweep_report.csv";

/// First line of every header-carrying artifact.
pub fn header_line(artifact: &str, hash: &str, seed: u64) -> String {
    format!("# geoembed artifact={artifact} config_hash={hash} seed={seed}")
}

/// Creates `path` and writes the header line followed by `body`.
pub fn write_with_header(
    path: &Path,
    artifact: &str,
    hash: &str,
    seed: u64,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{}", header_line(artifact, hash, seed))
        .and_then(|_| body(&mut out))
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// `key=value` metadata file; the header keys are included as entries.
pub fn write_meta(path: &Path, artifact: &str, hash: &str, seed: u64, entries: &BTreeMap<String, String>) -> Result<()> {
    write_with_header(path, artifact, hash, seed, |out| {
        for (k, v) in entries {
            writeln!(out, "{k}={v}")?;
        }
        Ok(())
    })
}

pub fn read_meta(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, i + 1, "expected key=value"))?;
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

/// Hash and seed from the first line of `path`.
pub fn read_header(path: &Path) -> Result<(String, u64)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut first = String::new();
    BufReader::new(file)
        .read_line(&mut first)
        .map_err(|e| Error::io(path, e))?;
    let mut hash = None;
    let mut seed = None;
    if first.starts_with("# geoembed ") {
        for field in first.split_whitespace() {
            if let Some(h) = field.strip_prefix("config_hash=") {
                hash = Some(h.to_string());
            } else if let Some(s) = field.strip_prefix("seed=") {
                seed = s.parse().ok();
            }
        }
    }
    match (hash, seed) {
        (Some(h), Some(s)) => Ok((h, s)),
        _ => Err(Error::parse(path, 1, "missing geoembed provenance header")),
    }
}

/// Fails unless `path` exists and carries `expected` as its config hash.
pub fn require(path: &Path, producer: &str, expected: &str) -> Result<PathBuf> {
    if !path.exists() {
        return Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            producer: producer.to_string(),
        });
    }
    let (found, _) = read_header(path)?;
    if found != expected {
        return Err(Error::HashMismatch {
            path: path.to_path_buf(),
            expected: expected.to_string(),
            found,
        });
    }
    Ok(path.to_path_buf())
}

/// Fails unless `path` exists; for artifacts without a header of their
/// own, such as binary vectors.
pub fn require_exists(path: &Path, producer: &str) -> Result<PathBuf> {
    if path.exists() {
        Ok(path.to_path_buf())
    } else {
        Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            producer: producer.to_string(),
        })
    }
}
