//! Run manifests and their replay.

use crate::commands::{self, Job};
use crate::config::RunConfig;
use crate::context::Context;
use crate::emit::{read_json, write_json};
use crate::error::{CliError, CliResult};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::Path;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Relative tolerance for floating fields when a replayed artifact is not byte-identical.
pub const DEFAULT_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputHash {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub job: Job,
    /// Seed of the job; a replay uses this value even if `job` was edited.
    pub seed: Option<u64>,
    pub config_hash: String,
    pub config: RunConfig,
    pub outputs: Vec<OutputHash>,
}

pub fn file_sha256(path: &Path) -> CliResult<String> {
    Ok(format!("{:x}", Sha256::digest(std::fs::read(path)?)))
}

fn hash_outputs(dir: &Path, files: &[String]) -> CliResult<Vec<OutputHash>> {
    files.iter().map(|f| Ok(OutputHash { file: f.clone(), sha256: file_sha256(&dir.join(f))? })).collect()
}

/// Runs `job` into `dir` and records the manifest next to its artifacts.
pub fn execute(ctx: &Context, job: &Job, dir: &Path) -> CliResult<Manifest> {
    let files = commands::run(ctx, job, dir)?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        job: job.clone(),
        seed: job.seed(),
        config_hash: ctx.cfg.hash(),
        config: ctx.cfg.clone(),
        outputs: hash_outputs(dir, &files)?,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Agreement {
    Identical,
    WithinTolerance { max_rel_diff: f64 },
    Mismatch { reason: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct FileCheck {
    pub file: String,
    pub expected_sha256: String,
    pub actual_sha256: Option<String>,
    pub agreement: Agreement,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReproduceReport {
    pub pass: bool,
    pub files: Vec<FileCheck>,
}

/// Replays the manifest into a scratch directory and compares every artifact by
/// hash. With `rel_tol`, an artifact whose hash differs is compared field by
/// field against the recorded file instead of failing outright.
pub fn reproduce(manifest_path: &Path, rel_tol: Option<f64>) -> CliResult<ReproduceReport> {
    let manifest: Manifest = read_json(manifest_path)?;
    if manifest.config.hash() != manifest.config_hash {
        return Err(CliError::Config(format!("{}: embedded config does not match config_hash", manifest_path.display())));
    }
    manifest.config.validate()?;
    let job = match manifest.seed {
        Some(seed) => manifest.job.clone().with_seed(seed),
        None => manifest.job.clone(),
    };
    let original_dir = manifest_path.parent().unwrap_or(Path::new("."));
    let scratch = tempfile::tempdir()?;
    let ctx = Context::new(manifest.config.clone());
    let produced = commands::run(&ctx, &job, scratch.path())?;
    let mut files = Vec::new();
    for expected in &manifest.outputs {
        let fresh = scratch.path().join(&expected.file);
        let (actual_sha256, agreement) = if !produced.contains(&expected.file) {
            (None, Agreement::Mismatch { reason: "not produced by the replay".into() })
        } else {
            let actual = file_sha256(&fresh)?;
            let agreement = match rel_tol {
                _ if actual == expected.sha256 => Agreement::Identical,
                Some(tol) => compare_files(&original_dir.join(&expected.file), &expected.sha256, &fresh, tol),
                None => Agreement::Mismatch { reason: "hash differs".into() },
            };
            (Some(actual), agreement)
        };
        files.push(FileCheck { file: expected.file.clone(), expected_sha256: expected.sha256.clone(), actual_sha256, agreement });
    }
    let pass = files.iter().all(|f| !matches!(f.agreement, Agreement::Mismatch { .. }));
    Ok(ReproduceReport { pass, files })
}

fn compare_files(original: &Path, expected_sha256: &str, fresh: &Path, rel_tol: f64) -> Agreement {
    // Only a recorded file that still carries its manifest hash is a valid reference.
    if file_sha256(original).ok().as_deref() != Some(expected_sha256) {
        return Agreement::Mismatch { reason: "hash differs and no unaltered recorded file to compare with".into() };
    }
    let result = match original.extension().and_then(|e| e.to_str()) {
        Some("csv") => compare_csv(original, fresh, rel_tol),
        Some("json") => compare_json(original, fresh, rel_tol),
        _ => Err("hash differs".to_string()),
    };
    match result {
        Ok(max_rel_diff) => Agreement::WithinTolerance { max_rel_diff },
        Err(reason) => Agreement::Mismatch { reason },
    }
}

fn close(a: f64, b: f64, rel_tol: f64) -> Result<f64, String> {
    if a == b || (a.is_nan() && b.is_nan()) {
        return Ok(0.0);
    }
    let rel = (a - b).abs() / a.abs().max(b.abs());
    if rel <= rel_tol {
        Ok(rel)
    } else {
        Err(format!("{a:e} vs {b:e} (relative difference {rel:e})"))
    }
}

fn compare_fields(a: &str, b: &str, rel_tol: f64) -> Result<f64, String> {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => close(x, y, rel_tol),
        _ if a == b => Ok(0.0),
        _ => Err(format!("{a:?} vs {b:?}")),
    }
}

fn compare_csv(original: &Path, fresh: &Path, rel_tol: f64) -> Result<f64, String> {
    let read = |p: &Path| -> Result<Vec<csv::StringRecord>, String> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(p).map_err(|e| e.to_string())?;
        r.records().collect::<Result<_, _>>().map_err(|e| e.to_string())
    };
    let (a, b) = (read(original)?, read(fresh)?);
    if a.len() != b.len() {
        return Err(format!("{} rows vs {}", a.len(), b.len()));
    }
    let mut worst = 0.0f64;
    for (line, (ra, rb)) in a.iter().zip(&b).enumerate() {
        if ra.len() != rb.len() {
            return Err(format!("line {}: {} fields vs {}", line + 1, ra.len(), rb.len()));
        }
        for (x, y) in ra.iter().zip(rb) {
            worst = worst.max(compare_fields(x, y, rel_tol).map_err(|e| format!("line {}: {e}", line + 1))?);
        }
    }
    Ok(worst)
}

fn compare_values(a: &Value, b: &Value, at: &str, rel_tol: f64) -> Result<f64, String> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            close(x.as_f64().unwrap_or(f64::NAN), y.as_f64().unwrap_or(f64::NAN), rel_tol).map_err(|e| format!("{at}: {e}"))
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => x
            .iter()
            .zip(y)
            .enumerate()
            .try_fold(0.0f64, |m, (i, (p, q))| Ok(m.max(compare_values(p, q, &format!("{at}[{i}]"), rel_tol)?))),
        (Value::Object(x), Value::Object(y)) if x.len() == y.len() => x.iter().try_fold(0.0f64, |m, (k, p)| {
            let q = y.get(k).ok_or_else(|| format!("{at}.{k}: missing"))?;
            Ok(m.max(compare_values(p, q, &format!("{at}.{k}"), rel_tol)?))
        }),
        _ if a == b => Ok(0.0),
        _ => Err(format!("{at}: {a} vs {b}")),
    }
}

fn compare_json(original: &Path, fresh: &Path, rel_tol: f64) -> Result<f64, String> {
    let read = |p: &Path| -> Result<Value, String> {
        serde_json::from_slice(&std::fs::read(p).map_err(|e| e.to_string())?).map_err(|e| e.to_string())
    };
    compare_values(&read(original)?, &read(fresh)?, "$", rel_tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(a: &str, b: &str, ext: &str) -> (tempfile::TempDir, std::path::PathBuf, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let (pa, pb) = (dir.path().join(format!("a.{ext}")), dir.path().join(format!("b.{ext}")));
        std::fs::write(&pa, a).unwrap();
        std::fs::write(&pb, b).unwrap();
        (dir, pa, pb)
    }

    #[test]
    fn csv_fields_compare_within_relative_tolerance() {
        let (_d, a, b) = pair("x,y\n1.0,ok\n2.0,ok\n", "x,y\n1.0000000000001,ok\n2,ok\n", "csv");
        let rel = compare_csv(&a, &b, 1e-9).unwrap();
        assert!(rel > 0.0 && rel < 1e-12);
        assert!(compare_csv(&a, &b, 1e-14).is_err());
        let (_d, a, b) = pair("x,y\n1.0,ok\n", "x,y\n1.0,no\n", "csv");
        assert!(compare_csv(&a, &b, 1e-9).is_err());
        let (_d, a, b) = pair("x\n1\n", "x\n1\n2\n", "csv");
        assert!(compare_csv(&a, &b, 1e-9).is_err());
    }

    #[test]
    fn json_values_compare_recursively() {
        let (_d, a, b) = pair(r#"{"a":[1.0,2.0],"b":{"c":"s","d":null}}"#, r#"{"a":[1.0,2.0000000001],"b":{"c":"s","d":null}}"#, "json");
        assert!(compare_json(&a, &b, 1e-9).is_ok());
        assert!(compare_json(&a, &b, 1e-12).is_err());
        let (_d, a, b) = pair(r#"{"a":1}"#, r#"{"b":1}"#, "json");
        assert!(compare_json(&a, &b, 1e-9).is_err());
    }

    #[test]
    fn tolerance_fallback_needs_an_unaltered_reference() {
        let (_d, a, b) = pair("x\n1.0\n", "x\n1.00000000000001\n", "csv");
        let recorded = file_sha256(&a).unwrap();
        assert!(matches!(compare_files(&a, &recorded, &b, 1e-9), Agreement::WithinTolerance { .. }));
        assert!(matches!(compare_files(&a, "0000", &b, 1e-9), Agreement::Mismatch { .. }));
    }

    #[test]
    fn job_seed_override_only_touches_seeded_jobs() {
        let j = Job::Tails { seed: 1, draws: 300 }.with_seed(9);
        assert_eq!(j, Job::Tails { seed: 9, draws: 300 });
        assert_eq!(Job::Spectrum.with_seed(9), Job::Spectrum);
        assert_eq!(Job::Spectrum.seed(), None);
    }
}
