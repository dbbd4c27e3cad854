//! Run manifests and report writing.
//!
//! Every run produces one manifest: the subcommand, the digests of all
//! file inputs, the parsed config snapshot, and the effective settings
//! after flag overrides. Its digest is computed over everything except
//! the timestamp, so re-running with identical inputs reproduces
//! byte-identical reports while the manifest still records when the run
//! happened. All other output files embed that digest: JSON reports as a
//! `manifest_digest` field, CSVs as a leading `#` comment the loaders
//! skip.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

/// Digest-covered part of the manifest.
#[derive(Debug, Serialize)]
pub struct ManifestBody {
    pub subcommand: String,
    pub tool_version: &'static str,
    pub inputs: Vec<InputRecord>,
    /// Parsed config as given, before flag overrides.
    pub config: serde_json::Value,
    /// Settings actually used after flag overrides.
    pub effective: serde_json::Value,
    pub rng_algorithm: Option<&'static str>,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub manifest_digest: String,
    /// Wall-clock seconds since the Unix epoch; honors SOURCE_DATE_EPOCH.
    /// Excluded from the digest.
    pub timestamp_unix_s: u64,
    #[serde(flatten)]
    pub body: ManifestBody,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        write!(hex, "{b:02x}").expect("writing to a String cannot fail");
    }
    hex
}

pub fn digest_file(path: &Path) -> Result<InputRecord, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    Ok(InputRecord {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

fn timestamp() -> u64 {
    if let Ok(epoch) = std::env::var("SOURCE_DATE_EPOCH") {
        if let Ok(s) = epoch.trim().parse() {
            return s;
        }
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn seal(body: ManifestBody) -> Result<Self, CliError> {
        let canonical = serde_json::to_vec(&body)
            .map_err(|e| CliError::input(format!("manifest serialization: {e}")))?;
        Ok(RunManifest {
            manifest_digest: sha256_hex(&canonical),
            timestamp_unix_s: timestamp(),
            body,
        })
    }

    pub fn digest(&self) -> &str {
        &self.manifest_digest
    }
}

/// Output directory helper: creates the directory once, then writes files
/// under it.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::input(format!("cannot create {}: {e}", root.display())))?;
        Ok(OutDir {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::input(format!("serializing {name}: {e}")))?;
        text.push('\n');
        fs::write(&path, text)
            .map_err(|e| CliError::input(format!("writing {}: {e}", path.display())))?;
        Ok(path)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, text)
            .map_err(|e| CliError::input(format!("writing {}: {e}", path.display())))?;
        Ok(path)
    }

    /// Write a CSV with the manifest digest as a leading comment. `rows`
    /// streams the body through the writer so large tables never
    /// materialize as one string.
    pub fn write_csv<F>(&self, name: &str, digest: &str, rows: F) -> Result<PathBuf, CliError>
    where
        F: FnOnce(&mut dyn std::io::Write) -> std::io::Result<()>,
    {
        let path = self.path(name);
        let file = fs::File::create(&path)
            .map_err(|e| CliError::input(format!("creating {}: {e}", path.display())))?;
        let mut out = std::io::BufWriter::new(file);
        (|| -> std::io::Result<()> {
            writeln!(out, "# manifest_digest={digest}")?;
            rows(&mut out)?;
            out.flush()
        })()
        .map_err(|e| CliError::input(format!("writing {}: {e}", path.display())))?;
        Ok(path)
    }
}
