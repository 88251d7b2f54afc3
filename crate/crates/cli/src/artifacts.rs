//! Artifact directory layout, manifest and table files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use cone_ot::minimizer::Mode;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const LOG: &str = "log.txt";
pub const SOLUTION_V: &str = "solution/v.csv";
pub const SOLUTION_U: &str = "solution/u.csv";
pub const LOCK: &str = ".lock";
pub const MANIFEST_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    NotConverged,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub status: Status,
    pub exit_code: u8,
    pub stage: Option<String>,
    pub error_kind: Option<String>,
    pub message: Option<String>,
    pub iterations: Option<usize>,
    pub energy: Option<f64>,
    pub grad_norm: Option<f64>,
    /// All residual thresholds met; `None` when verification did not run.
    pub thresholds_passed: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: u32,
    pub config_hash: String,
    pub config_path: String,
    /// Base for relative table paths in `config`.
    pub config_dir: String,
    pub mode: Mode,
    pub mesh: usize,
    /// Effective config, defaults included.
    pub config: RunConfig,
    pub versions: BTreeMap<String, String>,
    pub started: String,
    pub finished: String,
    pub outcome: Outcome,
    /// Every other file in the run directory, sorted by path.
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Core { stage: "manifest", source: e.into() })
    }

    /// The manifest with timestamps blanked, for reproducibility checks.
    pub fn without_timestamps(&self) -> Self {
        Self { started: String::new(), finished: String::new(), ..self.clone() }
    }
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([("cone-ot".to_string(), cone_ot::VERSION.to_string()), ("cone-ot-cli".to_string(), env!("CARGO_PKG_VERSION").to_string())])
}

/// Exclusive ownership of a run directory; released on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        let path = dir.join(LOCK);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Locked(dir.to_path_buf())),
            Err(e) => Err(CliError::io(&path)(e)),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Writes files under a run directory and records them for the manifest.
#[derive(Debug)]
pub struct ArtifactWriter {
    root: PathBuf,
    files: BTreeMap<String, FileEntry>,
}

impl ArtifactWriter {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf(), files: BTreeMap::new() }
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(CliError::io(parent))?;
        }
        fs::write(&path, bytes).map_err(CliError::io(&path))?;
        let entry = FileEntry { path: rel.to_string(), bytes: bytes.len() as u64, sha256: hex::encode(Sha256::digest(bytes)) };
        self.files.insert(rel.to_string(), entry);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Core { stage: "write", source: e.into() })?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    /// Comma-separated table; `columns` are `(name, unit)` pairs.
    pub fn write_table(&mut self, rel: &str, columns: &[(String, &str)], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
        let mut text = columns.iter().map(|(c, u)| format!("{c} [{u}]")).collect::<Vec<_>>().join(",");
        text.push('\n');
        for row in rows {
            text.push_str(&row.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(","));
            text.push('\n');
        }
        self.write(rel, text.as_bytes())
    }

    pub fn entries(&self) -> Vec<FileEntry> {
        self.files.values().cloned().collect()
    }

    pub fn write_manifest(&self, manifest: &RunManifest) -> Result<(), CliError> {
        let path = self.root.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(manifest).map_err(|e| CliError::Core { stage: "write", source: e.into() })?;
        text.push('\n');
        fs::write(&path, text).map_err(CliError::io(&path))
    }
}

/// Round-trip exact decimal form.
pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.17e}")
    } else {
        x.to_string()
    }
}

/// `(column names, rows)` of a table written by [`ArtifactWriter::write_table`].
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let bad = |msg: String| CliError::Core { stage: "read", source: cone_ot::Error::Invalid(format!("{}: {msg}", path.display())) };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty table".into()))?;
    let names: Vec<String> = header.split(',').map(|c| c.split(" [").next().unwrap_or(c).trim().to_string()).collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let row: Vec<f64> = line.split(',').map(|c| c.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| bad(format!("line {}: {e}", k + 2)))?;
        if row.len() != names.len() {
            return Err(bad(format!("line {}: expected {} columns", k + 2, names.len())));
        }
        rows.push(row);
    }
    Ok((names, rows))
}

/// `prefix1 .. prefixN` column names in the given unit.
pub fn coord_columns(prefix: &str, n: usize, unit: &'static str) -> Vec<(String, &'static str)> {
    (1..=n).map(|i| (format!("{prefix}{i}"), unit)).collect()
}
