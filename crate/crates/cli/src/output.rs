//! Atomic writes and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

fn sibling_tmp(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp"))
}

/// Writes to a hidden sibling and renames it over `path`.
pub fn write_file_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = sibling_tmp(path);
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// Fills a hidden sibling directory through `fill`, then swaps it in for
/// `dir`. A failed `fill` leaves any previous `dir` untouched.
pub fn write_dir_atomic<F>(dir: &Path, fill: F) -> Result<(), CliError>
where
    F: FnOnce(&Path) -> Result<(), CliError>,
{
    let tmp = sibling_tmp(dir);
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    }
    if let Err(e) = fill(&tmp) {
        // best effort; the original error matters more
        let _ = fs::remove_dir_all(&tmp);
        return Err(e);
    }
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::rename(&tmp, dir).map_err(|e| CliError::io(dir, e))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Records what produced an output directory. Holds no timestamps or host
/// details so reruns stay byte-identical.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub input: Option<String>,
    pub outputs: Vec<String>,
    pub config: serde_json::Value,
}

impl<'a> Manifest<'a> {
    pub fn new(command: &'a str, cfg: &RunConfig, input: Option<&Path>) -> Self {
        Self {
            tool: "sefe",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: cfg.seed,
            input: input.map(|p| p.display().to_string()),
            outputs: Vec::new(),
            config: cfg.manifest_value(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_file_atomic(&dir.join("manifest.json"), text.as_bytes())
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    text.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_fill_keeps_previous_directory() {
        let root = tempfile::tempdir().unwrap();
        let dir = root.path().join("out");
        write_dir_atomic(&dir, |t| {
            ensure_dir(t)?;
            write_file_atomic(&t.join("a"), b"1")
        })
        .unwrap();
        let err = write_dir_atomic(&dir, |t| {
            ensure_dir(t)?;
            Err(CliError::Config("boom".into()))
        });
        assert!(err.is_err());
        assert_eq!(fs::read(dir.join("a")).unwrap(), b"1");
        assert!(!sibling_tmp(&dir).exists());
    }

    #[test]
    fn atomic_file_replaces_content() {
        let root = tempfile::tempdir().unwrap();
        let p = root.path().join("x.csv");
        write_file_atomic(&p, b"old").unwrap();
        write_file_atomic(&p, b"new").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"new");
        assert_eq!(fs::read_dir(root.path()).unwrap().count(), 1);
    }
}
