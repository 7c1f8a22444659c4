//! Report emission: atomic CSV writes plus a run manifest.
//!
//! Every run writes its output files through a temp-file-and-rename so a
//! crashed run never leaves a half-written report, and finishes with a
//! `manifest.txt` recording the complete effective configuration (defaults
//! included). Re-running the same config reproduces every CSV byte for
//! byte; only the manifest's timestamp comment differs.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use manigap_core::error::{Error, Result};

use crate::config::{serialize_config, RunConfig};

/// The manifest body: a timestamp comment followed by the full effective
/// config, in a form `parse_config` accepts unchanged.
pub fn manifest_text(cfg: &RunConfig) -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("# emitted at unix time {secs}\n{}", serialize_config(cfg))
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `content` to `dir/name` atomically: the bytes land in a temp file
/// in the same directory and are renamed into place.
pub fn write_atomic(dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(&target, e))?;
    tmp.write_all(content.as_bytes())
        .map_err(|e| io_err(&target, e))?;
    tmp.persist(&target)
        .map_err(|e| io_err(&target, e.error))?;
    Ok(target)
}

/// Writes a run's report files and its manifest into `dir`, returning every
/// path written (manifest last).
pub fn emit_files(dir: &Path, cfg: &RunConfig, files: &[(String, String)]) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::with_capacity(files.len() + 1);
    for (name, content) in files {
        paths.push(write_atomic(dir, name, content)?);
    }
    paths.push(write_atomic(dir, "manifest.txt", &manifest_text(cfg))?);
    Ok(paths)
}
