use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::{CliError, CliResult};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Writes `bytes` to `dir/name` through a temporary file in the same
/// directory, so readers never observe a partial file.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
    ensure_dir(dir)?;
    let target = dir.join(name);
    let mut tmp = NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(&target))?;
    tmp.as_file().sync_all().map_err(io_err(&target))?;
    tmp.persist(&target).map_err(|e| CliError::Io { path: target.display().to_string(), source: e.error })?;
    Ok(target)
}

pub fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<PathBuf> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(dir, name, s.as_bytes())
}
