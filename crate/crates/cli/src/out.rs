//! Atomic output: everything is written to a hidden sibling first and
//! renamed into place.

use std::path::{Path, PathBuf};

use crate::error::CliError;

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    // Keep the extension last so format detection still works.
    let tmp = match path.extension() {
        Some(ext) => format!(
            ".{}.{}.tmp.{}",
            path.file_stem().unwrap().to_string_lossy(),
            std::process::id(),
            ext.to_string_lossy()
        ),
        None => format!(".{name}.{}.tmp", std::process::id()),
    };
    path.with_file_name(tmp)
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(())
}

/// Runs `write` against a temporary path, then renames it to `path`.
pub fn with_temp<E>(path: &Path, write: impl FnOnce(&Path) -> Result<(), E>) -> Result<(), CliError>
where
    CliError: From<E>,
{
    ensure_parent(path)?;
    let tmp = temp_sibling(path);
    match write(&tmp) {
        Ok(()) => {
            std::fs::rename(&tmp, path)?;
            Ok(())
        }
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e.into())
        }
    }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    with_temp(path, |tmp| std::fs::write(tmp, bytes))
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_bytes(path, s.as_bytes())
}
