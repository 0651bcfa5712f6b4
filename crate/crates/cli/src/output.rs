//! Artifact writing. Files go through a temp file and a rename so readers
//! never observe a partial artifact; stdout is used when no path is given.

use std::io::Write;
use std::path::Path;

use crate::failure::Failure;

/// Writes `bytes` to `path` atomically (temp file in the same directory,
/// then rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    std::fs::create_dir_all(&parent)
        .map_err(|e| Failure::run(format!("cannot create {}: {e}", parent.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&parent)
        .map_err(|e| Failure::run(format!("cannot create temp file in {}: {e}", parent.display())))?;
    tmp.write_all(bytes)
        .map_err(|e| Failure::run(format!("cannot write {}: {e}", path.display())))?;
    tmp.flush()
        .map_err(|e| Failure::run(format!("cannot write {}: {e}", path.display())))?;
    tmp.persist(path)
        .map_err(|e| Failure::run(format!("cannot finalize {}: {}", path.display(), e.error)))?;
    Ok(())
}

/// Pretty-prints a JSON artifact to `out` or stdout, newline-terminated.
pub fn emit_json(value: &serde_json::Value, out: Option<&Path>) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::run(format!("cannot serialize artifact: {e}")))?;
    text.push('\n');
    match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| Failure::run(format!("cannot write stdout: {e}")))?;
            Ok(())
        }
    }
}
