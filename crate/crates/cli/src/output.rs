//! Artifact emission: every file is written to a temporary sibling and
//! renamed into place, so concurrent or interrupted runs never expose a
//! half-written artifact.

use std::fs;
use std::path::Path;

use aiready_core::{Error, Result};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `content` to `path` atomically (temp file + rename).
pub fn atomic_write(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

/// Atomic write for producers that need a path (CSV writers): `write` fills
/// the temp file, which is then renamed into place.
pub fn atomic_write_with<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&Path) -> Result<()>,
{
    let tmp = path.with_extension("tmp");
    write(&tmp)?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}
