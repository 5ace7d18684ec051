//! Predicting the share of bot accounts among a user's followees.
//!
//! The pipeline runs from raw account data ([`ingest`]) through feature
//! extraction ([`features`]) and a suite of regressors ([`regress`]) to
//! repeated cross-validation with paired significance tests ([`eval`]) and
//! rendered comparison tables ([`report`]). [`synth`] generates seeded
//! datasets with a planted dependency; [`cli`] drives everything in batch.

pub mod error;
pub mod features;
pub mod ingest;
pub mod numeric;
pub mod regress;
pub mod eval;
pub mod report;
pub mod synth;
pub mod cli;
mod kv;

pub use error::{Error, Result};

use std::io::Write;
use std::path::Path;

/// Writes `bytes` to a temporary file beside `path` and renames it into
/// place, so `path` is either untouched or complete.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(std::fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder.tempfile_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
