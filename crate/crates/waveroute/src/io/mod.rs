//! File formats: JSON netlist, binary STL meshes, and plain-text toolpaths.
//!
//! All writers are byte-deterministic for identical inputs, and every file is
//! written to a temporary sibling and renamed into place.

pub mod mesh;
pub mod netlist;
pub mod toolpath;

use std::fs;
use std::path::Path;

use crate::error::Result;

/// Write-then-rename so readers never observe a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
