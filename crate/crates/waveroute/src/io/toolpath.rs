//! Plain-text toolpath export: one polyline block per waveguide, written
//! bottom-up in z so a layer-by-layer writer builds supports before the
//! structures that lean on them.

use std::path::Path;

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::geom::sample_path;

/// Default polyline sampling pitch in micrometers.
pub const DEFAULT_TOOLPATH_PITCH: f64 = 0.5;

/// One block of "x y z" lines (4 decimals, micrometers) per segment, blocks
/// separated by a blank line, ordered by ascending minimum z.
pub fn toolpath_to_string(c: &Circuit, sample_pitch: f64) -> Result<String> {
    if !(sample_pitch > 0.0) {
        return Err(Error::InvalidParameter("sample pitch must be positive".into()));
    }
    let mut blocks: Vec<(f64, u32, String)> = Vec::with_capacity(c.segments.len());
    for s in &c.segments {
        let pts = sample_path(&s.path, sample_pitch)?;
        let min_z = pts.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
        let mut text = String::new();
        for p in &pts {
            text.push_str(&format!(
                "{} {} {}\n",
                fmt_um(p.x),
                fmt_um(p.y),
                fmt_um(p.z)
            ));
        }
        blocks.push((min_z, s.id.0, text));
    }
    blocks.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut out = String::new();
    for (i, (_, _, text)) in blocks.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(text);
    }
    Ok(out)
}

pub fn export_toolpath(c: &Circuit, path: &Path, sample_pitch: f64) -> Result<()> {
    super::write_atomic(path, toolpath_to_string(c, sample_pitch)?.as_bytes())
}

fn fmt_um(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}
