//! Tube meshes: each waveguide tessellated as a polygonal tube around its
//! sampled centerline, capped at both ends, written as binary STL.

use std::path::Path;

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::geom::{sample_path, Point3, Vec3};

/// Centerline sampling pitch for meshing. Coarser than the collision pitch;
/// chord sag at the bend radii in play stays far below the diameter.
const MESH_PITCH: f64 = 2.0;

/// Tessellate the circuit as one closed tube per waveguide and encode as
/// binary STL (little-endian, f32). `sides` is the polygon count per ring,
/// at least 3.
pub fn mesh_to_bytes(c: &Circuit, sides: u32) -> Result<Vec<u8>> {
    if sides < 3 {
        return Err(Error::InvalidParameter(format!(
            "a tube needs at least 3 sides, got {sides}"
        )));
    }
    let mut triangles: Vec<[Point3; 3]> = Vec::new();
    for s in &c.segments {
        let rings = sample_path(&s.path, MESH_PITCH)?;
        tube_triangles(&rings, s.path.diameter() / 2.0, sides, &mut triangles);
    }

    let mut out = Vec::with_capacity(84 + triangles.len() * 50);
    let mut header = [0u8; 80];
    let tag = b"waveroute tube mesh";
    header[..tag.len()].copy_from_slice(tag);
    out.extend_from_slice(&header);
    out.extend_from_slice(&(triangles.len() as u32).to_le_bytes());
    for t in &triangles {
        let n = triangle_normal(t);
        for v in [n.x, n.y, n.z] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        for p in t {
            for v in [p.x, p.y, p.z] {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    Ok(out)
}

pub fn export_mesh(c: &Circuit, path: &Path, sides: u32) -> Result<()> {
    super::write_atomic(path, &mesh_to_bytes(c, sides)?)
}

fn triangle_normal(t: &[Point3; 3]) -> Vec3 {
    (t[1] - t[0]).cross(t[2] - t[0]).normalize().unwrap_or(Vec3::ZERO)
}

/// Rotation-minimizing frames along the polyline keep the tube from
/// twisting; rings are connected by quads split into two triangles and the
/// ends are closed with fans.
fn tube_triangles(centers: &[Point3], radius: f64, sides: u32, out: &mut Vec<[Point3; 3]>) {
    let n = centers.len();
    if n < 2 {
        return;
    }
    let tangent_at = |i: usize| -> Vec3 {
        let ahead = if i + 1 < n { centers[i + 1] - centers[i] } else { Vec3::ZERO };
        let behind = if i > 0 { centers[i] - centers[i - 1] } else { Vec3::ZERO };
        (ahead + behind).normalize().unwrap_or(Vec3::DOWN)
    };

    let t0 = tangent_at(0);
    let mut normal = t0
        .cross(Vec3::Z)
        .normalize()
        .or_else(|| t0.cross(Vec3::new(1.0, 0.0, 0.0)).normalize())
        .unwrap_or(Vec3::new(1.0, 0.0, 0.0));

    let mut rings: Vec<Vec<Point3>> = Vec::with_capacity(n);
    for i in 0..n {
        let t = tangent_at(i);
        // transport the previous normal into the new cross-section plane
        normal = (normal - t * normal.dot(t)).normalize().unwrap_or(normal);
        let binormal = t.cross(normal).normalize().unwrap_or(normal);
        let ring: Vec<Point3> = (0..sides)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / sides as f64;
                centers[i] + (normal * theta.cos() + binormal * theta.sin()) * radius
            })
            .collect();
        rings.push(ring);
    }

    for w in rings.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        for k in 0..sides as usize {
            let k1 = (k + 1) % sides as usize;
            out.push([a[k], b[k], b[k1]]);
            out.push([a[k], b[k1], a[k1]]);
        }
    }
    // end caps: fans around the centerline endpoints
    let first = &rings[0];
    for k in 0..sides as usize {
        let k1 = (k + 1) % sides as usize;
        out.push([centers[0], first[k1], first[k]]);
    }
    let last = rings.last().unwrap();
    for k in 0..sides as usize {
        let k1 = (k + 1) % sides as usize;
        out.push([centers[n - 1], last[k], last[k1]]);
    }
}
