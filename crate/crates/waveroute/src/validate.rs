//! Manufacturability checks: clearance between waveguides, bend radius, and
//! aspect ratio.
//!
//! The clearance sweep samples every centerline, buckets polyline chunks into
//! a uniform spatial hash, and runs exact segment-segment distances only on
//! chunks whose boxes come within reach. Segment pairs that meet at a shared
//! node or a shared (merged) output port fuse there by design and are
//! skipped; everything else must keep its surface-to-surface clearance.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, SegmentId};
use crate::error::{Error, Result};
use crate::geom::{
    min_curvature_radius, sample_path, segment_segment_closest, Point3, DEFAULT_SAMPLE_PITCH,
};

/// Default required surface-to-surface clearance in micrometers.
pub const DEFAULT_CLEARANCE: f64 = 0.5;
/// Default minimum allowed bend radius in micrometers.
pub const DEFAULT_MIN_BEND_RADIUS: f64 = 2.0;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ValidateOptions {
    /// Required surface clearance between non-merging waveguides.
    pub surface_clearance: f64,
    /// Minimum allowed osculating-circle radius.
    pub min_bend_radius: f64,
    /// Arc-length pitch for centerline sampling.
    pub sample_pitch: f64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            surface_clearance: DEFAULT_CLEARANCE,
            min_bend_radius: DEFAULT_MIN_BEND_RADIUS,
            sample_pitch: DEFAULT_SAMPLE_PITCH,
        }
    }
}

/// A pair of waveguides closer than the allowed centerline distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClearanceViolation {
    pub segments: (SegmentId, SegmentId),
    /// Minimum centerline-to-centerline distance found.
    pub min_distance: f64,
    /// Point midway between the closest approach.
    pub location: Point3,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub clearance_violations: Vec<ClearanceViolation>,
    /// Smallest bend radius over all sampled paths; `None` when every path
    /// is straight.
    pub min_bend_radius_found: Option<f64>,
    /// Segments whose bend radius falls below the threshold.
    pub flagged_bend_segments: Vec<SegmentId>,
    /// Largest unsupported-length to diameter ratio. Informational only.
    pub max_aspect_ratio: f64,
    pub warnings: Vec<String>,
    pub pass: bool,
}

// ---------------------------------------------------------------------------
// Clearance
// ---------------------------------------------------------------------------

const CHUNK: usize = 32;

struct Chunk {
    seg: u32,
    start: usize,
    end: usize, // inclusive point range [start, end]
    lo: Point3,
    hi: Point3,
}

fn chunk_polyline(seg: u32, pts: &[Point3], out: &mut Vec<Chunk>) {
    let mut start = 0;
    loop {
        let end = (start + CHUNK).min(pts.len() - 1);
        let mut lo = pts[start];
        let mut hi = pts[start];
        for p in &pts[start..=end] {
            lo = Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
            hi = Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
        }
        out.push(Chunk { seg, start, end, lo, hi });
        if end == pts.len() - 1 {
            break;
        }
        start = end; // share the boundary point so no gap opens between chunks
    }
}

fn aabb_distance(a: &Chunk, b: &Chunk) -> f64 {
    let dx = (b.lo.x - a.hi.x).max(a.lo.x - b.hi.x).max(0.0);
    let dy = (b.lo.y - a.hi.y).max(a.lo.y - b.hi.y).max(0.0);
    let dz = (b.lo.z - a.hi.z).max(a.lo.z - b.hi.z).max(0.0);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Report every unordered pair of segments whose centerlines come closer
/// than (d_a + d_b)/2 + `surface_clearance`, excluding pairs that meet at a
/// shared node or shared merged port (intentional junctions).
pub fn check_clearance(
    c: &Circuit,
    surface_clearance: f64,
    sample_pitch: f64,
) -> Result<Vec<ClearanceViolation>> {
    if surface_clearance < 0.0 {
        return Err(Error::InvalidParameter(
            "clearance must be non-negative".into(),
        ));
    }
    if !(sample_pitch > 0.0) {
        return Err(Error::InvalidParameter("sample pitch must be positive".into()));
    }
    if c.segments.len() < 2 {
        return Ok(Vec::new());
    }

    let polylines: Vec<Vec<Point3>> = c
        .segments
        .iter()
        .map(|s| sample_path(&s.path, sample_pitch))
        .collect::<Result<_>>()?;
    let endpoints: Vec<[crate::circuit::ElementRef; 2]> =
        c.segments.iter().map(|s| [s.from, s.to]).collect();
    let diameters: Vec<f64> = c.segments.iter().map(|s| s.path.diameter()).collect();
    let max_diameter = diameters.iter().cloned().fold(0.0, f64::max);
    let max_threshold = max_diameter + surface_clearance;

    let mut chunks: Vec<Chunk> = Vec::new();
    for (i, pts) in polylines.iter().enumerate() {
        chunk_polyline(i as u32, pts, &mut chunks);
    }
    let max_extent = chunks
        .iter()
        .map(|ch| {
            (ch.hi.x - ch.lo.x)
                .max(ch.hi.y - ch.lo.y)
                .max(ch.hi.z - ch.lo.z)
        })
        .fold(0.0, f64::max);
    let cell = (max_extent + max_threshold).max(1.0);

    let mut cells: HashMap<(i32, i32, i32), Vec<u32>> = HashMap::new();
    let margin = max_threshold / 2.0 + 1e-9;
    for (ci, ch) in chunks.iter().enumerate() {
        let lo = (
            ((ch.lo.x - margin) / cell).floor() as i32,
            ((ch.lo.y - margin) / cell).floor() as i32,
            ((ch.lo.z - margin) / cell).floor() as i32,
        );
        let hi = (
            ((ch.hi.x + margin) / cell).floor() as i32,
            ((ch.hi.y + margin) / cell).floor() as i32,
            ((ch.hi.z + margin) / cell).floor() as i32,
        );
        for x in lo.0..=hi.0 {
            for y in lo.1..=hi.1 {
                for z in lo.2..=hi.2 {
                    cells.entry((x, y, z)).or_default().push(ci as u32);
                }
            }
        }
    }

    let excluded = |a: u32, b: u32| -> bool {
        let (ea, eb) = (&endpoints[a as usize], &endpoints[b as usize]);
        ea[0] == eb[0] || ea[0] == eb[1] || ea[1] == eb[0] || ea[1] == eb[1]
    };

    let cell_lists: Vec<&Vec<u32>> = cells.values().collect();
    let mut candidates: Vec<((u32, u32), f64, Point3)> = cell_lists
        .par_iter()
        .flat_map_iter(|list| {
            let mut local: Vec<((u32, u32), f64, Point3)> = Vec::new();
            for (i, &ca) in list.iter().enumerate() {
                for &cb in &list[i + 1..] {
                    let (a, b) = (&chunks[ca as usize], &chunks[cb as usize]);
                    if a.seg == b.seg || excluded(a.seg, b.seg) {
                        continue;
                    }
                    let thr = (diameters[a.seg as usize] + diameters[b.seg as usize]) / 2.0
                        + surface_clearance;
                    if aabb_distance(a, b) >= thr {
                        continue;
                    }
                    let pa = &polylines[a.seg as usize];
                    let pb = &polylines[b.seg as usize];
                    let mut best = f64::INFINITY;
                    let mut loc = pa[a.start];
                    for ia in a.start..a.end.max(a.start + 1) {
                        let (p1, q1) = (pa[ia], pa[(ia + 1).min(pa.len() - 1)]);
                        for ib in b.start..b.end.max(b.start + 1) {
                            let (p2, q2) = (pb[ib], pb[(ib + 1).min(pb.len() - 1)]);
                            let (d, x1, x2) = segment_segment_closest(p1, q1, p2, q2);
                            if d < best {
                                best = d;
                                loc = x1.midpoint(x2);
                            }
                        }
                    }
                    if best < thr {
                        let key = if a.seg <= b.seg { (a.seg, b.seg) } else { (b.seg, a.seg) };
                        local.push((key, best, loc));
                    }
                }
            }
            local
        })
        .collect();

    // Deterministic reduction: order candidates fully, keep the closest
    // approach per pair.
    candidates.sort_by(|x, y| {
        x.0.cmp(&y.0)
            .then(x.1.partial_cmp(&y.1).unwrap())
            .then_with(|| crate::circuit::quantize(x.2).cmp(&crate::circuit::quantize(y.2)))
    });
    let mut violations: Vec<ClearanceViolation> = Vec::new();
    let mut last_key = None;
    for (key, dist, loc) in candidates {
        if last_key == Some(key) {
            continue;
        }
        last_key = Some(key);
        violations.push(ClearanceViolation {
            segments: (
                c.segments[key.0 as usize].id,
                c.segments[key.1 as usize].id,
            ),
            min_distance: dist,
            location: loc,
        });
    }
    Ok(violations)
}

// ---------------------------------------------------------------------------
// Bend radius and aspect ratio
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BendRadiusReport {
    /// Minimum radius over all paths; `None` when everything is straight.
    pub min_radius: Option<f64>,
    pub flagged: Vec<SegmentId>,
}

/// Minimum osculating-circle radius per path (discrete 3-point estimate),
/// flagging paths tighter than `r_min`. Straight paths never flag.
pub fn check_bend_radius(c: &Circuit, r_min: f64, sample_pitch: f64) -> Result<BendRadiusReport> {
    if !(r_min > 0.0) {
        return Err(Error::InvalidParameter("r_min must be positive".into()));
    }
    let mut min_radius = f64::INFINITY;
    let mut flagged = Vec::new();
    for s in &c.segments {
        if s.path.is_degenerate() {
            continue;
        }
        let pts = sample_path(&s.path, sample_pitch)?;
        let r = min_curvature_radius(&pts);
        if r < min_radius {
            min_radius = r;
        }
        if r < r_min {
            flagged.push(s.id);
        }
    }
    Ok(BendRadiusReport {
        min_radius: min_radius.is_finite().then_some(min_radius),
        flagged,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AspectRatioReport {
    /// Largest unsupported length over diameter. Zero for an empty circuit.
    pub max_ratio: f64,
    pub warnings: Vec<String>,
}

/// Unsupported length over diameter, maximized over segments. Informational:
/// large ratios are achievable, not a failure. Zero-length segments are
/// excluded with a warning.
pub fn check_aspect_ratio(c: &Circuit) -> AspectRatioReport {
    let mut max_ratio: f64 = 0.0;
    let mut warnings = Vec::new();
    for s in &c.segments {
        let len = s.path.arc_length();
        if len < 1e-9 {
            warnings.push(format!(
                "segment {} has zero length, excluded from aspect statistics",
                s.id
            ));
            continue;
        }
        max_ratio = max_ratio.max(len / s.path.diameter());
    }
    AspectRatioReport { max_ratio, warnings }
}

/// Run every check and assemble the report. `pass` requires zero clearance
/// violations and no bend-radius flags; aspect ratio is informational.
pub fn validate_circuit(c: &Circuit, opts: &ValidateOptions) -> Result<ValidationReport> {
    let clearance_violations = check_clearance(c, opts.surface_clearance, opts.sample_pitch)?;
    let bend = check_bend_radius(c, opts.min_bend_radius, opts.sample_pitch)?;
    let aspect = check_aspect_ratio(c);
    let pass = clearance_violations.is_empty() && bend.flagged.is_empty();
    Ok(ValidationReport {
        clearance_violations,
        min_bend_radius_found: bend.min_radius,
        flagged_bend_segments: bend.flagged,
        max_aspect_ratio: aspect.max_ratio,
        warnings: aspect.warnings,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{ElementRef, Port, PortId, PortRole, Segment, SegmentId};
    use crate::fractal::{generate_coupler, generate_coupler_array, layer_dimensions, FractalSpec};
    use crate::geom::{Vec3, WaveguidePath};

    /// Two-port scaffold around a list of straight guides; enough structure
    /// for the geometric checks.
    fn circuit_of_lines(lines: &[(Point3, Point3)]) -> Circuit {
        let mut c = Circuit::default();
        for (i, (a, b)) in lines.iter().enumerate() {
            let pin = PortId(2 * i as u32);
            let pout = PortId(2 * i as u32 + 1);
            c.ports.push(Port {
                id: pin,
                role: PortRole::Input,
                grid_index: (i as i32, 0),
                position: *a,
            });
            c.ports.push(Port {
                id: pout,
                role: PortRole::Output,
                grid_index: (i as i32, 0),
                position: *b,
            });
            c.segments.push(Segment {
                id: SegmentId(i as u32),
                from: ElementRef::Port(pin),
                to: ElementRef::Port(pout),
                path: WaveguidePath::straight(*a, *b, 1.2).unwrap(),
            });
        }
        c
    }

    #[test]
    fn distant_parallel_guides_pass() {
        let c = circuit_of_lines(&[
            (Point3::new(0.0, 0.0, 80.0), Point3::new(0.0, 0.0, 0.0)),
            (Point3::new(20.0, 0.0, 80.0), Point3::new(20.0, 0.0, 0.0)),
        ]);
        let v = check_clearance(&c, 0.5, 0.25).unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn close_parallel_guides_violate() {
        // 1.5 um apart with d = 1.2 and clearance 0.5: threshold is 1.7.
        let c = circuit_of_lines(&[
            (Point3::new(0.0, 0.0, 80.0), Point3::new(0.0, 0.0, 0.0)),
            (Point3::new(1.5, 0.0, 80.0), Point3::new(1.5, 0.0, 0.0)),
        ]);
        let v = check_clearance(&c, 0.5, 0.25).unwrap();
        assert_eq!(v.len(), 1);
        assert!((v[0].min_distance - 1.5).abs() < 1e-6);
    }

    #[test]
    fn negative_clearance_rejected() {
        let c = circuit_of_lines(&[]);
        assert!(check_clearance(&c, -0.1, 0.25).is_err());
    }

    #[test]
    fn shared_junction_pairs_are_skipped() {
        // Two guides merging into one port: an intentional junction.
        let shared = PortId(100);
        let mut c = circuit_of_lines(&[]);
        c.ports.push(Port {
            id: shared,
            role: PortRole::Output,
            grid_index: (0, 0),
            position: Point3::new(0.0, 0.0, 0.0),
        });
        for (i, x) in [(-20.0), 20.0].iter().enumerate() {
            let pin = PortId(i as u32);
            c.ports.push(Port {
                id: pin,
                role: PortRole::Input,
                grid_index: (i as i32, 0),
                position: Point3::new(*x, 0.0, 80.0),
            });
            c.segments.push(Segment {
                id: SegmentId(i as u32),
                from: ElementRef::Port(pin),
                to: ElementRef::Port(shared),
                path: WaveguidePath::straight(
                    Point3::new(*x, 0.0, 80.0),
                    Point3::new(0.0, 0.0, 0.0),
                    1.2,
                )
                .unwrap(),
            });
        }
        let v = check_clearance(&c, 0.5, 0.25).unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn fig3b_array_is_collision_free() {
        let spec = FractalSpec { layers: 2, ..FractalSpec::default() };
        let c = generate_coupler_array(&spec, 3, 3, 20.0).unwrap();
        let v = check_clearance(&c, 0.5, 0.25).unwrap();
        assert!(
            v.is_empty(),
            "expected clean geometry, found {} violations, first: {:?}",
            v.len(),
            v.first()
        );
    }

    #[test]
    fn planted_collision_is_detected_exactly() {
        let spec = FractalSpec::default();
        let dims = layer_dimensions(&spec).unwrap();
        let mut c =
            generate_coupler(&spec, Point3::new(0.0, 0.0, dims.total_height())).unwrap();
        // Plant a short stub 1.0 um beside the central (straight) branch.
        let target = c
            .segments
            .iter()
            .find(|s| {
                let end = s.path.end();
                !s.path.is_degenerate() && end.x.abs() < 1e-9 && end.y.abs() < 1e-9
            })
            .expect("central branch")
            .id;
        let pa = PortId(10_000);
        let pb = PortId(10_001);
        c.ports.push(Port {
            id: pa,
            role: PortRole::Input,
            grid_index: (99, 99),
            position: Point3::new(1.0, 0.0, 45.0),
        });
        c.ports.push(Port {
            id: pb,
            role: PortRole::Output,
            grid_index: (99, 98),
            position: Point3::new(1.0, 0.0, 35.0),
        });
        let planted = SegmentId(9999);
        c.segments.push(Segment {
            id: planted,
            from: ElementRef::Port(pa),
            to: ElementRef::Port(pb),
            path: WaveguidePath::straight(
                Point3::new(1.0, 0.0, 45.0),
                Point3::new(1.0, 0.0, 35.0),
                1.2,
            )
            .unwrap(),
        });
        let v = check_clearance(&c, 0.5, 0.25).unwrap();
        assert_eq!(v.len(), 1, "violations: {v:?}");
        let pair = v[0].segments;
        assert!(pair == (target, planted) || pair == (planted, target));
        assert!((v[0].min_distance - 1.0).abs() < 0.05);
    }

    #[test]
    fn reported_distance_stable_under_finer_pitch() {
        let c = circuit_of_lines(&[
            (Point3::new(0.0, 0.0, 80.0), Point3::new(0.0, 0.0, 0.0)),
            (Point3::new(1.2, 0.0, 80.0), Point3::new(0.8, 0.0, 0.0)),
        ]);
        let coarse = check_clearance(&c, 0.5, 0.25).unwrap();
        let fine = check_clearance(&c, 0.5, 0.025).unwrap();
        assert_eq!(coarse.len(), 1);
        assert_eq!(fine.len(), 1);
        assert!((coarse[0].min_distance - fine[0].min_distance).abs() <= 0.25);
    }

    #[test]
    fn bend_radius_of_circle_arc() {
        let k = 0.5522847498307936 * 10.0;
        let arc = WaveguidePath::new(
            vec![
                Point3::new(10.0, 0.0, 0.0),
                Point3::new(10.0, 0.0, k),
                Point3::new(k, 0.0, 10.0),
                Point3::new(0.0, 0.0, 10.0),
            ],
            1.2,
        )
        .unwrap();
        let mut c = circuit_of_lines(&[]);
        c.segments.push(Segment {
            id: SegmentId(0),
            from: ElementRef::Port(PortId(0)),
            to: ElementRef::Port(PortId(1)),
            path: arc,
        });
        let r = check_bend_radius(&c, 5.0, 0.25).unwrap();
        let found = r.min_radius.unwrap();
        assert!((found - 10.0).abs() / 10.0 < 0.02, "radius {found}");
        assert!(r.flagged.is_empty());
        // Same path against a stricter threshold flags it.
        let strict = check_bend_radius(&c, 15.0, 0.25).unwrap();
        assert_eq!(strict.flagged.len(), 1);
    }

    #[test]
    fn straight_guides_never_flag_bend_radius() {
        let c = circuit_of_lines(&[(
            Point3::new(0.0, 0.0, 80.0),
            Point3::new(0.0, 0.0, 0.0),
        )]);
        let r = check_bend_radius(&c, 5.0, 0.25).unwrap();
        assert!(r.min_radius.is_none());
        assert!(r.flagged.is_empty());
    }

    #[test]
    fn aspect_ratio_cases() {
        let mut c = circuit_of_lines(&[(
            Point3::new(0.0, 0.0, 60.0),
            Point3::new(0.0, 0.0, 0.0),
        )]);
        let a = check_aspect_ratio(&c);
        assert!((a.max_ratio - 50.0).abs() < 1e-9);
        assert!(a.warnings.is_empty());

        // A zero-length stub is excluded with a warning.
        c.segments.push(Segment {
            id: SegmentId(7),
            from: ElementRef::Port(PortId(0)),
            to: ElementRef::Port(PortId(1)),
            path: WaveguidePath::straight(Point3::ORIGIN, Point3::ORIGIN, 1.2).unwrap(),
        });
        let a = check_aspect_ratio(&c);
        assert!((a.max_ratio - 50.0).abs() < 1e-9);
        assert_eq!(a.warnings.len(), 1);
    }

    #[test]
    fn default_coupler_reports_high_aspect_ratio() {
        let spec = FractalSpec { layers: 2, ..FractalSpec::default() };
        let dims = layer_dimensions(&spec).unwrap();
        let c = generate_coupler(&spec, Point3::new(0.0, 0.0, dims.total_height())).unwrap();
        let a = check_aspect_ratio(&c);
        assert!(a.max_ratio > 50.0, "max ratio {}", a.max_ratio);
    }

    #[test]
    fn full_report_on_default_coupler() {
        let spec = FractalSpec::default();
        let dims = layer_dimensions(&spec).unwrap();
        let c = generate_coupler(&spec, Point3::new(0.0, 0.0, dims.total_height())).unwrap();
        let report = validate_circuit(&c, &ValidateOptions::default()).unwrap();
        assert!(report.pass, "report: {report:?}");
        assert!(report.clearance_violations.is_empty());
        let _ = Vec3::ZERO;
    }
}
