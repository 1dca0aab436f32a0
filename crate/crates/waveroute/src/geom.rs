//! 3D points, vectors, and piecewise cubic Bezier waveguide centerlines.
//!
//! Coordinate convention: the optical axis is z. Input ports live on the
//! high-z plane, output ports at z = 0, and light travels toward -z. All
//! lengths are micrometers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default waveguide diameter in micrometers.
pub const DEFAULT_DIAMETER: f64 = 1.2;

/// Default arc-length pitch for geometric queries (about d/5).
pub const DEFAULT_SAMPLE_PITCH: f64 = 0.25;

/// Angular tolerance for tangent continuity at interior path joints.
pub const TANGENT_TOLERANCE_DEG: f64 = 1.0;

/// A point in 3D space (micrometers).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Self = Self { x: 0.0, y: 0.0, z: 0.0 };

    #[inline]
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn distance(self, other: Point3) -> f64 {
        (other - self).norm()
    }

    #[inline]
    pub fn midpoint(self, other: Point3) -> Point3 {
        Point3::new(
            0.5 * (self.x + other.x),
            0.5 * (self.y + other.y),
            0.5 * (self.z + other.z),
        )
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Self { x: a[0], y: a[1], z: a[2] }
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

/// A displacement or direction in 3D space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Self = Self { x: 0.0, y: 0.0, z: 0.0 };
    pub const Z: Self = Self { x: 0.0, y: 0.0, z: 1.0 };
    /// Direction of light propagation.
    pub const DOWN: Self = Self { x: 0.0, y: 0.0, z: -1.0 };

    #[inline]
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    #[inline]
    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn normalize(self) -> Option<Vec3> {
        let n = self.norm();
        if n < 1e-12 {
            None
        } else {
            Some(self * (1.0 / n))
        }
    }

    /// Angle to another vector, in radians.
    pub fn angle_to(self, other: Vec3) -> f64 {
        let denom = self.norm() * other.norm();
        if denom < 1e-300 {
            return 0.0;
        }
        (self.dot(other) / denom).clamp(-1.0, 1.0).acos()
    }

    /// The horizontal (x, y) component.
    #[inline]
    pub fn horizontal(self) -> Vec3 {
        Vec3::new(self.x, self.y, 0.0)
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Self { x: a[0], y: a[1], z: a[2] }
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl std::ops::Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl std::ops::Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl std::ops::Sub for Point3 {
    type Output = Vec3;
    fn sub(self, o: Point3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl std::ops::Add<Vec3> for Point3 {
    type Output = Point3;
    fn add(self, v: Vec3) -> Point3 {
        Point3::new(self.x + v.x, self.y + v.y, self.z + v.z)
    }
}

impl std::ops::Sub<Vec3> for Point3 {
    type Output = Point3;
    fn sub(self, v: Vec3) -> Point3 {
        Point3::new(self.x - v.x, self.y - v.y, self.z - v.z)
    }
}

/// One cubic Bezier span.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubicBezier {
    pub p: [Point3; 4],
}

impl CubicBezier {
    pub fn new(p0: Point3, p1: Point3, p2: Point3, p3: Point3) -> Self {
        Self { p: [p0, p1, p2, p3] }
    }

    pub fn eval(&self, t: f64) -> Point3 {
        let u = 1.0 - t;
        let b0 = u * u * u;
        let b1 = 3.0 * u * u * t;
        let b2 = 3.0 * u * t * t;
        let b3 = t * t * t;
        Point3::new(
            b0 * self.p[0].x + b1 * self.p[1].x + b2 * self.p[2].x + b3 * self.p[3].x,
            b0 * self.p[0].y + b1 * self.p[1].y + b2 * self.p[2].y + b3 * self.p[3].y,
            b0 * self.p[0].z + b1 * self.p[1].z + b2 * self.p[2].z + b3 * self.p[3].z,
        )
    }

    pub fn derivative(&self, t: f64) -> Vec3 {
        let u = 1.0 - t;
        let d0 = self.p[1] - self.p[0];
        let d1 = self.p[2] - self.p[1];
        let d2 = self.p[3] - self.p[2];
        (d0 * (u * u) + d1 * (2.0 * u * t) + d2 * (t * t)) * 3.0
    }

    /// De Casteljau split at t = 1/2.
    pub fn split_half(&self) -> (CubicBezier, CubicBezier) {
        let [p0, p1, p2, p3] = self.p;
        let q0 = p0.midpoint(p1);
        let q1 = p1.midpoint(p2);
        let q2 = p2.midpoint(p3);
        let r0 = q0.midpoint(q1);
        let r1 = q1.midpoint(q2);
        let s = r0.midpoint(r1);
        (
            CubicBezier::new(p0, q0, r0, s),
            CubicBezier::new(s, r1, q2, p3),
        )
    }

    pub fn chord_length(&self) -> f64 {
        self.p[0].distance(self.p[3])
    }

    /// Control polygon length; an upper bound on the arc length.
    pub fn polygon_length(&self) -> f64 {
        self.p[0].distance(self.p[1]) + self.p[1].distance(self.p[2]) + self.p[2].distance(self.p[3])
    }

    /// Arc length by adaptive subdivision (Gravesen bounds).
    pub fn arc_length(&self) -> f64 {
        fn recurse(b: &CubicBezier, depth: u32) -> f64 {
            let chord = b.chord_length();
            let poly = b.polygon_length();
            if poly - chord < 1e-9 * (1.0 + poly) || depth > 40 {
                // Exact for quadratics, excellent for near-flat cubics.
                (2.0 * chord + poly) / 3.0
            } else {
                let (l, r) = b.split_half();
                recurse(&l, depth + 1) + recurse(&r, depth + 1)
            }
        }
        recurse(self, 0)
    }

    /// Append samples so consecutive arc-length spacing stays below `pitch`.
    /// The start point is not emitted; callers seed it.
    fn sample_into(&self, pitch: f64, out: &mut Vec<Point3>, depth: u32) {
        let chord = self.chord_length();
        let poly = self.polygon_length();
        // Arc length is bounded by the control polygon, so a piece whose
        // polygon fits in one pitch needs no further refinement. The flatness
        // term keeps chords faithful to the curve for distance queries.
        if depth > 40 || (poly <= pitch && poly - chord <= 0.1 * pitch) {
            out.push(self.p[3]);
        } else {
            let (l, r) = self.split_half();
            l.sample_into(pitch, out, depth + 1);
            r.sample_into(pitch, out, depth + 1);
        }
    }
}

/// A single waveguide centerline: piecewise cubic Bezier control points plus
/// a diameter.
///
/// Control points are shared between consecutive spans, so a path of k cubic
/// segments stores 3k + 1 points. Interior joints must be tangent-continuous
/// within [`TANGENT_TOLERANCE_DEG`]. A path whose points all coincide is a
/// valid degenerate (zero-length) waveguide stub.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveguidePath {
    control_points: Vec<Point3>,
    diameter: f64,
}

impl WaveguidePath {
    pub fn new(control_points: Vec<Point3>, diameter: f64) -> Result<Self> {
        if control_points.len() < 4 || control_points.len() % 3 != 1 {
            return Err(Error::InvalidParameter(format!(
                "control point count must be 3k+1 with k >= 1, got {}",
                control_points.len()
            )));
        }
        if !(diameter > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "diameter must be positive, got {diameter}"
            )));
        }
        if control_points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("non-finite control point".into()));
        }
        let path = Self { control_points, diameter };
        path.check_joint_tangents()?;
        Ok(path)
    }

    /// A straight single-segment path. Coincident endpoints produce a valid
    /// zero-length stub.
    pub fn straight(p0: Point3, p1: Point3, diameter: f64) -> Result<Self> {
        let d = p1 - p0;
        Self::new(
            vec![p0, p0 + d * (1.0 / 3.0), p0 + d * (2.0 / 3.0), p1],
            diameter,
        )
    }

    fn check_joint_tangents(&self) -> Result<()> {
        let tol = TANGENT_TOLERANCE_DEG.to_radians() + 1e-9;
        for j in (3..self.control_points.len() - 1).step_by(3) {
            let incoming = self.control_points[j] - self.control_points[j - 1];
            let outgoing = self.control_points[j + 1] - self.control_points[j];
            if incoming.norm() < 1e-12 || outgoing.norm() < 1e-12 {
                continue; // degenerate handle, tangent undefined
            }
            let angle = incoming.angle_to(outgoing);
            if angle > tol {
                return Err(Error::InvalidParameter(format!(
                    "tangent discontinuity of {:.3} deg at joint {}",
                    angle.to_degrees(),
                    j / 3
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    #[inline]
    pub fn control_points(&self) -> &[Point3] {
        &self.control_points
    }

    #[inline]
    pub fn start(&self) -> Point3 {
        self.control_points[0]
    }

    #[inline]
    pub fn end(&self) -> Point3 {
        *self.control_points.last().unwrap()
    }

    pub fn segment_count(&self) -> usize {
        (self.control_points.len() - 1) / 3
    }

    pub fn segments(&self) -> impl Iterator<Item = CubicBezier> + '_ {
        self.control_points.windows(4).step_by(3).map(|w| CubicBezier {
            p: [w[0], w[1], w[2], w[3]],
        })
    }

    pub fn arc_length(&self) -> f64 {
        self.segments().map(|s| s.arc_length()).sum()
    }

    /// True for zero-length stub paths.
    pub fn is_degenerate(&self) -> bool {
        self.arc_length() < 1e-9
    }

    /// The same centerline rigidly shifted; invariants are preserved.
    pub fn translated(&self, offset: Vec3) -> WaveguidePath {
        WaveguidePath {
            control_points: self.control_points.iter().map(|&p| p + offset).collect(),
            diameter: self.diameter,
        }
    }
}

/// Sample a path into an ordered polyline whose consecutive arc-length
/// spacing never exceeds `pitch`. The first and last points equal the path's
/// endpoints exactly.
pub fn sample_path(path: &WaveguidePath, pitch: f64) -> Result<Vec<Point3>> {
    if !(pitch > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sample pitch must be positive, got {pitch}"
        )));
    }
    if path.arc_length() <= pitch {
        return Ok(vec![path.start(), path.end()]);
    }
    let mut out = Vec::with_capacity((path.arc_length() / pitch) as usize + 2);
    out.push(path.start());
    for seg in path.segments() {
        seg.sample_into(pitch, &mut out, 0);
    }
    Ok(out)
}

/// Build a curve from `p0` to `p1` leaving along `t0`, arriving along `t1`,
/// with its geometric midpoint displaced by `mid_offset` from the chord
/// midpoint.
///
/// With a zero offset this is a single cubic whose end tangents match `t0`
/// and `t1` exactly. A nonzero offset yields two cubics joined C1 at the
/// displaced midpoint, keeping the end tangents exact; this is the routing
/// primitive behind chirality bows.
pub fn make_curve(
    p0: Point3,
    p1: Point3,
    t0: Vec3,
    t1: Vec3,
    mid_offset: Vec3,
    diameter: f64,
) -> Result<WaveguidePath> {
    let chord = p1 - p0;
    if chord.norm() < 1e-12 {
        return Err(Error::Degenerate("curve endpoints coincide".into()));
    }
    let t0 = t0
        .normalize()
        .ok_or_else(|| Error::InvalidParameter("t0 is not a direction".into()))?;
    let t1 = t1
        .normalize()
        .ok_or_else(|| Error::InvalidParameter("t1 is not a direction".into()))?;

    if mid_offset.norm() < 1e-12 {
        let a = chord.norm() / 3.0;
        return WaveguidePath::new(vec![p0, p0 + t0 * a, p1 - t1 * a, p1], diameter);
    }

    let mid = p0.midpoint(p1) + mid_offset;
    let t_mid = chord.normalize().unwrap();
    let a1 = (mid - p0).norm() / 3.0;
    let a2 = (p1 - mid).norm() / 3.0;
    WaveguidePath::new(
        vec![
            p0,
            p0 + t0 * a1,
            mid - t_mid * a1,
            mid,
            mid + t_mid * a2,
            p1 - t1 * a2,
            p1,
        ],
        diameter,
    )
}

/// Build a single-cubic bend from `p0` to `p1` whose midpoint is displaced
/// laterally by `bow` in the direction chord x z-axis. Positive and negative
/// bows are exact mirror images through the plane spanned by the chord and
/// the z-axis.
///
/// The end tangents equal `t0`/`t1` exactly when `bow` is zero; a nonzero bow
/// tilts them toward the displaced midpoint. Routing that needs exact end
/// tangents together with a bow uses [`make_curve`].
pub fn make_bend(
    p0: Point3,
    p1: Point3,
    t0: Vec3,
    t1: Vec3,
    bow: f64,
    diameter: f64,
) -> Result<WaveguidePath> {
    let chord = p1 - p0;
    if chord.norm() < 1e-12 {
        return Err(Error::Degenerate("bend endpoints coincide".into()));
    }
    let t0 = t0
        .normalize()
        .ok_or_else(|| Error::InvalidParameter("t0 is not a direction".into()))?;
    let t1 = t1
        .normalize()
        .ok_or_else(|| Error::InvalidParameter("t1 is not a direction".into()))?;

    let a = chord.norm() / 3.0;
    if bow == 0.0 {
        return WaveguidePath::new(vec![p0, p0 + t0 * a, p1 - t1 * a, p1], diameter);
    }

    let lateral = chord.normalize().unwrap().cross(Vec3::Z);
    let u = lateral.normalize().ok_or_else(|| {
        Error::Degenerate("bow direction undefined for a vertical chord".into())
    })?;
    // Displacing both inner control points by 4/3 of the target moves the
    // curve midpoint by exactly `bow` along u when t0 = t1.
    let delta = u * (bow * 4.0 / 3.0);
    WaveguidePath::new(
        vec![p0, p0 + t0 * a + delta, p1 - t1 * a + delta, p1],
        diameter,
    )
}

/// Chain vertically-tangent cubic drops through a descending sequence of
/// points.
///
/// Each piece's vertical handles are a third of its height, which makes z
/// linear in the curve parameter and the horizontal trace exactly the
/// straight segment between the two points (smoothstep progress). Curves
/// built this way share one transit timetable: at any depth, every such curve
/// has covered the same fraction of its current leg, which is what makes the
/// clearance of a whole ensemble analyzable.
pub fn make_drop_chain(points: &[Point3], diameter: f64) -> Result<WaveguidePath> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter(
            "a drop chain needs at least two points".into(),
        ));
    }
    let mut cps = Vec::with_capacity(3 * points.len() - 2);
    cps.push(points[0]);
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = a.z - b.z;
        if !(h > 1e-9) {
            return Err(Error::InvalidParameter(
                "drop chain points must strictly descend in z".into(),
            ));
        }
        cps.push(a + Vec3::new(0.0, 0.0, -h / 3.0));
        cps.push(b + Vec3::new(0.0, 0.0, h / 3.0));
        cps.push(b);
    }
    WaveguidePath::new(cps, diameter)
}

// ---------------------------------------------------------------------------
// Polyline distance queries
// ---------------------------------------------------------------------------

/// Minimum distance between two 3D segments (Ericson's clamped closest-point
/// scheme). Handles degenerate point segments.
pub fn segment_segment_distance(p1: Point3, q1: Point3, p2: Point3, q2: Point3) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(r);

    let (s, t);
    if a <= 1e-30 && e <= 1e-30 {
        return p1.distance(p2);
    }
    if a <= 1e-30 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(r);
        if e <= 1e-30 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(d2);
            let denom = a * e - b * b;
            let mut s_ = if denom > 1e-30 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let t_ = (b * s_ + f) / e;
            let t_clamped = t_.clamp(0.0, 1.0);
            if t_ != t_clamped {
                s_ = ((t_clamped * b - c) / a).clamp(0.0, 1.0);
            }
            s = s_;
            t = t_clamped;
        }
    }
    let c1 = p1 + d1 * s;
    let c2 = p2 + d2 * t;
    c1.distance(c2)
}

/// Closest points between two segments; returns (distance, point on a, point on b).
pub fn segment_segment_closest(
    p1: Point3,
    q1: Point3,
    p2: Point3,
    q2: Point3,
) -> (f64, Point3, Point3) {
    // Re-derive the parameters; kept separate from the distance-only fast path.
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(r);

    let (s, t);
    if a <= 1e-30 && e <= 1e-30 {
        return (p1.distance(p2), p1, p2);
    }
    if a <= 1e-30 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(r);
        if e <= 1e-30 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(d2);
            let denom = a * e - b * b;
            let mut s_ = if denom > 1e-30 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let t_ = (b * s_ + f) / e;
            let t_clamped = t_.clamp(0.0, 1.0);
            if t_ != t_clamped {
                s_ = ((t_clamped * b - c) / a).clamp(0.0, 1.0);
            }
            s = s_;
            t = t_clamped;
        }
    }
    let c1 = p1 + d1 * s;
    let c2 = p2 + d2 * t;
    (c1.distance(c2), c1, c2)
}

/// Minimum segment-to-segment distance between two polylines.
pub fn polyline_min_distance(a: &[Point3], b: &[Point3]) -> f64 {
    let seg = |pts: &[Point3]| -> Vec<(Point3, Point3)> {
        if pts.len() < 2 {
            pts.iter().map(|&p| (p, p)).collect()
        } else {
            pts.windows(2).map(|w| (w[0], w[1])).collect()
        }
    };
    let sa = seg(a);
    let sb = seg(b);
    let mut best = f64::INFINITY;
    for &(p1, q1) in &sa {
        for &(p2, q2) in &sb {
            let d = segment_segment_distance(p1, q1, p2, q2);
            if d < best {
                best = d;
            }
        }
    }
    best
}

/// Minimum center-to-center distance between two sampled waveguide
/// centerlines. Symmetric in its arguments.
pub fn min_pair_distance(a: &WaveguidePath, b: &WaveguidePath, pitch: f64) -> Result<f64> {
    let pa = sample_path(a, pitch)?;
    let pb = sample_path(b, pitch)?;
    Ok(polyline_min_distance(&pa, &pb))
}

// ---------------------------------------------------------------------------
// Discrete curvature
// ---------------------------------------------------------------------------

/// Radius of the circle through three points; infinite for collinear input.
pub fn circumradius(a: Point3, b: Point3, c: Point3) -> f64 {
    let ab = b - a;
    let bc = c - b;
    let ac = c - a;
    let cross = ab.cross(bc).norm();
    let la = ab.norm();
    let lb = bc.norm();
    let lc = ac.norm();
    if cross < 1e-12 * la * lb {
        return f64::INFINITY;
    }
    la * lb * lc / (2.0 * cross)
}

/// Minimum osculating-circle radius along a sampled polyline (3-point
/// estimate). Returns infinity for straight or too-short polylines.
pub fn min_curvature_radius(samples: &[Point3]) -> f64 {
    let mut min_r = f64::INFINITY;
    for w in samples.windows(3) {
        let r = circumradius(w[0], w[1], w[2]);
        if r < min_r {
            min_r = r;
        }
    }
    min_r
}

/// Reflect a point through the plane with unit normal `n` containing `origin`.
pub fn reflect_point(p: Point3, origin: Point3, n: Vec3) -> Point3 {
    let d = (p - origin).dot(n);
    p - n * (2.0 * d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quarter_arc_bezier(radius: f64) -> WaveguidePath {
        // Classic circular-arc approximation in the (x, z) plane.
        let k = 0.5522847498307936 * radius;
        WaveguidePath::new(
            vec![
                Point3::new(radius, 0.0, 0.0),
                Point3::new(radius, 0.0, k),
                Point3::new(k, 0.0, radius),
                Point3::new(0.0, 0.0, radius),
            ],
            DEFAULT_DIAMETER,
        )
        .unwrap()
    }

    #[test]
    fn straight_path_samples_include_endpoints() {
        let p = WaveguidePath::straight(Point3::ORIGIN, Point3::new(0.0, 0.0, 10.0), 1.2).unwrap();
        let pts = sample_path(&p, 5.0).unwrap();
        assert_eq!(pts.first().copied(), Some(Point3::ORIGIN));
        assert_eq!(pts.last().copied(), Some(Point3::new(0.0, 0.0, 10.0)));
        for w in pts.windows(2) {
            assert!(w[0].distance(w[1]) <= 5.0 + 1e-12);
        }
        // length 10 at pitch 5 resolves to start, midpoint, end
        assert_eq!(pts.len(), 3);
    }

    #[test]
    fn oversized_pitch_returns_endpoints_only() {
        let p = quarter_arc_bezier(10.0);
        let pts = sample_path(&p, 1e4).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0], p.start());
        assert_eq!(pts[1], p.end());
    }

    #[test]
    fn nonpositive_pitch_is_rejected() {
        let p = WaveguidePath::straight(Point3::ORIGIN, Point3::new(0.0, 0.0, 10.0), 1.2).unwrap();
        assert!(sample_path(&p, 0.0).is_err());
        assert!(sample_path(&p, -1.0).is_err());
    }

    #[test]
    fn quarter_bend_polyline_length_matches_analytic_arc() {
        // pi/2 * 10 = 15.707963...
        let p = quarter_arc_bezier(10.0);
        let pts = sample_path(&p, 0.1).unwrap();
        let len: f64 = pts.windows(2).map(|w| w[0].distance(w[1])).sum();
        let expected = std::f64::consts::FRAC_PI_2 * 10.0;
        assert!(
            (len - expected).abs() / expected < 1e-3,
            "polyline length {len} vs analytic {expected}"
        );
    }

    #[test]
    fn sample_spacing_never_exceeds_pitch() {
        // Strongly curved two-piece path.
        let p = make_curve(
            Point3::ORIGIN,
            Point3::new(20.0, 0.0, -60.0),
            Vec3::DOWN,
            Vec3::DOWN,
            Vec3::new(0.0, -8.0, 0.0),
            1.2,
        )
        .unwrap();
        for pitch in [0.1, 0.37, 2.0] {
            let pts = sample_path(&p, pitch).unwrap();
            for w in pts.windows(2) {
                assert!(w[0].distance(w[1]) <= pitch + 1e-12);
            }
        }
    }

    #[test]
    fn zero_bow_is_straight() {
        let p = make_bend(
            Point3::ORIGIN,
            Point3::new(0.0, 0.0, -20.0),
            Vec3::DOWN,
            Vec3::DOWN,
            0.0,
            1.2,
        )
        .unwrap();
        for pt in sample_path(&p, 0.25).unwrap() {
            assert!(pt.x.abs() < 1e-12 && pt.y.abs() < 1e-12);
        }
    }

    #[test]
    fn bend_midpoint_offset_matches_bow() {
        // Measured against the chord on a densely sampled polyline.
        let p0 = Point3::ORIGIN;
        let p1 = Point3::new(20.0, 0.0, -60.0);
        let p = make_bend(p0, p1, Vec3::DOWN, Vec3::DOWN, 5.0, 1.2).unwrap();
        let pts = sample_path(&p, 0.05).unwrap();
        let total: f64 = pts.windows(2).map(|w| w[0].distance(w[1])).sum();
        let mut acc = 0.0;
        let mut mid = pts[0];
        for w in pts.windows(2) {
            acc += w[0].distance(w[1]);
            if acc >= total / 2.0 {
                mid = w[1];
                break;
            }
        }
        // distance from the half-arc point to the chord line
        let dir = (p1 - p0).normalize().unwrap();
        let v = mid - p0;
        let offset = (v - dir * v.dot(dir)).norm();
        assert!((offset - 5.0).abs() < 0.1, "offset {offset}");
    }

    #[test]
    fn bend_mirror_symmetry() {
        let p0 = Point3::new(1.0, 2.0, 0.0);
        let p1 = Point3::new(21.0, 7.0, -60.0);
        let plus = make_bend(p0, p1, Vec3::DOWN, Vec3::DOWN, 5.0, 1.2).unwrap();
        let minus = make_bend(p0, p1, Vec3::DOWN, Vec3::DOWN, -5.0, 1.2).unwrap();
        // Mirror plane contains the chord and the z-axis.
        let n = (p1 - p0).cross(Vec3::Z).normalize().unwrap();
        for (a, b) in plus.control_points().iter().zip(minus.control_points()) {
            let r = reflect_point(*a, p0, n);
            assert!(r.distance(*b) < 1e-9, "mirror mismatch {r:?} vs {b:?}");
        }
    }

    #[test]
    fn bend_rejects_coincident_endpoints() {
        let e = make_bend(Point3::ORIGIN, Point3::ORIGIN, Vec3::DOWN, Vec3::DOWN, 1.0, 1.2);
        assert!(matches!(e, Err(Error::Degenerate(_))));
    }

    #[test]
    fn curve_end_tangents_are_exact() {
        let p = make_curve(
            Point3::ORIGIN,
            Point3::new(20.0, 20.0, -80.0),
            Vec3::DOWN,
            Vec3::DOWN,
            Vec3::new(3.0, -3.0, -12.0),
            1.2,
        )
        .unwrap();
        let first = p.segments().next().unwrap();
        let last = p.segments().last().unwrap();
        assert!(first.derivative(0.0).angle_to(Vec3::DOWN) < 1e-9);
        assert!(last.derivative(1.0).angle_to(Vec3::DOWN) < 1e-9);
    }

    #[test]
    fn parallel_lines_distance() {
        let a = WaveguidePath::straight(Point3::ORIGIN, Point3::new(0.0, 0.0, -50.0), 1.2).unwrap();
        let b = WaveguidePath::straight(
            Point3::new(20.0, 0.0, 0.0),
            Point3::new(20.0, 0.0, -50.0),
            1.2,
        )
        .unwrap();
        let d = min_pair_distance(&a, &b, 0.25).unwrap();
        assert!((d - 20.0).abs() < 1e-9);
    }

    #[test]
    fn path_against_itself_is_zero() {
        let a = quarter_arc_bezier(10.0);
        let d = min_pair_distance(&a, &a, 0.25).unwrap();
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn skew_lines_distance_matches_closed_form() {
        let a = WaveguidePath::straight(Point3::ORIGIN, Point3::new(10.0, 0.0, 0.0), 1.2).unwrap();
        let b = WaveguidePath::straight(
            Point3::new(0.0, 5.0, -3.0),
            Point3::new(10.0, 5.0, 3.0),
            1.2,
        )
        .unwrap();
        // |(p2-p1) . (d1 x d2)| / |d1 x d2| = 15/3 = 5
        let d = min_pair_distance(&a, &b, 0.25).unwrap();
        assert!((d - 5.0).abs() < 1e-6, "skew distance {d}");
    }

    #[test]
    fn circle_curvature_radius() {
        let p = quarter_arc_bezier(10.0);
        let pts = sample_path(&p, 0.25).unwrap();
        let r = min_curvature_radius(&pts);
        assert!((r - 10.0).abs() / 10.0 < 0.02, "radius {r}");
    }

    #[test]
    fn straight_line_curvature_is_infinite() {
        let p = WaveguidePath::straight(Point3::ORIGIN, Point3::new(0.0, 0.0, -60.0), 1.2).unwrap();
        let pts = sample_path(&p, 0.25).unwrap();
        assert!(min_curvature_radius(&pts).is_infinite());
    }

    #[test]
    fn path_invariants_rejected() {
        assert!(WaveguidePath::new(vec![Point3::ORIGIN; 3], 1.2).is_err());
        assert!(WaveguidePath::new(vec![Point3::ORIGIN; 5], 1.2).is_err());
        assert!(WaveguidePath::new(vec![Point3::ORIGIN; 4], 0.0).is_err());
        // kinked joint: 90 degree turn between spans
        let kinked = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
            Point3::new(3.0, 0.0, 0.0),
            Point3::new(3.0, 1.0, 0.0),
            Point3::new(3.0, 2.0, 0.0),
            Point3::new(3.0, 3.0, 0.0),
        ];
        assert!(WaveguidePath::new(kinked, 1.2).is_err());
    }

    #[test]
    fn degenerate_stub_is_allowed() {
        let stub = WaveguidePath::straight(Point3::ORIGIN, Point3::ORIGIN, 1.2).unwrap();
        assert!(stub.is_degenerate());
        assert_eq!(sample_path(&stub, 0.25).unwrap().len(), 2);
    }
}
