//! Haar convolution filter circuits: nine 3x3 Boolean kernels wired as a
//! 9-input/9-output unit, an exhaustive output-port assignment optimizer, and
//! stride-3 tiling into full convolution arrays.
//!
//! Each filter reads the inputs where its kernel weight is 1 and wires them
//! directly to the filter's dedicated output port. Kernel indices are
//! (row, col); a port at grid (i, j) sits at x = col * pitch, y = row * pitch
//! relative to the unit's low corner, inputs on the top plane and outputs on
//! the bottom plane.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, ElementRef, Port, PortId, PortRole, Segment, SegmentId};
use crate::error::{Error, Result};
use crate::fractal::{profiled_curve, Chirality};
use crate::geom::{Point3, Vec3, WaveguidePath, DEFAULT_DIAMETER};
use crate::validate::{check_clearance, DEFAULT_CLEARANCE};

/// Transit waypoints for filter wires, in units of each wire's horizontal
/// travel (see the coupler generator's transit profile for the discipline).
/// Annealed against the travel differences a 3x3-to-3x3 wiring can produce,
/// so wire pairs clear the 20 um port lattice.
const WIRE_PROFILE: &[(f64, f64)] = &[
    (0.123943, 0.060874),
    (0.237564, -0.108470),
    (0.350511, -0.162089),
    (0.752357, 0.095241),
    (0.856851, 0.046249),
    (0.983328, -0.075812),
];

/// A 3x3 Boolean convolution kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[[u8; 3]; 3]", into = "[[u8; 3]; 3]")]
pub struct HaarKernel {
    weights: [[bool; 3]; 3],
}

impl HaarKernel {
    pub fn new(weights: [[bool; 3]; 3]) -> Result<Self> {
        if !weights.iter().flatten().any(|&w| w) {
            return Err(Error::InvalidParameter(
                "kernel needs at least one weight of 1".into(),
            ));
        }
        Ok(Self { weights })
    }

    pub fn from_rows(rows: [[u8; 3]; 3]) -> Result<Self> {
        let mut weights = [[false; 3]; 3];
        for (r, row) in rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => weights[r][c] = true,
                    _ => {
                        return Err(Error::InvalidParameter(format!(
                            "kernel weights are Boolean, got {v}"
                        )))
                    }
                }
            }
        }
        Self::new(weights)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.weights[row][col]
    }

    pub fn ones(&self) -> u32 {
        self.weights.iter().flatten().filter(|&&w| w).count() as u32
    }

    /// (row, col) positions of the 1-weights, row-major.
    pub fn on_pixels(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for r in 0..3 {
            for c in 0..3 {
                if self.weights[r][c] {
                    out.push((r, c));
                }
            }
        }
        out
    }
}

impl TryFrom<[[u8; 3]; 3]> for HaarKernel {
    type Error = Error;
    fn try_from(rows: [[u8; 3]; 3]) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<HaarKernel> for [[u8; 3]; 3] {
    fn from(k: HaarKernel) -> Self {
        let mut out = [[0u8; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                out[r][c] = k.weights[r][c] as u8;
            }
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct KernelSetRepr {
    kernels: Vec<HaarKernel>,
    assignment: Vec<usize>,
}

/// Nine kernels plus the permutation assigning each filter to an output-port
/// grid position (0..9, row-major over the 3x3 output grid).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSetRepr", into = "KernelSetRepr")]
pub struct KernelSet {
    kernels: Vec<HaarKernel>,
    assignment: Vec<usize>,
}

impl TryFrom<KernelSetRepr> for KernelSet {
    type Error = Error;
    fn try_from(r: KernelSetRepr) -> Result<Self> {
        Self::new(r.kernels, r.assignment)
    }
}

impl From<KernelSet> for KernelSetRepr {
    fn from(k: KernelSet) -> Self {
        Self { kernels: k.kernels, assignment: k.assignment }
    }
}

impl KernelSet {
    pub fn new(kernels: Vec<HaarKernel>, assignment: Vec<usize>) -> Result<Self> {
        if kernels.len() != 9 {
            return Err(Error::InvalidParameter(format!(
                "a kernel set holds exactly 9 kernels, got {}",
                kernels.len()
            )));
        }
        if assignment.len() != 9 {
            return Err(Error::InvalidParameter(
                "assignment must cover all 9 filters".into(),
            ));
        }
        let mut seen = [false; 9];
        for &g in &assignment {
            if g >= 9 || seen[g] {
                return Err(Error::InvalidParameter(
                    "assignment must be a permutation of 0..9".into(),
                ));
            }
            seen[g] = true;
        }
        Ok(Self { kernels, assignment })
    }

    /// The shipped default decomposition, 37 connections total:
    /// full window (9), left column pair (6), top row pair (6), single
    /// columns left/right/center (3 each), single rows top/bottom (3 each),
    /// and the center pixel (1).
    pub fn default_set() -> Self {
        let k = |rows: [[u8; 3]; 3]| HaarKernel::from_rows(rows).unwrap();
        let kernels = vec![
            k([[1, 1, 1], [1, 1, 1], [1, 1, 1]]), // F1 all ones
            k([[1, 1, 0], [1, 1, 0], [1, 1, 0]]), // F2 left two columns
            k([[1, 1, 1], [1, 1, 1], [0, 0, 0]]), // F3 top two rows
            k([[1, 0, 0], [1, 0, 0], [1, 0, 0]]), // F4 left column
            k([[0, 0, 1], [0, 0, 1], [0, 0, 1]]), // F5 right column
            k([[1, 1, 1], [0, 0, 0], [0, 0, 0]]), // F6 top row
            k([[0, 0, 0], [0, 0, 0], [1, 1, 1]]), // F7 bottom row
            k([[0, 1, 0], [0, 1, 0], [0, 1, 0]]), // F8 center column
            k([[0, 0, 0], [0, 1, 0], [0, 0, 0]]), // F9 center pixel
        ];
        Self::new(kernels, (0..9).collect()).unwrap()
    }

    pub fn kernels(&self) -> &[HaarKernel] {
        &self.kernels
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn with_assignment(&self, assignment: Vec<usize>) -> Result<Self> {
        Self::new(self.kernels.clone(), assignment)
    }

    /// Output grid position (row, col) of filter `f`.
    pub fn output_grid(&self, f: usize) -> (usize, usize) {
        let g = self.assignment[f];
        (g / 3, g % 3)
    }

    /// Filter index assigned to output grid position (row, col).
    pub fn filter_at_grid(&self, row: usize, col: usize) -> Option<usize> {
        let g = row * 3 + col;
        self.assignment.iter().position(|&a| a == g)
    }
}

impl Default for KernelSet {
    fn default() -> Self {
        Self::default_set()
    }
}

/// Total number of weight-1 connections across the nine kernels.
pub fn connection_count(ks: &KernelSet) -> u32 {
    ks.kernels.iter().map(|k| k.ones()).sum()
}

/// Number of distinct filter-to-port assignments, n!.
pub fn assignment_space_size(n_filters: u32) -> Result<u64> {
    if n_filters < 1 {
        return Err(Error::InvalidParameter("need at least one filter".into()));
    }
    let mut acc: u64 = 1;
    for k in 2..=n_filters as u64 {
        acc = acc
            .checked_mul(k)
            .ok_or_else(|| Error::Overflow(format!("{n_filters}! exceeds u64")))?;
    }
    Ok(acc)
}

/// Classic in-place lexicographic successor; false once exhausted.
fn next_permutation(perm: &mut [usize]) -> bool {
    if perm.len() < 2 {
        return false;
    }
    let mut i = perm.len() - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = perm.len() - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Exhaustively minimize sum of cost[f][perm[f]] over all permutations.
/// Enumeration is lexicographic and ties keep the first hit, so the result
/// is the lexicographically smallest optimal permutation.
pub fn optimize_assignment(cost: &[Vec<f64>]) -> Result<(Vec<usize>, f64)> {
    let n = cost.len();
    if n == 0 || cost.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidParameter("cost matrix must be square".into()));
    }
    if n > 10 {
        return Err(Error::InvalidParameter(format!(
            "exhaustive search over {n}! assignments is not practical"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best_perm = perm.clone();
    let mut best_cost = f64::INFINITY;
    loop {
        let total: f64 = perm.iter().enumerate().map(|(f, &g)| cost[f][g]).sum();
        if total < best_cost {
            best_cost = total;
            best_perm.copy_from_slice(&perm);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok((best_perm, best_cost))
}

/// Geometry of a single filter unit.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct UnitGeometry {
    /// Port grid pitch D0 in micrometers.
    pub pitch: f64,
    /// Vertical distance between the input and output planes.
    pub height: f64,
    pub diameter: f64,
}

impl Default for UnitGeometry {
    fn default() -> Self {
        Self { pitch: 20.0, height: 80.0, diameter: DEFAULT_DIAMETER }
    }
}

impl UnitGeometry {
    fn validate(&self) -> Result<()> {
        if !(self.pitch > 0.0) || !(self.height > 0.0) || !(self.diameter > 0.0) {
            return Err(Error::InvalidParameter(
                "unit pitch, height, and diameter must be positive".into(),
            ));
        }
        Ok(())
    }

    fn input_pos(&self, row: usize, col: usize) -> Point3 {
        Point3::new(col as f64 * self.pitch, row as f64 * self.pitch, self.height)
    }

    fn output_pos(&self, row: usize, col: usize) -> Point3 {
        Point3::new(col as f64 * self.pitch, row as f64 * self.pitch, 0.0)
    }
}

/// Per-connection straight-chord lengths: cost[f][g] is the total wire length
/// of filter f if its output port sits at grid position g.
pub fn assignment_cost_matrix(ks: &KernelSet, geom: &UnitGeometry) -> Vec<Vec<f64>> {
    (0..9)
        .map(|f| {
            (0..9)
                .map(|g| {
                    let out = geom.output_pos(g / 3, g % 3);
                    ks.kernels[f]
                        .on_pixels()
                        .iter()
                        .map(|&(r, c)| geom.input_pos(r, c).distance(out))
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// Exhaustive search over all 9! filter-to-port assignments, minimizing the
/// summed straight-chord wire length. Deterministic; ties resolve to the
/// lexicographically smallest permutation.
pub fn optimize_port_assignment(ks: &KernelSet, geom: &UnitGeometry) -> Result<(Vec<usize>, f64)> {
    geom.validate()?;
    optimize_assignment(&assignment_cost_matrix(ks, geom))
}

/// A single 9-filter unit: a [`Circuit`] with the kernel set attached.
#[derive(Clone, Debug)]
pub struct FilterUnit {
    pub circuit: Circuit,
}

/// Build the filter unit wiring: one waveguide from input (p, q) to filter
/// f's output port wherever K_f(p, q) = 1. Curves bow laterally with a fixed
/// handedness to clear each other; the result is checked for clearance at
/// default parameters and generation fails on any collision.
pub fn generate_filter_unit(ks: &KernelSet, geom: &UnitGeometry) -> Result<FilterUnit> {
    geom.validate()?;
    let mut ports = Vec::with_capacity(18);
    for r in 0..3usize {
        for c in 0..3usize {
            ports.push(Port {
                id: PortId((r * 3 + c) as u32),
                role: PortRole::Input,
                grid_index: (r as i32, c as i32),
                position: geom.input_pos(r, c),
            });
        }
    }
    for r in 0..3usize {
        for c in 0..3usize {
            ports.push(Port {
                id: PortId((9 + r * 3 + c) as u32),
                role: PortRole::Output,
                grid_index: (r as i32, c as i32),
                position: geom.output_pos(r, c),
            });
        }
    }

    let mut segments = Vec::new();
    for (f, kernel) in ks.kernels.iter().enumerate() {
        let (or, oc) = ks.output_grid(f);
        let out_id = PortId((9 + or * 3 + oc) as u32);
        let out_pos = geom.output_pos(or, oc);
        for (r, c) in kernel.on_pixels() {
            let in_id = PortId((r * 3 + c) as u32);
            let in_pos = geom.input_pos(r, c);
            let path = wire_curve(in_pos, out_pos, geom.diameter)?;
            segments.push(Segment {
                id: SegmentId(segments.len() as u32),
                from: ElementRef::Port(in_id),
                to: ElementRef::Port(out_id),
                path,
            });
        }
    }

    let mut params = BTreeMap::new();
    params.insert("generator".into(), "haar".into());
    params.insert("d0".into(), format!("{}", geom.pitch));
    params.insert("height".into(), format!("{}", geom.height));
    params.insert("diameter".into(), format!("{}", geom.diameter));
    params.insert("connections".into(), connection_count(ks).to_string());
    let circuit = Circuit {
        name: "haar-unit".into(),
        params,
        ports,
        nodes: Vec::new(),
        segments,
        kernels: Some(ks.clone()),
    };

    let violations = check_clearance(&circuit, DEFAULT_CLEARANCE, crate::geom::DEFAULT_SAMPLE_PITCH)?;
    if let Some(v) = violations.first() {
        return Err(Error::Generation(format!(
            "filter wiring collides: segments {} and {} at {:.3} um",
            v.segments.0, v.segments.1, v.min_distance
        )));
    }
    Ok(FilterUnit { circuit })
}

fn wire_curve(from: Point3, to: Point3, diameter: f64) -> Result<WaveguidePath> {
    profiled_curve(from, to, WIRE_PROFILE, Chirality::Right, diameter)
}

/// Tile non-overlapping filter units over an image_side x image_side input
/// grid with stride 3. Unit (u, v) reads pixels (3u+p, 3v+q); its nine
/// outputs sit on the unit's own 3x3 output block.
pub fn tile_filter_array(ks: &KernelSet, image_side: u32, geom: &UnitGeometry) -> Result<Circuit> {
    if image_side == 0 || image_side % 3 != 0 {
        return Err(Error::InvalidParameter(format!(
            "image side must be a positive multiple of 3, got {image_side}"
        )));
    }
    let proto = generate_filter_unit(ks, geom)?.circuit;
    let n = (image_side / 3) as usize;

    let mut ports: Vec<Port> = Vec::with_capacity(n * n * 18);
    let mut segments: Vec<(ElementRef, ElementRef, WaveguidePath)> = Vec::new();
    // Maps (unit, proto port id) -> interim port index.
    let mut interim: PortIndexTable = PortIndexTable::new(n, proto.ports.len());

    for u in 0..n {
        for v in 0..n {
            let offset = Vec3::new(
                3.0 * v as f64 * geom.pitch,
                3.0 * u as f64 * geom.pitch,
                0.0,
            );
            for p in &proto.ports {
                let gi = p.grid_index.0 + 3 * u as i32;
                let gj = p.grid_index.1 + 3 * v as i32;
                interim.set(u, v, p.id, ports.len());
                ports.push(Port {
                    id: PortId(ports.len() as u32),
                    role: p.role,
                    grid_index: (gi, gj),
                    position: p.position + offset,
                });
            }
            for s in &proto.segments {
                let from = match s.from {
                    ElementRef::Port(pid) => interim.get(u, v, pid),
                    n @ ElementRef::Node(_) => {
                        let _ = n;
                        unreachable!("filter units have no nodes")
                    }
                };
                let to = match s.to {
                    ElementRef::Port(pid) => interim.get(u, v, pid),
                    _ => unreachable!("filter units have no nodes"),
                };
                segments.push((
                    ElementRef::Port(PortId(from as u32)),
                    ElementRef::Port(PortId(to as u32)),
                    s.path.translated(offset),
                ));
            }
        }
    }

    // Canonical ids: inputs then outputs, each sorted by grid index.
    let mut order: Vec<usize> = (0..ports.len()).collect();
    order.sort_by_key(|&i| {
        let p = &ports[i];
        (p.role == PortRole::Output, p.grid_index.0, p.grid_index.1)
    });
    let mut remap = vec![0u32; ports.len()];
    let mut final_ports = Vec::with_capacity(ports.len());
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new as u32;
        let mut p = ports[old].clone();
        p.id = PortId(new as u32);
        final_ports.push(p);
    }
    let mut segs: Vec<(ElementRef, ElementRef, WaveguidePath)> = segments
        .into_iter()
        .map(|(f, t, path)| {
            let f = match f {
                ElementRef::Port(pid) => ElementRef::Port(PortId(remap[pid.0 as usize])),
                other => other,
            };
            let t = match t {
                ElementRef::Port(pid) => ElementRef::Port(PortId(remap[pid.0 as usize])),
                other => other,
            };
            (f, t, path)
        })
        .collect();
    segs.sort_by_key(|(f, t, _)| (*f, *t));
    let final_segments = segs
        .into_iter()
        .enumerate()
        .map(|(i, (from, to, path))| Segment { id: SegmentId(i as u32), from, to, path })
        .collect();

    let mut params = BTreeMap::new();
    params.insert("generator".into(), "haar-array".into());
    params.insert("image_side".into(), image_side.to_string());
    params.insert("units_per_side".into(), n.to_string());
    params.insert("d0".into(), format!("{}", geom.pitch));
    params.insert("height".into(), format!("{}", geom.height));
    params.insert("diameter".into(), format!("{}", geom.diameter));
    Ok(Circuit {
        name: format!("haar-array-{image_side}x{image_side}"),
        params,
        ports: final_ports,
        nodes: Vec::new(),
        segments: final_segments,
        kernels: Some(ks.clone()),
    })
}

/// Flat (unit, port) -> interim index table used while stamping units.
struct PortIndexTable {
    per_unit: usize,
    n: usize,
    slots: Vec<usize>,
}

impl PortIndexTable {
    fn new(n: usize, per_unit: usize) -> Self {
        Self { per_unit, n, slots: vec![usize::MAX; n * n * per_unit] }
    }
    fn idx(&self, u: usize, v: usize, pid: PortId) -> usize {
        (u * self.n + v) * self.per_unit + pid.0 as usize
    }
    fn set(&mut self, u: usize, v: usize, pid: PortId, value: usize) {
        let i = self.idx(u, v, pid);
        self.slots[i] = value;
    }
    fn get(&self, u: usize, v: usize, pid: PortId) -> usize {
        self.slots[self.idx(u, v, pid)]
    }
}
