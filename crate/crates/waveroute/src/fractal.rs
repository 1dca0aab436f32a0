//! Fractal fan-out couplers: compile a [`FractalSpec`] into collision-free 3D
//! waveguide geometry.
//!
//! A coupler distributes one input to b^L outputs through L bifurcation
//! layers. The tree is self-similar: layer heights and child pitches both
//! scale by sqrt(b) from one layer to the next, so branch angles are the same
//! everywhere. Curves carry a consistent lateral bow (chirality) so that
//! crossing connections pass on opposite sides, and diagonal children dip in
//! z to clear the axis-aligned ones.
//!
//! Arrays place many couplers over a shared output grid. Output ports that
//! land on the same grid point are merged, and so are bifurcation nodes of
//! overlapping fan-outs; the merged node is fed by every parent that reaches
//! it, which is exactly what the fused geometry of tightly packed couplers
//! does.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::circuit::{
    quantize, BifurcationNode, Circuit, ElementRef, NodeId, Port, PortId, PortRole, Segment,
    SegmentId,
};
use crate::error::{Error, Result};
use crate::geom::{make_drop_chain, Point3, WaveguidePath, DEFAULT_DIAMETER};

/// Handedness of the lateral curve bows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chirality {
    Left,
    Right,
}

/// Route one branch through a transit profile. Exposed for the filter
/// generator, which wires ports with the same discipline but its own
/// waypoint table.
///
/// Waypoint depths are allotted in proportion to the lateral run of each leg
/// (with a floor), which equalizes the slopes along the curve.
pub(crate) fn profiled_curve(
    from: Point3,
    to: Point3,
    profile: &[(f64, f64)],
    chirality: Chirality,
    diameter: f64,
) -> Result<WaveguidePath> {
    let travel = (to - from).horizontal();
    if travel.norm() < 1e-9 {
        return WaveguidePath::straight(from, to, diameter);
    }
    let height = from.z - to.z;
    let mut ms: Vec<(f64, f64)> = Vec::with_capacity(profile.len() + 2);
    ms.push((0.0, 0.0));
    for &(re, im) in profile {
        match chirality {
            Chirality::Right => ms.push((re, im)),
            Chirality::Left => ms.push((re, -im)),
        }
    }
    ms.push((1.0, 0.0));

    // Depth in proportion to sqrt(leg length): endpoint curvature of a drop
    // goes as run/height^2, so this keeps the bend radius uniform over legs.
    let leg = |a: (f64, f64), b: (f64, f64)| -> f64 {
        ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt().max(0.02).sqrt()
    };
    let total: f64 = ms.windows(2).map(|w| leg(w[0], w[1])).sum();

    let mut points = Vec::with_capacity(ms.len());
    points.push(from);
    let mut depth = 0.0;
    for w in ms.windows(2).take(ms.len() - 2) {
        depth += leg(w[0], w[1]) / total;
        let (re, im) = w[1];
        // complex product m * travel in the horizontal plane
        let x = re * travel.x - im * travel.y;
        let y = re * travel.y + im * travel.x;
        points.push(Point3::new(from.x + x, from.y + y, from.z - depth * height));
    }
    points.push(to);
    make_drop_chain(&points, diameter)
}

fn transit_curve(
    from: Point3,
    to: Point3,
    chirality: Chirality,
    diameter: f64,
) -> Result<WaveguidePath> {
    profiled_curve(from, to, TRANSIT_PROFILE, chirality, diameter)
}

/// Parameters of a fan-out coupler family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractalSpec {
    /// Branching ratio b; children sit on a sqrt(b) x sqrt(b) subgrid, so b
    /// must be a perfect square >= 4.
    pub branching: u32,
    /// Number of bifurcation layers L (>= 1).
    pub layers: u32,
    /// Output grid pitch D0 in micrometers.
    pub output_pitch: f64,
    /// Height factor k: the last layer's height is k * D0.
    pub height_factor: f64,
    pub chirality: Chirality,
    /// Waveguide diameter in micrometers.
    pub diameter: f64,
}

impl Default for FractalSpec {
    /// The standard 1x9 coupler: b = 9, one layer, 20 um pitch, k = 4.
    fn default() -> Self {
        Self {
            branching: 9,
            layers: 1,
            output_pitch: 20.0,
            height_factor: 4.0,
            chirality: Chirality::Right,
            diameter: DEFAULT_DIAMETER,
        }
    }
}

/// The shared transit profile of every branch curve, as complex (re, im)
/// waypoints in units of the branch's own horizontal travel.
///
/// A branch with travel vector t passes through the horizontal points
/// m_k * t (complex product) on its way down, connected by vertically-tangent
/// drops whose depth is linear in the curve parameter. Because the profile is
/// one fixed shape scaled by each branch's own travel, the relative
/// trajectory of any two branches is that same shape scaled by their travel
/// difference, and the waypoints below were annealed so that every such
/// trajectory clears the 20 um port lattice for all travel differences a
/// b = 9 coupler array at grid-multiple input pitches can produce. This
/// realizes the chirality idea: the imaginary part is a consistent-handed
/// lateral excursion whose sign flips between left and right chirality.
const TRANSIT_PROFILE: &[(f64, f64)] = &[
    (0.063049, 0.105411),
    (0.683041, 0.105403),
    (0.889196, 0.105446),
    (1.067090, 0.105201),
];

impl FractalSpec {
    pub fn validate(&self) -> Result<()> {
        let s = (self.branching as f64).sqrt().round() as u32;
        if self.branching < 4 || s * s != self.branching {
            return Err(Error::InvalidParameter(format!(
                "branching ratio must be a perfect square >= 4, got {}",
                self.branching
            )));
        }
        if self.layers < 1 {
            return Err(Error::InvalidParameter("layer count must be >= 1".into()));
        }
        if !(self.output_pitch > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "output pitch must be positive, got {}",
                self.output_pitch
            )));
        }
        if !(self.height_factor > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "height factor must be positive, got {}",
                self.height_factor
            )));
        }
        if !(self.diameter > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "diameter must be positive, got {}",
                self.diameter
            )));
        }
        Ok(())
    }

    /// sqrt(b): the side of the child subgrid.
    pub fn side(&self) -> u32 {
        (self.branching as f64).sqrt().round() as u32
    }

    /// Number of output ports of a single coupler, b^L.
    pub fn output_count(&self) -> u64 {
        (self.branching as u64).pow(self.layers)
    }

    /// Side of the output grid, sqrt(b)^L.
    pub fn output_side(&self) -> u64 {
        (self.side() as u64).pow(self.layers)
    }

    fn params(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("generator".into(), "fractal".into());
        m.insert("b".into(), self.branching.to_string());
        m.insert("layers".into(), self.layers.to_string());
        m.insert("d0".into(), format!("{}", self.output_pitch));
        m.insert("height_factor".into(), format!("{}", self.height_factor));
        m.insert(
            "chirality".into(),
            match self.chirality {
                Chirality::Left => "left".into(),
                Chirality::Right => "right".into(),
            },
        );
        m.insert("diameter".into(), format!("{}", self.diameter));
        m
    }
}

/// Per-layer heights and child pitches, layer 1 (top) first.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerDims {
    dims: Vec<LayerDim>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerDim {
    /// H_l: vertical extent of the layer in micrometers.
    pub height: f64,
    /// D_l: pitch of the child subgrid created in this layer.
    pub pitch: f64,
}

impl LayerDims {
    /// 1-based access, layer 1 at the input side.
    pub fn layer(&self, l: u32) -> &LayerDim {
        &self.dims[(l - 1) as usize]
    }

    pub fn len(&self) -> u32 {
        self.dims.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &LayerDim> {
        self.dims.iter()
    }

    pub fn total_height(&self) -> f64 {
        self.dims.iter().map(|d| d.height).sum()
    }

    /// Height of layers l..=L, i.e. the z of layer l's bifurcation plane
    /// above the output plane.
    pub fn height_from(&self, l: u32) -> f64 {
        self.dims[(l - 1) as usize..].iter().map(|d| d.height).sum()
    }
}

/// The recursive layer dimensions: D_L = D0, H_L = k * D0, and every layer
/// above scales both by sqrt(b).
pub fn layer_dimensions(spec: &FractalSpec) -> Result<LayerDims> {
    spec.validate()?;
    let s = spec.side() as f64;
    let mut dims = vec![
        LayerDim {
            height: spec.height_factor * spec.output_pitch,
            pitch: spec.output_pitch,
        };
        spec.layers as usize
    ];
    for l in (0..spec.layers as usize - 1).rev() {
        dims[l] = LayerDim {
            height: s * dims[l + 1].height,
            pitch: s * dims[l + 1].pitch,
        };
    }
    Ok(LayerDims { dims })
}

/// Branch angles against the vertical parent axis, identical for every layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchAngles {
    /// Angle of the farthest axis-aligned child, degrees.
    pub axial_deg: f64,
    /// Angle of the farthest diagonal child, degrees.
    pub diagonal_deg: f64,
}

pub fn branch_angle(spec: &FractalSpec) -> Result<BranchAngles> {
    spec.validate()?;
    // D_l / H_l is layer independent; use the bottom layer.
    let half_span = (spec.side() - 1) as f64 / 2.0;
    let ratio = half_span * spec.output_pitch / (spec.height_factor * spec.output_pitch);
    Ok(BranchAngles {
        axial_deg: ratio.atan().to_degrees(),
        diagonal_deg: (std::f64::consts::SQRT_2 * ratio).atan().to_degrees(),
    })
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

struct Builder {
    spec: FractalSpec,
    dims: LayerDims,
    output_z: f64,
    /// Output-plane grid origin (position of grid index 0).
    origin: (f64, f64),
    input_ports: Vec<(i32, i32, Point3)>,
    output_ports: HashMap<(i32, i32), usize>,
    output_list: Vec<(i32, i32, Point3)>,
    nodes: Vec<(u32, Point3)>,
    node_key: HashMap<(u32, (i64, i64, i64)), usize>,
    segments: Vec<(BuildRef, BuildRef, WaveguidePath)>,
    seg_key: HashSet<(BuildRef, BuildRef)>,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum BuildRef {
    Input(usize),
    Output(usize),
    Node(usize),
}

impl Builder {
    fn new(spec: FractalSpec, output_z: f64, origin: (f64, f64)) -> Result<Self> {
        Ok(Self {
            dims: layer_dimensions(&spec)?,
            spec,
            output_z,
            origin,
            input_ports: Vec::new(),
            output_ports: HashMap::new(),
            output_list: Vec::new(),
            nodes: Vec::new(),
            node_key: HashMap::new(),
            segments: Vec::new(),
            seg_key: HashSet::new(),
        })
    }

    fn position_of(&self, r: BuildRef) -> Point3 {
        match r {
            BuildRef::Input(i) => self.input_ports[i].2,
            BuildRef::Output(i) => self.output_list[i].2,
            BuildRef::Node(i) => self.nodes[i].1,
        }
    }

    fn get_or_make_output(&mut self, gi: i64, gj: i64) -> BuildRef {
        let key = (gi as i32, gj as i32);
        if let Some(&idx) = self.output_ports.get(&key) {
            return BuildRef::Output(idx);
        }
        let pos = Point3::new(
            self.origin.0 + gi as f64 * self.spec.output_pitch,
            self.origin.1 + gj as f64 * self.spec.output_pitch,
            self.output_z,
        );
        let idx = self.output_list.len();
        self.output_list.push((key.0, key.1, pos));
        self.output_ports.insert(key, idx);
        BuildRef::Output(idx)
    }

    fn add_segment(&mut self, from: BuildRef, to: BuildRef, path: WaveguidePath) {
        if self.seg_key.insert((from, to)) {
            self.segments.push((from, to, path));
        }
    }

    /// Curve from a node down to a child position: the shared transit profile
    /// scaled by this branch's travel. The central child descends straight.
    fn child_curve(&self, from: Point3, to: Point3) -> Result<WaveguidePath> {
        transit_curve(from, to, self.spec.chirality, self.spec.diameter)
    }

    /// Build the subtree rooted at `layer` over output-grid block `base`,
    /// returning the subtree's entry element. Nodes and whole subtrees are
    /// shared between couplers whose fan-outs coincide.
    fn gen_subtree(&mut self, center: (f64, f64), base: (i64, i64), layer: u32) -> Result<BuildRef> {
        if layer > self.spec.layers {
            return Ok(self.get_or_make_output(base.0, base.1));
        }
        let pos = Point3::new(center.0, center.1, self.output_z + self.dims.height_from(layer));
        let key = (layer, quantize(pos));
        if let Some(&idx) = self.node_key.get(&key) {
            return Ok(BuildRef::Node(idx));
        }
        let idx = self.nodes.len();
        self.nodes.push((layer, pos));
        self.node_key.insert(key, idx);

        let s = self.spec.side() as i64;
        let dim = *self.dims.layer(layer);
        let child_block = (self.spec.output_side() as i64) / s.pow(layer);
        let half = (s - 1) as f64 / 2.0;
        for mi in 0..s {
            for ni in 0..s {
                let child_center = (
                    center.0 + (mi as f64 - half) * dim.pitch,
                    center.1 + (ni as f64 - half) * dim.pitch,
                );
                let child_base = (base.0 + mi * child_block, base.1 + ni * child_block);
                let child = self.gen_subtree(child_center, child_base, layer + 1)?;
                let child_pos = self.position_of(child);
                let path = self.child_curve(pos, child_pos)?;
                self.add_segment(BuildRef::Node(idx), child, path);
            }
        }
        Ok(BuildRef::Node(idx))
    }

    /// One coupler: input port plus its bifurcation tree. The first node sits
    /// at the input, joined by a zero-length stub so the port and the split
    /// stay distinct circuit elements.
    fn gen_coupler(&mut self, grid: (i32, i32), base: (i64, i64)) -> Result<()> {
        let center = (
            self.origin.0 + (base.0 as f64 + (self.spec.output_side() as f64 - 1.0) / 2.0)
                * self.spec.output_pitch,
            self.origin.1 + (base.1 as f64 + (self.spec.output_side() as f64 - 1.0) / 2.0)
                * self.spec.output_pitch,
        );
        let input_pos = Point3::new(
            center.0,
            center.1,
            self.output_z + self.dims.total_height(),
        );
        let input_idx = self.input_ports.len();
        self.input_ports.push((grid.0, grid.1, input_pos));
        let root = self.gen_subtree(center, base, 1)?;
        let root_pos = self.position_of(root);
        let stem = WaveguidePath::straight(input_pos, root_pos, self.spec.diameter)?;
        self.add_segment(BuildRef::Input(input_idx), root, stem);
        Ok(())
    }

    /// Canonical id assignment: inputs by grid index, then outputs by grid
    /// index, nodes by (layer, position), segments by endpoint refs.
    fn finish(self, name: String, mut params: BTreeMap<String, String>) -> Circuit {
        let mut input_order: Vec<usize> = (0..self.input_ports.len()).collect();
        input_order.sort_by_key(|&i| (self.input_ports[i].0, self.input_ports[i].1));
        let mut output_order: Vec<usize> = (0..self.output_list.len()).collect();
        output_order.sort_by_key(|&i| (self.output_list[i].0, self.output_list[i].1));
        let mut node_order: Vec<usize> = (0..self.nodes.len()).collect();
        node_order.sort_by_key(|&i| (self.nodes[i].0, quantize(self.nodes[i].1)));

        let mut ports = Vec::with_capacity(self.input_ports.len() + self.output_list.len());
        let mut input_map = vec![0u32; self.input_ports.len()];
        for (new, &old) in input_order.iter().enumerate() {
            let (gi, gj, pos) = self.input_ports[old];
            input_map[old] = new as u32;
            ports.push(Port {
                id: PortId(new as u32),
                role: PortRole::Input,
                grid_index: (gi, gj),
                position: pos,
            });
        }
        let base = self.input_ports.len() as u32;
        let mut output_map = vec![0u32; self.output_list.len()];
        for (new, &old) in output_order.iter().enumerate() {
            let (gi, gj, pos) = self.output_list[old];
            output_map[old] = base + new as u32;
            ports.push(Port {
                id: PortId(base + new as u32),
                role: PortRole::Output,
                grid_index: (gi, gj),
                position: pos,
            });
        }
        let mut nodes = Vec::with_capacity(self.nodes.len());
        let mut node_map = vec![0u32; self.nodes.len()];
        for (new, &old) in node_order.iter().enumerate() {
            let (layer, pos) = self.nodes[old];
            node_map[old] = new as u32;
            nodes.push(BifurcationNode {
                id: NodeId(new as u32),
                layer,
                position: pos,
            });
        }

        let remap = |r: BuildRef| -> ElementRef {
            match r {
                BuildRef::Input(i) => ElementRef::Port(PortId(input_map[i])),
                BuildRef::Output(i) => ElementRef::Port(PortId(output_map[i])),
                BuildRef::Node(i) => ElementRef::Node(NodeId(node_map[i])),
            }
        };
        let mut segs: Vec<(ElementRef, ElementRef, WaveguidePath)> = self
            .segments
            .into_iter()
            .map(|(f, t, p)| (remap(f), remap(t), p))
            .collect();
        segs.sort_by_key(|(f, t, _)| (*f, *t));
        let segments = segs
            .into_iter()
            .enumerate()
            .map(|(i, (from, to, path))| Segment {
                id: SegmentId(i as u32),
                from,
                to,
                path,
            })
            .collect();

        params.insert(
            "output_side".into(),
            {
                let (i_ext, _) = ports
                    .iter()
                    .filter(|p| p.role == PortRole::Output)
                    .fold(((i32::MAX, i32::MIN), ()), |((lo, hi), ()), p| {
                        ((lo.min(p.grid_index.0), hi.max(p.grid_index.0)), ())
                    });
                ((i_ext.1 - i_ext.0 + 1).max(0)).to_string()
            },
        );

        Circuit {
            name,
            params,
            ports,
            nodes,
            segments,
            kernels: None,
        }
    }
}

/// Generate a single 1 x b^L coupler whose input port sits at `input`. The
/// output grid lands at z = input.z - total_height, centered under the input.
pub fn generate_coupler(spec: &FractalSpec, input: Point3) -> Result<Circuit> {
    spec.validate()?;
    let dims = layer_dimensions(spec)?;
    let half_span = (spec.output_side() as f64 - 1.0) / 2.0;
    let origin = (
        input.x - half_span * spec.output_pitch,
        input.y - half_span * spec.output_pitch,
    );
    let mut b = Builder::new(*spec, input.z - dims.total_height(), origin)?;
    b.gen_coupler((0, 0), (0, 0))?;
    let name = format!("fractal-1x{}", spec.output_count());
    Ok(b.finish(name, spec.params()))
}

/// Generate an n x m array of couplers on a shared output grid. `input_pitch`
/// must be an integer multiple of the output pitch so overlapping fan-outs
/// land on common grid points; coincident output ports and bifurcation nodes
/// are merged.
pub fn generate_coupler_array(
    spec: &FractalSpec,
    rows: u32,
    cols: u32,
    input_pitch: f64,
) -> Result<Circuit> {
    spec.validate()?;
    if rows < 1 || cols < 1 {
        return Err(Error::InvalidParameter("array grid must be at least 1x1".into()));
    }
    let ratio = input_pitch / spec.output_pitch;
    let ratio_int = ratio.round();
    if !(input_pitch > 0.0) || (ratio - ratio_int).abs() > 1e-9 || ratio_int < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "input pitch {} is not a positive integer multiple of the output pitch {}",
            input_pitch, spec.output_pitch
        )));
    }
    let ratio = ratio_int as i64;

    let dims = layer_dimensions(spec)?;
    let half_span = (spec.output_side() as f64 - 1.0) / 2.0;
    let origin = (-half_span * spec.output_pitch, -half_span * spec.output_pitch);
    let mut b = Builder::new(*spec, 0.0, origin)?;
    let _ = dims;
    for r in 0..rows {
        for c in 0..cols {
            b.gen_coupler(
                (r as i32, c as i32),
                (r as i64 * ratio, c as i64 * ratio),
            )?;
        }
    }
    let mut params = spec.params();
    params.insert("rows".into(), rows.to_string());
    params.insert("cols".into(), cols.to_string());
    params.insert("input_pitch".into(), format!("{input_pitch}"));
    let name = format!("fractal-array-{rows}x{cols}-1x{}", spec.output_count());
    Ok(b.finish(name, params))
}
