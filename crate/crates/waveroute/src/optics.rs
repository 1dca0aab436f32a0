//! Incoherent scalar power flow over a circuit's DAG.
//!
//! Loss model: a driven input pays the injection loss I once; every segment
//! pays the propagation loss P prorated by arc length against a reference
//! length; every bifurcation node pays the coupling loss C and then splits
//! its power according to a [`SplitModel`]. Powers meeting at a merged output
//! port add linearly. All arithmetic runs on linear power internally; dB
//! appears only at the model boundary.
//!
//! Input ports behave as broadcast sources: when several waveguides are
//! rooted at one input (as in the filter units, where an extended free-space
//! spot illuminates every waveguide at that pixel), each of them collects the
//! full injected power. Splits inside the circuit always conserve power.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, ElementRef, PortId, PortRole};
use crate::error::{Error, Result};
use crate::fractal::{generate_coupler, layer_dimensions, FractalSpec};
use crate::geom::Point3;
use crate::haar::KernelSet;

#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

#[inline]
pub fn linear_to_db(transmission: f64) -> f64 {
    -10.0 * transmission.log10()
}

/// Injection, propagation, and coupling losses in dB.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    /// I: paid once per driven input, dB.
    pub injection_db: f64,
    /// P: paid per `reference_length` of propagation, dB.
    pub propagation_db: f64,
    /// C: paid at every bifurcation node, dB.
    pub coupling_db: f64,
    /// Path length that corresponds to one unit of P, micrometers. By
    /// convention the standard 1x9 coupler's effective path length.
    pub reference_length: f64,
}

impl LossModel {
    pub fn new(injection_db: f64, propagation_db: f64, coupling_db: f64, reference_length: f64) -> Result<Self> {
        if !(reference_length > 0.0) {
            return Err(Error::InvalidParameter(
                "reference length must be positive".into(),
            ));
        }
        Ok(Self { injection_db, propagation_db, coupling_db, reference_length })
    }

    pub fn lossless() -> Self {
        Self { injection_db: 0.0, propagation_db: 0.0, coupling_db: 0.0, reference_length: 1.0 }
    }
}

/// Per-layer splitting ratios: the central child's fraction, remainder spread
/// uniformly over the off-center children. Weights are post-coupling-loss
/// fractions and sum to one at every node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitModel {
    central: Vec<f64>,
}

impl SplitModel {
    /// Same central fraction at every layer.
    pub fn constant(central_fraction: f64) -> Result<Self> {
        Self::per_layer(vec![central_fraction])
    }

    /// Layer-indexed central fractions; the last entry covers deeper layers.
    pub fn per_layer(fractions: Vec<f64>) -> Result<Self> {
        if fractions.is_empty() {
            return Err(Error::InvalidParameter("need at least one layer fraction".into()));
        }
        for &f in &fractions {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "central fraction must lie in (0, 1), got {f}"
                )));
            }
        }
        Ok(Self { central: fractions })
    }

    /// Even split over b children.
    pub fn uniform(branching: u32) -> Result<Self> {
        if branching < 2 {
            return Err(Error::InvalidParameter("branching must be >= 2".into()));
        }
        Self::constant(1.0 / branching as f64)
    }

    pub fn central_fraction(&self, layer: u32) -> f64 {
        let idx = (layer.max(1) as usize - 1).min(self.central.len() - 1);
        self.central[idx]
    }
}

impl Default for SplitModel {
    /// Measured central share of the standard coupler.
    fn default() -> Self {
        Self::constant(0.42).unwrap()
    }
}

/// Port-indexed linear power, normalized to 1.0 per driven input.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerMap(pub BTreeMap<PortId, f64>);

impl PowerMap {
    pub fn new() -> Self {
        Self(BTreeMap::new())
    }

    pub fn single(port: PortId, power: f64) -> Self {
        let mut m = BTreeMap::new();
        m.insert(port, power);
        Self(m)
    }

    /// Unit power on every input port.
    pub fn uniform_inputs(c: &Circuit) -> Self {
        Self(c.input_ports().map(|p| (p.id, 1.0)).collect())
    }

    pub fn set(&mut self, port: PortId, power: f64) {
        self.0.insert(port, power);
    }

    pub fn get(&self, port: PortId) -> f64 {
        self.0.get(&port).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.0.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (PortId, f64)> + '_ {
        self.0.iter().map(|(&k, &v)| (k, v))
    }
}

// ---------------------------------------------------------------------------
// Gain graph
// ---------------------------------------------------------------------------

struct GainGraph {
    /// Topological order over ports and nodes.
    topo: Vec<ElementRef>,
    index: HashMap<ElementRef, usize>,
    /// (from, to, gain) per segment; gain folds propagation, the source
    /// node's coupling loss, and its split weight.
    edges: Vec<(usize, usize, f64)>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
}

fn build_gain_graph(c: &Circuit, lm: &LossModel, sm: &SplitModel) -> Result<GainGraph> {
    if !(lm.reference_length > 0.0) {
        return Err(Error::InvalidParameter("reference length must be positive".into()));
    }
    let topo = c.topo_order()?;
    let index: HashMap<ElementRef, usize> =
        topo.iter().enumerate().map(|(i, &v)| (v, i)).collect();

    // Split weights per node: detect the unique child hanging straight below.
    let mut edge_weight: Vec<f64> = vec![1.0; c.segments.len()];
    let outgoing = c.outgoing_index();
    for n in &c.nodes {
        let segs = match outgoing.get(&ElementRef::Node(n.id)) {
            Some(s) => s,
            None => continue,
        };
        let count = segs.len();
        if count <= 1 {
            continue;
        }
        let central: Vec<usize> = segs
            .iter()
            .copied()
            .filter(|&i| {
                let end = c.segments[i].path.end();
                (end - n.position).horizontal().norm() < 1e-6
            })
            .collect();
        let f_c = sm.central_fraction(n.layer);
        if central.len() == 1 {
            let off = (1.0 - f_c) / (count as f64 - 1.0);
            for &i in segs {
                edge_weight[i] = if i == central[0] { f_c } else { off };
            }
        } else {
            for &i in segs {
                edge_weight[i] = 1.0 / count as f64;
            }
        }
    }

    let g_c = db_to_linear(lm.coupling_db);
    let mut edges = Vec::with_capacity(c.segments.len());
    for (i, s) in c.segments.iter().enumerate() {
        let from = *index.get(&s.from).ok_or_else(|| {
            Error::InvalidCircuit(format!("segment {} has a dangling source", s.id))
        })?;
        let to = *index.get(&s.to).ok_or_else(|| {
            Error::InvalidCircuit(format!("segment {} has a dangling target", s.id))
        })?;
        let g_p = db_to_linear(lm.propagation_db * s.path.arc_length() / lm.reference_length);
        let node_factor = match s.from {
            ElementRef::Node(_) => g_c * edge_weight[i],
            ElementRef::Port(_) => 1.0, // broadcast source
        };
        edges.push((from, to, g_p * node_factor));
    }

    let mut out_edges = vec![Vec::new(); topo.len()];
    let mut in_edges = vec![Vec::new(); topo.len()];
    for (i, &(f, t, _)) in edges.iter().enumerate() {
        out_edges[f].push(i);
        in_edges[t].push(i);
    }
    Ok(GainGraph { topo, index, edges, out_edges, in_edges })
}

impl GainGraph {
    fn forward(&self, c: &Circuit, inputs: &PowerMap, lm: &LossModel) -> Result<PowerMap> {
        let g_i = db_to_linear(lm.injection_db);
        let mut acc = vec![0.0f64; self.topo.len()];
        for (port, power) in inputs.iter() {
            let p = c
                .port(port)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown port {port}")))?;
            if p.role != PortRole::Input {
                return Err(Error::InvalidParameter(format!(
                    "port {port} is not an input port"
                )));
            }
            if !(power >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "negative power on port {port}"
                )));
            }
            acc[self.index[&ElementRef::Port(port)]] += power * g_i;
        }
        for (vi, _) in self.topo.iter().enumerate() {
            if acc[vi] == 0.0 {
                continue;
            }
            for &ei in &self.out_edges[vi] {
                let (_, to, gain) = self.edges[ei];
                acc[to] += acc[vi] * gain;
            }
        }
        Ok(PowerMap(
            c.output_ports()
                .map(|p| (p.id, acc[self.index[&ElementRef::Port(p.id)]]))
                .collect(),
        ))
    }

    /// Transpose propagation with identical per-edge gains; the injected
    /// output pays the injection loss, mirroring the forward convention.
    fn reverse(&self, c: &Circuit, output: PortId, lm: &LossModel) -> Result<PowerMap> {
        let p = c
            .port(output)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown port {output}")))?;
        if p.role != PortRole::Output {
            return Err(Error::InvalidParameter(format!(
                "port {output} is not an output port"
            )));
        }
        let mut acc = vec![0.0f64; self.topo.len()];
        acc[self.index[&ElementRef::Port(output)]] = db_to_linear(lm.injection_db);
        for vi in (0..self.topo.len()).rev() {
            if acc[vi] == 0.0 {
                continue;
            }
            for &ei in &self.in_edges[vi] {
                let (from, _, gain) = self.edges[ei];
                acc[from] += acc[vi] * gain;
            }
        }
        Ok(PowerMap(
            c.input_ports()
                .map(|p| (p.id, acc[self.index[&ElementRef::Port(p.id)]]))
                .collect(),
        ))
    }
}

/// Propagate injected powers through the circuit. Returns the power arriving
/// at every output port; contributions reaching a merged port add linearly.
pub fn propagate_power(
    c: &Circuit,
    inputs: &PowerMap,
    lm: &LossModel,
    sm: &SplitModel,
) -> Result<PowerMap> {
    build_gain_graph(c, lm, sm)?.forward(c, inputs, lm)
}

/// Inject one unit at an output port and propagate through the reversed DAG
/// with the same per-segment gains, returning the power emitted at each input
/// port. For an ideal filter unit the support of the result equals the
/// filter's kernel pattern.
pub fn reverse_characterize(
    c: &Circuit,
    output: PortId,
    lm: &LossModel,
    sm: &SplitModel,
) -> Result<PowerMap> {
    build_gain_graph(c, lm, sm)?.reverse(c, output, lm)
}

/// Forward transmissions as a matrix: rows are output ports, columns input
/// ports, both ascending by id.
pub fn transmission_matrix(
    c: &Circuit,
    lm: &LossModel,
    sm: &SplitModel,
) -> Result<(Vec<PortId>, Vec<PortId>, Vec<Vec<f64>>)> {
    let graph = build_gain_graph(c, lm, sm)?;
    let inputs: Vec<PortId> = c.input_ports().map(|p| p.id).collect();
    let outputs: Vec<PortId> = c.output_ports().map(|p| p.id).collect();
    let mut t = vec![vec![0.0; inputs.len()]; outputs.len()];
    for (col, &i) in inputs.iter().enumerate() {
        let out = graph.forward(c, &PowerMap::single(i, 1.0), lm)?;
        for (row, &o) in outputs.iter().enumerate() {
            t[row][col] = out.get(o);
        }
    }
    Ok((inputs, outputs, t))
}

/// Reverse transmissions: rows are input ports, columns output ports. In this
/// reciprocal linear model it equals the transpose of the forward matrix.
pub fn reverse_matrix(
    c: &Circuit,
    lm: &LossModel,
    sm: &SplitModel,
) -> Result<(Vec<PortId>, Vec<PortId>, Vec<Vec<f64>>)> {
    let graph = build_gain_graph(c, lm, sm)?;
    let inputs: Vec<PortId> = c.input_ports().map(|p| p.id).collect();
    let outputs: Vec<PortId> = c.output_ports().map(|p| p.id).collect();
    let mut r = vec![vec![0.0; outputs.len()]; inputs.len()];
    for (col, &o) in outputs.iter().enumerate() {
        let back = graph.reverse(c, o, lm)?;
        for (row, &i) in inputs.iter().enumerate() {
            r[row][col] = back.get(i);
        }
    }
    Ok((inputs, outputs, r))
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

/// The three decomposed loss contributions in dB.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub injection_db: f64,
    pub propagation_db: f64,
    pub coupling_db: f64,
}

impl LossComponents {
    /// Forward-predict the three measurement configurations:
    /// (I + P + C, I + 3P + C, I + 4P + 2C).
    pub fn predict(&self) -> (f64, f64, f64) {
        let (i, p, c) = (self.injection_db, self.propagation_db, self.coupling_db);
        (i + p + c, i + 3.0 * p + c, i + 4.0 * p + 2.0 * c)
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        for (name, v) in [
            ("injection", self.injection_db),
            ("propagation", self.propagation_db),
            ("coupling", self.coupling_db),
        ] {
            if v < 0.0 {
                w.push(format!("calibrated {name} loss is negative ({v:.3} dB)"));
            }
        }
        w
    }

    pub fn into_model(self, reference_length: f64) -> Result<LossModel> {
        LossModel::new(
            self.injection_db,
            self.propagation_db,
            self.coupling_db,
            reference_length,
        )
    }
}

/// Solve the three-measurement loss decomposition exactly:
/// the standard coupler (I + P + C), the three-times-larger coupler
/// (I + 3P + C), and the two-layer coupler (I + 4P + 2C). The system is
/// nonsingular; negative components are reported as warnings, not errors.
pub fn calibrate_losses(
    standard_db: f64,
    triple_db: f64,
    two_layer_db: f64,
) -> Result<LossComponents> {
    for v in [standard_db, triple_db, two_layer_db] {
        if !v.is_finite() {
            return Err(Error::InvalidParameter("measurements must be finite".into()));
        }
    }
    let p = (triple_db - standard_db) / 2.0;
    let c = two_layer_db - standard_db - 3.0 * p;
    let i = standard_db - p - c;
    Ok(LossComponents { injection_db: i, propagation_db: p, coupling_db: c })
}

// ---------------------------------------------------------------------------
// Mode count
// ---------------------------------------------------------------------------

/// Approximate number of guided modes of a cylindrical waveguide,
/// M = 0.5 (pi d dn / lambda)^2. Callers read M < 1 as single-mode.
pub fn mode_count(diameter_um: f64, delta_n: f64, lambda_um: f64) -> f64 {
    let x = std::f64::consts::PI * diameter_um * delta_n / lambda_um;
    0.5 * x * x
}

// ---------------------------------------------------------------------------
// Splitting statistics
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplittingStats {
    pub central_port: PortId,
    /// Share of the total output power in the geometrically central port.
    pub central_fraction: f64,
    /// Remaining ports' shares, ascending.
    pub off_center_fractions: Vec<f64>,
}

/// Fraction of output power in the central output port of a single coupler.
/// Errors when the output grid has no central port (even side).
pub fn splitting_histogram(out: &PowerMap, c: &Circuit) -> Result<SplittingStats> {
    let ((i_lo, i_hi), (j_lo, j_hi)) = c
        .output_grid_extent()
        .ok_or_else(|| Error::InvalidCircuit("circuit has no output ports".into()))?;
    if (i_hi - i_lo) % 2 != 0 || (j_hi - j_lo) % 2 != 0 {
        return Err(Error::InvalidCircuit(
            "even output grid has no central port".into(),
        ));
    }
    let center = ((i_lo + i_hi) / 2, (j_lo + j_hi) / 2);
    let central_port = c
        .output_ports()
        .find(|p| p.grid_index == center)
        .ok_or_else(|| Error::InvalidCircuit("central grid position is unpopulated".into()))?
        .id;
    let total = out.total();
    if !(total > 0.0) {
        return Err(Error::InvalidParameter("total output power is zero".into()));
    }
    let central_fraction = out.get(central_port) / total;
    let mut off: Vec<f64> = c
        .output_ports()
        .filter(|p| p.id != central_port)
        .map(|p| out.get(p.id) / total)
        .collect();
    off.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(SplittingStats { central_port, central_fraction, off_center_fractions: off })
}

// ---------------------------------------------------------------------------
// Effective path length
// ---------------------------------------------------------------------------

/// Split-weighted mean input-to-output path length, averaged over inputs.
/// This is the length scale the propagation loss P is quoted against.
pub fn effective_path_length(c: &Circuit, sm: &SplitModel) -> Result<f64> {
    let lossless = LossModel::lossless();
    let graph = build_gain_graph(c, &lossless, sm)?;
    // Expected remaining length per vertex, filled in reverse topo order.
    // Port fan-outs average uniformly; node fan-outs weight by the split.
    let mut expected = vec![0.0f64; graph.topo.len()];
    let seg_len: Vec<f64> = c.segments.iter().map(|s| s.path.arc_length()).collect();
    for vi in (0..graph.topo.len()).rev() {
        let outs = &graph.out_edges[vi];
        if outs.is_empty() {
            continue;
        }
        match graph.topo[vi] {
            ElementRef::Port(_) => {
                let n = outs.len() as f64;
                expected[vi] = outs
                    .iter()
                    .map(|&ei| {
                        let (_, to, _) = graph.edges[ei];
                        // edge index == segment index by construction
                        seg_len[ei] + expected[to]
                    })
                    .sum::<f64>()
                    / n;
            }
            ElementRef::Node(_) => {
                // Gains are g_c * w for lossless P, so weights recover as
                // gain / g_c; with a lossless model g_c = 1.
                expected[vi] = outs
                    .iter()
                    .map(|&ei| {
                        let (_, to, gain) = graph.edges[ei];
                        gain * (seg_len[ei] + expected[to])
                    })
                    .sum();
            }
        }
    }
    let inputs: Vec<usize> = c
        .input_ports()
        .map(|p| graph.index[&ElementRef::Port(p.id)])
        .collect();
    if inputs.is_empty() {
        return Err(Error::InvalidCircuit("circuit has no input ports".into()));
    }
    Ok(inputs.iter().map(|&i| expected[i]).sum::<f64>() / inputs.len() as f64)
}

/// Effective path length of the standard 1x9 coupler under the given split
/// model; the conventional `reference_length` for loss models.
pub fn standard_reference_length(sm: &SplitModel) -> f64 {
    let spec = FractalSpec::default();
    let h = layer_dimensions(&spec).unwrap().total_height();
    let c = generate_coupler(&spec, Point3::new(0.0, 0.0, h)).unwrap();
    effective_path_length(&c, sm).unwrap()
}

/// Drive every input at unit power and report the total transmission as dB
/// loss.
pub fn total_loss_db(c: &Circuit, lm: &LossModel, sm: &SplitModel) -> Result<f64> {
    let inputs = PowerMap::uniform_inputs(c);
    let injected = inputs.total();
    let out = propagate_power(c, &inputs, lm, sm)?;
    Ok(linear_to_db(out.total() / injected))
}

// ---------------------------------------------------------------------------
// Haar convolution
// ---------------------------------------------------------------------------

/// Per-filter, per-unit output powers of a tiled filter array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub filters: usize,
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(filters: usize, rows: usize, cols: usize) -> Self {
        Self { filters, rows, cols, data: vec![0.0; filters * rows * cols] }
    }

    #[inline]
    pub fn get(&self, f: usize, u: usize, v: usize) -> f64 {
        self.data[(f * self.rows + u) * self.cols + v]
    }

    #[inline]
    pub fn set(&mut self, f: usize, u: usize, v: usize, value: f64) {
        self.data[(f * self.rows + u) * self.cols + v] = value;
    }
}

/// Drive the input grid of a tiled filter array with an image and collect the
/// per-filter, per-unit output powers. With a lossless model this equals the
/// stride-3 Boolean convolution of the image with the kernel set exactly.
pub fn haar_convolve(
    c: &Circuit,
    image: &[Vec<f64>],
    lm: &LossModel,
    sm: &SplitModel,
) -> Result<FeatureMap> {
    let ks: &KernelSet = c
        .kernels
        .as_ref()
        .ok_or_else(|| Error::InvalidCircuit("circuit carries no kernel set".into()))?;
    let side = image.len();
    if side == 0 || side % 3 != 0 || image.iter().any(|row| row.len() != side) {
        return Err(Error::InvalidParameter(
            "image must be square with side a multiple of 3".into(),
        ));
    }
    if image.iter().flatten().any(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidParameter("image intensities must be non-negative".into()));
    }
    let input_by_grid: HashMap<(i32, i32), PortId> =
        c.input_ports().map(|p| (p.grid_index, p.id)).collect();
    let output_by_grid: HashMap<(i32, i32), PortId> =
        c.output_ports().map(|p| (p.grid_index, p.id)).collect();
    if input_by_grid.len() != side * side {
        return Err(Error::InvalidParameter(format!(
            "image is {side}x{side} but the array has {} inputs",
            input_by_grid.len()
        )));
    }

    let mut inputs = PowerMap::new();
    for (r, row) in image.iter().enumerate() {
        for (cidx, &v) in row.iter().enumerate() {
            let port = *input_by_grid.get(&(r as i32, cidx as i32)).ok_or_else(|| {
                Error::InvalidParameter(format!("no input port at pixel ({r}, {cidx})"))
            })?;
            inputs.set(port, v);
        }
    }
    let out = propagate_power(c, &inputs, lm, sm)?;

    let units = side / 3;
    let mut fm = FeatureMap::zeros(9, units, units);
    for f in 0..9 {
        let (or, oc) = ks.output_grid(f);
        for u in 0..units {
            for v in 0..units {
                let grid = ((3 * u + or) as i32, (3 * v + oc) as i32);
                let port = *output_by_grid.get(&grid).ok_or_else(|| {
                    Error::InvalidCircuit(format!("missing output port at {grid:?}"))
                })?;
                fm.set(f, u, v, out.get(port));
            }
        }
    }
    Ok(fm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{ElementRef, Port, Segment, SegmentId};
    use crate::fractal::{generate_coupler, layer_dimensions, FractalSpec};
    use crate::geom::WaveguidePath;
    use crate::haar::{generate_filter_unit, tile_filter_array, HaarKernel, UnitGeometry};

    fn straight_circuit(length: f64) -> Circuit {
        let a = Point3::new(0.0, 0.0, length);
        let b = Point3::ORIGIN;
        Circuit {
            name: "wire".into(),
            ports: vec![
                Port { id: PortId(0), role: PortRole::Input, grid_index: (0, 0), position: a },
                Port { id: PortId(1), role: PortRole::Output, grid_index: (0, 0), position: b },
            ],
            segments: vec![Segment {
                id: SegmentId(0),
                from: ElementRef::Port(PortId(0)),
                to: ElementRef::Port(PortId(1)),
                path: WaveguidePath::straight(a, b, 1.2).unwrap(),
            }],
            ..Default::default()
        }
    }

    fn default_coupler(layers: u32) -> Circuit {
        let spec = FractalSpec { layers, ..FractalSpec::default() };
        let h = layer_dimensions(&spec).unwrap().total_height();
        generate_coupler(&spec, Point3::new(0.0, 0.0, h)).unwrap()
    }

    #[test]
    fn db_definition_on_a_single_wire() {
        let c = straight_circuit(100.0);
        let lm = LossModel::new(0.0, 1.0, 0.0, 100.0).unwrap();
        let out = propagate_power(
            &c,
            &PowerMap::single(PortId(0), 1.0),
            &lm,
            &SplitModel::default(),
        )
        .unwrap();
        assert!((out.get(PortId(1)) - 10f64.powf(-0.1)).abs() < 1e-12);
    }

    #[test]
    fn calibration_recovers_components() {
        let lc = calibrate_losses(5.52, 7.80, 10.61).unwrap();
        assert!((lc.injection_db - 2.71).abs() < 0.01);
        assert!((lc.propagation_db - 1.14).abs() < 0.01);
        assert!((lc.coupling_db - 1.67).abs() < 0.01);
        let (l1, l2, l3) = lc.predict();
        assert!((l1 - 5.52).abs() < 1e-12);
        assert!((l2 - 7.80).abs() < 1e-12);
        assert!((l3 - 10.61).abs() < 1e-12);
        assert!(lc.warnings().is_empty());
    }

    #[test]
    fn calibration_degenerate_cases() {
        let zero = calibrate_losses(0.0, 0.0, 0.0).unwrap();
        assert_eq!((zero.injection_db, zero.propagation_db, zero.coupling_db), (0.0, 0.0, 0.0));
        let pure = calibrate_losses(1.0, 1.0, 1.0).unwrap();
        assert_eq!((pure.injection_db, pure.propagation_db, pure.coupling_db), (1.0, 0.0, 0.0));
        assert!(calibrate_losses(f64::NAN, 1.0, 1.0).is_err());
        // Unphysical ordering yields negative components plus warnings.
        let odd = calibrate_losses(5.0, 3.0, 5.0).unwrap();
        assert!(!odd.warnings().is_empty());
    }

    #[test]
    fn standard_coupler_total_loss() {
        let sm = SplitModel::default();
        let reference = standard_reference_length(&sm);
        let lm = calibrate_losses(5.52, 7.80, 10.61)
            .unwrap()
            .into_model(reference)
            .unwrap();
        let loss9 = total_loss_db(&default_coupler(1), &lm, &sm).unwrap();
        assert!((loss9 - 5.52).abs() < 0.05, "1x9 loss {loss9}");
        let loss81 = total_loss_db(&default_coupler(2), &lm, &sm).unwrap();
        assert!((loss81 - 10.61).abs() < 0.05, "1x81 loss {loss81}");
    }

    #[test]
    fn mode_count_values() {
        let m = mode_count(1.2, 0.5, 0.635);
        assert!((m - 4.41).abs() < 0.01, "M = {m}");
        let single = mode_count(0.3, 0.5, 0.635);
        assert!(single < 1.0);
        assert!((single - 0.2754).abs() < 1e-3);
        assert_eq!(mode_count(1.2, 0.0, 0.635), 0.0);
    }

    #[test]
    fn uniform_split_histogram() {
        let c = default_coupler(1);
        let sm = SplitModel::uniform(9).unwrap();
        let out =
            propagate_power(&c, &PowerMap::uniform_inputs(&c), &LossModel::lossless(), &sm)
                .unwrap();
        let stats = splitting_histogram(&out, &c).unwrap();
        assert!((stats.central_fraction - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn default_split_histogram() {
        let c = default_coupler(1);
        let sm = SplitModel::default();
        let out =
            propagate_power(&c, &PowerMap::uniform_inputs(&c), &LossModel::lossless(), &sm)
                .unwrap();
        let stats = splitting_histogram(&out, &c).unwrap();
        assert!((stats.central_fraction - 0.42).abs() < 1e-12);
        for f in &stats.off_center_fractions {
            assert!((f - 0.58 / 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cascaded_split_is_the_product() {
        let c = default_coupler(2);
        let sm = SplitModel::default();
        let out =
            propagate_power(&c, &PowerMap::uniform_inputs(&c), &LossModel::lossless(), &sm)
                .unwrap();
        let stats = splitting_histogram(&out, &c).unwrap();
        assert!((stats.central_fraction - 0.42 * 0.42).abs() < 1e-9);
    }

    #[test]
    fn per_layer_override_fits_measured_cascade() {
        let c = default_coupler(2);
        let sm = SplitModel::per_layer(vec![0.55, 0.6]).unwrap();
        let inputs = PowerMap::uniform_inputs(&c);
        let out = propagate_power(&c, &inputs, &LossModel::lossless(), &sm).unwrap();
        let stats = splitting_histogram(&out, &c).unwrap();
        assert!((stats.central_fraction - 0.33).abs() < 1e-9);
        assert!(out.total() <= inputs.total() + 1e-9);
    }

    #[test]
    fn even_grid_has_no_central_port() {
        let spec = FractalSpec { branching: 4, ..FractalSpec::default() };
        let h = layer_dimensions(&spec).unwrap().total_height();
        let c = generate_coupler(&spec, Point3::new(0.0, 0.0, h)).unwrap();
        let sm = SplitModel::uniform(4).unwrap();
        let out =
            propagate_power(&c, &PowerMap::uniform_inputs(&c), &LossModel::lossless(), &sm)
                .unwrap();
        assert!(matches!(
            splitting_histogram(&out, &c),
            Err(Error::InvalidCircuit(_))
        ));
    }

    #[test]
    fn energy_subconservation_and_lossless_equality() {
        let c = default_coupler(2);
        let sm = SplitModel::default();
        let inputs = PowerMap::uniform_inputs(&c);
        let lossy = LossModel::new(1.0, 0.7, 0.3, 80.0).unwrap();
        let out = propagate_power(&c, &inputs, &lossy, &sm).unwrap();
        assert!(out.total() < inputs.total());
        let lossless = propagate_power(&c, &inputs, &LossModel::lossless(), &sm).unwrap();
        assert!((lossless.total() - inputs.total()).abs() < 1e-9);
    }

    #[test]
    fn propagation_is_linear() {
        let c = default_coupler(1);
        let sm = SplitModel::default();
        let lm = LossModel::new(2.0, 1.0, 0.5, 80.0).unwrap();
        let input = c.input_ports().next().unwrap().id;
        let a = propagate_power(&c, &PowerMap::single(input, 1.0), &lm, &sm).unwrap();
        let b = propagate_power(&c, &PowerMap::single(input, 2.5), &lm, &sm).unwrap();
        for (port, power) in a.iter() {
            assert!((b.get(port) - 2.5 * power).abs() < 1e-12);
        }
    }

    #[test]
    fn unknown_and_wrong_role_ports_error() {
        let c = default_coupler(1);
        let sm = SplitModel::default();
        let lm = LossModel::lossless();
        assert!(propagate_power(&c, &PowerMap::single(PortId(999), 1.0), &lm, &sm).is_err());
        let output = c.output_ports().next().unwrap().id;
        assert!(propagate_power(&c, &PowerMap::single(output, 1.0), &lm, &sm).is_err());
        assert!(reverse_characterize(&c, PortId(999), &lm, &sm).is_err());
        let input = c.input_ports().next().unwrap().id;
        assert!(reverse_characterize(&c, input, &lm, &sm).is_err());
    }

    #[test]
    fn cyclic_graph_is_rejected() {
        let mut c = straight_circuit(10.0);
        let a = c.ports[0].position;
        let b = c.ports[1].position;
        c.segments.push(Segment {
            id: SegmentId(1),
            from: ElementRef::Port(PortId(1)),
            to: ElementRef::Port(PortId(0)),
            path: WaveguidePath::straight(b, a, 1.2).unwrap(),
        });
        let e = propagate_power(
            &c,
            &PowerMap::single(PortId(0), 1.0),
            &LossModel::lossless(),
            &SplitModel::default(),
        );
        assert!(matches!(e, Err(Error::InvalidCircuit(_))));
    }

    #[test]
    fn reverse_support_equals_kernel_pattern() {
        let ks = crate::haar::KernelSet::default_set();
        let unit = generate_filter_unit(&ks, &UnitGeometry::default()).unwrap().circuit;
        let lm = LossModel::new(2.71, 1.14, 1.67, 80.0).unwrap();
        let sm = SplitModel::default();
        for (f, kernel) in ks.kernels().iter().enumerate() {
            let (or, oc) = ks.output_grid(f);
            let out = unit
                .output_ports()
                .find(|p| p.grid_index == (or as i32, oc as i32))
                .unwrap()
                .id;
            let back = reverse_characterize(&unit, out, &lm, &sm).unwrap();
            for p in unit.input_ports() {
                let lit = back.get(p.id) > 0.0;
                let expected = kernel.get(p.grid_index.0 as usize, p.grid_index.1 as usize);
                assert_eq!(lit, expected, "filter {f} input {:?}", p.grid_index);
            }
        }
    }

    #[test]
    fn reverse_single_and_full_filters() {
        let ks = crate::haar::KernelSet::default_set();
        let unit = generate_filter_unit(&ks, &UnitGeometry::default()).unwrap().circuit;
        let lossless = LossModel::lossless();
        let sm = SplitModel::default();
        // F9: center pixel only.
        let (or, oc) = ks.output_grid(8);
        let out = unit
            .output_ports()
            .find(|p| p.grid_index == (or as i32, oc as i32))
            .unwrap()
            .id;
        let back = reverse_characterize(&unit, out, &lossless, &sm).unwrap();
        let lit: Vec<PortId> = back.iter().filter(|(_, v)| *v > 0.0).map(|(p, _)| p).collect();
        assert_eq!(lit.len(), 1);
        // F1: every input lit equally under a lossless model.
        let (or, oc) = ks.output_grid(0);
        let out = unit
            .output_ports()
            .find(|p| p.grid_index == (or as i32, oc as i32))
            .unwrap()
            .id;
        let back = reverse_characterize(&unit, out, &lossless, &sm).unwrap();
        let values: Vec<f64> = back.iter().map(|(_, v)| v).collect();
        assert_eq!(values.len(), 9);
        for v in &values {
            assert!((v - values[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn reciprocity_matrix_transpose() {
        let ks = crate::haar::KernelSet::default_set();
        let unit = generate_filter_unit(&ks, &UnitGeometry::default()).unwrap().circuit;
        let lm = LossModel::new(2.71, 1.14, 1.67, 82.0).unwrap();
        let sm = SplitModel::default();
        let (_, _, t) = transmission_matrix(&unit, &lm, &sm).unwrap();
        let (_, _, r) = reverse_matrix(&unit, &lm, &sm).unwrap();
        for (row_o, t_row) in t.iter().enumerate() {
            for (col_i, &t_oi) in t_row.iter().enumerate() {
                let r_io = r[col_i][row_o];
                let denom = t_oi.abs().max(1e-300);
                assert!(
                    ((t_oi - r_io) / denom).abs() < 1e-12,
                    "asymmetry at out {row_o}, in {col_i}"
                );
            }
        }
    }

    #[test]
    fn convolve_all_ones_image() {
        let ks = crate::haar::KernelSet::default_set();
        let c = tile_filter_array(&ks, 21, &UnitGeometry::default()).unwrap();
        let image = vec![vec![1.0; 21]; 21];
        let fm = haar_convolve(&c, &image, &LossModel::lossless(), &SplitModel::default())
            .unwrap();
        assert_eq!((fm.filters, fm.rows, fm.cols), (9, 7, 7));
        for u in 0..7 {
            for v in 0..7 {
                assert!((fm.get(0, u, v) - 9.0).abs() < 1e-12); // F1 all ones
                assert!((fm.get(8, u, v) - 1.0).abs() < 1e-12); // F9 center pixel
            }
        }
    }

    #[test]
    fn convolve_diagonal_against_left_column() {
        let ks = crate::haar::KernelSet::default_set();
        let c = tile_filter_array(&ks, 3, &UnitGeometry::default()).unwrap();
        let mut image = vec![vec![0.0; 3]; 3];
        for i in 0..3 {
            image[i][i] = 1.0;
        }
        let fm =
            haar_convolve(&c, &image, &LossModel::lossless(), &SplitModel::default()).unwrap();
        // F4 is the left column: only the (0,0) diagonal pixel overlaps.
        assert!((fm.get(3, 0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn convolve_matches_direct_convolution() {
        let ks = crate::haar::KernelSet::default_set();
        let c = tile_filter_array(&ks, 9, &UnitGeometry::default()).unwrap();
        let image: Vec<Vec<f64>> = (0..9)
            .map(|r| (0..9).map(|cx| ((r * 31 + cx * 17) % 13) as f64 / 3.0).collect())
            .collect();
        let fm =
            haar_convolve(&c, &image, &LossModel::lossless(), &SplitModel::default()).unwrap();
        for (f, kernel) in ks.kernels().iter().enumerate() {
            for u in 0..3 {
                for v in 0..3 {
                    let mut expect = 0.0;
                    for (p, q) in kernel.on_pixels() {
                        expect += image[3 * u + p][3 * v + q];
                    }
                    let got = fm.get(f, u, v);
                    let denom = expect.abs().max(1e-300);
                    assert!(((got - expect) / denom).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn convolve_rejects_bad_images() {
        let ks = crate::haar::KernelSet::default_set();
        let c = tile_filter_array(&ks, 3, &UnitGeometry::default()).unwrap();
        let bad = vec![vec![1.0; 4]; 4];
        assert!(haar_convolve(&c, &bad, &LossModel::lossless(), &SplitModel::default()).is_err());
        let negative = vec![
            vec![1.0, 1.0, 1.0],
            vec![1.0, -0.5, 1.0],
            vec![1.0, 1.0, 1.0],
        ];
        assert!(
            haar_convolve(&c, &negative, &LossModel::lossless(), &SplitModel::default()).is_err()
        );
    }

    #[test]
    fn split_model_validation() {
        assert!(SplitModel::constant(0.0).is_err());
        assert!(SplitModel::constant(1.0).is_err());
        assert!(SplitModel::per_layer(vec![]).is_err());
        assert!(SplitModel::uniform(1).is_err());
        let sm = SplitModel::per_layer(vec![0.5, 0.3]).unwrap();
        assert_eq!(sm.central_fraction(1), 0.5);
        assert_eq!(sm.central_fraction(2), 0.3);
        assert_eq!(sm.central_fraction(7), 0.3);
    }

    #[test]
    fn effective_length_scales_with_layers() {
        let sm = SplitModel::default();
        let l9 = effective_path_length(&default_coupler(1), &sm).unwrap();
        let l81 = effective_path_length(&default_coupler(2), &sm).unwrap();
        assert!(l9 > 80.0 && l9 < 90.0, "1x9 effective length {l9}");
        assert!((l81 / l9 - 4.0).abs() < 1e-6, "layer similarity broken: {}", l81 / l9);
        let _ = HaarKernel::from_rows([[1; 3]; 3]).unwrap();
    }
}
