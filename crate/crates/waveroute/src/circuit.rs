//! Ports, bifurcation nodes, and waveguide segments forming a routing DAG.
//!
//! A [`Circuit`] is immutable once built: generators assemble one, everything
//! downstream (validation, power flow, export) only reads it. Segments are
//! directed from the input plane toward the output plane.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point3, WaveguidePath};
use crate::haar::KernelSet;

macro_rules! id_type {
    ($name:ident, $prefix:literal) => {
        #[derive(
            Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(PortId, "p");
id_type!(NodeId, "n");
id_type!(SegmentId, "s");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortRole {
    Input,
    Output,
}

/// An optical input or output on its dedicated plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Port {
    pub id: PortId,
    pub role: PortRole,
    /// Integer position on the port plane's grid.
    pub grid_index: (i32, i32),
    pub position: Point3,
}

/// A point where one waveguide splits into several.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BifurcationNode {
    pub id: NodeId,
    /// 1-based bifurcation layer index, counted from the input side.
    pub layer: u32,
    pub position: Point3,
}

/// Reference to a segment endpoint: either a port or a bifurcation node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementRef {
    Port(PortId),
    Node(NodeId),
}

impl fmt::Display for ElementRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementRef::Port(p) => write!(f, "{p}"),
            ElementRef::Node(n) => write!(f, "{n}"),
        }
    }
}

impl std::str::FromStr for ElementRef {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (kind, num) = s.split_at(1.min(s.len()));
        let id: u32 = num
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad element ref '{s}'")))?;
        match kind {
            "p" => Ok(ElementRef::Port(PortId(id))),
            "n" => Ok(ElementRef::Node(NodeId(id))),
            _ => Err(Error::InvalidParameter(format!("bad element ref '{s}'"))),
        }
    }
}

impl Serialize for ElementRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ElementRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A directed waveguide connection with its centerline geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub id: SegmentId,
    pub from: ElementRef,
    pub to: ElementRef,
    pub path: WaveguidePath,
}

/// A complete routed interconnect.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub name: String,
    /// Generator parameters, recorded for reports and reproducibility.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
    pub ports: Vec<Port>,
    pub nodes: Vec<BifurcationNode>,
    pub segments: Vec<Segment>,
    /// Present on filter circuits; carries the wiring table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernels: Option<KernelSet>,
}

impl Circuit {
    pub fn port(&self, id: PortId) -> Option<&Port> {
        self.ports.iter().find(|p| p.id == id)
    }

    pub fn node(&self, id: NodeId) -> Option<&BifurcationNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn input_ports(&self) -> impl Iterator<Item = &Port> {
        self.ports.iter().filter(|p| p.role == PortRole::Input)
    }

    pub fn output_ports(&self) -> impl Iterator<Item = &Port> {
        self.ports.iter().filter(|p| p.role == PortRole::Output)
    }

    pub fn position_of(&self, r: ElementRef) -> Option<Point3> {
        match r {
            ElementRef::Port(p) => self.port(p).map(|p| p.position),
            ElementRef::Node(n) => self.node(n).map(|n| n.position),
        }
    }

    /// Outgoing adjacency: element -> segment indices leaving it.
    pub fn outgoing_index(&self) -> HashMap<ElementRef, Vec<usize>> {
        let mut map: HashMap<ElementRef, Vec<usize>> = HashMap::new();
        for (i, s) in self.segments.iter().enumerate() {
            map.entry(s.from).or_default().push(i);
        }
        map
    }

    /// Incoming adjacency: element -> segment indices arriving at it.
    pub fn incoming_index(&self) -> HashMap<ElementRef, Vec<usize>> {
        let mut map: HashMap<ElementRef, Vec<usize>> = HashMap::new();
        for (i, s) in self.segments.iter().enumerate() {
            map.entry(s.to).or_default().push(i);
        }
        map
    }

    /// Child elements of a node, derived from the segment list.
    pub fn children_of(&self, node: NodeId) -> Vec<ElementRef> {
        self.segments
            .iter()
            .filter(|s| s.from == ElementRef::Node(node))
            .map(|s| s.to)
            .collect()
    }

    /// Kahn topological order over ports and nodes. Errors on a cycle.
    pub fn topo_order(&self) -> Result<Vec<ElementRef>> {
        let mut vertices: HashSet<ElementRef> = HashSet::new();
        for p in &self.ports {
            vertices.insert(ElementRef::Port(p.id));
        }
        for n in &self.nodes {
            vertices.insert(ElementRef::Node(n.id));
        }
        let mut indegree: HashMap<ElementRef, usize> =
            vertices.iter().map(|&v| (v, 0)).collect();
        let mut out: HashMap<ElementRef, Vec<ElementRef>> = HashMap::new();
        for s in &self.segments {
            if !vertices.contains(&s.from) || !vertices.contains(&s.to) {
                return Err(Error::InvalidCircuit(format!(
                    "segment {} references a missing element",
                    s.id
                )));
            }
            *indegree.get_mut(&s.to).unwrap() += 1;
            out.entry(s.from).or_default().push(s.to);
        }
        // Deterministic order: seed the queue sorted.
        let mut roots: Vec<ElementRef> = indegree
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&v, _)| v)
            .collect();
        roots.sort();
        let mut queue: VecDeque<ElementRef> = roots.into();
        let mut order = Vec::with_capacity(vertices.len());
        while let Some(v) = queue.pop_front() {
            order.push(v);
            if let Some(next) = out.get(&v) {
                for &w in next {
                    let d = indegree.get_mut(&w).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        queue.push_back(w);
                    }
                }
            }
        }
        if order.len() != vertices.len() {
            return Err(Error::InvalidCircuit(
                "segment graph contains a cycle".into(),
            ));
        }
        Ok(order)
    }

    pub fn is_dag(&self) -> bool {
        self.topo_order().is_ok()
    }

    /// Structural invariants: distinct same-role port positions, one plane per
    /// role, acyclic segment graph, every output reachable from an input, and
    /// node fan-out bounded by the declared branching ratio when present.
    pub fn validate_structure(&self) -> Result<()> {
        for role in [PortRole::Input, PortRole::Output] {
            let ports: Vec<&Port> = self.ports.iter().filter(|p| p.role == role).collect();
            let mut seen: HashSet<(i64, i64, i64)> = HashSet::new();
            for p in &ports {
                let key = quantize(p.position);
                if !seen.insert(key) {
                    return Err(Error::InvalidCircuit(format!(
                        "duplicate {role:?} port position at {:?}",
                        p.position
                    )));
                }
            }
            if let Some(first) = ports.first() {
                let z = first.position.z;
                if ports.iter().any(|p| (p.position.z - z).abs() > 1e-6) {
                    return Err(Error::InvalidCircuit(format!(
                        "{role:?} ports do not share a plane"
                    )));
                }
            }
        }
        let in_z = self.input_ports().next().map(|p| p.position.z);
        let out_z = self.output_ports().next().map(|p| p.position.z);
        if let (Some(a), Some(b)) = (in_z, out_z) {
            if (a - b).abs() < 1e-6 {
                return Err(Error::InvalidCircuit(
                    "input and output planes coincide".into(),
                ));
            }
        }

        let order = self.topo_order()?;

        // Outputs reachable from inputs.
        let outgoing = self.outgoing_index();
        let mut reachable: HashSet<ElementRef> = HashSet::new();
        let mut queue: VecDeque<ElementRef> =
            self.input_ports().map(|p| ElementRef::Port(p.id)).collect();
        for &v in &queue {
            reachable.insert(v);
        }
        while let Some(v) = queue.pop_front() {
            if let Some(segs) = outgoing.get(&v) {
                for &i in segs {
                    let w = self.segments[i].to;
                    if reachable.insert(w) {
                        queue.push_back(w);
                    }
                }
            }
        }
        for p in self.output_ports() {
            if !reachable.contains(&ElementRef::Port(p.id)) {
                return Err(Error::InvalidCircuit(format!(
                    "output port {} unreachable from any input",
                    p.id
                )));
            }
        }

        if let Some(b) = self.params.get("b").and_then(|v| v.parse::<usize>().ok()) {
            for n in &self.nodes {
                let fanout = self.children_of(n.id).len();
                if fanout > b {
                    return Err(Error::InvalidCircuit(format!(
                        "node {} has {fanout} children, exceeds branching ratio {b}",
                        n.id
                    )));
                }
            }
        }

        let _ = order;
        Ok(())
    }

    /// Grid extents of the output plane: ((i_min, i_max), (j_min, j_max)).
    pub fn output_grid_extent(&self) -> Option<((i32, i32), (i32, i32))> {
        let mut it = self.output_ports();
        let first = it.next()?;
        let mut i_range = (first.grid_index.0, first.grid_index.0);
        let mut j_range = (first.grid_index.1, first.grid_index.1);
        for p in it {
            i_range = (i_range.0.min(p.grid_index.0), i_range.1.max(p.grid_index.0));
            j_range = (j_range.0.min(p.grid_index.1), j_range.1.max(p.grid_index.1));
        }
        Some((i_range, j_range))
    }

    pub fn counts(&self) -> (usize, usize) {
        (
            self.input_ports().count(),
            self.output_ports().count(),
        )
    }
}

pub(crate) fn quantize(p: Point3) -> (i64, i64, i64) {
    // 1e-6 um resolution; ports closer than that are the same physical port.
    (
        (p.x * 1e6).round() as i64,
        (p.y * 1e6).round() as i64,
        (p.z * 1e6).round() as i64,
    )
}
