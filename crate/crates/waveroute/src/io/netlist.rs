//! JSON netlist: the canonical interchange format for circuits.
//!
//! Layout: a `meta` block (name, units, generator parameters), then `ports`,
//! `nodes`, and `segments` (id, from, to, diameter, control points), plus an
//! optional `kernels` block on filter circuits. Units are always micrometers,
//! declared in `meta`; the importer refuses anything else. Export followed by
//! import is the identity on circuits.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuit::{BifurcationNode, Circuit, ElementRef, Port, Segment, SegmentId};
use crate::error::{Error, Result};
use crate::geom::{Point3, WaveguidePath};
use crate::haar::KernelSet;

#[derive(Serialize, Deserialize)]
struct NetlistDoc {
    meta: Meta,
    ports: Vec<Port>,
    nodes: Vec<BifurcationNode>,
    segments: Vec<SegmentRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kernels: Option<KernelSet>,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    name: String,
    units: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    params: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct SegmentRecord {
    id: SegmentId,
    from: ElementRef,
    to: ElementRef,
    diameter: f64,
    control_points: Vec<Point3>,
}

pub fn netlist_to_string(c: &Circuit) -> Result<String> {
    let doc = NetlistDoc {
        meta: Meta {
            name: c.name.clone(),
            units: "um".into(),
            params: c.params.clone(),
        },
        ports: c.ports.clone(),
        nodes: c.nodes.clone(),
        segments: c
            .segments
            .iter()
            .map(|s| SegmentRecord {
                id: s.id,
                from: s.from,
                to: s.to,
                diameter: s.path.diameter(),
                control_points: s.path.control_points().to_vec(),
            })
            .collect(),
        kernels: c.kernels.clone(),
    };
    let mut out = serde_json::to_string_pretty(&doc)?;
    out.push('\n');
    Ok(out)
}

pub fn netlist_from_str(s: &str) -> Result<Circuit> {
    let doc: NetlistDoc = serde_json::from_str(s)?;
    if doc.meta.units != "um" {
        return Err(Error::InvalidParameter(format!(
            "netlist units must be 'um', got '{}'",
            doc.meta.units
        )));
    }
    let segments = doc
        .segments
        .into_iter()
        .map(|r| {
            Ok(Segment {
                id: r.id,
                from: r.from,
                to: r.to,
                path: WaveguidePath::new(r.control_points, r.diameter)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let circuit = Circuit {
        name: doc.meta.name,
        params: doc.meta.params,
        ports: doc.ports,
        nodes: doc.nodes,
        segments,
        kernels: doc.kernels,
    };
    // Dangling references are corrupt input, catch them here.
    for s in &circuit.segments {
        for r in [s.from, s.to] {
            if circuit.position_of(r).is_none() {
                return Err(Error::InvalidCircuit(format!(
                    "segment {} references missing element {r}",
                    s.id
                )));
            }
        }
    }
    Ok(circuit)
}

pub fn export_netlist(c: &Circuit, path: &Path) -> Result<()> {
    super::write_atomic(path, netlist_to_string(c)?.as_bytes())
}

pub fn import_netlist(path: &Path) -> Result<Circuit> {
    netlist_from_str(&std::fs::read_to_string(path)?)
}
