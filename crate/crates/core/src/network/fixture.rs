//! Versioned JSON network fixture.
//!
//! ```json
//! { "format": 1,
//!   "zones": { "size_m": 5000, "nx": 6, "ny": 6, "classes": ["S", "I", "U", ...] },
//!   "transfer_time_s": 60,
//!   "nodes": [ { "id": 0, "layer": "vehicle", "pos": { "x": 0, "y": 0 }, "zone": 0 } ],
//!   "edges": [ { "id": 0, "a": 0, "b": 1, "kind": "vehicle", "length": 500,
//!                "base_time": 0, "line": null } ],
//!   "lines": [ { "name": "T1", "mode": "train", "stations": [576, 577], "headway_s": 1200 } ],
//!   "depots": [ { "node": 12, "capacity": 40 } ] }
//! ```
//!
//! Line segments and depot service areas are derived on load.

use serde::{Deserialize, Serialize};

use super::{from_parts, Edge, MultiModalGraph, Node, TransitLine, TransitMode, Zones};
use crate::error::{Error, Result};

pub const FORMAT: u32 = 1;

#[derive(Serialize, Deserialize)]
struct FixtureLine {
    name: String,
    mode: TransitMode,
    stations: Vec<usize>,
    headway_s: f64,
}

#[derive(Serialize, Deserialize)]
struct FixtureDepot {
    node: usize,
    capacity: u32,
}

#[derive(Serialize, Deserialize)]
struct Fixture {
    format: u32,
    zones: Zones,
    transfer_time_s: f64,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    lines: Vec<FixtureLine>,
    depots: Vec<FixtureDepot>,
}

pub fn to_json(g: &MultiModalGraph) -> Result<String> {
    let fx = Fixture {
        format: FORMAT,
        zones: g.zones.clone(),
        transfer_time_s: g.transfer_time_s,
        nodes: g.nodes.clone(),
        edges: g.edges.clone(),
        lines: g
            .lines
            .iter()
            .map(|l| FixtureLine {
                name: l.name.clone(),
                mode: l.mode,
                stations: l.stations.clone(),
                headway_s: l.headway_s,
            })
            .collect(),
        depots: g
            .depots
            .iter()
            .map(|d| FixtureDepot { node: d.node, capacity: d.capacity })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&fx)?)
}

pub fn from_json(text: &str) -> Result<MultiModalGraph> {
    let fx: Fixture = serde_json::from_str(text)?;
    if fx.format != FORMAT {
        return Err(Error::Network(format!("unsupported fixture format {}", fx.format)));
    }
    let lines = fx
        .lines
        .into_iter()
        .enumerate()
        .map(|(id, l)| TransitLine {
            id,
            name: l.name,
            mode: l.mode,
            stations: l.stations,
            headway_s: l.headway_s,
            segments: Vec::new(),
            offsets: Vec::new(),
        })
        .collect();
    let depots = fx.depots.iter().map(|d| (d.node, d.capacity)).collect();
    from_parts(fx.nodes, fx.edges, lines, depots, fx.zones, fx.transfer_time_s)
}
