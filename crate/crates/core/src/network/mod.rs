//! Layered multi-modal network: road (vehicle) layer plus metro, train and bus
//! lines whose stations are joined to co-located road intersections by
//! walking connection edges.

mod build;
pub mod fixture;
pub mod grid;
mod path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use build::from_parts;
pub use grid::{build_manhattan_grid, DepotSpec, GridConfig, LineSpec, ZoneLayout};
pub use path::{dijkstra, shortest_path, LayerSet, Path};

pub type NodeId = usize;
pub type EdgeId = usize;
pub type LineId = usize;
pub type DepotId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Metro,
    Train,
    Bus,
    Vehicle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Metro,
    Train,
    Bus,
    Vehicle,
    Connection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitMode {
    Metro,
    Train,
    Bus,
}

impl TransitMode {
    pub const ALL: [TransitMode; 3] = [TransitMode::Metro, TransitMode::Train, TransitMode::Bus];

    pub fn layer(self) -> Layer {
        match self {
            TransitMode::Metro => Layer::Metro,
            TransitMode::Train => Layer::Train,
            TransitMode::Bus => Layer::Bus,
        }
    }

    pub fn edge_kind(self) -> EdgeKind {
        match self {
            TransitMode::Metro => EdgeKind::Metro,
            TransitMode::Train => EdgeKind::Train,
            TransitMode::Bus => EdgeKind::Bus,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TransitMode::Metro => "metro",
            TransitMode::Train => "train",
            TransitMode::Bus => "bus",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ZoneClass {
    #[serde(rename = "U")]
    Urban,
    #[serde(rename = "I")]
    Intermediate,
    #[serde(rename = "S")]
    Suburban,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: Point, f: f64) -> Point {
        Point::new(self.x + (other.x - self.x) * f, self.y + (other.y - self.y) * f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub layer: Layer,
    pub pos: Point,
    pub zone: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    pub a: NodeId,
    pub b: NodeId,
    pub kind: EdgeKind,
    pub length: f64,
    /// Fixed traversal time in seconds; nonzero only for connection edges.
    pub base_time: f64,
    pub line: Option<LineId>,
}

impl Edge {
    pub fn other(&self, n: NodeId) -> NodeId {
        if n == self.a {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitLine {
    pub id: LineId,
    pub name: String,
    pub mode: TransitMode,
    pub stations: Vec<NodeId>,
    pub headway_s: f64,
    /// `segments[i]` joins `stations[i]` and `stations[i + 1]`.
    pub segments: Vec<EdgeId>,
    /// Distance along the line of each station from the first one.
    pub offsets: Vec<f64>,
}

impl TransitLine {
    pub fn length(&self) -> f64 {
        *self.offsets.last().unwrap_or(&0.0)
    }

    pub fn station_index(&self, node: NodeId) -> Option<usize> {
        self.stations.iter().position(|&s| s == node)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Depot {
    pub id: DepotId,
    pub node: NodeId,
    pub capacity: u32,
    pub service_area: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Zones {
    pub size_m: f64,
    pub nx: usize,
    pub ny: usize,
    pub classes: Vec<ZoneClass>,
}

impl Zones {
    pub fn count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn extent(&self) -> (f64, f64) {
        (self.size_m * self.nx as f64, self.size_m * self.ny as f64)
    }

    /// Zone containing `p`; points on the far boundary belong to the last zone.
    pub fn zone_of(&self, p: Point) -> Option<usize> {
        let (w, h) = self.extent();
        if !(0.0..=w).contains(&p.x) || !(0.0..=h).contains(&p.y) {
            return None;
        }
        let zx = ((p.x / self.size_m).floor() as usize).min(self.nx - 1);
        let zy = ((p.y / self.size_m).floor() as usize).min(self.ny - 1);
        Some(zy * self.nx + zx)
    }
}

/// All-pairs road distances with predecessor table.
#[derive(Clone, Debug, PartialEq)]
pub struct RoadTable {
    n: usize,
    dist: Vec<f64>,
    pred: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiModalGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub lines: Vec<TransitLine>,
    pub depots: Vec<Depot>,
    pub zones: Zones,
    pub transfer_time_s: f64,
    adjacency: Vec<Vec<(EdgeId, NodeId)>>,
    active: Vec<bool>,
    road_nodes: Vec<NodeId>,
    road_index: Vec<Option<usize>>,
    station_road: Vec<Option<NodeId>>,
    stations_at: Vec<Vec<NodeId>>,
    area: Vec<DepotId>,
    road: RoadTable,
}

impl MultiModalGraph {
    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id]
    }

    pub fn neighbors(&self, id: NodeId) -> &[(EdgeId, NodeId)] {
        &self.adjacency[id]
    }

    pub fn is_active(&self, e: EdgeId) -> bool {
        self.active[e]
    }

    pub fn active_mask(&self) -> &[bool] {
        &self.active
    }

    pub fn active_edge_count(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    pub fn deactivate(&mut self, edges: &[EdgeId]) {
        for &e in edges {
            self.active[e] = false;
        }
    }

    pub fn activate(&mut self, edges: &[EdgeId]) {
        for &e in edges {
            self.active[e] = true;
        }
    }

    pub fn restore_all(&mut self) {
        self.active.iter_mut().for_each(|a| *a = true);
    }

    /// Vehicle-layer intersections in id order.
    pub fn road_nodes(&self) -> &[NodeId] {
        &self.road_nodes
    }

    pub fn road_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| e.kind == EdgeKind::Vehicle).count()
    }

    pub fn is_road(&self, n: NodeId) -> bool {
        self.road_index[n].is_some()
    }

    /// Road intersection a node sits on: itself for road nodes, the
    /// co-located intersection for stations.
    pub fn road_node_of(&self, n: NodeId) -> NodeId {
        match self.road_index[n] {
            Some(_) => n,
            None => self.station_road[n].expect("station without road node"),
        }
    }

    /// Stations co-located with a road intersection.
    pub fn stations_at(&self, road: NodeId) -> &[NodeId] {
        &self.stations_at[road]
    }

    /// Shortest road distance in meters, `INFINITY` when disconnected.
    pub fn road_dist(&self, a: NodeId, b: NodeId) -> f64 {
        let (i, j) = (self.ri(a), self.ri(b));
        self.road.dist[i * self.road.n + j]
    }

    /// Road node sequence from `a` to `b`, both inclusive.
    pub fn road_path(&self, a: NodeId, b: NodeId) -> Vec<NodeId> {
        let (i, j) = (self.ri(a), self.ri(b));
        let n = self.road.n;
        let mut out = vec![b];
        let mut cur = j;
        while cur != i {
            let p = self.road.pred[i * n + cur];
            if p == u32::MAX {
                return Vec::new();
            }
            cur = p as usize;
            out.push(self.road_nodes[cur]);
        }
        out.reverse();
        out
    }

    fn ri(&self, n: NodeId) -> usize {
        self.road_index[self.road_node_of(n)].unwrap()
    }

    /// Service-area depot of a road node.
    pub fn area_of(&self, n: NodeId) -> DepotId {
        self.area[self.ri(n)]
    }

    /// Depot minimizing road distance, lowest id on ties.
    pub fn nearest_depot(&self, n: NodeId) -> Result<(&Depot, f64)> {
        if self.road_index.get(n).copied().flatten().is_none() {
            return Err(Error::Network(format!("node {n} is not on the vehicle layer")));
        }
        let mut best: Option<(DepotId, f64)> = None;
        for d in &self.depots {
            let dist = self.road_dist(d.node, n);
            if dist.is_finite() && best.is_none_or(|(_, b)| dist < b) {
                best = Some((d.id, dist));
            }
        }
        best.map(|(d, dist)| (&self.depots[d], dist))
            .ok_or(Error::Unreachable(n as u32))
    }

    pub fn zone_of_node(&self, n: NodeId) -> usize {
        self.nodes[n].zone
    }

    /// Edges of train lines incident to any of `stations`.
    pub fn edges_incident_to(&self, stations: &[NodeId], kind: EdgeKind) -> Vec<EdgeId> {
        let mut out: Vec<EdgeId> = stations
            .iter()
            .flat_map(|&s| self.adjacency[s].iter().map(|(e, _)| *e))
            .filter(|&e| self.edges[e].kind == kind)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Road lane-length per zone in meters; edges straddling zones are split
    /// by their endpoint zones.
    pub fn zone_road_length(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.zones.count()];
        for e in self.edges.iter().filter(|e| e.kind == EdgeKind::Vehicle) {
            out[self.nodes[e.a].zone] += e.length / 2.0;
            out[self.nodes[e.b].zone] += e.length / 2.0;
        }
        out
    }
}
