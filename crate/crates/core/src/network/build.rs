use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{
    Depot, Edge, EdgeKind, Layer, MultiModalGraph, Node, RoadTable, TransitLine, Zones,
};
use crate::error::{Error, Result};
use crate::util::OrdF64;

/// Assembles and validates a graph. Line segments/offsets and depot service
/// areas are recomputed; whatever the caller put there is ignored.
pub fn from_parts(
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    mut lines: Vec<TransitLine>,
    depots: Vec<(usize, u32)>,
    zones: Zones,
    transfer_time_s: f64,
) -> Result<MultiModalGraph> {
    let bad = |m: String| Err(Error::Network(m));
    if zones.classes.len() != zones.count() {
        return bad(format!(
            "{} zone classes for {} zones",
            zones.classes.len(),
            zones.count()
        ));
    }
    for (i, n) in nodes.iter().enumerate() {
        if n.id != i {
            return bad(format!("node at index {i} has id {}", n.id));
        }
        match zones.zone_of(n.pos) {
            Some(z) if z == n.zone => {}
            Some(z) => return bad(format!("node {i} tagged zone {} but lies in zone {z}", n.zone)),
            None => return bad(format!("node {i} lies outside the network extent")),
        }
    }
    let mut adjacency = vec![Vec::new(); nodes.len()];
    for (i, e) in edges.iter().enumerate() {
        if e.id != i {
            return bad(format!("edge at index {i} has id {}", e.id));
        }
        if e.a >= nodes.len() || e.b >= nodes.len() || e.a == e.b {
            return bad(format!("edge {i} has invalid endpoints ({}, {})", e.a, e.b));
        }
        if !(e.length > 0.0) || e.base_time < 0.0 {
            return bad(format!("edge {i} has nonpositive length"));
        }
        let (la, lb) = (nodes[e.a].layer, nodes[e.b].layer);
        let ok = match e.kind {
            EdgeKind::Connection => la != lb,
            EdgeKind::Vehicle => la == Layer::Vehicle && lb == Layer::Vehicle,
            EdgeKind::Metro => la == Layer::Metro && lb == Layer::Metro,
            EdgeKind::Train => la == Layer::Train && lb == Layer::Train,
            EdgeKind::Bus => la == Layer::Bus && lb == Layer::Bus,
        };
        if !ok {
            return bad(format!("edge {i} of kind {:?} joins {la:?} and {lb:?}", e.kind));
        }
        adjacency[e.a].push((i, e.b));
        adjacency[e.b].push((i, e.a));
    }

    let road_nodes: Vec<usize> = nodes
        .iter()
        .filter(|n| n.layer == Layer::Vehicle)
        .map(|n| n.id)
        .collect();
    let mut road_index = vec![None; nodes.len()];
    for (i, &n) in road_nodes.iter().enumerate() {
        road_index[n] = Some(i);
    }
    let mut station_road = vec![None; nodes.len()];
    let mut stations_at = vec![Vec::new(); nodes.len()];
    for n in nodes.iter().filter(|n| n.layer != Layer::Vehicle) {
        let roads: Vec<usize> = adjacency[n.id]
            .iter()
            .filter(|&&(e, o)| edges[e].kind == EdgeKind::Connection && road_index[o].is_some())
            .map(|&(_, o)| o)
            .collect();
        if roads.len() != 1 {
            return bad(format!(
                "station {} must connect to exactly one road node, found {}",
                n.id,
                roads.len()
            ));
        }
        station_road[n.id] = Some(roads[0]);
        stations_at[roads[0]].push(n.id);
    }

    for (li, line) in lines.iter_mut().enumerate() {
        line.id = li;
        if line.stations.len() < 2 || !(line.headway_s > 0.0) {
            return bad(format!("line {} needs two stations and a positive headway", line.name));
        }
        let layer = line.mode.layer();
        line.segments.clear();
        line.offsets = vec![0.0];
        for w in line.stations.windows(2) {
            for &s in w {
                if s >= nodes.len() || nodes[s].layer != layer {
                    return bad(format!("line {} station {s} is not on the {layer:?} layer", line.name));
                }
            }
            let seg = adjacency[w[0]].iter().find(|&&(e, o)| {
                o == w[1] && edges[e].kind == line.mode.edge_kind() && edges[e].line == Some(li)
            });
            let Some(&(e, _)) = seg else {
                return bad(format!("line {} has no edge between {} and {}", line.name, w[0], w[1]));
            };
            line.segments.push(e);
            let last = *line.offsets.last().unwrap();
            line.offsets.push(last + edges[e].length);
        }
    }

    let road = road_table(&edges, &adjacency, &road_nodes, &road_index);
    let n = road.n;
    if n == 0 {
        return bad("no vehicle-layer nodes".into());
    }
    if road.dist[..n].iter().any(|d| !d.is_finite()) {
        return bad("vehicle layer is not connected".into());
    }

    let mut depot_list = Vec::with_capacity(depots.len());
    for (id, &(node, capacity)) in depots.iter().enumerate() {
        if road_index.get(node).copied().flatten().is_none() {
            return bad(format!("depot {id} node {node} is not on the vehicle layer"));
        }
        depot_list.push(Depot { id, node, capacity, service_area: Vec::new() });
    }
    let mut area = vec![0; n];
    if !depot_list.is_empty() {
        for (ri, &rn) in road_nodes.iter().enumerate() {
            let mut best = (usize::MAX, f64::INFINITY);
            for d in &depot_list {
                let dist = road.dist[road_index[d.node].unwrap() * n + ri];
                if dist < best.1 {
                    best = (d.id, dist);
                }
            }
            if best.0 == usize::MAX {
                return Err(Error::Unreachable(rn as u32));
            }
            area[ri] = best.0;
            depot_list[best.0].service_area.push(rn);
        }
    }

    Ok(MultiModalGraph {
        active: vec![true; edges.len()],
        nodes,
        edges,
        lines,
        depots: depot_list,
        zones,
        transfer_time_s,
        adjacency,
        road_nodes,
        road_index,
        station_road,
        stations_at,
        area,
        road,
    })
}

fn road_table(
    edges: &[Edge],
    adjacency: &[Vec<(usize, usize)>],
    road_nodes: &[usize],
    road_index: &[Option<usize>],
) -> RoadTable {
    let n = road_nodes.len();
    let mut dist = vec![f64::INFINITY; n * n];
    let mut pred = vec![u32::MAX; n * n];
    for s in 0..n {
        let row = s * n;
        dist[row + s] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((OrdF64(0.0), s)));
        while let Some(Reverse((OrdF64(d), u))) = heap.pop() {
            if d > dist[row + u] {
                continue;
            }
            for &(e, o) in &adjacency[road_nodes[u]] {
                if edges[e].kind != EdgeKind::Vehicle {
                    continue;
                }
                let v = road_index[o].unwrap();
                let nd = d + edges[e].length;
                if nd < dist[row + v] {
                    dist[row + v] = nd;
                    pred[row + v] = u as u32;
                    heap.push(Reverse((OrdF64(nd), v)));
                }
            }
        }
    }
    RoadTable { n, dist, pred }
}
