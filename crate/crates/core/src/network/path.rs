use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{Edge, EdgeId, EdgeKind, MultiModalGraph, NodeId};
use crate::util::OrdF64;

/// Subset of mode layers a search may use. Connection edges are always
/// allowed by [`shortest_path`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct LayerSet(u8);

impl LayerSet {
    pub const EMPTY: LayerSet = LayerSet(0);
    pub const ROAD: LayerSet = LayerSet(1);
    pub const METRO: LayerSet = LayerSet(2);
    pub const TRAIN: LayerSet = LayerSet(4);
    pub const BUS: LayerSet = LayerSet(8);
    pub const TRANSIT: LayerSet = LayerSet(2 | 4 | 8);

    pub fn union(self, other: LayerSet) -> LayerSet {
        LayerSet(self.0 | other.0)
    }

    pub fn contains(self, kind: EdgeKind) -> bool {
        match kind {
            EdgeKind::Vehicle => self.0 & 1 != 0,
            EdgeKind::Metro => self.0 & 2 != 0,
            EdgeKind::Train => self.0 & 4 != 0,
            EdgeKind::Bus => self.0 & 8 != 0,
            EdgeKind::Connection => true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeId>,
    pub cost: f64,
}

/// Minimum-cost path restricted to `layers` plus connection edges, skipping
/// deactivated edges. `weight` gives the nonnegative cost of an edge.
pub fn shortest_path(
    g: &MultiModalGraph,
    from: NodeId,
    to: NodeId,
    layers: LayerSet,
    weight: impl Fn(&Edge) -> f64,
) -> Option<Path> {
    dijkstra(g, &[(from, 0.0)], &[(to, 0.0)], |e| {
        layers.contains(e.kind).then(|| weight(e))
    })
}

/// Multi-source, multi-target Dijkstra over active edges. Sources and targets
/// carry an entry/exit cost; `weight` returns `None` to forbid an edge.
/// Returns `None` when no target is reachable.
pub fn dijkstra(
    g: &MultiModalGraph,
    sources: &[(NodeId, f64)],
    targets: &[(NodeId, f64)],
    weight: impl Fn(&Edge) -> Option<f64>,
) -> Option<Path> {
    let n = g.nodes.len();
    let mut exit = vec![f64::INFINITY; n];
    for &(t, c) in targets {
        exit[t] = exit[t].min(c);
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<(EdgeId, NodeId)>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    for &(s, c) in sources {
        if c < dist[s] {
            dist[s] = c;
            heap.push(Reverse((OrdF64(c), s)));
        }
    }
    let mut best: Option<(f64, NodeId)> = None;
    while let Some(Reverse((OrdF64(d), u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        if let Some((b, _)) = best {
            if d >= b {
                break;
            }
        }
        if exit[u].is_finite() {
            let total = d + exit[u];
            if best.is_none_or(|(b, _)| total < b) {
                best = Some((total, u));
            }
        }
        for &(e, v) in g.neighbors(u) {
            if !g.is_active(e) {
                continue;
            }
            let Some(w) = weight(g.edge(e)) else { continue };
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                pred[v] = Some((e, u));
                heap.push(Reverse((OrdF64(nd), v)));
            }
        }
    }
    let (cost, end) = best?;
    let mut nodes = vec![end];
    let mut edges = Vec::new();
    let mut cur = end;
    while let Some((e, p)) = pred[cur] {
        edges.push(e);
        nodes.push(p);
        cur = p;
    }
    nodes.reverse();
    edges.reverse();
    Some(Path { nodes, edges, cost })
}
