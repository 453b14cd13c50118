//! Manhattan-style grid instances built from per-zone line layouts.
//!
//! Each zone lays out straight roads at given offsets from its south-west
//! corner in both directions. Intersections sit at every crossing and every
//! `spacing` meters along each road; neighbouring zones share their boundary
//! roads. Road segments join consecutive intersections along each road.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    from_parts, Edge, EdgeKind, Layer, MultiModalGraph, Node, Point, TransitLine, TransitMode,
    ZoneClass, Zones,
};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoneLayout {
    /// Road offsets from the zone corner, ascending, from 0 to the zone size.
    pub lines: Vec<f64>,
    /// Intersection spacing along each road.
    pub spacing: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSpec {
    pub name: String,
    pub mode: TransitMode,
    /// Stop coordinates; each must coincide with a road intersection.
    pub stops: Vec<[f64; 2]>,
    pub headway_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepotSpec {
    pub at: [f64; 2],
    pub capacity: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub zone_size_m: f64,
    pub zones_x: usize,
    pub zones_y: usize,
    /// Row-major from the south-west zone.
    pub classes: Vec<ZoneClass>,
    pub layouts: Vec<ZoneLayout>,
    pub lines: Vec<LineSpec>,
    pub depots: Vec<DepotSpec>,
    pub transfer_time_s: f64,
    pub walk_speed_mps: f64,
}

const TRAIN_HEADWAY: f64 = 1200.0;
const METRO_HEADWAY: f64 = 360.0;
const BUS_HEADWAY: f64 = 600.0;
const CAP_URBAN: u32 = 20;
const CAP_INTERMEDIATE: u32 = 15;
const CAP_SUBURBAN: u32 = 15;

fn km(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|x| x * 1000.0).collect()
}

fn line(name: &str, mode: TransitMode, pts: Vec<(f64, f64)>) -> LineSpec {
    let headway_s = match mode {
        TransitMode::Train => TRAIN_HEADWAY,
        TransitMode::Metro => METRO_HEADWAY,
        TransitMode::Bus => BUS_HEADWAY,
    };
    LineSpec {
        name: name.into(),
        mode,
        stops: pts.into_iter().map(|(x, y)| [x * 1000.0, y * 1000.0]).collect(),
        headway_s,
    }
}

fn along_x(y: f64, xs: &[f64]) -> Vec<(f64, f64)> {
    xs.iter().map(|&x| (x, y)).collect()
}

fn along_y(x: f64, ys: &[f64]) -> Vec<(f64, f64)> {
    ys.iter().map(|&y| (x, y)).collect()
}

fn depots(cap: u32, pts: &[(f64, f64)]) -> Vec<DepotSpec> {
    pts.iter()
        .map(|&(x, y)| DepotSpec { at: [x * 1000.0, y * 1000.0], capacity: cap })
        .collect()
}

impl GridConfig {
    /// 30 km × 30 km grid of 36 zones: 4 urban in the centre, a ring of 12
    /// intermediate and 20 suburban on the rim. 576 intersections and 874
    /// road segments; one north-south train line, a metro cross, six bus
    /// lines and 17 depots.
    pub fn full_scale() -> Self {
        let urban = ZoneLayout { lines: km(&[0.0, 2.0, 3.0, 5.0]), spacing: 500.0 };
        let ring = |spacing: f64| ZoneLayout { lines: km(&[0.0, 2.0, 4.0, 5.0]), spacing };
        let coarse = ZoneLayout { lines: km(&[0.0, 2.5, 5.0]), spacing: 2500.0 };
        let mut classes = Vec::new();
        let mut layouts = Vec::new();
        for zy in 0..6 {
            for zx in 0..6 {
                let d = (zx as f64 - 2.5).abs().max((zy as f64 - 2.5).abs());
                let (class, layout) = if d < 1.0 {
                    (ZoneClass::Urban, urban.clone())
                } else if d < 2.0 {
                    let fine = matches!((zx, zy), (1, 4) | (4, 1));
                    (ZoneClass::Intermediate, ring(if fine { 1000.0 } else { 2000.0 }))
                } else {
                    let sparse = matches!((zx, zy), (0, 0) | (5, 0) | (0, 5) | (5, 5) | (2, 0));
                    (ZoneClass::Suburban, if sparse { coarse.clone() } else { ring(2000.0) })
                };
                classes.push(class);
                layouts.push(layout);
            }
        }
        let rim = [2.0, 4.0, 7.0, 9.0, 12.0, 14.0, 17.0, 19.0, 22.0, 24.0, 27.0, 29.0];
        let inner = [5.0, 7.0, 9.0, 11.0, 13.0, 15.0, 17.0, 19.0, 22.0, 25.0];
        let metro: Vec<f64> = (10..=20).map(f64::from).collect();
        let train = [7.0, 10.0, 13.0, 15.0, 18.0, 20.0, 22.0, 24.0, 27.0];
        let lines = vec![
            line("T1", TransitMode::Train, along_y(12.0, &train)),
            line("M1", TransitMode::Metro, along_x(15.0, &metro)),
            line("M2", TransitMode::Metro, along_y(15.0, &metro)),
            line("B1", TransitMode::Bus, along_x(7.0, &rim)),
            line("B2", TransitMode::Bus, along_x(22.0, &rim)),
            line("B3", TransitMode::Bus, along_y(7.0, &rim)),
            line("B4", TransitMode::Bus, along_y(24.0, &rim)),
            line("B5", TransitMode::Bus, along_x(12.0, &inner)),
            line("B6", TransitMode::Bus, along_y(17.0, &inner)),
        ];
        let mut depot_pts: Vec<(f64, f64)> = train.iter().map(|&y| (12.0, y)).collect();
        depot_pts.extend([
            (14.0, 12.0),
            (17.0, 11.0),
            (18.0, 14.0),
            (15.0, 15.0),
            (17.0, 18.0),
            (14.0, 18.0),
            (19.0, 17.0),
            (19.0, 12.0),
        ]);
        GridConfig {
            zone_size_m: 5000.0,
            zones_x: 6,
            zones_y: 6,
            classes,
            layouts,
            lines,
            depots: depots(40, &depot_pts),
            transfer_time_s: 60.0,
            walk_speed_mps: 1.4,
        }
    }

    /// 12 km × 12 km grid of nine 4 km zones with an urban centre, for quick
    /// experiments: one train line of five stations, one metro line, four
    /// rim bus lines and nine depots.
    pub fn desk_scale() -> Self {
        let mut classes = Vec::new();
        let mut layouts = Vec::new();
        for zy in 0..3 {
            for zx in 0..3 {
                let (class, layout) = match (zx, zy) {
                    (1, 1) => (
                        ZoneClass::Urban,
                        ZoneLayout { lines: km(&[0.0, 1.0, 2.0, 3.0, 4.0]), spacing: 500.0 },
                    ),
                    (1, _) | (_, 1) => (
                        ZoneClass::Intermediate,
                        ZoneLayout { lines: km(&[0.0, 2.0, 4.0]), spacing: 1000.0 },
                    ),
                    _ => (
                        ZoneClass::Suburban,
                        ZoneLayout { lines: km(&[0.0, 2.0, 4.0]), spacing: 2000.0 },
                    ),
                };
                classes.push(class);
                layouts.push(layout);
            }
        }
        let rim = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0];
        let lines = vec![
            line("T1", TransitMode::Train, along_y(6.0, &[2.0, 4.0, 6.0, 8.0, 10.0])),
            line("M1", TransitMode::Metro, along_x(6.0, &[4.0, 5.0, 6.0, 7.0, 8.0])),
            line("B1", TransitMode::Bus, along_x(2.0, &rim)),
            line("B2", TransitMode::Bus, along_x(10.0, &rim)),
            line("B3", TransitMode::Bus, along_y(2.0, &rim)),
            line("B4", TransitMode::Bus, along_y(10.0, &rim)),
            line("B5", TransitMode::Bus, along_y(6.0, &rim)),
        ];
        // One depot per zone, sized by zone class.
        let depots = [2.0, 6.0, 10.0]
            .iter()
            .flat_map(|&y| [2.0, 6.0, 10.0].map(|x| (x, y)))
            .map(|(x, y)| {
                let capacity = match (x == 6.0, y == 6.0) {
                    (true, true) => CAP_URBAN,
                    (true, false) | (false, true) => CAP_INTERMEDIATE,
                    _ => CAP_SUBURBAN,
                };
                DepotSpec { at: [x * 1000.0, y * 1000.0], capacity }
            })
            .collect();
        GridConfig {
            zone_size_m: 4000.0,
            zones_x: 3,
            zones_y: 3,
            classes,
            layouts,
            lines,
            depots,
            transfer_time_s: 60.0,
            walk_speed_mps: 1.4,
        }
    }

    /// Uniform lattice: `nx × ny` zones with roads every `spacing` meters.
    pub fn uniform(nx: usize, ny: usize, zone_size_m: f64, spacing: f64) -> Self {
        let steps = (zone_size_m / spacing).round() as usize;
        let lines: Vec<f64> = (0..=steps).map(|i| i as f64 * spacing).collect();
        GridConfig {
            zone_size_m,
            zones_x: nx,
            zones_y: ny,
            classes: vec![ZoneClass::Urban; nx * ny],
            layouts: vec![ZoneLayout { lines, spacing }; nx * ny],
            lines: Vec::new(),
            depots: Vec::new(),
            transfer_time_s: 60.0,
            walk_speed_mps: 1.4,
        }
    }
}

/// Builds the layered graph for a grid configuration.
pub fn build_manhattan_grid(cfg: &GridConfig) -> Result<MultiModalGraph> {
    let nz = cfg.zones_x * cfg.zones_y;
    if nz == 0 || !(cfg.zone_size_m > 0.0) || cfg.zone_size_m.fract() != 0.0 {
        return Err(Error::Config(vec!["grid needs at least one zone of whole-meter size".into()]));
    }
    if cfg.layouts.len() != nz || cfg.classes.len() != nz {
        let zone = cfg.layouts.len().min(cfg.classes.len());
        return Err(Error::Zone { zone, reason: format!("expected {nz} zone layouts and classes") });
    }
    let size = cfg.zone_size_m as i64;
    for (z, l) in cfg.layouts.iter().enumerate() {
        let whole = l.lines.iter().all(|v| v.fract() == 0.0) && l.spacing.fract() == 0.0;
        let sorted = l.lines.windows(2).all(|w| w[0] < w[1]);
        if !whole || !sorted || !(l.spacing > 0.0) {
            return Err(Error::Zone {
                zone: z,
                reason: "road offsets must be ascending whole meters with positive spacing".into(),
            });
        }
        if l.lines.first() != Some(&0.0) || l.lines.last() != Some(&cfg.zone_size_m) {
            return Err(Error::Zone { zone: z, reason: "roads do not span the zone".into() });
        }
    }

    let mut points: BTreeSet<(i64, i64)> = BTreeSet::new();
    for (z, l) in cfg.layouts.iter().enumerate() {
        let (ox, oy) = ((z % cfg.zones_x) as i64 * size, (z / cfg.zones_x) as i64 * size);
        let offs: Vec<i64> = l.lines.iter().map(|v| *v as i64).collect();
        let sp = l.spacing as i64;
        let mut along: Vec<i64> = (0..).map(|k| k * sp).take_while(|v| *v <= size).collect();
        along.extend(&offs);
        for &a in &offs {
            for &b in &along {
                points.insert((oy + b, ox + a));
                points.insert((oy + a, ox + b));
            }
        }
    }
    let ids: BTreeMap<(i64, i64), usize> =
        points.iter().enumerate().map(|(i, &(y, x))| ((x, y), i)).collect();
    let mut on_x: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    let mut on_y: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    for &(y, x) in &points {
        on_x.entry(x).or_default().push(y);
        on_y.entry(y).or_default().push(x);
    }
    for v in on_x.values_mut().chain(on_y.values_mut()) {
        v.sort_unstable();
    }

    let zones = Zones {
        size_m: cfg.zone_size_m,
        nx: cfg.zones_x,
        ny: cfg.zones_y,
        classes: cfg.classes.clone(),
    };
    let mut nodes: Vec<Node> = points
        .iter()
        .enumerate()
        .map(|(id, &(y, x))| {
            let pos = Point::new(x as f64, y as f64);
            Node { id, layer: Layer::Vehicle, pos, zone: zones.zone_of(pos).unwrap() }
        })
        .collect();

    let mut segs: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut link = |a: (i64, i64), b: (i64, i64)| {
        let (i, j) = (ids[&a], ids[&b]);
        segs.insert((i.min(j), i.max(j)));
    };
    for (z, l) in cfg.layouts.iter().enumerate() {
        let (ox, oy) = ((z % cfg.zones_x) as i64 * size, (z / cfg.zones_x) as i64 * size);
        for off in l.lines.iter().map(|v| *v as i64) {
            let x = ox + off;
            let ys: Vec<i64> =
                on_x[&x].iter().copied().filter(|y| (oy..=oy + size).contains(y)).collect();
            for w in ys.windows(2) {
                link((x, w[0]), (x, w[1]));
            }
            let y = oy + off;
            let xs: Vec<i64> =
                on_y[&y].iter().copied().filter(|x| (ox..=ox + size).contains(x)).collect();
            for w in xs.windows(2) {
                link((w[0], y), (w[1], y));
            }
        }
    }
    let mut edges: Vec<Edge> = segs
        .into_iter()
        .enumerate()
        .map(|(id, (a, b))| Edge {
            id,
            a,
            b,
            kind: EdgeKind::Vehicle,
            length: nodes[a].pos.dist(nodes[b].pos),
            base_time: 0.0,
            line: None,
        })
        .collect();

    let lookup = |p: [f64; 2], what: &str| -> Result<usize> {
        ids.get(&(p[0].round() as i64, p[1].round() as i64))
            .copied()
            .ok_or_else(|| Error::Network(format!("{what} at ({}, {}) is not a road intersection", p[0], p[1])))
    };
    let mut lines = Vec::new();
    for (li, spec) in cfg.lines.iter().enumerate() {
        let mut stations = Vec::new();
        for &stop in &spec.stops {
            let road = lookup(stop, &format!("stop of line {}", spec.name))?;
            let id = nodes.len();
            nodes.push(Node {
                id,
                layer: spec.mode.layer(),
                pos: nodes[road].pos,
                zone: nodes[road].zone,
            });
            edges.push(Edge {
                id: edges.len(),
                a: id,
                b: road,
                kind: EdgeKind::Connection,
                length: cfg.transfer_time_s * cfg.walk_speed_mps,
                base_time: cfg.transfer_time_s,
                line: None,
            });
            stations.push(id);
        }
        for w in stations.windows(2) {
            let (p, q) = (nodes[w[0]].pos, nodes[w[1]].pos);
            let length = match spec.mode {
                TransitMode::Bus => (p.x - q.x).abs() + (p.y - q.y).abs(),
                _ => p.dist(q),
            };
            if !(length > 0.0) {
                return Err(Error::Network(format!("line {} repeats a stop", spec.name)));
            }
            edges.push(Edge {
                id: edges.len(),
                a: w[0],
                b: w[1],
                kind: spec.mode.edge_kind(),
                length,
                base_time: 0.0,
                line: Some(li),
            });
        }
        lines.push(TransitLine {
            id: li,
            name: spec.name.clone(),
            mode: spec.mode,
            stations,
            headway_s: spec.headway_s,
            segments: Vec::new(),
            offsets: Vec::new(),
        });
    }
    let mut depot_nodes = Vec::new();
    for (i, d) in cfg.depots.iter().enumerate() {
        depot_nodes.push((lookup(d.at, &format!("depot {i}"))?, d.capacity));
    }
    from_parts(nodes, edges, lines, depot_nodes, zones, cfg.transfer_time_s)
}
