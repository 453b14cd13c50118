//! Origin-destination demand, candidate journeys and logit path choice.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{
    dijkstra, EdgeKind, LayerSet, LineId, MultiModalGraph, NodeId, TransitMode, ZoneClass,
};
use crate::rng::{stream, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemandConfig {
    pub total_users: usize,
    /// Departures are spread over `[0, active_window_s)` on average.
    pub active_window_s: f64,
    /// Share of origins by zone class (urban, intermediate, suburban),
    /// split evenly among the zones of each class.
    pub origin_class_weights: [f64; 3],
    pub destination_class_weights: [f64; 3],
    /// Explicit per-zone weights overriding the class weights.
    pub origin_zone_weights: Option<Vec<f64>>,
    pub destination_zone_weights: Option<Vec<f64>>,
    /// Share of users who are ride-hailing customers; the operator expects
    /// this share of departures to request a ride.
    pub rh_market_share: f64,
    /// Logit dispersion per minute.
    pub theta_per_min: f64,
    pub k_paths: usize,
    pub walk_speed_mps: f64,
    /// Longest road distance a user walks to or from a station.
    pub max_walk_m: f64,
    pub transfer_penalty_s: f64,
    pub rh_timeout_s: f64,
    /// Transit waits time out after the line headway plus this.
    pub transit_timeout_extra_s: f64,
    pub max_replans: u32,
}

impl Default for DemandConfig {
    fn default() -> Self {
        DemandConfig {
            total_users: 5729,
            active_window_s: 4.0 * 3600.0,
            origin_class_weights: [0.5, 0.35, 0.15],
            destination_class_weights: [0.1, 0.3, 0.6],
            origin_zone_weights: None,
            destination_zone_weights: None,
            rh_market_share: 0.10,
            theta_per_min: 0.1,
            k_paths: 5,
            walk_speed_mps: 1.4,
            max_walk_m: 1000.0,
            transfer_penalty_s: 0.0,
            rh_timeout_s: 600.0,
            transit_timeout_extra_s: 600.0,
            max_replans: 3,
        }
    }
}

impl DemandConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.active_window_s > 0.0) {
            errs.push("demand.active_window_s must be positive".into());
        }
        let ok = |w: &[f64]| w.iter().all(|x| *x >= 0.0) && w.iter().sum::<f64>() > 0.0;
        if !ok(&self.origin_class_weights) || !ok(&self.destination_class_weights) {
            errs.push("demand class weights must be nonnegative with a positive sum".into());
        }
        for w in [&self.origin_zone_weights, &self.destination_zone_weights].into_iter().flatten() {
            if !ok(w) {
                errs.push("demand zone weights must be nonnegative with a positive sum".into());
            }
        }
        if !(0.0..=1.0).contains(&self.rh_market_share) {
            errs.push("demand.rh_market_share must lie in [0, 1]".into());
        }
        if !(self.theta_per_min >= 0.0) {
            errs.push("demand.theta_per_min must be nonnegative".into());
        }
        if self.k_paths == 0 {
            errs.push("demand.k_paths must be at least 1".into());
        }
        if !(self.walk_speed_mps > 0.0) {
            errs.push("demand.walk_speed_mps must be positive".into());
        }
        if !(self.rh_timeout_s > 0.0) {
            errs.push("demand.rh_timeout_s must be positive".into());
        }
        errs
    }

    /// Mean gap between consecutive departures.
    pub fn mean_gap_s(&self) -> f64 {
        self.active_window_s / self.total_users.max(1) as f64
    }

    /// Normalized per-zone weights.
    pub fn zone_weights(&self, classes: &[ZoneClass], origin: bool) -> Vec<f64> {
        let explicit = if origin { &self.origin_zone_weights } else { &self.destination_zone_weights };
        let raw: Vec<f64> = match explicit {
            Some(w) => w.clone(),
            None => {
                let cw = if origin { self.origin_class_weights } else { self.destination_class_weights };
                let idx = |c: ZoneClass| match c {
                    ZoneClass::Urban => 0,
                    ZoneClass::Intermediate => 1,
                    ZoneClass::Suburban => 2,
                };
                let mut count = [0usize; 3];
                classes.iter().for_each(|&c| count[idx(c)] += 1);
                // classes absent from the grid pass their share to the rest
                let present: f64 = (0..3).filter(|&i| count[i] > 0).map(|i| cw[i]).sum();
                classes.iter().map(|&c| cw[idx(c)] / present / count[idx(c)] as f64).collect()
            }
        };
        let total: f64 = raw.iter().sum();
        raw.iter().map(|w| w / total).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub user_id: usize,
    pub origin_node: NodeId,
    pub dest_node: NodeId,
    pub depart_s: f64,
}

fn sample_index(rng: &mut impl Rng, cumulative: &[f64]) -> usize {
    let u: f64 = rng.random::<f64>() * cumulative.last().copied().unwrap_or(0.0);
    cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1)
}

fn cumulative(w: &[f64]) -> Vec<f64> {
    w.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

struct ZoneSampler {
    by_zone: Vec<Vec<NodeId>>,
    origins: Vec<f64>,
    destinations: Vec<f64>,
}

impl ZoneSampler {
    fn node(&self, rng: &mut impl Rng, origin: bool) -> NodeId {
        let z = sample_index(rng, if origin { &self.origins } else { &self.destinations });
        self.by_zone[z][Uniform::new(0, self.by_zone[z].len()).unwrap().sample(rng)]
    }
}

fn zone_sampler(cfg: &DemandConfig, g: &MultiModalGraph) -> Result<ZoneSampler> {
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let nz = g.zones.count();
    let mut by_zone: Vec<Vec<NodeId>> = vec![Vec::new(); nz];
    for &n in g.road_nodes() {
        by_zone[g.zone_of_node(n)].push(n);
    }
    let mut ow = cfg.zone_weights(&g.zones.classes, true);
    let mut dw = cfg.zone_weights(&g.zones.classes, false);
    if ow.len() != nz || dw.len() != nz {
        return Err(Error::Config(vec![format!("zone weights must have {nz} entries")]));
    }
    for z in 0..nz {
        if by_zone[z].is_empty() {
            ow[z] = 0.0;
            dw[z] = 0.0;
        }
    }
    if g.road_nodes().is_empty() {
        return Err(Error::Config(vec!["the network has no road nodes".into()]));
    }
    Ok(ZoneSampler { by_zone, origins: cumulative(&ow), destinations: cumulative(&dw) })
}

/// `n` intersections drawn from the destination weights.
pub fn sample_destinations(cfg: &DemandConfig, g: &MultiModalGraph, n: usize, rng: &mut impl Rng) -> Result<Vec<NodeId>> {
    let zs = zone_sampler(cfg, g)?;
    Ok((0..n).map(|_| zs.node(rng, false)).collect())
}

/// Poisson departures with zone-weighted origins and destinations and a
/// uniformly drawn intersection inside each sampled zone.
pub fn generate_demand(cfg: &DemandConfig, g: &MultiModalGraph, seed: u64) -> Result<Vec<Trip>> {
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    if cfg.total_users == 0 {
        return Ok(Vec::new());
    }
    let zs = zone_sampler(cfg, g)?;
    let mut rng = stream(seed, Stream::Demand);
    let gap = Exp::new(1.0 / cfg.mean_gap_s()).map_err(|e| Error::Config(vec![e.to_string()]))?;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(cfg.total_users);
    for user_id in 0..cfg.total_users {
        t += gap.sample(&mut rng);
        let origin_node = zs.node(&mut rng, true);
        let dest_node = loop {
            let d = zs.node(&mut rng, false);
            if d != origin_node {
                break d;
            }
        };
        out.push(Trip { user_id, origin_node, dest_node, depart_s: t });
    }
    Ok(out)
}

pub fn write_demand_csv(trips: &[Trip], w: impl Write) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for t in trips {
        wr.serialize(t).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_demand_csv(r: impl Read) -> Result<Vec<Trip>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .collect::<std::result::Result<Vec<Trip>, _>>()
        .map_err(csv_err)
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Mode combinations searched for candidate journeys.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Combo {
    RhOnly,
    PtWalk,
    TrainRh,
    MetroBusWalk,
    BusRh,
}

impl Combo {
    pub const ALL: [Combo; 5] =
        [Combo::RhOnly, Combo::PtWalk, Combo::TrainRh, Combo::MetroBusWalk, Combo::BusRh];

    pub fn layers(self) -> LayerSet {
        match self {
            Combo::RhOnly => LayerSet::ROAD,
            Combo::PtWalk => LayerSet::TRANSIT,
            Combo::TrainRh => LayerSet::TRAIN.union(LayerSet::ROAD),
            Combo::MetroBusWalk => LayerSet::METRO.union(LayerSet::BUS),
            Combo::BusRh => LayerSet::BUS.union(LayerSet::ROAD),
        }
    }

    pub fn walk_access(self) -> bool {
        matches!(self, Combo::PtWalk | Combo::MetroBusWalk)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LegMode {
    Walk,
    Rh,
    Ride(LineId),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub mode: LegMode,
    pub from: NodeId,
    pub to: NodeId,
    pub dist_m: f64,
    pub time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidatePath {
    pub combo: Combo,
    pub legs: Vec<Leg>,
    /// Sum of leg times plus transfer penalties, seconds.
    pub v_s: f64,
}

impl CandidatePath {
    pub fn rides(&self) -> usize {
        self.legs.iter().filter(|l| matches!(l.mode, LegMode::Ride(_))).count()
    }

    pub fn transfers(&self) -> usize {
        let motorized = self.legs.iter().filter(|l| l.mode != LegMode::Walk).count();
        motorized.saturating_sub(1)
    }

    pub fn uses_rh(&self) -> bool {
        self.legs.iter().any(|l| l.mode == LegMode::Rh)
    }

    fn signature(&self) -> Vec<(LegMode, NodeId, NodeId)> {
        self.legs.iter().map(|l| (l.mode, l.from, l.to)).collect()
    }
}

/// Travel-time view used when planning: current regional speeds plus which
/// lines are out of service.
#[derive(Clone, Debug)]
pub struct TravelModel<'a> {
    pub car_speed: &'a [f64],
    pub bus_factor: f64,
    pub metro_speed: f64,
    pub train_speed: f64,
    pub walk_speed: f64,
    pub suspended: &'a [bool],
    /// Ride-hailing legs may be used.
    pub rh: bool,
    /// Edges switched off by a disruption are unusable.
    pub masked: bool,
}

impl TravelModel<'_> {
    pub fn mode_speed(&self, mode: TransitMode, zone: usize) -> f64 {
        match mode {
            TransitMode::Metro => self.metro_speed,
            TransitMode::Train => self.train_speed,
            TransitMode::Bus => self.bus_factor * self.car_speed[zone],
        }
    }

    fn edge_time(&self, g: &MultiModalGraph, e: usize) -> Option<f64> {
        if self.masked && !g.is_active(e) {
            return None;
        }
        let edge = g.edge(e);
        if edge.kind == EdgeKind::Vehicle && !self.rh {
            return None;
        }
        if let Some(l) = edge.line {
            if self.suspended.get(l).copied().unwrap_or(false) {
                return None;
            }
        }
        let zone = g.zone_of_node(edge.a);
        Some(match edge.kind {
            EdgeKind::Connection => edge.base_time,
            EdgeKind::Vehicle => edge.length / self.car_speed[zone],
            EdgeKind::Metro => edge.length / self.metro_speed,
            EdgeKind::Train => edge.length / self.train_speed,
            EdgeKind::Bus => edge.length / (self.bus_factor * self.car_speed[zone]),
        })
    }
}

struct Found {
    nodes: Vec<NodeId>,
    edges: Vec<usize>,
}

fn search(
    g: &MultiModalGraph,
    sources: &[(NodeId, f64)],
    targets: &[(NodeId, f64)],
    layers: LayerSet,
    tm: &TravelModel,
) -> Option<Found> {
    let p = dijkstra(g, sources, targets, |e| {
        if layers.contains(e.kind) {
            tm.edge_time(g, e.id)
        } else {
            None
        }
    })?;
    Some(Found { nodes: p.nodes, edges: p.edges })
}

fn legs_from(g: &MultiModalGraph, found: &Found, tm: &TravelModel) -> Vec<Leg> {
    let mut legs: Vec<Leg> = Vec::new();
    for (i, &e) in found.edges.iter().enumerate() {
        let edge = g.edge(e);
        let (from, to) = (found.nodes[i], found.nodes[i + 1]);
        let mode = match (edge.kind, edge.line) {
            (EdgeKind::Vehicle, _) => LegMode::Rh,
            (EdgeKind::Connection, _) => LegMode::Walk,
            (_, Some(l)) => LegMode::Ride(l),
            _ => LegMode::Walk,
        };
        let time = tm.edge_time(g, e).unwrap_or(0.0);
        match legs.last_mut() {
            Some(last) if last.mode == mode => {
                last.to = to;
                last.dist_m += edge.length;
                last.time_s += time;
            }
            _ => legs.push(Leg { mode, from, to, dist_m: edge.length, time_s: time }),
        }
    }
    legs
}

fn walk_leg(g: &MultiModalGraph, from: NodeId, to: NodeId, extra_s: f64, speed: f64) -> Leg {
    let dist = g.road_dist(from, to);
    Leg { mode: LegMode::Walk, from, to, dist_m: dist, time_s: dist / speed + extra_s }
}

/// Up to `cfg.k_paths` distinct journeys from `origin` to `destination`
/// (both road intersections), one per mode combination, best first. A
/// transit combination whose shortest journey rides nothing is dropped.
pub fn candidate_paths(
    g: &MultiModalGraph,
    origin: NodeId,
    destination: NodeId,
    cfg: &DemandConfig,
    tm: &TravelModel,
) -> Vec<CandidatePath> {
    let tau = g.transfer_time_s;
    let near = |r: NodeId| -> Vec<(NodeId, f64)> {
        g.nodes
            .iter()
            .filter(|n| n.layer != crate::network::Layer::Vehicle)
            .filter_map(|n| {
                let d = g.road_dist(r, g.road_node_of(n.id));
                (d <= cfg.max_walk_m).then_some((n.id, d / tm.walk_speed + tau))
            })
            .collect()
    };
    let (access, egress) = (near(origin), near(destination));
    let mut out: Vec<CandidatePath> = Vec::new();
    for combo in Combo::ALL {
        let legs = if combo == Combo::RhOnly {
            if origin == destination || !tm.rh {
                continue;
            }
            let path = g.road_path(origin, destination);
            if path.len() < 2 {
                continue;
            }
            let found = Found {
                edges: path
                    .windows(2)
                    .map(|w| {
                        g.neighbors(w[0])
                            .iter()
                            .find(|&&(e, o)| o == w[1] && g.edge(e).kind == EdgeKind::Vehicle)
                            .map(|&(e, _)| e)
                            .unwrap()
                    })
                    .collect(),
                nodes: path,
            };
            legs_from(g, &found, tm)
        } else if combo.walk_access() {
            let Some(found) = search(g, &access, &egress, combo.layers(), tm) else { continue };
            let first = found.nodes[0];
            let last = *found.nodes.last().unwrap();
            let mut legs = vec![walk_leg(g, origin, g.road_node_of(first), tau, tm.walk_speed)];
            legs[0].to = first;
            legs.extend(legs_from(g, &found, tm));
            let mut egress_leg = walk_leg(g, g.road_node_of(last), destination, tau, tm.walk_speed);
            egress_leg.from = last;
            legs.push(egress_leg);
            legs
        } else {
            let Some(found) = search(g, &[(origin, 0.0)], &[(destination, 0.0)], combo.layers(), tm)
            else {
                continue;
            };
            legs_from(g, &found, tm)
        };
        let mut cand = CandidatePath { combo, legs, v_s: 0.0 };
        if combo != Combo::RhOnly && cand.rides() == 0 {
            continue;
        }
        cand.v_s = cand.legs.iter().map(|l| l.time_s).sum::<f64>()
            + cfg.transfer_penalty_s * cand.transfers() as f64;
        if !out.iter().any(|c| c.signature() == cand.signature()) {
            out.push(cand);
        }
    }
    out.sort_by(|a, b| a.v_s.total_cmp(&b.v_s));
    out.truncate(cfg.k_paths);
    out
}

/// Logit probabilities for utilities given in minutes.
pub fn choice_probabilities(v_min: &[f64], theta: f64) -> Vec<f64> {
    let lo = v_min.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = v_min.iter().map(|v| (-theta * (v - lo)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

/// Samples a candidate index by the logit rule.
pub fn choose_path(cands: &[CandidatePath], theta_per_min: f64, rng: &mut impl Rng) -> usize {
    let v: Vec<f64> = cands.iter().map(|c| c.v_s / 60.0).collect();
    let p = choice_probabilities(&v, theta_per_min);
    sample_index(rng, &cumulative(&p))
}

/// Outcome of checking a waiting user against the retry policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Replan {
    Keep,
    Replan,
    Abandon,
}

pub fn replan_decision(waited_s: f64, timeout_s: f64, replans: u32, max_replans: u32) -> Replan {
    if waited_s < timeout_s {
        Replan::Keep
    } else if replans >= max_replans {
        Replan::Abandon
    } else {
        Replan::Replan
    }
}
