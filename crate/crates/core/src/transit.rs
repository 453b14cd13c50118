//! Scheduled metro, train and bus fleets with FIFO boarding and the
//! station-closure protocol.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{EdgeKind, LineId, MultiModalGraph, NodeId, TransitMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransitConfig {
    pub metro_speed_mps: f64,
    pub train_speed_mps: f64,
    pub metro_capacity: usize,
    pub train_capacity: usize,
    pub bus_capacity: usize,
}

impl Default for TransitConfig {
    fn default() -> Self {
        TransitConfig {
            metro_speed_mps: 13.0,
            train_speed_mps: 30.0,
            metro_capacity: 600,
            train_capacity: 1000,
            bus_capacity: 80,
        }
    }
}

impl TransitConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.metro_speed_mps > 0.0 && self.train_speed_mps > 0.0) {
            errs.push("transit speeds must be positive".into());
        }
        if self.metro_capacity == 0 || self.train_capacity == 0 || self.bus_capacity == 0 {
            errs.push("transit capacities must be positive".into());
        }
        errs
    }

    pub fn capacity(&self, mode: TransitMode) -> usize {
        match mode {
            TransitMode::Metro => self.metro_capacity,
            TransitMode::Train => self.train_capacity,
            TransitMode::Bus => self.bus_capacity,
        }
    }
}

/// A stop given by line name and position along the line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopRef {
    pub line: String,
    pub stop: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisruptionSpec {
    pub closed: Vec<StopRef>,
    pub start_s: f64,
    pub end_s: f64,
}

/// Station nodes, incident rail edges and lines hit by a disruption.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedDisruption {
    pub stations: Vec<NodeId>,
    pub edges: Vec<usize>,
    pub lines: Vec<LineId>,
    pub start_s: f64,
    pub end_s: f64,
}

impl DisruptionSpec {
    pub fn validate(&self, horizon_s: f64) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.start_s < self.end_s) {
            errs.push("disruption.start_s must precede end_s".into());
        }
        if self.start_s < 0.0 || self.end_s > horizon_s {
            errs.push("disruption window must lie within the horizon".into());
        }
        if self.closed.is_empty() {
            errs.push("disruption.closed lists no stations".into());
        }
        errs
    }

    pub fn resolve(&self, g: &MultiModalGraph) -> Result<ResolvedDisruption> {
        let mut stations = Vec::new();
        let mut lines = Vec::new();
        for s in &self.closed {
            let line = g
                .lines
                .iter()
                .find(|l| l.name == s.line)
                .ok_or_else(|| Error::Config(vec![format!("disruption names unknown line `{}`", s.line)]))?;
            if line.mode != TransitMode::Train {
                return Err(Error::Config(vec![format!("line `{}` is not a train line", s.line)]));
            }
            let node = *line.stations.get(s.stop).ok_or_else(|| {
                Error::Config(vec![format!("line `{}` has no stop {}", s.line, s.stop)])
            })?;
            stations.push(node);
            if !lines.contains(&line.id) {
                lines.push(line.id);
            }
        }
        stations.sort_unstable();
        stations.dedup();
        lines.sort_unstable();
        let edges = g.edges_incident_to(&stations, EdgeKind::Train);
        Ok(ResolvedDisruption { stations, edges, lines, start_s: self.start_s, end_s: self.end_s })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rider {
    pub user: usize,
    pub line: LineId,
    pub board: usize,
    pub alight: usize,
    pub since: f64,
}

impl Rider {
    pub fn forward(&self) -> bool {
        self.alight > self.board
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    /// Heading for stop `i`.
    Moving(usize),
    /// Stopped at stop `i`; dwells on the next step.
    Arrived(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitVehicle {
    pub id: usize,
    pub line: LineId,
    pub forward: bool,
    pub pos_m: f64,
    pub phase: Phase,
    pub onboard: Vec<Rider>,
    pub capacity: usize,
    pub in_service: bool,
    /// Runs empty to its terminal without boarding anyone.
    pub out_of_service: bool,
    /// Everyone leaves at the next stop.
    pub discharge: bool,
}

impl TransitVehicle {
    /// Last stop passed or current stop.
    pub fn last_stop(&self) -> usize {
        match self.phase {
            Phase::Arrived(i) => i,
            Phase::Moving(i) => {
                if self.forward {
                    i - 1
                } else {
                    i + 1
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TransitEvent {
    Boarded { user: usize, vehicle: usize },
    Alighted { user: usize, station: NodeId },
    Stranded { user: usize, station: NodeId, cause: &'static str },
}

#[derive(Clone, Debug)]
pub struct TransitSystem {
    pub cfg: TransitConfig,
    pub vehicles: Vec<TransitVehicle>,
    /// Idle vehicles parked at each terminal: `[line][0 = first stop, 1 = last]`.
    pools: Vec<[Vec<usize>; 2]>,
    next_dispatch: Vec<f64>,
    suspended: Vec<bool>,
    /// Waiting riders per station node, FIFO.
    queues: Vec<VecDeque<Rider>>,
}

impl TransitSystem {
    pub fn new(g: &MultiModalGraph, cfg: TransitConfig) -> Self {
        let n = g.lines.len();
        TransitSystem {
            cfg,
            vehicles: Vec::new(),
            pools: vec![[Vec::new(), Vec::new()]; n],
            next_dispatch: vec![0.0; n],
            suspended: vec![false; n],
            queues: vec![VecDeque::new(); g.nodes.len()],
        }
    }

    pub fn suspended(&self) -> &[bool] {
        &self.suspended
    }

    pub fn is_suspended(&self, line: LineId) -> bool {
        self.suspended[line]
    }

    pub fn queue(&self, station: NodeId) -> &VecDeque<Rider> {
        &self.queues[station]
    }

    pub fn waiting_count(&self) -> usize {
        self.queues.iter().map(|q| q.len()).sum()
    }

    pub fn onboard_count(&self) -> usize {
        self.vehicles.iter().map(|v| v.onboard.len()).sum()
    }

    pub fn enqueue(&mut self, g: &MultiModalGraph, rider: Rider) {
        self.queues[g.lines[rider.line].stations[rider.board]].push_back(rider);
    }

    /// Removes a waiting rider; returns whether it was queued.
    pub fn withdraw(&mut self, station: NodeId, user: usize) -> bool {
        let q = &mut self.queues[station];
        match q.iter().position(|r| r.user == user) {
            Some(i) => {
                q.remove(i);
                true
            }
            None => false,
        }
    }

    fn dispatch(&mut self, g: &MultiModalGraph, line: LineId) {
        let l = &g.lines[line];
        let last = l.stations.len() - 1;
        for end in 0..2 {
            let forward = end == 0;
            let (stop, pos) = if forward { (0, 0.0) } else { (last, l.length()) };
            let id = match self.pools[line][end].pop() {
                Some(id) => id,
                None => {
                    self.vehicles.push(TransitVehicle {
                        id: self.vehicles.len(),
                        line,
                        forward,
                        pos_m: pos,
                        phase: Phase::Arrived(stop),
                        onboard: Vec::new(),
                        capacity: self.cfg.capacity(l.mode),
                        in_service: false,
                        out_of_service: false,
                        discharge: false,
                    });
                    self.vehicles.len() - 1
                }
            };
            let v = &mut self.vehicles[id];
            v.forward = forward;
            v.pos_m = pos;
            v.phase = Phase::Arrived(stop);
            v.in_service = true;
            v.out_of_service = false;
            v.discharge = false;
        }
    }

    /// Takes a line out of service: waiting riders are stranded, trains
    /// discharge at their next stop and run empty to the terminal.
    pub fn suspend(&mut self, g: &MultiModalGraph, line: LineId) -> Vec<TransitEvent> {
        self.suspended[line] = true;
        let mut events = Vec::new();
        for &station in &g.lines[line].stations {
            let q = &mut self.queues[station];
            let mut keep = VecDeque::with_capacity(q.len());
            for r in q.drain(..) {
                if r.line == line {
                    events.push(TransitEvent::Stranded { user: r.user, station, cause: "line_suspended" });
                } else {
                    keep.push_back(r);
                }
            }
            *q = keep;
        }
        for v in self.vehicles.iter_mut().filter(|v| v.line == line && v.in_service) {
            v.out_of_service = true;
            v.discharge = !v.onboard.is_empty();
        }
        events
    }

    pub fn resume(&mut self, line: LineId) {
        self.suspended[line] = false;
    }

    /// One step: dispatches due departures, dwells arrived vehicles and moves
    /// the rest. `bus_speed(zone)` gives the current bus speed.
    pub fn step(
        &mut self,
        g: &MultiModalGraph,
        t: f64,
        dt: f64,
        bus_speed: impl Fn(usize) -> f64,
    ) -> Vec<TransitEvent> {
        for line in 0..g.lines.len() {
            if t + 1e-9 >= self.next_dispatch[line] {
                if !self.suspended[line] {
                    self.dispatch(g, line);
                }
                self.next_dispatch[line] += g.lines[line].headway_s;
            }
        }
        let mut events = Vec::new();
        for vid in 0..self.vehicles.len() {
            if !self.vehicles[vid].in_service {
                continue;
            }
            let line = &g.lines[self.vehicles[vid].line];
            match self.vehicles[vid].phase {
                Phase::Arrived(i) => {
                    self.dwell(g, vid, i, &mut events);
                }
                Phase::Moving(i) => {
                    let v = &mut self.vehicles[vid];
                    let speed = match line.mode {
                        TransitMode::Metro => self.cfg.metro_speed_mps,
                        TransitMode::Train => self.cfg.train_speed_mps,
                        TransitMode::Bus => bus_speed(g.zone_of_node(line.stations[v.last_stop()])),
                    };
                    let target = line.offsets[i];
                    let gap = (target - v.pos_m).abs();
                    if gap <= speed * dt {
                        v.pos_m = target;
                        v.phase = Phase::Arrived(i);
                    } else if v.forward {
                        v.pos_m += speed * dt;
                    } else {
                        v.pos_m -= speed * dt;
                    }
                }
            }
        }
        events
    }

    fn dwell(&mut self, g: &MultiModalGraph, vid: usize, stop: usize, events: &mut Vec<TransitEvent>) {
        let line = &g.lines[self.vehicles[vid].line];
        let station = line.stations[stop];
        let v = &mut self.vehicles[vid];
        let discharge = v.discharge;
        let mut stay = Vec::with_capacity(v.onboard.len());
        for r in v.onboard.drain(..) {
            if r.alight == stop {
                events.push(TransitEvent::Alighted { user: r.user, station });
            } else if discharge {
                events.push(TransitEvent::Stranded { user: r.user, station, cause: "discharged" });
            } else {
                stay.push(r);
            }
        }
        v.onboard = stay;
        v.discharge = false;
        let last = line.stations.len() - 1;
        let terminal = if v.forward { stop == last } else { stop == 0 };
        if !v.out_of_service && !terminal {
            let q = &mut self.queues[station];
            let mut keep = VecDeque::with_capacity(q.len());
            for r in q.drain(..) {
                if r.line == v.line && r.board == stop && r.forward() == v.forward && v.onboard.len() < v.capacity {
                    events.push(TransitEvent::Boarded { user: r.user, vehicle: vid });
                    v.onboard.push(r);
                } else {
                    keep.push_back(r);
                }
            }
            *q = keep;
        }
        if terminal {
            v.in_service = false;
            v.forward = !v.forward;
            let end = if stop == 0 { 0 } else { 1 };
            self.pools[v.line][end].push(vid);
        } else {
            v.phase = Phase::Moving(if v.forward { stop + 1 } else { stop - 1 });
        }
    }

    /// Buses in service per zone.
    pub fn buses_by_zone(&self, g: &MultiModalGraph) -> Vec<u32> {
        let mut n = vec![0; g.zones.count()];
        for v in self.vehicles.iter().filter(|v| v.in_service) {
            let line = &g.lines[v.line];
            if line.mode == TransitMode::Bus {
                n[g.zone_of_node(line.stations[v.last_stop()])] += 1;
            }
        }
        n
    }
}
