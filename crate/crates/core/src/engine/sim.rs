//! The time-stepped loop. Each step runs eight phases in a fixed order:
//! departures, planning, disruption, transit, ride-hailing, traffic,
//! movement and recording.

use std::collections::VecDeque;

use rand::Rng;

use crate::demand::{
    candidate_paths, choose_path, generate_demand, sample_destinations, replan_decision, Leg, LegMode, Replan, TravelModel, Trip,
};
use crate::error::{Error, Result};
use crate::marl::{act, argmax_allowed, observation_dim, raw_observation, Experience, GlobalFeatures, Maddpg};
use crate::mfd::{advance_trip, Mfd, RegionAccumulation, TripProgress, VehicleType};
use crate::network::{build_manhattan_grid, DepotId, MultiModalGraph, NodeId};
use crate::ridehail::{
    driver_utility, k_max, match_requests, mean_fare, noisy_count, relocation_offer_count, sample_arrival_time,
    step_vehicle_state, survival_probability, DemandEstimator, RhEvent, RhState,
};
use crate::rng::{stream, SimRng, Stream};
use crate::strategies::{
    strategy_centralized, strategy_decentralized, strategy_random, RebalanceDecision, StrategyContext, StrategyKind,
    AUCTION_ROUNDS,
};
use crate::transit::{ResolvedDisruption, Rider, TransitEvent, TransitSystem};

use super::config::{FleetStart, ScenarioConfig};
use super::records::{DecisionRow, FleetRow, MatchRow, Records, StrandedRow, TrafficRow, UserRow};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UserState {
    NotDeparted,
    Walking { remaining_s: f64 },
    WaitingRh { since: f64 },
    AssignedRh { vehicle: usize, since: f64 },
    InRh { vehicle: usize },
    WaitingTransit { station: NodeId, since: f64, timeout_s: f64 },
    Onboard,
    Completed { at: f64 },
    Abandoned { at: f64 },
}

#[derive(Clone, Debug)]
struct User {
    trip: Trip,
    state: UserState,
    legs: Vec<Leg>,
    leg: usize,
    replans: u32,
    dist_m: f64,
    boardings: u32,
    waits_s: f64,
    modes: Vec<&'static str>,
    rh_access: bool,
}

impl User {
    fn use_mode(&mut self, m: &'static str) {
        self.boardings += 1;
        if self.modes.last() != Some(&m) {
            self.modes.push(m);
        }
    }
}

#[derive(Clone, Debug)]
struct Route {
    /// Node reached at the end of each leg.
    targets: Vec<NodeId>,
    progress: TripProgress,
}

#[derive(Clone, Debug)]
struct Epoch {
    s: Vec<f64>,
    a: Vec<f64>,
    co: Vec<f64>,
    reward: Option<f64>,
}

#[derive(Clone, Debug)]
struct RhVehicle {
    id: usize,
    state: RhState,
    /// Last node reached.
    node: NodeId,
    route: Option<Route>,
    vacant_since: f64,
    fresh_idle: bool,
    pickup_dist: f64,
    epoch: Option<Epoch>,
}

impl RhVehicle {
    /// Next node on the way and the distance to it.
    fn locate(&self) -> (NodeId, f64) {
        match &self.route {
            Some(r) if !r.progress.is_finished() => (r.targets[r.progress.leg], r.progress.remaining()),
            _ => (self.node, 0.0),
        }
    }

    fn is_moving(&self) -> bool {
        self.route.as_ref().is_some_and(|r| !r.progress.is_finished())
    }
}

/// A policy attached to the simulation for the `marl` strategy.
pub struct Learner {
    pub agent: Maddpg,
    /// Exploration noise σ.
    pub sigma: f64,
    /// Store experiences and train while running.
    pub learn: bool,
}

#[derive(Clone, Debug, Default)]
struct AreaPrediction {
    k_hat: u32,
    surge: u32,
    p_hat: f64,
    p_max: f64,
    offers_left: u32,
}

/// Aggregates of one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    pub users: usize,
    pub completed: usize,
    pub abandoned: usize,
    /// Abandoned because no journey existed.
    pub no_path: usize,
    /// Users whose first plan included a ride-hailing leg.
    pub rh_first_choice: usize,
    pub rh_requests: usize,
    /// Mean request-to-pickup wait over pickups after warm-up.
    pub mean_wait_s: Option<f64>,
    /// Mean travel time of users completed after warm-up.
    pub mean_travel_time_s: Option<f64>,
    /// Mean of the wait signal after warm-up.
    pub mean_wait_signal_s: Option<f64>,
    pub rewards: Vec<f64>,
    pub unconverged_auctions: usize,
}

pub struct Simulation {
    cfg: ScenarioConfig,
    g: MultiModalGraph,
    users: Vec<User>,
    next_departure: usize,
    transit: TransitSystem,
    fleet: Vec<RhVehicle>,
    mfd: Mfd,
    disruption: Option<ResolvedDisruption>,
    disrupted: bool,
    step_index: u64,
    now: f64,
    rh_queue: Vec<usize>,
    area_departures: Vec<Vec<f64>>,
    estimators: Vec<DemandEstimator>,
    requests_window: Vec<u32>,
    next_window: f64,
    first_window: bool,
    pred: Vec<AreaPrediction>,
    fares: Vec<f64>,
    station_area: Vec<(NodeId, usize, DepotId)>,
    stranded_log: Vec<(f64, DepotId)>,
    recent_waits: VecDeque<(f64, f64)>,
    learner: Option<Learner>,
    noise_rng: SimRng,
    strategy_rng: SimRng,
    choice_rng: SimRng,
    explore_rng: SimRng,
    replay_rng: SimRng,
    records: Records,
    summary: Summary,
}

fn invariant(t: f64, msg: impl Into<String>) -> Error {
    Error::Invariant { t, msg: msg.into() }
}

impl Simulation {
    /// Builds the network and demand table from the config.
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        let errs = cfg.validate();
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        let g = build_manhattan_grid(&cfg.grid)?;
        let trips = generate_demand(&cfg.demand, &g, cfg.seed)?;
        Simulation::with_parts(cfg, g, trips)
    }

    /// Runs over a given network and demand table; the grid section of the
    /// config is ignored.
    pub fn with_parts(cfg: ScenarioConfig, g: MultiModalGraph, mut trips: Vec<Trip>) -> Result<Self> {
        trips.sort_by(|a, b| a.depart_s.total_cmp(&b.depart_s).then(a.user_id.cmp(&b.user_id)));
        let mut ids: Vec<usize> = trips.iter().map(|t| t.user_id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(vec![format!("duplicate user id {}", w[0])]));
        }
        let disruption = cfg.disruption.as_ref().map(|d| d.resolve(&g)).transpose()?;
        let depots = g.depots.len();
        if cfg.fleet_size > 0 && depots == 0 {
            return Err(Error::Config(vec!["a fleet needs at least one depot".into()]));
        }
        let homes: Vec<NodeId> = match cfg.fleet_start {
            FleetStart::Depots => initial_depots(&g, cfg.fleet_size).into_iter().map(|r| g.depots[r].node).collect(),
            FleetStart::Destinations => {
                sample_destinations(&cfg.demand, &g, cfg.fleet_size, &mut stream(cfg.seed, Stream::Fleet))?
            }
        };
        let fleet = (0..cfg.fleet_size)
            .map(|id| RhVehicle {
                id,
                state: RhState::Idle,
                node: homes[id],
                route: None,
                vacant_since: 0.0,
                fresh_idle: true,
                pickup_dist: 0.0,
                epoch: None,
            })
            .collect();
        let mut area_departures = vec![Vec::new(); depots];
        for t in &trips {
            if depots > 0 {
                area_departures[g.area_of(t.origin_node)].push(t.depart_s);
            }
        }
        let share = cfg.demand.rh_market_share;
        let horizon_users = trips.iter().filter(|t| t.depart_s < cfg.horizon_s).count() as f64;
        let estimators = (0..depots)
            .map(|r| {
                let frac = area_departures[r].len() as f64 / trips.len().max(1) as f64;
                let mu = share * horizon_users * frac * cfg.operator.window_s / cfg.horizon_s;
                DemandEstimator::new(mu, mu.sqrt(), cfg.operator.history_windows, cfg.operator.sigma_floor)
            })
            .collect();
        let fares = g
            .depots
            .iter()
            .map(|d| {
                let lengths: Vec<f64> = d.service_area.iter().map(|&n| g.road_dist(d.node, n)).collect();
                mean_fare(&lengths, cfg.economics.c_ride)
            })
            .collect();
        let mut station_area = Vec::new();
        if depots > 0 {
            for l in &g.lines {
                for &s in &l.stations {
                    station_area.push((s, l.id, g.area_of(g.road_node_of(s))));
                }
            }
        }
        let mut member_rng = stream(cfg.seed, Stream::Membership);
        let users = trips
            .into_iter()
            .map(|trip| User {
                rh_access: member_rng.random::<f64>() < share,
                trip,
                state: UserState::NotDeparted,
                legs: Vec::new(),
                leg: 0,
                replans: 0,
                dist_m: 0.0,
                boardings: 0,
                waits_s: 0.0,
                modes: Vec::new(),
            })
            .collect();
        let seed = cfg.seed;
        Ok(Simulation {
            transit: TransitSystem::new(&g, cfg.transit.clone()),
            mfd: Mfd::new(cfg.mfd.clone(), &g),
            users,
            next_departure: 0,
            fleet,
            disruption,
            disrupted: false,
            step_index: 0,
            now: 0.0,
            rh_queue: Vec::new(),
            area_departures,
            estimators,
            requests_window: vec![0; depots],
            next_window: 0.0,
            first_window: true,
            pred: vec![AreaPrediction::default(); depots],
            fares,
            station_area,
            stranded_log: Vec::new(),
            recent_waits: VecDeque::new(),
            learner: None,
            noise_rng: stream(seed, Stream::Noise),
            strategy_rng: stream(seed, Stream::Strategy),
            choice_rng: stream(seed, Stream::Choice),
            explore_rng: stream(seed, Stream::Exploration),
            replay_rng: stream(seed, Stream::Replay),
            records: Records::default(),
            summary: Summary::default(),
            g,
            cfg,
        })
    }

    pub fn set_learner(&mut self, learner: Learner) -> Result<()> {
        let d = self.g.depots.len();
        if learner.agent.obs_dim() != observation_dim(d) || learner.agent.actions() != d + 1 {
            return Err(Error::Shape(format!(
                "policy expects {} inputs and {} actions; the network has {} depots",
                learner.agent.obs_dim(),
                learner.agent.actions(),
                d
            )));
        }
        self.learner = Some(learner);
        Ok(())
    }

    pub fn take_learner(&mut self) -> Option<Learner> {
        self.learner.take()
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn graph(&self) -> &MultiModalGraph {
        &self.g
    }

    pub fn transit(&self) -> &TransitSystem {
        &self.transit
    }

    pub fn trips(&self) -> impl Iterator<Item = &Trip> {
        self.users.iter().map(|u| &u.trip)
    }

    pub fn user_state(&self, user: usize) -> Option<UserState> {
        self.users.iter().find(|u| u.trip.user_id == user).map(|u| u.state)
    }

    /// Start of the next step.
    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.cfg.dt_s
    }

    pub fn is_done(&self) -> bool {
        self.time() + 1e-9 >= self.cfg.horizon_s
    }

    pub fn records(&self) -> &Records {
        &self.records
    }

    pub fn fleet_counts(&self) -> FleetRow {
        let mut row = FleetRow { t: self.time(), idle: 0, relocating: 0, pickup: 0, serving: 0 };
        for v in &self.fleet {
            match v.state {
                RhState::Idle => row.idle += 1,
                RhState::Relocating(_) => row.relocating += 1,
                RhState::Pickup(_) => row.pickup += 1,
                RhState::Serving(_) => row.serving += 1,
            }
        }
        row
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        while !self.is_done() {
            self.step()?;
        }
        Ok(())
    }

    /// Advances the clock by one step.
    pub fn step(&mut self) -> Result<()> {
        if self.is_done() {
            return Err(invariant(self.time(), "step past the horizon"));
        }
        let t = self.time();
        self.now = t;
        let departing = self.departures(t);
        for u in departing {
            let origin = self.users[u].trip.origin_node;
            self.plan(u, origin, true)?;
        }
        self.apply_disruption(t)?;
        self.transit_phase()?;
        self.ridehail_phase()?;
        self.traffic_phase(t);
        self.now = t + self.cfg.dt_s;
        self.movement_phase()?;
        self.record(self.now)?;
        self.step_index += 1;
        if self.is_done() {
            self.close_epochs()?;
        }
        Ok(())
    }

    // phase 1

    fn departures(&mut self, t: f64) -> Vec<usize> {
        let mut out = Vec::new();
        while self.next_departure < self.users.len() && self.users[self.next_departure].trip.depart_s <= t {
            out.push(self.next_departure);
            self.next_departure += 1;
        }
        out
    }

    // phase 2

    fn plan(&mut self, u: usize, from: NodeId, first: bool) -> Result<()> {
        let dest = self.users[u].trip.dest_node;
        if from == dest {
            self.users[u].state = UserState::Completed { at: self.now };
            return Ok(());
        }
        let tm = self.travel_model(self.users[u].rh_access);
        let mut cands = candidate_paths(&self.g, from, dest, &self.cfg.demand, &tm);
        if cands.is_empty() && !self.users[u].rh_access {
            self.users[u].rh_access = true;
            let tm = self.travel_model(true);
            cands = candidate_paths(&self.g, from, dest, &self.cfg.demand, &tm);
        }
        if cands.is_empty() {
            self.summary.no_path += 1;
            self.users[u].state = UserState::Abandoned { at: self.now };
            return Ok(());
        }
        let pick = choose_path(&cands, self.cfg.demand.theta_per_min, &mut self.choice_rng);
        if first && cands[pick].uses_rh() {
            self.summary.rh_first_choice += 1;
        }
        let user = &mut self.users[u];
        user.legs = cands[pick].legs.clone();
        user.leg = 0;
        self.begin_leg(u)
    }

    fn travel_model(&self, rh: bool) -> TravelModel<'_> {
        TravelModel {
            car_speed: &self.mfd.car_speed,
            bus_factor: self.mfd.params.bus_factor,
            metro_speed: self.cfg.transit.metro_speed_mps,
            train_speed: self.cfg.transit.train_speed_mps,
            walk_speed: self.cfg.demand.walk_speed_mps,
            suspended: self.transit.suspended(),
            rh,
            masked: true,
        }
    }

    fn replan(&mut self, u: usize, from: NodeId) -> Result<()> {
        self.plan(u, self.g.road_node_of(from), false)
    }

    fn begin_leg(&mut self, u: usize) -> Result<()> {
        loop {
            let now = self.now;
            let user = &mut self.users[u];
            let Some(leg) = user.legs.get(user.leg).cloned() else {
                user.state = UserState::Completed { at: now };
                return Ok(());
            };
            match leg.mode {
                LegMode::Walk => {
                    user.dist_m += leg.dist_m;
                    if leg.time_s <= 0.0 {
                        user.leg += 1;
                        continue;
                    }
                    user.state = UserState::Walking { remaining_s: leg.time_s };
                }
                LegMode::Rh => {
                    user.state = UserState::WaitingRh { since: now };
                    self.rh_queue.push(u);
                    self.summary.rh_requests += 1;
                    if !self.requests_window.is_empty() {
                        self.requests_window[self.g.area_of(leg.from)] += 1;
                    }
                }
                LegMode::Ride(line) => {
                    let l = &self.g.lines[line];
                    let (Some(board), Some(alight)) = (l.station_index(leg.from), l.station_index(leg.to)) else {
                        return Err(invariant(now, format!("user {u} rides line {} off its stations", l.name)));
                    };
                    if self.transit.is_suspended(line) {
                        self.strand(u, leg.from, "closed_on_arrival");
                        return self.replan(u, leg.from);
                    }
                    user.state = UserState::WaitingTransit {
                        station: leg.from,
                        since: now,
                        timeout_s: l.headway_s + self.cfg.demand.transit_timeout_extra_s,
                    };
                    self.transit.enqueue(&self.g, Rider { user: u, line, board, alight, since: now });
                }
            }
            return Ok(());
        }
    }

    fn strand(&mut self, u: usize, station: NodeId, cause: &str) {
        self.users[u].rh_access = true;
        self.records.stranded.push(StrandedRow {
            t: self.now,
            user_id: self.users[u].trip.user_id,
            station_id: station,
            cause: cause.to_string(),
        });
        if !self.g.depots.is_empty() {
            self.stranded_log.push((self.now, self.g.area_of(self.g.road_node_of(station))));
        }
    }

    // phase 3

    fn apply_disruption(&mut self, t: f64) -> Result<()> {
        let Some(d) = self.disruption.clone() else { return Ok(()) };
        if !self.disrupted && t + 1e-9 >= d.start_s && t < d.end_s {
            self.disrupted = true;
            self.g.deactivate(&d.edges);
            let mut events = Vec::new();
            for &line in &d.lines {
                events.extend(self.transit.suspend(&self.g, line));
            }
            self.handle_transit_events(events)?;
        } else if self.disrupted && t + 1e-9 >= d.end_s {
            self.disrupted = false;
            self.g.restore_all();
            for &line in &d.lines {
                self.transit.resume(line);
            }
        }
        Ok(())
    }

    // phase 4

    fn transit_phase(&mut self) -> Result<()> {
        let mfd = &self.mfd;
        let events = self.transit.step(&self.g, self.now, self.cfg.dt_s, |z| mfd.speed(z, VehicleType::Bus));
        self.handle_transit_events(events)?;
        for u in 0..self.users.len() {
            let UserState::WaitingTransit { station, since, timeout_s } = self.users[u].state else { continue };
            let user = &self.users[u];
            match replan_decision(self.now - since, timeout_s, user.replans, self.cfg.demand.max_replans) {
                Replan::Keep => {}
                decision => {
                    self.transit.withdraw(station, u);
                    let user = &mut self.users[u];
                    user.waits_s += self.now - since;
                    if decision == Replan::Abandon {
                        user.state = UserState::Abandoned { at: self.now };
                    } else {
                        user.replans += 1;
                        self.replan(u, station)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn handle_transit_events(&mut self, events: Vec<TransitEvent>) -> Result<()> {
        for ev in events {
            match ev {
                TransitEvent::Boarded { user, vehicle } => {
                    let mode = self.g.lines[self.transit.vehicles[vehicle].line].mode.name();
                    let now = self.now;
                    let us = &mut self.users[user];
                    let UserState::WaitingTransit { since, .. } = us.state else {
                        return Err(invariant(now, format!("user {user} boarded without waiting")));
                    };
                    us.waits_s += now - since;
                    us.use_mode(mode);
                    us.state = UserState::Onboard;
                }
                TransitEvent::Alighted { user, .. } => {
                    let us = &mut self.users[user];
                    us.dist_m += us.legs[us.leg].dist_m;
                    us.leg += 1;
                    self.begin_leg(user)?;
                }
                TransitEvent::Stranded { user, station, cause } => {
                    if let UserState::WaitingTransit { since, .. } = self.users[user].state {
                        self.users[user].waits_s += self.now - since;
                    }
                    self.strand(user, station, cause);
                    self.replan(user, station)?;
                }
            }
        }
        Ok(())
    }

    // phase 5

    fn ridehail_phase(&mut self) -> Result<()> {
        if self.g.depots.is_empty() {
            return self.rh_timeouts();
        }
        if self.now + 1e-9 >= self.next_window {
            self.predict()?;
            self.next_window += self.cfg.operator.window_s;
        }
        self.rebalance()?;
        self.rh_timeouts()?;
        self.match_waiting()
    }

    fn predict(&mut self) -> Result<()> {
        let w = self.cfg.operator.window_s;
        let delay = self.cfg.operator.response_delay_s;
        let p = self.cfg.operator.noise;
        let t = self.now;
        let informed = match &self.cfg.disruption {
            Some(d) if self.disrupted && t - d.start_s >= delay => Some(d.start_s),
            _ => None,
        };
        for r in 0..self.g.depots.len() {
            if !self.first_window {
                self.estimators[r].push(self.requests_window[r] as f64);
            }
            self.requests_window[r] = 0;
            let deps = &self.area_departures[r];
            let n = deps.partition_point(|&x| x < t + w) - deps.partition_point(|&x| x < t);
            let k = self.cfg.demand.rh_market_share * n as f64;
            let k_hat = noisy_count(k, p, &mut self.noise_rng);
            let surge = match informed {
                Some(start) => {
                    let stranded = self
                        .stranded_log
                        .iter()
                        .filter(|(ts, a)| *a == r && *ts >= start && *ts <= t - delay)
                        .count();
                    noisy_count(stranded as f64, p, &mut self.noise_rng)
                }
                None => 0,
            };
            let (mu, sigma) = self.estimators[r].mu_sigma();
            let km = k_max(mu, sigma, self.cfg.operator.threshold)?;
            self.pred[r] = AreaPrediction {
                k_hat,
                surge,
                p_hat: survival_probability(k_hat as f64, mu, sigma)?,
                p_max: survival_probability(km as f64, mu, sigma)?,
                offers_left: relocation_offer_count(k_hat, km, surge),
            };
        }
        self.first_window = false;
        Ok(())
    }

    fn is_at_depot(&self, v: &RhVehicle) -> bool {
        self.g.depots.iter().any(|d| d.node == v.node)
    }

    /// Idle vehicles in each area and vehicles relocating to each depot.
    fn supply(&self) -> (Vec<u32>, Vec<u32>) {
        let d = self.g.depots.len();
        let (mut idle, mut reloc) = (vec![0u32; d], vec![0u32; d]);
        for v in &self.fleet {
            match v.state {
                RhState::Idle => idle[self.g.area_of(v.node)] += 1,
                RhState::Relocating(r) => reloc[r] += 1,
                _ => {}
            }
        }
        (idle, reloc)
    }

    /// Depot vacancy, capped by the offers still open when `offers` is set.
    fn slots(&self, offers: bool) -> Vec<u32> {
        let (idle, reloc) = self.supply();
        self.g
            .depots
            .iter()
            .enumerate()
            .map(|(r, dep)| {
                let vacancy = dep.capacity.saturating_sub(idle[r] + reloc[r]);
                if offers {
                    self.pred[r].offers_left.min(vacancy)
                } else {
                    vacancy
                }
            })
            .collect()
    }

    fn context(&mut self, vehicles: Vec<usize>, with_arrival: bool) -> StrategyContext {
        let d = self.g.depots.len();
        let slots = self.slots(self.cfg.strategy != StrategyKind::Random);
        let mut utility = Vec::with_capacity(vehicles.len());
        let mut arrival = Vec::with_capacity(vehicles.len());
        for &v in &vehicles {
            let node = self.fleet[v].node;
            let speed = self.mfd.speed(self.g.zone_of_node(node), VehicleType::Rh);
            let mut urow = Vec::with_capacity(d);
            let mut arow = Vec::with_capacity(d);
            for (r, dep) in self.g.depots.iter().enumerate() {
                let dist = self.g.road_dist(node, dep.node);
                let p = &self.pred[r];
                let u = driver_utility(self.fares[r], p.p_hat, p.p_max, self.cfg.economics.c_mileage, dist);
                urow.push(if u > 0.0 && u.is_finite() { u } else { f64::NEG_INFINITY });
                arow.push(if with_arrival {
                    sample_arrival_time(dist / speed, self.cfg.operator.rho, &mut self.strategy_rng)
                } else {
                    0.0
                });
            }
            utility.push(urow);
            arrival.push(arow);
        }
        StrategyContext {
            vehicle_ids: vehicles,
            slots,
            operator_gain: vec![1.0; d],
            driver_utility: utility,
            arrival,
        }
    }

    fn rebalance(&mut self) -> Result<()> {
        let kind = self.cfg.strategy;
        let fresh: Vec<usize> =
            self.fleet.iter().filter(|v| v.fresh_idle && v.state == RhState::Idle).map(|v| v.id).collect();
        for v in &mut self.fleet {
            v.fresh_idle = false;
        }
        match kind {
            StrategyKind::None => Ok(()),
            StrategyKind::Marl => self.marl_decide(fresh),
            StrategyKind::Random => {
                if fresh.is_empty() {
                    return Ok(());
                }
                let ctx = self.context(fresh, false);
                let dec = strategy_random(&ctx, &mut self.strategy_rng);
                self.apply(&ctx, dec, kind)
            }
            StrategyKind::Centralized | StrategyKind::Decentralized => {
                let cands: Vec<usize> = self
                    .fleet
                    .iter()
                    .filter(|v| v.state == RhState::Idle && !self.is_at_depot(v))
                    .map(|v| v.id)
                    .collect();
                if cands.is_empty() || self.pred.iter().all(|p| p.offers_left == 0) {
                    return Ok(());
                }
                let ctx = self.context(cands, kind == StrategyKind::Decentralized);
                let dec = if kind == StrategyKind::Centralized {
                    strategy_centralized(&ctx)
                } else {
                    strategy_decentralized(&ctx, AUCTION_ROUNDS)
                };
                if dec.unconverged {
                    self.summary.unconverged_auctions += 1;
                }
                self.apply(&ctx, dec, kind)
            }
        }
    }

    fn apply(&mut self, ctx: &StrategyContext, dec: RebalanceDecision, kind: StrategyKind) -> Result<()> {
        for a in dec.assignments {
            let v = ctx.vehicle_ids[a.vehicle];
            self.relocate(v, a.area, kind, a.utility)?;
        }
        Ok(())
    }

    fn relocate(&mut self, v: usize, depot: DepotId, kind: StrategyKind, utility: f64) -> Result<()> {
        self.pred[depot].offers_left = self.pred[depot].offers_left.saturating_sub(1);
        let target = self.g.depots[depot].node;
        if self.fleet[v].node == target && !self.fleet[v].is_moving() {
            return Ok(());
        }
        let state = step_vehicle_state(self.fleet[v].state, Some(RhEvent::AcceptOffer(depot)))?;
        self.fleet[v].state = state;
        self.fleet[v].route = Some(self.route(v, target)?);
        self.records.decisions.push(DecisionRow {
            t: self.now,
            veh_id: v,
            depot_id: depot,
            strategy: kind.name().to_string(),
            utility,
        });
        Ok(())
    }

    fn route(&self, v: usize, to: NodeId) -> Result<Route> {
        let (next, rem) = self.fleet[v].locate();
        let path = self.g.road_path(next, to);
        if path.is_empty() {
            return Err(invariant(self.now, format!("vehicle {v} cannot reach node {to}")));
        }
        let mut targets = Vec::with_capacity(path.len());
        let mut legs = Vec::with_capacity(path.len());
        if rem > 0.0 {
            targets.push(next);
            legs.push(rem);
        }
        for w in path.windows(2) {
            targets.push(w[1]);
            legs.push(self.g.road_dist(w[0], w[1]));
        }
        Ok(Route { targets, progress: TripProgress::new(legs) })
    }

    fn features(&self) -> GlobalFeatures {
        let d = self.g.depots.len();
        let (idle, reloc) = self.supply();
        let mut f = GlobalFeatures::zeros(d);
        for r in 0..d {
            let p = &self.pred[r];
            f.relocating[r] = reloc[r] as f64;
            f.gap[r] = (p.k_hat + p.surge) as f64 - (idle[r] + reloc[r]) as f64;
        }
        for &(_, line, area) in &self.station_area {
            if !self.transit.is_suspended(line) {
                f.transit[area] += 1.0;
            }
        }
        f
    }

    fn marl_decide(&mut self, fresh: Vec<usize>) -> Result<()> {
        if fresh.is_empty() {
            return Ok(());
        }
        let Some(mut learner) = self.learner.take() else {
            return Err(Error::Config(vec!["strategy `marl` needs a policy".into()]));
        };
        let out = self.marl_decide_with(&mut learner, fresh);
        self.learner = Some(learner);
        out
    }

    /// Raw observation of vehicle `v`; its earnings channel holds its own
    /// driver utility for each depot.
    fn observation(&self, feats: &GlobalFeatures, radius: f64, v: usize) -> Vec<f64> {
        let node = self.fleet[v].locate().0;
        let nearby = self
            .fleet
            .iter()
            .filter(|o| o.id != v && o.state == RhState::Idle && self.g.road_dist(o.node, node) <= radius)
            .count();
        let mut own = feats.clone();
        for (r, dep) in self.g.depots.iter().enumerate() {
            let p = &self.pred[r];
            let dist = self.g.road_dist(node, dep.node);
            own.revenue[r] = driver_utility(self.fares[r], p.p_hat, p.p_max, self.cfg.economics.c_mileage, dist);
        }
        raw_observation(&own, nearby as f64)
    }

    /// Closes every open epoch at the horizon. Vehicles still vacant are
    /// rewarded for the vacancy so far.
    fn close_epochs(&mut self) -> Result<()> {
        let Some(mut learner) = self.learner.take() else {
            return Ok(());
        };
        let out = self.close_epochs_with(&mut learner);
        self.learner = Some(learner);
        out
    }

    fn close_epochs_with(&mut self, learner: &mut Learner) -> Result<()> {
        let feats = self.features();
        let radius = learner.agent.cfg.local_radius_m;
        let co = if learner.agent.cfg.joint_critic { vec![0.0; learner.agent.actions()] } else { Vec::new() };
        for v in 0..self.fleet.len() {
            let Some(prev) = self.fleet[v].epoch.take() else {
                continue;
            };
            let r = match prev.reward {
                Some(r) => r,
                None => {
                    let r = learner.agent.cfg.reward(self.now - self.fleet[v].vacant_since);
                    self.summary.rewards.push(r);
                    r
                }
            };
            if learner.learn {
                let s2 = learner.agent.norm.normalize(&self.observation(&feats, radius, v));
                let e = Experience { s: prev.s, a: prev.a, r, s2, co: prev.co, co2: co.clone() };
                learner.agent.remember(e, &mut self.replay_rng)?;
            }
        }
        Ok(())
    }

    fn marl_decide_with(&mut self, learner: &mut Learner, fresh: Vec<usize>) -> Result<()> {
        let feats = self.features();
        let mut vacancy = self.slots(false);
        let radius = learner.agent.cfg.local_radius_m;
        let mut acts = Vec::with_capacity(fresh.len());
        for &v in &fresh {
            let raw = self.observation(&feats, radius, v);
            if learner.learn {
                learner.agent.norm.observe(&raw);
            }
            let s = learner.agent.norm.normalize(&raw);
            let (a, _) = act(&learner.agent.actor, &s, learner.sigma, &mut self.explore_rng)?;
            let choice = argmax_allowed(&a, |i| vacancy[i - 1] > 0);
            if choice > 0 {
                vacancy[choice - 1] -= 1;
            }
            acts.push((v, s, a, choice));
        }
        let n = acts.len();
        let joint = learner.agent.cfg.joint_critic;
        let actions = learner.agent.actions();
        let total: Vec<f64> =
            (0..actions).map(|j| acts.iter().map(|(_, _, a, _)| a[j]).sum::<f64>()).collect();
        for (v, s, a, choice) in acts {
            let co = if !joint {
                Vec::new()
            } else if n > 1 {
                (0..actions).map(|j| (total[j] - a[j]) / (n - 1) as f64).collect()
            } else {
                vec![0.0; actions]
            };
            if let Some(prev) = self.fleet[v].epoch.take() {
                if let Some(r) = prev.reward {
                    let e = Experience { s: prev.s, a: prev.a, r, s2: s.clone(), co: prev.co, co2: co.clone() };
                    if learner.learn {
                        learner.agent.remember(e, &mut self.replay_rng)?;
                    }
                }
            }
            let score = a[choice];
            self.fleet[v].epoch = Some(Epoch { s, a, co, reward: None });
            if choice > 0 {
                self.relocate(v, choice - 1, StrategyKind::Marl, score)?;
            }
        }
        Ok(())
    }

    fn rh_timeouts(&mut self) -> Result<()> {
        let mut i = 0;
        while i < self.rh_queue.len() {
            let u = self.rh_queue[i];
            let UserState::WaitingRh { since } = self.users[u].state else {
                return Err(invariant(self.now, format!("user {u} queued for a ride without waiting")));
            };
            let decision =
                replan_decision(self.now - since, self.cfg.demand.rh_timeout_s, self.users[u].replans, self.cfg.demand.max_replans);
            if decision == Replan::Keep {
                i += 1;
                continue;
            }
            self.rh_queue.remove(i);
            let from = self.users[u].legs[self.users[u].leg].from;
            let user = &mut self.users[u];
            user.waits_s += self.now - since;
            if decision == Replan::Abandon {
                user.state = UserState::Abandoned { at: self.now };
            } else {
                user.replans += 1;
                self.replan(u, from)?;
            }
        }
        Ok(())
    }

    fn match_waiting(&mut self) -> Result<()> {
        if self.rh_queue.is_empty() {
            return Ok(());
        }
        let vacant: Vec<usize> = self.fleet.iter().filter(|v| v.state.is_vacant()).map(|v| v.id).collect();
        if vacant.is_empty() {
            return Ok(());
        }
        let locs: Vec<(NodeId, f64)> = self.fleet.iter().map(|v| v.locate()).collect();
        let reqs = std::mem::take(&mut self.rh_queue);
        let nodes: Vec<NodeId> = reqs.iter().map(|&u| self.users[u].legs[self.users[u].leg].from).collect();
        let g = &self.g;
        let res = match_requests(reqs.len(), &vacant, self.cfg.operator.match_radius_m, |r, v| {
            locs[v].1 + g.road_dist(locs[v].0, nodes[r])
        });
        for (i, m) in res.into_iter().enumerate() {
            let u = reqs[i];
            let Some((v, d)) = m else {
                self.rh_queue.push(u);
                continue;
            };
            let UserState::WaitingRh { since } = self.users[u].state else {
                return Err(invariant(self.now, format!("user {u} matched without waiting")));
            };
            self.users[u].state = UserState::AssignedRh { vehicle: v, since };
            let vacant_s = self.now - self.fleet[v].vacant_since;
            let reward = self.learner.as_ref().map(|l| l.agent.cfg.reward(vacant_s));
            let veh = &mut self.fleet[v];
            veh.state = step_vehicle_state(veh.state, Some(RhEvent::Match(u)))?;
            veh.pickup_dist = d;
            if let (Some(e), Some(r)) = (veh.epoch.as_mut(), reward) {
                if e.reward.is_none() {
                    e.reward = Some(r);
                    self.summary.rewards.push(r);
                }
            }
            self.fleet[v].route = Some(self.route(v, nodes[i])?);
        }
        Ok(())
    }

    // phase 6

    fn traffic_phase(&mut self, t: f64) {
        let nz = self.g.zones.count();
        let mut acc = vec![RegionAccumulation::default(); nz];
        let buses = self.transit.buses_by_zone(&self.g);
        for (z, b) in buses.into_iter().enumerate() {
            acc[z].bus = b;
        }
        for v in self.fleet.iter().filter(|v| v.is_moving()) {
            let (next, _) = v.locate();
            acc[self.g.zone_of_node(next)].add(VehicleType::Rh);
        }
        self.mfd.update(&mut acc);
        for (z, a) in acc.iter().enumerate() {
            self.records.traffic.push(TrafficRow {
                region: z,
                t,
                n_car: a.car,
                n_bus: a.bus,
                n_rh: a.rh,
                v_car: self.mfd.speed(z, VehicleType::Car),
                v_bus: self.mfd.speed(z, VehicleType::Bus),
            });
        }
    }

    // phase 7

    fn movement_phase(&mut self) -> Result<()> {
        let dt = self.cfg.dt_s;
        for v in 0..self.fleet.len() {
            let Some(mut route) = self.fleet[v].route.take() else { continue };
            if !route.progress.is_finished() {
                let (next, _) = self.fleet[v].locate_in(&route);
                let speed = self.mfd.speed(self.g.zone_of_node(next), VehicleType::Rh);
                let adv = advance_trip(&mut route.progress, speed, dt);
                if let Some(&last) = adv.completed.last() {
                    self.fleet[v].node = route.targets[last];
                }
            }
            if !route.progress.is_finished() {
                self.fleet[v].route = Some(route);
                continue;
            }
            self.arrive(v)?;
        }
        for u in 0..self.users.len() {
            if let UserState::Walking { remaining_s } = self.users[u].state {
                let left = remaining_s - dt;
                if left > 1e-9 {
                    self.users[u].state = UserState::Walking { remaining_s: left };
                } else {
                    self.users[u].leg += 1;
                    self.begin_leg(u)?;
                }
            }
        }
        Ok(())
    }

    fn arrive(&mut self, v: usize) -> Result<()> {
        let now = self.now;
        match self.fleet[v].state {
            RhState::Idle => {}
            RhState::Relocating(_) => {
                self.fleet[v].state = step_vehicle_state(self.fleet[v].state, Some(RhEvent::ArriveDepot))?;
            }
            RhState::Pickup(u) => {
                self.fleet[v].state = step_vehicle_state(self.fleet[v].state, Some(RhEvent::PickUp))?;
                let UserState::AssignedRh { since, .. } = self.users[u].state else {
                    return Err(invariant(now, format!("vehicle {v} picked up user {u} who was not assigned")));
                };
                let wait = now - since;
                let user = &mut self.users[u];
                user.waits_s += wait;
                user.use_mode("rh");
                user.state = UserState::InRh { vehicle: v };
                let dest = user.legs[user.leg].to;
                self.records.matches.push(MatchRow {
                    t: now,
                    user_id: user.trip.user_id,
                    veh_id: v,
                    wait_s: wait,
                    pickup_dist_m: self.fleet[v].pickup_dist,
                });
                self.recent_waits.push_back((now, wait));
                self.fleet[v].route = Some(self.route(v, dest)?);
            }
            RhState::Serving(u) => {
                self.fleet[v].state = step_vehicle_state(self.fleet[v].state, Some(RhEvent::DropOff))?;
                self.fleet[v].vacant_since = now;
                self.fleet[v].fresh_idle = true;
                let user = &mut self.users[u];
                user.dist_m += user.legs[user.leg].dist_m;
                user.leg += 1;
                self.begin_leg(u)?;
            }
        }
        Ok(())
    }

    // phase 8

    fn record(&mut self, now: f64) -> Result<()> {
        let fleet = FleetRow { t: now, ..self.fleet_counts() };
        if fleet.total() as usize != self.fleet.len() {
            return Err(invariant(now, "fleet states do not add up to the fleet size"));
        }
        self.records.fleet.push(fleet);
        let window = self.cfg.performance_window_s;
        while self.recent_waits.front().is_some_and(|(t, _)| *t < now - window) {
            self.recent_waits.pop_front();
        }
        let (mut sum, mut n) = (0.0, 0usize);
        for (_, w) in &self.recent_waits {
            sum += w;
            n += 1;
        }
        let (mut waiting_transit, mut onboard) = (0usize, 0usize);
        for u in &self.users {
            match u.state {
                UserState::WaitingRh { since } | UserState::AssignedRh { since, .. } => {
                    sum += now - since;
                    n += 1;
                }
                UserState::WaitingTransit { .. } => waiting_transit += 1,
                UserState::Onboard => onboard += 1,
                _ => {}
            }
        }
        self.records.wait_signal.push((now, (n > 0).then(|| sum / n as f64)));
        if waiting_transit != self.transit.waiting_count() || onboard != self.transit.onboard_count() {
            return Err(invariant(
                now,
                format!(
                    "transit holds {} waiting and {} onboard, users say {} and {}",
                    self.transit.waiting_count(),
                    self.transit.onboard_count(),
                    waiting_transit,
                    onboard
                ),
            ));
        }
        let assigned = self.users.iter().filter(|u| matches!(u.state, UserState::AssignedRh { .. })).count();
        if assigned != fleet.pickup as usize {
            return Err(invariant(now, "assigned users and pickup vehicles differ"));
        }
        Ok(())
    }

    /// Ends the run: per-user rows and the summary.
    pub fn finish(mut self) -> (Records, Summary, Option<Learner>) {
        let warmup = self.cfg.warmup_s;
        let mut s = std::mem::take(&mut self.summary);
        s.users = self.users.len();
        let mut travel = Vec::new();
        for u in &self.users {
            let (time, completed) = match u.state {
                UserState::Completed { at } => {
                    s.completed += 1;
                    if at >= warmup {
                        travel.push(at - u.trip.depart_s);
                    }
                    (Some(at - u.trip.depart_s), true)
                }
                UserState::Abandoned { .. } => {
                    s.abandoned += 1;
                    (None, false)
                }
                _ => (None, false),
            };
            self.records.users.push(UserRow {
                user_id: u.trip.user_id,
                total_time_s: time,
                total_dist_m: u.dist_m,
                transfers: u.boardings.saturating_sub(1),
                waits_s: u.waits_s,
                modes: u.modes.join("+"),
                completed,
            });
        }
        self.records.users.sort_by_key(|r| r.user_id);
        s.mean_travel_time_s = mean(&travel);
        let waits: Vec<f64> = self.records.matches.iter().filter(|m| m.t >= warmup).map(|m| m.wait_s).collect();
        s.mean_wait_s = mean(&waits);
        let signal: Vec<f64> =
            self.records.wait_signal.iter().filter(|(t, _)| *t >= warmup).filter_map(|(_, w)| *w).collect();
        s.mean_wait_signal_s = mean(&signal);
        (self.records, s, self.learner)
    }
}

impl RhVehicle {
    fn locate_in(&self, route: &Route) -> (NodeId, f64) {
        (route.targets[route.progress.leg], route.progress.remaining())
    }
}

/// Round-robin over depots, skipping full ones while any has room.
fn initial_depots(g: &MultiModalGraph, n: usize) -> Vec<DepotId> {
    let d = g.depots.len();
    let mut count = vec![0u32; d];
    let mut out = Vec::with_capacity(n);
    let mut r = 0;
    for _ in 0..n {
        if (0..d).any(|i| count[i] < g.depots[i].capacity) {
            while count[r % d] >= g.depots[r % d].capacity {
                r += 1;
            }
        }
        count[r % d] += 1;
        out.push(r % d);
        r += 1;
    }
    out
}

pub(crate) fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}
