//! Trip-based macroscopic fundamental diagram.
//!
//! Each zone is one region. Regional speed follows an exponential
//! (Underwood) relation to the passenger-car-equivalent accumulation and is
//! sampled once per step; trips advance by speed times the step length.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{MultiModalGraph, ZoneClass};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleType {
    Car,
    Bus,
    Rh,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MfdParams {
    /// Free-flow speed of cars and ride-hailing vehicles, m/s.
    pub v_max: f64,
    pub v_min: f64,
    pub bus_factor: f64,
    pub pce_car: f64,
    pub pce_bus: f64,
    pub pce_rh: f64,
    /// Critical accumulation per meter of road; a region's n_c is this times
    /// its road length.
    pub critical_density_per_m: f64,
    /// Exogenous moving cars per zone, by zone class (urban, intermediate,
    /// suburban).
    pub background_cars: [u32; 3],
}

impl Default for MfdParams {
    fn default() -> Self {
        MfdParams {
            v_max: 14.0,
            v_min: 1.0,
            bus_factor: 0.7,
            pce_car: 1.0,
            pce_bus: 2.0,
            pce_rh: 1.0,
            critical_density_per_m: 0.008,
            background_cars: [120, 50, 15],
        }
    }
}

impl MfdParams {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.v_min > 0.0) {
            errs.push("mfd.v_min must be positive".into());
        }
        if !(self.v_max >= self.v_min) {
            errs.push("mfd.v_max must be at least v_min".into());
        }
        if !(self.bus_factor > 0.0 && self.bus_factor <= 1.0) {
            errs.push("mfd.bus_factor must lie in (0, 1]".into());
        }
        if !(self.critical_density_per_m > 0.0) {
            errs.push("mfd.critical_density_per_m must be positive".into());
        }
        if [self.pce_car, self.pce_bus, self.pce_rh].iter().any(|w| !(*w >= 0.0)) {
            errs.push("mfd pce weights must be nonnegative".into());
        }
        errs
    }

    pub fn background_for(&self, class: ZoneClass) -> u32 {
        match class {
            ZoneClass::Urban => self.background_cars[0],
            ZoneClass::Intermediate => self.background_cars[1],
            ZoneClass::Suburban => self.background_cars[2],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionAccumulation {
    pub car: u32,
    pub bus: u32,
    pub rh: u32,
}

impl RegionAccumulation {
    pub fn add(&mut self, t: VehicleType) {
        match t {
            VehicleType::Car => self.car += 1,
            VehicleType::Bus => self.bus += 1,
            VehicleType::Rh => self.rh += 1,
        }
    }

    pub fn weighted(&self, p: &MfdParams) -> f64 {
        p.pce_car * self.car as f64 + p.pce_bus * self.bus as f64 + p.pce_rh * self.rh as f64
    }
}

/// Speed in m/s for a vehicle type in a region with critical accumulation `n_c`.
pub fn region_speed(acc: &RegionAccumulation, n_c: f64, p: &MfdParams, t: VehicleType) -> f64 {
    let car = (p.v_max * (-acc.weighted(p) / n_c).exp()).max(p.v_min);
    match t {
        VehicleType::Bus => p.bus_factor * car,
        VehicleType::Car | VehicleType::Rh => car,
    }
}

/// Counts moving vehicles per region. Every entry must resolve to a region.
pub fn update_accumulations(
    vehicles: impl IntoIterator<Item = (Option<usize>, VehicleType)>,
    regions: usize,
) -> Result<Vec<RegionAccumulation>> {
    let mut out = vec![RegionAccumulation::default(); regions];
    for (i, (zone, t)) in vehicles.into_iter().enumerate() {
        match zone {
            Some(z) if z < regions => out[z].add(t),
            _ => {
                return Err(Error::Invariant {
                    t: f64::NAN,
                    msg: format!("moving vehicle #{i} has no resolvable region"),
                })
            }
        }
    }
    Ok(out)
}

/// Per-region critical accumulations plus the speeds frozen for one step.
#[derive(Clone, Debug, PartialEq)]
pub struct Mfd {
    pub params: MfdParams,
    pub n_c: Vec<f64>,
    pub background: Vec<u32>,
    pub car_speed: Vec<f64>,
}

impl Mfd {
    pub fn new(params: MfdParams, g: &MultiModalGraph) -> Self {
        let n_c: Vec<f64> = g
            .zone_road_length()
            .iter()
            .map(|len| (len * params.critical_density_per_m).max(1.0))
            .collect();
        let background = g.zones.classes.iter().map(|&c| params.background_for(c)).collect();
        let car_speed = vec![params.v_max; n_c.len()];
        Mfd { params, n_c, background, car_speed }
    }

    /// Freezes speeds for the coming step from the moving-vehicle counts;
    /// background cars are added here.
    pub fn update(&mut self, acc: &mut [RegionAccumulation]) {
        for (z, a) in acc.iter_mut().enumerate() {
            a.car += self.background[z];
            self.car_speed[z] = region_speed(a, self.n_c[z], &self.params, VehicleType::Car);
        }
    }

    pub fn speed(&self, zone: usize, t: VehicleType) -> f64 {
        match t {
            VehicleType::Bus => self.params.bus_factor * self.car_speed[zone],
            _ => self.car_speed[zone],
        }
    }
}

/// Progress along a sequence of legs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripProgress {
    pub legs: Vec<f64>,
    pub leg: usize,
    pub covered: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Advance {
    /// Indices of legs completed during this advance, in order.
    pub completed: Vec<usize>,
    pub finished: bool,
    /// Distance actually moved along the legs.
    pub moved: f64,
}

impl TripProgress {
    pub fn new(legs: Vec<f64>) -> Self {
        TripProgress { legs, leg: 0, covered: 0.0 }
    }

    pub fn is_finished(&self) -> bool {
        self.leg >= self.legs.len()
    }

    /// Distance left on the current leg.
    pub fn remaining(&self) -> f64 {
        self.legs.get(self.leg).map_or(0.0, |l| l - self.covered)
    }

    pub fn total_remaining(&self) -> f64 {
        self.remaining() + self.legs.iter().skip(self.leg + 1).sum::<f64>()
    }

    /// Moves `distance` meters, rolling over leg boundaries.
    pub fn advance_by(&mut self, distance: f64) -> Advance {
        let mut out = Advance::default();
        let mut budget = distance;
        while self.leg < self.legs.len() {
            let rem = self.legs[self.leg] - self.covered;
            if budget >= rem {
                budget -= rem;
                out.moved += rem;
                out.completed.push(self.leg);
                self.leg += 1;
                self.covered = 0.0;
            } else {
                self.covered += budget;
                out.moved += budget;
                break;
            }
        }
        out.finished = self.is_finished();
        out
    }
}

/// Advances a trip at constant `speed` for `dt` seconds.
pub fn advance_trip(progress: &mut TripProgress, speed: f64, dt: f64) -> Advance {
    progress.advance_by(speed * dt)
}
