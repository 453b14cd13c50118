//! Ride-hailing operator and driver economics, demand prediction, matching
//! and the vehicle state machine.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::DepotId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OperatorConfig {
    pub window_s: f64,
    /// Prediction noise level p.
    pub noise: f64,
    pub threshold: f64,
    /// Arrival-time spread as a fraction of its mean.
    pub rho: f64,
    /// Lag before stranded-user surges enter the prediction.
    pub response_delay_s: f64,
    /// Prediction windows kept for the rolling demand estimate.
    pub history_windows: usize,
    pub sigma_floor: f64,
    /// Optional cap on pickup distance when matching; `None` = global nearest.
    pub match_radius_m: Option<f64>,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig {
            window_s: 300.0,
            noise: 0.0,
            threshold: 0.2,
            rho: 0.1,
            response_delay_s: 0.0,
            history_windows: 12,
            sigma_floor: 0.5,
            match_radius_m: None,
        }
    }
}

impl OperatorConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.window_s > 0.0) {
            errs.push("operator.window_s must be positive".into());
        }
        if !(self.noise >= 0.0) {
            errs.push("operator.noise must be nonnegative".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            errs.push("operator.threshold must lie in (0, 1)".into());
        }
        if !(self.rho >= 0.0) {
            errs.push("operator.rho must be nonnegative".into());
        }
        if !(self.response_delay_s >= 0.0) {
            errs.push("operator.response_delay_s must be nonnegative".into());
        }
        if self.history_windows == 0 || !(self.sigma_floor > 0.0) {
            errs.push("operator history needs at least one window and a positive sigma floor".into());
        }
        errs
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EconomicsConfig {
    /// Fare per meter of ride.
    pub c_ride: f64,
    /// Driving cost per meter.
    pub c_mileage: f64,
}

impl Default for EconomicsConfig {
    fn default() -> Self {
        EconomicsConfig { c_ride: 0.0015, c_mileage: 0.0003 }
    }
}

/// Normal complementary CDF at `k`: the chance that at least `k` requests
/// materialize.
pub fn survival_probability(k: f64, mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::NonPositiveSigma(sigma));
    }
    Ok(0.5 * libm::erfc((k - mu) / (sigma * std::f64::consts::SQRT_2)))
}

/// Smallest nonnegative integer whose survival probability is at most
/// `threshold`.
pub fn k_max(mu: f64, sigma: f64, threshold: f64) -> Result<u32> {
    survival_probability(0.0, mu, sigma)?;
    let mut k = 0u32;
    while survival_probability(k as f64, mu, sigma)? > threshold {
        k += 1;
    }
    Ok(k)
}

/// Relocation offers for an area: the predicted count capped at `k_max`,
/// plus any informed surge.
pub fn relocation_offer_count(k_hat: u32, k_max: u32, surge: u32) -> u32 {
    k_hat.min(k_max) + surge
}

/// Standard deviation of the prediction error for noise level `p` and true
/// count `k`; its half-normal mean equals `p·k`.
pub fn noise_sigma(p: f64, k: f64) -> f64 {
    (std::f64::consts::PI / 2.0).sqrt() * p * k
}

/// Noisy estimate `max(0, round(k + ε))`. One standard normal is drawn
/// whatever `p` is, so runs at different noise levels stay paired.
pub fn noisy_count(k: f64, p: f64, rng: &mut impl Rng) -> u32 {
    let z: f64 = StandardNormal.sample(rng);
    (k + noise_sigma(p, k) * z).round().max(0.0) as u32
}

/// Operator's expected-request prediction for one area and window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub k: f64,
    pub k_hat: u32,
}

pub fn predict_demand(
    departures: usize,
    market_share: f64,
    noise: f64,
    rng: &mut impl Rng,
) -> Prediction {
    let k = market_share * departures as f64;
    Prediction { k, k_hat: noisy_count(k, noise, rng) }
}

/// Rolling mean/std of realized request counts per window. Missing history
/// is filled with the seed mean and spread.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandEstimator {
    pub seed_mu: f64,
    pub seed_sigma: f64,
    pub window: usize,
    pub sigma_floor: f64,
    history: VecDeque<f64>,
}

impl DemandEstimator {
    pub fn new(seed_mu: f64, seed_sigma: f64, window: usize, sigma_floor: f64) -> Self {
        DemandEstimator { seed_mu, seed_sigma, window, sigma_floor, history: VecDeque::new() }
    }

    pub fn push(&mut self, realized: f64) {
        if self.history.len() == self.window {
            self.history.pop_front();
        }
        self.history.push_back(realized);
    }

    pub fn mu_sigma(&self) -> (f64, f64) {
        let w = self.window as f64;
        let missing = (self.window - self.history.len()) as f64;
        let mu = (self.history.iter().sum::<f64>() + missing * self.seed_mu) / w;
        let var = (self.history.iter().map(|x| (x - mu).powi(2)).sum::<f64>()
            + missing * (self.seed_sigma.powi(2) + (self.seed_mu - mu).powi(2)))
            / w;
        (mu, var.sqrt().max(self.sigma_floor))
    }
}

/// Distance-weighted mean fare over the routes from a depot to the nodes of
/// its area.
pub fn mean_fare(route_lengths: &[f64], c_ride: f64) -> f64 {
    let total: f64 = route_lengths.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    c_ride * route_lengths.iter().map(|d| d * d).sum::<f64>() / total
}

/// Driver's expected profit from relocating `dist_m` to an area.
pub fn driver_utility(mean_fare: f64, p_k_hat: f64, p_k_max: f64, c_mileage: f64, dist_m: f64) -> f64 {
    mean_fare * p_k_hat.max(p_k_max) - c_mileage * dist_m
}

/// Arrival time draw `Y ~ N(μ, ρμ)` restricted to positive values.
pub fn sample_arrival_time(mean_s: f64, rho: f64, rng: &mut impl Rng) -> f64 {
    if mean_s <= 0.0 || rho <= 0.0 {
        return mean_s.max(0.0);
    }
    let n = Normal::new(mean_s, rho * mean_s).unwrap();
    loop {
        let y = n.sample(rng);
        if y > 0.0 {
            return y;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorChoice {
    /// Selected vehicles, earliest sampled arrival first.
    pub selected: Vec<usize>,
    pub utility: f64,
    /// Requested supply `q` could not be reached.
    pub shortfall: bool,
}

/// Operator's pick for one area: the candidates with the earliest sampled
/// arrival, no more than the depot vacancy `capacity − idle`.
pub fn operator_utility(
    arrival_times: &[(usize, f64)],
    capacity: u32,
    idle: u32,
    expected_requests: u32,
) -> OperatorChoice {
    let vacancy = capacity.saturating_sub(idle) as usize;
    let mut order: Vec<(usize, f64)> = arrival_times.to_vec();
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let selected: Vec<usize> = order.into_iter().take(vacancy).map(|(v, _)| v).collect();
    let shortfall = (selected.len() as u32 + idle) < expected_requests;
    OperatorChoice { utility: selected.len() as f64, selected, shortfall }
}

/// Greedy nearest-vacant matching in request order. `dist(r, v)` gives the
/// pickup distance; ties go to the lower vehicle id. Returns one optional
/// vehicle per request.
pub fn match_requests(
    requests: usize,
    vehicles: &[usize],
    radius: Option<f64>,
    mut dist: impl FnMut(usize, usize) -> f64,
) -> Vec<Option<(usize, f64)>> {
    let mut free: Vec<usize> = vehicles.to_vec();
    free.sort_unstable();
    let mut out = Vec::with_capacity(requests);
    for r in 0..requests {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, &v) in free.iter().enumerate() {
            let d = dist(r, v);
            if radius.is_some_and(|rad| d > rad) || !d.is_finite() {
                continue;
            }
            if best.is_none_or(|(_, _, bd)| d < bd) {
                best = Some((i, v, d));
            }
        }
        out.push(best.map(|(i, v, d)| {
            free.remove(i);
            (v, d)
        }));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RhState {
    Idle,
    Relocating(DepotId),
    Pickup(usize),
    Serving(usize),
}

impl RhState {
    pub fn is_vacant(self) -> bool {
        matches!(self, RhState::Idle | RhState::Relocating(_))
    }

    pub fn label(self) -> &'static str {
        match self {
            RhState::Idle => "idle",
            RhState::Relocating(_) => "relocating",
            RhState::Pickup(_) => "pickup",
            RhState::Serving(_) => "serving",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RhEvent {
    AcceptOffer(DepotId),
    ArriveDepot,
    Match(usize),
    PickUp,
    DropOff,
}

/// Applies one event; illegal transitions are errors.
pub fn step_vehicle_state(state: RhState, event: Option<RhEvent>) -> Result<RhState> {
    use RhEvent::*;
    use RhState::*;
    let next = match (state, event) {
        (s, None) => s,
        (Idle, Some(AcceptOffer(d))) => Relocating(d),
        (Relocating(_), Some(ArriveDepot)) => Idle,
        (Idle | Relocating(_), Some(Match(u))) => Pickup(u),
        (Pickup(u), Some(PickUp)) => Serving(u),
        (Serving(_), Some(DropOff)) => Idle,
        (s, Some(e)) => {
            return Err(Error::Invariant {
                t: f64::NAN,
                msg: format!("illegal vehicle transition {s:?} on {e:?}"),
            })
        }
    };
    Ok(next)
}
