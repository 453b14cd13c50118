//! Rebalancing strategies for idle ride-hailing vehicles.
//!
//! Every strategy maps a [`StrategyContext`] snapshot to a set of
//! vehicle → area assignments. The MARL policy lives in [`crate::marl`] and
//! only shares the decision type.

mod assignment;
mod auction;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use assignment::max_weight_assignment;
pub use auction::{deferred_acceptance, AuctionOutcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    None,
    Random,
    Centralized,
    Decentralized,
    Marl,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::None,
        StrategyKind::Random,
        StrategyKind::Centralized,
        StrategyKind::Decentralized,
        StrategyKind::Marl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::None => "none",
            StrategyKind::Random => "random",
            StrategyKind::Centralized => "centralized",
            StrategyKind::Decentralized => "decentralized",
            StrategyKind::Marl => "marl",
        }
    }

    /// Strategies that consume the operator's demand prediction.
    pub fn uses_prediction(self) -> bool {
        matches!(self, StrategyKind::Centralized | StrategyKind::Decentralized)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown strategy `{s}` (expected none|random|centralized|decentralized|marl)"))
    }
}

/// One decision snapshot. Vehicles and areas are addressed by position in
/// the vectors; `vehicle_ids` only breaks ties.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StrategyContext {
    pub vehicle_ids: Vec<usize>,
    /// Assignable slots per area: published offers capped by depot vacancy.
    pub slots: Vec<u32>,
    /// Operator gain per assigned vehicle.
    pub operator_gain: Vec<f64>,
    /// `driver_utility[v][r]`
    pub driver_utility: Vec<Vec<f64>>,
    /// Sampled arrival times `arrival[v][r]`, seconds.
    pub arrival: Vec<Vec<f64>>,
}

impl StrategyContext {
    pub fn vehicles(&self) -> usize {
        self.vehicle_ids.len()
    }

    pub fn areas(&self) -> usize {
        self.slots.len()
    }

    /// Joint operator + driver utility of a pair.
    pub fn pair_utility(&self, v: usize, r: usize) -> f64 {
        self.operator_gain[r] + self.driver_utility[v][r]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Assignment {
    pub vehicle: usize,
    pub area: usize,
    pub utility: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RebalanceDecision {
    /// Sorted by vehicle position.
    pub assignments: Vec<Assignment>,
    /// Set when the auction hit its round cap.
    pub unconverged: bool,
}

impl RebalanceDecision {
    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn area_of(&self, vehicle: usize) -> Option<usize> {
        self.assignments.iter().find(|a| a.vehicle == vehicle).map(|a| a.area)
    }

    pub fn per_area(&self, areas: usize) -> Vec<u32> {
        let mut n = vec![0; areas];
        for a in &self.assignments {
            n[a.area] += 1;
        }
        n
    }
}

pub fn strategy_none(_ctx: &StrategyContext) -> RebalanceDecision {
    RebalanceDecision::default()
}

/// Each vehicle in turn picks a uniformly random area among those with a
/// free slot.
pub fn strategy_random(ctx: &StrategyContext, rng: &mut impl Rng) -> RebalanceDecision {
    let mut left = ctx.slots.clone();
    let mut out = Vec::new();
    for v in 0..ctx.vehicles() {
        let open: Vec<usize> = (0..ctx.areas()).filter(|&r| left[r] > 0).collect();
        if open.is_empty() {
            break;
        }
        let r = open[rng.random_range(0..open.len())];
        left[r] -= 1;
        out.push(Assignment { vehicle: v, area: r, utility: ctx.pair_utility(v, r) });
    }
    RebalanceDecision { assignments: out, unconverged: false }
}

/// Exact maximization of total operator + driver utility subject to slot
/// capacities; pairs with negative utility are never formed.
pub fn strategy_centralized(ctx: &StrategyContext) -> RebalanceDecision {
    let w: Vec<Vec<Option<f64>>> = (0..ctx.vehicles())
        .map(|v| {
            (0..ctx.areas())
                .map(|r| Some(ctx.pair_utility(v, r)).filter(|u| *u >= 0.0 && u.is_finite()))
                .collect()
        })
        .collect();
    let picks = max_weight_assignment(&w, &ctx.slots);
    let assignments = picks
        .into_iter()
        .enumerate()
        .filter_map(|(v, r)| r.map(|r| Assignment { vehicle: v, area: r, utility: ctx.pair_utility(v, r) }))
        .collect();
    RebalanceDecision { assignments, unconverged: false }
}

pub const AUCTION_ROUNDS: usize = 50;

/// Vehicle-proposing deferred acceptance. Vehicles rank areas by driver
/// utility (positive only); areas rank vehicles by sampled arrival time.
pub fn strategy_decentralized(ctx: &StrategyContext, max_rounds: usize) -> RebalanceDecision {
    let n = ctx.vehicles();
    let vehicle_prefs: Vec<Vec<usize>> = (0..n)
        .map(|v| {
            let mut rs: Vec<usize> = (0..ctx.areas())
                .filter(|&r| ctx.slots[r] > 0 && ctx.driver_utility[v][r] > 0.0)
                .collect();
            rs.sort_by(|&a, &b| ctx.driver_utility[v][b].total_cmp(&ctx.driver_utility[v][a]).then(a.cmp(&b)));
            rs
        })
        .collect();
    let rank = |r: usize, v: usize| (ctx.arrival[v][r], ctx.vehicle_ids[v]);
    let out = deferred_acceptance(&vehicle_prefs, &ctx.slots, |r, a, b| {
        let (ya, ia) = rank(r, a);
        let (yb, ib) = rank(r, b);
        ya.total_cmp(&yb).then(ia.cmp(&ib))
    }, max_rounds);
    let assignments = out
        .matching
        .iter()
        .enumerate()
        .filter_map(|(v, r)| r.map(|r| Assignment { vehicle: v, area: r, utility: ctx.pair_utility(v, r) }))
        .collect();
    RebalanceDecision { assignments, unconverged: !out.converged }
}
