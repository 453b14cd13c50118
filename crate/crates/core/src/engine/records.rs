use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserRow {
    pub user_id: usize,
    /// Empty for users who never arrived.
    pub total_time_s: Option<f64>,
    pub total_dist_m: f64,
    pub transfers: u32,
    pub waits_s: f64,
    /// Motorized modes in order of use, `+`-joined.
    pub modes: String,
    pub completed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FleetRow {
    pub t: f64,
    pub idle: u32,
    pub relocating: u32,
    pub pickup: u32,
    pub serving: u32,
}

impl FleetRow {
    pub fn total(&self) -> u32 {
        self.idle + self.relocating + self.pickup + self.serving
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchRow {
    /// Pickup time.
    pub t: f64,
    pub user_id: usize,
    pub veh_id: usize,
    /// Request to pickup.
    pub wait_s: f64,
    pub pickup_dist_m: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRow {
    pub t: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "W")]
    pub w: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficRow {
    pub region: usize,
    pub t: f64,
    pub n_car: u32,
    pub n_bus: u32,
    pub n_rh: u32,
    pub v_car: f64,
    pub v_bus: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrandedRow {
    pub t: f64,
    pub user_id: usize,
    pub station_id: usize,
    pub cause: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRow {
    pub t: f64,
    pub veh_id: usize,
    pub depot_id: usize,
    pub strategy: String,
    pub utility: f64,
}

/// Everything a run records, in the order it was produced.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Records {
    pub users: Vec<UserRow>,
    pub fleet: Vec<FleetRow>,
    pub matches: Vec<MatchRow>,
    /// Raw ride-hailing wait signal per step; `None` when nobody waited.
    pub wait_signal: Vec<(f64, Option<f64>)>,
    pub traffic: Vec<TrafficRow>,
    pub stranded: Vec<StrandedRow>,
    pub decisions: Vec<DecisionRow>,
}
