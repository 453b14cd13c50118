use serde::{Deserialize, Serialize};

/// Per-depot features plus the acting vehicle's local count.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GlobalFeatures {
    /// Expected net earnings of the acting vehicle at each depot.
    pub revenue: Vec<f64>,
    /// Vehicles currently relocating toward each depot.
    pub relocating: Vec<f64>,
    /// Transit availability near each depot.
    pub transit: Vec<f64>,
    /// Predicted requests minus supply per depot.
    pub gap: Vec<f64>,
}

impl GlobalFeatures {
    pub fn zeros(depots: usize) -> Self {
        GlobalFeatures {
            revenue: vec![0.0; depots],
            relocating: vec![0.0; depots],
            transit: vec![0.0; depots],
            gap: vec![0.0; depots],
        }
    }

    pub fn depots(&self) -> usize {
        self.revenue.len()
    }
}

pub fn observation_dim(depots: usize) -> usize {
    4 * depots + 1
}

/// Raw observation `[revenue, relocating, transit, gap, idle_nearby]`.
pub fn raw_observation(g: &GlobalFeatures, idle_nearby: f64) -> Vec<f64> {
    let mut x = Vec::with_capacity(observation_dim(g.depots()));
    x.extend_from_slice(&g.revenue);
    x.extend_from_slice(&g.relocating);
    x.extend_from_slice(&g.transit);
    x.extend_from_slice(&g.gap);
    x.push(idle_nearby);
    x
}

/// Running per-channel min-max scaling to `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub seen: u64,
}

impl Normalizer {
    pub fn new(dim: usize) -> Self {
        Normalizer { min: vec![0.0; dim], max: vec![0.0; dim], seen: 0 }
    }

    pub fn observe(&mut self, x: &[f64]) {
        if self.seen == 0 {
            self.min = x.to_vec();
            self.max = x.to_vec();
        }
        self.seen += 1;
        for (i, &v) in x.iter().enumerate() {
            self.min[i] = self.min[i].min(v);
            self.max[i] = self.max[i].max(v);
        }
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| {
                let span = self.max[i] - self.min[i];
                if span > 0.0 {
                    ((v - self.min[i]) / span).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }
}
