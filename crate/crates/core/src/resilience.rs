//! System performance curve and the four resilience indicators.
//!
//! Lower indicator values mean a more resilient system. R₃ is the share of
//! the disruption period `[t₀, t_r]` spent below the threshold ξ.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResilienceConfig {
    pub weights: [f64; 4],
    /// Threshold ξ as a fraction of the baseline.
    pub xi_fraction: f64,
    /// Moving-average width used to locate the low point.
    pub smoothing: usize,
    /// Recovery means the smoothed curve is back above this fraction of the
    /// baseline ...
    pub recovery_fraction: f64,
    /// ... for this many consecutive samples.
    pub sustain: usize,
}

impl Default for ResilienceConfig {
    fn default() -> Self {
        ResilienceConfig {
            weights: [1.0; 4],
            xi_fraction: 0.85,
            smoothing: 5,
            recovery_fraction: 0.99,
            sustain: 10,
        }
    }
}

/// Weighted mean of per-group waits subtracted from the baseline. Each item
/// is `(mean wait of the group, number of users in it)`.
pub fn performance(f_bar: f64, groups: &[(f64, usize)]) -> f64 {
    let n: usize = groups.iter().map(|g| g.1).sum();
    if n == 0 {
        return f_bar;
    }
    f_bar - groups.iter().map(|(w, c)| w * *c as f64).sum::<f64>() / n as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerformanceCurve {
    pub t: Vec<f64>,
    pub f: Vec<f64>,
    /// Baseline F̄; also the constant baseline curve unless `f0` is given.
    pub f_bar: f64,
    pub f0: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KeyTimes {
    pub t0: f64,
    pub td: Option<f64>,
    pub tr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResilienceReport {
    #[serde(rename = "R1")]
    pub r1: f64,
    #[serde(rename = "R2")]
    pub r2: f64,
    #[serde(rename = "R3")]
    pub r3: f64,
    #[serde(rename = "R4")]
    pub r4: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub t0: f64,
    pub td: f64,
    pub tr: f64,
    /// Time below ξ within `[t₀, t_r]`, seconds.
    #[serde(rename = "H_xi")]
    pub h_xi: f64,
    pub xi: f64,
    pub f_bar: f64,
    pub flags: Vec<String>,
}

fn interp(t: &[f64], f: &[f64], x: f64) -> f64 {
    let i = t.partition_point(|&v| v < x);
    if i == 0 {
        return f[0];
    }
    if i >= t.len() {
        return f[t.len() - 1];
    }
    let (t0, t1) = (t[i - 1], t[i]);
    if t1 == t0 {
        return f[i];
    }
    f[i - 1] + (f[i] - f[i - 1]) * (x - t0) / (t1 - t0)
}

/// Trapezoidal integral of the sampled series over `[a, b]`, with linear
/// interpolation at the ends.
pub fn integrate(t: &[f64], f: &[f64], a: f64, b: f64) -> f64 {
    if b <= a || t.is_empty() {
        return 0.0;
    }
    let mut xs = vec![a];
    xs.extend(t.iter().copied().filter(|&x| x > a && x < b));
    xs.push(b);
    xs.windows(2)
        .map(|w| 0.5 * (interp(t, f, w[0]) + interp(t, f, w[1])) * (w[1] - w[0]))
        .sum()
}

/// Total time within `[a, b]` during which the linearly interpolated series
/// lies below `level`.
pub fn time_below(t: &[f64], f: &[f64], level: f64, a: f64, b: f64) -> f64 {
    if b <= a || t.is_empty() {
        return 0.0;
    }
    let mut xs = vec![a];
    xs.extend(t.iter().copied().filter(|&x| x > a && x < b));
    xs.push(b);
    let mut total = 0.0;
    for w in xs.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let (y0, y1) = (interp(t, f, x0) - level, interp(t, f, x1) - level);
        total += match (y0 < 0.0, y1 < 0.0) {
            (true, true) => x1 - x0,
            (false, false) => 0.0,
            (true, false) => (x1 - x0) * (-y0) / (y1 - y0),
            (false, true) => (x1 - x0) * (-y1) / (y0 - y1),
        };
    }
    total
}

/// Centered moving average; the window shrinks at the ends.
pub fn smooth(f: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    (0..f.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + width - half).min(f.len());
            f[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Indicators R₁–R₄ and R. Missing key times are detected from the curve.
pub fn resilience_indicators(
    curve: &PerformanceCurve,
    keys: KeyTimes,
    cfg: &ResilienceConfig,
) -> ResilienceReport {
    let (t, f) = (&curve.t, &curve.f);
    let xi = cfg.xi_fraction * curve.f_bar;
    let base: Vec<f64> = curve.f0.clone().unwrap_or_else(|| vec![curve.f_bar; t.len()]);
    let mut flags = Vec::new();
    let t0 = keys.t0;
    let end = t.last().copied().unwrap_or(t0);
    let degenerate = |mut flags: Vec<String>, msg: &str| {
        flags.push(msg.to_string());
        ResilienceReport {
            r1: 0.0,
            r2: 0.0,
            r3: 1.0,
            r4: 0.0,
            r: cfg.weights[2],
            t0,
            td: t0,
            tr: t0,
            h_xi: 0.0,
            xi,
            f_bar: curve.f_bar,
            flags,
        }
    };
    if t.len() < 2 || end <= t0 {
        return degenerate(flags, "curve does not cover the disruption");
    }
    let sm = smooth(f, cfg.smoothing.max(1));
    let recovered = cfg.recovery_fraction * curve.f_bar;
    let window: Vec<usize> = (0..t.len()).filter(|&i| t[i] >= t0).collect();
    let td = match keys.td {
        Some(td) => td,
        None => {
            let &imin = window
                .iter()
                .min_by(|&&a, &&b| sm[a].total_cmp(&sm[b]).then(a.cmp(&b)))
                .unwrap();
            if sm[imin] >= recovered && keys.tr.is_none() {
                return degenerate(flags, "no disruption detected");
            }
            t[imin]
        }
    };
    let tr = match keys.tr {
        Some(tr) => tr,
        None => {
            let after: Vec<usize> = (0..t.len()).filter(|&i| t[i] >= td).collect();
            let need = cfg.sustain.max(1);
            let hit = after.windows(need).find(|w| w.iter().all(|&i| sm[i] >= recovered));
            match hit {
                Some(w) => t[w[0]],
                None => {
                    flags.push("not recovered; t_r clamped to the horizon".into());
                    end
                }
            }
        }
    };
    if tr <= t0 {
        return degenerate(flags, "recovery precedes the disruption");
    }
    let ratio = |a: f64, b: f64| {
        let denom = integrate(t, &base, a, b);
        if b > a && denom != 0.0 {
            1.0 - integrate(t, f, a, b) / denom
        } else {
            0.0
        }
    };
    let r1 = ratio(t0, td);
    let r2 = ratio(td, tr);
    let h_xi = time_below(t, f, xi, t0, tr);
    let r3 = 1.0 - h_xi / (tr - t0);
    let r4 = (tr - td) / (tr - t0);
    let w = cfg.weights;
    ResilienceReport {
        r1,
        r2,
        r3,
        r4,
        r: w[0] * r1 + w[1] * r2 + w[2] * r3 + w[3] * r4,
        t0,
        td,
        tr,
        h_xi,
        xi,
        f_bar: curve.f_bar,
        flags,
    }
}
