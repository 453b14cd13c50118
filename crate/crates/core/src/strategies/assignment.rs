//! Max-weight assignment with area multiplicities via the Hungarian method.

/// `w[v][r]` is the pair weight, `None` if forbidden. Area `r` accepts up to
/// `cap[r]` vehicles; leaving a vehicle unassigned is worth 0. Returns the
/// area chosen for each vehicle.
pub fn max_weight_assignment(w: &[Vec<Option<f64>>], cap: &[u32]) -> Vec<Option<usize>> {
    let n = w.len();
    let mut out = vec![None; n];
    // only vehicles with at least one usable pair take part
    let rows: Vec<usize> = (0..n)
        .filter(|&v| w[v].iter().enumerate().any(|(r, x)| x.is_some() && cap[r] > 0))
        .collect();
    if rows.is_empty() {
        return out;
    }
    let mut cols: Vec<Option<usize>> = Vec::new();
    for (r, &c) in cap.iter().enumerate() {
        let usable = rows.iter().filter(|&&v| w[v][r].is_some()).count();
        cols.extend(std::iter::repeat_n(Some(r), (c as usize).min(usable)));
    }
    cols.extend(std::iter::repeat_n(None, rows.len()));

    let big = 1.0
        + w.iter()
            .flatten()
            .flatten()
            .fold(0.0f64, |m, x| m.max(x.abs()))
            * 2.0
            * rows.len() as f64;
    let cost = |i: usize, j: usize| -> f64 {
        match cols[j] {
            None => 0.0,
            Some(r) => match w[rows[i]][r] {
                Some(x) => -x,
                None => big,
            },
        }
    };

    // potentials-based Hungarian, 1-indexed with a virtual column 0
    let (nr, nc) = (rows.len(), cols.len());
    let mut u = vec![0.0; nr + 1];
    let mut p = vec![0usize; nc + 1];
    let mut vpot = vec![0.0; nc + 1];
    let mut way = vec![0usize; nc + 1];
    for i in 1..=nr {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; nc + 1];
        let mut used = vec![false; nc + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=nc {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - vpot[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=nc {
                if used[j] {
                    u[p[j]] += delta;
                    vpot[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    for j in 1..=nc {
        if p[j] != 0 {
            if let Some(r) = cols[j - 1] {
                let v = rows[p[j] - 1];
                if w[v][r].is_some() {
                    out[v] = Some(r);
                }
            }
        }
    }
    out
}
