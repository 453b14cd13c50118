use std::cmp::Ordering;

#[derive(Clone, Debug, PartialEq)]
pub struct AuctionOutcome {
    pub matching: Vec<Option<usize>>,
    pub rounds: usize,
    pub converged: bool,
}

/// Proposer-side deferred acceptance with capacities, run in synchronous
/// rounds. `prefs[v]` lists acceptable areas best first; `area_cmp(r, a, b)`
/// is `Less` when area `r` prefers vehicle `a` to `b`.
pub fn deferred_acceptance(
    prefs: &[Vec<usize>],
    cap: &[u32],
    area_cmp: impl Fn(usize, usize, usize) -> Ordering,
    max_rounds: usize,
) -> AuctionOutcome {
    let n = prefs.len();
    let mut next = vec![0usize; n];
    let mut held: Vec<Vec<usize>> = vec![Vec::new(); cap.len()];
    let mut matching = vec![None; n];
    let mut rounds = 0;
    loop {
        let bidders: Vec<usize> = (0..n).filter(|&v| matching[v].is_none() && next[v] < prefs[v].len()).collect();
        if bidders.is_empty() {
            return AuctionOutcome { matching, rounds, converged: true };
        }
        if rounds == max_rounds {
            return AuctionOutcome { matching, rounds, converged: false };
        }
        rounds += 1;
        for v in bidders {
            let r = prefs[v][next[v]];
            next[v] += 1;
            held[r].push(v);
            matching[v] = Some(r);
        }
        for (r, list) in held.iter_mut().enumerate() {
            if list.len() > cap[r] as usize {
                list.sort_by(|&a, &b| area_cmp(r, a, b));
                for v in list.drain(cap[r] as usize..) {
                    matching[v] = None;
                }
            }
        }
    }
}
