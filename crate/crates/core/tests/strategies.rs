use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rhsim_core::strategies::{
    strategy_centralized, strategy_decentralized, strategy_none, strategy_random, RebalanceDecision,
    StrategyContext, StrategyKind, AUCTION_ROUNDS,
};

fn ctx(util: Vec<Vec<f64>>, slots: Vec<u32>) -> StrategyContext {
    let n = util.len();
    let m = slots.len();
    StrategyContext {
        vehicle_ids: (0..n).collect(),
        slots,
        operator_gain: vec![0.0; m],
        driver_utility: util,
        arrival: vec![vec![100.0; m]; n],
    }
}

fn random_ctx(rng: &mut ChaCha8Rng, max_v: usize, max_r: usize, integral: bool) -> StrategyContext {
    let n = rng.random_range(1..=max_v);
    let m = rng.random_range(1..=max_r);
    let val = |rng: &mut ChaCha8Rng| {
        if integral {
            rng.random_range(-5i32..=20) as f64
        } else {
            rng.random_range(-5.0..20.0)
        }
    };
    StrategyContext {
        vehicle_ids: (0..n).map(|i| i * 3 + 1).collect(),
        slots: (0..m).map(|_| rng.random_range(0..=2)).collect(),
        operator_gain: (0..m).map(|_| if integral { rng.random_range(0..=2) as f64 } else { rng.random_range(0.0..2.0) }).collect(),
        driver_utility: (0..n).map(|_| (0..m).map(|_| val(rng)).collect()).collect(),
        arrival: (0..n).map(|_| (0..m).map(|_| rng.random_range(10.0..900.0)).collect()).collect(),
    }
}

fn check_feasible(c: &StrategyContext, d: &RebalanceDecision) {
    let mut seen = vec![false; c.vehicles()];
    for a in &d.assignments {
        assert!(!seen[a.vehicle], "vehicle offered twice");
        seen[a.vehicle] = true;
    }
    for (r, k) in d.per_area(c.areas()).into_iter().enumerate() {
        assert!(k <= c.slots[r]);
    }
}

/// Exhaustive search over every vehicle → {stay, area} map.
fn brute_force_best(c: &StrategyContext) -> f64 {
    fn go(c: &StrategyContext, v: usize, left: &mut Vec<u32>) -> f64 {
        if v == c.vehicles() {
            return 0.0;
        }
        let mut best = go(c, v + 1, left);
        for r in 0..c.areas() {
            let u = c.pair_utility(v, r);
            if left[r] > 0 && u >= 0.0 {
                left[r] -= 1;
                best = best.max(u + go(c, v + 1, left));
                left[r] += 1;
            }
        }
        best
    }
    go(c, 0, &mut c.slots.clone())
}

fn blocking_pairs(c: &StrategyContext, d: &RebalanceDecision) -> usize {
    let assigned = |v: usize| d.area_of(v);
    let area_prefers = |r: usize, a: usize, b: usize| {
        (c.arrival[a][r], c.vehicle_ids[a]) < (c.arrival[b][r], c.vehicle_ids[b])
    };
    let mut count = 0;
    for v in 0..c.vehicles() {
        for r in 0..c.areas() {
            let u = c.driver_utility[v][r];
            if c.slots[r] == 0 || u <= 0.0 {
                continue;
            }
            let vehicle_wants = match assigned(v) {
                None => true,
                Some(cur) => u > c.driver_utility[v][cur],
            };
            if !vehicle_wants || assigned(v) == Some(r) {
                continue;
            }
            let holders: Vec<usize> = d.assignments.iter().filter(|a| a.area == r).map(|a| a.vehicle).collect();
            let area_wants = (holders.len() as u32) < c.slots[r] || holders.iter().any(|&h| area_prefers(r, v, h));
            if area_wants {
                count += 1;
            }
        }
    }
    count
}

#[test]
fn none_never_moves() {
    let c = ctx(vec![vec![10.0; 3]; 600], vec![5, 5, 5]);
    assert!(strategy_none(&c).is_empty());
    assert!(strategy_none(&StrategyContext::default()).is_empty());
}

#[test]
fn random_single_open_depot() {
    let c = ctx(vec![vec![1.0; 3]; 4], vec![0, 10, 0]);
    let d = strategy_random(&c, &mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(d.assignments.len(), 4);
    assert!(d.assignments.iter().all(|a| a.area == 1));
}

#[test]
fn random_is_seed_deterministic() {
    let c = ctx(vec![vec![1.0; 5]; 30], vec![3; 5]);
    let a = strategy_random(&c, &mut ChaCha8Rng::seed_from_u64(9));
    let b = strategy_random(&c, &mut ChaCha8Rng::seed_from_u64(9));
    assert_eq!(a, b);
    check_feasible(&c, &a);
}

#[test]
fn random_frequencies_uniform() {
    let c = ctx(vec![vec![0.0; 4]], vec![1; 4]);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut hits = [0usize; 4];
    let draws = 10_000;
    for _ in 0..draws {
        hits[strategy_random(&c, &mut rng).assignments[0].area] += 1;
    }
    for h in hits {
        assert!((h as f64 / draws as f64 - 0.25).abs() < 0.03, "{hits:?}");
    }
    // Pearson chi-square, 3 dof, 0.1% critical value 16.27
    let e = draws as f64 / 4.0;
    let chi: f64 = hits.iter().map(|&h| (h as f64 - e).powi(2) / e).sum();
    assert!(chi < 16.27);
}

#[test]
fn centralized_single_pair() {
    let d = strategy_centralized(&ctx(vec![vec![2.5]], vec![1]));
    assert_eq!(d.area_of(0), Some(0));
}

#[test]
fn centralized_prefers_total_over_greedy() {
    let d = strategy_centralized(&ctx(vec![vec![5.0, 3.0], vec![4.0, 1.0]], vec![1, 1]));
    assert_eq!(d.area_of(0), Some(1));
    assert_eq!(d.area_of(1), Some(0));
    let total: f64 = d.assignments.iter().map(|a| a.utility).sum();
    assert_eq!(total, 7.0);
}

#[test]
fn centralized_skips_negative_pairs() {
    let d = strategy_centralized(&ctx(vec![vec![-1.0, -0.5]], vec![3, 3]));
    assert!(d.is_empty());
}

#[test]
fn centralized_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..500 {
        let c = random_ctx(&mut rng, 6, 4, true);
        let d = strategy_centralized(&c);
        check_feasible(&c, &d);
        let got: f64 = d.assignments.iter().map(|a| a.utility).sum();
        assert_eq!(got, brute_force_best(&c), "{c:?}");
    }
}

#[test]
fn decentralized_single_vehicle() {
    let d = strategy_decentralized(&ctx(vec![vec![3.0]], vec![1]), AUCTION_ROUNDS);
    assert_eq!(d.area_of(0), Some(0));
    assert!(!d.unconverged);
}

#[test]
fn decentralized_hand_traced() {
    // both prefer A; A ranks v2 first by arrival; v1 falls back to B
    let mut c = ctx(vec![vec![9.0, 4.0], vec![8.0, 2.0]], vec![1, 1]);
    c.arrival = vec![vec![300.0, 300.0], vec![120.0, 300.0]];
    let d = strategy_decentralized(&c, AUCTION_ROUNDS);
    assert_eq!(d.area_of(1), Some(0));
    assert_eq!(d.area_of(0), Some(1));
    assert_eq!(blocking_pairs(&c, &d), 0);
}

#[test]
fn decentralized_is_stable() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..1000 {
        let c = random_ctx(&mut rng, 8, 8, false);
        let d = strategy_decentralized(&c, AUCTION_ROUNDS);
        check_feasible(&c, &d);
        assert!(!d.unconverged);
        assert_eq!(blocking_pairs(&c, &d), 0, "{c:?}");
        assert!(d.assignments.iter().all(|a| c.driver_utility[a.vehicle][a.area] > 0.0));
    }
}

#[test]
fn strategy_keys_parse() {
    for k in StrategyKind::ALL {
        assert_eq!(k.name().parse::<StrategyKind>().unwrap(), k);
    }
    assert!("greedy".parse::<StrategyKind>().is_err());
}

proptest! {
    #[test]
    fn decentralized_ignores_vehicle_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_ctx(&mut rng, 8, 6, false);
        let d = strategy_decentralized(&c, AUCTION_ROUNDS);
        let perm: Vec<usize> = (0..c.vehicles()).rev().collect();
        let p = StrategyContext {
            vehicle_ids: perm.iter().map(|&v| c.vehicle_ids[v]).collect(),
            slots: c.slots.clone(),
            operator_gain: c.operator_gain.clone(),
            driver_utility: perm.iter().map(|&v| c.driver_utility[v].clone()).collect(),
            arrival: perm.iter().map(|&v| c.arrival[v].clone()).collect(),
        };
        let dp = strategy_decentralized(&p, AUCTION_ROUNDS);
        for (i, &v) in perm.iter().enumerate() {
            prop_assert_eq!(d.area_of(v), dp.area_of(i));
        }
    }

    #[test]
    fn all_strategies_respect_slots(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_ctx(&mut rng, 12, 6, false);
        check_feasible(&c, &strategy_random(&c, &mut rng));
        check_feasible(&c, &strategy_centralized(&c));
        check_feasible(&c, &strategy_decentralized(&c, AUCTION_ROUNDS));
    }
}
