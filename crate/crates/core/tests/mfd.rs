use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rhsim_core::mfd::{
    advance_trip, region_speed, update_accumulations, MfdParams, RegionAccumulation, TripProgress,
    VehicleType,
};

fn acc(car: u32, bus: u32, rh: u32) -> RegionAccumulation {
    RegionAccumulation { car, bus, rh }
}

#[test]
fn empty_region_runs_free_flow() {
    let p = MfdParams::default();
    assert_eq!(region_speed(&acc(0, 0, 0), 100.0, &p, VehicleType::Car), p.v_max);
    assert_eq!(region_speed(&acc(0, 0, 0), 100.0, &p, VehicleType::Bus), p.v_max * p.bus_factor);
}

#[test]
fn critical_accumulation_gives_v_max_over_e() {
    let p = MfdParams::default();
    let v = region_speed(&acc(100, 0, 0), 100.0, &p, VehicleType::Rh);
    assert!((v - 14.0 * (-1.0f64).exp()).abs() < 1e-12);
    // bus counts double
    let v2 = region_speed(&acc(0, 50, 0), 100.0, &p, VehicleType::Car);
    assert!((v2 - v).abs() < 1e-12);
}

#[test]
fn saturation_clamps_at_floor() {
    let p = MfdParams::default();
    let v = region_speed(&acc(1_000_000, 0, 0), 10.0, &p, VehicleType::Car);
    assert_eq!(v, p.v_min);
    assert!(region_speed(&acc(1_000_000, 0, 0), 10.0, &p, VehicleType::Bus) > 0.0);
}

#[test]
fn two_steps_for_600_m_at_10() {
    let mut t = TripProgress::new(vec![600.0]);
    assert!(!advance_trip(&mut t, 10.0, 30.0).finished);
    assert!(advance_trip(&mut t, 10.0, 30.0).finished);
}

#[test]
fn leg_rollover_reports_completed_legs() {
    let mut t = TripProgress::new(vec![100.0, 100.0, 500.0]);
    let a = advance_trip(&mut t, 10.0, 30.0);
    assert_eq!(a.completed, vec![0, 1]);
    assert_eq!(t.leg, 2);
    assert!((t.covered - 100.0).abs() < 1e-12);
    assert!((t.total_remaining() - 400.0).abs() < 1e-12);
}

#[test]
fn counts_and_brute_force_recount() {
    let none = update_accumulations(Vec::new(), 36).unwrap();
    assert!(none.iter().all(|a| *a == RegionAccumulation::default()));
    let mut v = vec![(Some(5), VehicleType::Rh); 3];
    v.extend(vec![(Some(5), VehicleType::Bus); 2]);
    let a = update_accumulations(v, 36).unwrap();
    assert_eq!(a[5], acc(0, 2, 3));

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let types = [VehicleType::Car, VehicleType::Bus, VehicleType::Rh];
    let placed: Vec<(usize, VehicleType)> =
        (0..200).map(|_| (rng.random_range(0..36), types[rng.random_range(0..3)])).collect();
    let a = update_accumulations(placed.iter().map(|&(z, t)| (Some(z), t)), 36).unwrap();
    for z in 0..36 {
        let count = |t| placed.iter().filter(|&&(pz, pt)| pz == z && pt == t).count() as u32;
        assert_eq!(a[z], acc(count(VehicleType::Car), count(VehicleType::Bus), count(VehicleType::Rh)));
    }
    assert!(update_accumulations(vec![(None, VehicleType::Rh)], 36).is_err());
}

#[test]
fn riemann_sum_matches_time_varying_schedule() {
    let schedule: Vec<f64> = (0..40).map(|i| 5.0 + 4.0 * (i as f64 * 0.3).sin()).collect();
    let length = 4_000.0;
    let mut t = TripProgress::new(vec![length]);
    let mut total = 0.0;
    let mut done_at = None;
    for (i, &v) in schedule.iter().enumerate() {
        let a = advance_trip(&mut t, v, 30.0);
        total += a.moved;
        if a.finished {
            done_at = Some(i);
            break;
        }
    }
    // oracle: first step where the cumulative quadrature reaches the length
    let mut cum = 0.0;
    let mut oracle = None;
    for (i, &v) in schedule.iter().enumerate() {
        cum += v * 30.0;
        if cum >= length {
            oracle = Some(i);
            break;
        }
    }
    assert_eq!(done_at, oracle);
    assert!((total - length).abs() < 1e-6);
}

proptest! {
    #[test]
    fn speed_positive_and_monotone(a in 0u32..5000, b in 0u32..5000, bus in 0u32..100, nc in 1.0f64..1000.0) {
        let p = MfdParams::default();
        let (lo, hi) = (a.min(b), a.max(b));
        for t in [VehicleType::Car, VehicleType::Bus, VehicleType::Rh] {
            let v_lo = region_speed(&acc(lo, bus, 0), nc, &p, t);
            let v_hi = region_speed(&acc(hi, bus, 0), nc, &p, t);
            prop_assert!(v_hi > 0.0);
            prop_assert!(v_hi <= v_lo);
        }
    }

    #[test]
    fn completion_step_is_ceiling(len in 1.0f64..50_000.0, v in 0.5f64..30.0) {
        let mut t = TripProgress::new(vec![len]);
        let mut steps = 0u64;
        let mut moved = 0.0;
        while !t.is_finished() {
            moved += advance_trip(&mut t, v, 30.0).moved;
            steps += 1;
        }
        let ratio = len / (v * 30.0);
        let expect = ratio.ceil() as u64;
        let on_boundary = (ratio - ratio.round()).abs() < 1e-9;
        prop_assert!(steps == expect || (on_boundary && steps.abs_diff(expect) <= 1));
        prop_assert!((moved - len).abs() < 1e-6);
        prop_assert!(steps as f64 * v * 30.0 >= len - 1e-6 && (steps as f64 * v * 30.0) < len + v * 30.0 + 1e-6);
    }
}
