use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rhsim_core::demand::{
    candidate_paths, choice_probabilities, choose_path, generate_demand, read_demand_csv,
    replan_decision, write_demand_csv, Combo, DemandConfig, LegMode, Replan, TravelModel,
};
use rhsim_core::network::{
    build_manhattan_grid, from_parts, Edge, EdgeKind, GridConfig, Layer, MultiModalGraph, Node,
    Point, TransitLine, TransitMode, ZoneClass, Zones,
};

fn model<'a>(car: &'a [f64], suspended: &'a [bool]) -> TravelModel<'a> {
    TravelModel {
        car_speed: car,
        bus_factor: 0.7,
        metro_speed: 13.0,
        train_speed: 30.0,
        walk_speed: 1.4,
        suspended,
        rh: true,
        masked: true,
    }
}

/// Four road nodes on a 1 km line, a train between the ends and a bus
/// between the two middle intersections.
fn toy() -> MultiModalGraph {
    let zones = Zones { size_m: 10_000.0, nx: 1, ny: 1, classes: vec![ZoneClass::Urban] };
    let mut nodes: Vec<Node> = (0..4)
        .map(|i| Node { id: i, layer: Layer::Vehicle, pos: Point::new(i as f64 * 1000.0, 0.0), zone: 0 })
        .collect();
    let mut edges: Vec<Edge> = (0..3)
        .map(|i| Edge { id: i, a: i, b: i + 1, kind: EdgeKind::Vehicle, length: 1000.0, base_time: 0.0, line: None })
        .collect();
    let add_station = |layer: Layer, road: usize, nodes: &mut Vec<Node>, edges: &mut Vec<Edge>| {
        let id = nodes.len();
        nodes.push(Node { id, layer, pos: Point::new(road as f64 * 1000.0, 0.0), zone: 0 });
        edges.push(Edge { id: edges.len(), a: id, b: road, kind: EdgeKind::Connection, length: 84.0, base_time: 60.0, line: None });
        id
    };
    let t0 = add_station(Layer::Train, 0, &mut nodes, &mut edges);
    let t3 = add_station(Layer::Train, 3, &mut nodes, &mut edges);
    let b1 = add_station(Layer::Bus, 1, &mut nodes, &mut edges);
    let b2 = add_station(Layer::Bus, 2, &mut nodes, &mut edges);
    edges.push(Edge { id: edges.len(), a: t0, b: t3, kind: EdgeKind::Train, length: 3000.0, base_time: 0.0, line: Some(0) });
    edges.push(Edge { id: edges.len(), a: b1, b: b2, kind: EdgeKind::Bus, length: 1000.0, base_time: 0.0, line: Some(1) });
    let line = |name: &str, mode, stations: Vec<usize>, headway_s| TransitLine {
        id: 0,
        name: name.into(),
        mode,
        stations,
        headway_s,
        segments: vec![],
        offsets: vec![],
    };
    let lines = vec![line("T", TransitMode::Train, vec![t0, t3], 1200.0), line("B", TransitMode::Bus, vec![b1, b2], 600.0)];
    from_parts(nodes, edges, lines, vec![(0, 5)], zones, 60.0).unwrap()
}

#[test]
fn zero_users_empty() {
    let g = build_manhattan_grid(&GridConfig::desk_scale()).unwrap();
    let cfg = DemandConfig { total_users: 0, ..Default::default() };
    assert!(generate_demand(&cfg, &g, 1).unwrap().is_empty());
}

#[test]
fn demand_is_deterministic_and_round_trips() {
    let g = build_manhattan_grid(&GridConfig::desk_scale()).unwrap();
    let cfg = DemandConfig { total_users: 500, ..Default::default() };
    let a = generate_demand(&cfg, &g, 42).unwrap();
    let b = generate_demand(&cfg, &g, 42).unwrap();
    assert_eq!(a, b);
    let (mut wa, mut wb) = (Vec::new(), Vec::new());
    write_demand_csv(&a, &mut wa).unwrap();
    write_demand_csv(&b, &mut wb).unwrap();
    assert_eq!(wa, wb);
    assert!(String::from_utf8_lossy(&wa).starts_with("user_id,origin_node,dest_node,depart_s"));
    assert_eq!(read_demand_csv(&wa[..]).unwrap(), a);
    assert_ne!(generate_demand(&cfg, &g, 43).unwrap(), a);
    assert!(a.iter().all(|t| t.origin_node != t.dest_node));
}

#[test]
fn demand_law_of_large_numbers() {
    let g = build_manhattan_grid(&GridConfig::full_scale()).unwrap();
    let n = 100_000;
    let cfg = DemandConfig { total_users: n, active_window_s: 100_000.0 * 3.0, ..Default::default() };
    let trips = generate_demand(&cfg, &g, 7).unwrap();
    assert_eq!(trips.len(), n);
    let mean_gap = trips.last().unwrap().depart_s / n as f64;
    assert!((mean_gap / 3.0 - 1.0).abs() < 0.02, "mean gap {mean_gap}");
    let w = cfg.zone_weights(&g.zones.classes, true);
    let mut freq = vec![0usize; 36];
    for t in &trips {
        freq[g.zone_of_node(t.origin_node)] += 1;
    }
    for z in 0..36 {
        let f = freq[z] as f64 / n as f64;
        // 2% of the weight, with a 3-sigma floor for the smallest zones
        let tol = (0.02 * w[z]).max(3.0 * (w[z] * (1.0 - w[z]) / n as f64).sqrt());
        assert!((f - w[z]).abs() <= tol, "zone {z}: {f} vs {}", w[z]);
    }
    let class_share = |c: ZoneClass| {
        trips.iter().filter(|t| g.zones.classes[g.zone_of_node(t.origin_node)] == c).count() as f64 / n as f64
    };
    assert!((class_share(ZoneClass::Urban) - 0.5).abs() < 0.01);
}

#[test]
fn adjacent_nodes_take_direct_link() {
    let g = toy();
    let car = vec![10.0];
    let sus = vec![false; 2];
    let cands = candidate_paths(&g, 0, 1, &DemandConfig::default(), &model(&car, &sus));
    let rh = cands.iter().find(|c| c.combo == Combo::RhOnly).unwrap();
    assert_eq!(rh.legs.len(), 1);
    assert_eq!((rh.legs[0].from, rh.legs[0].to, rh.legs[0].dist_m), (0, 1, 1000.0));
    assert!((rh.v_s - 100.0).abs() < 1e-9);
}

#[test]
fn road_only_destination_has_no_transit_candidates() {
    let g = build_manhattan_grid(&GridConfig::uniform(1, 1, 2000.0, 500.0)).unwrap();
    let car = vec![10.0];
    let cands = candidate_paths(&g, 0, 5, &DemandConfig::default(), &model(&car, &[]));
    assert_eq!(cands.len(), 1);
    assert_eq!(cands[0].combo, Combo::RhOnly);
}

#[test]
fn suspended_line_excluded() {
    let g = toy();
    let car = vec![10.0];
    let cfg = DemandConfig::default();
    let open = candidate_paths(&g, 0, 3, &cfg, &model(&car, &[false, false]));
    assert!(open.iter().any(|c| c.legs.iter().any(|l| l.mode == LegMode::Ride(0))));
    let closed = candidate_paths(&g, 0, 3, &cfg, &model(&car, &[true, false]));
    assert!(closed.iter().all(|c| c.legs.iter().all(|l| l.mode != LegMode::Ride(0))));
    let mut masked = g.clone();
    let train: Vec<usize> = masked.edges.iter().filter(|e| e.kind == EdgeKind::Train).map(|e| e.id).collect();
    masked.deactivate(&train);
    let cands = candidate_paths(&masked, 0, 3, &cfg, &model(&car, &[false, false]));
    assert!(cands.iter().all(|c| c.legs.iter().all(|l| l.mode != LegMode::Ride(0))));
}

#[test]
fn non_customers_get_no_ride_hailing_candidates() {
    let g = toy();
    let car = vec![10.0];
    let cfg = DemandConfig::default();
    let tm = TravelModel { rh: false, ..model(&car, &[false, false]) };
    let cands = candidate_paths(&g, 0, 3, &cfg, &tm);
    assert!(!cands.is_empty());
    assert!(cands.iter().all(|c| !c.uses_rh()));
    assert!(candidate_paths(&g, 0, 3, &cfg, &model(&car, &[false, false])).iter().any(|c| c.uses_rh()));
}

/// Exhaustive oracle: enumerate every simple path of the combination's
/// subgraph; returns the cheapest cost and whether that journey rides transit.
fn brute_force(g: &MultiModalGraph, o: usize, d: usize, combo: Combo, tm: &TravelModel, cfg: &DemandConfig) -> Option<(f64, bool)> {
    if combo == Combo::RhOnly {
        return Some((g.road_dist(o, d) / tm.car_speed[0], false));
    }
    let tau = g.transfer_time_s;
    let mut sources = Vec::new();
    let mut targets = Vec::new();
    if combo.walk_access() {
        for n in g.nodes.iter().filter(|n| n.layer != Layer::Vehicle) {
            let a = g.road_dist(o, g.road_node_of(n.id));
            if a <= cfg.max_walk_m {
                sources.push((n.id, a / tm.walk_speed + tau));
            }
            let b = g.road_dist(g.road_node_of(n.id), d);
            if b <= cfg.max_walk_m {
                targets.push((n.id, b / tm.walk_speed + tau));
            }
        }
    } else {
        sources.push((o, 0.0));
        targets.push((d, 0.0));
    }
    let weight = |e: &Edge| -> f64 {
        match e.kind {
            EdgeKind::Connection => e.base_time,
            EdgeKind::Vehicle => e.length / tm.car_speed[0],
            EdgeKind::Train => e.length / tm.train_speed,
            EdgeKind::Metro => e.length / tm.metro_speed,
            EdgeKind::Bus => e.length / (tm.bus_factor * tm.car_speed[0]),
        }
    };
    struct Ctx<'a> {
        g: &'a MultiModalGraph,
        layers: rhsim_core::network::LayerSet,
        targets: &'a [(usize, f64)],
        weight: &'a dyn Fn(&Edge) -> f64,
        best: Option<(f64, bool)>,
    }
    fn dfs(cx: &mut Ctx, u: usize, cost: f64, rode: bool, seen: &mut Vec<bool>) {
        for &(t, c) in cx.targets {
            if t == u && cx.best.is_none_or(|(b, _)| cost + c < b) {
                cx.best = Some((cost + c, rode));
            }
        }
        for &(e, v) in cx.g.neighbors(u) {
            let edge = cx.g.edge(e);
            if seen[v] || !cx.g.is_active(e) || !cx.layers.contains(edge.kind) {
                continue;
            }
            seen[v] = true;
            let w = (cx.weight)(edge);
            dfs(cx, v, cost + w, rode || edge.line.is_some(), seen);
            seen[v] = false;
        }
    }
    let mut cx = Ctx { g, layers: combo.layers(), targets: &targets, weight: &weight, best: None };
    for &(s, c) in &sources {
        let mut seen = vec![false; g.nodes.len()];
        seen[s] = true;
        dfs(&mut cx, s, c, false, &mut seen);
    }
    cx.best
}

#[test]
fn toy_candidates_match_exhaustive_enumeration() {
    let g = toy();
    let car = vec![8.0];
    let sus = vec![false; 2];
    let tm = model(&car, &sus);
    let cfg = DemandConfig { k_paths: 5, ..Default::default() };
    for o in 0..4 {
        for d in 0..4 {
            if o == d {
                continue;
            }
            let cands = candidate_paths(&g, o, d, &cfg, &tm);
            for combo in Combo::ALL {
                let oracle = brute_force(&g, o, d, combo, &tm, &cfg);
                let found = cands.iter().find(|c| c.combo == combo);
                match (found, oracle) {
                    (Some(c), Some((cost, rode))) => {
                        assert!(rode || combo == Combo::RhOnly);
                        assert!((c.v_s - cost).abs() < 1e-9, "{combo:?} {} vs {cost}: {:?}", c.v_s, c.legs);
                        let legs: f64 = c.legs.iter().map(|l| l.time_s).sum();
                        assert!((legs - c.v_s).abs() < 1e-9);
                    }
                    (None, Some((cost, rode))) => {
                        // either rides nothing or duplicates an equal journey
                        let dup = cands.iter().any(|c| (c.v_s - cost).abs() < 1e-9);
                        assert!(!rode || dup, "{combo:?} missing for {o}->{d}");
                    }
                    (None, None) => {}
                    (Some(_), None) => panic!("{combo:?} candidate without any path"),
                }
            }
        }
    }
}

#[test]
fn candidate_legs_are_contiguous_on_grid() {
    let g = build_manhattan_grid(&GridConfig::full_scale()).unwrap();
    let car = vec![9.0; 36];
    let sus = vec![false; g.lines.len()];
    let tm = model(&car, &sus);
    let cfg = DemandConfig::default();
    let roads = g.road_nodes();
    for (i, &o) in roads.iter().enumerate().step_by(37) {
        let d = roads[(i * 7 + 101) % roads.len()];
        if o == d {
            continue;
        }
        let cands = candidate_paths(&g, o, d, &cfg, &tm);
        assert!(!cands.is_empty() && cands.len() <= 5);
        for c in &cands {
            assert_eq!(g.road_node_of(c.legs[0].from), o);
            assert_eq!(g.road_node_of(c.legs.last().unwrap().to), d);
            for w in c.legs.windows(2) {
                assert_eq!(w[0].to, w[1].from);
            }
        }
        for w in cands.windows(2) {
            assert!(w[0].v_s <= w[1].v_s);
        }
    }
}

#[test]
fn logit_closed_forms() {
    let p = choice_probabilities(&[10.0, 20.0], 0.1);
    assert!((p[0] - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-12);
    let p = choice_probabilities(&[5.0; 4], 0.1);
    assert!(p.iter().all(|x| (x - 0.25).abs() < 1e-15));
    let p = choice_probabilities(&[1.0, 50.0, 300.0], 0.0);
    assert!(p.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
}

#[test]
fn logit_sampling_frequencies() {
    let g = toy();
    let car = vec![10.0];
    let sus = vec![false; 2];
    let cands = candidate_paths(&g, 0, 3, &DemandConfig::default(), &model(&car, &sus));
    let p = choice_probabilities(&cands.iter().map(|c| c.v_s / 60.0).collect::<Vec<_>>(), 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 50_000;
    let mut count = vec![0usize; cands.len()];
    for _ in 0..n {
        count[choose_path(&cands, 0.1, &mut rng)] += 1;
    }
    for (c, pi) in count.iter().zip(&p) {
        assert!((*c as f64 / n as f64 - pi).abs() < 0.01);
    }
}

#[test]
fn replan_policy() {
    assert_eq!(replan_decision(100.0, 600.0, 0, 3), Replan::Keep);
    assert_eq!(replan_decision(600.0, 600.0, 0, 3), Replan::Replan);
    assert_eq!(replan_decision(600.0, 600.0, 3, 3), Replan::Abandon);
}

proptest! {
    #[test]
    fn probabilities_sum_to_one(v in proptest::collection::vec(0.0f64..200.0, 1..6), theta in 0.0f64..2.0) {
        let p = choice_probabilities(&v, theta);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn logit_shift_invariant(v in proptest::collection::vec(0.0f64..200.0, 1..6), c in -100.0f64..100.0) {
        let p = choice_probabilities(&v, 0.1);
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let q = choice_probabilities(&shifted, 0.1);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
