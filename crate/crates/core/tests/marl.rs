use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rhsim_core::marl::nn::{soft_update, Activation, Adam, Mlp};
use rhsim_core::marl::{
    act, actor_gradient, actor_objective, critic_input, critic_loss, observation_dim, raw_observation, reward,
    Checkpoint, Experience, GlobalFeatures, Maddpg, MarlConfig, Normalizer, ReplayBuffer,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn random_net(r: &mut ChaCha8Rng, sizes: &[usize], out: Activation) -> Mlp {
    let mut net = Mlp::new(sizes, Activation::Relu, out, r).unwrap();
    // spread weights so ReLU kinks are rarely within h of a probe
    for p in &mut net.params {
        *p = r.random_range(-1.0..1.0);
    }
    net
}

fn vec_of(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

fn random_batch(r: &mut ChaCha8Rng, n: usize, obs: usize, act: usize, co: usize) -> Vec<Experience> {
    (0..n)
        .map(|_| Experience {
            s: vec_of(r, obs),
            a: vec_of(r, act),
            r: r.random_range(-20.0..20.0),
            s2: vec_of(r, obs),
            co: vec_of(r, co),
            co2: vec_of(r, co),
        })
        .collect()
}

/// Central difference of `f` in parameter `i`.
fn fd(params: &mut Mlp, i: usize, f: &dyn Fn(&Mlp) -> f64) -> f64 {
    let h = 1e-5;
    let orig = params.params[i];
    params.params[i] = orig + h;
    let up = f(params);
    params.params[i] = orig - h;
    let down = f(params);
    params.params[i] = orig;
    (up - down) / (2.0 * h)
}

#[test]
fn reward_shape() {
    assert_eq!(reward(300.0, 300.0, 0.3, 20.0), 0.0);
    assert!((reward(900.0, 300.0, 0.3, 20.0) - -18.102965072897328).abs() < 1e-12);
    let (hi, lo) = (reward(0.0, 3600.0, 0.3, 20.0), reward(3600.0, 0.0, 0.3, 20.0));
    assert!(hi < 20.0 && hi > 19.99);
    assert!(lo > -20.0 && lo < -19.99);
    let cfg = MarlConfig::default();
    let mut r = rng(3);
    for _ in 0..100 {
        let a = r.random_range(0.0..3600.0);
        let b = a + r.random_range(1.0..600.0);
        assert!(cfg.reward(a) > cfg.reward(b));
        assert!(cfg.reward(a).abs() < 20.0);
    }
}

#[test]
fn mlp_trivial_cases() {
    let z = Mlp::zeros(&[3, 4, 2], Activation::Relu, Activation::Identity).unwrap();
    assert_eq!(z.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    let mut one = Mlp::zeros(&[1, 1], Activation::Relu, Activation::Relu).unwrap();
    one.params = vec![2.0, 0.5];
    assert_eq!(one.forward(&[3.0]).unwrap(), vec![6.5]);
    assert!(z.forward(&[1.0]).is_err());
    assert!(Mlp::zeros(&[3], Activation::Relu, Activation::Relu).is_err());
}

#[test]
fn mlp_gradients_match_finite_differences() {
    let mut r = rng(11);
    let mut probes = 0;
    for case in 0..20 {
        let out = if case % 2 == 0 { Activation::Tanh } else { Activation::Identity };
        let mut net = random_net(&mut r, &[4, 6, 5, 3], out);
        let x = vec_of(&mut r, 4);
        let up = vec_of(&mut r, 3);
        let tr = net.trace(&x).unwrap();
        let mut g = vec![0.0; net.param_count()];
        let dx = net.backward(&tr, &up, &mut g).unwrap();
        let f = |n: &Mlp| n.forward(&x).unwrap().iter().zip(&up).map(|(a, b)| a * b).sum::<f64>();
        for _ in 0..5 {
            let i = r.random_range(0..net.param_count());
            assert!(rel_err(g[i], fd(&mut net, i, &f)) < 1e-4, "param {i}");
            probes += 1;
        }
        // input gradient
        let h = 1e-5;
        for j in 0..4 {
            let mut xp = x.clone();
            xp[j] += h;
            let mut xm = x.clone();
            xm[j] -= h;
            let dot = |v: &[f64]| net.forward(v).unwrap().iter().zip(&up).map(|(a, b)| a * b).sum::<f64>();
            assert!(rel_err(dx[j], (dot(&xp) - dot(&xm)) / (2.0 * h)) < 1e-4);
        }
    }
    assert_eq!(probes, 100);
}

#[test]
fn critic_loss_trivial() {
    let (obs, na) = (3, 2);
    let critic = Mlp::zeros(&[obs + na, 4, 1], Activation::Relu, Activation::Identity).unwrap();
    let actor = Mlp::zeros(&[obs, 4, na], Activation::Relu, Activation::Tanh).unwrap();
    let mut e = random_batch(&mut rng(1), 5, obs, na, 0);
    for x in &mut e {
        x.r = 0.0;
    }
    let refs: Vec<&Experience> = e.iter().collect();
    assert_eq!(critic_loss(&refs, &critic, &critic, &actor, 0.99).unwrap().0, 0.0);
    let mut one = e[0].clone();
    one.r = 1.0;
    assert_eq!(critic_loss(&[&one], &critic, &critic, &actor, 0.0).unwrap().0, 1.0);
}

#[test]
fn critic_loss_gradient_matches_finite_differences() {
    let mut r = rng(21);
    for joint in [false, true] {
        let (obs, na) = (5, 3);
        let co = if joint { na } else { 0 };
        for _ in 0..10 {
            let mut critic = random_net(&mut r, &[obs + na + co, 8, 6, 1], Activation::Identity);
            let target = random_net(&mut r, &[obs + na + co, 8, 6, 1], Activation::Identity);
            let actor_t = random_net(&mut r, &[obs, 7, na], Activation::Tanh);
            let batch = random_batch(&mut r, 6, obs, na, co);
            let refs: Vec<&Experience> = batch.iter().collect();
            let (_, g) = critic_loss(&refs, &critic, &target, &actor_t, 0.9).unwrap();
            let f = |c: &Mlp| critic_loss(&refs, c, &target, &actor_t, 0.9).unwrap().0;
            for _ in 0..5 {
                let i = r.random_range(0..critic.param_count());
                assert!(rel_err(g[i], fd(&mut critic, i, &f)) < 1e-4);
            }
        }
    }
}

#[test]
fn actor_gradient_matches_finite_differences() {
    let mut r = rng(31);
    let (obs, na) = (5, 4);
    for _ in 0..20 {
        let mut actor = random_net(&mut r, &[obs, 8, na], Activation::Tanh);
        let critic = random_net(&mut r, &[obs + na, 8, 6, 1], Activation::Identity);
        let batch = random_batch(&mut r, 4, obs, na, 0);
        let refs: Vec<&Experience> = batch.iter().collect();
        let g = actor_gradient(&refs, &actor, &critic).unwrap();
        let f = |a: &Mlp| actor_objective(&refs, a, &critic).unwrap();
        for _ in 0..5 {
            let i = r.random_range(0..actor.param_count());
            assert!(rel_err(g[i], fd(&mut actor, i, &f)) < 1e-4);
        }
    }
}

#[test]
fn actor_gradient_closed_forms() {
    let mut r = rng(41);
    let (obs, na) = (3, 2);
    let actor = random_net(&mut r, &[obs, na], Activation::Identity);
    let batch = random_batch(&mut r, 7, obs, na, 0);
    let refs: Vec<&Experience> = batch.iter().collect();

    // Q independent of a: weights on action inputs are zero
    let mut flat = Mlp::zeros(&[obs + na, 1], Activation::Relu, Activation::Identity).unwrap();
    flat.params = vec![0.3, -0.2, 0.1, 0.0, 0.0, 1.0];
    assert!(actor_gradient(&refs, &actor, &flat).unwrap().iter().all(|&g| g == 0.0));

    // Q = Σa with a linear actor: ∂/∂W[o][i] = mean of s_i, ∂/∂b[o] = 1
    let mut sum_a = Mlp::zeros(&[obs + na, 1], Activation::Relu, Activation::Identity).unwrap();
    sum_a.params = vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0];
    let g = actor_gradient(&refs, &actor, &sum_a).unwrap();
    let mean: Vec<f64> = (0..obs).map(|i| batch.iter().map(|e| e.s[i]).sum::<f64>() / batch.len() as f64).collect();
    for o in 0..na {
        for i in 0..obs {
            assert!((g[o * obs + i] - mean[i]).abs() < 1e-12);
        }
        assert!((g[na * obs + o] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn actor_ascent_step_improves_objective() {
    let mut r = rng(51);
    let (obs, na) = (4, 3);
    for _ in 0..10 {
        let mut actor = random_net(&mut r, &[obs, 8, na], Activation::Tanh);
        let critic = random_net(&mut r, &[obs + na, 8, 1], Activation::Identity);
        let batch = random_batch(&mut r, 8, obs, na, 0);
        let refs: Vec<&Experience> = batch.iter().collect();
        let before = actor_objective(&refs, &actor, &critic).unwrap();
        let g = actor_gradient(&refs, &actor, &critic).unwrap();
        for (p, d) in actor.params.iter_mut().zip(&g) {
            *p += 1e-4 * d;
        }
        assert!(actor_objective(&refs, &actor, &critic).unwrap() >= before);
    }
}

#[test]
fn soft_update_limits_and_geometry() {
    let eval = vec![1.0, -2.0, 3.0];
    let mut t = vec![0.5, 0.5, 0.5];
    soft_update(&mut t, &eval, 1.0).unwrap();
    assert_eq!(t, eval);
    let mut t = vec![0.5, 0.5, 0.5];
    soft_update(&mut t, &eval, 0.0).unwrap();
    assert_eq!(t, vec![0.5, 0.5, 0.5]);
    let tau = 0.1;
    let dist = |t: &[f64]| t.iter().zip(&eval).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let mut d0 = dist(&t);
    for _ in 0..50 {
        soft_update(&mut t, &eval, tau).unwrap();
        let d1 = dist(&t);
        assert!((d1 - (1.0 - tau) * d0).abs() < 1e-12);
        d0 = d1;
    }
    assert!(soft_update(&mut t, &[1.0], 0.5).is_err());
}

#[test]
fn act_uses_argmax() {
    let mut net = Mlp::zeros(&[2, 4], Activation::Relu, Activation::Identity).unwrap();
    let bias = net.param_count() - 4;
    net.params[bias] = 1.0;
    assert_eq!(act(&net, &[0.0, 0.0], 0.0, &mut rng(1)).unwrap().1, 0);
    net.params[bias + 3] = 2.0;
    assert_eq!(act(&net, &[0.0, 0.0], 0.0, &mut rng(1)).unwrap().1, 3);
    let a = act(&net, &[0.3, 0.1], 0.2, &mut rng(5)).unwrap();
    let b = act(&net, &[0.3, 0.1], 0.2, &mut rng(5)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn adam_minimizes_quadratic() {
    let mut x = vec![3.0, -2.0];
    let mut opt = Adam::new(0.05, 2);
    for _ in 0..2000 {
        let g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        opt.step(&mut x, &g);
    }
    assert!(x.iter().all(|v| v.abs() < 1e-2));
}

#[test]
fn observation_layout_and_scaling() {
    assert_eq!(observation_dim(17), 69);
    let mut g = GlobalFeatures::zeros(2);
    g.revenue = vec![1.0, 2.0];
    g.gap = vec![-1.0, 4.0];
    let x = raw_observation(&g, 3.0);
    assert_eq!(x, vec![1.0, 2.0, 0.0, 0.0, 0.0, 0.0, -1.0, 4.0, 3.0]);
    let mut n = Normalizer::new(x.len());
    n.observe(&x);
    n.observe(&vec![0.0; 9]);
    let y = n.normalize(&x);
    assert!(y.iter().all(|v| (0.0..=1.0).contains(v)));
    assert_eq!(y[1], 1.0);
    assert_eq!(y[2], 0.0);
}

#[test]
fn training_step_runs_on_cadence() {
    let cfg = MarlConfig { batch_size: 8, recent_window: 8, recent_batches: 1, random_batches: 1, ..MarlConfig::default() };
    let mut r = rng(61);
    let mut agent = Maddpg::new(cfg, 5, 3, &mut r).unwrap();
    let mut trained = 0;
    for e in random_batch(&mut r, 40, 5, 3, 0) {
        if agent.remember(e, &mut r).unwrap() {
            trained += 1;
        }
    }
    // insertions 10, 20, 30 and 40 are due, two batches each
    assert_eq!(trained, 4);
    assert_eq!(agent.updates, 8);
}

#[test]
fn checkpoint_round_trip() {
    let mut r = rng(71);
    let cfg = MarlConfig { hidden: vec![6, 6], ..MarlConfig::default() };
    let mut agent = Maddpg::new(cfg, 9, 3, &mut r).unwrap();
    agent.norm.observe(&vec![1.0; 9]);
    let c = agent.checkpoint(4, &[]);
    let back = Checkpoint::from_json(&c.to_json().unwrap()).unwrap();
    assert_eq!(back, c);
    let restored = Maddpg::from_checkpoint(back).unwrap();
    assert_eq!(restored.actor, agent.actor);
    let mut bad = c.clone();
    bad.format = 99;
    assert!(Maddpg::from_checkpoint(bad).is_err());
    assert!(Checkpoint::from_json("{").is_err());
    let _ = critic_input(&[1.0], &[2.0], &[]);
}

proptest! {
    #[test]
    fn buffer_is_fifo_under_wraparound(cap in 1usize..20, n in 0usize..60) {
        let mut b = ReplayBuffer::new(cap);
        for i in 0..n {
            b.push(Experience { s: vec![], a: vec![], r: i as f64, s2: vec![], co: vec![], co2: vec![] });
        }
        prop_assert!(b.len() <= cap);
        prop_assert_eq!(b.len(), n.min(cap));
        let rs: Vec<f64> = b.iter().map(|e| e.r).collect();
        let expect: Vec<f64> = (n.saturating_sub(cap)..n).map(|i| i as f64).collect();
        prop_assert_eq!(rs, expect);
    }

    #[test]
    fn argmax_shift_invariant(seed in any::<u64>(), shift in -5.0f64..5.0) {
        let mut r = rng(seed);
        let net = random_net(&mut r, &[3, 5, 4], Activation::Identity);
        let x = vec_of(&mut r, 3);
        let (_, i) = act(&net, &x, 0.0, &mut r).unwrap();
        let mut shifted = net.clone();
        let nb = shifted.param_count();
        for b in &mut shifted.params[nb - 4..] {
            *b += shift;
        }
        prop_assert_eq!(act(&shifted, &x, 0.0, &mut r).unwrap().1, i);
    }

    // beyond about 100 min past t_h one second no longer moves the f64 value
    #[test]
    fn reward_strictly_decreasing(a in 0.0f64..5400.0, d in 1.0f64..600.0) {
        prop_assert!(reward(a, 300.0, 0.3, 20.0) > reward(a + d, 300.0, 0.3, 20.0));
    }
}
