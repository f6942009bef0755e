//! Property-based tests of the geometric, control and metric invariants.

use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use swarm_lattice::control::{
    adapt_normal_gain, angular_error, control_input, normal_input, normal_interaction, ControlParams, Lattice,
};
use swarm_lattice::geometry::{
    adjacency_set, build_links, neighbourhood, pair_angle, relative_position, GeometryParams, SwarmState, Vec2,
};
use swarm_lattice::metrics::{compactness, regularity};
use swarm_lattice::sim::{sample_initial_positions, step, stream_rng, Controller, Dynamics, Stream};
use swarm_lattice::baseline::BaselineParams;

fn points(max: usize, half_width: f64) -> impl Strategy<Value = Vec<Vec2>> {
    prop::collection::vec((-half_width..half_width, -half_width..half_width), 1..=max)
        .prop_map(|v| v.into_iter().map(|(x, y)| Vec2::new(x, y)).collect())
}

fn lattice() -> impl Strategy<Value = Lattice> {
    prop_oneof![Just(Lattice::Square), Just(Lattice::Triangular)]
}

fn sensing() -> impl Strategy<Value = f64> {
    prop_oneof![Just(f64::INFINITY), 0.5..4.0]
}

fn geometry(r_s: f64) -> GeometryParams {
    GeometryParams { sensing_radius: r_s, ..GeometryParams::default() }
}

fn control(lattice: Lattice, offset: f64) -> ControlParams {
    ControlParams { lattice, orientation_offset: offset, ..ControlParams::default() }
}

/// Residual of `x` modulo `p`, mapped to `[0, p/2]`.
fn circular(x: f64, p: f64) -> f64 {
    let r = x.rem_euclid(p);
    r.min(p - r)
}

fn square_grid(k: usize) -> SwarmState {
    SwarmState::new((0..k).flat_map(|i| (0..k).map(move |j| Vec2::new(i as f64, j as f64))).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn links_are_symmetric(pts in points(15, 3.0), r_s in sensing()) {
        let state = SwarmState::new(pts).unwrap();
        let links = build_links(&state, &geometry(r_s));
        for l in links.links() {
            prop_assert!(links.contains(l.j, l.i));
        }
        prop_assert_eq!(links.len() % 2, 0);
    }
}

proptest! {
    #[test]
    fn relative_positions_are_antisymmetric(pts in points(10, 5.0)) {
        let state = SwarmState::new(pts).unwrap();
        for i in 0..state.len() {
            for j in 0..state.len() {
                if i != j {
                    let a = relative_position(&state, i, j).unwrap();
                    let b = relative_position(&state, j, i).unwrap();
                    prop_assert_eq!(a, -b);
                }
            }
        }
    }

    #[test]
    fn adjacency_is_within_neighbourhood(pts in points(15, 3.0), r_s in sensing()) {
        let state = SwarmState::new(pts).unwrap();
        let g = geometry(r_s);
        for i in 0..state.len() {
            let hood = neighbourhood(&state, i, &g).unwrap();
            for j in adjacency_set(&state, i, &g).unwrap() {
                prop_assert!(hood.contains(&j));
            }
        }
    }

    #[test]
    fn pair_angle_is_symmetric_and_periodic(a in -10.0f64..10.0, b in -10.0f64..10.0, k in -3i32..3) {
        let d = pair_angle(a, b);
        prop_assert!((0.0..=PI).contains(&d));
        prop_assert!((d - pair_angle(b, a)).abs() < 1e-12);
        prop_assert!((d - pair_angle(a + k as f64 * TAU, b)).abs() < 1e-9);
    }

    #[test]
    fn angular_error_is_periodic(theta in -10.0f64..10.0, k in -4i32..4, l in lattice(), offset in -1.0f64..1.0) {
        let p = l.period();
        let e = angular_error(theta, l, offset);
        prop_assert!(e > -p / 2.0 && e <= p / 2.0);
        let shifted = angular_error(theta + k as f64 * p, l, offset);
        // equal as points on the circle of circumference p (ties may wrap)
        prop_assert!(circular(e - shifted, p) < 1e-9);
        prop_assert!(circular(e - (theta - offset), p) < 1e-9);
    }

    #[test]
    fn normal_interaction_is_odd(l in lattice(), x in 0.0f64..1.0) {
        let err = x * PI / l.l();
        prop_assert_eq!(normal_interaction(-err, l), -normal_interaction(err, l));
        prop_assert!(normal_interaction(err, l).abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn input_respects_speed_limit(pts in points(12, 2.0), l in lattice(), g_r in 0.0f64..40.0, g_n in 0.0f64..40.0, r_s in sensing()) {
        let state = SwarmState::new(pts).unwrap();
        let p = ControlParams { g_r, g_n, ..control(l, 0.0) };
        let g = geometry(r_s);
        for i in 0..state.len() {
            prop_assert!(control_input(&state, i, &p, &g).norm() <= p.v_max * (1.0 + 1e-12));
        }
    }

    #[test]
    fn input_is_rotation_equivariant(pts in points(10, 2.0), l in lattice(), delta in -PI..PI, offset in -0.5f64..0.5) {
        let state = SwarmState::new(pts.clone()).unwrap();
        let rotated = SwarmState::new(pts.iter().map(|p| p.rotate(delta)).collect()).unwrap();
        let g = GeometryParams::default();
        let p = control(l, offset);
        let q = control(l, offset + delta);
        for i in 0..state.len() {
            let u = control_input(&state, i, &p, &g).rotate(delta);
            let v = control_input(&rotated, i, &q, &g);
            // link membership may flip for pairs within rounding of R_min/R_max
            let near_boundary = (0..state.len()).any(|j| {
                let d = (pts[i] - pts[j]).norm();
                j != i && ((d - g.r_min).abs() < 1e-9 || (d - g.r_max).abs() < 1e-9)
            });
            if !near_boundary {
                prop_assert!((u - v).norm() < 1e-8, "{:?} vs {:?}", u, v);
            }
        }
    }

    #[test]
    fn adaptive_gain_never_decreases(gain in 0.0f64..50.0, e in 0.0f64..1.0, dt in 1e-4f64..0.1) {
        let p = ControlParams::default();
        let next = adapt_normal_gain(gain, e, &p, dt);
        prop_assert!(next >= gain);
        if e <= p.e_theta_star {
            prop_assert_eq!(next, gain);
        }
    }

    #[test]
    fn metrics_are_translation_invariant(pts in points(15, 2.5), l in lattice(), dx in -50.0f64..50.0, dy in -50.0f64..50.0) {
        let g = GeometryParams::default();
        let a = SwarmState::new(pts.clone()).unwrap();
        let b = SwarmState::new(pts.iter().map(|&p| p + Vec2::new(dx, dy)).collect()).unwrap();
        let (la, lb) = (build_links(&a, &g), build_links(&b, &g));
        prop_assume!(la.len() == lb.len());
        prop_assert!((regularity(&la, l, 0.0) - regularity(&lb, l, 0.0)).abs() < 1e-9);
        prop_assert_eq!(compactness(&la, l), compactness(&lb, l));
    }

    #[test]
    fn metrics_are_rotation_invariant(pts in points(15, 2.5), l in lattice(), k in 0u32..6, delta in -PI..PI) {
        let g = GeometryParams::default();
        let a = SwarmState::new(pts.clone()).unwrap();
        let la = build_links(&a, &g);
        // by a multiple of the lattice period, with the offset fixed
        let turn = k as f64 * l.period();
        let b = SwarmState::new(pts.iter().map(|p| p.rotate(turn)).collect()).unwrap();
        let lb = build_links(&b, &g);
        prop_assume!(la.len() == lb.len());
        prop_assert!((regularity(&la, l, 0.0) - regularity(&lb, l, 0.0)).abs() < 1e-9);
        prop_assert_eq!(compactness(&la, l), compactness(&lb, l));
        // by any angle, with the offset turned along
        let c = SwarmState::new(pts.iter().map(|p| p.rotate(delta)).collect()).unwrap();
        let lc = build_links(&c, &g);
        prop_assume!(la.len() == lc.len());
        prop_assert!((regularity(&la, l, 0.3) - regularity(&lc, l, 0.3 + delta)).abs() < 1e-9);
        prop_assert_eq!(compactness(&la, l), compactness(&lc, l));
    }

    #[test]
    fn metrics_stay_in_range(pts in points(20, 3.0), l in lattice()) {
        let state = SwarmState::new(pts).unwrap();
        let links = build_links(&state, &GeometryParams::default());
        let e = regularity(&links, l, 0.0);
        prop_assert!((0.0..=1.0).contains(&e));
        let c = compactness(&links, l);
        prop_assert!((0.0..=1.0).contains(&c));
    }

    #[test]
    fn trajectories_are_permutation_equivariant(pts in points(10, 1.5), seed in any::<u64>(), l in lattice()) {
        let n = pts.len();
        let mut order: Vec<usize> = (0..n).collect();
        // deterministic shuffle from the generated seed
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let params = control(l, 0.0);
        let baseline = BaselineParams::default();
        let g = GeometryParams::default();
        let spins = vec![false; n];
        let dynamics = Dynamics {
            controller: Controller::MainStatic,
            control: &params,
            baseline: &baseline,
            geometry: &g,
            spins: &spins,
            dt: 0.01,
            noise_sigma: 0.0,
        };
        let mut a = SwarmState::new(pts.clone()).unwrap();
        let mut b = SwarmState::new(order.iter().map(|&k| pts[k]).collect()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            a = step(&a, &dynamics, &mut rng).unwrap();
            b = step(&b, &dynamics, &mut rng).unwrap();
        }
        for (slot, &k) in order.iter().enumerate() {
            prop_assert!((a.positions[k] - b.positions[slot]).norm() < 1e-9);
        }
    }

    #[test]
    fn noiseless_displacement_is_bounded(pts in points(12, 1.5), l in lattice(), adaptive in any::<bool>()) {
        let params = control(l, 0.0);
        let baseline = BaselineParams::default();
        let g = GeometryParams::default();
        let spins = vec![true; pts.len()];
        for controller in [if adaptive { Controller::MainAdaptive } else { Controller::MainStatic }, Controller::Baseline] {
            let dynamics = Dynamics {
                controller,
                control: &params,
                baseline: &baseline,
                geometry: &g,
                spins: &spins,
                dt: 0.01,
                noise_sigma: 0.0,
            };
            let state = SwarmState::new(pts.clone()).unwrap();
            let next = step(&state, &dynamics, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
            for (p, q) in state.positions.iter().zip(&next.positions) {
                prop_assert!((*q - *p).norm() <= params.v_max * 0.01 * (1.0 + 1e-12));
            }
        }
    }
}

#[test]
fn perfect_lattices_have_zero_normal_input() {
    let g = GeometryParams::default();
    let state = square_grid(5);
    let p = control(Lattice::Square, 0.0);
    for i in 0..state.len() {
        let adj = adjacency_set(&state, i, &g).unwrap();
        assert!(normal_input(&state, i, &adj, &p).norm() < 1e-12);
    }
    let tri = SwarmState::new(
        (0..5)
            .flat_map(|i| (0..5).map(move |j| Vec2::new(i as f64 + 0.5 * j as f64, j as f64 * 3f64.sqrt() / 2.0)))
            .collect(),
    )
    .unwrap();
    let p = control(Lattice::Triangular, 0.0);
    for i in 0..tri.len() {
        let adj = adjacency_set(&tri, i, &g).unwrap();
        assert!(normal_input(&tri, i, &adj, &p).norm() < 1e-12);
    }
}

#[test]
fn perfect_grids_are_perfectly_regular() {
    let g = GeometryParams::default();
    for k in 2..=5 {
        let links = build_links(&square_grid(k), &g);
        assert_eq!(regularity(&links, Lattice::Square, 0.0), 0.0, "{k}x{k}");
    }
    assert_eq!(compactness(&build_links(&square_grid(3), &g), Lattice::Square), 1.0 / 3.0);
}

#[test]
fn noise_variance_grows_linearly() {
    // an isolated agent has zero control input, so its displacement is pure
    // diffusion with per-axis variance k·σ²·dt after k steps
    let (sigma, dt, k, samples) = (0.7, 0.01, 25, 4000);
    let params = ControlParams::default();
    let baseline = BaselineParams::default();
    let g = GeometryParams::default();
    let spins = [false];
    let dynamics = Dynamics {
        controller: Controller::MainStatic,
        control: &params,
        baseline: &baseline,
        geometry: &g,
        spins: &spins,
        dt,
        noise_sigma: sigma,
    };
    let mut rng = stream_rng(99, Stream::Noise);
    let mut xs = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut s = SwarmState::new(vec![Vec2::ZERO]).unwrap();
        for _ in 0..k {
            s = step(&s, &dynamics, &mut rng).unwrap();
        }
        xs.push(s.positions[0].x);
    }
    let n = samples as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let expected = k as f64 * sigma * sigma * dt;
    let sd = expected * (2.0 / (n - 1.0)).sqrt();
    assert!((var - expected).abs() <= 3.0 * sd, "variance {var} vs {expected} ± {}", 3.0 * sd);
}

#[test]
fn initial_radius_has_mean_two_thirds_r() {
    let r = 2.0;
    let n = 100_000;
    let pts = sample_initial_positions(n, r, &mut stream_rng(7, Stream::InitialPositions));
    assert!(pts.iter().all(|p| p.norm() <= r));
    let mean = pts.iter().map(|p| p.norm()).sum::<f64>() / n as f64;
    let sd = (r * r / 18.0).sqrt() / (n as f64).sqrt();
    assert!((mean - 2.0 * r / 3.0).abs() <= 3.0 * sd, "{mean}");
}
