use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use abwave::analysis::{compare_profiles, fringe_extract, wrap_fringes, Profile};
use abwave::geom::Vec2;
use abwave::potentials::{apply_gauge, infinite_solenoid, PolynomialGauge};
use abwave::scenarios::unwrap_shift;
use abwave::wavesolver::{gauge_rotate, init_packet, GridSpec, LinkPhases, Mask};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Distance of `a` from `b` modulo 2π.
fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Two-slit style profile: cos² fringes under a Gaussian envelope.
fn fringes(spacing: f64, offset: f64, noise: f64, seed: u64) -> Profile<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..801).map(|k| -8.0 + 0.02 * k as f64).collect();
    let y = x
        .iter()
        .map(|&u| {
            let clean = (PI * (u - offset) / spacing).cos().powi(2) * (-(u * u) / 50.0).exp();
            (clean + noise * rng.gen_range(-1.0..1.0)).max(0.0)
        })
        .collect();
    Profile::new(x, y).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wrapped_fringes_lie_in_half_open_interval(s in -50.0f64..50.0) {
        let w = wrap_fringes(s);
        prop_assert!(w > -0.5 && w <= 0.5);
        prop_assert!(((s - w) - (s - w).round()).abs() < 1e-9);
    }

    #[test]
    fn unwrap_recovers_shift_from_a_close_prediction(s in -20.0f64..20.0, err in -0.45f64..0.45) {
        let got = unwrap_shift(wrap_fringes(s), s + err);
        prop_assert!((got - s).abs() < 1e-9);
    }

    #[test]
    fn gauge_rotation_keeps_modulus(seed in 0u64..1000, t in 0.0f64..3.0) {
        let grid = GridSpec::new(32, 24, 0.2, 0.2, Vec2::new(-3.2, -2.4), 1e-2).unwrap();
        let mask = Arc::new(Mask::open(&grid));
        let mut state = init_packet(grid, mask, Vec2::zero(), 0.5, Vec2::new(1.0, 2.0)).unwrap();
        state.time = t;
        let before = state.psi.clone();
        let g = PolynomialGauge::random(seed, 3, Vec2::zero(), 2.0, 1.0, true).unwrap();
        gauge_rotate(&mut state, &g);
        for (a, b) in before.iter().zip(&state.psi) {
            prop_assert!((a.norm() - b.norm()).abs() <= 1e-14 * a.norm().max(1e-300));
        }
    }

    #[test]
    fn plaquettes_are_gauge_invariant(seed in 0u64..1000, dependent in any::<bool>()) {
        let grid = GridSpec::new(20, 18, 0.25, 0.25, Vec2::new(-2.5, -2.25), 0.05).unwrap();
        let mask = Mask::open(&grid);
        let q = -1.0;
        let sol = infinite_solenoid(Vec2::new(0.1, 0.05), 1.3).unwrap();
        let g = PolynomialGauge::random(seed, 3, Vec2::zero(), 2.0, 1.0, dependent).unwrap();
        let base = LinkPhases::build(&sol, &grid, &mask, q, 0.4).unwrap();
        let gauged = LinkPhases::build(&apply_gauge(sol, g, q).unwrap(), &grid, &mask, q, 0.4).unwrap();
        for j in 0..grid.ny - 1 {
            for i in 0..grid.nx - 1 {
                prop_assert!(angle_gap(base.plaquette(i, j), gauged.plaquette(i, j)) < 1e-10);
            }
        }
    }

    #[test]
    fn fringe_spacing_survives_noise(spacing in 0.8f64..2.0, offset in -0.4f64..0.4, seed in 0u64..1000) {
        let report = fringe_extract(&fringes(spacing, offset, 0.02, seed), (-5.0, 5.0)).unwrap();
        prop_assert!((report.fringe_spacing / spacing - 1.0).abs() < 0.01, "{}", report.fringe_spacing);
        prop_assert!((report.central_max_position - offset).abs() < 0.05 * spacing);
    }

    #[test]
    fn profile_comparison_estimates_shift(shift in -0.5f64..0.5) {
        let a = fringes(1.5, 0.0, 0.0, 0);
        let x = a.x.clone();
        let b = Profile::new(
            x.clone(),
            x.iter().map(|&u| (PI * (u - shift) / 1.5).cos().powi(2) * (-((u - shift).powi(2)) / 50.0).exp()).collect(),
        ).unwrap();
        let c = compare_profiles(&a, &b).unwrap();
        // 3-point refinement of the correlation peak: a quarter sample.
        prop_assert!((c.shift_estimate - shift).abs() < 0.005, "{}", c.shift_estimate);
    }
}

#[test]
fn norm_is_preserved_by_random_propagations() {
    use abwave::wavesolver::Propagator;
    use abwave::Particle;
    let grid = GridSpec::new(40, 36, 0.15, 0.15, Vec2::new(-3.0, -2.7), 0.02).unwrap();
    let mask = Arc::new(Mask::open(&grid));
    for seed in 0..8u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let flux: f64 = rng.gen_range(-3.0..3.0);
        let k = Vec2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let field = infinite_solenoid(Vec2::new(0.07, -0.03), flux).unwrap();
        let mut state = init_packet(grid, mask.clone(), Vec2::zero(), 0.6, k).unwrap();
        let mut prop = Propagator::new(
            grid,
            mask.clone(),
            Particle::new(1.0, -1.0),
            Arc::new(field),
            0.0,
        )
        .unwrap();
        for _ in 0..100 {
            prop.step(&mut state).unwrap();
        }
        assert!((state.norm_sqr() - 1.0).abs() < 1e-12, "seed {seed}");
    }
}
