use std::sync::Arc;

use abwave::eikonal::{
    ab_phase_difference, covariant_eikonal_phase, eikonal_phase, hj_residual, RayPath, RayPath4,
};
use abwave::geom::{Event, Rect, Vec2};
use abwave::potentials::{
    apply_gauge, infinite_solenoid, uniform_channel, AnalyticField, GaugeFunction, PolynomialGauge,
};
use abwave::wavesolver::{GridSpec, Mask, WaveField};
use abwave::Particle;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn electron() -> Particle<f64> {
    Particle::new(1.0, -1.0)
}

#[test]
fn twenty_gauges_shift_open_paths_by_the_endpoint_difference() {
    let field = infinite_solenoid(Vec2::new(0.0, 0.0), 0.9).unwrap();
    let path = RayPath::new(vec![
        Vec2::new(-4.0, -1.0),
        Vec2::new(-1.0, -3.0),
        Vec2::new(5.0, 2.5),
    ])
    .unwrap();
    let (e, p) = (3.0, electron());
    let s0 = eikonal_phase(&path, &field, e, p).unwrap().s_total;
    for seed in 100..120 {
        let g = PolynomialGauge::random(seed, 3, Vec2::new(0.5, 0.5), 4.0, 1.0, false).unwrap();
        let dg = g.value(path.end(), 0.0) - g.value(path.start(), 0.0);
        let s = eikonal_phase(&path, &apply_gauge(field, g, p.charge).unwrap(), e, p)
            .unwrap()
            .s_total;
        assert!((s - s0 + dg).abs() < 1e-9, "seed {seed}: {}", s - s0 + dg);
    }
}

/// Random 3-segment path from `a` to `b` through the half plane y > 0 or y < 0.
fn random_arm(rng: &mut ChaCha8Rng, a: Vec2<f64>, b: Vec2<f64>, above: bool) -> RayPath<f64> {
    let sign = if above { 1.0 } else { -1.0 };
    let v1 = Vec2::new(rng.gen_range(-3.0..-0.5), sign * rng.gen_range(1.0..4.0));
    let v2 = Vec2::new(rng.gen_range(0.5..3.0), sign * rng.gen_range(1.0..4.0));
    RayPath::new(vec![a, v1, v2, b]).unwrap()
}

#[test]
fn fifty_ab_pairs_pick_up_minus_q_flux_per_winding() {
    let flux = 2.3;
    let field = infinite_solenoid(Vec2::zero(), flux).unwrap();
    let p = electron();
    let e = 2.0;
    let k = (2.0 * p.mass * e).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for n in 0..50 {
        let a = Vec2::new(-5.0, rng.gen_range(-0.5..0.5));
        let b = Vec2::new(5.0, rng.gen_range(-0.5..0.5));
        let around = n % 2 == 0;
        let lower = random_arm(&mut rng, a, b, false);
        let other = random_arm(&mut rng, a, b, around);
        let ds = ab_phase_difference(&lower, &other, &field, e, p).unwrap();
        let kinetic = k * (lower.length() - other.length());
        // lower − upper is a counter-clockwise loop: ∮A·dl = flux.
        let expected = if around { -p.charge * flux } else { 0.0 };
        assert!(
            (ds - kinetic - expected).abs() < 1e-9,
            "pair {n}: {}",
            ds - kinetic - expected
        );
    }
}

fn covariant_error(v: f64) -> f64 {
    let p = electron();
    let field = AnalyticField::new(|_p: Vec2<f64>, _t| 0.0, |_p, _t| Vec2::new(0.0, 0.3));
    // A is transverse to the path so only the m dτ expansion differs.
    let (length, n) = (5.0, 4);
    let duration = length / v;
    let events = (0..=n)
        .map(|k| {
            let s = k as f64 / n as f64;
            Event::new(duration * s, length * s, 0.0, 0.0)
        })
        .collect();
    let cov = covariant_eikonal_phase(&RayPath4::new(events).unwrap(), &field, p)
        .unwrap()
        .s_total;
    let e = 0.5 * p.mass * v * v;
    let path = RayPath::new(vec![Vec2::zero(), Vec2::new(length, 0.0)]).unwrap();
    let nr = eikonal_phase(&path, &field, e, p).unwrap().s_total - e * duration;
    ((cov + p.mass * duration) - nr).abs() / nr.abs()
}

#[test]
fn covariant_phase_approaches_the_nonrelativistic_one_as_v_squared() {
    let (e1, e2) = (covariant_error(0.01), covariant_error(0.02));
    assert!(e1 < 1e-4 && e2 < 4e-4, "{e1} {e2}");
    let order = (e2 / e1).log2();
    assert!((order - 2.0).abs() < 0.1, "{order}");
}

#[test]
fn lattice_plane_wave_has_zero_hj_residual_in_a_uniform_potential() {
    let grid = GridSpec::new(40, 32, 0.1, 0.1, Vec2::new(-2.0, -1.6), 1e-3).unwrap();
    let mask = Arc::new(Mask::open(&grid));
    let a = Vec2::new(0.7, -0.3);
    let field = uniform_channel(Rect::new(Vec2::new(-5.0, -5.0), Vec2::new(5.0, 5.0)), a).unwrap();
    let p = electron();
    let kin = Vec2::new(2.0, 1.0);
    // Canonical phase gradient k − qA gives kinetic momentum k.
    let canon = kin - a * p.charge;
    let mut state = WaveField::zeros(grid, mask, 0.0);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let r = grid.node(i, j);
            state.psi[grid.index(i, j)] = Complex::from_polar(0.1, canon.dot(r));
        }
    }
    let e = kin.norm_sqr() / (2.0 * p.mass);
    let res = hj_residual(&state, &field, e, p).unwrap();
    assert!(res.max_abs_r1() < 1e-9, "{}", res.max_abs_r1());
    assert!(res.max_abs_r2() < 1e-9, "{}", res.max_abs_r2());
    assert!(res.evaluated.iter().filter(|&&e| e).count() > 1000);
}
