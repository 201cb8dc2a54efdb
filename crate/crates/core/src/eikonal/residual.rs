//! Hamilton–Jacobi and continuity residuals of a sampled wave function.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use num_complex::Complex;
use serde::Serialize;

use super::EikonalError;
use crate::potentials::{edge_line_integral, PotentialField};
use crate::wavesolver::WaveField;
use crate::{Particle, Real};

/// Nodes with `|ψ|` at or below this are excluded.
pub const UNWRAP_THRESHOLD: f64 = 1e-8;

/// Per-node residuals; entries are NaN where `evaluated` is false.
#[derive(Debug, Clone, Serialize)]
pub struct HjResidual<T> {
    pub nx: usize,
    pub ny: usize,
    /// `(∇S + qA)² − 2mqΦ − 2mE − ∇²a/a`.
    pub r1: Vec<T>,
    /// `∇·[a²(∇S + qA)]`.
    pub r2: Vec<T>,
    /// `∇²a/a`.
    pub quantum: Vec<T>,
    /// Unwrapped phase S (NaN below threshold).
    pub phase: Vec<T>,
    pub evaluated: Vec<bool>,
    /// Open nodes that were not evaluated.
    pub excluded: usize,
}

impl<T: Real> HjResidual<T> {
    fn max_abs(v: &[T], keep: impl Fn(usize) -> bool) -> T {
        v.iter()
            .enumerate()
            .filter(|&(idx, x)| keep(idx) && x.is_finite())
            .map(|(_, x)| x.abs())
            .fold(T::zero(), T::max)
    }

    pub fn max_abs_r1(&self) -> T {
        Self::max_abs(&self.r1, |_| true)
    }

    pub fn max_abs_r2(&self) -> T {
        Self::max_abs(&self.r2, |_| true)
    }

    /// Largest `|∇²a/a|` over evaluated nodes selected by `keep(i, j)`.
    pub fn max_quantum_where(&self, keep: impl Fn(usize, usize) -> bool) -> T {
        Self::max_abs(&self.quantum, |idx| keep(idx % self.nx, idx / self.nx))
    }
}

/// Quality-guided unwrap: grows from the largest-amplitude node, always
/// extending to the strongest unvisited neighbor.
fn unwrap_phase<T: Real>(
    psi: &[Complex<T>],
    usable: &[bool],
    nx: usize,
    ny: usize,
) -> Vec<Option<T>> {
    let n = nx * ny;
    let amp: Vec<f64> = psi.iter().map(|z| z.norm().to_f64_lossy()).collect();
    let mut order: Vec<usize> = (0..n).filter(|&k| usable[k]).collect();
    order.sort_by(|&a, &b| amp[b].total_cmp(&amp[a]).then(a.cmp(&b)));
    let mut s: Vec<Option<T>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    let two_pi = T::TAU();
    let wrap = |d: T| d - two_pi * (d / two_pi).round();
    for &seed in &order {
        if s[seed].is_some() {
            continue;
        }
        s[seed] = Some(psi[seed].arg());
        heap.push((amp[seed].to_bits(), Reverse(seed), seed));
        while let Some((_, Reverse(idx), parent)) = heap.pop() {
            if idx != parent {
                if s[idx].is_some() {
                    continue;
                }
                let base = s[parent].expect("parent is unwrapped");
                s[idx] = Some(base + wrap(psi[idx].arg() - psi[parent].arg()));
            }
            let (i, j) = (idx % nx, idx / nx);
            let mut push = |nb: usize| {
                if usable[nb] && s[nb].is_none() {
                    heap.push((amp[nb].to_bits(), Reverse(nb), idx));
                }
            };
            if i > 0 {
                push(idx - 1);
            }
            if i + 1 < nx {
                push(idx + 1);
            }
            if j > 0 {
                push(idx - nx);
            }
            if j + 1 < ny {
                push(idx + nx);
            }
        }
    }
    s
}

/// Residuals of the amplitude/phase equations for `state` at energy `E`.
///
/// Phase gradients use centered differences of the unwrapped phase plus the
/// averaged link phases, so they are gauge covariant and exact for plane
/// waves. The continuity residual uses the lattice edge fluxes
/// `a_i a_j sin(S_j − S_i + θ)/h`, which vanish in divergence for lattice
/// eigenstates.
pub fn hj_residual<T: Real, F: PotentialField<T> + ?Sized>(
    state: &WaveField<T>,
    field: &F,
    energy: T,
    particle: Particle<T>,
) -> Result<HjResidual<T>, EikonalError> {
    let g = state.grid;
    let (nx, ny, t) = (g.nx, g.ny, state.time);
    let n = nx * ny;
    let q = particle.charge;
    let two_m = particle.mass + particle.mass;
    let thr = T::lit(UNWRAP_THRESHOLD);
    let amp: Vec<T> = state.psi.iter().map(|z| z.norm()).collect();
    let usable: Vec<bool> = (0..n)
        .map(|k| !state.mask.is_wall(k) && amp[k] > thr)
        .collect();
    let s = unwrap_phase(&state.psi, &usable, nx, ny);

    let theta = |i: usize, j: usize, di: usize, dj: usize| -> Result<T, EikonalError> {
        Ok(q * edge_line_integral(field, g.node(i, j), g.node(i + di, j + dj), t)?)
    };
    // Staggered flux a_a a_b sin(S_b − S_a + θ)/h from node a to its +x or +y neighbor.
    let flux = |a: usize, b: usize, th: T, h: T| -> T {
        let z = state.psi[a].conj() * state.psi[b] * Complex::from_polar(T::one(), th);
        z.im / h
    };

    let nan = T::nan();
    let mut r1 = vec![nan; n];
    let mut r2 = vec![nan; n];
    let mut quantum = vec![nan; n];
    let mut evaluated = vec![false; n];
    for j in 1..ny.saturating_sub(1) {
        for i in 1..nx - 1 {
            let idx = g.index(i, j);
            let nbrs = [idx - 1, idx + 1, idx - nx, idx + nx];
            if !usable[idx] || nbrs.iter().any(|&k| !usable[k]) {
                continue;
            }
            let sv = |k: usize| s[k].expect("usable nodes are unwrapped");
            let (tw, te) = (theta(i - 1, j, 1, 0)?, theta(i, j, 1, 0)?);
            let (ts, tn) = (theta(i, j - 1, 0, 1)?, theta(i, j, 0, 1)?);
            let gx = (sv(idx + 1) - sv(idx - 1) + tw + te) / (g.dx + g.dx);
            let gy = (sv(idx + nx) - sv(idx - nx) + ts + tn) / (g.dy + g.dy);
            let a = amp[idx];
            let lap = (amp[idx + 1] + amp[idx - 1] - a - a) / (g.dx * g.dx)
                + (amp[idx + nx] + amp[idx - nx] - a - a) / (g.dy * g.dy);
            let qt = lap / a;
            let phi = field.potentials(g.node(i, j), t)?.phi;
            r1[idx] = gx * gx + gy * gy - two_m * q * phi - two_m * energy - qt;
            let div = (flux(idx, idx + 1, te, g.dx) - flux(idx - 1, idx, tw, g.dx)) / g.dx
                + (flux(idx, idx + nx, tn, g.dy) - flux(idx - nx, idx, ts, g.dy)) / g.dy;
            r2[idx] = div;
            quantum[idx] = qt;
            evaluated[idx] = true;
        }
    }
    let open = (0..n).filter(|&k| !state.mask.is_wall(k)).count();
    let excluded = open - evaluated.iter().filter(|&&e| e).count();
    let phase = s.into_iter().map(|v| v.unwrap_or(nan)).collect();
    Ok(HjResidual {
        nx,
        ny,
        r1,
        r2,
        quantum,
        phase,
        evaluated,
        excluded,
    })
}

/// Running projection `Σ ψ(t_n) e^{iEt_n} w_n` onto energy `E`.
#[derive(Debug, Clone)]
pub struct EnergyFilter<T: Real> {
    energy: T,
    acc: Vec<Complex<T>>,
    weight: T,
}

impl<T: Real> EnergyFilter<T> {
    pub fn new(energy: T, len: usize) -> Self {
        Self {
            energy,
            acc: vec![Complex::new(T::zero(), T::zero()); len],
            weight: T::zero(),
        }
    }

    pub fn accumulate(&mut self, state: &WaveField<T>, w: T) {
        let phase = Complex::from_polar(w, self.energy * state.time);
        for (a, z) in self.acc.iter_mut().zip(&state.psi) {
            *a += *z * phase;
        }
        self.weight += w;
    }

    /// The filtered field, normalized to unit probability, on `template`'s grid.
    pub fn finish(&self, template: &WaveField<T>) -> WaveField<T> {
        let mut out = WaveField::zeros(template.grid, template.mask.clone(), template.time);
        out.psi.clone_from(&self.acc);
        let norm = out.norm_sqr();
        if norm > T::zero() {
            let s = T::one() / norm.sqrt();
            for z in &mut out.psi {
                *z *= s;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geom::{Rect, Vec2};
    use crate::potentials::{apply_gauge, uniform_channel, PolynomialGauge, ZeroField};
    use crate::wavesolver::{gauge_rotate, GridSpec, Mask};

    fn plane(g: GridSpec<f64>, k: Vec2<f64>) -> WaveField<f64> {
        let mut s = WaveField::zeros(g, Arc::new(Mask::open(&g)), 0.0);
        for j in 0..g.ny {
            for i in 0..g.nx {
                s.psi[g.index(i, j)] = Complex::from_polar(1.0, k.dot(g.node(i, j)));
            }
        }
        s
    }

    #[test]
    fn plane_wave_residuals_vanish() {
        let g = GridSpec::<f64>::new(40, 30, 0.1, 0.1, Vec2::new(-2.0, -1.5), 0.01).unwrap();
        let k = Vec2::new(3.0, -1.5);
        let r = hj_residual(
            &plane(g, k),
            &ZeroField,
            0.5 * k.norm_sqr(),
            Particle::new(1.0, -1.0),
        )
        .unwrap();
        assert!(r.max_abs_r1() < 1e-8, "r1 {}", r.max_abs_r1());
        assert!(r.max_abs_r2() < 1e-8, "r2 {}", r.max_abs_r2());
        assert_eq!(r.excluded, 2 * 40 + 2 * 28);
    }

    #[test]
    fn unwrapped_phase_is_continuous() {
        let g = GridSpec::<f64>::new(64, 16, 0.1, 0.1, Vec2::zero(), 0.01).unwrap();
        let r = hj_residual(
            &plane(g, Vec2::new(5.0, 0.0)),
            &ZeroField,
            12.5,
            Particle::electron(),
        )
        .unwrap();
        let row = &r.phase[g.index(0, 8)..g.index(0, 9)];
        for w in row.windows(2) {
            assert!((w[1] - w[0] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn residuals_are_gauge_invariant() {
        let g = GridSpec::<f64>::new(48, 40, 0.1, 0.1, Vec2::new(-2.4, -2.0), 0.01).unwrap();
        let ch = uniform_channel(
            Rect::new(Vec2::new(-1.0, -3.0), Vec2::new(1.0, 3.0)),
            Vec2::new(0.7, 0.0),
        )
        .unwrap();
        let mut s = plane(g, Vec2::new(2.0, 1.0));
        for (k, z) in s.psi.iter_mut().enumerate() {
            let p = g.node(k % g.nx, k / g.nx);
            *z *= (-(p.norm_sqr()) / 8.0).exp();
        }
        let pt = Particle::new(1.0, -1.0);
        let base = hj_residual(&s, &ch, 2.0, pt).unwrap();
        let gauge = PolynomialGauge::<f64>::random(3, 2, Vec2::zero(), 2.0, 1.0, false).unwrap();
        let mut s2 = s.clone();
        gauge_rotate(&mut s2, &gauge);
        let gauged = apply_gauge(ch, gauge, pt.charge).unwrap();
        let other = hj_residual(&s2, &gauged, 2.0, pt).unwrap();
        for k in 0..g.len() {
            if base.evaluated[k] {
                assert!((base.r1[k] - other.r1[k]).abs() < 1e-9);
                assert!((base.r2[k] - other.r2[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn weak_nodes_are_excluded() {
        let g = GridSpec::<f64>::new(20, 20, 0.1, 0.1, Vec2::zero(), 0.01).unwrap();
        let mut s = plane(g, Vec2::new(1.0, 0.0));
        s.psi[g.index(10, 10)] = Complex::new(0.0, 0.0);
        let r = hj_residual(&s, &ZeroField, 0.5, Particle::electron()).unwrap();
        for idx in [
            g.index(10, 10),
            g.index(9, 10),
            g.index(11, 10),
            g.index(10, 9),
            g.index(10, 11),
        ] {
            assert!(!r.evaluated[idx]);
        }
        assert!(r.evaluated[g.index(8, 10)]);
    }
}
