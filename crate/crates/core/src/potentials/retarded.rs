use std::f64::consts::PI;

use serde::Serialize;

use super::{FieldError, PotentialField, Potentials};
use crate::geom::{Event, Vec2};
use crate::quadrature::bisect;
use crate::Real;

/// Residual target for the retarded-time bisection.
pub const RETARDED_TOLERANCE: f64 = 1e-12;

/// Sampled trajectory of a point charge, linearly interpolated between samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Worldline<T> {
    samples: Vec<Event<T>>,
    charge: T,
}

impl<T: Real> Worldline<T> {
    pub fn new(samples: Vec<Event<T>>, charge: T) -> Result<Self, FieldError> {
        if samples.len() < 2 {
            return Err(FieldError::InvalidWorldline(
                "need at least two samples".into(),
            ));
        }
        if !charge.is_finite() {
            return Err(FieldError::NonFinite("worldline charge".into()));
        }
        for (k, e) in samples.iter().enumerate() {
            if ![e.t, e.x, e.y, e.z].iter().all(|v| v.is_finite()) {
                return Err(FieldError::InvalidWorldline(format!(
                    "sample {k} is not finite"
                )));
            }
        }
        for (k, w) in samples.windows(2).enumerate() {
            let dt = w[1].t - w[0].t;
            if !(dt > T::zero()) {
                return Err(FieldError::InvalidWorldline(format!(
                    "time not strictly increasing at sample {}",
                    k + 1
                )));
            }
            if !(w[1].spatial_distance(&w[0]) < dt) {
                return Err(FieldError::InvalidWorldline(format!(
                    "speed >= 1 between samples {k} and {}",
                    k + 1
                )));
            }
        }
        Ok(Self { samples, charge })
    }

    /// Charge at rest at `(x, y, z)` over `[t0, t1]`.
    pub fn stationary(charge: T, x: T, y: T, z: T, t0: T, t1: T) -> Result<Self, FieldError> {
        Self::new(
            vec![Event::new(t0, x, y, z), Event::new(t1, x, y, z)],
            charge,
        )
    }

    /// Uniform motion `r(t) = r0 + v·t` sampled at `n + 1` equally spaced times.
    pub fn uniform(
        charge: T,
        r0: [T; 3],
        v: [T; 3],
        t0: T,
        t1: T,
        n: usize,
    ) -> Result<Self, FieldError> {
        let n = n.max(1);
        let samples = (0..=n)
            .map(|k| {
                let t = t0 + (t1 - t0) * T::from_usize_lossy(k) / T::from_usize_lossy(n);
                Event::new(t, r0[0] + v[0] * t, r0[1] + v[1] * t, r0[2] + v[2] * t)
            })
            .collect();
        Self::new(samples, charge)
    }

    pub fn samples(&self) -> &[Event<T>] {
        &self.samples
    }

    pub fn charge(&self) -> T {
        self.charge
    }

    pub fn coverage(&self) -> (T, T) {
        (self.samples[0].t, self.samples[self.samples.len() - 1].t)
    }

    /// Index `k` of the segment `[k, k+1]` containing `tau` (clamped to the ends).
    fn segment(&self, tau: T) -> usize {
        let idx = self.samples.partition_point(|e| e.t <= tau);
        idx.saturating_sub(1).min(self.samples.len() - 2)
    }

    fn velocity(&self, k: usize) -> [T; 3] {
        let (a, b) = (&self.samples[k], &self.samples[k + 1]);
        let dt = b.t - a.t;
        [(b.x - a.x) / dt, (b.y - a.y) / dt, (b.z - a.z) / dt]
    }

    /// Position at `tau` on the segment `k`.
    fn position_on(&self, k: usize, tau: T) -> [T; 3] {
        let (a, b) = (&self.samples[k], &self.samples[k + 1]);
        let s = (tau - a.t) / (b.t - a.t);
        [
            a.x + (b.x - a.x) * s,
            a.y + (b.y - a.y) * s,
            a.z + (b.z - a.z) * s,
        ]
    }

    pub fn position(&self, tau: T) -> [T; 3] {
        self.position_on(self.segment(tau), tau)
    }

    fn is_stationary(&self) -> bool {
        let s0 = &self.samples[0];
        self.samples
            .iter()
            .all(|e| e.x == s0.x && e.y == s0.y && e.z == s0.z)
    }

    /// `t − τ − |x − r(τ)|`: positive before the retarded time, negative after.
    fn light_cone_residual(&self, k: usize, tau: T, at: &Event<T>) -> T {
        let r = self.position_on(k, tau);
        let d = [at.x - r[0], at.y - r[1], at.z - r[2]];
        at.t - tau - (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }
}

/// Retarded time of `at` on `worldline`, with the index of its segment.
pub fn retarded_time<T: Real>(
    worldline: &Worldline<T>,
    at: &Event<T>,
) -> Result<(T, usize), FieldError> {
    let samples = &worldline.samples;
    let last = samples.len() - 1;
    let f = |e: &Event<T>| at.t - e.t - at.spatial_distance(e);
    let insufficient = || {
        let (t_first, t_last) = worldline.coverage();
        FieldError::InsufficientHistory {
            t_field: at.t.to_f64_lossy(),
            t_first: t_first.to_f64_lossy(),
            t_last: t_last.to_f64_lossy(),
        }
    };
    // The residual decreases strictly along a subluminal worldline.
    if f(&samples[0]) < T::zero() || f(&samples[last]) > T::zero() {
        return Err(insufficient());
    }
    let k = samples.partition_point(|e| f(e) > T::zero());
    let k = k.saturating_sub(1).min(last - 1);
    let tol = T::lit(RETARDED_TOLERANCE);
    let tau = bisect(
        |tau| worldline.light_cone_residual(k, tau, at),
        samples[k].t,
        samples[k + 1].t,
        tol,
    );
    Ok((tau, k))
}

/// Φ and the three components of A at one event.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FourPotential<T> {
    pub phi: T,
    pub a: [T; 3],
}

impl<T: Real> FourPotential<T> {
    pub fn components(&self) -> [T; 4] {
        [self.phi, self.a[0], self.a[1], self.a[2]]
    }
}

fn lienard_wiechert<T: Real>(
    w: &Worldline<T>,
    at: &Event<T>,
) -> Result<FourPotential<T>, FieldError> {
    let (tau, k) = retarded_time(w, at)?;
    let r = w.position_on(k, tau);
    let v = w.velocity(k);
    let d = [at.x - r[0], at.y - r[1], at.z - r[2]];
    let dist = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let kappa_r = dist - (d[0] * v[0] + d[1] * v[1] + d[2] * v[2]);
    if !(kappa_r > T::zero()) {
        return Err(FieldError::SingularPoint {
            x: at.x.to_f64_lossy(),
            y: at.y.to_f64_lossy(),
        });
    }
    let s = w.charge / (T::lit(4.0 * PI) * kappa_r);
    Ok(FourPotential {
        phi: s,
        a: [s * v[0], s * v[1], s * v[2]],
    })
}

/// Liénard–Wiechert potentials `q V^μ / (4π κR)` summed over `sources`.
pub fn retarded_potential<T: Real>(
    sources: &[Worldline<T>],
    at: &Event<T>,
) -> Result<FourPotential<T>, FieldError> {
    let mut acc = FourPotential::default();
    for w in sources {
        let p = lienard_wiechert(w, at)?;
        acc.phi += p.phi;
        for i in 0..3 {
            acc.a[i] += p.a[i];
        }
    }
    Ok(acc)
}

/// `k^μ(x) = k0^μ + α·A^μ(x)` with A^μ the retarded potential of `sources`.
///
/// `alpha` is a free coupling; nothing fixes its value.
pub fn coupled_wavevector<T: Real>(
    k0: [T; 4],
    alpha: T,
    sources: &[Worldline<T>],
    at: &Event<T>,
) -> Result<[T; 4], FieldError> {
    let a = retarded_potential(sources, at)?.components();
    Ok([
        k0[0] + alpha * a[0],
        k0[1] + alpha * a[1],
        k0[2] + alpha * a[2],
        k0[3] + alpha * a[3],
    ])
}

/// Retarded potentials of a set of worldlines sampled in the z = 0 plane.
#[derive(Debug, Clone)]
pub struct WorldlineField<T> {
    sources: Vec<Worldline<T>>,
}

impl<T: Real> WorldlineField<T> {
    pub fn new(sources: Vec<Worldline<T>>) -> Self {
        Self { sources }
    }

    pub fn sources(&self) -> &[Worldline<T>] {
        &self.sources
    }
}

impl<T: Real> PotentialField<T> for WorldlineField<T> {
    fn potentials(&self, p: Vec2<T>, t: T) -> Result<Potentials<T>, FieldError> {
        let fp = retarded_potential(&self.sources, &Event::new(t, p.x, p.y, T::zero()))?;
        Ok(Potentials {
            phi: fp.phi,
            a: Vec2::new(fp.a[0], fp.a[1]),
        })
    }

    fn is_static(&self) -> bool {
        self.sources.iter().all(|w| w.is_stationary())
    }
}
