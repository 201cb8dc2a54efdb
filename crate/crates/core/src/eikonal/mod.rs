//! Semiclassical phase integrals along straight-segment paths.
//!
//! Non-relativistic phase: `S = ∫ [√(2m(E + qΦ)) − qA·t̂] dl`.
//! Covariant phase: `∫ q(Φ dt − A·dx) − m dτ` (metric +,−,−,−).

mod residual;

use serde::Serialize;
use thiserror::Error;

use crate::geom::{Event, Vec2};
use crate::potentials::{FieldError, PotentialField};
use crate::quadrature::adaptive_simpson;
use crate::{Particle, Real};

pub use residual::{hj_residual, EnergyFilter, HjResidual, UNWRAP_THRESHOLD};

/// Relative tolerance of the segment quadratures.
pub const EIKONAL_REL_TOL: f64 = 1e-10;
/// Subdivision budget of the segment quadratures.
pub const EIKONAL_MAX_SUBDIVISIONS: usize = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EikonalError {
    #[error("classical turning point at ({x}, {y}): 2m(E + qΦ) < 0")]
    TurningPoint { x: f64, y: f64 },
    #[error("below the mass shell at ({x}, {y}): (E + qΦ)² < m²")]
    ForbiddenRegion { x: f64, y: f64 },
    #[error("segment {segment} is spacelike or not future-directed")]
    Spacelike { segment: usize },
    #[error("degenerate path: {0}")]
    DegeneratePath(String),
    #[error("paths do not share endpoints")]
    EndpointMismatch,
    #[error("quadrature did not converge on segment {segment}")]
    NotConverged { segment: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Polyline in the plane; `t̂` is constant on each segment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayPath<T> {
    vertices: Vec<Vec2<T>>,
}

impl<T: Real> RayPath<T> {
    pub fn new(vertices: Vec<Vec2<T>>) -> Result<Self, EikonalError> {
        if vertices.len() < 2 {
            return Err(EikonalError::DegeneratePath(
                "need at least two vertices".into(),
            ));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(EikonalError::DegeneratePath("non-finite vertex".into()));
        }
        if let Some(k) = vertices.windows(2).position(|w| w[0] == w[1]) {
            return Err(EikonalError::DegeneratePath(format!(
                "vertices {k} and {} coincide",
                k + 1
            )));
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Vec2<T>] {
        &self.vertices
    }

    pub fn start(&self) -> Vec2<T> {
        self.vertices[0]
    }

    pub fn end(&self) -> Vec2<T> {
        self.vertices[self.vertices.len() - 1]
    }

    pub fn length(&self) -> T {
        self.vertices.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// Unit tangent of segment `k`.
    pub fn tangent(&self, k: usize) -> Vec2<T> {
        let d = self.vertices[k + 1] - self.vertices[k];
        d * (T::one() / d.norm())
    }

    /// This path followed by `other`, which must start where this one ends.
    pub fn concat(&self, other: &Self) -> Result<Self, EikonalError> {
        if self.end() != other.start() {
            return Err(EikonalError::EndpointMismatch);
        }
        let mut v = self.vertices.clone();
        v.extend_from_slice(&other.vertices[1..]);
        Self::new(v)
    }

    pub fn reversed(&self) -> Self {
        let mut v = self.vertices.clone();
        v.reverse();
        Self { vertices: v }
    }
}

/// Space-time polyline for covariant phases.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayPath4<T> {
    events: Vec<Event<T>>,
}

impl<T: Real> RayPath4<T> {
    pub fn new(events: Vec<Event<T>>) -> Result<Self, EikonalError> {
        if events.len() < 2 {
            return Err(EikonalError::DegeneratePath(
                "need at least two events".into(),
            ));
        }
        Ok(Self { events })
    }

    pub fn events(&self) -> &[Event<T>] {
        &self.events
    }

    /// Total proper time, or an error if any segment is not timelike.
    pub fn proper_time(&self) -> Result<T, EikonalError> {
        let mut tau = T::zero();
        for (k, w) in self.events.windows(2).enumerate() {
            tau +=
                segment_proper_time(&w[0], &w[1]).ok_or(EikonalError::Spacelike { segment: k })?;
        }
        Ok(tau)
    }
}

fn segment_proper_time<T: Real>(a: &Event<T>, b: &Event<T>) -> Option<T> {
    let dt = b.t - a.t;
    let dl = b.spatial_distance(a);
    (dt > T::zero() && dt >= dl).then(|| ((dt - dl) * (dt + dl)).sqrt())
}

/// Phase contribution of one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentPhase<T> {
    pub length: T,
    /// `∫ κ dl` (or `−∫ m dτ` for covariant paths).
    pub kinetic: T,
    /// `−q∫A·dl` (or `q∫(Φ dt − A·dx)` for covariant paths).
    pub potential: T,
    pub total: T,
}

/// Local canonical wavevector `κ t̂ − qA` at a sample point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WavevectorSample<T> {
    pub point: Vec2<T>,
    pub k: Vec2<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EikonalSolution<T> {
    pub s_total: T,
    pub segments: Vec<SegmentPhase<T>>,
    pub wavevectors: Vec<WavevectorSample<T>>,
}

impl<T: Real> EikonalSolution<T> {
    fn from_segments(
        segments: Vec<SegmentPhase<T>>,
        wavevectors: Vec<WavevectorSample<T>>,
    ) -> Self {
        let mut s_total = T::zero();
        for s in &segments {
            s_total += s.total;
        }
        Self {
            s_total,
            segments,
            wavevectors,
        }
    }
}

fn to_xy<T: Real>(p: Vec2<T>) -> (f64, f64) {
    (p.x.to_f64_lossy(), p.y.to_f64_lossy())
}

/// `q∫A·dl` along one segment: closure when available, else adaptive Simpson.
fn vector_term<T: Real, F: PotentialField<T> + ?Sized>(
    field: &F,
    p0: Vec2<T>,
    p1: Vec2<T>,
    t: T,
    segment: usize,
) -> Result<T, EikonalError> {
    if field.has_line_closure() {
        return Ok(field.line_integral(p0, p1, t)?);
    }
    field.check_segment(p0, p1)?;
    let d = p1 - p0;
    let q = adaptive_simpson(
        |s| field.potentials(p0.lerp(p1, s), t).map(|pot| pot.a.dot(d)),
        T::zero(),
        T::one(),
        T::lit(EIKONAL_REL_TOL),
        EIKONAL_MAX_SUBDIVISIONS,
    )?;
    if !q.converged {
        return Err(EikonalError::NotConverged { segment });
    }
    Ok(q.value)
}

/// Shared driver: `kappa(p)` is the local wavenumber (error when forbidden).
fn spatial_phase<T, F, K>(
    path: &RayPath<T>,
    field: &F,
    particle: Particle<T>,
    t: T,
    kappa: K,
) -> Result<EikonalSolution<T>, EikonalError>
where
    T: Real,
    F: PotentialField<T> + ?Sized,
    K: Fn(Vec2<T>) -> Result<T, EikonalError>,
{
    let q = particle.charge;
    let mut segments = Vec::with_capacity(path.vertices.len() - 1);
    let mut wavevectors = Vec::new();
    for (k, w) in path.vertices.windows(2).enumerate() {
        let (p0, p1) = (w[0], w[1]);
        let len = (p1 - p0).norm();
        let quad = adaptive_simpson(
            |s| kappa(p0.lerp(p1, s)),
            T::zero(),
            T::one(),
            T::lit(EIKONAL_REL_TOL),
            EIKONAL_MAX_SUBDIVISIONS,
        )?;
        if !quad.converged {
            return Err(EikonalError::NotConverged { segment: k });
        }
        let kinetic = quad.value * len;
        let potential = -q * vector_term(field, p0, p1, t, k)?;
        segments.push(SegmentPhase {
            length: len,
            kinetic,
            potential,
            total: kinetic + potential,
        });
        let tangent = path.tangent(k);
        for s in [T::zero(), T::lit(0.5), T::one()] {
            let p = p0.lerp(p1, s);
            if let Ok(pot) = field.potentials(p, t) {
                wavevectors.push(WavevectorSample {
                    point: p,
                    k: tangent * kappa(p)? - pot.a * q,
                });
            }
        }
    }
    Ok(EikonalSolution::from_segments(segments, wavevectors))
}

/// Local non-relativistic wavenumber `√(2m(E + qΦ))`.
pub fn local_wavenumber<T: Real, F: PotentialField<T> + ?Sized>(
    field: &F,
    p: Vec2<T>,
    t: T,
    energy: T,
    particle: Particle<T>,
) -> Result<T, EikonalError> {
    let phi = field.potentials(p, t)?.phi;
    let arg = (particle.mass + particle.mass) * (energy + particle.charge * phi);
    if arg < T::zero() {
        let (x, y) = to_xy(p);
        return Err(EikonalError::TurningPoint { x, y });
    }
    Ok(arg.sqrt())
}

/// `S = ∫ [√(2m(E + qΦ)) − qA·t̂] dl` with the fields frozen at `t`.
pub fn eikonal_phase_at<T: Real, F: PotentialField<T> + ?Sized>(
    path: &RayPath<T>,
    field: &F,
    energy: T,
    particle: Particle<T>,
    t: T,
) -> Result<EikonalSolution<T>, EikonalError> {
    spatial_phase(path, field, particle, t, |p| {
        local_wavenumber(field, p, t, energy, particle)
    })
}

/// [`eikonal_phase_at`] at `t = 0`.
pub fn eikonal_phase<T: Real, F: PotentialField<T> + ?Sized>(
    path: &RayPath<T>,
    field: &F,
    energy: T,
    particle: Particle<T>,
) -> Result<EikonalSolution<T>, EikonalError> {
    eikonal_phase_at(path, field, energy, particle, T::zero())
}

/// `S(path1) − S(path2)` for paths with common endpoints.
pub fn ab_phase_difference<T: Real, F: PotentialField<T> + ?Sized>(
    path1: &RayPath<T>,
    path2: &RayPath<T>,
    field: &F,
    energy: T,
    particle: Particle<T>,
) -> Result<T, EikonalError> {
    if path1.start() != path2.start() || path1.end() != path2.end() {
        return Err(EikonalError::EndpointMismatch);
    }
    let s1 = eikonal_phase(path1, field, energy, particle)?;
    let s2 = eikonal_phase(path2, field, energy, particle)?;
    Ok(s1.s_total - s2.s_total)
}

/// Relativistic spatial phase `∫ [√((E + qΦ)² − m²) − qA·t̂] dl` of an
/// energy eigenstate with total energy `E`.
pub fn energy_eigen_eikonal<T: Real, F: PotentialField<T> + ?Sized>(
    path: &RayPath<T>,
    field: &F,
    total_energy: T,
    particle: Particle<T>,
) -> Result<EikonalSolution<T>, EikonalError> {
    let t = T::zero();
    spatial_phase(path, field, particle, t, |p| {
        relativistic_wavenumber(field, p, t, total_energy, particle)
    })
}

/// `√((E + qΦ)² − m²)`.
pub fn relativistic_wavenumber<T: Real, F: PotentialField<T> + ?Sized>(
    field: &F,
    p: Vec2<T>,
    t: T,
    total_energy: T,
    particle: Particle<T>,
) -> Result<T, EikonalError> {
    let phi = field.potentials(p, t)?.phi;
    let e = total_energy + particle.charge * phi;
    let m = particle.mass;
    let arg = (e - m) * (e + m);
    if arg < T::zero() {
        let (x, y) = to_xy(p);
        return Err(EikonalError::ForbiddenRegion { x, y });
    }
    Ok(arg.sqrt())
}

/// Local speed `κ/(E + qΦ)` and kinetic energy `m(γ − 1)` at `p`.
pub fn relativistic_kinematics<T: Real, F: PotentialField<T> + ?Sized>(
    field: &F,
    p: Vec2<T>,
    total_energy: T,
    particle: Particle<T>,
) -> Result<(T, T), EikonalError> {
    let kappa = relativistic_wavenumber(field, p, T::zero(), total_energy, particle)?;
    let e = total_energy + particle.charge * field.potentials(p, T::zero())?.phi;
    let v = kappa / e;
    Ok((v, kinetic_energy(v, particle.mass)))
}

/// `m(1/√(1 − v²) − 1)`.
pub fn kinetic_energy<T: Real>(v: T, m: T) -> T {
    m * (T::one() / (T::one() - v * v).sqrt() - T::one())
}

/// `∫ q(Φ dt − A·dx) − m dτ` along a timelike space-time polyline. The
/// fields are taken in the z = 0 plane; `A_z = 0`.
pub fn covariant_eikonal_phase<T: Real, F: PotentialField<T> + ?Sized>(
    path: &RayPath4<T>,
    field: &F,
    particle: Particle<T>,
) -> Result<EikonalSolution<T>, EikonalError> {
    let q = particle.charge;
    let mut segments = Vec::with_capacity(path.events.len() - 1);
    for (k, w) in path.events.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let dtau = segment_proper_time(&a, &b).ok_or(EikonalError::Spacelike { segment: k })?;
        let (dt, d2) = (b.t - a.t, b.plane_point() - a.plane_point());
        let quad = adaptive_simpson(
            |s| {
                let p = a.plane_point().lerp(b.plane_point(), s);
                let t = a.t + dt * s;
                field
                    .potentials(p, t)
                    .map(|pot| pot.phi * dt - pot.a.dot(d2))
            },
            T::zero(),
            T::one(),
            T::lit(EIKONAL_REL_TOL),
            EIKONAL_MAX_SUBDIVISIONS,
        )?;
        if !quad.converged {
            return Err(EikonalError::NotConverged { segment: k });
        }
        let kinetic = -particle.mass * dtau;
        let potential = q * quad.value;
        segments.push(SegmentPhase {
            length: dtau,
            kinetic,
            potential,
            total: kinetic + potential,
        });
    }
    Ok(EikonalSolution::from_segments(segments, Vec::new()))
}

/// `(qA − ∂G)_μ (qA − ∂G)^μ − m²` for lower-index 4-vectors (metric +,−,−,−).
pub fn covariant_residual<T: Real>(q_a: [T; 4], d_g: [T; 4], m: T) -> T {
    let v: Vec<T> = (0..4).map(|i| q_a[i] - d_g[i]).collect();
    v[0] * v[0] - v[1] * v[1] - v[2] * v[2] - v[3] * v[3] - m * m
}

/// `k^μ(x) = k0^μ − q[A^μ(x) − A^μ(source)]` with `A^μ = (Φ, A_x, A_y, 0)`.
///
/// This pins the potentials to zero at the source point; the result depends
/// on the gauge through `∇G(x) − ∇G(source)`.
pub fn fixed_gauge_wavevector<T: Real, F: PotentialField<T> + ?Sized>(
    field: &F,
    source: Vec2<T>,
    x: Vec2<T>,
    k0: [T; 4],
    charge: T,
    t: T,
) -> Result<[T; 4], EikonalError> {
    let a_x = field.potentials(x, t)?;
    let a_s = field.potentials(source, t)?;
    Ok([
        k0[0] - charge * (a_x.phi - a_s.phi),
        k0[1] - charge * (a_x.a.x - a_s.a.x),
        k0[2] - charge * (a_x.a.y - a_s.a.y),
        k0[3],
    ])
}

/// Wavelength `2π/|k|` of the spatial part of a 4-wavevector.
pub fn spatial_wavelength<T: Real>(k: [T; 4]) -> T {
    let n = (k[1] * k[1] + k[2] * k[2] + k[3] * k[3]).sqrt();
    T::TAU() / n
}
