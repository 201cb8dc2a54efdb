use std::f64::consts::PI;

use super::{FieldError, PotentialField, Potentials};
use crate::geom::{Rect, Vec2};
use crate::Real;

/// Φ = 0, A = 0 everywhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroField;

impl<T: Real> PotentialField<T> for ZeroField {
    fn potentials(&self, _p: Vec2<T>, _t: T) -> Result<Potentials<T>, FieldError> {
        Ok(Potentials::zero())
    }

    fn line_integral(&self, _p0: Vec2<T>, _p1: Vec2<T>, _t: T) -> Result<T, FieldError> {
        Ok(T::zero())
    }

    fn scalar_time_integral(&self, _p: Vec2<T>, _t0: T, _t1: T) -> Result<T, FieldError> {
        Ok(T::zero())
    }

    fn has_line_closure(&self) -> bool {
        true
    }
}

/// Uniform vector potential `a0` inside an axis-aligned rectangle, zero
/// outside, Φ = 0: the bore of an idealized elongated toroidal solenoid.
///
/// The field B is a pair of sheets on the rectangle's boundary; callers keep
/// the propagating wave off those sheets with walls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformChannel<T> {
    pub region: Rect<T>,
    pub a0: Vec2<T>,
}

pub fn uniform_channel<T: Real>(
    region: Rect<T>,
    a0: Vec2<T>,
) -> Result<UniformChannel<T>, FieldError> {
    if !(region.min.is_finite() && region.max.is_finite()) {
        return Err(FieldError::NonFinite("channel region".into()));
    }
    if !a0.is_finite() {
        return Err(FieldError::NonFinite("channel vector potential".into()));
    }
    if !(region.width() > T::zero() && region.height() > T::zero()) {
        return Err(FieldError::DegenerateRegion(format!(
            "channel region {:?}..{:?} has zero area",
            region.min, region.max
        )));
    }
    Ok(UniformChannel { region, a0 })
}

impl<T: Real> PotentialField<T> for UniformChannel<T> {
    fn potentials(&self, p: Vec2<T>, _t: T) -> Result<Potentials<T>, FieldError> {
        let a = if self.region.contains(p) {
            self.a0
        } else {
            Vec2::zero()
        };
        Ok(Potentials { phi: T::zero(), a })
    }

    fn line_integral(&self, p0: Vec2<T>, p1: Vec2<T>, _t: T) -> Result<T, FieldError> {
        Ok(match self.region.clip_segment(p0, p1) {
            Some((s0, s1)) => self.a0.dot(p1 - p0) * (s1 - s0),
            None => T::zero(),
        })
    }

    fn scalar_time_integral(&self, _p: Vec2<T>, _t0: T, _t1: T) -> Result<T, FieldError> {
        Ok(T::zero())
    }

    fn has_line_closure(&self) -> bool {
        true
    }
}

/// Infinitely thin shielded solenoid: A = flux/(2πr) φ̂ outside, B = 0 except
/// at the center, ∮A·dl = flux around it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfiniteSolenoid<T> {
    pub center: Vec2<T>,
    pub flux: T,
}

pub fn infinite_solenoid<T: Real>(
    center: Vec2<T>,
    flux: T,
) -> Result<InfiniteSolenoid<T>, FieldError> {
    if !flux.is_finite() {
        return Err(FieldError::NonFinite("solenoid flux".into()));
    }
    if !center.is_finite() {
        return Err(FieldError::NonFinite("solenoid center".into()));
    }
    Ok(InfiniteSolenoid { center, flux })
}

impl<T: Real> InfiniteSolenoid<T> {
    fn singular(&self, p: Vec2<T>) -> FieldError {
        FieldError::SingularPoint {
            x: p.x.to_f64_lossy(),
            y: p.y.to_f64_lossy(),
        }
    }
}

impl<T: Real> PotentialField<T> for InfiniteSolenoid<T> {
    fn potentials(&self, p: Vec2<T>, _t: T) -> Result<Potentials<T>, FieldError> {
        let d = p - self.center;
        let r2 = d.norm_sqr();
        if r2 == T::zero() {
            return Err(self.singular(p));
        }
        let s = self.flux / (T::lit(2.0 * PI) * r2);
        let a = Vec2::new(-d.y * s, d.x * s);
        if !a.is_finite() {
            return Err(self.singular(p));
        }
        Ok(Potentials { phi: T::zero(), a })
    }

    fn check_segment(&self, p0: Vec2<T>, p1: Vec2<T>) -> Result<(), FieldError> {
        let u = p0 - self.center;
        let v = p1 - self.center;
        if u.cross(v) == T::zero() && u.dot(v) <= T::zero() {
            return Err(FieldError::SingularSegment {
                x0: p0.x.to_f64_lossy(),
                y0: p0.y.to_f64_lossy(),
                x1: p1.x.to_f64_lossy(),
                y1: p1.y.to_f64_lossy(),
            });
        }
        Ok(())
    }

    /// `(flux/2π)·Δφ`, the signed angle the segment subtends at the center.
    fn line_integral(&self, p0: Vec2<T>, p1: Vec2<T>, _t: T) -> Result<T, FieldError> {
        self.check_segment(p0, p1)?;
        let u = p0 - self.center;
        let v = p1 - self.center;
        let dphi = u.cross(v).atan2(u.dot(v));
        Ok(self.flux * dphi / T::lit(2.0 * PI))
    }

    fn scalar_time_integral(&self, _p: Vec2<T>, _t0: T, _t1: T) -> Result<T, FieldError> {
        Ok(T::zero())
    }

    fn has_line_closure(&self) -> bool {
        true
    }
}

type ScalarFn<T> = Box<dyn Fn(Vec2<T>, T) -> T + Send + Sync>;
type VectorFn<T> = Box<dyn Fn(Vec2<T>, T) -> Vec2<T> + Send + Sync>;

/// Potentials given by closures; line integrals use the default quadrature.
pub struct AnalyticField<T> {
    phi: ScalarFn<T>,
    a: VectorFn<T>,
    is_static: bool,
}

impl<T: Real> AnalyticField<T> {
    pub fn new(
        phi: impl Fn(Vec2<T>, T) -> T + Send + Sync + 'static,
        a: impl Fn(Vec2<T>, T) -> Vec2<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            phi: Box::new(phi),
            a: Box::new(a),
            is_static: true,
        }
    }

    /// Marks the field as time dependent so propagators rebuild link phases.
    pub fn time_dependent(mut self) -> Self {
        self.is_static = false;
        self
    }

    /// Constant scalar potential, zero vector potential.
    pub fn uniform_scalar(phi: T) -> Self {
        Self::new(move |_p, _t| phi, |_p, _t| Vec2::zero())
    }
}

impl<T: Real> PotentialField<T> for AnalyticField<T> {
    fn potentials(&self, p: Vec2<T>, t: T) -> Result<Potentials<T>, FieldError> {
        let pot = Potentials {
            phi: (self.phi)(p, t),
            a: (self.a)(p, t),
        };
        if !(pot.phi.is_finite() && pot.a.is_finite()) {
            return Err(FieldError::SingularPoint {
                x: p.x.to_f64_lossy(),
                y: p.y.to_f64_lossy(),
            });
        }
        Ok(pot)
    }

    fn is_static(&self) -> bool {
        self.is_static
    }
}

/// Superposition of several fields.
pub struct Composite<T> {
    parts: Vec<Box<dyn PotentialField<T>>>,
}

impl<T: Real> Composite<T> {
    pub fn new(parts: Vec<Box<dyn PotentialField<T>>>) -> Self {
        Self { parts }
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }
}

impl<T: Real> PotentialField<T> for Composite<T> {
    fn potentials(&self, p: Vec2<T>, t: T) -> Result<Potentials<T>, FieldError> {
        let mut acc = Potentials::zero();
        for part in &self.parts {
            let v = part.potentials(p, t)?;
            acc.phi += v.phi;
            acc.a += v.a;
        }
        Ok(acc)
    }

    fn check_segment(&self, p0: Vec2<T>, p1: Vec2<T>) -> Result<(), FieldError> {
        self.parts.iter().try_for_each(|f| f.check_segment(p0, p1))
    }

    fn line_integral(&self, p0: Vec2<T>, p1: Vec2<T>, t: T) -> Result<T, FieldError> {
        let mut acc = T::zero();
        for part in &self.parts {
            acc += part.line_integral(p0, p1, t)?;
        }
        Ok(acc)
    }

    fn scalar_time_integral(&self, p: Vec2<T>, t0: T, t1: T) -> Result<T, FieldError> {
        let mut acc = T::zero();
        for part in &self.parts {
            acc += part.scalar_time_integral(p, t0, t1)?;
        }
        Ok(acc)
    }

    fn has_line_closure(&self) -> bool {
        self.parts.iter().all(|f| f.has_line_closure())
    }

    fn is_static(&self) -> bool {
        self.parts.iter().all(|f| f.is_static())
    }
}
