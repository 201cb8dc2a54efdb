use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{FieldError, PotentialField, Potentials};
use crate::geom::Vec2;
use crate::Real;

/// Scalar gauge function G(x, y, t).
pub trait GaugeFunction<T: Real>: Send + Sync {
    fn value(&self, p: Vec2<T>, t: T) -> T;

    fn gradient(&self, p: Vec2<T>, t: T) -> Vec2<T> {
        fd_gradient(self, p, t, T::lit(1e-4))
    }

    fn time_derivative(&self, p: Vec2<T>, t: T) -> T {
        fd_time_derivative(self, p, t, T::lit(1e-4))
    }

    fn is_time_dependent(&self) -> bool {
        true
    }

    /// Coefficients `[c0, c1, c2]` with `G(p, t) = c0 + c1 t + c2 t²`, when
    /// the gauge has that form; lets propagators cache per-node values.
    fn time_polynomial(&self, _p: Vec2<T>) -> Option<[T; 3]> {
        None
    }
}

impl<T: Real, G: GaugeFunction<T> + ?Sized> GaugeFunction<T> for &G {
    fn value(&self, p: Vec2<T>, t: T) -> T {
        (**self).value(p, t)
    }
    fn gradient(&self, p: Vec2<T>, t: T) -> Vec2<T> {
        (**self).gradient(p, t)
    }
    fn time_derivative(&self, p: Vec2<T>, t: T) -> T {
        (**self).time_derivative(p, t)
    }
    fn is_time_dependent(&self) -> bool {
        (**self).is_time_dependent()
    }
    fn time_polynomial(&self, p: Vec2<T>) -> Option<[T; 3]> {
        (**self).time_polynomial(p)
    }
}

impl<T: Real, G: GaugeFunction<T> + ?Sized> GaugeFunction<T> for Box<G> {
    fn value(&self, p: Vec2<T>, t: T) -> T {
        (**self).value(p, t)
    }
    fn gradient(&self, p: Vec2<T>, t: T) -> Vec2<T> {
        (**self).gradient(p, t)
    }
    fn time_derivative(&self, p: Vec2<T>, t: T) -> T {
        (**self).time_derivative(p, t)
    }
    fn is_time_dependent(&self) -> bool {
        (**self).is_time_dependent()
    }
    fn time_polynomial(&self, p: Vec2<T>) -> Option<[T; 3]> {
        (**self).time_polynomial(p)
    }
}

impl<T: Real, G: GaugeFunction<T> + ?Sized> GaugeFunction<T> for std::sync::Arc<G> {
    fn value(&self, p: Vec2<T>, t: T) -> T {
        (**self).value(p, t)
    }
    fn gradient(&self, p: Vec2<T>, t: T) -> Vec2<T> {
        (**self).gradient(p, t)
    }
    fn time_derivative(&self, p: Vec2<T>, t: T) -> T {
        (**self).time_derivative(p, t)
    }
    fn is_time_dependent(&self) -> bool {
        (**self).is_time_dependent()
    }
    fn time_polynomial(&self, p: Vec2<T>) -> Option<[T; 3]> {
        (**self).time_polynomial(p)
    }
}

/// Central-difference spatial gradient of `g`.
pub fn fd_gradient<T: Real, G: GaugeFunction<T> + ?Sized>(
    g: &G,
    p: Vec2<T>,
    t: T,
    h: T,
) -> Vec2<T> {
    let two_h = h + h;
    let hx = Vec2::new(h, T::zero());
    let hy = Vec2::new(T::zero(), h);
    Vec2::new(
        (g.value(p + hx, t) - g.value(p - hx, t)) / two_h,
        (g.value(p + hy, t) - g.value(p - hy, t)) / two_h,
    )
}

/// Central-difference time derivative of `g`.
pub fn fd_time_derivative<T: Real, G: GaugeFunction<T> + ?Sized>(
    g: &G,
    p: Vec2<T>,
    t: T,
    h: T,
) -> T {
    (g.value(p, t + h) - g.value(p, t - h)) / (h + h)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroGauge;

impl<T: Real> GaugeFunction<T> for ZeroGauge {
    fn value(&self, _p: Vec2<T>, _t: T) -> T {
        T::zero()
    }
    fn time_polynomial(&self, _p: Vec2<T>) -> Option<[T; 3]> {
        Some([T::zero(); 3])
    }
    fn gradient(&self, _p: Vec2<T>, _t: T) -> Vec2<T> {
        Vec2::zero()
    }
    fn time_derivative(&self, _p: Vec2<T>, _t: T) -> T {
        T::zero()
    }
    fn is_time_dependent(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantGauge<T>(pub T);

impl<T: Real> GaugeFunction<T> for ConstantGauge<T> {
    fn value(&self, _p: Vec2<T>, _t: T) -> T {
        self.0
    }
    fn time_polynomial(&self, _p: Vec2<T>) -> Option<[T; 3]> {
        Some([self.0, T::zero(), T::zero()])
    }
    fn gradient(&self, _p: Vec2<T>, _t: T) -> Vec2<T> {
        Vec2::zero()
    }
    fn time_derivative(&self, _p: Vec2<T>, _t: T) -> T {
        T::zero()
    }
    fn is_time_dependent(&self) -> bool {
        false
    }
}

/// G = c + g·r + gt·t.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LinearGauge<T> {
    pub c: T,
    pub g: Vec2<T>,
    pub gt: T,
}

impl<T: Real> LinearGauge<T> {
    pub fn spatial(g: Vec2<T>) -> Self {
        Self {
            c: T::zero(),
            g,
            gt: T::zero(),
        }
    }
}

impl<T: Real> GaugeFunction<T> for LinearGauge<T> {
    fn value(&self, p: Vec2<T>, t: T) -> T {
        self.c + self.g.dot(p) + self.gt * t
    }
    fn time_polynomial(&self, p: Vec2<T>) -> Option<[T; 3]> {
        Some([self.c + self.g.dot(p), self.gt, T::zero()])
    }
    fn gradient(&self, _p: Vec2<T>, _t: T) -> Vec2<T> {
        self.g
    }
    fn time_derivative(&self, _p: Vec2<T>, _t: T) -> T {
        self.gt
    }
    fn is_time_dependent(&self) -> bool {
        self.gt != T::zero()
    }
}

/// One monomial `coef·u^px·v^py·w^pt` of a [`PolynomialGauge`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Monomial<T> {
    pub coef: T,
    pub px: u32,
    pub py: u32,
    pub pt: u32,
}

/// Polynomial in scaled coordinates u = (x − x0)/ℓ, v = (y − y0)/ℓ, w = t/τ.
#[derive(Debug, Clone, Serialize)]
pub struct PolynomialGauge<T> {
    pub origin: Vec2<T>,
    pub length_scale: T,
    pub time_scale: T,
    pub terms: Vec<Monomial<T>>,
}

fn powu<T: Real>(x: T, n: u32) -> T {
    match n {
        0 => T::one(),
        1 => x,
        _ => x.powi(n as i32),
    }
}

/// `d/dx x^n`, with the `n = 0` case returning exactly zero.
fn dpowu<T: Real>(x: T, n: u32) -> T {
    match n {
        0 => T::zero(),
        1 => T::one(),
        _ => T::from_u32(n).unwrap() * x.powi(n as i32 - 1),
    }
}

impl<T: Real> PolynomialGauge<T> {
    pub fn new(
        origin: Vec2<T>,
        length_scale: T,
        time_scale: T,
        terms: Vec<Monomial<T>>,
    ) -> Result<Self, FieldError> {
        if !(length_scale > T::zero() && time_scale > T::zero()) {
            return Err(FieldError::Invalid("gauge scales must be positive".into()));
        }
        if terms.iter().any(|m| !m.coef.is_finite()) || !origin.is_finite() {
            return Err(FieldError::NonFinite("gauge coefficients".into()));
        }
        Ok(Self {
            origin,
            length_scale,
            time_scale,
            terms,
        })
    }

    /// All monomials of total degree `1..=degree` with coefficients uniform in
    /// [−1, 1]. Time powers are included only when `time_dependent` is set.
    pub fn random(
        seed: u64,
        degree: u32,
        origin: Vec2<T>,
        length_scale: T,
        time_scale: T,
        time_dependent: bool,
    ) -> Result<Self, FieldError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut terms = Vec::new();
        for total in 1..=degree {
            for pt in 0..=total {
                if pt > 0 && !time_dependent {
                    continue;
                }
                for px in 0..=(total - pt) {
                    let py = total - pt - px;
                    let coef = T::lit(rng.gen_range(-1.0..=1.0));
                    terms.push(Monomial { coef, px, py, pt });
                }
            }
        }
        Self::new(origin, length_scale, time_scale, terms)
    }

    fn scaled(&self, p: Vec2<T>, t: T) -> (T, T, T) {
        let d = p - self.origin;
        (
            d.x / self.length_scale,
            d.y / self.length_scale,
            t / self.time_scale,
        )
    }
}

impl<T: Real> GaugeFunction<T> for PolynomialGauge<T> {
    fn value(&self, p: Vec2<T>, t: T) -> T {
        let (u, v, w) = self.scaled(p, t);
        self.terms
            .iter()
            .map(|m| m.coef * powu(u, m.px) * powu(v, m.py) * powu(w, m.pt))
            .sum()
    }

    fn gradient(&self, p: Vec2<T>, t: T) -> Vec2<T> {
        let (u, v, w) = self.scaled(p, t);
        let mut g = Vec2::zero();
        for m in &self.terms {
            let wt = m.coef * powu(w, m.pt);
            g.x += wt * dpowu(u, m.px) * powu(v, m.py);
            g.y += wt * powu(u, m.px) * dpowu(v, m.py);
        }
        g * (T::one() / self.length_scale)
    }

    fn time_derivative(&self, p: Vec2<T>, t: T) -> T {
        let (u, v, w) = self.scaled(p, t);
        let s: T = self
            .terms
            .iter()
            .map(|m| m.coef * powu(u, m.px) * powu(v, m.py) * dpowu(w, m.pt))
            .sum();
        s / self.time_scale
    }

    fn is_time_dependent(&self) -> bool {
        self.terms.iter().any(|m| m.pt > 0 && m.coef != T::zero())
    }

    fn time_polynomial(&self, p: Vec2<T>) -> Option<[T; 3]> {
        if self.terms.iter().any(|m| m.pt > 2) {
            return None;
        }
        let (u, v, _) = self.scaled(p, T::zero());
        let mut c = [T::zero(); 3];
        let inv_tau = T::one() / self.time_scale;
        let w_pow = [T::one(), inv_tau, inv_tau * inv_tau];
        for m in &self.terms {
            c[m.pt as usize] += m.coef * powu(u, m.px) * powu(v, m.py) * w_pow[m.pt as usize];
        }
        Some(c)
    }
}

/// Gauge given by a closure; derivatives by central differences.
pub struct FnGauge<T> {
    f: Box<dyn Fn(Vec2<T>, T) -> T + Send + Sync>,
    time_dependent: bool,
}

impl<T: Real> FnGauge<T> {
    pub fn new(f: impl Fn(Vec2<T>, T) -> T + Send + Sync + 'static, time_dependent: bool) -> Self {
        Self {
            f: Box::new(f),
            time_dependent,
        }
    }
}

impl<T: Real> GaugeFunction<T> for FnGauge<T> {
    fn value(&self, p: Vec2<T>, t: T) -> T {
        (self.f)(p, t)
    }
    fn time_derivative(&self, p: Vec2<T>, t: T) -> T {
        if self.time_dependent {
            fd_time_derivative(self, p, t, T::lit(1e-4))
        } else {
            T::zero()
        }
    }
    fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }
}

/// `field` seen in the gauge `g`: A' = A + ∇G/q, Φ' = Φ − ∂G/∂t / q.
///
/// Line and time integrals use G's endpoint values directly, so link phases
/// built from a gauged field differ from the originals by exactly G(p1) − G(p0).
pub struct GaugedField<F, G, T> {
    pub base: F,
    pub gauge: G,
    pub charge: T,
}

pub fn apply_gauge<T, F, G>(
    field: F,
    gauge: G,
    charge: T,
) -> Result<GaugedField<F, G, T>, FieldError>
where
    T: Real,
    F: PotentialField<T>,
    G: GaugeFunction<T>,
{
    if charge == T::zero() || !charge.is_finite() {
        return Err(FieldError::Invalid(
            "gauge transformation needs a finite non-zero charge".into(),
        ));
    }
    Ok(GaugedField {
        base: field,
        gauge,
        charge,
    })
}

impl<T, F, G> PotentialField<T> for GaugedField<F, G, T>
where
    T: Real,
    F: PotentialField<T>,
    G: GaugeFunction<T>,
{
    fn potentials(&self, p: Vec2<T>, t: T) -> Result<Potentials<T>, FieldError> {
        let b = self.base.potentials(p, t)?;
        let inv_q = T::one() / self.charge;
        Ok(Potentials {
            phi: b.phi - self.gauge.time_derivative(p, t) * inv_q,
            a: b.a + self.gauge.gradient(p, t) * inv_q,
        })
    }

    fn check_segment(&self, p0: Vec2<T>, p1: Vec2<T>) -> Result<(), FieldError> {
        self.base.check_segment(p0, p1)
    }

    fn line_integral(&self, p0: Vec2<T>, p1: Vec2<T>, t: T) -> Result<T, FieldError> {
        let base = self.base.line_integral(p0, p1, t)?;
        Ok(base + (self.gauge.value(p1, t) - self.gauge.value(p0, t)) / self.charge)
    }

    fn scalar_time_integral(&self, p: Vec2<T>, t0: T, t1: T) -> Result<T, FieldError> {
        let base = self.base.scalar_time_integral(p, t0, t1)?;
        Ok(base - (self.gauge.value(p, t1) - self.gauge.value(p, t0)) / self.charge)
    }

    fn has_line_closure(&self) -> bool {
        self.base.has_line_closure()
    }

    fn is_static(&self) -> bool {
        self.base.is_static() && !self.gauge.is_time_dependent()
    }
}
