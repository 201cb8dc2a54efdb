//! Electromagnetic potentials, gauge transformations and derived fields.
//!
//! Conventions (natural units, ħ = c = m_e = 1): a particle of charge `q`
//! couples through `(p + qA)²/2m − qΦ`. A gauge function `G` acts as
//! `qA → qA + ∇G`, `qΦ → qΦ − ∂G/∂t` on the potentials and as
//! `ψ → ψ·exp(−iG)` on the wave function.

mod fields;
mod gauge;
mod retarded;

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::geom::Vec2;
use crate::quadrature::gauss_legendre5;
use crate::Real;

pub use fields::{
    infinite_solenoid, uniform_channel, AnalyticField, Composite, InfiniteSolenoid, UniformChannel,
    ZeroField,
};
pub use gauge::{
    apply_gauge, fd_gradient, fd_time_derivative, ConstantGauge, FnGauge, GaugeFunction,
    GaugedField, LinearGauge, Monomial, PolynomialGauge, ZeroGauge,
};
pub use retarded::{
    coupled_wavevector, retarded_potential, retarded_time, FourPotential, Worldline, WorldlineField,
};

/// Finite-difference step used by [`field_strength`].
pub const FIELD_STRENGTH_STEP: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("potential evaluated at singular point ({x}, {y})")]
    SingularPoint { x: f64, y: f64 },
    #[error("segment ({x0}, {y0}) -> ({x1}, {y1}) crosses a singular point")]
    SingularSegment { x0: f64, y0: f64, x1: f64, y1: f64 },
    #[error("degenerate region: {0}")]
    DegenerateRegion(String),
    #[error("non-finite parameter: {0}")]
    NonFinite(String),
    #[error("insufficient history: retarded time for field time {t_field} lies outside worldline coverage [{t_first}, {t_last}]")]
    InsufficientHistory {
        t_field: f64,
        t_first: f64,
        t_last: f64,
    },
    #[error("invalid worldline: {0}")]
    InvalidWorldline(String),
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

/// Scalar and vector potential at one space-time point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Potentials<T> {
    pub phi: T,
    pub a: Vec2<T>,
}

impl<T: Real> Potentials<T> {
    pub fn zero() -> Self {
        Self {
            phi: T::zero(),
            a: Vec2::zero(),
        }
    }
}

/// Electric field in the plane and the out-of-plane magnetic field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldStrength<T> {
    pub e: Vec2<T>,
    pub b_z: T,
}

/// Scalar potential Φ(x, y, t) and in-plane vector potential A(x, y, t).
pub trait PotentialField<T: Real>: Send + Sync {
    fn potentials(&self, p: Vec2<T>, t: T) -> Result<Potentials<T>, FieldError>;

    /// Rejects segments that pass through a declared singular point.
    fn check_segment(&self, _p0: Vec2<T>, _p1: Vec2<T>) -> Result<(), FieldError> {
        Ok(())
    }

    /// `∫ A·dl` along the straight segment `p0 → p1` at time `t`.
    ///
    /// The default is 5-point Gauss–Legendre; fields with a closed form
    /// override it and report [`has_line_closure`](Self::has_line_closure).
    fn line_integral(&self, p0: Vec2<T>, p1: Vec2<T>, t: T) -> Result<T, FieldError> {
        self.check_segment(p0, p1)?;
        let d = p1 - p0;
        gauss_legendre5(
            |s| self.potentials(p0.lerp(p1, s), t).map(|pot| pot.a.dot(d)),
            T::zero(),
            T::one(),
        )
    }

    /// `∫ Φ dt` at fixed position over `[t0, t1]`.
    fn scalar_time_integral(&self, p: Vec2<T>, t0: T, t1: T) -> Result<T, FieldError> {
        gauss_legendre5(|t| self.potentials(p, t).map(|pot| pot.phi), t0, t1)
    }

    fn has_line_closure(&self) -> bool {
        false
    }

    /// True when neither Φ nor A depends on time.
    fn is_static(&self) -> bool {
        true
    }
}

macro_rules! forward_potential_field {
    ($($ptr:ty),*) => {$(
        impl<T: Real, F: PotentialField<T> + ?Sized> PotentialField<T> for $ptr {
            fn potentials(&self, p: Vec2<T>, t: T) -> Result<Potentials<T>, FieldError> {
                (**self).potentials(p, t)
            }
            fn check_segment(&self, p0: Vec2<T>, p1: Vec2<T>) -> Result<(), FieldError> {
                (**self).check_segment(p0, p1)
            }
            fn line_integral(&self, p0: Vec2<T>, p1: Vec2<T>, t: T) -> Result<T, FieldError> {
                (**self).line_integral(p0, p1, t)
            }
            fn scalar_time_integral(&self, p: Vec2<T>, t0: T, t1: T) -> Result<T, FieldError> {
                (**self).scalar_time_integral(p, t0, t1)
            }
            fn has_line_closure(&self) -> bool {
                (**self).has_line_closure()
            }
            fn is_static(&self) -> bool {
                (**self).is_static()
            }
        }
    )*};
}

forward_potential_field!(&F, Box<F>, Arc<F>);

/// `∫ A·dl` along a segment: analytic closure when available, otherwise
/// 5-point Gauss–Legendre.
pub fn edge_line_integral<T: Real, F: PotentialField<T> + ?Sized>(
    field: &F,
    p0: Vec2<T>,
    p1: Vec2<T>,
    t: T,
) -> Result<T, FieldError> {
    field.line_integral(p0, p1, t)
}

/// Sum of edge integrals around a closed polygon (last vertex joins the first).
pub fn loop_circulation<T: Real, F: PotentialField<T> + ?Sized>(
    field: &F,
    vertices: &[Vec2<T>],
    t: T,
) -> Result<T, FieldError> {
    let n = vertices.len();
    let mut acc = T::zero();
    for k in 0..n {
        acc += field.line_integral(vertices[k], vertices[(k + 1) % n], t)?;
    }
    Ok(acc)
}

/// E = −∇Φ − ∂A/∂t and B_z = ∂A_y/∂x − ∂A_x/∂y by central differences.
pub fn field_strength<T: Real, F: PotentialField<T> + ?Sized>(
    field: &F,
    p: Vec2<T>,
    t: T,
) -> Result<FieldStrength<T>, FieldError> {
    let h = T::lit(FIELD_STRENGTH_STEP);
    let two_h = h + h;
    let hx = Vec2::new(h, T::zero());
    let hy = Vec2::new(T::zero(), h);
    let xp = field.potentials(p + hx, t)?;
    let xm = field.potentials(p - hx, t)?;
    let yp = field.potentials(p + hy, t)?;
    let ym = field.potentials(p - hy, t)?;
    let tp = field.potentials(p, t + h)?;
    let tm = field.potentials(p, t - h)?;
    let grad_phi = Vec2::new((xp.phi - xm.phi) / two_h, (yp.phi - ym.phi) / two_h);
    let da_dt = (tp.a - tm.a) * (T::one() / two_h);
    let e = -grad_phi - da_dt;
    let b_z = (xp.a.y - xm.a.y) / two_h - (yp.a.x - ym.a.x) / two_h;
    Ok(FieldStrength { e, b_z })
}
