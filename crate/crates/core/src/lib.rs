// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod eikonal;
pub mod geom;
mod particle;
pub mod potentials;
pub mod quadrature;
mod real;
pub mod scenarios;
pub mod wavesolver;

pub use particle::Particle;
pub use real::Real;

/// Double-precision instantiations of the generic types.
pub type Point = geom::Vec2<f64>;
pub type Grid = wavesolver::GridSpec<f64>;
pub type Wave = wavesolver::WaveField<f64>;
pub type Charge = Particle<f64>;
pub type Intensity = analysis::Profile<f64>;
