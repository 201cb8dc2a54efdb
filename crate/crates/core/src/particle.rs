use serde::{Deserialize, Serialize};

use crate::Real;

/// Mass and signed charge in natural units (electron: m = 1, q = −1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle<T> {
    pub mass: T,
    pub charge: T,
}

impl<T: Real> Particle<T> {
    pub fn new(mass: T, charge: T) -> Self {
        Self { mass, charge }
    }

    pub fn electron() -> Self {
        Self::new(T::one(), -T::one())
    }

    /// Non-relativistic dispersion ω = k²/2m.
    pub fn omega(&self, k: T) -> T {
        k * k / (self.mass + self.mass)
    }
}

impl<T: Real> Default for Particle<T> {
    fn default() -> Self {
        Self::electron()
    }
}
