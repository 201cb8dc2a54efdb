use num_complex::Complex;

use super::links::LinkPhases;
use super::{SolverError, WaveField};
use crate::geom::Vec2;
use crate::Real;

/// `Im(ψ̄_a h ψ_b)/(m dx)` on the edge a → b with hop `h`.
#[inline]
pub fn edge_current_x<T: Real>(a: Complex<T>, b: Complex<T>, hop: Complex<T>, mass: T, dx: T) -> T {
    (a.conj() * hop * b).im / (mass * dx)
}

/// Same as [`edge_current_x`] with the y spacing.
#[inline]
pub fn edge_current_y<T: Real>(a: Complex<T>, b: Complex<T>, hop: Complex<T>, mass: T, dy: T) -> T {
    edge_current_x(a, b, hop, mass, dy)
}

/// Probability current on lattice edges.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeCurrents<T> {
    pub nx: usize,
    pub ny: usize,
    /// Edge (i, j) → (i+1, j) at `j * nx + i`; zero on the last column.
    pub jx: Vec<T>,
    /// Edge (i, j) → (i, j+1) at `j * nx + i`; zero on the last row.
    pub jy: Vec<T>,
}

impl<T: Real> EdgeCurrents<T> {
    /// Node-centred current: mean of the two incident edges per direction.
    pub fn at_node(&self, i: usize, j: usize) -> Vec2<T> {
        let idx = j * self.nx + i;
        let half = T::lit(0.5);
        let left = if i > 0 { self.jx[idx - 1] } else { T::zero() };
        let below = if j > 0 {
            self.jy[idx - self.nx]
        } else {
            T::zero()
        };
        Vec2::new((left + self.jx[idx]) * half, (below + self.jy[idx]) * half)
    }

    /// Lattice divergence at node (i, j).
    pub fn divergence(&self, i: usize, j: usize, dx: T, dy: T) -> T {
        let idx = j * self.nx + i;
        let left = if i > 0 { self.jx[idx - 1] } else { T::zero() };
        let below = if j > 0 {
            self.jy[idx - self.nx]
        } else {
            T::zero()
        };
        (self.jx[idx] - left) / dx + (self.jy[idx] - below) / dy
    }
}

/// Gauge-covariant edge currents of `state` with the hops of `links`.
pub fn probability_current<T: Real>(
    state: &WaveField<T>,
    links: &LinkPhases<T>,
    mass: T,
) -> Result<EdgeCurrents<T>, SolverError> {
    let g = &state.grid;
    if links.dims() != (g.nx, g.ny) {
        return Err(SolverError::Mismatch(
            "links built for a different grid".into(),
        ));
    }
    let (nx, ny) = (g.nx, g.ny);
    let mut jx = vec![T::zero(); nx * ny];
    let mut jy = vec![T::zero(); nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let idx = j * nx + i;
            if i + 1 < nx {
                jx[idx] = edge_current_x(
                    state.psi[idx],
                    state.psi[idx + 1],
                    links.hop_x(i, j),
                    mass,
                    g.dx,
                );
            }
            if j + 1 < ny {
                jy[idx] = edge_current_y(
                    state.psi[idx],
                    state.psi[idx + nx],
                    links.hop_y(i, j),
                    mass,
                    g.dy,
                );
            }
        }
    }
    Ok(EdgeCurrents { nx, ny, jx, jy })
}
