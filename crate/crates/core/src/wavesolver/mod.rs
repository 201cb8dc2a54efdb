//! Lattice Schrödinger propagation with Peierls link phases.
//!
//! Nodes are stored row-major (`j * nx + i`, x fastest); node `(i, j)` sits at
//! `origin + (i dx, j dy)`. The kinetic term hops `ψ_{i+1}` with `exp(+iθ)`,
//! θ = q∫A·dl along the edge, matching the `(p + qA)` coupling, so the scheme
//! is exactly covariant under `θ → θ + G_{i+1} − G_i`, `ψ → ψ·exp(−iG)`.

mod current;
mod links;
mod propagate;
mod snapshot;
mod tridiag;

use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Rect, Vec2};
use crate::potentials::{FieldError, GaugeFunction};
use crate::Real;

pub use current::{edge_current_x, edge_current_y, probability_current, EdgeCurrents};
pub use links::LinkPhases;
pub use propagate::{step, Propagator};
pub use snapshot::{
    read_snapshot_binary, write_snapshot_binary, write_snapshot_csv, SnapshotFormat,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("wave packet support leaves the grid: {0}")]
    PacketOutOfDomain(String),
    #[error("wave packet overlaps walls with probability {mass:e}")]
    PacketOnWall { mass: f64 },
    #[error("non-finite amplitude after step {step} (t = {time}); the run is unstable")]
    NonFinite { step: u64, time: f64 },
    #[error("state and propagator disagree: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Uniform node lattice and time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    pub nx: usize,
    pub ny: usize,
    pub dx: T,
    pub dy: T,
    pub origin: Vec2<T>,
    pub dt: T,
}

impl<T: Real> GridSpec<T> {
    pub fn new(
        nx: usize,
        ny: usize,
        dx: T,
        dy: T,
        origin: Vec2<T>,
        dt: T,
    ) -> Result<Self, SolverError> {
        let g = Self {
            nx,
            ny,
            dx,
            dy,
            origin,
            dt,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.nx < 16 || self.ny < 16 {
            return Err(SolverError::InvalidGrid(format!(
                "need at least 16x16 nodes, got {}x{}",
                self.nx, self.ny
            )));
        }
        for (name, v) in [("dx", self.dx), ("dy", self.dy), ("dt", self.dt)] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(SolverError::InvalidGrid(format!(
                    "{name} must be positive and finite"
                )));
            }
        }
        if !self.origin.is_finite() {
            return Err(SolverError::InvalidGrid("origin is not finite".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Vec2<T> {
        Vec2::new(
            self.origin.x + self.dx * T::from_usize_lossy(i),
            self.origin.y + self.dy * T::from_usize_lossy(j),
        )
    }

    /// Position of the last node.
    pub fn extent(&self) -> Vec2<T> {
        self.node(self.nx - 1, self.ny - 1)
    }

    /// Nearest node column to `x` (clamped to the grid).
    pub fn column_of(&self, x: T) -> usize {
        let s = ((x - self.origin.x) / self.dx).round().max(T::zero());
        s.to_usize().unwrap_or(0).min(self.nx - 1)
    }

    /// Nearest node row to `y` (clamped to the grid).
    pub fn row_of(&self, y: T) -> usize {
        let s = ((y - self.origin.y) / self.dy).round().max(T::zero());
        s.to_usize().unwrap_or(0).min(self.ny - 1)
    }

    pub fn cell_area(&self) -> T {
        self.dx * self.dy
    }

    /// `dt / min(dx, dy)²`, the ratio an explicit scheme would be limited by.
    pub fn stability_ratio(&self) -> T {
        let h = self.dx.min(self.dy);
        self.dt / (h * h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum NodeKind {
    Interior,
    Wall,
    Absorber,
}

/// Per-node classification and absorption rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask<T> {
    nx: usize,
    ny: usize,
    kind: Vec<NodeKind>,
    /// Damping rate η(x); each step multiplies ψ by `exp(−η dt)`.
    rate: Vec<T>,
}

impl<T: Real> Mask<T> {
    pub fn open(grid: &GridSpec<T>) -> Self {
        Self {
            nx: grid.nx,
            ny: grid.ny,
            kind: vec![NodeKind::Interior; grid.len()],
            rate: vec![T::zero(); grid.len()],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    #[inline]
    pub fn kind(&self, idx: usize) -> NodeKind {
        self.kind[idx]
    }

    #[inline]
    pub fn is_wall(&self, idx: usize) -> bool {
        self.kind[idx] == NodeKind::Wall
    }

    pub fn rate(&self, idx: usize) -> T {
        self.rate[idx]
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kind
    }

    pub fn set_wall(&mut self, i: usize, j: usize) {
        let idx = j * self.nx + i;
        self.kind[idx] = NodeKind::Wall;
        self.rate[idx] = T::zero();
    }

    /// Marks every node inside `rect` (boundary inclusive) as wall.
    pub fn add_wall_rect(&mut self, grid: &GridSpec<T>, rect: Rect<T>) {
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                if rect.contains(grid.node(i, j)) {
                    self.set_wall(i, j);
                }
            }
        }
    }

    /// Cosine-ramp absorbing layers of `widths = [left, right, bottom, top]`
    /// cells with peak rate `eta` at the outer boundary. Walls are kept.
    pub fn add_absorber(&mut self, widths: [usize; 4], eta: T) {
        let half_pi = T::FRAC_PI_2();
        let ramp = |d: usize, w: usize| -> T {
            if w == 0 || d >= w {
                return T::zero();
            }
            let c = (half_pi * T::from_usize_lossy(d) / T::from_usize_lossy(w)).cos();
            eta * c * c
        };
        for j in 0..self.ny {
            for i in 0..self.nx {
                let r = ramp(i, widths[0])
                    .max(ramp(self.nx - 1 - i, widths[1]))
                    .max(ramp(j, widths[2]))
                    .max(ramp(self.ny - 1 - j, widths[3]));
                let idx = j * self.nx + i;
                if r > T::zero() && self.kind[idx] != NodeKind::Wall {
                    self.kind[idx] = NodeKind::Absorber;
                    self.rate[idx] = r;
                }
            }
        }
    }

    pub fn has_absorber(&self) -> bool {
        self.kind.contains(&NodeKind::Absorber)
    }

    pub fn wall_count(&self) -> usize {
        self.kind.iter().filter(|k| **k == NodeKind::Wall).count()
    }
}

/// Complex amplitude on the grid at one time.
#[derive(Debug, Clone)]
pub struct WaveField<T> {
    pub psi: Vec<Complex<T>>,
    pub time: T,
    pub grid: GridSpec<T>,
    pub mask: Arc<Mask<T>>,
}

impl<T: Real> WaveField<T> {
    pub fn zeros(grid: GridSpec<T>, mask: Arc<Mask<T>>, time: T) -> Self {
        Self {
            psi: vec![Complex::new(T::zero(), T::zero()); grid.len()],
            time,
            grid,
            mask,
        }
    }

    /// `Σ |ψ|² dx dy`.
    pub fn norm_sqr(&self) -> T {
        let s: T = self.psi.iter().map(|z| z.norm_sqr()).sum();
        s * self.grid.cell_area()
    }

    pub fn density(&self) -> Vec<T> {
        self.psi.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Probability-weighted mean position.
    pub fn mean_position(&self) -> Vec2<T> {
        let g = &self.grid;
        let (mut sx, mut sy, mut w) = (T::zero(), T::zero(), T::zero());
        for j in 0..g.ny {
            for i in 0..g.nx {
                let p = self.psi[g.index(i, j)].norm_sqr();
                let r = g.node(i, j);
                sx += p * r.x;
                sy += p * r.y;
                w += p;
            }
        }
        Vec2::new(sx / w, sy / w)
    }

    /// Probability-weighted variance along x and y.
    pub fn variance(&self) -> Vec2<T> {
        let g = &self.grid;
        let c = self.mean_position();
        let (mut vx, mut vy, mut w) = (T::zero(), T::zero(), T::zero());
        for j in 0..g.ny {
            for i in 0..g.nx {
                let p = self.psi[g.index(i, j)].norm_sqr();
                let d = g.node(i, j) - c;
                vx += p * d.x * d.x;
                vy += p * d.y * d.y;
                w += p;
            }
        }
        Vec2::new(vx / w, vy / w)
    }

    /// Largest node-wise `| |ψ|² − |φ|² |`.
    pub fn max_density_deviation(&self, other: &Self) -> T {
        self.psi
            .iter()
            .zip(&other.psi)
            .map(|(a, b)| (a.norm_sqr() - b.norm_sqr()).abs())
            .fold(T::zero(), T::max)
    }
}

/// Normalized Gaussian `exp(−|r − c|²/(4σ²) + i k0·r)`, zero on walls.
pub fn init_packet<T: Real>(
    grid: GridSpec<T>,
    mask: Arc<Mask<T>>,
    center: Vec2<T>,
    sigma: T,
    k0: Vec2<T>,
) -> Result<WaveField<T>, SolverError> {
    grid.validate()?;
    if mask.dims() != (grid.nx, grid.ny) {
        return Err(SolverError::Mismatch(
            "mask dimensions differ from grid".into(),
        ));
    }
    if !(sigma > T::zero()) || !center.is_finite() || !k0.is_finite() {
        return Err(SolverError::PacketOutOfDomain(
            "sigma must be positive, center and k0 finite".into(),
        ));
    }
    let reach = sigma * T::lit(4.0);
    let hi = grid.extent();
    if center.x - reach < grid.origin.x
        || center.y - reach < grid.origin.y
        || center.x + reach > hi.x
        || center.y + reach > hi.y
    {
        return Err(SolverError::PacketOutOfDomain(format!(
            "center ({}, {}) ± 4σ = {} exceeds the grid",
            center.x, center.y, reach
        )));
    }
    let inv = T::one() / (T::lit(4.0) * sigma * sigma);
    let mut state = WaveField::zeros(grid, mask, T::zero());
    let (mut total, mut on_wall) = (T::zero(), T::zero());
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let r = grid.node(i, j);
            let d = r - center;
            let z = Complex::from_polar((-d.norm_sqr() * inv).exp(), k0.dot(r));
            let idx = grid.index(i, j);
            total += z.norm_sqr();
            if state.mask.is_wall(idx) {
                on_wall += z.norm_sqr();
            } else {
                state.psi[idx] = z;
            }
        }
    }
    let wall_fraction = on_wall / total;
    if wall_fraction > T::lit(1e-10) {
        return Err(SolverError::PacketOnWall {
            mass: wall_fraction.to_f64_lossy(),
        });
    }
    let scale = T::one() / (state.norm_sqr().sqrt());
    for z in &mut state.psi {
        *z *= scale;
    }
    Ok(state)
}

/// Lattice carrier whose group velocity `sin(k dx)/(m dx)` equals `p/m` for a
/// mechanical momentum `p`, per axis. Plane waves `exp(i k·r)` on the lattice
/// move (and diffract) as if they had momentum `sin(k dx)/dx`, so this is the
/// carrier that represents a particle of momentum `p`.
pub fn lattice_carrier<T: Real>(grid: &GridSpec<T>, p: Vec2<T>) -> Result<Vec2<T>, SolverError> {
    let axis = |p: T, h: T| {
        let s = p * h;
        if s.abs() < T::one() {
            Ok(s.asin() / h)
        } else {
            Err(SolverError::InvalidGrid(format!(
                "momentum {p} exceeds the lattice maximum 1/h = {}",
                T::one() / h
            )))
        }
    };
    Ok(Vec2::new(axis(p.x, grid.dx)?, axis(p.y, grid.dy)?))
}

/// Multiplies ψ by `exp(−iΛ)`, where Λ sums the link phases from `anchor`
/// along its row and then up or down each column. In a flux-free region this
/// is the lattice Dirac factor: the packet keeps the kinetic momentum it was
/// built with instead of picking up `−qA` at the source.
pub fn dress_packet<T: Real>(
    state: &mut WaveField<T>,
    links: &LinkPhases<T>,
    anchor: (usize, usize),
) {
    let g = state.grid;
    let (ia, ja) = anchor;
    let mut row = vec![T::zero(); g.nx];
    for i in ia + 1..g.nx {
        row[i] = row[i - 1] + links.theta_x(i - 1, ja);
    }
    for i in (0..ia).rev() {
        row[i] = row[i + 1] - links.theta_x(i, ja);
    }
    for (i, &base) in row.iter().enumerate() {
        let mut lam = base;
        for j in ja..g.ny {
            if j > ja {
                lam += links.theta_y(i, j - 1);
            }
            if lam != T::zero() {
                let idx = g.index(i, j);
                state.psi[idx] *= Complex::from_polar(T::one(), -lam);
            }
        }
        let mut lam = base;
        for j in (0..ja).rev() {
            lam -= links.theta_y(i, j);
            if lam != T::zero() {
                let idx = g.index(i, j);
                state.psi[idx] *= Complex::from_polar(T::one(), -lam);
            }
        }
    }
}

/// `ψ → ψ·exp(−iG(x, t))` at the state's time.
pub fn gauge_rotate<T: Real, G: GaugeFunction<T> + ?Sized>(state: &mut WaveField<T>, gauge: &G) {
    let g = state.grid;
    let t = state.time;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let idx = g.index(i, j);
            let phase = Complex::from_polar(T::one(), -gauge.value(g.node(i, j), t));
            state.psi[idx] *= phase;
        }
    }
}
