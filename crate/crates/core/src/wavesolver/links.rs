use num_complex::Complex;

use super::{GridSpec, Mask, SolverError};
use crate::potentials::{edge_line_integral, PotentialField};
use crate::Real;

/// Peierls phases for every edge and exact scalar-potential factors for the
/// two half steps around `t_mid`.
#[derive(Debug, Clone)]
pub struct LinkPhases<T> {
    nx: usize,
    ny: usize,
    pub t_start: T,
    pub t_mid: T,
    pub t_end: T,
    /// θ on edge (i, j) → (i+1, j), stored at `j * nx + i`.
    theta_x: Vec<T>,
    /// θ on edge (i, j) → (i, j+1), stored at `j * nx + i`.
    theta_y: Vec<T>,
    pub(crate) hop_x: Vec<Complex<T>>,
    /// `exp(iθ_y)` in column-major order (`i * ny + j`) for the y sweep.
    pub(crate) hop_y_t: Vec<Complex<T>>,
    /// `exp(i q∫Φ dt)` over `[t_start, t_mid]` and `[t_mid, t_end]`; `None`
    /// when Φ vanishes on every open node.
    pub(crate) scalar: Option<[Vec<Complex<T>>; 2]>,
}

#[inline]
fn cis<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

impl<T: Real> LinkPhases<T> {
    /// Link phases of `field` for the step `[t_start, t_start + grid.dt]`.
    /// Edges touching walls carry a zero hop and are never evaluated.
    pub fn build<F: PotentialField<T> + ?Sized>(
        field: &F,
        grid: &GridSpec<T>,
        mask: &Mask<T>,
        charge: T,
        t_start: T,
    ) -> Result<Self, SolverError> {
        let (nx, ny) = (grid.nx, grid.ny);
        if mask.dims() != (nx, ny) {
            return Err(SolverError::Mismatch(
                "mask dimensions differ from grid".into(),
            ));
        }
        let half = grid.dt * T::lit(0.5);
        let t_mid = t_start + half;
        let t_end = t_start + grid.dt;
        let zero = Complex::new(T::zero(), T::zero());
        let mut theta_x = vec![T::zero(); nx * ny];
        let mut theta_y = vec![T::zero(); nx * ny];
        let mut hop_x = vec![zero; nx * ny];
        let mut hop_y_t = vec![zero; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let idx = grid.index(i, j);
                if mask.is_wall(idx) {
                    continue;
                }
                let p = grid.node(i, j);
                if i + 1 < nx && !mask.is_wall(idx + 1) {
                    let th = charge * edge_line_integral(field, p, grid.node(i + 1, j), t_mid)?;
                    theta_x[idx] = th;
                    hop_x[idx] = cis(th);
                }
                if j + 1 < ny && !mask.is_wall(idx + nx) {
                    let th = charge * edge_line_integral(field, p, grid.node(i, j + 1), t_mid)?;
                    theta_y[idx] = th;
                    hop_y_t[i * ny + j] = cis(th);
                }
            }
        }

        let mut s0 = vec![Complex::new(T::one(), T::zero()); nx * ny];
        let mut s1 = s0.clone();
        let mut any = false;
        for j in 0..ny {
            for i in 0..nx {
                let idx = grid.index(i, j);
                if mask.is_wall(idx) {
                    continue;
                }
                let p = grid.node(i, j);
                let a = charge * field.scalar_time_integral(p, t_start, t_mid)?;
                let b = charge * field.scalar_time_integral(p, t_mid, t_end)?;
                if a != T::zero() || b != T::zero() {
                    any = true;
                    s0[idx] = cis(a);
                    s1[idx] = cis(b);
                }
            }
        }
        let scalar = any.then_some([s0, s1]);
        Ok(Self {
            nx,
            ny,
            t_start,
            t_mid,
            t_end,
            theta_x,
            theta_y,
            hop_x,
            hop_y_t,
            scalar,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn theta_x(&self, i: usize, j: usize) -> T {
        self.theta_x[j * self.nx + i]
    }

    pub fn theta_y(&self, i: usize, j: usize) -> T {
        self.theta_y[j * self.nx + i]
    }

    pub fn hop_x(&self, i: usize, j: usize) -> Complex<T> {
        self.hop_x[j * self.nx + i]
    }

    pub fn hop_y(&self, i: usize, j: usize) -> Complex<T> {
        self.hop_y_t[i * self.ny + j]
    }

    /// Counter-clockwise sum of θ around the plaquette with lower-left node (i, j).
    pub fn plaquette(&self, i: usize, j: usize) -> T {
        self.theta_x(i, j) + self.theta_y(i + 1, j) - self.theta_x(i, j + 1) - self.theta_y(i, j)
    }

    /// `q∫Φ dt` over the first half step at node `idx` (zero when absent).
    pub fn scalar_factor(&self, half: usize, idx: usize) -> Complex<T> {
        match &self.scalar {
            Some(s) => s[half][idx],
            None => Complex::new(T::one(), T::zero()),
        }
    }

    /// Overwrites `self` with `base` seen in a gauge whose node phases are
    /// `u = exp(iG)` at the start, middle and end of the step:
    /// θ → θ + G_b − G_a on every open edge, q∫Φ dt → q∫Φ dt − ΔG.
    pub(crate) fn regauge_from(
        &mut self,
        base: &Self,
        g_mid: &[T],
        u_start: &[Complex<T>],
        u_mid: &[Complex<T>],
        u_end: &[Complex<T>],
    ) {
        let (nx, ny) = (self.nx, self.ny);
        self.t_start = base.t_start;
        self.t_mid = base.t_mid;
        self.t_end = base.t_end;
        let zero = Complex::new(T::zero(), T::zero());
        for j in 0..ny {
            for i in 0..nx {
                let idx = j * nx + i;
                let hx = base.hop_x[idx];
                if hx != zero {
                    self.hop_x[idx] = hx * u_mid[idx + 1] * u_mid[idx].conj();
                    self.theta_x[idx] = base.theta_x[idx] + g_mid[idx + 1] - g_mid[idx];
                }
                let hy = base.hop_y_t[i * ny + j];
                if hy != zero {
                    self.hop_y_t[i * ny + j] = hy * u_mid[idx + nx] * u_mid[idx].conj();
                    self.theta_y[idx] = base.theta_y[idx] + g_mid[idx + nx] - g_mid[idx];
                }
            }
        }
        let n = nx * ny;
        let s = self.scalar.get_or_insert_with(|| {
            let one = vec![Complex::new(T::one(), T::zero()); n];
            [one.clone(), one]
        });
        for idx in 0..n {
            let b0 = base
                .scalar
                .as_ref()
                .map_or(Complex::new(T::one(), T::zero()), |b| b[0][idx]);
            let b1 = base
                .scalar
                .as_ref()
                .map_or(Complex::new(T::one(), T::zero()), |b| b[1][idx]);
            s[0][idx] = b0 * u_mid[idx].conj() * u_start[idx];
            s[1][idx] = b1 * u_end[idx].conj() * u_mid[idx];
        }
    }
}
