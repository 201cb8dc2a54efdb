use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;

use super::links::LinkPhases;
use super::tridiag::CayleyLines;
use super::{GridSpec, Mask, SolverError, WaveField};
use crate::particle::Particle;
use crate::potentials::{edge_line_integral, GaugeFunction, PotentialField};
use crate::Real;

const TRANSPOSE_BLOCK: usize = 16;

/// Gauge applied on top of the field: links are the field's links shifted by
/// node values of G, which equals building them from `apply_gauge(field, G)`.
struct GaugeOverlay<T> {
    gauge: Arc<dyn GaugeFunction<T>>,
    time_dependent: bool,
    poly: Option<Vec<[T; 3]>>,
    /// G and exp(iG) at the end of the previous step, reused as the next start.
    end_cache: Option<(T, Vec<T>, Vec<Complex<T>>)>,
}

impl<T: Real> GaugeOverlay<T> {
    fn node_values(&self, grid: &GridSpec<T>, t: T) -> (Vec<T>, Vec<Complex<T>>) {
        let g: Vec<T> = match &self.poly {
            Some(c) => c.par_iter().map(|c| c[0] + t * (c[1] + t * c[2])).collect(),
            None => (0..grid.len())
                .into_par_iter()
                .map(|idx| self.gauge.value(grid.node(idx % grid.nx, idx / grid.nx), t))
                .collect(),
        };
        let u = g
            .par_iter()
            .map(|&v| Complex::new(v.cos(), v.sin()))
            .collect();
        (g, u)
    }
}

/// Time stepper for one field, gauge and mask.
///
/// Each step applies `P₁ · Cx(dt/2) · Cy(dt) · Cx(dt/2) · P₀`, where `P` are
/// the exact scalar-potential factors of the two half steps and `C` the
/// directional Cayley factors with links at the step midpoint, followed by
/// the absorber damping.
pub struct Propagator<T: Real> {
    grid: GridSpec<T>,
    mask: Arc<Mask<T>>,
    particle: Particle<T>,
    field: Arc<dyn PotentialField<T>>,
    field_static: bool,
    overlay: Option<GaugeOverlay<T>>,
    base: LinkPhases<T>,
    gauged: Option<LinkPhases<T>>,
    x_lines: CayleyLines<T>,
    y_lines: CayleyLines<T>,
    damping: Vec<(usize, T)>,
    scratch: Vec<Complex<T>>,
    steps: u64,
    absorbed: T,
    absorbed_columns: Vec<T>,
}

impl<T: Real> Propagator<T> {
    pub fn new(
        grid: GridSpec<T>,
        mask: Arc<Mask<T>>,
        particle: Particle<T>,
        field: Arc<dyn PotentialField<T>>,
        t_start: T,
    ) -> Result<Self, SolverError> {
        grid.validate()?;
        if !(particle.mass > T::zero()) {
            return Err(SolverError::InvalidGrid(
                "particle mass must be positive".into(),
            ));
        }
        let base = LinkPhases::build(field.as_ref(), &grid, &mask, particle.charge, t_start)?;
        let (x_lines, y_lines) = cayley_factors(&grid, &mask, particle.mass);
        let damping = mask
            .kinds()
            .iter()
            .enumerate()
            .filter(|(idx, _)| mask.rate(*idx) > T::zero())
            .map(|(idx, _)| (idx, (-mask.rate(idx) * grid.dt).exp()))
            .collect();
        Ok(Self {
            grid,
            mask,
            particle,
            field_static: field.is_static(),
            field,
            overlay: None,
            base,
            gauged: None,
            x_lines,
            y_lines,
            damping,
            scratch: vec![Complex::new(T::zero(), T::zero()); grid.len()],
            steps: 0,
            absorbed: T::zero(),
            absorbed_columns: vec![T::zero(); grid.nx],
        })
    }

    /// Evolve under the gauge-transformed potentials `qA + ∇G`, `qΦ − ∂G/∂t`.
    pub fn with_gauge(mut self, gauge: Arc<dyn GaugeFunction<T>>) -> Self {
        let grid = self.grid;
        let poly = (0..grid.len())
            .map(|idx| gauge.time_polynomial(grid.node(idx % grid.nx, idx / grid.nx)))
            .collect::<Option<Vec<_>>>();
        let time_dependent = gauge.is_time_dependent();
        self.overlay = Some(GaugeOverlay {
            gauge,
            time_dependent,
            poly,
            end_cache: None,
        });
        self.gauged = None;
        self
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn mask(&self) -> &Arc<Mask<T>> {
        &self.mask
    }

    pub fn particle(&self) -> Particle<T> {
        self.particle
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Probability removed by the absorber so far.
    pub fn absorbed(&self) -> T {
        self.absorbed
    }

    /// Probability removed by absorber nodes in columns `0..column`.
    pub fn absorbed_before_column(&self, column: usize) -> T {
        self.absorbed_columns[..column.min(self.grid.nx)]
            .iter()
            .copied()
            .sum()
    }

    /// True when link phases never change between steps.
    pub fn is_static(&self) -> bool {
        self.field_static && self.overlay.as_ref().is_none_or(|o| !o.time_dependent)
    }

    /// Links used by the most recent (or next, before any step) step.
    pub fn links(&self) -> &LinkPhases<T> {
        self.gauged.as_ref().unwrap_or(&self.base)
    }

    fn prepare_links(&mut self, t: T) -> Result<(), SolverError> {
        let grid = self.grid;
        if !self.field_static {
            self.base = LinkPhases::build(
                self.field.as_ref(),
                &grid,
                &self.mask,
                self.particle.charge,
                t,
            )?;
        } else {
            let half = grid.dt * T::lit(0.5);
            self.base.t_start = t;
            self.base.t_mid = t + half;
            self.base.t_end = t + grid.dt;
        }
        let Some(ov) = self.overlay.as_mut() else {
            return Ok(());
        };
        if !ov.time_dependent && self.field_static {
            if self.gauged.is_none() {
                let (g, u) = ov.node_values(&grid, t);
                let mut l = self.base.clone();
                l.regauge_from(&self.base, &g, &u, &u, &u);
                self.gauged = Some(l);
            }
            let l = self.gauged.as_mut().unwrap();
            l.t_start = self.base.t_start;
            l.t_mid = self.base.t_mid;
            l.t_end = self.base.t_end;
            return Ok(());
        }
        let half = grid.dt * T::lit(0.5);
        let (g0, u0) = match ov.end_cache.take() {
            Some((tc, g, u)) if tc == t => (g, u),
            _ => ov.node_values(&grid, t),
        };
        let (gm, um, ge, ue) = if ov.time_dependent {
            let (gm, um) = ov.node_values(&grid, t + half);
            let (ge, ue) = ov.node_values(&grid, t + grid.dt);
            (gm, um, ge, ue)
        } else {
            (g0.clone(), u0.clone(), g0.clone(), u0.clone())
        };
        let l = self.gauged.get_or_insert_with(|| self.base.clone());
        l.regauge_from(&self.base, &gm, &u0, &um, &ue);
        ov.end_cache = Some((t + grid.dt, ge, ue));
        Ok(())
    }

    /// Advances `state` by one time step.
    pub fn step(&mut self, state: &mut WaveField<T>) -> Result<(), SolverError> {
        if state.grid != self.grid
            || !Arc::ptr_eq(&state.mask, &self.mask) && *state.mask != *self.mask
        {
            return Err(SolverError::Mismatch(
                "state was built on a different grid or mask".into(),
            ));
        }
        self.prepare_links(state.time)?;
        let links = self.gauged.as_ref().unwrap_or(&self.base);
        let ok = apply_step(
            &mut state.psi,
            &mut self.scratch,
            links,
            &self.grid,
            &self.x_lines,
            &self.y_lines,
        );
        let mut removed = T::zero();
        let area = self.grid.cell_area();
        for &(idx, f) in &self.damping {
            let z = state.psi[idx];
            let damped = z * f;
            let lost = z.norm_sqr() - damped.norm_sqr();
            removed += lost;
            self.absorbed_columns[idx % self.grid.nx] += lost * area;
            state.psi[idx] = damped;
        }
        self.absorbed += removed * area;
        self.steps += 1;
        state.time += self.grid.dt;
        if !ok {
            return Err(SolverError::NonFinite {
                step: self.steps,
                time: state.time.to_f64_lossy(),
            });
        }
        Ok(())
    }

    /// Hop on edge (i, j) → (i+1, j) evaluated at time `t`.
    pub fn hop_x_at(&self, i: usize, j: usize, t: T) -> Result<Complex<T>, SolverError> {
        let g = &self.grid;
        let idx = g.index(i, j);
        if i + 1 >= g.nx || self.mask.is_wall(idx) || self.mask.is_wall(idx + 1) {
            return Ok(Complex::new(T::zero(), T::zero()));
        }
        if self.is_static() {
            return Ok(self.links().hop_x(i, j));
        }
        let (p0, p1) = (g.node(i, j), g.node(i + 1, j));
        let mut theta = if self.field_static {
            self.base.theta_x(i, j)
        } else {
            self.particle.charge * edge_line_integral(self.field.as_ref(), p0, p1, t)?
        };
        if let Some(ov) = &self.overlay {
            theta += ov.gauge.value(p1, t) - ov.gauge.value(p0, t);
        }
        Ok(Complex::new(theta.cos(), theta.sin()))
    }
}

fn cayley_factors<T: Real>(
    grid: &GridSpec<T>,
    mask: &Mask<T>,
    mass: T,
) -> (CayleyLines<T>, CayleyLines<T>) {
    let two_m = mass + mass;
    let beta_x = T::one() / (two_m * grid.dx * grid.dx);
    let beta_y = T::one() / (two_m * grid.dy * grid.dy);
    let quarter = grid.dt * T::lit(0.25);
    let half = grid.dt * T::lit(0.5);
    let (nx, ny) = (grid.nx, grid.ny);
    let x_lines = CayleyLines::new(nx, ny, quarter, beta_x, |j, i| mask.is_wall(j * nx + i));
    let y_lines = CayleyLines::new(ny, nx, half, beta_y, |i, j| mask.is_wall(j * nx + i));
    (x_lines, y_lines)
}

fn transpose<T: Real>(src: &[Complex<T>], dst: &mut [Complex<T>], rows: usize, cols: usize) {
    // src is rows × cols row-major; dst becomes cols × rows row-major.
    dst.par_chunks_mut(rows * TRANSPOSE_BLOCK)
        .enumerate()
        .for_each(|(b, block)| {
            let c0 = b * TRANSPOSE_BLOCK;
            let width = block.len() / rows;
            for r in 0..rows {
                let src_row = &src[r * cols + c0..r * cols + c0 + width];
                for (dc, v) in src_row.iter().enumerate() {
                    block[dc * rows + r] = *v;
                }
            }
        });
}

fn sweep<T: Real>(psi: &mut [Complex<T>], hops: &[Complex<T>], lines: &CayleyLines<T>) -> bool {
    let n = lines.line_len();
    psi.par_chunks_mut(n)
        .zip(hops.par_chunks(n))
        .enumerate()
        .map(|(line, (row, h))| lines.solve(line, h, row))
        .reduce(|| true, |a, b| a && b)
}

fn apply_scalar<T: Real>(psi: &mut [Complex<T>], factors: &[Complex<T>]) {
    psi.par_iter_mut()
        .zip(factors.par_iter())
        .for_each(|(z, f)| *z *= *f);
}

fn apply_step<T: Real>(
    psi: &mut [Complex<T>],
    scratch: &mut [Complex<T>],
    links: &LinkPhases<T>,
    grid: &GridSpec<T>,
    x_lines: &CayleyLines<T>,
    y_lines: &CayleyLines<T>,
) -> bool {
    if let Some(s) = &links.scalar {
        apply_scalar(psi, &s[0]);
    }
    let mut ok = sweep(psi, &links.hop_x, x_lines);
    transpose(psi, scratch, grid.ny, grid.nx);
    ok &= sweep(scratch, &links.hop_y_t, y_lines);
    transpose(scratch, psi, grid.nx, grid.ny);
    ok &= sweep(psi, &links.hop_x, x_lines);
    if let Some(s) = &links.scalar {
        apply_scalar(psi, &s[1]);
    }
    ok
}

/// One step of `state` with precomputed `links` (no absorber damping).
///
/// Builds the Cayley factors on every call; use [`Propagator`] for runs.
pub fn step<T: Real>(
    state: &mut WaveField<T>,
    links: &LinkPhases<T>,
    mass: T,
) -> Result<(), SolverError> {
    let grid = state.grid;
    if links.dims() != (grid.nx, grid.ny) {
        return Err(SolverError::Mismatch(
            "links built for a different grid".into(),
        ));
    }
    let (x_lines, y_lines) = cayley_factors(&grid, &state.mask, mass);
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); grid.len()];
    let ok = apply_step(
        &mut state.psi,
        &mut scratch,
        links,
        &grid,
        &x_lines,
        &y_lines,
    );
    state.time += grid.dt;
    if !ok {
        return Err(SolverError::NonFinite {
            step: 1,
            time: state.time.to_f64_lossy(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Rect, Vec2};
    use crate::potentials::{
        apply_gauge, uniform_channel, AnalyticField, PolynomialGauge, ZeroField,
    };
    use crate::wavesolver::{gauge_rotate, init_packet};

    fn setup(nx: usize, ny: usize) -> (GridSpec<f64>, Arc<Mask<f64>>) {
        let g = GridSpec::<f64>::new(
            nx,
            ny,
            0.1,
            0.1,
            Vec2::new(-0.05 * nx as f64, -0.05 * ny as f64),
            0.005,
        )
        .unwrap();
        let mut m = Mask::open(&g);
        m.add_wall_rect(&g, Rect::new(Vec2::new(0.9, -0.3), Vec2::new(1.1, 0.2)));
        (g, Arc::new(m))
    }

    #[test]
    fn transpose_round_trip() {
        let (r, c) = (7, 37);
        let src: Vec<Complex<f64>> = (0..r * c)
            .map(|k| Complex::new(k as f64, -(k as f64)))
            .collect();
        let mut t = vec![Complex::new(0.0, 0.0); r * c];
        let mut back = t.clone();
        transpose(&src, &mut t, r, c);
        assert_eq!(t[3 * r + 5], src[5 * c + 3]);
        transpose(&t, &mut back, c, r);
        assert_eq!(back, src);
    }

    #[test]
    fn closed_box_is_unitary() {
        let (g, m) = setup(48, 40);
        let mut s = init_packet(
            g,
            m.clone(),
            Vec2::new(-1.2, 0.3),
            0.25,
            Vec2::new(3.0, 1.0),
        )
        .unwrap();
        let ch = uniform_channel(
            Rect::new(Vec2::new(-1.0, -1.0), Vec2::new(1.0, 0.5)),
            Vec2::new(0.8, -0.3),
        )
        .unwrap();
        let mut p = Propagator::new(g, m, Particle::electron(), Arc::new(ch), 0.0).unwrap();
        for _ in 0..200 {
            p.step(&mut s).unwrap();
        }
        assert!((s.norm_sqr() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn propagator_matches_free_step_function() {
        let (g, m) = setup(32, 32);
        let s0 = init_packet(g, m.clone(), Vec2::new(-0.6, 0.0), 0.2, Vec2::new(2.0, 0.0)).unwrap();
        let field = AnalyticField::new(
            |p: Vec2<f64>, _| 0.3 * p.y,
            |p, _| Vec2::new(0.0, 0.2 * p.x),
        );
        let mut a = s0.clone();
        let mut b = s0;
        let mut prop =
            Propagator::new(g, m.clone(), Particle::electron(), Arc::new(field), 0.0).unwrap();
        let field = AnalyticField::new(
            |p: Vec2<f64>, _| 0.3 * p.y,
            |p, _| Vec2::new(0.0, 0.2 * p.x),
        );
        for _ in 0..5 {
            prop.step(&mut a).unwrap();
            let links = LinkPhases::build(&field, &g, &m, -1.0, b.time).unwrap();
            step(&mut b, &links, 1.0).unwrap();
        }
        assert!(a
            .psi
            .iter()
            .zip(&b.psi)
            .all(|(x, y)| (x - y).norm() < 1e-14));
    }

    #[test]
    fn time_dependent_gauge_is_covariant() {
        let (g, m) = setup(40, 36);
        let s0 = init_packet(
            g,
            m.clone(),
            Vec2::new(-0.8, 0.2),
            0.25,
            Vec2::new(3.0, 0.5),
        )
        .unwrap();
        let field: Arc<dyn PotentialField<f64>> = Arc::new(
            uniform_channel(
                Rect::new(Vec2::new(-2.0, -1.0), Vec2::new(0.3, 0.4)),
                Vec2::new(0.5, 0.2),
            )
            .unwrap(),
        );
        let gauge =
            Arc::new(PolynomialGauge::random(21, 2, Vec2::zero(), 1.0, 0.05, true).unwrap());
        let mut a = s0.clone();
        let mut pa =
            Propagator::new(g, m.clone(), Particle::electron(), field.clone(), 0.0).unwrap();
        let mut b = s0;
        gauge_rotate(&mut b, gauge.as_ref());
        let mut pb = Propagator::new(g, m.clone(), Particle::electron(), field.clone(), 0.0)
            .unwrap()
            .with_gauge(gauge.clone());
        // Same gauge built through apply_gauge and the generic link path.
        let gf = Arc::new(apply_gauge(field.clone(), gauge.clone(), -1.0).unwrap());
        let mut c = b.clone();
        let mut pc = Propagator::new(g, m, Particle::electron(), gf, 0.0).unwrap();
        assert!(!pb.is_static() && !pc.is_static());
        for _ in 0..60 {
            pa.step(&mut a).unwrap();
            pb.step(&mut b).unwrap();
            pc.step(&mut c).unwrap();
        }
        assert!(a.max_density_deviation(&b) < 1e-12);
        assert!(b.max_density_deviation(&c) < 1e-12);
        let mut ar = a.clone();
        gauge_rotate(&mut ar, gauge.as_ref());
        let dev = ar
            .psi
            .iter()
            .zip(&b.psi)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-10, "dev = {dev}");
    }

    #[test]
    fn absorber_removes_probability_and_tracks_it() {
        let g = GridSpec::<f64>::new(64, 32, 0.1, 0.1, Vec2::new(-3.2, -1.6), 0.005).unwrap();
        let mut m = Mask::open(&g);
        m.add_absorber([0, 16, 0, 0], 60.0);
        let m = Arc::new(m);
        let mut s = init_packet(
            g,
            m.clone(),
            Vec2::new(-1.0, 0.0),
            0.35,
            Vec2::new(8.0, 0.0),
        )
        .unwrap();
        let mut p = Propagator::new(g, m, Particle::electron(), Arc::new(ZeroField), 0.0).unwrap();
        for _ in 0..300 {
            p.step(&mut s).unwrap();
        }
        let remaining = s.norm_sqr();
        assert!(remaining < 0.5, "remaining {remaining}");
        assert!((remaining + p.absorbed() - 1.0).abs() < 1e-10);
    }
}
