use std::path::Path;
use std::sync::Arc;

use super::config::{PotentialSpec, ScenarioConfig, ScenarioKind};
use super::ScenarioError;
use crate::eikonal::RayPath;
use crate::geom::{Event, Rect, Vec2};
use crate::potentials::{
    infinite_solenoid, uniform_channel, Composite, PotentialField, Worldline, WorldlineField,
    ZeroField,
};
use crate::wavesolver::{GridSpec, LinkPhases, Mask};
use crate::{Particle, Real};

/// Open plaquettes may carry at most this much flux from scenario fields.
const ENCLOSURE_TOLERANCE: f64 = 1e-9;

/// Node-index geometry of the barrier, slits and screen.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    /// Barrier columns `[start, end)`.
    pub barrier_cols: Option<(usize, usize)>,
    /// Row nearest y = 0.
    pub center_row: usize,
    /// Open rows `[lo, hi]` of the lower and upper slit.
    pub slit_rows: Option<[(usize, usize); 2]>,
    pub screen_col: usize,
    /// Lower and upper slit centers at mid-barrier.
    pub slit_centers: Option<[Vec2<f64>; 2]>,
    /// Rectangles carrying the channel potential (lower, upper).
    pub channel_rects: Option<[Rect<f64>; 2]>,
    pub solenoid_center: Option<Vec2<f64>>,
}

impl Layout {
    /// Channel length sampled along a slit center line.
    pub fn channel_length(&self) -> Option<f64> {
        self.channel_rects.map(|r| r[0].width())
    }
}

/// Everything needed to propagate one scenario.
pub struct Setup<T: Real> {
    pub config: ScenarioConfig,
    pub grid: GridSpec<T>,
    pub mask: Arc<Mask<T>>,
    pub particle: Particle<T>,
    pub field: Arc<dyn PotentialField<T>>,
    pub layout: Layout,
    pub warnings: Vec<String>,
}

impl<T: Real> Setup<T> {
    pub fn packet_center(&self) -> Vec2<T> {
        let c = self.config.packet.center;
        Vec2::new(T::lit(c[0]), T::lit(c[1]))
    }

    pub fn k0(&self) -> Vec2<T> {
        let k = self.config.packet.k0;
        Vec2::new(T::lit(k[0]), T::lit(k[1]))
    }

    /// Kinetic energy `|k0|²/2m` of the packet carrier.
    pub fn energy(&self) -> T {
        self.k0().norm_sqr() / (self.particle.mass + self.particle.mass)
    }

    /// Point on the screen axis where both arm paths end.
    pub fn screen_point(&self) -> Vec2<T> {
        self.grid
            .node(self.layout.screen_col, self.layout.center_row)
    }

    /// Straight-segment paths from the packet center through the lower and
    /// upper slit to the screen axis.
    pub fn arm_paths(&self) -> Option<[RayPath<T>; 2]> {
        let (b0, b1) = self.layout.barrier_cols?;
        let centers = self.layout.slit_centers?;
        let (x_in, x_out) = (
            self.grid.node(b0, 0).x - self.grid.dx,
            self.grid.node(b1 - 1, 0).x + self.grid.dx,
        );
        let src = self.packet_center();
        let end = self.screen_point();
        let arm = |y: f64| {
            let y = T::lit(y);
            RayPath::new(vec![src, Vec2::new(x_in, y), Vec2::new(x_out, y), end]).ok()
        };
        Some([arm(centers[0].y)?, arm(centers[1].y)?])
    }

    /// Point inside the lower (`upper = false`) or upper channel / slit.
    pub fn slit_point(&self, upper: bool) -> Option<Vec2<T>> {
        self.layout
            .slit_centers
            .map(|c| c[usize::from(upper)].cast())
    }

    /// Distance from the barrier exit (last barrier column) to the screen column.
    pub fn screen_distance(&self) -> T {
        match self.layout.barrier_cols {
            Some((_, b1)) => {
                self.grid.node(self.layout.screen_col, 0).x - self.grid.node(b1 - 1, 0).x
            }
            None => T::lit(self.config.screen_distance()),
        }
    }

    pub fn slit_separation(&self) -> Option<T> {
        self.layout.slit_centers.map(|c| T::lit(c[1].y - c[0].y))
    }
}

fn config_err(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Config(msg.into())
}

fn invariant(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invariant(msg.into())
}

fn check_finite(name: &str, values: &[f64]) -> Result<(), ScenarioError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be finite")))
    }
}

fn validate_sections(c: &ScenarioConfig) -> Result<(), ScenarioError> {
    let g = &c.grid;
    check_finite(
        "grid",
        &[g.dx, g.dy, g.origin[0], g.origin[1], g.dt.unwrap_or(1.0)],
    )?;
    check_finite(
        "packet",
        &[
            c.packet.center[0],
            c.packet.center[1],
            c.packet.sigma,
            c.packet.k0[0],
            c.packet.k0[1],
        ],
    )?;
    let geo = &c.geometry;
    check_finite(
        "geometry",
        &[
            geo.barrier_x,
            geo.barrier_thickness,
            geo.slit_separation,
            geo.slit_width,
            geo.screen_x,
        ],
    )?;
    if !(c.particle.mass > 0.0) || !c.particle.charge.is_finite() {
        return Err(config_err(
            "particle.mass must be positive and particle.charge finite",
        ));
    }
    if !(c.packet.sigma > 0.0) {
        return Err(config_err("packet.sigma must be positive"));
    }
    if g.dt.is_some_and(|dt| !(dt > 0.0)) {
        return Err(config_err("grid.dt must be positive"));
    }
    if !(c.run.stop_fraction > 0.0 && c.run.stop_fraction <= 1.0) {
        return Err(config_err("run.stop_fraction must lie in (0, 1]"));
    }
    if c.run.max_steps == 0 || c.run.norm_every == 0 {
        return Err(config_err(
            "run.max_steps and run.norm_every must be at least 1",
        ));
    }
    let a = &geo.absorber;
    check_finite(
        "geometry.absorber",
        &[a.left, a.right, a.bottom, a.top, a.strength],
    )?;
    if [a.left, a.right, a.bottom, a.top, a.strength]
        .iter()
        .any(|&v| v < 0.0)
    {
        return Err(config_err(
            "absorber widths and strength must be non-negative",
        ));
    }
    if let Some([lo, hi]) = c.analysis.window {
        if !(lo < hi) {
            return Err(config_err("analysis.window must satisfy lo < hi"));
        }
    }
    match c.kind {
        ScenarioKind::AbSolenoid if c.solenoid.is_none() => {
            return Err(config_err(
                "kind = \"ab_solenoid\" requires a [solenoid] table",
            ))
        }
        ScenarioKind::ToroidalChannel if c.channel.is_none() => {
            return Err(config_err(
                "kind = \"toroidal_channel\" requires a [channel] table",
            ))
        }
        _ => {}
    }
    if c.kind != ScenarioKind::AbSolenoid && c.solenoid.is_some() {
        return Err(config_err(
            "[solenoid] is only valid for kind = \"ab_solenoid\"",
        ));
    }
    if c.kind != ScenarioKind::ToroidalChannel && c.channel.is_some() {
        return Err(config_err(
            "[channel] is only valid for kind = \"toroidal_channel\"",
        ));
    }
    if let Some(s) = &c.solenoid {
        check_finite("solenoid.flux", &[s.flux])?;
    }
    if let Some(ch) = &c.channel {
        check_finite("channel", &[ch.a_lower, ch.a_upper])?;
    }
    if c.kind.has_barrier() {
        if !(geo.barrier_thickness > 0.0) || !(geo.slit_width > 0.0) {
            return Err(config_err(
                "barrier_thickness and slit_width must be positive",
            ));
        }
        if !(geo.slit_separation > geo.slit_width) {
            return Err(config_err("slit_separation must exceed slit_width"));
        }
    }
    Ok(())
}

fn load_worldline<T: Real>(path: &Path, charge: f64) -> Result<Worldline<T>, ScenarioError> {
    let file =
        std::fs::File::open(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut samples = Vec::new();
    for rec in reader.deserialize::<(f64, f64, f64, f64)>() {
        let (t, x, y, z) = rec.map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        samples.push(Event::new(T::lit(t), T::lit(x), T::lit(y), T::lit(z)));
    }
    Worldline::new(samples, T::lit(charge))
        .map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn build_potential<T: Real>(
    spec: &PotentialSpec,
    base_dir: Option<&Path>,
) -> Result<Box<dyn PotentialField<T>>, ScenarioError> {
    let v = |a: [f64; 2]| Vec2::new(T::lit(a[0]), T::lit(a[1]));
    Ok(match spec {
        PotentialSpec::UniformChannel { min, max, a0 } => Box::new(
            uniform_channel(Rect::new(v(*min), v(*max)), v(*a0))
                .map_err(|e| config_err(e.to_string()))?,
        ),
        PotentialSpec::Solenoid { center, flux } => Box::new(
            infinite_solenoid(v(*center), T::lit(*flux)).map_err(|e| config_err(e.to_string()))?,
        ),
        PotentialSpec::Worldlines { files, charges } => {
            if files.len() != charges.len() {
                return Err(config_err("worldlines: files and charges differ in length"));
            }
            let mut lines = Vec::with_capacity(files.len());
            for (f, &q) in files.iter().zip(charges) {
                let path = match base_dir {
                    Some(d) if f.is_relative() => d.join(f),
                    _ => f.clone(),
                };
                lines.push(load_worldline::<T>(&path, q)?);
            }
            Box::new(WorldlineField::new(lines))
        }
        PotentialSpec::Composite { parts } => Box::new(Composite::new(
            parts
                .iter()
                .map(|p| build_potential(p, base_dir))
                .collect::<Result<Vec<_>, _>>()?,
        )),
    })
}

/// Grid, mask, fields and layout of a scenario, with all invariants checked.
pub fn build<T: Real>(config: &ScenarioConfig) -> Result<Setup<T>, ScenarioError> {
    validate_sections(config)?;
    let c = config;
    let g = &c.grid;
    let lit = T::lit;
    let mut warnings = Vec::new();
    let grid = GridSpec::new(
        g.nx,
        g.ny,
        lit(g.dx),
        lit(g.dy),
        Vec2::new(lit(g.origin[0]), lit(g.origin[1])),
        lit(1.0),
    )
    .map_err(|e| config_err(e.to_string()))?;
    let x_of = |i: usize| g.origin[0] + i as f64 * g.dx;
    let y_of = |j: usize| g.origin[1] + j as f64 * g.dy;
    let (x_max, y_max) = (x_of(g.nx - 1), y_of(g.ny - 1));

    let geo = &c.geometry;
    if !(geo.screen_x > g.origin[0] && geo.screen_x < x_max) {
        return Err(invariant(format!(
            "screen_x = {} lies outside the grid",
            geo.screen_x
        )));
    }
    if c.kind.has_barrier() && geo.screen_x <= c.barrier_exit() {
        return Err(invariant(format!(
            "screen strictly downstream of barrier: screen_x = {} must exceed barrier exit {}",
            geo.screen_x,
            c.barrier_exit()
        )));
    }
    if c.packet.center[0] >= geo.screen_x {
        return Err(invariant("packet center must lie upstream of the screen"));
    }
    if !(0.0 > g.origin[1] && 0.0 < y_max) {
        return Err(invariant("the axis y = 0 must lie inside the grid"));
    }
    let center_row = ((0.0 - g.origin[1]) / g.dy).round() as usize;
    let screen_col = ((geo.screen_x - g.origin[0]) / g.dx).round() as usize;
    if screen_col + 1 >= g.nx {
        return Err(invariant(
            "screen column needs a downstream neighbor inside the grid",
        ));
    }

    let mut mask = Mask::open(&grid);
    let mut layout = Layout {
        barrier_cols: None,
        center_row,
        slit_rows: None,
        screen_col,
        slit_centers: None,
        channel_rects: None,
        solenoid_center: None,
    };
    if c.kind.has_barrier() {
        if c.packet.center[0] >= geo.barrier_x {
            return Err(invariant("packet center must lie upstream of the barrier"));
        }
        let b0 = ((geo.barrier_x - g.origin[0]) / g.dx - 1e-9)
            .ceil()
            .max(0.0) as usize;
        let nb = (geo.barrier_thickness / g.dx).round() as usize;
        let b1 = b0 + nb;
        if nb < 2 {
            return Err(invariant("barrier must span at least two grid columns"));
        }
        if geo.barrier_x < g.origin[0] || b1 > screen_col {
            return Err(invariant(
                "barrier must lie inside the grid and upstream of the screen column",
            ));
        }
        let off = (geo.slit_separation / (2.0 * g.dy)).round() as usize;
        let half = ((geo.slit_width / (2.0 * g.dy) - 1e-9).ceil() as usize).saturating_sub(1);
        if off < half + 2 {
            return Err(invariant("slits overlap at this resolution"));
        }
        if center_row < off + half + 2 || center_row + off + half + 2 >= g.ny {
            return Err(invariant(
                "slits must lie inside the grid with wall rows beyond them",
            ));
        }
        let rows = [
            (center_row - off - half, center_row - off + half),
            (center_row + off - half, center_row + off + half),
        ];
        for j in 0..g.ny {
            if rows.iter().any(|&(lo, hi)| j >= lo && j <= hi) {
                continue;
            }
            for i in b0..b1 {
                mask.set_wall(i, j);
            }
        }
        let x_mid = 0.5 * (x_of(b0) + x_of(b1 - 1));
        layout.barrier_cols = Some((b0, b1));
        layout.slit_rows = Some(rows);
        layout.slit_centers = Some([
            Vec2::new(x_mid, y_of(center_row - off)),
            Vec2::new(x_mid, y_of(center_row + off)),
        ]);
        let rect = |(lo, hi): (usize, usize)| {
            Rect::new(
                Vec2::new(x_of(b0) - 0.5 * g.dx, y_of(lo - 1) - 0.5 * g.dy),
                Vec2::new(x_of(b1 - 1) + 0.5 * g.dx, y_of(hi + 1) + 0.5 * g.dy),
            )
        };
        layout.channel_rects = Some([rect(rows[0]), rect(rows[1])]);
        // Between two wall columns and two wall rows of the central pillar.
        let mid = b0 + nb / 2;
        layout.solenoid_center = Some(Vec2::new(
            x_of(mid) - 0.5 * g.dx,
            y_of(center_row) + 0.5 * g.dy,
        ));
    }
    let cells = |w: f64, h: f64| (w / h).round() as usize;
    let ab = &geo.absorber;
    mask.add_absorber(
        [
            cells(ab.left, g.dx),
            cells(ab.right, g.dx),
            cells(ab.bottom, g.dy),
            cells(ab.top, g.dy),
        ],
        lit(ab.strength),
    );
    if screen_col + cells(ab.right, g.dx) >= g.nx {
        warnings.push("screen column lies inside the right absorber".into());
    }

    // Scenario-owned fields must not leak flux into open plaquettes.
    let mut parts: Vec<Box<dyn PotentialField<T>>> = Vec::new();
    let v = |p: Vec2<f64>| p.cast::<T>();
    match c.kind {
        ScenarioKind::AbSolenoid => {
            let center = layout.solenoid_center.expect("barrier layout");
            parts.push(Box::new(
                infinite_solenoid(v(center), lit(c.flux()))
                    .map_err(|e| config_err(e.to_string()))?,
            ));
        }
        ScenarioKind::ToroidalChannel => {
            let rects = layout.channel_rects.expect("barrier layout");
            let (a_lo, a_up) = c.channel_strengths();
            for (r, a) in rects.iter().zip([a_lo, a_up]) {
                if a != 0.0 {
                    let rect = Rect::new(v(r.min), v(r.max));
                    parts.push(Box::new(
                        uniform_channel(rect, Vec2::new(lit(a), T::zero()))
                            .map_err(|e| config_err(e.to_string()))?,
                    ));
                }
            }
        }
        _ => {}
    }
    if !parts.is_empty() {
        let own = Composite::new(parts);
        check_enclosed(&own, &grid, &mask, lit(c.particle.charge))?;
        parts = vec![Box::new(own)];
    }
    for spec in &c.potentials {
        parts.push(build_potential(spec, c.base_dir.as_deref())?);
    }
    let field: Arc<dyn PotentialField<T>> = match parts.len() {
        0 => Arc::new(ZeroField),
        1 => Arc::from(parts.pop().expect("one part")),
        _ => Arc::new(Composite::new(parts)),
    };

    let particle = Particle::new(lit(c.particle.mass), lit(c.particle.charge));
    let mut dt = c.time_step();
    if c.grid.dt.is_none() && !c.potentials.is_empty() {
        let mut max_qphi: f64 = 0.0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                if let Ok(p) = field.potentials(grid.node(i, j), T::zero()) {
                    max_qphi = max_qphi.max((p.phi * particle.charge).abs().to_f64_lossy());
                }
            }
        }
        if max_qphi > 0.0 {
            dt = dt.min(0.1 / max_qphi);
        }
    }
    let grid = GridSpec {
        dt: lit(dt),
        ..grid
    };
    let ratio = grid.stability_ratio().to_f64_lossy();
    if ratio > 0.5 {
        warnings.push(format!("dt/dx² = {ratio:.3} exceeds 0.5; the Cayley steps stay unitary but high-k phase errors grow"));
    }
    Ok(Setup {
        config: c.clone(),
        grid,
        mask: Arc::new(mask),
        particle,
        field,
        layout,
        warnings,
    })
}

pub(super) fn check_enclosed<T: Real>(
    field: &dyn PotentialField<T>,
    grid: &GridSpec<T>,
    mask: &Mask<T>,
    charge: T,
) -> Result<(), ScenarioError> {
    let links = LinkPhases::build(field, grid, mask, charge, T::zero())
        .map_err(|e| invariant(format!("solenoid/channel field: {e}")))?;
    let tol = T::lit(ENCLOSURE_TOLERANCE) * charge.abs().max(T::one());
    for j in 0..grid.ny - 1 {
        for i in 0..grid.nx - 1 {
            let corners = [
                grid.index(i, j),
                grid.index(i + 1, j),
                grid.index(i, j + 1),
                grid.index(i + 1, j + 1),
            ];
            if corners.iter().any(|&k| mask.is_wall(k)) {
                continue;
            }
            let p = links.plaquette(i, j);
            if p.abs() > tol {
                let at = grid.node(i, j);
                return Err(invariant(format!(
                    "solenoid/channel fully enclosed by wall mask: open plaquette at ({}, {}) carries flux {}",
                    at.x,
                    at.y,
                    (p / charge).to_f64_lossy()
                )));
            }
        }
    }
    Ok(())
}
