use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use super::build::{build, Setup};
use super::config::ScenarioConfig;
use super::ScenarioError;
use crate::analysis::{fringe_extract, FringeReport, Profile};
use crate::potentials::GaugeFunction;
use crate::wavesolver::{
    dress_packet, edge_current_x, gauge_rotate, init_packet, lattice_carrier, Propagator, WaveField,
};
use crate::Real;

/// Crossed flux below this share of the surviving probability marks the run
/// as trapped.
const TRAPPED_FRACTION: f64 = 0.5;

/// Fraction of the screen used for fringe extraction when no window is set.
const DEFAULT_WINDOW_FRACTION: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The requested share of the surviving probability crossed the screen.
    Flux,
    MaxSteps,
    FixedSteps,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormSample {
    pub step: u64,
    pub time: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub config_hash: String,
    pub gauge: Option<String>,
    pub steps: u64,
    pub dt: f64,
    pub final_time: f64,
    pub dt_over_dx2: f64,
    pub grid: [usize; 2],
    pub screen_x: f64,
    pub screen_distance: f64,
    pub window: [f64; 2],
    pub norm_history: Vec<NormSample>,
    pub absorbed: f64,
    /// Absorbed at or upstream of the screen column.
    pub absorbed_upstream: f64,
    /// Probability that crossed the screen (net, time-integrated).
    pub crossed: f64,
    pub stopped_by: StopReason,
    /// Screen rows whose net integrated flux was negative and clamped to zero.
    pub clamped_rows: usize,
    pub warnings: Vec<String>,
    /// Left out of serialized reports so they stay byte-identical across runs.
    #[serde(skip)]
    pub wall_seconds: f64,
}

/// Screen profile of one run.
#[derive(Debug, Clone)]
pub struct SimulationResult<T> {
    /// Time-integrated normal current through the screen column per row.
    pub profile: Profile<T>,
    pub metadata: RunMetadata,
}

impl<T: Real> SimulationResult<T> {
    pub fn window(&self) -> (T, T) {
        (
            T::lit(self.metadata.window[0]),
            T::lit(self.metadata.window[1]),
        )
    }

    pub fn fringes(&self) -> Result<FringeReport<T>, ScenarioError> {
        Ok(fringe_extract(&self.profile, self.window())?)
    }
}

/// Per-run overrides used by audits and the CLI.
/// Callback receiving `(step, state)` during a run.
pub type Observer<'a, T> = dyn FnMut(u64, &WaveField<T>) -> Result<(), ScenarioError> + 'a;

pub struct RunOptions<'a, T: Real> {
    /// Start in this gauge: ψ₀ is rotated and the potentials transformed.
    pub gauge: Option<(String, Arc<dyn GaugeFunction<T>>)>,
    /// Run exactly this many steps instead of the flux stopping rule.
    pub fixed_steps: Option<u64>,
    /// Called with the state after every `observe_every` steps (and at step 0).
    pub observe_every: u64,
    pub observer: Option<&'a mut Observer<'a, T>>,
}

impl<T: Real> Default for RunOptions<'_, T> {
    fn default() -> Self {
        Self {
            gauge: None,
            fixed_steps: None,
            observe_every: 0,
            observer: None,
        }
    }
}

/// Builds and propagates a scenario until the packet has crossed the screen.
pub fn run_scenario<T: Real>(
    config: &ScenarioConfig,
) -> Result<SimulationResult<T>, ScenarioError> {
    let setup = build::<T>(config)?;
    run_setup(&setup, RunOptions::default())
}

pub fn run_setup<T: Real>(
    setup: &Setup<T>,
    mut opts: RunOptions<'_, T>,
) -> Result<SimulationResult<T>, ScenarioError> {
    let started = Instant::now();
    let cfg = &setup.config;
    let grid = setup.grid;
    let carrier = lattice_carrier(&grid, setup.k0())?;
    let mut state = init_packet(
        grid,
        setup.mask.clone(),
        setup.packet_center(),
        T::lit(cfg.packet.sigma),
        carrier,
    )?;
    let mut prop = Propagator::new(
        grid,
        setup.mask.clone(),
        setup.particle,
        setup.field.clone(),
        T::zero(),
    )?;
    let c = setup.packet_center();
    dress_packet(
        &mut state,
        prop.links(),
        (grid.column_of(c.x), grid.row_of(c.y)),
    );
    let mut gauge_label = None;
    if let Some((label, g)) = opts.gauge.take() {
        gauge_rotate(&mut state, g.as_ref());
        prop = prop.with_gauge(g);
        gauge_label = Some(label);
    }

    let is = setup.layout.screen_col;
    let (nx, ny) = (grid.nx, grid.ny);
    let mass = setup.particle.mass;
    let dt = grid.dt;
    let mut flux = vec![T::zero(); ny];
    let mut crossed = T::zero();
    let mut norm_history = vec![NormSample {
        step: 0,
        time: 0.0,
        norm: state.norm_sqr().to_f64_lossy(),
    }];
    let every = opts.observe_every;
    if every > 0 {
        if let Some(obs) = opts.observer.as_mut() {
            obs(0, &state)?;
        }
    }
    let limit = opts.fixed_steps.unwrap_or(cfg.run.max_steps);
    let stop_fraction = T::lit(cfg.run.stop_fraction);
    let mut stopped_by = if opts.fixed_steps.is_some() {
        StopReason::FixedSteps
    } else {
        StopReason::MaxSteps
    };
    let mut steps = 0;
    while steps < limit {
        prop.step(&mut state)?;
        steps += 1;
        let mut row_sum = T::zero();
        for (j, f) in flux.iter_mut().enumerate() {
            let idx = j * nx + is;
            let hop = prop.hop_x_at(is, j, state.time)?;
            let jx = edge_current_x(state.psi[idx], state.psi[idx + 1], hop, mass, grid.dx) * dt;
            *f += jx;
            row_sum += jx;
        }
        crossed += row_sum * grid.dy;
        if steps % cfg.run.norm_every == 0 {
            norm_history.push(NormSample {
                step: steps,
                time: state.time.to_f64_lossy(),
                norm: state.norm_sqr().to_f64_lossy(),
            });
        }
        if every > 0 && steps % every == 0 {
            if let Some(obs) = opts.observer.as_mut() {
                obs(steps, &state)?;
            }
        }
        if opts.fixed_steps.is_none() {
            let surviving = T::one() - prop.absorbed_before_column(is + 1);
            if crossed >= stop_fraction * surviving {
                stopped_by = StopReason::Flux;
                break;
            }
        }
    }
    if norm_history.last().is_none_or(|s| s.step != steps) {
        norm_history.push(NormSample {
            step: steps,
            time: state.time.to_f64_lossy(),
            norm: state.norm_sqr().to_f64_lossy(),
        });
    }

    let absorbed_upstream = prop.absorbed_before_column(is + 1).to_f64_lossy();
    let crossed_f = crossed.to_f64_lossy();
    let mut warnings = setup.warnings.clone();
    if stopped_by == StopReason::MaxSteps {
        warnings.push(format!("stopping rule not met within {steps} steps"));
    }
    if crossed_f < TRAPPED_FRACTION * (1.0 - absorbed_upstream) {
        warnings.push(format!(
            "trapped: only {crossed_f:.3} of the surviving {:.3} crossed the screen",
            1.0 - absorbed_upstream
        ));
    }
    let clamped_rows = flux.iter().filter(|f| **f < T::zero()).count();
    let intensity = flux.into_iter().map(|f| f.max(T::zero())).collect();
    let ys = (0..ny).map(|j| grid.node(is, j).y).collect();
    let profile = Profile::new(ys, intensity)?;
    let window = match cfg.analysis.window {
        Some(w) => w,
        None => {
            let (lo, hi) = profile.central_window(T::lit(DEFAULT_WINDOW_FRACTION));
            [lo.to_f64_lossy(), hi.to_f64_lossy()]
        }
    };
    let metadata = RunMetadata {
        config_hash: cfg.hash(),
        gauge: gauge_label,
        steps,
        dt: dt.to_f64_lossy(),
        final_time: state.time.to_f64_lossy(),
        dt_over_dx2: grid.stability_ratio().to_f64_lossy(),
        grid: [nx, ny],
        screen_x: grid.node(is, 0).x.to_f64_lossy(),
        screen_distance: setup.screen_distance().to_f64_lossy(),
        window,
        norm_history,
        absorbed: prop.absorbed().to_f64_lossy(),
        absorbed_upstream,
        crossed: crossed_f,
        stopped_by,
        clamped_rows,
        warnings,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(SimulationResult { profile, metadata })
}
