use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::build::{build, Setup};
use super::config::{GaugeSpec, ScenarioConfig};
use super::effect::PaperTrack;
use super::run::{run_setup, RunOptions, SimulationResult};
use super::ScenarioError;
use crate::analysis::{compare_profiles, ProfileComparison};
use crate::eikonal::{ab_phase_difference, fixed_gauge_wavevector};
use crate::potentials::{apply_gauge, GaugeFunction};
use crate::Real;

/// Node-wise |ψ|² deviation allowed between gauge branches.
pub const DENSITY_TOLERANCE: f64 = 1e-8;
/// Deviation allowed between unit-normalized screen profiles.
pub const PROFILE_TOLERANCE: f64 = 1e-6;
/// Closed-loop eikonal phases must agree this closely across gauges.
pub const LOOP_TOLERANCE: f64 = 1e-9;

/// Snapshot interval used when the caller passes 0.
const DEFAULT_SNAPSHOT_EVERY: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnapshotDeviation {
    pub step: u64,
    pub time: f64,
    pub max_density_deviation: f64,
}

/// Fixed-gauge wavevector in one gauge next to the value that pure
/// substitution predicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PaperTrackAudit {
    pub point: [f64; 2],
    pub k: [f64; 4],
    pub wavelength: f64,
    pub spacing: Option<f64>,
    /// `k − k_identity`.
    pub delta: [f64; 4],
    /// `(∂tG(x) − ∂tG(src), −(∇G(x) − ∇G(src)), 0)`.
    pub predicted_delta: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditBranch {
    pub label: String,
    pub gauge: GaugeSpec,
    pub steps: Option<u64>,
    /// Set when propagation or analysis of this branch failed.
    pub failure: Option<String>,
    pub snapshots: Vec<SnapshotDeviation>,
    pub max_density_deviation: Option<f64>,
    pub profile: Option<ProfileComparison<f64>>,
    pub paper_track: Option<PaperTrackAudit>,
    /// `S_lower − S_upper` along the interferometer arms at t = 0.
    pub loop_phase: Option<f64>,
    /// The fixed-energy loop phase is gauge invariant only for static gauges;
    /// a time-dependent G shifts the local kinetic energy through ∂G/∂t.
    pub time_dependent: bool,
}

impl AuditBranch {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
            && self
                .max_density_deviation
                .is_some_and(|d| d <= DENSITY_TOLERANCE)
            && self
                .profile
                .is_some_and(|p| p.max_abs_dev <= PROFILE_TOLERANCE)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub config_hash: String,
    pub reference_steps: u64,
    pub snapshot_every: u64,
    pub reference_paper_track: PaperTrack,
    pub reference_loop_phase: Option<f64>,
    pub branches: Vec<AuditBranch>,
    pub max_density_deviation: f64,
    pub max_profile_deviation: f64,
    /// Over static gauges only.
    pub max_loop_phase_deviation: Option<f64>,
    pub failures: usize,
    pub passed: bool,
}

type Densities<T> = Vec<(u64, f64, Vec<T>)>;

fn record_reference<T: Real>(
    setup: &Setup<T>,
    every: u64,
) -> Result<(SimulationResult<T>, Densities<T>), ScenarioError> {
    let mut snaps = Vec::new();
    let mut obs = |step: u64, s: &crate::wavesolver::WaveField<T>| {
        snaps.push((step, s.time.to_f64_lossy(), s.density()));
        Ok(())
    };
    let opts = RunOptions {
        observe_every: every,
        observer: Some(&mut obs),
        ..RunOptions::default()
    };
    let result = run_setup(setup, opts)?;
    Ok((result, snaps))
}

fn run_branch<T: Real>(
    setup: &Setup<T>,
    spec: &GaugeSpec,
    gauge: Arc<dyn GaugeFunction<T>>,
    steps: u64,
    every: u64,
    reference: &Densities<T>,
) -> Result<(SimulationResult<T>, Vec<SnapshotDeviation>), ScenarioError> {
    let mut devs = Vec::new();
    let mut k = 0;
    let mut obs = |step: u64, s: &crate::wavesolver::WaveField<T>| {
        while k < reference.len() && reference[k].0 < step {
            k += 1;
        }
        if let Some((rs, time, rho)) = reference.get(k).filter(|r| r.0 == step) {
            let dev = s
                .psi
                .iter()
                .zip(rho)
                .map(|(z, r)| (z.norm_sqr() - *r).abs())
                .fold(T::zero(), T::max);
            devs.push(SnapshotDeviation {
                step: *rs,
                time: *time,
                max_density_deviation: dev.to_f64_lossy(),
            });
        }
        Ok(())
    };
    let opts = RunOptions {
        gauge: Some((spec.label(), gauge)),
        fixed_steps: Some(steps),
        observe_every: every,
        observer: Some(&mut obs),
    };
    let result = run_setup(setup, opts)?;
    Ok((result, devs))
}

fn paper_track_in_gauge<T: Real>(
    setup: &Setup<T>,
    gauge: &Arc<dyn GaugeFunction<T>>,
    reference: &PaperTrack,
) -> Result<PaperTrackAudit, ScenarioError> {
    let q = setup.particle.charge;
    let gauged = apply_gauge(setup.field.clone(), gauge.clone(), q)
        .map_err(|e| ScenarioError::Config(format!("gauge: {e}")))?;
    let src = setup.packet_center();
    let x = crate::geom::Vec2::new(T::lit(reference.point[0]), T::lit(reference.point[1]));
    let k = setup.k0();
    let k0 = [setup.energy(), k.x, k.y, T::zero()];
    let kv = fixed_gauge_wavevector(&gauged, src, x, k0, q, T::zero())
        .map_err(|e| ScenarioError::Numerical(format!("paper-track wavevector: {e}")))?;
    let kv = kv.map(|c| c.to_f64_lossy());
    let (gx, gs) = (gauge.gradient(x, T::zero()), gauge.gradient(src, T::zero()));
    let (tx, ts) = (
        gauge.time_derivative(x, T::zero()),
        gauge.time_derivative(src, T::zero()),
    );
    let predicted_delta = [
        (tx - ts).to_f64_lossy(),
        -(gx.x - gs.x).to_f64_lossy(),
        -(gx.y - gs.y).to_f64_lossy(),
        0.0,
    ];
    let wavelength = std::f64::consts::TAU / (kv[1] * kv[1] + kv[2] * kv[2] + kv[3] * kv[3]).sqrt();
    let spacing = setup
        .slit_separation()
        .map(|d| wavelength * setup.screen_distance().to_f64_lossy() / d.to_f64_lossy());
    Ok(PaperTrackAudit {
        point: reference.point,
        k: kv,
        wavelength,
        spacing,
        delta: std::array::from_fn(|i| kv[i] - reference.k[i]),
        predicted_delta,
    })
}

fn loop_phase_in_gauge<T: Real>(
    setup: &Setup<T>,
    gauge: Option<&Arc<dyn GaugeFunction<T>>>,
) -> Result<Option<f64>, ScenarioError> {
    let Some([lower, upper]) = setup.arm_paths() else {
        return Ok(None);
    };
    let err = |e: crate::eikonal::EikonalError| {
        ScenarioError::Numerical(format!("eikonal loop phase: {e}"))
    };
    let e = setup.energy();
    let ds = match gauge {
        Some(g) => {
            let gauged = apply_gauge(setup.field.clone(), g.clone(), setup.particle.charge)
                .map_err(|e| ScenarioError::Config(format!("gauge: {e}")))?;
            ab_phase_difference(&lower, &upper, &gauged, e, setup.particle).map_err(err)?
        }
        None => ab_phase_difference(&lower, &upper, setup.field.as_ref(), e, setup.particle)
            .map_err(err)?,
    };
    Ok(Some(ds.to_f64_lossy()))
}

/// Runs `config` once per gauge with transformed potentials and initial state
/// and compares every branch with the identity run.
///
/// The identity run uses the flux stopping rule; the other branches run the
/// same number of steps. Identity entries reuse the reference run. A branch
/// that fails is reported with `failure` set and the audit continues.
pub fn gauge_audit<T: Real>(
    config: &ScenarioConfig,
    gauges: &[GaugeSpec],
    snapshot_every: u64,
) -> Result<AuditReport, ScenarioError> {
    if !gauges.iter().any(|g| !g.is_identity()) {
        return Err(ScenarioError::Config(
            "gauge audit needs at least one non-identity gauge".into(),
        ));
    }
    let built = gauges
        .iter()
        .map(|g| g.build::<T>())
        .collect::<Result<Vec<_>, _>>()?;
    let every = if snapshot_every == 0 {
        DEFAULT_SNAPSHOT_EVERY
    } else {
        snapshot_every
    };
    let setup = build::<T>(config)?;
    let reference_paper_track = PaperTrack::evaluate(&setup)?;
    let reference_loop_phase = loop_phase_in_gauge(&setup, None)?;
    let (reference, densities) = record_reference(&setup, every)?;
    let steps = reference.metadata.steps;

    // Branches are independent; rayon keeps their order.
    let branches: Vec<AuditBranch> = gauges
        .par_iter()
        .zip(built)
        .map(|(spec, gauge)| {
            let mut branch = AuditBranch {
                label: spec.label(),
                gauge: spec.clone(),
                steps: None,
                failure: None,
                snapshots: Vec::new(),
                max_density_deviation: None,
                profile: None,
                paper_track: None,
                loop_phase: None,
                time_dependent: gauge.is_time_dependent(),
            };
            match paper_track_in_gauge(&setup, &gauge, &reference_paper_track) {
                Ok(p) => branch.paper_track = Some(p),
                Err(e) => branch.failure = Some(e.to_string()),
            }
            match loop_phase_in_gauge(&setup, Some(&gauge)) {
                Ok(p) => branch.loop_phase = p,
                Err(e) => branch.failure = Some(e.to_string()),
            }
            let outcome = if spec.is_identity() {
                let devs = densities
                    .iter()
                    .map(|(s, t, _)| SnapshotDeviation {
                        step: *s,
                        time: *t,
                        max_density_deviation: 0.0,
                    })
                    .collect();
                Ok((reference.clone(), devs))
            } else {
                run_branch(&setup, spec, gauge, steps, every, &densities)
            };
            match outcome {
                Ok((result, devs)) => {
                    branch.steps = Some(result.metadata.steps);
                    branch.max_density_deviation = devs
                        .iter()
                        .map(|d| d.max_density_deviation)
                        .reduce(f64::max);
                    branch.snapshots = devs;
                    match compare_profiles(&reference.profile, &result.profile) {
                        Ok(c) => {
                            branch.profile = Some(ProfileComparison {
                                max_abs_dev: c.max_abs_dev.to_f64_lossy(),
                                rms_dev: c.rms_dev.to_f64_lossy(),
                                shift_estimate: c.shift_estimate.to_f64_lossy(),
                            })
                        }
                        Err(e) => branch.failure = Some(e.to_string()),
                    }
                }
                Err(e) => branch.failure = Some(e.to_string()),
            }
            branch
        })
        .collect();
    let fold =
        |f: fn(&AuditBranch) -> Option<f64>| branches.iter().filter_map(f).fold(0.0, f64::max);
    let max_loop_phase_deviation = reference_loop_phase.map(|r| {
        branches
            .iter()
            .filter(|b| !b.time_dependent)
            .filter_map(|b| b.loop_phase)
            .map(|p| (p - r).abs())
            .fold(0.0, f64::max)
    });
    let failures = branches.iter().filter(|b| b.failure.is_some()).count();
    let passed = branches.iter().all(AuditBranch::passed)
        && max_loop_phase_deviation.is_none_or(|d| {
            d <= LOOP_TOLERANCE * reference_loop_phase.unwrap_or(0.0).abs().max(1.0)
        });
    Ok(AuditReport {
        config_hash: config.hash(),
        reference_steps: steps,
        snapshot_every: every,
        reference_paper_track,
        reference_loop_phase,
        max_density_deviation: fold(|b| b.max_density_deviation),
        max_profile_deviation: fold(|b| b.profile.map(|p| p.max_abs_dev)),
        max_loop_phase_deviation,
        failures,
        passed,
        branches,
    })
}
