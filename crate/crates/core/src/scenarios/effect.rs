use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::build::{build, Setup};
use super::config::{ChannelPlacement, ScenarioConfig, ScenarioKind};
use super::run::{run_setup, RunOptions, SimulationResult};
use super::ScenarioError;
use crate::analysis::{wrap_fringes, FringeReport};
use crate::eikonal::{ab_phase_difference, fixed_gauge_wavevector, spatial_wavelength};
use crate::Real;

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Channel strength `a` (toroidal scenario), applied per the configured placement.
    ChannelA,
    /// Solenoid flux.
    Flux,
    /// Carrier wavenumber `|k0|`, direction kept.
    K0,
}

impl FromStr for SweepParam {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "a" | "channel_a" => Ok(Self::ChannelA),
            "flux" => Ok(Self::Flux),
            "k0" => Ok(Self::K0),
            other => Err(ScenarioError::Config(format!(
                "unknown sweep parameter `{other}` (expected a, flux or k0)"
            ))),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ChannelA => "a",
            Self::Flux => "flux",
            Self::K0 => "k0",
        })
    }
}

impl SweepParam {
    /// Copy of `base` with the parameter set to `value`.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig, ScenarioError> {
        if !value.is_finite() {
            return Err(ScenarioError::Config(format!(
                "sweep value {value} is not finite"
            )));
        }
        let mut cfg = base.clone();
        match self {
            Self::ChannelA => {
                let ch = cfg
                    .channel
                    .as_mut()
                    .filter(|_| base.kind == ScenarioKind::ToroidalChannel)
                    .ok_or_else(|| {
                        ScenarioError::Config(
                            "sweeping `a` needs kind = \"toroidal_channel\"".into(),
                        )
                    })?;
                (ch.a_lower, ch.a_upper) = match ch.placement {
                    ChannelPlacement::Both => (value, value),
                    ChannelPlacement::Lower => (value, 0.0),
                    ChannelPlacement::Upper => (0.0, value),
                };
            }
            Self::Flux => {
                let s = cfg
                    .solenoid
                    .as_mut()
                    .filter(|_| base.kind == ScenarioKind::AbSolenoid)
                    .ok_or_else(|| {
                        ScenarioError::Config("sweeping `flux` needs kind = \"ab_solenoid\"".into())
                    })?;
                s.flux = value;
            }
            Self::K0 => {
                let [kx, ky] = cfg.packet.k0;
                let n = kx.hypot(ky);
                if !(value > 0.0) {
                    return Err(ScenarioError::Config("k0 must be positive".into()));
                }
                cfg.packet.k0 = if n > 0.0 {
                    [kx * value / n, ky * value / n]
                } else {
                    [value, 0.0]
                };
            }
        }
        Ok(cfg)
    }

    /// Value against which shifts are measured: zero field, or the first k0.
    fn reference(self, values: &[f64]) -> Option<f64> {
        match self {
            Self::ChannelA | Self::Flux => Some(0.0),
            Self::K0 => values.first().copied(),
        }
    }
}

/// Fixed-gauge ("paper-track") prediction: the wavevector pinned at the
/// packet source and evaluated inside the driven slit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PaperTrack {
    pub point: [f64; 2],
    pub k: [f64; 4],
    pub wavelength: f64,
    /// `λ L / d`; absent without slits.
    pub spacing: Option<f64>,
}

impl PaperTrack {
    pub fn evaluate<T: Real>(setup: &Setup<T>) -> Result<Self, ScenarioError> {
        let upper = setup
            .config
            .channel
            .as_ref()
            .is_some_and(|c| c.placement == ChannelPlacement::Upper);
        let src = setup.packet_center();
        let x = setup
            .slit_point(upper)
            .unwrap_or_else(|| (src + setup.screen_point()) * T::lit(0.5));
        let k = setup.k0();
        let k0 = [setup.energy(), k.x, k.y, T::zero()];
        let kv = fixed_gauge_wavevector(
            setup.field.as_ref(),
            src,
            x,
            k0,
            setup.particle.charge,
            T::zero(),
        )
        .map_err(|e| ScenarioError::Numerical(format!("paper-track wavevector: {e}")))?;
        let wavelength = spatial_wavelength(kv);
        let spacing = setup
            .slit_separation()
            .map(|d| (wavelength * setup.screen_distance() / d).to_f64_lossy());
        Ok(Self {
            point: [x.x.to_f64_lossy(), x.y.to_f64_lossy()],
            k: kv.map(|c| c.to_f64_lossy()),
            wavelength: wavelength.to_f64_lossy(),
            spacing,
        })
    }
}

/// Eikonal prediction of the fringe shift, positive toward −y:
/// `(S_lower − S_upper)/2π`. Zero without slits.
pub fn predicted_shift<T: Real>(setup: &Setup<T>) -> Result<f64, ScenarioError> {
    let Some([lower, upper]) = setup.arm_paths() else {
        return Ok(0.0);
    };
    let ds = ab_phase_difference(
        &lower,
        &upper,
        setup.field.as_ref(),
        setup.energy(),
        setup.particle,
    )
    .map_err(|e| ScenarioError::Numerical(format!("eikonal arm phases: {e}")))?;
    Ok(ds.to_f64_lossy() / TAU)
}

/// Resolves the integer ambiguity of a wrapped shift with a prediction.
pub fn unwrap_shift(wrapped: f64, predicted: f64) -> f64 {
    wrapped + (predicted - wrapped).round()
}

/// One full-wave run with its paper-track and eikonal predictions.
pub struct SweepPoint<T> {
    pub value: f64,
    pub config: ScenarioConfig,
    pub result: SimulationResult<T>,
    pub fringes: Result<FringeReport<T>, String>,
    pub papertrack: PaperTrack,
    pub predicted_shift: f64,
}

pub fn run_point<T: Real>(
    base: &ScenarioConfig,
    param: SweepParam,
    value: f64,
) -> Result<SweepPoint<T>, ScenarioError> {
    let config = param.apply(base, value)?;
    let setup = build::<T>(&config)?;
    let papertrack = PaperTrack::evaluate(&setup)?;
    let predicted_shift = predicted_shift(&setup)?;
    let result = run_setup(&setup, RunOptions::default())?;
    let fringes = result.fringes().map_err(|e| e.to_string());
    Ok(SweepPoint {
        value,
        config,
        result,
        fringes,
        papertrack,
        predicted_shift,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub steps: Option<u64>,
    pub fullwave_spacing: Option<f64>,
    /// Central-maximum shift vs the reference in fringes, positive toward −y,
    /// unwrapped with the eikonal prediction.
    pub fullwave_shift: Option<f64>,
    pub visibility: Option<f64>,
    pub predicted_shift: Option<f64>,
    pub papertrack_wavelength: Option<f64>,
    pub papertrack_spacing: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub param: SweepParam,
    pub reference_value: Option<f64>,
    /// Row of the reference run, also when it is not among the values.
    pub reference: Option<SweepRow>,
    pub rows: Vec<SweepRow>,
}

/// Shift of `point` against `reference` in fringes, positive toward −y.
pub fn shift_between<T: Real>(
    reference: &FringeReport<T>,
    point: &FringeReport<T>,
    predicted: f64,
) -> f64 {
    let raw =
        (reference.central_max_position - point.central_max_position) / reference.fringe_spacing;
    unwrap_shift(wrap_fringes(raw).to_f64_lossy(), predicted)
}

fn row_from<T: Real>(point: &SweepPoint<T>, reference: Option<&FringeReport<T>>) -> SweepRow {
    let f = point.fringes.as_ref().ok();
    SweepRow {
        value: point.value,
        steps: Some(point.result.metadata.steps),
        fullwave_spacing: f.map(|r| r.fringe_spacing.to_f64_lossy()),
        fullwave_shift: f
            .zip(reference)
            .map(|(r, rf)| shift_between(rf, r, point.predicted_shift)),
        visibility: f.map(|r| r.visibility.to_f64_lossy()),
        predicted_shift: Some(point.predicted_shift),
        papertrack_wavelength: Some(point.papertrack.wavelength),
        papertrack_spacing: point.papertrack.spacing,
        error: point.fringes.as_ref().err().cloned(),
    }
}

fn error_row(value: f64, e: &ScenarioError) -> SweepRow {
    SweepRow {
        value,
        steps: None,
        fullwave_spacing: None,
        fullwave_shift: None,
        visibility: None,
        predicted_shift: None,
        papertrack_wavelength: None,
        papertrack_spacing: None,
        error: Some(e.to_string()),
    }
}

/// Runs `values` one after another (each run is internally parallel). A value
/// that fails yields a row with `error` set; the others still run. Config
/// errors for any value abort before the first run.
pub fn sweep<T: Real>(
    base: &ScenarioConfig,
    param: SweepParam,
    values: &[f64],
) -> Result<SweepReport, ScenarioError> {
    if values.is_empty() {
        return Err(ScenarioError::Config(
            "sweep needs at least one value".into(),
        ));
    }
    for &v in values {
        param.apply(base, v)?;
    }
    let reference_value = param.reference(values);
    let points: Vec<Result<SweepPoint<T>, ScenarioError>> = values
        .par_iter()
        .map(|&v| run_point::<T>(base, param, v))
        .collect();
    let extra = match reference_value {
        Some(r) if !values.contains(&r) => Some(run_point::<T>(base, param, r)),
        _ => None,
    };
    let reference_point = match &extra {
        Some(p) => Some(p),
        None => {
            reference_value.and_then(|r| values.iter().position(|&v| v == r).map(|k| &points[k]))
        }
    };
    let reference_fringes = reference_point
        .and_then(|p| p.as_ref().ok())
        .and_then(|p| p.fringes.as_ref().ok());
    let to_row = |p: &Result<SweepPoint<T>, ScenarioError>, v: f64| match p {
        Ok(p) => row_from(p, reference_fringes),
        Err(e) => error_row(v, e),
    };
    let reference = reference_point
        .zip(reference_value)
        .map(|(p, v)| to_row(p, v));
    let rows = points
        .iter()
        .zip(values)
        .map(|(p, &v)| to_row(p, v))
        .collect();
    Ok(SweepReport {
        param,
        reference_value,
        reference,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectReport {
    pub placement: ChannelPlacement,
    pub channel_length: Option<f64>,
    pub sweep: SweepReport,
    /// Largest relative change of the full-wave fringe spacing vs `a = 0`.
    pub max_fullwave_spacing_change: Option<f64>,
    /// Largest relative change of the paper-track spacing vs `a = 0`.
    pub max_papertrack_spacing_change: Option<f64>,
}

/// Sweeps the channel strength and contrasts the full-wave fringe spacing
/// with the fixed-gauge prediction.
pub fn toroidal_effect_experiment<T: Real>(
    base: &ScenarioConfig,
    values: &[f64],
) -> Result<EffectReport, ScenarioError> {
    let placement = base
        .channel
        .as_ref()
        .filter(|_| base.kind == ScenarioKind::ToroidalChannel)
        .ok_or_else(|| {
            ScenarioError::Config(
                "the toroidal experiment needs kind = \"toroidal_channel\"".into(),
            )
        })?
        .placement;
    let sweep = sweep::<T>(base, SweepParam::ChannelA, values)?;
    let zero = sweep.reference.as_ref();
    let max_change = |get: fn(&SweepRow) -> Option<f64>| {
        let z = zero.and_then(get)?;
        sweep
            .rows
            .iter()
            .filter_map(get)
            .map(|s| ((s - z) / z).abs())
            .reduce(f64::max)
    };
    let channel_length = build::<T>(base)?.layout.channel_length();
    Ok(EffectReport {
        placement,
        channel_length,
        max_fullwave_spacing_change: max_change(|r| r.fullwave_spacing),
        max_papertrack_spacing_change: max_change(|r| r.papertrack_spacing),
        sweep,
    })
}
