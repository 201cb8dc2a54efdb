//! Configured experiments: double slit, Aharonov–Bohm solenoid and the
//! toroidal (slit-channel) vector potential, with gauge audits and sweeps.
//!
//! The barrier sits at `barrier_x` with two slits symmetric about y = 0.
//! Fringe shifts are measured in fringes, positive toward −y.

mod audit;
mod build;
mod config;
mod effect;
mod run;

use std::sync::Arc;

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::geom::Vec2;
use crate::potentials::{
    ConstantGauge, GaugeFunction, LinearGauge, Monomial, PolynomialGauge, ZeroGauge,
};
use crate::wavesolver::SolverError;
use crate::Real;

pub use audit::{gauge_audit, AuditBranch, AuditReport, PaperTrackAudit, SnapshotDeviation};
pub use build::{build, Layout, Setup};
pub use config::{
    AbsorberConfig, AnalysisConfig, ChannelConfig, ChannelPlacement, GaugeFile, GaugeSpec,
    GeometryConfig, GridConfig, MonomialSpec, PacketConfig, ParticleConfig, PotentialSpec,
    RunConfig, ScenarioConfig, ScenarioKind, SolenoidConfig,
};
pub use effect::{
    predicted_shift, run_point, shift_between, sweep, toroidal_effect_experiment, unwrap_shift,
    EffectReport, PaperTrack, SweepParam, SweepPoint, SweepReport, SweepRow,
};
pub use run::{
    run_scenario, run_setup, NormSample, RunMetadata, RunOptions, SimulationResult, StopReason,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("analysis failed: {0}")]
    Analysis(#[from] AnalysisError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl ScenarioError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Invariant(_) => "invariant",
            Self::Numerical(_) => "numerical",
            Self::Analysis(_) => "analysis",
            Self::Io(_) => "io",
        }
    }
}

impl From<SolverError> for ScenarioError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InvalidGrid(m) => Self::Config(m),
            SolverError::PacketOutOfDomain(_)
            | SolverError::PacketOnWall { .. }
            | SolverError::Field(_) => Self::Invariant(e.to_string()),
            SolverError::NonFinite { .. } | SolverError::Mismatch(_) => {
                Self::Numerical(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for ScenarioError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl GaugeSpec {
    /// Instantiates the gauge function.
    pub fn build<T: Real>(&self) -> Result<Arc<dyn GaugeFunction<T>>, ScenarioError> {
        let v = |a: [f64; 2]| Vec2::new(T::lit(a[0]), T::lit(a[1]));
        let bad = |e: crate::potentials::FieldError| {
            ScenarioError::Config(format!("gauge {}: {e}", self.label()))
        };
        Ok(match self {
            Self::Identity => Arc::new(ZeroGauge),
            Self::Constant { value } => Arc::new(ConstantGauge(T::lit(*value))),
            Self::Linear {
                offset,
                gradient,
                rate,
            } => Arc::new(LinearGauge {
                c: T::lit(*offset),
                g: v(*gradient),
                gt: T::lit(*rate),
            }),
            Self::Polynomial {
                origin,
                length_scale,
                time_scale,
                terms,
            } => {
                let terms = terms
                    .iter()
                    .map(|m| Monomial {
                        coef: T::lit(m.coef),
                        px: m.px,
                        py: m.py,
                        pt: m.pt,
                    })
                    .collect();
                Arc::new(
                    PolynomialGauge::new(
                        v(*origin),
                        T::lit(*length_scale),
                        T::lit(*time_scale),
                        terms,
                    )
                    .map_err(bad)?,
                )
            }
            Self::RandomPolynomial {
                seed,
                degree,
                origin,
                length_scale,
                time_scale,
                time_dependent,
            } => Arc::new(
                PolynomialGauge::random(
                    *seed,
                    *degree,
                    v(*origin),
                    T::lit(*length_scale),
                    T::lit(*time_scale),
                    *time_dependent,
                )
                .map_err(bad)?,
            ),
        })
    }
}
