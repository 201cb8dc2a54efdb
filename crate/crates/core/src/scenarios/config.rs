use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ScenarioError;
use crate::wavesolver::SnapshotFormat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Free,
    DoubleSlit,
    AbSolenoid,
    ToroidalChannel,
}

impl ScenarioKind {
    pub fn has_barrier(self) -> bool {
        self != Self::Free
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleConfig {
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "minus_one")]
    pub charge: f64,
}

impl Default for ParticleConfig {
    fn default() -> Self {
        Self {
            mass: 1.0,
            charge: -1.0,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn minus_one() -> f64 {
    -1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    /// Position of node (0, 0).
    pub origin: [f64; 2],
    /// Time step; defaults to `min(0.2/ω(k0), 0.1/max|qΦ|)`.
    #[serde(default)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketConfig {
    pub center: [f64; 2],
    pub sigma: f64,
    pub k0: [f64; 2],
}

/// Absorber widths in length units and peak damping rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorberConfig {
    #[serde(default = "default_absorber_width")]
    pub left: f64,
    #[serde(default = "default_absorber_width")]
    pub right: f64,
    #[serde(default = "default_absorber_width")]
    pub bottom: f64,
    #[serde(default = "default_absorber_width")]
    pub top: f64,
    #[serde(default = "default_absorber_strength")]
    pub strength: f64,
}

fn default_absorber_width() -> f64 {
    1.0
}

fn default_absorber_strength() -> f64 {
    40.0
}

impl Default for AbsorberConfig {
    fn default() -> Self {
        Self {
            left: 1.0,
            right: 1.0,
            bottom: 1.0,
            top: 1.0,
            strength: default_absorber_strength(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// Upstream face of the barrier.
    #[serde(default)]
    pub barrier_x: f64,
    #[serde(default)]
    pub barrier_thickness: f64,
    /// Center-to-center distance of the two slits.
    #[serde(default)]
    pub slit_separation: f64,
    #[serde(default)]
    pub slit_width: f64,
    /// Column of the flux detector.
    pub screen_x: f64,
    #[serde(default)]
    pub absorber: AbsorberConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolenoidConfig {
    pub flux: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChannelPlacement {
    #[default]
    Both,
    Lower,
    Upper,
}

/// Uniform `A = (a, 0)` inside the slit passages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default)]
    pub a_lower: f64,
    #[serde(default)]
    pub a_upper: f64,
    /// Which arms an experiment sweep drives.
    #[serde(default)]
    pub placement: ChannelPlacement,
}

/// Additional potentials; several entries form a composite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    UniformChannel {
        min: [f64; 2],
        max: [f64; 2],
        a0: [f64; 2],
    },
    Solenoid {
        center: [f64; 2],
        flux: f64,
    },
    /// Each CSV has columns `t,x,y,z`; relative paths resolve against the config file.
    Worldlines {
        files: Vec<PathBuf>,
        charges: Vec<f64>,
    },
    Composite {
        parts: Vec<PotentialSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    /// Stop once this fraction of the surviving probability has crossed the screen.
    #[serde(default = "default_stop_fraction")]
    pub stop_fraction: f64,
    /// Record the norm every this many steps.
    #[serde(default = "default_norm_every")]
    pub norm_every: u64,
    /// Snapshot interval in steps (0 disables).
    #[serde(default)]
    pub snapshot_every: u64,
    #[serde(default)]
    pub snapshot_format: SnapshotFormat,
}

fn default_max_steps() -> u64 {
    50_000
}

fn default_stop_fraction() -> f64 {
    0.99
}

fn default_norm_every() -> u64 {
    10
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            max_steps: default_max_steps(),
            stop_fraction: default_stop_fraction(),
            norm_every: default_norm_every(),
            snapshot_every: 0,
            snapshot_format: SnapshotFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Screen-coordinate window for fringe extraction; defaults to the
    /// middle 60 % of the screen.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub particle: ParticleConfig,
    pub grid: GridConfig,
    pub packet: PacketConfig,
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub solenoid: Option<SolenoidConfig>,
    #[serde(default)]
    pub channel: Option<ChannelConfig>,
    #[serde(default)]
    pub potentials: Vec<PotentialSpec>,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    /// Directory that relative worldline paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| match e {
            ScenarioError::Config(m) => ScenarioError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Upstream face of the barrier plus its thickness.
    pub fn barrier_exit(&self) -> f64 {
        self.geometry.barrier_x + self.geometry.barrier_thickness
    }

    /// Distance from the barrier exit to the screen.
    pub fn screen_distance(&self) -> f64 {
        self.geometry.screen_x - self.barrier_exit()
    }

    /// Time step: explicit, or `0.2/ω(k0)` (with ω = |k0|²/2m).
    pub fn time_step(&self) -> f64 {
        if let Some(dt) = self.grid.dt {
            return dt;
        }
        let k2 = self.packet.k0[0].powi(2) + self.packet.k0[1].powi(2);
        let omega = k2 / (2.0 * self.particle.mass);
        if omega > 0.0 {
            0.2 / omega
        } else {
            0.01
        }
    }

    /// Channel strengths `(lower, upper)`.
    pub fn channel_strengths(&self) -> (f64, f64) {
        self.channel
            .as_ref()
            .map_or((0.0, 0.0), |c| (c.a_lower, c.a_upper))
    }

    pub fn flux(&self) -> f64 {
        self.solenoid.as_ref().map_or(0.0, |s| s.flux)
    }
}

/// Gauge functions for audits, declared as `[[gauge]]` tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GaugeSpec {
    Identity,
    Constant {
        value: f64,
    },
    /// `G = c + g·r + rate·t`.
    Linear {
        #[serde(default)]
        offset: f64,
        gradient: [f64; 2],
        #[serde(default)]
        rate: f64,
    },
    /// `Σ coef·(x'/ℓ)^px (y'/ℓ)^py (t/τ)^pt` about `origin`.
    Polynomial {
        #[serde(default)]
        origin: [f64; 2],
        length_scale: f64,
        #[serde(default = "one")]
        time_scale: f64,
        terms: Vec<MonomialSpec>,
    },
    RandomPolynomial {
        seed: u64,
        #[serde(default = "default_degree")]
        degree: u32,
        #[serde(default)]
        origin: [f64; 2],
        #[serde(default = "default_scale")]
        length_scale: f64,
        #[serde(default = "default_scale")]
        time_scale: f64,
        #[serde(default)]
        time_dependent: bool,
    },
}

fn default_degree() -> u32 {
    2
}

fn default_scale() -> f64 {
    10.0
}

impl GaugeSpec {
    pub fn is_identity(&self) -> bool {
        matches!(self, Self::Identity)
    }

    pub fn label(&self) -> String {
        match self {
            Self::Identity => "identity".into(),
            Self::Constant { value } => format!("constant({value})"),
            Self::Linear { gradient, rate, .. } => {
                format!("linear({}, {}; {rate})", gradient[0], gradient[1])
            }
            Self::Polynomial { terms, .. } => format!("polynomial({} terms)", terms.len()),
            Self::RandomPolynomial {
                seed,
                degree,
                time_dependent,
                ..
            } => {
                format!(
                    "random_polynomial(seed {seed}, degree {degree}{})",
                    if *time_dependent { ", t" } else { "" }
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialSpec {
    pub coef: f64,
    #[serde(default)]
    pub px: u32,
    #[serde(default)]
    pub py: u32,
    #[serde(default)]
    pub pt: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeFile {
    #[serde(default)]
    pub gauge: Vec<GaugeSpec>,
}

impl GaugeFile {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            ScenarioError::Config(m) => ScenarioError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}
