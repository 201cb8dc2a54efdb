//! `abwave`: run, sweep and audit gauge-covariant interference scenarios.

mod artifacts;
mod values;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use abwave::analysis::{write_profile_csv, AnalysisError, FringeReport};
use abwave::scenarios::{
    build, gauge_audit, predicted_shift, run_setup, sweep, toroidal_effect_experiment, AuditReport,
    GaugeFile, PaperTrack, RunMetadata, RunOptions, ScenarioConfig, ScenarioError, SweepParam,
    SweepReport, SweepRow,
};
use abwave::wavesolver::{write_snapshot_binary, write_snapshot_csv, SnapshotFormat, WaveField};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use artifacts::{write_error, ErrorReport, OutDir};
use values::SweepValue;

#[derive(Parser)]
#[command(
    name = "abwave",
    version,
    about = "Gauge-covariant charged-particle interference simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate one scenario and extract its fringe pattern.
    Run {
        #[command(flatten)]
        common: Common,
        /// Write a wavefunction snapshot every N steps (0 uses the config value).
        #[arg(long, value_name = "N", default_value_t = 0)]
        snapshots: u64,
        /// Snapshot file format.
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        snapshot_format: Format,
    },
    /// Compare full-wave runs of one scenario across gauges.
    Audit {
        #[command(flatten)]
        common: Common,
        /// Gauge list ([[gauge]] tables).
        #[arg(long, value_name = "FILE")]
        gauges: PathBuf,
        /// Compare densities every N steps.
        #[arg(long, value_name = "N", default_value_t = 100)]
        snapshots: u64,
    },
    /// Run a scenario for several values of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// channel_a, flux or k0.
        #[arg(long)]
        param: String,
        /// Values such as 0, pi/2, 1.5pi or 0.25k (k = |k0| of the config).
        #[arg(long, num_args = 1.., value_delimiter = ',', allow_negative_numbers = true, required = true)]
        values: Vec<String>,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario configuration (TOML).
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Format {
    Csv,
    Binary,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("gauge audit exceeded tolerance: {0}")]
    AuditFailed(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            Self::Usage(_) => "usage",
            Self::Scenario(e) => e.kind(),
            Self::Io(_) => "io",
            Self::AuditFailed(_) => "invariant",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Io(_) => 2,
            Self::Scenario(e) => match e {
                ScenarioError::Config(_) | ScenarioError::Io(_) => 2,
                ScenarioError::Numerical(_) | ScenarioError::Analysis(_) => 3,
                ScenarioError::Invariant(_) => 4,
            },
            Self::AuditFailed(_) => 4,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let (name, out) = match &cli.command {
        Command::Run { common, .. } => ("run", common.out.clone()),
        Command::Audit { common, .. } => ("audit", common.out.clone()),
        Command::Sweep { common, .. } => ("sweep", common.out.clone()),
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            eprintln!("abwave {name}: {e}");
            write_error(
                &out,
                &ErrorReport {
                    command: name,
                    kind: e.kind(),
                    exit_code: code.into(),
                    message: e.to_string(),
                },
            );
            ExitCode::from(code)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            common,
            snapshots,
            snapshot_format,
        } => {
            let format = match snapshot_format {
                Format::Csv => SnapshotFormat::Csv,
                Format::Binary => SnapshotFormat::Binary,
            };
            with_threads(common.threads, || {
                cmd_run(&common.config, &common.out, snapshots, format)
            })
        }
        Command::Audit {
            common,
            gauges,
            snapshots,
        } => with_threads(common.threads, || {
            cmd_audit(&common.config, &gauges, &common.out, snapshots)
        }),
        Command::Sweep {
            common,
            param,
            values,
        } => with_threads(common.threads, || {
            cmd_sweep(&common.config, &param, &values, &common.out)
        }),
    }
}

/// Runs `f` on a dedicated pool when a thread count is given.
fn with_threads<R: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<R, CliError> + Send,
) -> Result<R, CliError> {
    match threads {
        None => f(),
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?
            .install(f),
    }
}

#[derive(Serialize)]
struct RunReport<'a> {
    config_hash: String,
    kind: abwave::scenarios::ScenarioKind,
    run: &'a RunMetadata,
    papertrack: PaperTrack,
    predicted_shift: f64,
}

/// fringe.json: the fringe report, or the failure with basic peak statistics.
#[derive(Serialize)]
#[serde(untagged)]
enum FringeOutput {
    Fringes(FringeReport<f64>),
    Failed {
        error: String,
        peak_position: f64,
        peak_intensity: f64,
        total: f64,
    },
}

fn fringe_output(
    profile: &abwave::analysis::Profile<f64>,
    fringes: Result<FringeReport<f64>, AnalysisError>,
) -> FringeOutput {
    match fringes {
        Ok(f) => FringeOutput::Fringes(f),
        Err(e) => {
            let (k, peak) = profile.intensity.iter().copied().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |best, (k, v)| if v > best.1 { (k, v) } else { best },
            );
            let dy = if profile.len() > 1 {
                profile.x[1] - profile.x[0]
            } else {
                0.0
            };
            FringeOutput::Failed {
                error: e.to_string(),
                peak_position: profile.x[k],
                peak_intensity: peak,
                total: profile.intensity.iter().sum::<f64>() * dy,
            }
        }
    }
}

fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    Ok(ScenarioConfig::from_path(path)?)
}

fn cmd_run(
    config: &Path,
    out: &Path,
    snapshots: u64,
    format: SnapshotFormat,
) -> Result<(), CliError> {
    let mut cfg = load_config(config)?;
    if snapshots > 0 {
        cfg.run.snapshot_every = snapshots;
        cfg.run.snapshot_format = format;
    }
    let mut dir = OutDir::create(out)?;
    let setup = build::<f64>(&cfg)?;
    let papertrack = PaperTrack::evaluate(&setup)?;
    let predicted = predicted_shift(&setup)?;
    dir.stage("build");

    let every = cfg.run.snapshot_every;
    let format = cfg.run.snapshot_format;
    let mut written = Vec::new();
    let snap_dir = dir.path("snapshots");
    let mut observer = |step: u64, state: &WaveField<f64>| -> Result<(), ScenarioError> {
        std::fs::create_dir_all(&snap_dir)?;
        let rel = format!("snapshots/step_{step:07}.{}", format.extension());
        let file = std::io::BufWriter::new(std::fs::File::create(
            snap_dir.join(format!("step_{step:07}.{}", format.extension())),
        )?);
        match format {
            SnapshotFormat::Csv => write_snapshot_csv(state, file)?,
            SnapshotFormat::Binary => write_snapshot_binary(state, file)?,
        }
        written.push(rel);
        Ok(())
    };
    let opts = RunOptions {
        observe_every: every,
        observer: (every > 0).then_some(
            &mut observer as &mut dyn FnMut(u64, &WaveField<f64>) -> Result<(), ScenarioError>,
        ),
        ..RunOptions::default()
    };
    let result = run_setup(&setup, opts)?;
    dir.stage("propagate");

    let fringes = result.fringes().map_err(|e| match e {
        ScenarioError::Analysis(a) => a,
        other => AnalysisError::InvalidProfile(other.to_string()),
    });
    let fringe = fringe_output(&result.profile, fringes);
    dir.stage("analyze");

    let mut csv = Vec::new();
    write_profile_csv(&result.profile, &mut csv).map_err(ScenarioError::from)?;
    dir.write("profile.csv", &csv)?;
    dir.write_json("fringe.json", &fringe)?;
    let report = RunReport {
        config_hash: cfg.hash(),
        kind: cfg.kind,
        run: &result.metadata,
        papertrack,
        predicted_shift: predicted,
    };
    dir.write_json("report.json", &report)?;
    for rel in &written {
        dir.register(rel)?;
    }
    dir.stage("write");
    for w in &result.metadata.warnings {
        eprintln!("warning: {w}");
    }
    dir.finish("run", &cfg.hash())?;
    Ok(())
}

fn cmd_audit(config: &Path, gauges: &Path, out: &Path, snapshots: u64) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let file = GaugeFile::from_path(gauges)?;
    if !file.gauge.iter().any(|g| !g.is_identity()) {
        return Err(CliError::Usage(format!(
            "{}: the audit needs at least one non-identity gauge",
            gauges.display()
        )));
    }
    let mut dir = OutDir::create(out)?;
    let report: AuditReport = gauge_audit::<f64>(&cfg, &file.gauge, snapshots)?;
    dir.stage("audit");
    dir.write_json("audit.json", &report)?;
    dir.stage("write");
    dir.finish("audit", &cfg.hash())?;
    if !report.passed {
        let worst = report
            .branches
            .iter()
            .filter(|b| !b.passed())
            .map(|b| match &b.failure {
                Some(f) => format!("{}: {f}", b.label),
                None => format!(
                    "{}: density {:?}, profile {:?}",
                    b.label,
                    b.max_density_deviation,
                    b.profile.map(|p| p.max_abs_dev)
                ),
            })
            .collect::<Vec<_>>();
        let loop_note = report
            .max_loop_phase_deviation
            .map(|d| format!("; loop phase deviation {d:e}"))
            .unwrap_or_default();
        return Err(CliError::AuditFailed(format!(
            "{}{loop_note}",
            worst.join("; ")
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    config_hash: String,
    values: &'a [String],
    sweep: &'a SweepReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    effect: Option<&'a abwave::scenarios::EffectReport>,
}

fn cmd_sweep(config: &Path, param: &str, raw: &[String], out: &Path) -> Result<(), CliError> {
    let param: SweepParam = match param {
        "channel_a" | "a" => SweepParam::ChannelA,
        "flux" => SweepParam::Flux,
        "k0" => SweepParam::K0,
        other => {
            return Err(CliError::Usage(format!(
                "unknown sweep parameter '{other}' (expected channel_a, flux or k0)"
            )))
        }
    };
    let cfg = load_config(config)?;
    let k_norm = cfg.packet.k0[0].hypot(cfg.packet.k0[1]);
    let values = raw
        .iter()
        .map(|s| s.parse::<SweepValue>().map(|v| v.resolve(k_norm)))
        .collect::<Result<Vec<f64>, _>>()
        .map_err(CliError::Usage)?;
    if values.is_empty() {
        return Err(CliError::Usage("--values needs at least one value".into()));
    }
    let mut dir = OutDir::create(out)?;
    let (report, effect) = match param {
        SweepParam::ChannelA => {
            let effect = toroidal_effect_experiment::<f64>(&cfg, &values)?;
            (effect.sweep.clone(), Some(effect))
        }
        _ => (sweep::<f64>(&cfg, param, &values)?, None),
    };
    dir.stage("sweep");
    dir.write("sweep.csv", &sweep_csv(&report.rows)?)?;
    dir.write_json(
        "sweep.json",
        &SweepOutput {
            config_hash: cfg.hash(),
            values: raw,
            sweep: &report,
            effect: effect.as_ref(),
        },
    )?;
    dir.stage("write");
    for r in &report.rows {
        if let Some(e) = &r.error {
            eprintln!("warning: value {}: {e}", r.value);
        }
    }
    dir.finish("sweep", &cfg.hash())?;
    Ok(())
}

fn sweep_csv(rows: &[SweepRow]) -> Result<Vec<u8>, CliError> {
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Io(std::io::Error::other(e));
    w.write_record([
        "value",
        "fullwave_spacing",
        "fullwave_shift",
        "papertrack_spacing",
        "papertrack_wavelength",
        "visibility",
        "predicted_shift",
        "steps",
        "error",
    ])
    .map_err(err)?;
    for r in rows {
        w.write_record([
            r.value.to_string(),
            opt(r.fullwave_spacing),
            opt(r.fullwave_shift),
            opt(r.papertrack_spacing),
            opt(r.papertrack_wavelength),
            opt(r.visibility),
            opt(r.predicted_shift),
            r.steps.map(|s| s.to_string()).unwrap_or_default(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))
}
