//! Run configuration, dispatch and CSV output for the `lacsim` binary.
//!
//! Configurations are TOML documents. Unknown keys, and sections the chosen
//! subcommand does not use, are rejected. The fully resolved configuration is
//! echoed as `# `-prefixed comment lines at the top of every output file;
//! stripping that prefix yields a configuration that reproduces the run.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::DensityMatrix;
use crate::liouville::RelaxationSpec;
use crate::periodic::{time_trace, DriveSpec, Sampling};
use crate::spinops::{energy_levels, SpinSystem, SystemKind};
use crate::sweep::{
    default_inner_grid, field_sweep, fm_sweep, linspace, logspace, ConvergenceSpec, DriveBase,
    SweepAxis, SweepPlan,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("`{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("`{key}` is required for subcommand `{subcommand}`")]
    Missing {
        key: &'static str,
        subcommand: Subcommand,
    },
    #[error("section `{key}` is not used by subcommand `{subcommand}`")]
    Unused {
        key: &'static str,
        subcommand: Subcommand,
    },
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] crate::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no output path: set `output` in the config or pass --output")]
    NoOutput,
}

fn invalid(key: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subcommand {
    Levels,
    Trace,
    Spectrum,
    Fmsweep,
}

impl std::fmt::Display for Subcommand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Subcommand::Levels => "levels",
            Subcommand::Trace => "trace",
            Subcommand::Spectrum => "spectrum",
            Subcommand::Fmsweep => "fmsweep",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindName {
    Single,
    Isotropic,
    Dipolar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub kind: KindName,
    pub v: Option<f64>,
    pub a_iso: Option<f64>,
    pub d_dd: Option<f64>,
    /// Radians.
    pub theta_dd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxationSection {
    pub r1: Option<f64>,
    pub r2: Option<f64>,
    pub pump_j: Option<f64>,
    pub pump_damps_coherence: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub omega0: Option<f64>,
    pub omega1: Option<f64>,
    pub f_mod: Option<f64>,
    pub n_steps: Option<usize>,
    pub sampling: Option<Sampling>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

/// Either explicit `values` or `start`/`stop`/`points` with a spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
    pub spacing: Option<Spacing>,
}

impl GridSection {
    fn resolve(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let grid = match (&self.values, self.start, self.stop, self.points) {
            (Some(v), None, None, None) if self.spacing.is_none() => v.clone(),
            (None, Some(a), Some(b), Some(n)) => match self.spacing.unwrap_or(Spacing::Linear) {
                Spacing::Linear => linspace(a, b, n),
                Spacing::Log => {
                    if !(a > 0.0 && b > 0.0) {
                        return Err(invalid(key, "log spacing needs positive start and stop"));
                    }
                    logspace(a, b, n)
                }
            },
            _ => {
                return Err(invalid(
                    key,
                    "give either `values` or all of `start`, `stop`, `points`",
                ))
            }
        };
        if grid.is_empty() {
            return Err(invalid(key, "grid is empty"));
        }
        if grid.iter().any(|v| !v.is_finite()) {
            return Err(invalid(key, "grid values must be finite"));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    pub target_rel_change: Option<f64>,
    pub n_start: Option<usize>,
    pub n_max: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    Bright,
    Dark,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSection {
    pub n_periods: Option<usize>,
    pub initial: Option<InitialState>,
}

/// A run configuration as written in TOML.
///
/// [`parse_config`] returns it with every default filled in, which is also
/// the form echoed into output headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub output: Option<PathBuf>,
    /// Angular frequency per field unit; only labels the field axis.
    pub gamma_for_units: Option<f64>,
    pub system: SystemSection,
    pub relaxation: Option<RelaxationSection>,
    pub drive: Option<DriveSection>,
    pub grid: Option<GridSection>,
    pub inner_grid: Option<GridSection>,
    pub convergence: Option<ConvergenceSection>,
    pub trace: Option<TraceSection>,
}

fn require<T: Copy>(
    value: Option<T>,
    key: &'static str,
    sub: Subcommand,
) -> Result<T, ConfigError> {
    value.ok_or(ConfigError::Missing {
        key,
        subcommand: sub,
    })
}

fn check_range(key: &str, value: f64, ok: bool, what: &str) -> Result<(), ConfigError> {
    if !value.is_finite() || !ok {
        return Err(invalid(key, format!("{what}, got {value}")));
    }
    Ok(())
}

/// Parses and validates a configuration document, resolving all defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    raw.resolve()
}

impl RunConfig {
    fn resolve(mut self) -> Result<RunConfig, ConfigError> {
        let sub = self.subcommand;
        if let Some(g) = self.gamma_for_units {
            check_range(
                "gamma_for_units",
                g,
                g != 0.0,
                "must be finite and non-zero",
            )?;
        }
        self.system = resolve_system(&self.system)?;

        let uses = |section: &'static str| -> bool {
            matches!(
                (sub, section),
                (Subcommand::Levels, "grid")
                    | (Subcommand::Trace, "relaxation" | "drive" | "trace")
                    | (
                        Subcommand::Spectrum,
                        "relaxation" | "drive" | "grid" | "convergence"
                    )
                    | (
                        Subcommand::Fmsweep,
                        "relaxation" | "drive" | "grid" | "inner_grid" | "convergence"
                    )
            )
        };
        let present = [
            ("relaxation", self.relaxation.is_some()),
            ("drive", self.drive.is_some()),
            ("grid", self.grid.is_some()),
            ("inner_grid", self.inner_grid.is_some()),
            ("convergence", self.convergence.is_some()),
            ("trace", self.trace.is_some()),
        ];
        for (key, is_present) in present {
            if is_present && !uses(key) {
                return Err(ConfigError::Unused {
                    key,
                    subcommand: sub,
                });
            }
        }

        if uses("relaxation") {
            let r = self.relaxation.take().unwrap_or(RelaxationSection {
                r1: None,
                r2: None,
                pump_j: None,
                pump_damps_coherence: None,
            });
            let resolved = RelaxationSection {
                r1: Some(r.r1.unwrap_or(0.0)),
                r2: Some(r.r2.unwrap_or(0.0)),
                pump_j: Some(r.pump_j.unwrap_or(0.0)),
                pump_damps_coherence: Some(r.pump_damps_coherence.unwrap_or(true)),
            };
            for (key, v) in [
                ("relaxation.r1", resolved.r1),
                ("relaxation.r2", resolved.r2),
                ("relaxation.pump_j", resolved.pump_j),
            ] {
                let v = v.unwrap();
                check_range(key, v, v >= 0.0, "must be finite and >= 0")?;
            }
            self.relaxation = Some(resolved);
        }

        if uses("drive") {
            let d = self.drive.take().ok_or(ConfigError::Missing {
                key: "drive",
                subcommand: sub,
            })?;
            let omega1 = require(d.omega1, "drive.omega1", sub)?;
            check_range("drive.omega1", omega1, true, "must be finite")?;
            let omega0 = match sub {
                Subcommand::Spectrum => {
                    if d.omega0.is_some() {
                        return Err(invalid(
                            "drive.omega0",
                            "swept by `grid` in a spectrum run; remove it",
                        ));
                    }
                    None
                }
                Subcommand::Fmsweep => {
                    if d.omega0.is_some() {
                        return Err(invalid(
                            "drive.omega0",
                            "swept by `inner_grid` in an fmsweep run; remove it",
                        ));
                    }
                    None
                }
                _ => Some(d.omega0.unwrap_or(0.0)),
            };
            if let Some(w) = omega0 {
                check_range("drive.omega0", w, true, "must be finite")?;
            }
            let f_mod = match sub {
                Subcommand::Fmsweep => {
                    if d.f_mod.is_some() {
                        return Err(invalid(
                            "drive.f_mod",
                            "swept by `grid` in an fmsweep run; remove it",
                        ));
                    }
                    None
                }
                _ => {
                    let f = require(d.f_mod, "drive.f_mod", sub)?;
                    check_range("drive.f_mod", f, f > 0.0, "must be finite and positive")?;
                    Some(f)
                }
            };
            let n_steps = match sub {
                Subcommand::Trace => {
                    let n = require(d.n_steps, "drive.n_steps", sub)?;
                    if n < 2 {
                        return Err(invalid(
                            "drive.n_steps",
                            format!("must be at least 2, got {n}"),
                        ));
                    }
                    Some(n)
                }
                _ => {
                    if d.n_steps.is_some() {
                        return Err(invalid(
                            "drive.n_steps",
                            "chosen per point by the convergence controller; use [convergence]",
                        ));
                    }
                    None
                }
            };
            self.drive = Some(DriveSection {
                omega0,
                omega1: Some(omega1),
                f_mod,
                n_steps,
                sampling: Some(d.sampling.unwrap_or_default()),
            });
        }

        if uses("grid") {
            let g = self.grid.take().ok_or(ConfigError::Missing {
                key: "grid",
                subcommand: sub,
            })?;
            let values = g.resolve("grid")?;
            let strictly =
                values.windows(2).all(|w| w[0] < w[1]) || values.windows(2).all(|w| w[0] > w[1]);
            if sub == Subcommand::Levels {
                if values.windows(2).any(|w| w[0] > w[1]) {
                    return Err(invalid("grid", "must be sorted ascending"));
                }
            } else if !strictly {
                return Err(invalid("grid", "must be strictly monotonic"));
            }
            if sub == Subcommand::Fmsweep && values.iter().any(|&f| f <= 0.0) {
                return Err(invalid("grid", "modulation frequencies must be positive"));
            }
            self.grid = Some(values_grid(values));
        }

        if uses("inner_grid") {
            let values = match self.inner_grid.take() {
                Some(g) => g.resolve("inner_grid")?,
                None => default_inner_grid(&self.spin_system()),
            };
            if !values.windows(2).all(|w| w[0] < w[1]) && !values.windows(2).all(|w| w[0] > w[1]) {
                return Err(invalid("inner_grid", "must be strictly monotonic"));
            }
            self.inner_grid = Some(values_grid(values));
        }

        if uses("convergence") {
            let defaults = ConvergenceSpec::default();
            let c = self.convergence.take();
            let c = ConvergenceSpec {
                target_rel_change: c
                    .as_ref()
                    .and_then(|c| c.target_rel_change)
                    .unwrap_or(defaults.target_rel_change),
                n_start: c
                    .as_ref()
                    .and_then(|c| c.n_start)
                    .unwrap_or(defaults.n_start),
                n_max: c.as_ref().and_then(|c| c.n_max).unwrap_or(defaults.n_max),
            };
            c.validate()
                .map_err(|e| invalid("convergence", e.to_string()))?;
            self.convergence = Some(ConvergenceSection {
                target_rel_change: Some(c.target_rel_change),
                n_start: Some(c.n_start),
                n_max: Some(c.n_max),
            });
        }

        if uses("trace") {
            let t = self.trace.take();
            let n_periods = t.as_ref().and_then(|t| t.n_periods).unwrap_or(1);
            if n_periods == 0 {
                return Err(invalid("trace.n_periods", "must be at least 1"));
            }
            self.trace = Some(TraceSection {
                n_periods: Some(n_periods),
                initial: Some(t.and_then(|t| t.initial).unwrap_or(InitialState::Bright)),
            });
        }
        Ok(self)
    }

    pub fn spin_system(&self) -> SpinSystem {
        system_from_section(&self.system)
    }

    fn relaxation_spec(&self) -> RelaxationSpec {
        let r = self.relaxation.as_ref().expect("resolved relaxation");
        RelaxationSpec {
            r1: r.r1.unwrap(),
            r2: r.r2.unwrap(),
            pump_j: r.pump_j.unwrap(),
            pump_damps_coherence: r.pump_damps_coherence.unwrap(),
        }
    }

    fn grid_values(&self) -> Vec<f64> {
        self.grid
            .as_ref()
            .and_then(|g| g.values.clone())
            .expect("resolved grid")
    }

    /// Resolved configuration as TOML, as echoed into output headers.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn values_grid(values: Vec<f64>) -> GridSection {
    GridSection {
        values: Some(values),
        start: None,
        stop: None,
        points: None,
        spacing: None,
    }
}

fn resolve_system(s: &SystemSection) -> Result<SystemSection, ConfigError> {
    let nonzero = |v: Option<f64>| v.is_some_and(|v| v != 0.0);
    let (kind, a_iso, d_dd, theta_dd) = match s.kind {
        KindName::Single => {
            for (key, v) in [
                ("system.a_iso", s.a_iso),
                ("system.d_dd", s.d_dd),
                ("system.theta_dd", s.theta_dd),
            ] {
                if nonzero(v) {
                    return Err(invalid(key, "not used by kind = \"single\""));
                }
            }
            (KindName::Single, None, None, None)
        }
        KindName::Isotropic => {
            for (key, v) in [("system.d_dd", s.d_dd), ("system.theta_dd", s.theta_dd)] {
                if nonzero(v) {
                    return Err(invalid(key, "inconsistent with kind = \"isotropic\""));
                }
            }
            (
                KindName::Isotropic,
                Some(s.a_iso.unwrap_or(0.0)),
                None,
                None,
            )
        }
        KindName::Dipolar => {
            if nonzero(s.a_iso) {
                return Err(invalid(
                    "system.a_iso",
                    "inconsistent with kind = \"dipolar\"",
                ));
            }
            let theta = s.theta_dd.unwrap_or(0.0);
            check_range(
                "system.theta_dd",
                theta,
                (0.0..=std::f64::consts::PI).contains(&theta),
                "must lie in [0, pi] radians",
            )?;
            (
                KindName::Dipolar,
                None,
                Some(s.d_dd.unwrap_or(0.0)),
                Some(theta),
            )
        }
    };
    let resolved = SystemSection {
        kind,
        v: Some(s.v.unwrap_or(0.0)),
        a_iso,
        d_dd,
        theta_dd,
    };
    for (key, v) in [
        ("system.v", resolved.v),
        ("system.a_iso", resolved.a_iso),
        ("system.d_dd", resolved.d_dd),
    ] {
        if let Some(v) = v {
            check_range(key, v, true, "must be finite")?;
        }
    }
    Ok(resolved)
}

fn system_from_section(s: &SystemSection) -> SpinSystem {
    let v = s.v.unwrap_or(0.0);
    match s.kind {
        KindName::Single => SpinSystem::single(v),
        KindName::Isotropic => SpinSystem::isotropic(s.a_iso.unwrap_or(0.0), v),
        KindName::Dipolar => {
            SpinSystem::dipolar(s.d_dd.unwrap_or(0.0), s.theta_dd.unwrap_or(0.0), v)
        }
    }
}

/// Float formatting used in every CSV: 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.16e}")
    }
}

const EOL: &str = "\r\n";

/// Result of a run: the CSV text and the number of failed points.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub csv: String,
    pub failures: usize,
}

impl RunOutput {
    /// The CSV without the `#` comment header.
    pub fn body(&self) -> &str {
        body_of(&self.csv)
    }
}

pub fn body_of(csv: &str) -> &str {
    let mut offset = 0;
    for line in csv.split_inclusive('\n') {
        if !line.starts_with('#') {
            break;
        }
        offset += line.len();
    }
    &csv[offset..]
}

/// Recovers the echoed configuration from an output file's header.
pub fn config_from_header(csv: &str) -> Result<RunConfig, ConfigError> {
    let mut text = String::new();
    for line in csv.lines() {
        let Some(rest) = line.strip_prefix("# ") else {
            if line.starts_with('#') {
                continue;
            }
            break;
        };
        if rest.starts_with("config:") {
            continue;
        }
        if rest.starts_with("result:") {
            break;
        }
        text.push_str(rest);
        text.push('\n');
    }
    parse_config(&text)
}

fn header(config: &RunConfig) -> String {
    let mut out = format!("# config:{EOL}");
    for line in config.to_toml().lines() {
        let _ = write!(out, "# {line}{EOL}");
    }
    let _ = write!(out, "# result:{EOL}");
    if let Some(g) = config.gamma_for_units {
        let _ = write!(
            out,
            "# field axis in field units = omega / {}{EOL}",
            fmt_float(g)
        );
    }
    out
}

/// Computes the CSV for a resolved configuration. Sweeps run on the current
/// rayon pool.
pub fn run(config: &RunConfig, progress: bool) -> Result<RunOutput, RunError> {
    let system = config.spin_system();
    let mut csv = header(config);
    let mut failures = 0;
    match config.subcommand {
        Subcommand::Levels => {
            let grid = config.grid_values();
            let levels = energy_levels(&system, &grid)?;
            let cols: Vec<String> = (1..=system.hilbert_dim())
                .map(|k| format!("e{k}"))
                .collect();
            let _ = write!(csv, "axis_value,{}{EOL}", cols.join(","));
            for (w, ev) in grid.iter().zip(levels) {
                let vals: Vec<String> = ev.into_iter().map(fmt_float).collect();
                let _ = write!(csv, "{},{}{EOL}", fmt_float(*w), vals.join(","));
            }
        }
        Subcommand::Trace => {
            let d = config.drive.as_ref().expect("resolved drive");
            let drive = DriveSpec {
                omega0: d.omega0.unwrap(),
                omega1: d.omega1.unwrap(),
                f_mod: d.f_mod.unwrap(),
                n_steps: d.n_steps.unwrap(),
                sampling: d.sampling.unwrap(),
            };
            let t = config.trace.as_ref().expect("resolved trace");
            let dim = system.hilbert_dim();
            let rho0 = match t.initial.unwrap() {
                InitialState::Bright => DensityMatrix::bright(dim),
                InitialState::Dark => {
                    let diag: Vec<f64> = (0..dim)
                        .map(|k| if k < dim / 2 { 0.0 } else { 2.0 / dim as f64 })
                        .collect();
                    DensityMatrix::diagonal(&diag)
                }
                InitialState::Mixed => DensityMatrix::maximally_mixed(dim),
            }?;
            let trace = time_trace(
                &system,
                &config.relaxation_spec(),
                &drive,
                &rho0,
                t.n_periods.unwrap(),
            )?;
            let _ = write!(csv, "t,field,population{EOL}");
            for p in trace {
                let _ = write!(
                    csv,
                    "{},{},{}{EOL}",
                    fmt_float(p.t),
                    fmt_float(p.omega),
                    fmt_float(p.population)
                );
            }
        }
        Subcommand::Spectrum | Subcommand::Fmsweep => {
            let d = config.drive.as_ref().expect("resolved drive");
            let c = config.convergence.as_ref().expect("resolved convergence");
            let fm = config.subcommand == Subcommand::Fmsweep;
            let plan = SweepPlan {
                axis: if fm {
                    SweepAxis::FMod
                } else {
                    SweepAxis::Omega0
                },
                grid: config.grid_values(),
                system,
                relax: config.relaxation_spec(),
                drive: DriveBase {
                    omega0: 0.0,
                    omega1: d.omega1.unwrap(),
                    f_mod: d.f_mod.unwrap_or(1.0),
                    sampling: d.sampling.unwrap(),
                },
                convergence: ConvergenceSpec {
                    target_rel_change: c.target_rel_change.unwrap(),
                    n_start: c.n_start.unwrap(),
                    n_max: c.n_max.unwrap(),
                },
                inner_grid: config.inner_grid.as_ref().and_then(|g| g.values.clone()),
                progress,
            };
            if fm {
                let rows = fm_sweep(&plan)?;
                let mut unconverged = 0;
                for r in &rows {
                    failures += r.spectrum.failures();
                    unconverged += r.spectrum.unconverged();
                    for (row, _) in r
                        .spectrum
                        .rows
                        .iter()
                        .zip(0..)
                        .filter(|(row, _)| row.outcome.is_err())
                    {
                        let _ = write!(
                            csv,
                            "# failed: f_mod {} omega0 {}: {}{EOL}",
                            fmt_float(r.f_mod),
                            fmt_float(row.axis_value),
                            row.outcome.as_ref().unwrap_err()
                        );
                    }
                }
                let _ = write!(
                    csv,
                    "# failed_points = {failures}{EOL}# unconverged_points = {unconverged}{EOL}"
                );
                let _ = write!(csv, "f_mod,peak_to_peak,phi_star,n_used_max{EOL}");
                for r in &rows {
                    let _ = write!(
                        csv,
                        "{},{},{},{}{EOL}",
                        fmt_float(r.f_mod),
                        fmt_float(r.peak_to_peak()),
                        fmt_float(r.phi_star().unwrap_or(f64::NAN)),
                        r.spectrum.n_used_max()
                    );
                }
            } else {
                let spec = field_sweep(&plan)?;
                failures = spec.failures();
                for row in spec.rows.iter().filter(|r| r.outcome.is_err()) {
                    let _ = write!(
                        csv,
                        "# failed: omega0 {}: {}{EOL}",
                        fmt_float(row.axis_value),
                        row.outcome.as_ref().unwrap_err()
                    );
                }
                let _ = write!(
                    csv,
                    "# phi_star = {}{EOL}# peak_to_peak = {}{EOL}# failed_points = {failures}{EOL}# unconverged_points = {}{EOL}",
                    fmt_float(spec.phi_star.unwrap_or(f64::NAN)),
                    fmt_float(spec.peak_to_peak),
                    spec.unconverged()
                );
                let _ = write!(csv, "omega0,x,y,x_opt,n_used{EOL}");
                for row in &spec.rows {
                    let (x, y, n) = match &row.outcome {
                        Ok(p) => (p.lockin().x, p.lockin().y, p.n_used),
                        Err(_) => (f64::NAN, f64::NAN, 0),
                    };
                    let _ = write!(
                        csv,
                        "{},{},{},{},{}{EOL}",
                        fmt_float(row.axis_value),
                        fmt_float(x),
                        fmt_float(y),
                        fmt_float(row.x_opt),
                        n
                    );
                }
            }
        }
    }
    Ok(RunOutput { csv, failures })
}

/// Writes `contents` to `path` through a temporary sibling file, so a failed
/// run never leaves a partial output behind.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), RunError> {
    let io_err = |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    };
    let tmp = path.with_extension("partial");
    let result = fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(contents.as_bytes()).and_then(|_| f.sync_all()))
        .and_then(|_| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(io_err(e));
    }
    Ok(())
}

/// Kind name used in config files for a [`SystemKind`].
pub fn kind_name(kind: SystemKind) -> KindName {
    match kind {
        SystemKind::SingleSpin => KindName::Single,
        SystemKind::TwoSpinIsotropic => KindName::Isotropic,
        SystemKind::TwoSpinDipolar => KindName::Dipolar,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LEVELS: &str = r#"
subcommand = "levels"
[system]
kind = "single"
v = 0.1
[grid]
start = -1.0
stop = 1.0
points = 201
"#;

    #[test]
    fn minimal_levels_config() {
        let cfg = parse_config(LEVELS).unwrap();
        assert_eq!(
            cfg.grid.as_ref().unwrap().values.as_ref().unwrap().len(),
            201
        );
        assert_eq!(cfg.spin_system(), SpinSystem::single(0.1));
        let out = run(&cfg, false).unwrap();
        let min_gap = out
            .body()
            .lines()
            .skip(1)
            .map(|l| {
                let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
                v[2] - v[1]
            })
            .fold(f64::INFINITY, f64::min);
        assert!((min_gap - 0.1).abs() < 1e-9);
    }

    #[test]
    fn negative_rate_rejected() {
        let text = r#"
subcommand = "spectrum"
[system]
kind = "single"
v = 0.1
[relaxation]
r2 = -0.5
[drive]
omega1 = 0.1
f_mod = 1.0
[grid]
values = [-0.1, 0.0, 0.1]
"#;
        let err = parse_config(text).unwrap_err().to_string();
        assert!(err.contains("relaxation.r2"), "{err}");
    }

    #[test]
    fn inconsistent_couplings_rejected() {
        let text = r#"
subcommand = "levels"
[system]
kind = "dipolar"
a_iso = 0.2
d_dd = 1.0
[grid]
values = [0.0]
"#;
        let err = parse_config(text).unwrap_err().to_string();
        assert!(err.contains("a_iso"), "{err}");
    }

    #[test]
    fn unknown_keys_and_sections_rejected() {
        let typo = LEVELS.replace("v = 0.1", "vv = 0.1");
        assert!(matches!(parse_config(&typo), Err(ConfigError::Parse(_))));
        let extra = format!("{LEVELS}\n[trace]\nn_periods = 2\n");
        assert!(matches!(
            parse_config(&extra),
            Err(ConfigError::Unused { .. })
        ));
        let missing = "subcommand = \"spectrum\"\n[system]\nkind = \"single\"\n";
        assert!(matches!(
            parse_config(missing),
            Err(ConfigError::Missing { .. })
        ));
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = parse_config(LEVELS).unwrap();
        assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg);
        let out = run(&cfg, false).unwrap();
        assert_eq!(config_from_header(&out.csv).unwrap(), cfg);
    }

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(-2.0), "-2.0000000000000000e0");
        assert_eq!("1.0000000000000001e-1".parse::<f64>().unwrap(), 0.1);
    }
}
