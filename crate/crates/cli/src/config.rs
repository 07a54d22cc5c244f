//! Run configuration: defaults, then `LUNE_SEED`, then an optional JSON
//! file, then command-line flags. Angles are radians once resolved.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use lune_core::{EnsembleParams, McConfig, ScanAngle, Setup, SetupGeometry};
use serde::{Deserialize, Serialize};

pub const SEED_ENV: &str = "LUNE_SEED";
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Analytic,
    Montecarlo,
    Audit,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SetupKind {
    Hbt,
    Mz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SweepVar {
    Theta3,
    Theta4,
    Kappa,
    KappaPrime,
}

impl SweepVar {
    pub fn is_angle(self) -> bool {
        matches!(self, SweepVar::Theta3 | SweepVar::Theta4)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScanVar {
    Theta3,
    Theta4,
}

impl From<ScanVar> for ScanAngle {
    fn from(v: ScanVar) -> ScanAngle {
        match v {
            ScanVar::Theta3 => ScanAngle::Theta3,
            ScanVar::Theta4 => ScanAngle::Theta4,
        }
    }
}

/// Fully resolved run description. This is also the flat JSON config-file
/// schema; every key is optional in a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub setup: SetupKind,
    pub source_separation: f64,
    pub detector_separation: f64,
    pub distance: f64,
    pub area1: f64,
    pub area2: f64,
    pub k0: f64,
    pub kappa: f64,
    pub kappa_prime: f64,
    pub theta3: f64,
    pub theta4: f64,
    pub sweep_var: Option<SweepVar>,
    pub sweep_start: f64,
    pub sweep_stop: f64,
    pub sweep_steps: usize,
    /// Add Monte Carlo columns to a sweep.
    pub sweep_mc: bool,
    /// In montecarlo mode, scan this angle over `[0, π)` and fit the fringe.
    pub scan: Option<ScanVar>,
    pub scan_points: usize,
    pub seed: u64,
    pub n_samples: u64,
    pub n_streams: u64,
    pub output: OutputFormat,
    #[serde(skip_serializing)]
    pub out_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let g = SetupGeometry::reference();
        RunConfig {
            mode: Mode::Analytic,
            setup: SetupKind::Mz,
            source_separation: g.source_separation,
            detector_separation: g.detector_separation,
            distance: g.distance,
            area1: g.area1,
            area2: g.area2,
            k0: g.k0,
            kappa: 1.0,
            kappa_prime: 1.0,
            theta3: 0.0,
            theta4: 0.0,
            sweep_var: None,
            sweep_start: 0.0,
            sweep_stop: std::f64::consts::PI,
            sweep_steps: 9,
            sweep_mc: false,
            scan: None,
            scan_points: 8,
            seed: DEFAULT_SEED,
            n_samples: 1_000_000,
            n_streams: 8,
            output: OutputFormat::Json,
            out_path: None,
        }
    }
}

#[derive(Debug, Clone, Default, Parser)]
#[command(
    name = "lune",
    version,
    about = "Intensity correlations with polarizers: closed forms and Monte Carlo checks"
)]
pub struct Args {
    /// JSON config file: a flat key-value object, or a previous JSON output
    /// (its embedded config is used). Flags override file values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, value_enum)]
    pub setup: Option<SetupKind>,
    /// Source separation s in meters.
    #[arg(long, allow_hyphen_values = true)]
    pub source_separation: Option<f64>,
    /// Detector separation d in meters.
    #[arg(long, allow_hyphen_values = true)]
    pub detector_separation: Option<f64>,
    /// Axial source-to-detector distance l in meters.
    #[arg(long, allow_hyphen_values = true)]
    pub distance: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub area1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub area2: Option<f64>,
    /// Wavenumber in 1/m.
    #[arg(long, allow_hyphen_values = true)]
    pub k0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub kappa_prime: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub theta3: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub theta4: Option<f64>,
    /// Read angle flags (theta3, theta4, angular sweep bounds) in degrees.
    #[arg(long)]
    pub degrees: bool,
    #[arg(long = "var", value_enum)]
    pub sweep_var: Option<SweepVar>,
    #[arg(long = "start", allow_hyphen_values = true)]
    pub sweep_start: Option<f64>,
    #[arg(long = "stop", allow_hyphen_values = true)]
    pub sweep_stop: Option<f64>,
    #[arg(long = "steps", allow_hyphen_values = true)]
    pub sweep_steps: Option<usize>,
    /// Include Monte Carlo estimates in a sweep.
    #[arg(long = "mc")]
    pub sweep_mc: bool,
    #[arg(long, value_enum)]
    pub scan: Option<ScanVar>,
    #[arg(long, allow_hyphen_values = true)]
    pub scan_points: Option<usize>,
    /// Random seed; defaults to the LUNE_SEED environment variable, then 1.
    #[arg(long, allow_hyphen_values = true)]
    pub seed: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    pub n_samples: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    pub n_streams: Option<u64>,
    #[arg(long, value_enum)]
    pub output: Option<OutputFormat>,
    /// Output file; standard output when absent.
    #[arg(long = "out")]
    pub out_path: Option<PathBuf>,
}

/// Read a config file: either a flat [`RunConfig`] object or a JSON output
/// document carrying one under `"config"`.
pub fn load_config_file(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .with_context(|| format!("config file {} is not valid JSON", path.display()))?;
    let inner = match value.get("config") {
        Some(c) if value.get("tool").is_some() => c.clone(),
        _ => value,
    };
    serde_json::from_value(inner.clone()).map_err(|e| {
        let culprit = offending_key(&inner)
            .map(|k| format!(" (field `{k}`)"))
            .unwrap_or_default();
        anyhow::anyhow!("invalid config in {}{culprit}: {e}", path.display())
    })
}

/// First key that fails to deserialize on its own; serde_json's value
/// errors carry no path.
fn offending_key(value: &serde_json::Value) -> Option<String> {
    value.as_object()?.iter().find_map(|(k, v)| {
        let single = serde_json::json!({ k: v });
        serde_json::from_value::<RunConfig>(single)
            .is_err()
            .then(|| k.clone())
    })
}

impl Args {
    /// Merge defaults, file, and flags into a validated config.
    ///
    /// Seed precedence: `--seed`, then the file, then `LUNE_SEED`, then
    /// [`DEFAULT_SEED`].
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_config_file(path)?,
            None => RunConfig::default(),
        };
        let file_has_seed = match &self.config {
            Some(path) => file_sets_key(path, "seed")?,
            None => false,
        };

        let angle = |x: f64| if self.degrees { x.to_radians() } else { x };
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            };
            ($field:ident, $map:expr) => {
                if let Some(v) = self.$field {
                    cfg.$field = $map(v);
                }
            };
        }
        set!(mode);
        set!(setup);
        set!(source_separation);
        set!(detector_separation);
        set!(distance);
        set!(area1);
        set!(area2);
        set!(k0);
        set!(kappa);
        set!(kappa_prime);
        set!(theta3, angle);
        set!(theta4, angle);
        if let Some(v) = self.sweep_var {
            cfg.sweep_var = Some(v);
        }
        let sweep_angle = cfg.sweep_var.is_some_and(SweepVar::is_angle);
        if let Some(v) = self.sweep_start {
            cfg.sweep_start = if sweep_angle { angle(v) } else { v };
        }
        if let Some(v) = self.sweep_stop {
            cfg.sweep_stop = if sweep_angle { angle(v) } else { v };
        }
        set!(sweep_steps);
        if self.sweep_mc {
            cfg.sweep_mc = true;
        }
        if let Some(v) = self.scan {
            cfg.scan = Some(v);
        }
        set!(scan_points);
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        } else if !file_has_seed {
            if let Some(seed) = env_seed()? {
                cfg.seed = seed;
            }
        }
        set!(n_samples);
        set!(n_streams);
        set!(output);
        if let Some(p) = &self.out_path {
            cfg.out_path = Some(p.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).with_context(|| {
            format!("invalid config: {SEED_ENV} must be an unsigned 64-bit integer, got {v:?}")
        }),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(e).context(format!("invalid config: cannot read {SEED_ENV}")),
    }
}

fn file_sets_key(path: &Path, key: &str) -> Result<bool> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let inner = match value.get("config") {
        Some(c) if value.get("tool").is_some() => c,
        _ => &value,
    };
    Ok(inner.get(key).is_some())
}

fn finite(field: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        bail!("invalid config: `{field}` must be finite, got {v}");
    }
    Ok(())
}

impl RunConfig {
    pub fn geometry(&self) -> SetupGeometry {
        SetupGeometry {
            source_separation: self.source_separation,
            detector_separation: self.detector_separation,
            distance: self.distance,
            area1: self.area1,
            area2: self.area2,
            k0: self.k0,
        }
    }

    pub fn setup_model(&self) -> Setup {
        match self.setup {
            SetupKind::Hbt => Setup::Hbt(self.geometry()),
            SetupKind::Mz => Setup::Mz,
        }
    }

    pub fn params(&self) -> EnsembleParams {
        EnsembleParams {
            kappa: self.kappa,
            kappa_prime: self.kappa_prime,
        }
    }

    pub fn mc_config(&self) -> McConfig {
        McConfig {
            n_samples: self.n_samples,
            seed: self.seed,
            n_streams: self.n_streams,
            setup: self.setup_model(),
            params: self.params(),
            theta3: self.theta3,
            theta4: self.theta4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        finite("theta3", self.theta3)?;
        finite("theta4", self.theta4)?;
        self.params()
            .validate()
            .map_err(|e| anyhow::anyhow!("invalid config: {e}"))?;
        if self.setup == SetupKind::Hbt {
            self.geometry()
                .validate()
                .map_err(|e| anyhow::anyhow!("invalid config: {e}"))?;
        }
        let needs_samples = matches!(self.mode, Mode::Montecarlo | Mode::Audit)
            || (self.mode == Mode::Sweep && self.sweep_mc);
        if needs_samples {
            if self.n_samples == 0 {
                bail!("invalid config: `n_samples` must be at least 1");
            }
            if self.n_streams == 0 {
                bail!("invalid config: `n_streams` must be at least 1");
            }
        }
        if self.mode == Mode::Sweep {
            if self.sweep_var.is_none() {
                bail!("invalid config: `sweep_var` (--var) is required in sweep mode");
            }
            if self.sweep_steps < 2 {
                bail!(
                    "invalid config: `sweep_steps` must be at least 2, got {}",
                    self.sweep_steps
                );
            }
            finite("sweep_start", self.sweep_start)?;
            finite("sweep_stop", self.sweep_stop)?;
            if matches!(self.sweep_var, Some(SweepVar::Kappa | SweepVar::KappaPrime))
                && (self.sweep_start < 0.0 || self.sweep_stop < 0.0)
            {
                bail!("invalid config: `sweep_start`/`sweep_stop` must be non-negative when sweeping an intensity");
            }
        }
        if self.mode == Mode::Montecarlo && self.scan.is_some() && self.scan_points == 0 {
            bail!("invalid config: `scan_points` must be at least 1");
        }
        Ok(())
    }

    /// Inclusive, evenly spaced sweep grid.
    pub fn sweep_grid(&self) -> Vec<f64> {
        let n = self.sweep_steps;
        let step = (self.sweep_stop - self.sweep_start) / (n - 1) as f64;
        (0..n)
            .map(|i| {
                if i == n - 1 {
                    self.sweep_stop
                } else {
                    self.sweep_start + step * i as f64
                }
            })
            .collect()
    }

    /// `scan_points` angles evenly covering `[0, π)`.
    pub fn scan_grid(&self) -> Vec<f64> {
        let n = self.scan_points;
        (0..n)
            .map(|i| std::f64::consts::PI * i as f64 / n as f64)
            .collect()
    }

    /// This config with the swept variable set to `value`.
    pub fn at_sweep_point(&self, value: f64) -> RunConfig {
        let mut c = self.clone();
        match self.sweep_var {
            Some(SweepVar::Theta3) => c.theta3 = value,
            Some(SweepVar::Theta4) => c.theta4 = value,
            Some(SweepVar::Kappa) => c.kappa = value,
            Some(SweepVar::KappaPrime) => c.kappa_prime = value,
            None => {}
        }
        c
    }
}
