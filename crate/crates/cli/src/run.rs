//! Executes a resolved [`RunConfig`] and writes the report.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use lune_core::montecarlo::estimate_gamma_block;
use lune_core::{estimate_gamma, fringe_scan, gamma, moment_audit};

use crate::config::{Mode, OutputFormat, RunConfig, SetupKind};
use crate::report::{EstimateRow, Outcome, Report, SweepRow};

pub fn execute(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    let mut warnings = Vec::new();
    if cfg.setup == SetupKind::Hbt {
        let (_, warning) = cfg.geometry().propagation_factors()?;
        if let Some(w) = warning {
            warnings.push(w.to_string());
        }
    }
    let outcome = match cfg.mode {
        Mode::Analytic => Outcome::Analytic {
            breakdown: gamma(&cfg.setup_model(), &cfg.params(), cfg.theta3, cfg.theta4)?,
        },
        Mode::Montecarlo => {
            let mc = cfg.mc_config();
            let breakdown = gamma(&mc.setup, &mc.params, mc.theta3, mc.theta4)?;
            match cfg.scan {
                Some(which) => {
                    let scan = fringe_scan(&mc, which.into(), &cfg.scan_grid())?;
                    let estimates = scan
                        .points
                        .iter()
                        .map(|p| {
                            let (theta3, theta4) = match which {
                                crate::config::ScanVar::Theta3 => (p.angle, cfg.theta4),
                                crate::config::ScanVar::Theta4 => (cfg.theta3, p.angle),
                            };
                            EstimateRow {
                                theta3,
                                theta4,
                                estimate: p.estimate,
                            }
                        })
                        .collect();
                    Outcome::Montecarlo {
                        estimates,
                        scan: Some(scan),
                        breakdown,
                    }
                }
                None => Outcome::Montecarlo {
                    estimates: vec![EstimateRow {
                        theta3: cfg.theta3,
                        theta4: cfg.theta4,
                        estimate: estimate_gamma(&mc)?,
                    }],
                    scan: None,
                    breakdown,
                },
            }
        }
        Mode::Audit => Outcome::Audit {
            audit: moment_audit(&cfg.mc_config())?,
        },
        Mode::Sweep => Outcome::Sweep { rows: sweep(cfg)? },
    };
    Ok(Report::new(cfg, warnings, outcome))
}

fn sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    cfg.sweep_grid()
        .into_iter()
        .enumerate()
        .map(|(i, value)| {
            let point = cfg.at_sweep_point(value);
            point
                .params()
                .validate()
                .map_err(|e| anyhow::anyhow!("invalid config: {e}"))?;
            let b = gamma(
                &point.setup_model(),
                &point.params(),
                point.theta3,
                point.theta4,
            )?;
            let mc = if cfg.sweep_mc {
                Some(estimate_gamma_block(&point.mc_config(), i as u64)?)
            } else {
                None
            };
            Ok(SweepRow {
                var_value: value,
                gamma_analytic: b.total,
                gamma_mc_mean: mc.as_ref().map(|e| e.mean),
                gamma_mc_stderr: mc.as_ref().map(|e| e.std_error),
                z_score: mc.as_ref().map(|e| e.z_score),
                trace_phase: b.trace_phase,
                solid_angle: b.solid_angle,
            })
        })
        .collect()
}

/// Run and write the report to `out_path` or stdout. CSV written to a file
/// gets a JSON sidecar so the table stays reproducible.
pub fn run(cfg: &RunConfig) -> Result<()> {
    let report = execute(cfg)?;
    match &cfg.out_path {
        Some(path) => {
            write_file(path, |w| emit(&report, cfg.output, w))?;
            if cfg.output == OutputFormat::Csv {
                write_file(&sidecar_path(path), |w| report.write_json(w))?;
            }
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            emit(&report, cfg.output, &mut w)?;
            w.flush()?;
        }
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

/// `<out>.meta.json`: the full JSON report accompanying a CSV table.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn write_file<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let context = || format!("cannot write output file {}", path.display());
    let mut w = BufWriter::new(File::create(path).with_context(context)?);
    body(&mut w).with_context(context)?;
    w.flush().with_context(context)
}

fn emit<W: Write>(report: &Report, format: OutputFormat, w: W) -> Result<()> {
    match format {
        OutputFormat::Json => report.write_json(w),
        OutputFormat::Csv => report.write_csv(w),
    }
}
