//! Output documents. JSON runs are self-describing (tool, version, resolved
//! config, seed, result); CSV runs are plain tables with a fixed header per
//! mode, and numbers carry 15 significant digits.

use std::io::Write;

use anyhow::Result;
use lune_core::montecarlo::{FringeScan, MomentAudit};
use lune_core::{CorrelationBreakdown, McEstimate, TermLabel};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const TOOL: &str = "lune";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub var_value: f64,
    pub gamma_analytic: f64,
    pub gamma_mc_mean: Option<f64>,
    pub gamma_mc_stderr: Option<f64>,
    pub z_score: Option<f64>,
    pub trace_phase: Option<f64>,
    pub solid_angle: f64,
}

/// One Monte Carlo estimate at a specific angle pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub theta3: f64,
    pub theta4: f64,
    pub estimate: McEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Outcome {
    Analytic {
        breakdown: CorrelationBreakdown,
    },
    Montecarlo {
        estimates: Vec<EstimateRow>,
        scan: Option<FringeScan>,
        breakdown: CorrelationBreakdown,
    },
    Audit {
        audit: MomentAudit,
    },
    Sweep {
        rows: Vec<SweepRow>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    /// Seconds since the Unix epoch; the only field that differs between
    /// identical runs.
    pub timestamp: u64,
    pub seed: u64,
    pub config: RunConfig,
    pub warnings: Vec<String>,
    pub result: Outcome,
}

impl Report {
    pub fn new(config: &RunConfig, warnings: Vec<String>, result: Outcome) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Report {
            tool: TOOL.to_owned(),
            version: VERSION.to_owned(),
            timestamp,
            seed: config.seed,
            config: config.clone(),
            warnings,
            result,
        }
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let cfg = &self.config;
        match &self.result {
            Outcome::Analytic { breakdown } => {
                let mut header: Vec<String> = [
                    "setup",
                    "kappa",
                    "kappa_prime",
                    "theta3",
                    "theta4",
                    "total",
                    "geometric_term",
                    "trace_re",
                    "trace_im",
                    "trace_phase",
                    "solid_angle",
                ]
                .map(String::from)
                .to_vec();
                for label in TermLabel::all() {
                    header.push(format!("term_{label}_re"));
                    header.push(format!("term_{label}_im"));
                }
                out.write_record(&header)?;
                let b = breakdown;
                let mut row = vec![
                    setup_name(cfg).to_owned(),
                    num(cfg.kappa),
                    num(cfg.kappa_prime),
                    num(cfg.theta3),
                    num(cfg.theta4),
                    num(b.total),
                    num(b.geometric_term),
                    num(b.trace.re),
                    num(b.trace.im),
                    opt(b.trace_phase),
                    num(b.solid_angle),
                ];
                for label in TermLabel::all() {
                    row.push(num(b.terms[&label].re));
                    row.push(num(b.terms[&label].im));
                }
                out.write_record(&row)?;
            }
            Outcome::Montecarlo { estimates, .. } => {
                out.write_record([
                    "setup",
                    "kappa",
                    "kappa_prime",
                    "theta3",
                    "theta4",
                    "seed",
                    "n_streams",
                    "n_effective",
                    "mean",
                    "std_error",
                    "analytic",
                    "z_score",
                ])?;
                for e in estimates {
                    out.write_record([
                        setup_name(cfg).to_owned(),
                        num(cfg.kappa),
                        num(cfg.kappa_prime),
                        num(e.theta3),
                        num(e.theta4),
                        cfg.seed.to_string(),
                        cfg.n_streams.to_string(),
                        e.estimate.n_effective.to_string(),
                        num(e.estimate.mean),
                        num(e.estimate.std_error),
                        num(e.estimate.analytic),
                        num(e.estimate.z_score),
                    ])?;
                }
            }
            Outcome::Audit { audit } => {
                out.write_record([
                    "moment",
                    "order",
                    "estimate_re",
                    "estimate_im",
                    "expected_re",
                    "expected_im",
                    "stderr_re",
                    "stderr_im",
                    "z",
                ])?;
                for e in &audit.entries {
                    out.write_record([
                        e.label.clone(),
                        e.order.to_string(),
                        num(e.estimate.re),
                        num(e.estimate.im),
                        num(e.expected.re),
                        num(e.expected.im),
                        num(e.std_error.re),
                        num(e.std_error.im),
                        num(e.z),
                    ])?;
                }
            }
            Outcome::Sweep { rows } => {
                out.write_record(SWEEP_COLUMNS)?;
                for r in rows {
                    out.write_record([
                        num(r.var_value),
                        num(r.gamma_analytic),
                        opt(r.gamma_mc_mean),
                        opt(r.gamma_mc_stderr),
                        opt(r.z_score),
                        opt(r.trace_phase),
                        num(r.solid_angle),
                    ])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

pub const SWEEP_COLUMNS: [&str; 7] = [
    "var_value",
    "gamma_analytic",
    "gamma_mc_mean",
    "gamma_mc_stderr",
    "z_score",
    "trace_phase",
    "solid_angle",
];

fn setup_name(cfg: &RunConfig) -> &'static str {
    cfg.setup_model().name()
}

/// 15 significant digits in scientific notation.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.14e}")
    } else {
        x.to_string()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
