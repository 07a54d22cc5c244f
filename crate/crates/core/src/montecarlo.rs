//! Direct simulation of the intensity correlation.
//!
//! Each draw samples both source fields, maps them to the detectors, and
//! records `I_first · I_second`. Work is split into `n_streams` equal chunks,
//! one ChaCha sub-stream each; per-stream accumulators are merged in stream
//! order, so results are bit-identical for a fixed `(seed, n_streams)` no
//! matter how rayon schedules the chunks.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correlators::{gamma, CorrelatorError, DetectorMap, Setup};
use crate::ensemble::{
    sample, substream, wick_expectation, EnsembleParams, Factor, FieldSample, Source,
};
use crate::polcore::{wrap_phase, Frame};
use crate::stats::{merge_tree, z_score, ComplexStats, RunningStats};

use std::f64::consts::PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("{0} must be at least 1")]
    ZeroCount(&'static str),
    #[error("scan grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Model(#[from] CorrelatorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_samples: u64,
    pub seed: u64,
    pub n_streams: u64,
    pub setup: Setup,
    pub params: EnsembleParams,
    pub theta3: f64,
    pub theta4: f64,
}

impl McConfig {
    pub fn validate(&self) -> Result<(), McError> {
        if self.n_samples == 0 {
            return Err(McError::ZeroCount("n_samples"));
        }
        if self.n_streams == 0 {
            return Err(McError::ZeroCount("n_streams"));
        }
        self.params.validate().map_err(CorrelatorError::from)?;
        DetectorMap::for_setup(&self.setup, self.theta3, self.theta4)?;
        Ok(())
    }

    /// Draws per stream; `n_samples` is rounded up to a multiple of
    /// `n_streams`.
    pub fn per_stream(&self) -> u64 {
        self.n_samples.div_ceil(self.n_streams)
    }

    pub fn n_effective(&self) -> u64 {
        self.per_stream() * self.n_streams
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_effective: u64,
    pub analytic: f64,
    pub z_score: f64,
}

fn run_streams<F>(cfg: &McConfig, stream_offset: u64, per_draw: F) -> RunningStats
where
    F: Fn(&FieldSample) -> f64 + Sync,
{
    let frames = cfg.setup.input_frames();
    let per_stream = cfg.per_stream();
    let parts: Vec<RunningStats> = (0..cfg.n_streams)
        .into_par_iter()
        .map(|s| {
            let mut rng = substream(cfg.seed, stream_offset + s);
            let mut acc = RunningStats::new();
            for _ in 0..per_stream {
                let draw = sample(&cfg.params, frames, &mut rng);
                acc.push(per_draw(&draw));
            }
            acc
        })
        .collect();
    merge_tree(&parts)
}

fn estimate_on_streams(cfg: &McConfig, stream_offset: u64) -> Result<McEstimate, McError> {
    cfg.validate()?;
    let map = DetectorMap::for_setup(&cfg.setup, cfg.theta3, cfg.theta4)?;
    let analytic = gamma(&cfg.setup, &cfg.params, cfg.theta3, cfg.theta4)?.total;
    let stats = run_streams(cfg, stream_offset, |draw| {
        let (a, b) = map.intensities(draw);
        a * b
    });
    let std_error = stats.std_error();
    Ok(McEstimate {
        mean: stats.mean(),
        std_error,
        n_effective: stats.count(),
        analytic,
        z_score: z_score(stats.mean(), analytic, std_error),
    })
}

/// Sample estimate of `⟨I_first I_second⟩` with its standard error, compared
/// against the closed form.
pub fn estimate_gamma(cfg: &McConfig) -> Result<McEstimate, McError> {
    estimate_on_streams(cfg, 0)
}

/// Like [`estimate_gamma`], but on sub-streams starting at `block · n_streams`,
/// giving a run that is statistically independent of every other block.
pub fn estimate_gamma_block(cfg: &McConfig, block: u64) -> Result<McEstimate, McError> {
    estimate_on_streams(cfg, block * cfg.n_streams)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanAngle {
    Theta3,
    Theta4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    pub angle: f64,
    pub estimate: McEstimate,
}

/// Fit of `A + C cos 2θ + S sin 2θ = A + R cos(2θ − φ)` over the scanned
/// angle, with `φ` compared against the value the closed form predicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseFit {
    pub amplitude: f64,
    pub phase: f64,
    pub phase_se: f64,
    pub expected_phase: f64,
    /// `phase − expected_phase`, reduced to `(−π, π]`.
    pub phase_error: f64,
    pub phase_z: f64,
}

/// Least-squares fit of the scan to `A + B·f(θ)`, where `f` is the known
/// angular dependence: `cos 2(θ₃ − θ₄)` for the paraxial layout and
/// `−cos 2(θ₃ + θ₄)` for the Mach-Zehnder layout. `B/A` is the fringe
/// visibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub offset: f64,
    pub offset_se: f64,
    pub amplitude: f64,
    pub amplitude_se: f64,
    pub covariance: f64,
    pub ratio: Option<f64>,
    pub ratio_se: Option<f64>,
    pub phase: Option<PhaseFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeScan {
    pub angle: ScanAngle,
    pub points: Vec<FringePoint>,
    /// `None` when the design matrix is singular (fewer than two distinct
    /// fringe values).
    pub fit: Option<FringeFit>,
}

fn with_angle(cfg: &McConfig, which: ScanAngle, angle: f64) -> McConfig {
    let mut c = *cfg;
    match which {
        ScanAngle::Theta3 => c.theta3 = angle,
        ScanAngle::Theta4 => c.theta4 = angle,
    }
    c
}

/// Known angular dependence of the fringe for this configuration.
fn fringe_shape(cfg: &McConfig) -> f64 {
    match cfg.setup {
        Setup::Hbt(_) => (2.0 * (cfg.theta3 - cfg.theta4)).cos(),
        Setup::Mz => -(2.0 * (cfg.theta3 + cfg.theta4)).cos(),
    }
}

/// The `φ` in `R cos(2θ − φ)` implied by the closed form when `which` is
/// scanned and the other angle is held.
fn expected_phase(cfg: &McConfig, which: ScanAngle) -> f64 {
    let held = match which {
        ScanAngle::Theta3 => cfg.theta4,
        ScanAngle::Theta4 => cfg.theta3,
    };
    match cfg.setup {
        Setup::Hbt(_) => wrap_phase(2.0 * held),
        Setup::Mz => wrap_phase(PI - 2.0 * held),
    }
}

/// Run one estimate per grid point, each on its own block of sub-streams,
/// and fit the fringe.
pub fn fringe_scan(cfg: &McConfig, which: ScanAngle, grid: &[f64]) -> Result<FringeScan, McError> {
    if grid.is_empty() {
        return Err(McError::EmptyGrid);
    }
    let mut points = Vec::with_capacity(grid.len());
    for (i, &angle) in grid.iter().enumerate() {
        let c = with_angle(cfg, which, angle);
        points.push(FringePoint {
            angle,
            estimate: estimate_gamma_block(&c, i as u64)?,
        });
    }
    let fit = fit_fringe(cfg, which, &points);
    Ok(FringeScan {
        angle: which,
        points,
        fit,
    })
}

fn fit_fringe(cfg: &McConfig, which: ScanAngle, points: &[FringePoint]) -> Option<FringeFit> {
    let ys: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.estimate.mean, p.estimate.std_error))
        .collect();
    let fixed_rows: Vec<Vec<f64>> = points
        .iter()
        .map(|p| vec![1.0, fringe_shape(&with_angle(cfg, which, p.angle))])
        .collect();
    let (beta, cov) = least_squares(&fixed_rows, &ys)?;
    let (a, b) = (beta[0], beta[1]);
    let (ratio, ratio_se) = if a != 0.0 {
        let r = b / a;
        let var =
            cov[1][1] / (a * a) + b * b * cov[0][0] / a.powi(4) - 2.0 * b * cov[0][1] / a.powi(3);
        (Some(r), Some(var.max(0.0).sqrt()))
    } else {
        (None, None)
    };

    let free_rows: Vec<Vec<f64>> = points
        .iter()
        .map(|p| vec![1.0, (2.0 * p.angle).cos(), (2.0 * p.angle).sin()])
        .collect();
    let phase = least_squares(&free_rows, &ys).and_then(|(beta, cov)| {
        let (c, s) = (beta[1], beta[2]);
        let r2 = c * c + s * s;
        if r2 == 0.0 {
            return None;
        }
        let var = (s * s * cov[1][1] + c * c * cov[2][2] - 2.0 * c * s * cov[1][2]) / (r2 * r2);
        let phase = s.atan2(c);
        let expected = expected_phase(cfg, which);
        let phase_se = var.max(0.0).sqrt();
        let phase_error = wrap_phase(phase - expected);
        Some(PhaseFit {
            amplitude: r2.sqrt(),
            phase,
            phase_se,
            expected_phase: expected,
            phase_error,
            phase_z: z_score(phase_error, 0.0, phase_se),
        })
    });

    Some(FringeFit {
        offset: a,
        offset_se: cov[0][0].max(0.0).sqrt(),
        amplitude: b,
        amplitude_se: cov[1][1].max(0.0).sqrt(),
        covariance: cov[0][1],
        ratio,
        ratio_se,
        phase,
    })
}

/// Linear least squares on `rows · β ≈ y`. With every `σ > 0` the fit is
/// weighted by `1/σ²` and the covariance is `(XᵀWX)⁻¹`; otherwise it is
/// unweighted with the residual variance as the noise scale.
fn least_squares(rows: &[Vec<f64>], ys: &[(f64, f64)]) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
    let p = rows.first()?.len();
    let n = rows.len();
    if n < p {
        return None;
    }
    let weighted = ys.iter().all(|&(_, se)| se > 0.0);
    let weight = |se: f64| if weighted { 1.0 / (se * se) } else { 1.0 };

    let mut normal = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for (x, &(y, se)) in rows.iter().zip(ys) {
        let w = weight(se);
        for i in 0..p {
            rhs[i] += w * x[i] * y;
            for j in 0..p {
                normal[i][j] += w * x[i] * x[j];
            }
        }
    }
    let inv = invert(normal)?;
    let beta: Vec<f64> = (0..p)
        .map(|i| (0..p).map(|j| inv[i][j] * rhs[j]).sum())
        .collect();

    let scale = if weighted {
        1.0
    } else if n > p {
        let rss: f64 = rows
            .iter()
            .zip(ys)
            .map(|(x, &(y, _))| {
                let fit: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
                (y - fit).powi(2)
            })
            .sum();
        rss / (n - p) as f64
    } else {
        0.0
    };
    let cov = inv
        .into_iter()
        .map(|row| row.into_iter().map(|v| v * scale).collect())
        .collect();
    Some((beta, cov))
}

/// Gauss-Jordan inverse with partial pivoting; `None` if singular.
fn invert(mut a: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = a[i][col];
                if f != 0.0 {
                    for j in 0..n {
                        a[i][j] -= f * a[col][j];
                        inv[i][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    Some(inv)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEntry {
    pub label: String,
    pub order: usize,
    pub estimate: C64,
    pub expected: C64,
    pub std_error: C64,
    /// Larger of the real- and imaginary-part z-scores in magnitude.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentAudit {
    pub n_effective: u64,
    pub entries: Vec<MomentEntry>,
    pub max_abs_z: f64,
}

fn factor_label(f: &Factor) -> String {
    format!(
        "E{}[{}]{}",
        f.source.digit(),
        f.component,
        if f.conjugated { "*" } else { "" }
    )
}

/// Every moment the audit checks: all first moments; within-source
/// `⟨E E⟩` and `⟨E* E⟩`; cross-source `⟨E⁽¹⁾ E⁽²⁾⟩` and `⟨E⁽¹⁾* E⁽²⁾⟩`; and
/// the sixteen `⟨E* E* E E⟩` tuples of each source.
pub fn audit_moments() -> Vec<Vec<Factor>> {
    let mut out = Vec::new();
    for s in Source::BOTH {
        for a in 0..2 {
            out.push(vec![Factor::plain(s, a)]);
        }
    }
    for s in Source::BOTH {
        for a in 0..2 {
            for b in a..2 {
                out.push(vec![Factor::plain(s, a), Factor::plain(s, b)]);
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                out.push(vec![Factor::conj(s, a), Factor::plain(s, b)]);
            }
        }
    }
    for a in 0..2 {
        for b in 0..2 {
            out.push(vec![
                Factor::plain(Source::One, a),
                Factor::plain(Source::Two, b),
            ]);
            out.push(vec![
                Factor::conj(Source::One, a),
                Factor::plain(Source::Two, b),
            ]);
        }
    }
    for s in Source::BOTH {
        for ap in 0..2 {
            for bp in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        out.push(vec![
                            Factor::conj(s, ap),
                            Factor::conj(s, bp),
                            Factor::plain(s, a),
                            Factor::plain(s, b),
                        ]);
                    }
                }
            }
        }
    }
    out
}

/// Estimate every moment in [`audit_moments`] from the sampler and compare
/// it with the Wick oracle. Only the sample count, seed, stream count and
/// intensities of `cfg` are used.
pub fn moment_audit(cfg: &McConfig) -> Result<MomentAudit, McError> {
    if cfg.n_samples == 0 {
        return Err(McError::ZeroCount("n_samples"));
    }
    if cfg.n_streams == 0 {
        return Err(McError::ZeroCount("n_streams"));
    }
    cfg.params.validate().map_err(CorrelatorError::from)?;
    let moments = audit_moments();
    let per_stream = cfg.per_stream();
    let frames = (Frame::XY, Frame::XY);

    let parts: Vec<Vec<ComplexStats>> = (0..cfg.n_streams)
        .into_par_iter()
        .map(|s| {
            let mut rng = substream(cfg.seed, s);
            let mut acc = vec![ComplexStats::default(); moments.len()];
            for _ in 0..per_stream {
                let draw = sample(&cfg.params, frames, &mut rng);
                for (m, stats) in moments.iter().zip(acc.iter_mut()) {
                    let v = m
                        .iter()
                        .fold(C64::new(1.0, 0.0), |p, f| p * f.evaluate(&draw));
                    stats.push(v);
                }
            }
            acc
        })
        .collect();

    let mut entries = Vec::with_capacity(moments.len());
    let mut max_abs_z = 0.0f64;
    for (k, m) in moments.iter().enumerate() {
        let re: Vec<RunningStats> = parts.iter().map(|p| p[k].re).collect();
        let im: Vec<RunningStats> = parts.iter().map(|p| p[k].im).collect();
        let stats = ComplexStats {
            re: merge_tree(&re),
            im: merge_tree(&im),
        };
        let expected = wick_expectation(m, &cfg.params);
        let (est, se) = (stats.mean(), stats.std_error());
        let z = z_score(est.re, expected.re, se.re)
            .abs()
            .max(z_score(est.im, expected.im, se.im).abs());
        max_abs_z = max_abs_z.max(z);
        entries.push(MomentEntry {
            label: m.iter().map(factor_label).collect::<Vec<_>>().join(" "),
            order: m.len(),
            estimate: est,
            expected,
            std_error: se,
            z,
        });
    }
    Ok(MomentAudit {
        n_effective: cfg.n_effective(),
        entries,
        max_abs_z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SetupGeometry;
    use std::f64::consts::FRAC_PI_4;

    fn mz(n: u64, k: f64, kp: f64, t3: f64, t4: f64) -> McConfig {
        McConfig {
            n_samples: n,
            seed: 20240917,
            n_streams: 8,
            setup: Setup::Mz,
            params: EnsembleParams::new(k, kp).unwrap(),
            theta3: t3,
            theta4: t4,
        }
    }

    #[test]
    fn rounds_samples_up_to_stream_multiple() {
        let mut c = mz(1001, 1.0, 1.0, 0.0, 0.0);
        assert_eq!(c.per_stream(), 126);
        assert_eq!(c.n_effective(), 1008);
        assert_eq!(estimate_gamma(&c).unwrap().n_effective, 1008);
        c.n_streams = 1;
        assert_eq!(c.n_effective(), 1001);
    }

    #[test]
    fn validates_config() {
        let mut c = mz(10, 1.0, 1.0, 0.0, 0.0);
        c.n_samples = 0;
        assert_eq!(estimate_gamma(&c), Err(McError::ZeroCount("n_samples")));
        c.n_samples = 10;
        c.n_streams = 0;
        assert_eq!(estimate_gamma(&c), Err(McError::ZeroCount("n_streams")));
        c.n_streams = 2;
        c.theta3 = f64::NAN;
        assert!(matches!(estimate_gamma(&c), Err(McError::Model(_))));
        assert_eq!(
            fringe_scan(&mz(10, 1.0, 1.0, 0.0, 0.0), ScanAngle::Theta3, &[]),
            Err(McError::EmptyGrid)
        );
    }

    #[test]
    fn single_source_mz() {
        let c = mz(200_000, 1.0, 0.0, 0.4, 1.3);
        let e = estimate_gamma(&c).unwrap();
        assert_eq!(e.analytic, 0.125);
        assert!(e.z_score.abs() < 5.0, "{e:?}");
    }

    #[test]
    fn hbt_quarter_turn() {
        let c = McConfig {
            n_samples: 200_000,
            seed: 3,
            n_streams: 4,
            setup: Setup::Hbt(SetupGeometry::reference()),
            params: EnsembleParams::new(1.0, 1.0).unwrap(),
            theta3: 0.1 + FRAC_PI_4,
            theta4: 0.1,
        };
        let e = estimate_gamma(&c).unwrap();
        let b = gamma(&c.setup, &c.params, c.theta3, c.theta4).unwrap();
        assert!(b.geometric_term.abs() < 1e-9 * b.total);
        assert!(e.z_score.abs() < 5.0, "{e:?}");
    }

    #[test]
    fn deterministic_for_fixed_seed_and_streams() {
        let c = mz(50_000, 1.0, 2.0, 0.3, 0.2);
        let a = estimate_gamma(&c).unwrap();
        let b = estimate_gamma(&c).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
        let mut other = c;
        other.seed += 1;
        assert_ne!(estimate_gamma(&other).unwrap().mean, a.mean);
    }

    #[test]
    fn zero_variance_sources() {
        let c = mz(1000, 0.0, 0.0, 0.3, 0.2);
        let grid: Vec<f64> = (0..8).map(|i| i as f64 * PI / 8.0).collect();
        let scan = fringe_scan(&c, ScanAngle::Theta3, &grid).unwrap();
        for p in &scan.points {
            assert_eq!(p.estimate.mean, 0.0);
            assert_eq!(p.estimate.z_score, 0.0);
        }
        let fit = scan.fit.unwrap();
        assert_eq!(fit.ratio, None);
        assert!(fit.phase.is_none());
    }

    #[test]
    fn least_squares_recovers_exact_line() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![1.0, i as f64]).collect();
        let ys: Vec<(f64, f64)> = (0..5).map(|i| (2.0 + 3.0 * i as f64, 0.1)).collect();
        let (beta, cov) = least_squares(&rows, &ys).unwrap();
        assert!((beta[0] - 2.0).abs() < 1e-12 && (beta[1] - 3.0).abs() < 1e-12);
        // Var(slope) = σ² / Σ(x − x̄)² = 0.01 / 10
        assert!((cov[1][1] - 1e-3).abs() < 1e-15);
        assert!(
            least_squares(&[vec![1.0, 1.0], vec![1.0, 1.0]], &[(1.0, 0.1), (2.0, 0.1)]).is_none()
        );
    }

    #[test]
    fn invert_known_matrix() {
        let inv = invert(vec![vec![4.0, 7.0], vec![2.0, 6.0]]).unwrap();
        let expected = [[0.6, -0.7], [-0.2, 0.4]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((inv[i][j] - expected[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn audit_list_covers_requested_moments() {
        let m = audit_moments();
        assert_eq!(m.iter().filter(|f| f.len() == 1).count(), 4);
        assert_eq!(m.iter().filter(|f| f.len() == 2).count(), 6 + 8 + 8);
        assert_eq!(m.iter().filter(|f| f.len() == 4).count(), 32);
    }

    #[test]
    fn small_audit_passes() {
        let c = mz(100_000, 1.0, 0.5, 0.0, 0.0);
        let audit = moment_audit(&c).unwrap();
        assert!(audit.max_abs_z < 5.0, "max |z| = {}", audit.max_abs_z);
    }
}
