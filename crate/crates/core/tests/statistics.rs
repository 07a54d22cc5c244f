//! Sampler and estimator behaviour that only shows up at scale.

use lune_core::ensemble::{fourth_moment, sample, substream, Source};
use lune_core::stats::{z_score, ComplexStats, RunningStats};
use lune_core::{
    estimate_gamma, moment_audit, EnsembleParams, Frame, McConfig, Setup, SetupGeometry, C64,
};

const BAND: f64 = 5.0;

fn mz_config(n: u64, seed: u64, streams: u64) -> McConfig {
    McConfig {
        n_samples: n,
        seed,
        n_streams: streams,
        setup: Setup::Mz,
        params: EnsembleParams::new(1.0, 1.0).unwrap(),
        theta3: 0.2,
        theta4: 0.5,
    }
}

fn check(stats: &ComplexStats, expected: C64) {
    let (m, se) = (stats.mean(), stats.std_error());
    let z = z_score(m.re, expected.re, se.re)
        .abs()
        .max(z_score(m.im, expected.im, se.im).abs());
    assert!(z < BAND, "estimate {m} vs {expected}, se {se}");
}

#[test]
fn intensity_and_circularity_of_the_sampler() {
    let p = EnsembleParams::new(1.0, 2.5).unwrap();
    let mut rng = substream(99, 0);
    let mut intensity = RunningStats::new();
    let mut co = ComplexStats::default();
    let mut co_conj = ComplexStats::default();
    let mut coherency = [[ComplexStats::default(); 2]; 2];
    let mut cross = [[ComplexStats::default(); 2]; 2];
    for _ in 0..1_000_000 {
        let s = sample(&p, (Frame::XY, Frame::XY), &mut rng);
        let a = s.e1.components();
        let b = s.e2.components();
        intensity.push(a[0].norm_sqr());
        co.push(a[0] * a[1]);
        co_conj.push(b[0].conj() * b[1].conj());
        for i in 0..2 {
            for j in 0..2 {
                coherency[i][j].push(b[i].conj() * b[j]);
                cross[i][j].push(a[i].conj() * b[j]);
            }
        }
    }
    // κ = 1 ⇒ |E_x|² is exponential with unit mean and unit variance
    assert!((intensity.mean() - 1.0).abs() < 5e-3);
    check(&co, C64::new(0.0, 0.0));
    check(&co_conj, C64::new(0.0, 0.0));
    for i in 0..2 {
        for j in 0..2 {
            let diag = if i == j { 2.5 } else { 0.0 };
            check(&coherency[i][j], C64::new(diag, 0.0));
            check(&cross[i][j], C64::new(0.0, 0.0));
        }
    }
}

#[test]
fn fourth_moment_error_shrinks_as_root_n() {
    let p = EnsembleParams::new(1.0, 1.0).unwrap();
    let rms_error = |n: usize, seed: u64| {
        let mut rng = substream(seed, 0);
        let mut acc = vec![ComplexStats::default(); 16];
        for _ in 0..n {
            let s = sample(&p, (Frame::XY, Frame::XY), &mut rng);
            let e = s.e1.components();
            for (k, stats) in acc.iter_mut().enumerate() {
                let (ap, bp, a, b) = (k >> 3 & 1, k >> 2 & 1, k >> 1 & 1, k & 1);
                stats.push(e[ap].conj() * e[bp].conj() * e[a] * e[b]);
            }
        }
        let sq: f64 = acc
            .iter()
            .enumerate()
            .map(|(k, st)| {
                let (ap, bp, a, b) = (k >> 3 & 1, k >> 2 & 1, k >> 1 & 1, k & 1);
                (st.mean() - fourth_moment(&p, Source::One, ap, bp, a, b)).norm_sqr()
            })
            .sum();
        (sq / 16.0).sqrt()
    };
    let coarse = rms_error(10_000, 5);
    let fine = rms_error(1_000_000, 6);
    let ratio = coarse / fine;
    assert!(
        (5.0..=20.0).contains(&ratio),
        "error ratio {ratio} ({coarse} / {fine})"
    );
}

#[test]
fn std_error_scales_as_inverse_root_n() {
    let se: Vec<f64> = [10_000u64, 100_000, 1_000_000]
        .iter()
        .map(|&n| estimate_gamma(&mz_config(n, 17, 4)).unwrap().std_error)
        .collect();
    let root10 = 10f64.sqrt();
    for w in se.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio / root10 - 1.0).abs() < 0.2, "ratio {ratio}");
    }
}

#[test]
fn stream_partition_changes_only_the_draws() {
    let n = 400_000;
    let base = estimate_gamma(&mz_config(n, 8, 1)).unwrap();
    for streams in [2u64, 5, 16] {
        let other = estimate_gamma(&mz_config(n, 8, streams)).unwrap();
        assert_eq!(other.n_effective, n);
        let combined = (base.std_error.powi(2) + other.std_error.powi(2)).sqrt();
        assert!(
            (base.mean - other.mean).abs() < BAND * combined,
            "{streams} streams: {} vs {}",
            other.mean,
            base.mean
        );
        assert_ne!(other.mean, base.mean);
    }
}

#[test]
fn reruns_are_bit_identical() {
    let cfg = McConfig {
        n_samples: 123_457,
        seed: 0xDEAD_BEEF,
        n_streams: 7,
        setup: Setup::Hbt(SetupGeometry::reference()),
        params: EnsembleParams::new(0.7, 1.9).unwrap(),
        theta3: 1.0,
        theta4: -0.3,
    };
    let a = estimate_gamma(&cfg).unwrap();
    let b = estimate_gamma(&cfg).unwrap();
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    assert_eq!(a.z_score.to_bits(), b.z_score.to_bits());

    let audit_a = moment_audit(&cfg).unwrap();
    let audit_b = moment_audit(&cfg).unwrap();
    assert_eq!(audit_a, audit_b);
}
