//! Independent, centered, unpolarized circular complex-Gaussian sources.
//!
//! Each source field is a pair of complex components with
//! `⟨E*_α E_β⟩ = κ δ_αβ` and `⟨E_α E_β⟩ = 0`. Sampling draws every real and
//! imaginary part as an independent `N(0, κ/2)` variate. The closed-form
//! moments below and the Wick-pairing engine are the oracles the sampler is
//! audited against.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polcore::{Frame, JonesVector};

/// Random stream used for all sampling. ChaCha8 keyed by a 64-bit seed, with
/// the 64-bit stream id selecting an independent sub-stream.
pub type StreamRng = ChaCha8Rng;

/// Sub-stream `stream` of the generator keyed by `seed`.
pub fn substream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("{field} must be finite and non-negative, got {value}")]
    BadIntensity { field: &'static str, value: f64 },
}

/// Which of the two independent sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Source {
    One,
    Two,
}

impl Source {
    pub const BOTH: [Source; 2] = [Source::One, Source::Two];

    /// Zero-based position, for indexing per-source arrays.
    pub fn index(self) -> usize {
        match self {
            Source::One => 0,
            Source::Two => 1,
        }
    }

    /// The label digit, 1 or 2.
    pub fn digit(self) -> char {
        match self {
            Source::One => '1',
            Source::Two => '2',
        }
    }
}

/// Intensity scales `κ` (source 1) and `κ′` (source 2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub kappa: f64,
    pub kappa_prime: f64,
}

impl EnsembleParams {
    pub fn new(kappa: f64, kappa_prime: f64) -> Result<Self, EnsembleError> {
        let p = EnsembleParams { kappa, kappa_prime };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        for (field, value) in [("kappa", self.kappa), ("kappa_prime", self.kappa_prime)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(EnsembleError::BadIntensity { field, value });
            }
        }
        Ok(())
    }

    pub fn intensity(&self, source: Source) -> f64 {
        match source {
            Source::One => self.kappa,
            Source::Two => self.kappa_prime,
        }
    }
}

/// One joint draw of both source fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub e1: JonesVector,
    pub e2: JonesVector,
}

impl FieldSample {
    pub fn field(&self, source: Source) -> &JonesVector {
        match source {
            Source::One => &self.e1,
            Source::Two => &self.e2,
        }
    }
}

fn circular<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(sigma * re, sigma * im)
}

/// Draw both source fields, tagging them with the given frames.
pub fn sample<R: Rng + ?Sized>(
    params: &EnsembleParams,
    frames: (Frame, Frame),
    rng: &mut R,
) -> FieldSample {
    let s1 = (0.5 * params.kappa).sqrt();
    let s2 = (0.5 * params.kappa_prime).sqrt();
    let a = circular(s1, rng);
    let b = circular(s1, rng);
    let c = circular(s2, rng);
    let d = circular(s2, rng);
    FieldSample {
        e1: JonesVector::with_frame(a, b, frames.0),
        e2: JonesVector::with_frame(c, d, frames.1),
    }
}

fn delta(a: usize, b: usize) -> f64 {
    assert!(a < 2 && b < 2, "component index out of range: ({a}, {b})");
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// `⟨E*_α E_β⟩ = κ_a δ_αβ` for source `a`. Components are zero-based.
pub fn second_moment(params: &EnsembleParams, source: Source, alpha: usize, beta: usize) -> C64 {
    C64::new(params.intensity(source) * delta(alpha, beta), 0.0)
}

/// `⟨E*_α′ E*_β′ E_α E_β⟩ = κ_a² (δ_α′α δ_β′β + δ_α′β δ_β′α)`.
pub fn fourth_moment(
    params: &EnsembleParams,
    source: Source,
    alpha_p: usize,
    beta_p: usize,
    alpha: usize,
    beta: usize,
) -> C64 {
    let k = params.intensity(source);
    C64::new(
        k * k
            * (delta(alpha_p, alpha) * delta(beta_p, beta)
                + delta(alpha_p, beta) * delta(beta_p, alpha)),
        0.0,
    )
}

/// One field component in a moment expression, optionally conjugated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Factor {
    pub source: Source,
    pub component: usize,
    pub conjugated: bool,
}

impl Factor {
    pub fn plain(source: Source, component: usize) -> Self {
        Factor {
            source,
            component,
            conjugated: false,
        }
    }

    pub fn conj(source: Source, component: usize) -> Self {
        Factor {
            source,
            component,
            conjugated: true,
        }
    }

    /// Value of this factor in a concrete draw.
    pub fn evaluate(&self, draw: &FieldSample) -> C64 {
        let v = draw.field(self.source).components()[self.component];
        if self.conjugated {
            v.conj()
        } else {
            v
        }
    }
}

/// Ensemble average of a product of field components by Gaussian moment
/// factorization.
///
/// Sums over every perfect matching that pairs each conjugated factor with
/// an unconjugated factor of the same source; each pair contributes its
/// second moment. Sources are independent, so the result is the product over
/// sources of a permanent. Unbalanced products average to zero.
pub fn wick_expectation(factors: &[Factor], params: &EnsembleParams) -> C64 {
    let mut total = C64::new(1.0, 0.0);
    for source in Source::BOTH {
        let conj: Vec<usize> = factors
            .iter()
            .filter(|f| f.source == source && f.conjugated)
            .map(|f| f.component)
            .collect();
        let plain: Vec<usize> = factors
            .iter()
            .filter(|f| f.source == source && !f.conjugated)
            .map(|f| f.component)
            .collect();
        if conj.len() != plain.len() {
            return C64::new(0.0, 0.0);
        }
        let mut used = vec![false; plain.len()];
        total *= matchings(&conj, &plain, &mut used, params, source);
    }
    total
}

fn matchings(
    conj: &[usize],
    plain: &[usize],
    used: &mut [bool],
    params: &EnsembleParams,
    source: Source,
) -> C64 {
    let Some((&alpha, rest)) = conj.split_first() else {
        return C64::new(1.0, 0.0);
    };
    let mut sum = C64::new(0.0, 0.0);
    for j in 0..plain.len() {
        if used[j] {
            continue;
        }
        let pair = second_moment(params, source, alpha, plain[j]);
        if pair == C64::new(0.0, 0.0) {
            continue;
        }
        used[j] = true;
        sum += pair * matchings(rest, plain, used, params, source);
        used[j] = false;
    }
    sum
}
