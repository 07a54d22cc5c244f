//! Intensity correlations `Γ = ⟨I_a I_b⟩` for the two setups.
//!
//! * `Hbt`: two paraxial sources behind right/left circular polarizers,
//!   two detectors behind linear polarizers at `θ₃`, `θ₄`.
//! * `Mz`: two orthogonal plane waves through right-circular polarizers,
//!   mixed on a 45° half-silvered mirror, then linear polarizers.
//!
//! The closed forms are written out term by term. The same sixteen terms are
//! also produced by pushing each labelled product through the Wick engine,
//! which is how the vanishing of the ten mixed terms gets checked rather than
//! assumed.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::ensemble::{
    wick_expectation, EnsembleError, EnsembleParams, Factor, FieldSample, Source,
};
use crate::geometry::{GeometryError, PropagationFactors, SetupGeometry};
use crate::polcore::{
    lune_solid_angle, p_l, p_lin, p_r, phase, tau2, trace_product, Frame, JonesVector, PolError,
    PolMatrix,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrelatorError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Polarization(#[from] PolError),
    #[error("polarizer angle {name} must be finite, got {value}")]
    BadAngle { name: &'static str, value: f64 },
}

/// Which bracketed sum each of the four field factors is taken from, read
/// left to right: `E_a† … E_b` at the first detector, `E_c† … E_d` at the
/// second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermLabel(pub [Source; 4]);

impl TermLabel {
    /// All sixteen labels in order `1111, 1112, …, 2222`.
    pub fn all() -> [TermLabel; 16] {
        let mut out = [TermLabel([Source::One; 4]); 16];
        for (n, slot) in out.iter_mut().enumerate() {
            let mut digits = [Source::One; 4];
            for (k, d) in digits.iter_mut().enumerate() {
                if (n >> (3 - k)) & 1 == 1 {
                    *d = Source::Two;
                }
            }
            *slot = TermLabel(digits);
        }
        out
    }

    /// Labels that survive ensemble averaging: each source appears once
    /// conjugated and once plain, or not at all.
    pub fn survivors() -> [TermLabel; 6] {
        ["1111", "1122", "1221", "2112", "2211", "2222"].map(|s| s.parse().expect("static label"))
    }

    pub fn is_survivor(&self) -> bool {
        Self::survivors().contains(self)
    }

    pub fn sources(&self) -> [Source; 4] {
        self.0
    }
}

impl fmt::Display for TermLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.0 {
            write!(f, "{}", s.digit())?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("term label must be four digits from {{1, 2}}, got {0:?}")]
pub struct BadTermLabel(pub String);

impl FromStr for TermLabel {
    type Err = BadTermLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = s.as_bytes();
        if bytes.len() != 4 {
            return Err(BadTermLabel(s.to_owned()));
        }
        let mut digits = [Source::One; 4];
        for (d, b) in digits.iter_mut().zip(bytes) {
            *d = match b {
                b'1' => Source::One,
                b'2' => Source::Two,
                _ => return Err(BadTermLabel(s.to_owned())),
            };
        }
        Ok(TermLabel(digits))
    }
}

impl Serialize for TermLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TermLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The experimental layout being modelled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Setup {
    Hbt(SetupGeometry),
    Mz,
}

impl Setup {
    /// Frames the two source fields are written in.
    pub fn input_frames(&self) -> (Frame, Frame) {
        match self {
            Setup::Hbt(_) => (Frame::XY, Frame::XY),
            Setup::Mz => (Frame::XY, Frame::YZ),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Setup::Hbt(_) => "hbt",
            Setup::Mz => "mz",
        }
    }
}

/// The angle-dependent part of `Γ` is `coefficient · cos(phase_argument)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityInputs {
    pub coefficient: f64,
    pub phase_argument: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationBreakdown {
    pub total: f64,
    /// All sixteen terms; the ten mixed ones are stored as exact zeros.
    pub terms: BTreeMap<TermLabel, C64>,
    /// `1221 + 2112`, written in its closed cosine form.
    pub geometric_term: f64,
    pub visibility_inputs: VisibilityInputs,
    /// The four-projector trace that carries the angle dependence.
    pub trace: C64,
    /// Its phase in `(−π, π]`.
    pub trace_phase: Option<f64>,
    /// Signed lune solid angle whose half is minus the trace phase.
    pub solid_angle: f64,
}

impl CorrelationBreakdown {
    pub fn term(&self, label: &str) -> C64 {
        let label: TermLabel = label.parse().expect("valid term label");
        self.terms[&label]
    }
}

fn check_angles(theta3: f64, theta4: f64) -> Result<(), CorrelatorError> {
    for (name, value) in [("theta3", theta3), ("theta4", theta4)] {
        if !value.is_finite() {
            return Err(CorrelatorError::BadAngle { name, value });
        }
    }
    Ok(())
}

fn assemble(
    survivors: [(&str, C64); 6],
    geometric_term: f64,
    visibility_inputs: VisibilityInputs,
    trace: C64,
    solid_angle: f64,
) -> CorrelationBreakdown {
    let mut terms: BTreeMap<TermLabel, C64> = TermLabel::all()
        .into_iter()
        .map(|l| (l, C64::new(0.0, 0.0)))
        .collect();
    for (label, value) in survivors {
        terms.insert(label.parse().expect("static label"), value);
    }
    let total = terms.values().map(|z| z.re).sum();
    CorrelationBreakdown {
        total,
        terms,
        geometric_term,
        visibility_inputs,
        trace,
        trace_phase: phase(trace),
        solid_angle,
    }
}

/// Closed-form correlation for the paraxial two-source layout.
pub fn gamma_hbt(
    geometry: &SetupGeometry,
    params: &EnsembleParams,
    theta3: f64,
    theta4: f64,
) -> Result<CorrelationBreakdown, CorrelatorError> {
    params.validate()?;
    check_angles(theta3, theta4)?;
    let (pf, _) = geometry.propagation_factors()?;
    let (k, kp) = (params.kappa, params.kappa_prime);
    let (u13, u23, u14, u24) = (pf.u13, pf.u23, pf.u14, pf.u24);

    let trace = trace_product(&[p_r(), p_lin(theta3), p_l(), p_lin(theta4)])?;
    let t1221 = u13.conj() * u23 * u24.conj() * u14 * (k * kp) * trace;
    let survivors = [
        (
            "1111",
            C64::from(u13.norm_sqr() * u14.norm_sqr() * k * k / 2.0),
        ),
        (
            "1122",
            C64::from(u13.norm_sqr() * u24.norm_sqr() * k * kp / 4.0),
        ),
        ("1221", t1221),
        ("2112", t1221.conj()),
        (
            "2211",
            C64::from(u23.norm_sqr() * u14.norm_sqr() * k * kp / 4.0),
        ),
        (
            "2222",
            C64::from(u23.norm_sqr() * u24.norm_sqr() * kp * kp / 2.0),
        ),
    ];

    let r = pf.distances;
    let g = geometry;
    let lead = g.k0 * g.distance / (2.0 * PI);
    let area_ratio = g.area1 * g.area2 / (r.r13 * r.r23 * r.r14 * r.r24);
    let coefficient = 0.5 * k * kp * lead.powi(4) * area_ratio * area_ratio;
    let phase_argument = 2.0 * (theta3 - theta4);
    Ok(assemble(
        survivors,
        coefficient * phase_argument.cos(),
        VisibilityInputs {
            coefficient,
            phase_argument,
        },
        trace,
        lune_solid_angle(theta3, theta4),
    ))
}

/// Closed-form correlation for the Mach-Zehnder layout. Path lengths from
/// the mirror to the detectors do not enter.
pub fn gamma_mz(
    params: &EnsembleParams,
    theta3: f64,
    theta4: f64,
) -> Result<CorrelationBreakdown, CorrelatorError> {
    params.validate()?;
    check_angles(theta3, theta4)?;
    let (k, kp) = (params.kappa, params.kappa_prime);
    // the mirror turns P(θ₃) into P(π/2 − θ₃) on the reflected branch
    let reflected_angle = FRAC_PI_2 - theta3;
    let trace = trace_product(&[p_r(), p_lin(reflected_angle), p_l(), p_lin(theta4)])?;
    let t1221 = trace * (k * kp / 4.0);
    let survivors = [
        ("1111", C64::from(k * k / 8.0)),
        ("1122", C64::from(k * kp / 16.0)),
        ("1221", t1221),
        ("2112", t1221.conj()),
        ("2211", C64::from(k * kp / 16.0)),
        ("2222", C64::from(kp * kp / 8.0)),
    ];
    let coefficient = -k * kp / 8.0;
    let phase_argument = 2.0 * (theta3 + theta4);
    Ok(assemble(
        survivors,
        coefficient * phase_argument.cos(),
        VisibilityInputs {
            coefficient,
            phase_argument,
        },
        trace,
        lune_solid_angle(reflected_angle, theta4),
    ))
}

/// Dispatch to [`gamma_hbt`] or [`gamma_mz`].
pub fn gamma(
    setup: &Setup,
    params: &EnsembleParams,
    theta3: f64,
    theta4: f64,
) -> Result<CorrelationBreakdown, CorrelatorError> {
    match setup {
        Setup::Hbt(g) => gamma_hbt(g, params, theta3, theta4),
        Setup::Mz => gamma_mz(params, theta3, theta4),
    }
}

/// Linear map from the two source fields to the two detector fields,
/// polarizers included: `E(D_k) = Σ_a M[k][a] E^(a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorMap {
    m: [[PolMatrix; 2]; 2],
    output_frames: (Frame, Frame),
}

impl DetectorMap {
    pub fn hbt(pf: &PropagationFactors, theta3: f64, theta4: f64) -> Self {
        let (p3, p4) = (p_lin(theta3), p_lin(theta4));
        DetectorMap {
            m: [
                [p3 * p_r().scale(pf.u13), p3 * p_l().scale(pf.u23)],
                [p4 * p_r().scale(pf.u14), p4 * p_l().scale(pf.u24)],
            ],
            output_frames: (Frame::XY, Frame::XY),
        }
    }

    pub fn mz(theta3: f64, theta4: f64) -> Self {
        let reflect = -(tau2() * p_r()) * FRAC_1_SQRT_2;
        let transmit = p_r() * FRAC_1_SQRT_2;
        let (p3, p4) = (p_lin(theta3), p_lin(theta4));
        DetectorMap {
            m: [[p3 * reflect, p3 * transmit], [p4 * transmit, p4 * reflect]],
            output_frames: (Frame::YZ, Frame::XY),
        }
    }

    pub fn for_setup(setup: &Setup, theta3: f64, theta4: f64) -> Result<Self, CorrelatorError> {
        check_angles(theta3, theta4)?;
        Ok(match setup {
            Setup::Hbt(g) => {
                let (pf, _) = g.propagation_factors()?;
                Self::hbt(&pf, theta3, theta4)
            }
            Setup::Mz => Self::mz(theta3, theta4),
        })
    }

    /// Matrix carrying source `source` to detector `detector ∈ {0, 1}`.
    pub fn matrix(&self, detector: usize, source: Source) -> PolMatrix {
        self.m[detector][source.index()]
    }

    /// Detector fields for a draw. Frame tags on the input are not checked.
    pub fn fields(&self, draw: &FieldSample) -> (JonesVector, JonesVector) {
        let at = |k: usize, frame: Frame| {
            let a = self.m[k][0].apply(&draw.e1).components();
            let b = self.m[k][1].apply(&draw.e2).components();
            JonesVector::with_frame(a[0] + b[0], a[1] + b[1], frame)
        };
        (at(0, self.output_frames.0), at(1, self.output_frames.1))
    }

    /// `(I_first, I_second)` for a draw.
    #[inline]
    pub fn intensities(&self, draw: &FieldSample) -> (f64, f64) {
        let (a, b) = self.fields(draw);
        (a.intensity(), b.intensity())
    }

    /// Every labelled term `⟨(M_a E_a)†(M_b E_b) (M_c E_c)†(M_d E_d)⟩`,
    /// each expanded into components and averaged by Wick pairing.
    pub fn sixteen_terms(&self, params: &EnsembleParams) -> BTreeMap<TermLabel, C64> {
        let mut out = BTreeMap::new();
        for label in TermLabel::all() {
            let [a, b, c, d] = label.sources();
            let first = self.matrix(0, a).adjoint() * self.matrix(0, b);
            let second = self.matrix(1, c).adjoint() * self.matrix(1, d);
            let mut sum = C64::new(0.0, 0.0);
            for al in 0..2 {
                for be in 0..2 {
                    for ga in 0..2 {
                        for de in 0..2 {
                            let w = wick_expectation(
                                &[
                                    Factor::conj(a, al),
                                    Factor::plain(b, be),
                                    Factor::conj(c, ga),
                                    Factor::plain(d, de),
                                ],
                                params,
                            );
                            sum += first.get(al, be) * second.get(ga, de) * w;
                        }
                    }
                }
            }
            out.insert(label, sum);
        }
        out
    }
}

/// All sixteen terms of the paraxial layout via the Wick engine.
pub fn gamma_hbt_16terms(
    geometry: &SetupGeometry,
    params: &EnsembleParams,
    theta3: f64,
    theta4: f64,
) -> Result<BTreeMap<TermLabel, C64>, CorrelatorError> {
    params.validate()?;
    let map = DetectorMap::for_setup(&Setup::Hbt(*geometry), theta3, theta4)?;
    Ok(map.sixteen_terms(params))
}

/// All sixteen terms of the Mach-Zehnder layout via the Wick engine.
pub fn gamma_mz_16terms(
    params: &EnsembleParams,
    theta3: f64,
    theta4: f64,
) -> Result<BTreeMap<TermLabel, C64>, CorrelatorError> {
    params.validate()?;
    let map = DetectorMap::for_setup(&Setup::Mz, theta3, theta4)?;
    Ok(map.sixteen_terms(params))
}

/// Paraxial detector fields:
/// `E(x₃) = P(θ₃)(u₁₃ P_R E⁽¹⁾ + u₂₃ P_L E⁽²⁾)` and likewise at `x₄`.
pub fn hbt_detector_fields(
    draw: &FieldSample,
    pf: &PropagationFactors,
    theta3: f64,
    theta4: f64,
) -> (JonesVector, JonesVector) {
    let e1 = p_r().apply(&draw.e1.retagged(Frame::XY));
    let e2 = p_l().apply(&draw.e2.retagged(Frame::XY));
    let at = |u1: C64, u2: C64, theta: f64| {
        let sum = e1
            .scale(u1)
            .try_add(e2.scale(u2))
            .expect("both fields in the xy frame");
        p_lin(theta).apply(&sum)
    };
    (at(pf.u13, pf.u23, theta3), at(pf.u14, pf.u24, theta4))
}

/// 45° half-silvered mirror acting on a field already past its circular
/// polarizer. Returns `(reflected, transmitted)`: reflection applies
/// `−τ₂/√2` and hands the field to the other frame, transmission scales by
/// `1/√2`.
pub fn beam_splitter(field: &JonesVector) -> (JonesVector, JonesVector) {
    let reflected = (-tau2() * FRAC_1_SQRT_2)
        .apply(field)
        .retagged(field.frame().swapped());
    let transmitted = field.scale(C64::from(FRAC_1_SQRT_2));
    (reflected, transmitted)
}

/// Mach-Zehnder detector fields, following each beam through its polarizer,
/// the mirror and the final linear polarizer. Source 1 must be written in
/// the xy frame and source 2 in yz. Detector 1 comes out in yz, detector 2
/// in xy.
pub fn mz_detector_fields(
    draw: &FieldSample,
    theta3: f64,
    theta4: f64,
) -> Result<(JonesVector, JonesVector), CorrelatorError> {
    for (expected, found) in [(Frame::XY, draw.e1.frame()), (Frame::YZ, draw.e2.frame())] {
        if expected != found {
            return Err(PolError::FrameMismatch { expected, found }.into());
        }
    }
    let (a_reflected, a_transmitted) = beam_splitter(&p_r().apply(&draw.e1));
    let (b_reflected, b_transmitted) = beam_splitter(&p_r().apply(&draw.e2));
    let d1 = p_lin(theta3).apply(&a_reflected.try_add(b_transmitted)?);
    let d2 = p_lin(theta4).apply(&a_transmitted.try_add(b_reflected)?);
    Ok((d1, d2))
}
