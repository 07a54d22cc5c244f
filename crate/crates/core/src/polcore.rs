//! Exact 2×2 polarization algebra.
//!
//! Jones vectors, the circular and linear polarizer projectors, the τ-matrices
//! of polarization optics (a cyclic relabeling of the Pauli matrices), traces
//! of projector products, four-vertex Bargmann invariants and the lune solid
//! angle on the Poincaré sphere.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::ops::{Add, Deref, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Tolerance for the Hermitian / idempotent checks on projector values.
pub const PROJECTOR_TOL: f64 = 1e-12;

/// Overlaps below this magnitude are treated as exactly orthogonal.
pub const OVERLAP_EPS: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolError {
    #[error("tau index must be 1, 2 or 3, got {0}")]
    TauIndex(usize),
    #[error("trace of an empty matrix product is not defined here")]
    EmptyProduct,
    #[error("matrix is not a projector (hermiticity error {hermitian:e}, idempotence error {idempotent:e})")]
    NotProjector { hermitian: f64, idempotent: f64 },
    #[error("frame mismatch: expected {expected}, found {found}")]
    FrameMismatch { expected: Frame, found: Frame },
}

/// Which Cartesian pair a two-component field is written in.
///
/// Paraxial fields travelling along z use `XY`; a wave travelling along x is
/// written in its `YZ` components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frame {
    XY,
    YZ,
}

impl Frame {
    /// The frame a mirror at 45° maps this one onto.
    pub fn swapped(self) -> Frame {
        match self {
            Frame::XY => Frame::YZ,
            Frame::YZ => Frame::XY,
        }
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Frame::XY => f.write_str("xy"),
            Frame::YZ => f.write_str("yz"),
        }
    }
}

/// A two-component complex transverse field in a stated frame. Not
/// normalized: it carries an amplitude as well as a polarization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesVector {
    c: [C64; 2],
    frame: Frame,
}

impl JonesVector {
    pub fn new(c0: C64, c1: C64) -> Self {
        Self::with_frame(c0, c1, Frame::XY)
    }

    pub fn with_frame(c0: C64, c1: C64, frame: Frame) -> Self {
        JonesVector { c: [c0, c1], frame }
    }

    pub fn zero(frame: Frame) -> Self {
        Self::with_frame(ZERO, ZERO, frame)
    }

    pub fn components(&self) -> [C64; 2] {
        self.c
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    /// Same components, reinterpreted in another frame. Only optical elements
    /// that change the propagation direction should call this.
    pub(crate) fn retagged(self, frame: Frame) -> Self {
        JonesVector { c: self.c, frame }
    }

    /// `⟨self|other⟩`, conjugate-linear in `self`.
    pub fn inner(&self, other: &JonesVector) -> C64 {
        self.c[0].conj() * other.c[0] + self.c[1].conj() * other.c[1]
    }

    /// `E†E`, the intensity carried by the field.
    pub fn intensity(&self) -> f64 {
        self.c[0].norm_sqr() + self.c[1].norm_sqr()
    }

    pub fn scale(self, k: C64) -> Self {
        JonesVector {
            c: [self.c[0] * k, self.c[1] * k],
            frame: self.frame,
        }
    }

    /// Superpose two fields written in the same frame.
    pub fn try_add(self, other: JonesVector) -> Result<JonesVector, PolError> {
        if self.frame != other.frame {
            return Err(PolError::FrameMismatch {
                expected: self.frame,
                found: other.frame,
            });
        }
        Ok(JonesVector {
            c: [self.c[0] + other.c[0], self.c[1] + other.c[1]],
            frame: self.frame,
        })
    }

    pub fn max_abs_diff(&self, other: &JonesVector) -> f64 {
        (self.c[0] - other.c[0])
            .norm()
            .max((self.c[1] - other.c[1]).norm())
    }

    /// `|self⟩⟨self|`.
    pub fn outer(&self) -> PolMatrix {
        let [a, b] = self.c;
        PolMatrix::from_rows([[a * a.conj(), a * b.conj()], [b * a.conj(), b * b.conj()]])
    }
}

/// A complex 2×2 matrix acting on Jones vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolMatrix {
    m: [[C64; 2]; 2],
}

impl PolMatrix {
    pub const fn from_rows(m: [[C64; 2]; 2]) -> Self {
        PolMatrix { m }
    }

    pub const fn identity() -> Self {
        PolMatrix::from_rows([[ONE, ZERO], [ZERO, ONE]])
    }

    pub const fn zero() -> Self {
        PolMatrix::from_rows([[ZERO, ZERO], [ZERO, ZERO]])
    }

    pub fn rows(&self) -> [[C64; 2]; 2] {
        self.m
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.m[row][col]
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.m;
        PolMatrix::from_rows([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn trace(&self) -> C64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn scale(&self, k: C64) -> Self {
        let m = &self.m;
        PolMatrix::from_rows([[m[0][0] * k, m[0][1] * k], [m[1][0] * k, m[1][1] * k]])
    }

    /// Matrix action on a field; the frame tag is carried through unchanged.
    pub fn apply(&self, v: &JonesVector) -> JonesVector {
        let m = &self.m;
        let [a, b] = v.c;
        JonesVector {
            c: [m[0][0] * a + m[0][1] * b, m[1][0] * a + m[1][1] * b],
            frame: v.frame,
        }
    }

    pub fn max_abs_diff(&self, other: &PolMatrix) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..2 {
            for c in 0..2 {
                worst = worst.max((self.m[r][c] - other.m[r][c]).norm());
            }
        }
        worst
    }

    pub fn approx_eq(&self, other: &PolMatrix, tol: f64) -> bool {
        self.max_abs_diff(other) <= tol
    }

    pub fn is_finite(&self) -> bool {
        self.m
            .iter()
            .flatten()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn idempotence_error(&self) -> f64 {
        self.max_abs_diff(&(*self * *self))
    }
}

impl Mul for PolMatrix {
    type Output = PolMatrix;

    fn mul(self, rhs: PolMatrix) -> PolMatrix {
        let a = &self.m;
        let b = &rhs.m;
        PolMatrix::from_rows([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

impl Add for PolMatrix {
    type Output = PolMatrix;

    fn add(self, rhs: PolMatrix) -> PolMatrix {
        let (a, b) = (&self.m, &rhs.m);
        PolMatrix::from_rows([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl Sub for PolMatrix {
    type Output = PolMatrix;

    fn sub(self, rhs: PolMatrix) -> PolMatrix {
        self + (-rhs)
    }
}

impl Neg for PolMatrix {
    type Output = PolMatrix;

    fn neg(self) -> PolMatrix {
        self.scale(-ONE)
    }
}

impl Mul<f64> for PolMatrix {
    type Output = PolMatrix;

    fn mul(self, k: f64) -> PolMatrix {
        self.scale(C64::new(k, 0.0))
    }
}

/// A [`PolMatrix`] verified to be Hermitian and idempotent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projector(PolMatrix);

impl Projector {
    pub fn new(m: PolMatrix) -> Result<Self, PolError> {
        let hermitian = m.hermiticity_error();
        let idempotent = m.idempotence_error();
        if !m.is_finite() || hermitian > PROJECTOR_TOL || idempotent > PROJECTOR_TOL {
            return Err(PolError::NotProjector {
                hermitian,
                idempotent,
            });
        }
        Ok(Projector(m))
    }

    pub fn matrix(&self) -> PolMatrix {
        self.0
    }
}

impl Deref for Projector {
    type Target = PolMatrix;

    fn deref(&self) -> &PolMatrix {
        &self.0
    }
}

impl From<Projector> for PolMatrix {
    fn from(p: Projector) -> PolMatrix {
        p.0
    }
}

/// A pure polarization state: right or left circular, or linear at an angle
/// (radians, measured from the first frame axis).
///
/// Linear angles are stored as given. `Linear(θ)` and `Linear(θ + π)` name
/// the same state; use [`PolState::is_equivalent`] to compare.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PolState {
    R,
    L,
    Linear(f64),
}

impl PolState {
    pub fn ket(&self) -> JonesVector {
        ket(*self)
    }

    pub fn projector(&self) -> Projector {
        projector(*self)
    }

    /// The same state with a linear angle reduced to `[0, π)`.
    pub fn canonical(&self) -> PolState {
        match *self {
            PolState::Linear(theta) => {
                let t = theta.rem_euclid(PI);
                // rem_euclid can round up to exactly π
                PolState::Linear(if t >= PI { 0.0 } else { t })
            }
            other => other,
        }
    }

    pub fn is_equivalent(&self, other: &PolState, tol: f64) -> bool {
        match (self.canonical(), other.canonical()) {
            (PolState::R, PolState::R) | (PolState::L, PolState::L) => true,
            (PolState::Linear(a), PolState::Linear(b)) => {
                let d = (a - b).abs();
                d <= tol || (PI - d) <= tol
            }
            _ => false,
        }
    }
}

/// Unit Jones vector for a polarization state.
pub fn ket(state: PolState) -> JonesVector {
    let h = FRAC_1_SQRT_2;
    match state {
        PolState::R => JonesVector::new(C64::new(h, 0.0), C64::new(0.0, h)),
        PolState::L => JonesVector::new(C64::new(h, 0.0), C64::new(0.0, -h)),
        PolState::Linear(theta) => {
            JonesVector::new(C64::new(theta.cos(), 0.0), C64::new(theta.sin(), 0.0))
        }
    }
}

/// `|s⟩⟨s|` for the state, in closed form.
pub fn projector(state: PolState) -> Projector {
    let m = match state {
        // ½(1 ± τ₃)
        PolState::R => PolMatrix::from_rows([[ONE, -I], [I, ONE]]) * 0.5,
        PolState::L => PolMatrix::from_rows([[ONE, I], [-I, ONE]]) * 0.5,
        PolState::Linear(theta) => {
            let (s, c) = theta.sin_cos();
            PolMatrix::from_rows([
                [C64::new(c * c, 0.0), C64::new(c * s, 0.0)],
                [C64::new(c * s, 0.0), C64::new(s * s, 0.0)],
            ])
        }
    };
    Projector::new(m).expect("closed-form polarizer is a projector")
}

/// Right-circular polarizer.
pub fn p_r() -> PolMatrix {
    projector(PolState::R).matrix()
}

/// Left-circular polarizer.
pub fn p_l() -> PolMatrix {
    projector(PolState::L).matrix()
}

/// Linear polarizer at `theta`.
pub fn p_lin(theta: f64) -> PolMatrix {
    projector(PolState::Linear(theta)).matrix()
}

/// τ-matrices: τ₁ = σ₃, τ₂ = σ₁, τ₃ = σ₂.
pub fn tau(index: usize) -> Result<PolMatrix, PolError> {
    match index {
        1 => Ok(PolMatrix::from_rows([[ONE, ZERO], [ZERO, -ONE]])),
        2 => Ok(PolMatrix::from_rows([[ZERO, ONE], [ONE, ZERO]])),
        3 => Ok(PolMatrix::from_rows([[ZERO, -I], [I, ZERO]])),
        other => Err(PolError::TauIndex(other)),
    }
}

pub(crate) fn tau2() -> PolMatrix {
    PolMatrix::from_rows([[ZERO, ONE], [ONE, ZERO]])
}

/// Trace of the ordered product `ms[0] · ms[1] · …`.
pub fn trace_product(ms: &[PolMatrix]) -> Result<C64, PolError> {
    let (first, rest) = ms.split_first().ok_or(PolError::EmptyProduct)?;
    Ok(rest.iter().fold(*first, |acc, m| acc * *m).trace())
}

/// Four-vertex Bargmann invariant `⟨s1|s2⟩⟨s2|s3⟩⟨s3|s4⟩⟨s4|s1⟩`, computed
/// from the inner-product chain. Exactly zero when any adjacent pair is
/// orthogonal.
pub fn bargmann4(s1: PolState, s2: PolState, s3: PolState, s4: PolState) -> C64 {
    let kets = [ket(s1), ket(s2), ket(s3), ket(s4)];
    let mut product = ONE;
    for i in 0..4 {
        let overlap = kets[i].inner(&kets[(i + 1) % 4]);
        if overlap.norm() < OVERLAP_EPS {
            return ZERO;
        }
        product *= overlap;
    }
    product
}

/// Signed solid angle of the lune between the meridians at longitudes
/// `2θ₃` and `2θ₄` on the Poincaré sphere: `4(θ₃ − θ₄)`. Not reduced mod 4π.
pub fn lune_solid_angle(theta3: f64, theta4: f64) -> f64 {
    4.0 * (theta3 - theta4)
}

/// Conjugation by τ₂, i.e. the effect of a 45° mirror on a polarization
/// matrix: `τ₂ m τ₂`.
pub fn mirror_conjugate(m: &PolMatrix) -> PolMatrix {
    let t = tau2();
    t * *m * t
}

/// Reduce an angle to `(−π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let r = x.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Argument of `z` in `(−π, π]`, or `None` for `z = 0`.
pub fn phase(z: C64) -> Option<f64> {
    if z.re == 0.0 && z.im == 0.0 {
        return None;
    }
    let a = z.im.atan2(z.re);
    Some(if a <= -PI { PI } else { a })
}

/// Whether `a ≡ b (mod 2π)` to within `tol`.
pub fn phases_congruent(a: f64, b: f64, tol: f64) -> bool {
    wrap_phase(a - b).abs() <= tol
}
