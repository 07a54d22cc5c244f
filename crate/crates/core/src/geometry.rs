//! Two-source, two-detector layout and the paraxial propagation factors.
//!
//! Sources sit on the x-axis at `x = ∓s/2`, detectors at `x = ∓d/2, z = l`.
//! Source 1 and detector 3 take the negative-x positions. Retarded-time
//! differences are neglected, so nothing here depends on time.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// `l ≥ PARAXIAL_RATIO · max(s, d)` counts as paraxial.
pub const PARAXIAL_RATIO: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("{field} must be finite and strictly positive, got {value}")]
    NotPositive { field: &'static str, value: f64 },
}

/// Emitted, not raised, when the layout is outside the paraxial regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParaxialWarning {
    pub distance: f64,
    pub max_separation: f64,
}

impl fmt::Display for ParaxialWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "axial distance {} is below {} x the largest separation {}; paraxial formulas may be inaccurate",
            self.distance, PARAXIAL_RATIO, self.max_separation
        )
    }
}

/// SI units throughout: meters, square meters, 1/m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetupGeometry {
    /// Distance between the two sources.
    pub source_separation: f64,
    /// Distance between the two detectors.
    pub detector_separation: f64,
    /// Axial source-to-detector distance.
    pub distance: f64,
    /// Effective area of source 1.
    pub area1: f64,
    /// Effective area of source 2.
    pub area2: f64,
    /// Mean wavenumber `ω₀/c`.
    pub k0: f64,
}

/// Source-to-detector distances; `rAB` runs from source A to detector B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distances {
    pub r13: f64,
    pub r23: f64,
    pub r14: f64,
    pub r24: f64,
}

/// Dimensionless factors `u_ab = −i k₀ l 𝒜_a / (2π ℛ_ab²)` together with the
/// distances they were computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationFactors {
    pub u13: C64,
    pub u23: C64,
    pub u14: C64,
    pub u24: C64,
    pub distances: Distances,
}

impl PropagationFactors {
    /// Factor from source `source ∈ {1, 2}` to detector `detector ∈ {3, 4}`.
    pub fn get(&self, source: usize, detector: usize) -> C64 {
        match (source, detector) {
            (1, 3) => self.u13,
            (2, 3) => self.u23,
            (1, 4) => self.u14,
            (2, 4) => self.u24,
            _ => panic!("no propagation factor from source {source} to detector {detector}"),
        }
    }
}

impl SetupGeometry {
    pub fn new(
        source_separation: f64,
        detector_separation: f64,
        distance: f64,
        area1: f64,
        area2: f64,
        k0: f64,
    ) -> Result<Self, GeometryError> {
        let g = SetupGeometry {
            source_separation,
            detector_separation,
            distance,
            area1,
            area2,
            k0,
        };
        g.validate()?;
        Ok(g)
    }

    /// Symmetric millimetre layout: s = d = 1 mm, l = 1 m, both areas 1 mm²,
    /// 500 nm light.
    pub fn reference() -> Self {
        SetupGeometry {
            source_separation: 1e-3,
            detector_separation: 1e-3,
            distance: 1.0,
            area1: 1e-6,
            area2: 1e-6,
            k0: 2.0 * PI / 500e-9,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let fields = [
            ("source_separation", self.source_separation),
            ("detector_separation", self.detector_separation),
            ("distance", self.distance),
            ("area1", self.area1),
            ("area2", self.area2),
            ("k0", self.k0),
        ];
        for (field, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(GeometryError::NotPositive { field, value });
            }
        }
        Ok(())
    }

    pub fn paraxial_warning(&self) -> Option<ParaxialWarning> {
        let max_separation = self.source_separation.max(self.detector_separation);
        if self.distance >= PARAXIAL_RATIO * max_separation {
            None
        } else {
            Some(ParaxialWarning {
                distance: self.distance,
                max_separation,
            })
        }
    }

    /// Euclidean distances for the symmetric placement. Does not validate, so
    /// degenerate layouts can be probed.
    pub fn distances(&self) -> Distances {
        let (s, d, l) = (
            self.source_separation,
            self.detector_separation,
            self.distance,
        );
        let near = (0.25 * (s - d) * (s - d) + l * l).sqrt();
        let far = (0.25 * (s + d) * (s + d) + l * l).sqrt();
        Distances {
            r13: near,
            r23: far,
            r14: far,
            r24: near,
        }
    }

    pub fn propagation_factors(
        &self,
    ) -> Result<(PropagationFactors, Option<ParaxialWarning>), GeometryError> {
        self.validate()?;
        let r = self.distances();
        let factor = |area: f64, dist: f64| {
            C64::new(
                0.0,
                -self.k0 * self.distance * area / (2.0 * PI * dist * dist),
            )
        };
        let pf = PropagationFactors {
            u13: factor(self.area1, r.r13),
            u23: factor(self.area2, r.r23),
            u14: factor(self.area1, r.r14),
            u24: factor(self.area2, r.r24),
            distances: r,
        };
        Ok((pf, self.paraxial_warning()))
    }
}
