//! Classical intensity interferometry with polarizers.
//!
//! Closed-form fourth-order correlations `⟨I_a I_b⟩` for two layouts (a
//! paraxial two-source, two-detector arrangement and a Mach-Zehnder mixer),
//! the 2×2 polarization algebra behind them, a Wick-pairing oracle for
//! Gaussian moments, and a Monte Carlo engine that checks the closed forms
//! by direct sampling of unpolarized circular Gaussian sources.

pub mod correlators;
pub mod ensemble;
pub mod geometry;
pub mod montecarlo;
pub mod polcore;
pub mod stats;

pub use correlators::{
    gamma, gamma_hbt, gamma_hbt_16terms, gamma_mz, gamma_mz_16terms, CorrelationBreakdown,
    CorrelatorError, DetectorMap, Setup, TermLabel, VisibilityInputs,
};
pub use ensemble::{EnsembleParams, FieldSample, Source};
pub use geometry::{ParaxialWarning, PropagationFactors, SetupGeometry};
pub use montecarlo::{
    estimate_gamma, fringe_scan, moment_audit, FringeFit, FringeScan, McConfig, McError,
    McEstimate, MomentAudit, ScanAngle,
};
pub use polcore::{Frame, JonesVector, PolMatrix, PolState, C64};
