//! Penalized least-squares density estimation for dependent data.
//!
//! Projection estimators on nested model collections (Haar wavelets,
//! trigonometric polynomials, piecewise polynomials on dyadic cells), a
//! penalized selection rule with β-mixing and τ-mixing penalty constants,
//! slope-heuristic calibration, seeded samplers for mixing processes and a
//! Monte Carlo harness for oracle and rate experiments.

pub mod basis;
pub mod besov;
pub mod calibration;
pub mod density;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod io;
pub mod models;
pub mod numeric;
pub mod processes;
pub mod risk;

pub use basis::{BasisFunctionIndex, BasisKind, BasisSystem};
pub use calibration::{MixingDecay, MixingFamily, MixingRate, SlopeReport};
pub use density::{DensityForm, DensityHandle};
pub use error::{Error, Result};
pub use estimator::{PenaltyRegime, PenaltySpec, ProjectionEstimate, Sample, SelectionResult};
pub use models::{ModelCollection, ModelIndexSet};
pub use processes::{ProcessKind, ProcessSpec};
pub use risk::{RiskReport, TrueCoefficients};
