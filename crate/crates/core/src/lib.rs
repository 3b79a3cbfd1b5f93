//! Normalized ground states of radial nonlinear Schrödinger equations
//!
//! ```text
//! -Δu + V(|x|) u - λ u - f(|x|, u) = 0,    Q(u) = ½∫u² = c
//! ```
//!
//! computed on a truncated radial grid. The crate traces solution branches in
//! the multiplier λ, assembles the mass curve `c ↦ (λ(c), m(c))`, and reports
//! folds of the mass (zeros of `⟨L⁻¹u, u⟩`) and Maxwell points where the
//! energy minimizer switches branch segments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod continuation;
pub mod elliptic;
pub mod error;
pub mod flow;
pub mod grid;
pub mod linalg;
pub mod mass_curve;
pub mod model;
pub mod spectral;

pub use continuation::{Branch, BranchPoint, ContinuationOptions, FoldRecord};
pub use elliptic::{Certificate, NewtonOptions, Profile};
pub use error::{Error, Result};
pub use flow::{FlowOptions, FlowResult};
pub use grid::{GridFunction, GridId, RadialGrid};
pub use linalg::SymmetricTridiagonal;
pub use mass_curve::{MassCurve, MassCurveOptions};
pub use model::{NonlinearTerm, Potential, ProblemModel, TermKind};
pub use spectral::{SpectrumReport, Stability};

/// Formats a float with 17 significant digits, enough for an exact round trip.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
