//! Low spectrum of the linearized operator and the slope `⟨L_u⁻¹u, u⟩`.

use serde::Serialize;

use crate::elliptic::{self, Profile};
use crate::error::Result;
use crate::grid::{GridFunction, RadialGrid};
use crate::linalg::{self, SymmetricTridiagonal};
use crate::model::ProblemModel;

pub const MARGIN_RTOL: f64 = 1e-6;
const MARGINAL_BAND: f64 = 1e-8;

/// The `k` smallest eigenvalues of `L` (ascending), by Sturm bisection and inverse iteration.
pub fn eigs_smallest(l: &SymmetricTridiagonal, k: usize) -> Vec<f64> {
    let (d, e) = l.symmetrized();
    let tol = 1e-10 * l.norm_estimate().max(1.0);
    (0..k.min(d.len()))
        .map(|j| {
            let est = linalg::bisect_eigenvalue(&d, &e, j, tol);
            linalg::refine_eigenvalue(&d, &e, est, 2.0 * tol)
        })
        .collect()
}

/// Eigenvalues with indices `range` in ascending order.
fn eigs_range(d: &[f64], e: &[f64], tol: f64, range: std::ops::Range<usize>) -> Vec<f64> {
    range
        .map(|j| {
            let est = linalg::bisect_eigenvalue(d, e, j, tol);
            linalg::refine_eigenvalue(d, e, est, 2.0 * tol)
        })
        .collect()
}

/// `1e-6 · ‖L‖`, the smallest admissible distance of the spectrum from zero.
pub fn margin_floor(l: &SymmetricTridiagonal) -> f64 {
    margin_floor_rel(l, MARGIN_RTOL)
}

pub fn margin_floor_rel(l: &SymmetricTridiagonal, rtol: f64) -> f64 {
    rtol * l.norm_estimate()
}

/// Number of negative eigenvalues of `L` and the distance of its spectrum from zero.
pub fn morse_and_margin_of(l: &SymmetricTridiagonal) -> (usize, f64) {
    let (d, e) = l.symmetrized();
    let tol = 1e-10 * l.norm_estimate().max(1.0);
    let index = linalg::sturm_count(&d, &e, 0.0);
    let lo = index.saturating_sub(1);
    let hi = (index + 1).min(d.len());
    let margin = eigs_range(&d, &e, tol, lo..hi)
        .into_iter()
        .map(f64::abs)
        .fold(f64::INFINITY, f64::min);
    (index, margin)
}

pub fn morse_and_margin(m: &ProblemModel, g: &RadialGrid, p: &Profile) -> Result<(usize, f64)> {
    let l = elliptic::linearize(m, g, p.lambda, &p.u)?;
    Ok(morse_and_margin_of(&l))
}

/// `⟨L_u⁻¹u, u⟩`, equal to `dQ/dλ` along a branch.
pub fn slope(m: &ProblemModel, g: &RadialGrid, p: &Profile) -> Result<f64> {
    let l = elliptic::linearize(m, g, p.lambda, &p.u)?;
    let a = elliptic::solve_tridiagonal(&l, &p.u)?;
    g.inner(&a, &p.u)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub eigenvalues_low: Vec<f64>,
    pub morse_index: usize,
    pub nondegeneracy_margin: f64,
    pub margin_floor: f64,
    pub slope: f64,
    /// `L_u⁻¹u`, the λ-derivative of the branch.
    #[serde(skip)]
    pub adjoint_state: GridFunction,
    /// `‖L_u(L_u⁻¹u) - u‖ / ‖u‖` in the weighted norm.
    pub adjoint_residual: f64,
}

pub fn spectrum_report(
    m: &ProblemModel,
    g: &RadialGrid,
    lambda: f64,
    u: &GridFunction,
    k: usize,
) -> Result<SpectrumReport> {
    let l = elliptic::linearize(m, g, lambda, u)?;
    spectrum_report_of(&l, g, u, k)
}

pub(crate) fn spectrum_report_of(
    l: &SymmetricTridiagonal,
    g: &RadialGrid,
    u: &GridFunction,
    k: usize,
) -> Result<SpectrumReport> {
    let eigenvalues_low = eigs_smallest(l, k);
    let (morse_index, nondegeneracy_margin) = morse_and_margin_of(l);
    let adjoint_state = elliptic::solve_tridiagonal(l, u)?;
    let slope = g.dot(&adjoint_state.values, &u.values);
    let lu = l.apply(&adjoint_state.values);
    let diff: Vec<f64> = lu.iter().zip(&u.values).map(|(a, b)| a - b).collect();
    let adjoint_residual = g.norm(&diff) / g.norm(&u.values).max(f64::MIN_POSITIVE);
    Ok(SpectrumReport {
        eigenvalues_low,
        morse_index,
        nondegeneracy_margin,
        margin_floor: margin_floor(l),
        slope,
        adjoint_state,
        adjoint_residual,
    })
}

/// Vakhitov–Kolokolov reading of the slope.
///
/// Written in the frequency `ω = -λ`, the criterion is `dQ/dω > 0` for
/// stability, i.e. `dQ/dλ = slope < 0`. A literal reading of the criterion in
/// the multiplier `λ` flips the sign; [`Stability::literal_lambda_reading`]
/// reports that alternative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

pub fn vk_flag(slope: f64) -> Stability {
    if slope.abs() < MARGINAL_BAND || slope.is_nan() {
        Stability::Marginal
    } else if slope < 0.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    }
}

impl Stability {
    pub const CONVENTION: &'static str =
        "frequency convention: stable iff dQ/d(-lambda) > 0, i.e. slope = dQ/dlambda < 0";

    pub fn literal_lambda_reading(self) -> Stability {
        match self {
            Stability::Stable => Stability::Unstable,
            Stability::Unstable => Stability::Stable,
            Stability::Marginal => Stability::Marginal,
        }
    }
}
