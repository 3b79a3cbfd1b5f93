//! Potentials and power-sum nonlinearities.
//!
//! The nonlinearity is a finite sum `f(r, t) = Σ_k a_k(r) |t|^{p_k - 2} t` with
//! `p_k > 2`, so `f(r, 0) = ∂_t f(r, 0) = 0` and `f(r, -t) = -f(r, t)` hold by
//! construction. `f`, `∂_t f` and the primitive `F` are evaluated in closed
//! form from the same coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, RadialGrid};

/// Tabulated radial data `(r_j, y_j)`, interpolated linearly and held constant
/// outside the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub r: Vec<f64>,
    pub y: Vec<f64>,
}

impl Table {
    pub fn new(r: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if r.len() != y.len() || r.len() < 2 {
            return Err(Error::InvalidModel("table needs >= 2 matching (r, y) rows".into()));
        }
        if r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidModel("table radii must be strictly increasing".into()));
        }
        Ok(Self { r, y })
    }

    pub fn eval(&self, r: f64) -> f64 {
        let n = self.r.len();
        if r <= self.r[0] {
            return self.y[0];
        }
        if r >= self.r[n - 1] {
            return self.y[n - 1];
        }
        let j = self.r.partition_point(|&x| x <= r) - 1;
        let t = (r - self.r[j]) / (self.r[j + 1] - self.r[j]);
        self.y[j] + t * (self.y[j + 1] - self.y[j])
    }

    /// Centered-difference derivative with step `step`.
    pub fn derivative(&self, r: f64, step: f64) -> f64 {
        let lo = (r - step).max(0.0);
        let hi = r + step;
        (self.eval(hi) - self.eval(lo)) / (hi - lo)
    }
}

/// Radial coefficient `a(r) > 0` of a non-autonomous power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RadialProfile {
    /// `a(r) = 1 + A exp(-(r/σ)²)`: decreasing to `a(∞) = 1`.
    GaussianBump { amplitude: f64, width: f64 },
    Tabulated(Table),
}

impl RadialProfile {
    fn value_and_slope(&self, r: f64) -> (f64, f64) {
        match self {
            RadialProfile::GaussianBump { amplitude, width } => {
                let s = r / width;
                let g = (-s * s).exp();
                (1.0 + amplitude * g, -2.0 * amplitude * s * g / width)
            }
            RadialProfile::Tabulated(t) => (t.eval(r), t.derivative(r, 1e-4)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TermKind {
    /// `a(r) ≡ 1`.
    ConstantPower,
    /// `a(r)` given by a radial profile.
    RadialCoefficientPower(RadialProfile),
    /// `h(r) = (1 + r²)^{θ/2}`, so `r h'(r) / h(r) → θ`.
    WeightedPower { theta: f64 },
}

/// One summand `coefficient · a(r) |t|^{p-2} t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearTerm {
    pub kind: TermKind,
    pub coefficient: f64,
    pub power: f64,
}

impl NonlinearTerm {
    pub fn new(kind: TermKind, coefficient: f64, power: f64) -> Result<Self> {
        if !(power > 2.0) || !power.is_finite() {
            return Err(Error::InvalidModel(format!("power must exceed 2, got {power}")));
        }
        if coefficient == 0.0 || !coefficient.is_finite() {
            return Err(Error::InvalidModel("coefficient must be a nonzero real".into()));
        }
        if let TermKind::RadialCoefficientPower(RadialProfile::GaussianBump { amplitude, width }) = &kind {
            if *amplitude <= -1.0 || *width <= 0.0 {
                return Err(Error::InvalidModel("gaussian bump must stay positive".into()));
            }
        }
        if let TermKind::RadialCoefficientPower(RadialProfile::Tabulated(t)) = &kind {
            if t.y.iter().any(|&v| v <= 0.0) {
                return Err(Error::InvalidModel("radial profile must be positive".into()));
            }
        }
        Ok(Self {
            kind,
            coefficient,
            power,
        })
    }

    pub fn power(coefficient: f64, power: f64) -> Result<Self> {
        Self::new(TermKind::ConstantPower, coefficient, power)
    }

    /// Coefficient `coefficient · a(r)` and its radial derivative.
    pub fn radial_weight(&self, r: f64) -> (f64, f64) {
        let (a, da) = match &self.kind {
            TermKind::ConstantPower => (1.0, 0.0),
            TermKind::RadialCoefficientPower(p) => p.value_and_slope(r),
            TermKind::WeightedPower { theta } => {
                let b = 1.0 + r * r;
                let h = b.powf(0.5 * theta);
                (h, theta * r * h / b)
            }
        };
        (self.coefficient * a, self.coefficient * da)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Potential {
    Zero,
    /// `V(r) = -V₀ exp(-(r/σ)²)`.
    BoundedWell { depth: f64, width: f64 },
    /// `V(r) = r²`. Experimental: `V` does not vanish at infinity.
    Harmonic,
    Tabulated(Table),
}

impl Potential {
    pub fn value(&self, r: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::BoundedWell { depth, width } => -depth * (-(r / width).powi(2)).exp(),
            Potential::Harmonic => r * r,
            Potential::Tabulated(t) => t.eval(r),
        }
    }

    /// `x · ∇V = r V'(r)`.
    pub fn radial_virial(&self, r: f64, h: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::BoundedWell { depth, width } => {
                let s2 = (r / width).powi(2);
                2.0 * depth * s2 * (-s2).exp()
            }
            Potential::Harmonic => 2.0 * r * r,
            Potential::Tabulated(t) => r * t.derivative(r, h),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Potential::Zero)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemModel {
    pub dim: usize,
    pub terms: Vec<NonlinearTerm>,
    pub potential: Potential,
}

impl ProblemModel {
    pub fn new(dim: usize, terms: Vec<NonlinearTerm>, potential: Potential) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("dimension must be >= 1".into()));
        }
        Ok(Self {
            dim,
            terms,
            potential,
        })
    }

    /// `V ≡ 0`, `f(t) = coefficient |t|^{p-2} t`.
    pub fn pure_power(dim: usize, coefficient: f64, power: f64) -> Result<Self> {
        Self::new(
            dim,
            vec![NonlinearTerm::power(coefficient, power)?],
            Potential::Zero,
        )
    }

    /// `f(t) = |t|^{p-2} t - |t|^{q-2} t`.
    pub fn double_power(dim: usize, p: f64, q: f64) -> Result<Self> {
        Self::new(
            dim,
            vec![NonlinearTerm::power(1.0, p)?, NonlinearTerm::power(-1.0, q)?],
            Potential::Zero,
        )
    }

    /// Finite sum of constant-coefficient powers `(coefficient, power)`.
    pub fn power_sum(dim: usize, terms: &[(f64, f64)]) -> Result<Self> {
        let terms = terms
            .iter()
            .map(|&(a, p)| NonlinearTerm::power(a, p))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, terms, Potential::Zero)
    }

    pub fn with_potential(mut self, potential: Potential) -> Self {
        self.potential = potential;
        self
    }

    pub fn check_grid(&self, g: &RadialGrid) -> Result<()> {
        if g.dim() != self.dim {
            return Err(Error::GridMismatch(format!(
                "model dimension {} vs grid dimension {}",
                self.dim,
                g.dim()
            )));
        }
        Ok(())
    }

    /// `f(r, t)`.
    pub fn f(&self, r: f64, t: f64) -> f64 {
        let at = t.abs();
        self.terms
            .iter()
            .map(|term| term.radial_weight(r).0 * at.powf(term.power - 2.0) * t)
            .sum()
    }

    /// `∂_t f(r, t)`.
    pub fn f_t(&self, r: f64, t: f64) -> f64 {
        let at = t.abs();
        self.terms
            .iter()
            .map(|term| term.radial_weight(r).0 * (term.power - 1.0) * at.powf(term.power - 2.0))
            .sum()
    }

    /// `F(r, t) = ∫_0^t f(r, s) ds`.
    pub fn big_f(&self, r: f64, t: f64) -> f64 {
        let at = t.abs();
        self.terms
            .iter()
            .map(|term| term.radial_weight(r).0 * at.powf(term.power) / term.power)
            .sum()
    }

    /// `x · ∇_x F(x, t) = r ∂_r F(r, t)`.
    pub fn virial_f(&self, r: f64, t: f64) -> f64 {
        let at = t.abs();
        self.terms
            .iter()
            .map(|term| r * term.radial_weight(r).1 * at.powf(term.power) / term.power)
            .sum()
    }

    pub fn potential_values(&self, g: &RadialGrid) -> Vec<f64> {
        g.nodes().iter().map(|&r| self.potential.value(r)).collect()
    }

    /// Nodal `f(r_i, u_i)`.
    pub fn nonlinearity(&self, g: &RadialGrid, u: &[f64]) -> Vec<f64> {
        g.nodes().iter().zip(u).map(|(&r, &t)| self.f(r, t)).collect()
    }

    pub fn nonlinearity_derivative(&self, g: &RadialGrid, u: &[f64]) -> Vec<f64> {
        g.nodes().iter().zip(u).map(|(&r, &t)| self.f_t(r, t)).collect()
    }

    /// A single constant-coefficient power with `V ≡ 0`, if that is what this model is.
    pub fn single_power(&self) -> Option<(f64, f64)> {
        match (self.terms.as_slice(), &self.potential) {
            ([t], Potential::Zero) if t.kind == TermKind::ConstantPower => {
                Some((t.coefficient, t.power))
            }
            _ => None,
        }
    }

    pub fn is_focusing_only(&self) -> bool {
        self.terms.iter().all(|t| t.coefficient > 0.0)
    }

    pub fn is_defocusing_only(&self) -> bool {
        self.terms.iter().all(|t| t.coefficient < 0.0)
    }

    /// Smallest exponent among the powers; drives small-mass scaling.
    pub fn lowest_power(&self) -> Option<f64> {
        self.terms.iter().map(|t| t.power).reduce(f64::min)
    }
}

/// `E(u) = ½⟨Au, u⟩ + ½⟨Vu, u⟩ - ∫F(|x|, u)`.
pub fn energy(m: &ProblemModel, g: &RadialGrid, u: &GridFunction) -> Result<f64> {
    g.check(u)?;
    m.check_grid(g)?;
    Ok(energy_values(m, g, &u.values))
}

pub(crate) fn energy_values(m: &ProblemModel, g: &RadialGrid, u: &[f64]) -> f64 {
    let kinetic = 0.5 * g.dirichlet_form(u);
    let potential: f64 = 0.5
        * g.weights()
            .iter()
            .zip(g.nodes().iter().zip(u))
            .map(|(w, (&r, &t))| w * m.potential.value(r) * t * t)
            .sum::<f64>();
    let nonlinear: f64 = g
        .weights()
        .iter()
        .zip(g.nodes().iter().zip(u))
        .map(|(w, (&r, &t))| w * m.big_f(r, t))
        .sum();
    kinetic + potential - nonlinear
}

/// `Q(u) = ½⟨u, u⟩`.
pub fn mass(g: &RadialGrid, u: &GridFunction) -> Result<f64> {
    g.check(u)?;
    Ok(0.5 * g.dot(&u.values, &u.values))
}

/// Bottom of the radial spectrum of `-Δ + V` on the truncated ball.
///
/// The Dirichlet truncation makes this an upper approximation of the continuum
/// infimum that decreases toward it as `R` grows.
pub fn lambda0(m: &ProblemModel, g: &RadialGrid) -> Result<f64> {
    m.check_grid(g)?;
    let op = g.laplacian_stencil().with_potential(&m.potential_values(g));
    Ok(crate::spectral::eigs_smallest(&op, 1)[0])
}

/// Signed Pohozaev residual
/// `(n-2)∫|∇u|² + n∫Vu² + ∫(x·∇V)u² - λn∫u² - 2n∫F - 2∫x·∇_xF`,
/// normalized by `max(1, ∫|∇u|²)`.
pub fn pohozaev_residual(
    m: &ProblemModel,
    g: &RadialGrid,
    u: &GridFunction,
    lambda: f64,
) -> Result<f64> {
    g.check(u)?;
    m.check_grid(g)?;
    let n = g.dim() as f64;
    let grad = g.dirichlet_form(&u.values);
    let h = g.h();
    let mut terms = 0.0;
    for ((&w, &r), &t) in g.weights().iter().zip(g.nodes()).zip(&u.values) {
        let t2 = t * t;
        terms += w
            * (n * m.potential.value(r) * t2 + m.potential.radial_virial(r, h) * t2
                - lambda * n * t2
                - 2.0 * n * m.big_f(r, t)
                - 2.0 * m.virial_f(r, t));
    }
    Ok(((n - 2.0) * grad + terms) / grad.max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cubic(dim: usize) -> ProblemModel {
        ProblemModel::pure_power(dim, 1.0, 4.0).unwrap()
    }

    #[test]
    fn vanishes_at_zero() {
        let m = ProblemModel::new(
            2,
            vec![
                NonlinearTerm::power(1.0, 3.0).unwrap(),
                NonlinearTerm::new(TermKind::WeightedPower { theta: -1.0 }, 2.0, 5.0).unwrap(),
            ],
            Potential::Zero,
        )
        .unwrap();
        for r in [0.0, 1.0, 5.0] {
            assert_eq!(m.f(r, 0.0), 0.0);
            assert_eq!(m.f_t(r, 0.0), 0.0);
            assert_eq!(m.big_f(r, 0.0), 0.0);
        }
    }

    #[test]
    fn double_power_arithmetic() {
        let m = ProblemModel::double_power(1, 4.0, 6.0).unwrap();
        assert!(m.f(0.0, 1.0).abs() < 1e-15);
        assert!((m.big_f(0.0, 1.0) - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn oddness() {
        let m = cubic(1);
        assert_eq!(m.f(0.3, -2.0), -8.0);
    }

    #[test]
    fn rejects_invalid_terms() {
        assert!(NonlinearTerm::power(1.0, 2.0).is_err());
        assert!(NonlinearTerm::power(0.0, 3.0).is_err());
    }

    #[test]
    fn primitive_and_derivative_are_consistent() {
        let m = ProblemModel::new(
            3,
            vec![
                NonlinearTerm::power(1.0, 3.3).unwrap(),
                NonlinearTerm::new(
                    TermKind::RadialCoefficientPower(RadialProfile::GaussianBump {
                        amplitude: 0.5,
                        width: 2.0,
                    }),
                    -0.7,
                    4.5,
                )
                .unwrap(),
                NonlinearTerm::new(TermKind::WeightedPower { theta: -0.5 }, 1.2, 3.0).unwrap(),
            ],
            Potential::Zero,
        )
        .unwrap();
        let mut errs = [[0.0; 2]; 2];
        for (k, &eps) in [1e-3, 5e-4].iter().enumerate() {
            for i in 0..25 {
                let r = 0.2 * i as f64;
                let t = -1.7 + 0.15 * i as f64;
                if t.abs() < 0.05 {
                    continue;
                }
                let df = (m.big_f(r, t + eps) - m.big_f(r, t - eps)) / (2.0 * eps);
                let dft = (m.f(r, t + eps) - m.f(r, t - eps)) / (2.0 * eps);
                errs[k][0] = f64::max(errs[k][0], (df - m.f(r, t)).abs());
                errs[k][1] = f64::max(errs[k][1], (dft - m.f_t(r, t)).abs());
            }
        }
        for j in 0..2 {
            assert!(errs[0][j] < 1e-5, "{errs:?}");
            let ratio = errs[0][j] / errs[1][j];
            assert!(ratio > 3.5 && ratio < 4.5, "second order expected, ratio {ratio}");
        }
    }

    #[test]
    fn energy_of_the_one_dimensional_soliton() {
        let g = RadialGrid::new(1, 30.0, 6000).unwrap();
        let u = g.from_fn(|r| 2f64.sqrt() / r.cosh());
        let e = energy(&cubic(1), &g, &u).unwrap();
        assert!((e + 2.0 / 3.0).abs() < 1e-5, "{e}");
        assert_eq!(energy(&cubic(1), &g, &g.zeros()).unwrap(), 0.0);
    }

    #[test]
    fn energy_of_a_gaussian_in_three_dimensions() {
        let g = RadialGrid::new(3, 30.0, 6000).unwrap();
        let u = g.from_fn(|r| (-r * r / 2.0).exp());
        let e = energy(&cubic(3), &g, &u).unwrap();
        let exact = 0.75 * PI.powf(1.5) - PI / 8.0 * (PI / 2.0).sqrt();
        assert!((e - exact).abs() < 1e-4, "{e} vs {exact}");
    }

    #[test]
    fn masses() {
        let g1 = RadialGrid::new(1, 30.0, 6000).unwrap();
        let u = g1.from_fn(|r| 2f64.sqrt() / r.cosh());
        assert!((mass(&g1, &u).unwrap() - 2.0).abs() < 1e-6);
        let g3 = RadialGrid::new(3, 30.0, 6000).unwrap();
        let v = g3.from_fn(|r| (-r * r / 2.0).exp());
        assert!((mass(&g3, &v).unwrap() - PI.powf(1.5) / 2.0).abs() < 1e-6);
        assert_eq!(mass(&g3, &g3.zeros()).unwrap(), 0.0);
    }

    #[test]
    fn sign_flip_invariance() {
        let g = RadialGrid::new(2, 20.0, 800).unwrap();
        let m = ProblemModel::double_power(2, 3.0, 5.0).unwrap();
        let u = g.from_fn(|r| 1.3 * (-r * r / 3.0).exp());
        let v = u.scaled(-1.0);
        assert_eq!(energy(&m, &g, &u).unwrap(), energy(&m, &g, &v).unwrap());
        assert_eq!(mass(&g, &u).unwrap(), mass(&g, &v).unwrap());
    }

    #[test]
    fn small_dilations_have_negative_energy() {
        // u_τ = τ^{n/2} u(τ ·) keeps the mass and drives E below zero as τ → 0.
        for (dim, p) in [(1usize, 4.0), (2, 3.5), (3, 3.0)] {
            let m = ProblemModel::pure_power(dim, 1.0, p).unwrap();
            let g = RadialGrid::new(dim, 400.0, 8000).unwrap();
            let tau: f64 = 0.05;
            let u = g.from_fn(|r| tau.powf(dim as f64 / 2.0) * (-(tau * r).powi(2) / 2.0).exp());
            assert!(energy(&m, &g, &u).unwrap() < 0.0, "dim {dim}");
        }
    }

    #[test]
    fn lambda0_free_harmonic_and_well() {
        let g = RadialGrid::new(3, 30.0, 3000).unwrap();
        let free = lambda0(&cubic(3), &g).unwrap();
        assert!(free > 0.0 && free < 0.02, "{free}");
        let g_big = RadialGrid::new(3, 60.0, 6000).unwrap();
        assert!(lambda0(&cubic(3), &g_big).unwrap() < free);

        let harmonic = cubic(2).with_potential(Potential::Harmonic);
        let g2 = RadialGrid::new(2, 10.0, 2000).unwrap();
        let l = lambda0(&harmonic, &g2).unwrap();
        assert!((l - 2.0).abs() < 1e-4, "{l}");

        let well = cubic(1).with_potential(Potential::BoundedWell {
            depth: 2.0,
            width: 1.0,
        });
        let g1 = RadialGrid::new(1, 30.0, 3000).unwrap();
        assert!(lambda0(&well, &g1).unwrap() < 0.0);
    }

    #[test]
    fn pohozaev_of_exact_soliton_and_of_a_gaussian() {
        let m = cubic(1);
        let g = RadialGrid::new(1, 30.0, 6000).unwrap();
        let u = g.from_fn(|r| 2f64.sqrt() / r.cosh());
        let res = pohozaev_residual(&m, &g, &u, -1.0).unwrap();
        assert!(res.abs() < 10.0 * g.h() * g.h(), "{res}");

        let m3 = cubic(3);
        let g3 = RadialGrid::new(3, 30.0, 3000).unwrap();
        let gauss = g3.from_fn(|r| (-r * r / 2.0).exp());
        assert!(pohozaev_residual(&m3, &g3, &gauss, -1.0).unwrap().abs() > 0.1);
    }

    #[test]
    fn tabulated_potential_matches_closed_form_virial() {
        let well = Potential::BoundedWell {
            depth: 1.5,
            width: 2.0,
        };
        let r: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.005).collect();
        let y: Vec<f64> = r.iter().map(|&x| well.value(x)).collect();
        let tab = Potential::Tabulated(Table::new(r, y).unwrap());
        for x in [0.3, 1.0, 2.5, 4.0] {
            assert!((tab.value(x) - well.value(x)).abs() < 1e-5);
            assert!((tab.radial_virial(x, 0.005) - well.radial_virial(x, 0.005)).abs() < 1e-4);
        }
    }
}
