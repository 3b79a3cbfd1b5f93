//! Truncated radial mesh with the n-dimensional volume weight.
//!
//! Nodes are `r_i = i h`, `i = 0..=M`, with `h = R / (M + 1)`. The node
//! `r_{M+1} = R` is a Dirichlet ghost and is not stored. Every node owns a
//! control volume: for `i >= 1` its weight is `ω_{n-1} r_i^{n-1} h`, and the
//! origin owns the ball of radius `h/2`, i.e. `ω_{n-1} (h/2)^n / n`. The same
//! volumes divide the flux-form Laplacian, which makes the discrete `-Δ`
//! exactly self-adjoint under [`RadialGrid::inner`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymmetricTridiagonal;

/// Identity of a grid, carried by every [`GridFunction`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridId {
    pub dim: usize,
    pub radius: f64,
    pub points: usize,
}

impl std::fmt::Display for GridId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "dim={} R={} M={}", self.dim, self.radius, self.points)
    }
}

#[derive(Debug, Clone)]
pub struct RadialGrid {
    dim: usize,
    radius: f64,
    points: usize,
    h: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `coupling[i] = ω r_{i+1/2}^{n-1} / h`; the last entry couples node M to the ghost.
    coupling: Vec<f64>,
}

/// Surface area of the unit sphere in ℝⁿ, with the even convention `ω_0 = 2`.
pub fn sphere_area(dim: usize) -> f64 {
    use std::f64::consts::PI;
    // ω_{n-1} = 2 π^{n/2} / Γ(n/2), with the recursion ω_{n+1} = 2π ω_{n-1} / n.
    match dim {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI * sphere_area(dim - 2) / (dim - 2) as f64,
    }
}

impl RadialGrid {
    pub fn new(dim: usize, radius: f64, points: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("dimension must be >= 1".into()));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidModel(format!("radius must be positive, got {radius}")));
        }
        if points < 16 {
            return Err(Error::InvalidModel(format!("need at least 16 nodes, got {points}")));
        }
        let h = radius / (points + 1) as f64;
        let omega = sphere_area(dim);
        let n = dim as f64;
        let pw = |r: f64| if dim == 1 { 1.0 } else { r.powi(dim as i32 - 1) };
        let nodes: Vec<f64> = (0..=points).map(|i| i as f64 * h).collect();
        let mut weights: Vec<f64> = nodes.iter().map(|&r| omega * pw(r) * h).collect();
        weights[0] = omega * (0.5 * h).powi(dim as i32) / n;
        let coupling = (0..=points)
            .map(|i| omega * pw((i as f64 + 0.5) * h) / h)
            .collect();
        Ok(Self {
            dim,
            radius,
            points,
            h,
            nodes,
            weights,
            coupling,
        })
    }

    pub fn id(&self) -> GridId {
        GridId {
            dim: self.dim,
            radius: self.radius,
            points: self.points,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Number of interior intervals parameter `M`; there are `M + 1` unknowns.
    pub fn points(&self) -> usize {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coupling(&self) -> &[f64] {
        &self.coupling
    }

    pub fn sphere_area(&self) -> f64 {
        sphere_area(self.dim)
    }

    /// Closed-form volume `ω R^n / n` of the truncation ball (length `2R` for n = 1).
    pub fn ball_volume(&self) -> f64 {
        self.sphere_area() * self.radius.powi(self.dim as i32) / self.dim as f64
    }

    /// Trapezoid weight of the Dirichlet ghost at `r = R`, where every grid function vanishes.
    pub fn boundary_half_weight(&self) -> f64 {
        0.5 * self.sphere_area() * self.radius.powi(self.dim as i32 - 1) * self.h
    }

    /// Weighted scalar product `Σ w_i a_i b_i ≈ ∫_{ℝⁿ} a b`.
    pub fn inner(&self, a: &GridFunction, b: &GridFunction) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.dot(&a.values, &b.values))
    }

    pub(crate) fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }

    pub(crate) fn norm(&self, a: &[f64]) -> f64 {
        self.dot(a, a).sqrt()
    }

    pub fn check(&self, u: &GridFunction) -> Result<()> {
        if u.grid != self.id() || u.values.len() != self.len() {
            return Err(Error::GridMismatch(format!(
                "function lives on [{}], grid is [{}]",
                u.grid,
                self.id()
            )));
        }
        Ok(())
    }

    /// Matrix of `-Δ` on radial functions, self-adjoint under [`RadialGrid::inner`].
    pub fn laplacian_stencil(&self) -> SymmetricTridiagonal {
        SymmetricTridiagonal::new(
            self.coupling.clone(),
            vec![0.0; self.len()],
            self.weights.clone(),
        )
    }

    /// `-Δu` in flux form; differences are taken before scaling to limit cancellation.
    pub fn apply_laplacian(&self, u: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        let mut flux_left = 0.0;
        for i in 0..n {
            let next = if i + 1 < n { u[i + 1] } else { 0.0 };
            let flux_right = self.coupling[i] * (u[i] - next);
            out[i] = (flux_right - flux_left) / self.weights[i];
            flux_left = flux_right;
        }
        out
    }

    /// Discrete Dirichlet form `⟨Au, u⟩ = Σ c_{i+1/2} (u_{i+1} - u_i)^2 ≈ ∫|∇u|²`.
    pub fn dirichlet_form(&self, u: &[f64]) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let next = if i + 1 < n { u[i + 1] } else { 0.0 };
                self.coupling[i] * (u[i] - next).powi(2)
            })
            .sum()
    }

    pub fn zeros(&self) -> GridFunction {
        GridFunction {
            values: vec![0.0; self.len()],
            grid: self.id(),
        }
    }

    pub fn from_fn(&self, mut f: impl FnMut(f64) -> f64) -> GridFunction {
        GridFunction {
            values: self.nodes.iter().map(|&r| f(r)).collect(),
            grid: self.id(),
        }
    }

    pub fn wrap(&self, values: Vec<f64>) -> Result<GridFunction> {
        if values.len() != self.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                self.len(),
                values.len()
            )));
        }
        Ok(GridFunction {
            values,
            grid: self.id(),
        })
    }
}

/// Nodal values of a radial function on a [`RadialGrid`].
///
/// Implicit closures: `u(R) = 0` and the even extension `u(-r) = u(r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub values: Vec<f64>,
    pub grid: GridId,
}

impl GridFunction {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> GridFunction {
        GridFunction {
            values: self.values.iter().map(|v| s * v).collect(),
            grid: self.grid,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            values: self.values.iter().map(|&v| f(v)).collect(),
            grid: self.grid,
        }
    }

    /// Cubic (four-point Lagrange) interpolation at radius `r` using the even
    /// extension at the origin and the Dirichlet zero beyond `R`.
    pub fn eval_at(&self, grid: &RadialGrid, r: f64) -> f64 {
        let r = r.abs();
        let h = grid.h();
        let x = r / h;
        let base = x.floor() as i64;
        let m = self.values.len() as i64;
        if base > m + 1 {
            return 0.0;
        }
        let value = |j: i64| -> f64 {
            let j = j.abs();
            if j < m {
                self.values[j as usize]
            } else {
                0.0
            }
        };
        let t = x - base as f64;
        let (p0, p1, p2, p3) = (value(base - 1), value(base), value(base + 1), value(base + 2));
        // Lagrange basis on nodes -1, 0, 1, 2.
        let l0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
        let l1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        let l2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
        let l3 = (t + 1.0) * t * (t - 1.0) / 6.0;
        p0 * l0 + p1 * l1 + p2 * l2 + p3 * l3
    }

    /// Resample onto another grid by cubic interpolation.
    pub fn resample(&self, from: &RadialGrid, to: &RadialGrid) -> GridFunction {
        to.from_fn(|r| self.eval_at(from, r))
    }
}
