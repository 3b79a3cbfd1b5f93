//! Symmetric tridiagonal operators under a diagonal weight.
//!
//! An operator `L` is stored through its stiffness form `K = W L`, which is a
//! symmetric tridiagonal matrix:
//!
//! ```text
//! (K x)_i = c_i (x_i - x_{i+1}) + c_{i-1} (x_i - x_{i-1}) + s_i x_i,   x_{N} = 0
//! ```
//!
//! with couplings `c`, shifts `s` and weights `W = diag(w)`. Keeping the
//! couplings separate lets `apply` work on differences, so residuals of smooth
//! functions do not inherit the `1/h²` size of the diagonal.

use crate::error::{Error, Result};

const PIVOT_RTOL: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct SymmetricTridiagonal {
    coupling: Vec<f64>,
    shift: Vec<f64>,
    weights: Vec<f64>,
}

impl SymmetricTridiagonal {
    /// `coupling` has one entry per node; the last one couples to the Dirichlet ghost.
    pub fn new(coupling: Vec<f64>, shift: Vec<f64>, weights: Vec<f64>) -> Self {
        assert_eq!(coupling.len(), weights.len());
        assert_eq!(shift.len(), weights.len());
        Self {
            coupling,
            shift,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Adds the multiplication operator `diag(c)` to `L`.
    pub fn add_potential(&mut self, c: &[f64]) {
        for ((s, w), ci) in self.shift.iter_mut().zip(&self.weights).zip(c) {
            *s += w * ci;
        }
    }

    pub fn with_potential(mut self, c: &[f64]) -> Self {
        self.add_potential(c);
        self
    }

    /// Diagonal of the stiffness matrix `K = W L`.
    pub fn diag(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let left = if i > 0 { self.coupling[i - 1] } else { 0.0 };
                left + self.coupling[i] + self.shift[i]
            })
            .collect()
    }

    /// Off-diagonal of the stiffness matrix `K = W L`.
    pub fn offdiag(&self) -> Vec<f64> {
        self.coupling[..self.len() - 1].iter().map(|c| -c).collect()
    }

    /// `K x`.
    pub fn apply_stiffness(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        let mut flux_left = 0.0;
        for i in 0..n {
            let next = if i + 1 < n { x[i + 1] } else { 0.0 };
            let flux_right = self.coupling[i] * (x[i] - next);
            out[i] = flux_right - flux_left + self.shift[i] * x[i];
            flux_left = flux_right;
        }
        out
    }

    /// `L x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.apply_stiffness(x);
        for (yi, w) in y.iter_mut().zip(&self.weights) {
            *yi /= w;
        }
        y
    }

    /// Diagonal and off-diagonal of `W^{-1/2} K W^{-1/2}`, similar to `L`.
    pub fn symmetrized(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self
            .diag()
            .iter()
            .zip(&self.weights)
            .map(|(d, w)| d / w)
            .collect();
        let e = self
            .offdiag()
            .iter()
            .enumerate()
            .map(|(i, e)| e / (self.weights[i] * self.weights[i + 1]).sqrt())
            .collect();
        (d, e)
    }

    /// Gershgorin bound on the spectral radius of `L`.
    pub fn norm_estimate(&self) -> f64 {
        let (d, e) = self.symmetrized();
        (0..d.len())
            .map(|i| {
                let l = if i > 0 { e[i - 1].abs() } else { 0.0 };
                let r = if i < e.len() { e[i].abs() } else { 0.0 };
                d[i].abs() + l + r
            })
            .fold(0.0, f64::max)
    }

    pub fn factor(&self) -> Result<TridiagonalLu<'_>> {
        TridiagonalLu::new(self)
    }

    /// Solves `L x = b` with one step of iterative refinement.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.factor()?.solve(b)
    }
}

/// Partial-pivoting LU of the stiffness matrix (the `gttrf` layout).
#[derive(Debug, Clone)]
pub struct TridiagonalLu<'a> {
    op: &'a SymmetricTridiagonal,
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl<'a> TridiagonalLu<'a> {
    fn new(op: &'a SymmetricTridiagonal) -> Result<Self> {
        let n = op.len();
        let mut d = op.diag();
        let mut dl = op.offdiag();
        let mut du = dl.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        let scale = d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        let pivot = d.iter().fold(f64::INFINITY, |m, p| m.min(p.abs()));
        if !(pivot > PIVOT_RTOL * scale) {
            return Err(Error::NearSingular { pivot, scale });
        }
        Ok(Self {
            op,
            dl,
            d,
            du,
            du2,
            swapped,
        })
    }

    /// Solves `K x = b`.
    fn solve_stiffness(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }

    /// Solves `L x = b`, refined once against the flux-form product.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let w = self.op.weights();
        let rhs: Vec<f64> = b.iter().zip(w).map(|(bi, wi)| bi * wi).collect();
        let mut x = rhs.clone();
        self.solve_stiffness(&mut x);
        let kx = self.op.apply_stiffness(&x);
        let mut r: Vec<f64> = rhs.iter().zip(&kx).map(|(a, b)| a - b).collect();
        self.solve_stiffness(&mut r);
        for (xi, ri) in x.iter_mut().zip(&r) {
            *xi += ri;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NearSingular {
                pivot: 0.0,
                scale: 0.0,
            });
        }
        Ok(x)
    }
}

/// Number of eigenvalues of the symmetric tridiagonal `(d, e)` strictly below `x`.
pub fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let n = d.len();
    if n == 0 {
        return 0;
    }
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..n {
        q = if i == 0 {
            d[0] - x
        } else {
            d[i] - x - e[i - 1] * e[i - 1] / q
        };
        if q.abs() < tiny {
            q = -tiny;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Gershgorin interval containing the spectrum of `(d, e)`.
pub fn gershgorin(d: &[f64], e: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..d.len() {
        let l = if i > 0 { e[i - 1].abs() } else { 0.0 };
        let r = if i < e.len() { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - l - r);
        hi = hi.max(d[i] + l + r);
    }
    (lo, hi)
}

/// The `k`-th smallest eigenvalue (0-based) by Sturm bisection to absolute tolerance `tol`.
pub fn bisect_eigenvalue(d: &[f64], e: &[f64], k: usize, tol: f64) -> f64 {
    let (mut lo, mut hi) = gershgorin(d, e);
    let pad = 1e-12 * (hi - lo).abs().max(1.0);
    lo -= pad;
    hi += pad;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(d, e, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `(T - σ) x = b` for the symmetric tridiagonal `T = (d, e)` with partial pivoting.
fn shifted_solve(d: &[f64], e: &[f64], sigma: f64, b: &[f64]) -> Vec<f64> {
    let n = d.len();
    let weights = vec![1.0; n];
    let mut coupling: Vec<f64> = e.iter().map(|v| -v).collect();
    coupling.push(0.0);
    let shift: Vec<f64> = (0..n)
        .map(|i| {
            let left = if i > 0 { coupling[i - 1] } else { 0.0 };
            d[i] - sigma - left - coupling[i]
        })
        .collect();
    let op = SymmetricTridiagonal::new(coupling, shift, weights);
    match op.factor() {
        Ok(lu) => {
            let mut x = b.to_vec();
            lu.solve_stiffness(&mut x);
            x
        }
        Err(_) => b.to_vec(),
    }
}

/// Refines an isolated eigenvalue estimate by shifted inverse iteration and a Rayleigh quotient.
pub fn refine_eigenvalue(d: &[f64], e: &[f64], estimate: f64, bracket: f64) -> f64 {
    let n = d.len();
    // Offset the shift slightly so the factorization stays regular.
    let sigma = estimate + 0.5 * bracket;
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
    for _ in 0..3 {
        let y = shifted_solve(d, e, sigma, &x);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return estimate;
        }
        x = y.iter().map(|v| v / norm).collect();
    }
    let mut tx = vec![0.0; n];
    for i in 0..n {
        tx[i] = d[i] * x[i];
        if i > 0 {
            tx[i] += e[i - 1] * x[i - 1];
        }
        if i + 1 < n {
            tx[i] += e[i] * x[i + 1];
        }
    }
    let rq: f64 = tx.iter().zip(&x).map(|(a, b)| a * b).sum();
    if (rq - estimate).abs() <= bracket {
        rq
    } else {
        estimate
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_op(n: usize, seed: u64) -> SymmetricTridiagonal {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64)
        };
        let coupling = (0..n).map(|_| 0.5 + next()).collect();
        let shift = (0..n).map(|_| next() - 0.5).collect();
        let weights = (0..n).map(|_| 0.2 + next()).collect();
        SymmetricTridiagonal::new(coupling, shift, weights)
    }

    #[test]
    fn solve_round_trip() {
        let op = random_op(200, 7);
        let x0: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = op.apply(&x0);
        let x = op.solve(&b).unwrap();
        let err = x.iter().zip(&x0).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn singular_matrix_is_flagged() {
        // K = [[1, -1], [-1, 1]] is singular.
        let op = SymmetricTridiagonal::new(vec![1.0, 0.5], vec![0.0, -0.5], vec![1.0, 1.0]);
        assert!(matches!(op.solve(&[1.0, 0.0]), Err(Error::NearSingular { .. })));
    }

    #[test]
    fn sturm_counts_match_known_spectrum() {
        // Tridiagonal (2, -1): eigenvalues 2 - 2 cos(kπ/(n+1)).
        let n = 50;
        let d = vec![2.0; n];
        let e = vec![-1.0; n - 1];
        for k in 0..n {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            let ev = bisect_eigenvalue(&d, &e, k, 1e-13);
            assert!((ev - exact).abs() < 1e-12, "k={k}: {ev} vs {exact}");
            let refined = refine_eigenvalue(&d, &e, ev, 1e-10);
            assert!((refined - exact).abs() < 1e-12);
        }
        assert_eq!(sturm_count(&d, &e, 0.0), 0);
        assert_eq!(sturm_count(&d, &e, 4.0), n);
    }
}
