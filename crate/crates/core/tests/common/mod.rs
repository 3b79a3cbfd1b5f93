//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use gss_atlas::elliptic::{self, NewtonOptions};
use gss_atlas::model::{self, ProblemModel};
use gss_atlas::{GridFunction, RadialGrid, SymmetricTridiagonal};
use nalgebra::DMatrix;

pub fn soliton(g: &RadialGrid, omega: f64) -> GridFunction {
    g.from_fn(|r| (2.0 * omega).sqrt() / (omega.sqrt() * r).cosh())
}

pub fn cubic_1d() -> ProblemModel {
    ProblemModel::pure_power(1, 1.0, 4.0).unwrap()
}

/// `|u|u - 1.5|u|²u + 0.8|u|³u` on the line. Its mass has a local maximum and a
/// local minimum in λ; the positions are located by [`scan_folds`].
pub const S_SHAPE_TERMS: [(f64, f64); 3] = [(1.0, 3.0), (-1.5, 4.0), (0.8, 5.0)];

pub fn s_shape() -> ProblemModel {
    ProblemModel::power_sum(1, &S_SHAPE_TERMS).unwrap()
}

pub fn s_shape_grid() -> RadialGrid {
    RadialGrid::new(1, 60.0, 6000).unwrap()
}

pub fn tight() -> NewtonOptions {
    NewtonOptions {
        tol: 1e-11,
        ..NewtonOptions::default()
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

// ---------------------------------------------------------------------------
// Shooting

fn power_sum_f(terms: &[(f64, f64)], t: f64) -> f64 {
    terms.iter().map(|&(a, p)| a * t.abs().powf(p - 2.0) * t).sum()
}

fn power_sum_big_f(terms: &[(f64, f64)], t: f64) -> f64 {
    terms.iter().map(|&(a, p)| a * t.abs().powf(p) / p).sum()
}

#[derive(Debug, Clone, Copy)]
pub struct Shot {
    pub amplitude: f64,
    pub q: f64,
    pub e: f64,
}

#[derive(PartialEq)]
enum Fate {
    Overshoot,
    Undershoot,
}

/// State `(u, u', Q, E)` of `u'' = -(n-1)/r u' - λu - f(u)` with running integrals.
fn integrate(dim: usize, terms: &[(f64, f64)], lambda: f64, a: f64, h: f64) -> (Fate, f64, f64) {
    let n = dim as f64;
    let area = match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => panic!("shooting oracle covers n <= 3"),
    };
    let rhs = |r: f64, y: [f64; 4]| -> [f64; 4] {
        let (u, v) = (y[0], y[1]);
        let damp = if r > 0.0 { (n - 1.0) / r * v } else { 0.0 };
        let rn = r.powf(n - 1.0);
        [
            v,
            -damp - lambda * u - power_sum_f(terms, u),
            0.5 * area * rn * u * u,
            area * rn * (0.5 * v * v - power_sum_big_f(terms, u)),
        ]
    };
    let r0: f64 = 1e-6;
    let curv = (-lambda * a - power_sum_f(terms, a)) / n;
    let ball = area * r0.powf(n) / n;
    let mut y = [
        a + 0.5 * curv * r0 * r0,
        curv * r0,
        0.5 * ball * a * a,
        -ball * power_sum_big_f(terms, a),
    ];
    let mut r = r0;
    loop {
        let k1 = rhs(r, y);
        let step = |y: [f64; 4], k: [f64; 4], s: f64| {
            [y[0] + s * k[0], y[1] + s * k[1], y[2] + s * k[2], y[3] + s * k[3]]
        };
        let k2 = rhs(r + 0.5 * h, step(y, k1, 0.5 * h));
        let k3 = rhs(r + 0.5 * h, step(y, k2, 0.5 * h));
        let k4 = rhs(r + h, step(y, k3, h));
        for i in 0..4 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        r += h;
        if y[0] < 0.0 {
            return (Fate::Overshoot, y[2], y[3]);
        }
        if y[1] > 0.0 {
            return (Fate::Undershoot, y[2], y[3]);
        }
        if r > 200.0 {
            return (Fate::Undershoot, y[2], y[3]);
        }
    }
}

/// Ground state of `-Δu - λu = f(u)` in `ℝⁿ` by amplitude bisection.
///
/// `bracket` must contain an undershooting and an overshooting amplitude.
pub fn shoot(dim: usize, terms: &[(f64, f64)], lambda: f64, bracket: (f64, f64), h: f64) -> Shot {
    let (mut lo, mut hi) = bracket;
    assert!(integrate(dim, terms, lambda, lo, h).0 == Fate::Undershoot);
    assert!(integrate(dim, terms, lambda, hi, h).0 == Fate::Overshoot);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if integrate(dim, terms, lambda, mid, h).0 == Fate::Overshoot {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (_, q, e) = integrate(dim, terms, lambda, lo, h);
    Shot { amplitude: lo, q, e }
}

// ---------------------------------------------------------------------------
// Dense eigensolver

/// All eigenvalues of `L` from its symmetrized dense matrix, ascending.
pub fn dense_eigenvalues(l: &SymmetricTridiagonal) -> Vec<f64> {
    let (d, e) = l.symmetrized();
    let n = d.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = d[i];
        if i + 1 < n {
            a[(i, i + 1)] = e[i];
            a[(i + 1, i)] = e[i];
        }
    }
    let mut ev: Vec<f64> = a.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

// ---------------------------------------------------------------------------
// Dense natural λ-scan

#[derive(Debug, Clone)]
pub struct ScanPoint {
    pub lambda: f64,
    pub q: f64,
    pub e: f64,
    pub u: GridFunction,
}

pub fn solve_point(m: &ProblemModel, g: &RadialGrid, lambda: f64, guess: &GridFunction) -> ScanPoint {
    let p = elliptic::newton_solve_with(m, g, lambda, guess, &tight()).unwrap();
    ScanPoint {
        lambda,
        q: model::mass(g, &p.u).unwrap(),
        e: model::energy(m, g, &p.u).unwrap(),
        u: p.u,
    }
}

/// Warm-started Newton solves along `lambdas` (fixed-λ stepping only).
pub fn natural_scan(m: &ProblemModel, g: &RadialGrid, lambdas: &[f64], start: &GridFunction) -> Vec<ScanPoint> {
    let mut out: Vec<ScanPoint> = Vec::with_capacity(lambdas.len());
    let mut guess = start.clone();
    for &l in lambdas {
        let p = solve_point(m, g, l, &guess);
        guess = p.u.clone();
        out.push(p);
    }
    out
}

/// Vertex of the parabola through `Q(λ₀ - δ), Q(λ₀), Q(λ₀ + δ)`.
fn vertex(m: &ProblemModel, g: &RadialGrid, l0: f64, d: f64, guess: &GridFunction) -> (f64, f64, GridFunction) {
    let a = solve_point(m, g, l0 - d, guess);
    let b = solve_point(m, g, l0, guess);
    let c = solve_point(m, g, l0 + d, guess);
    let curv = a.q - 2.0 * b.q + c.q;
    let shift = 0.5 * d * (a.q - c.q) / curv;
    let q = b.q - 0.125 * (c.q - a.q).powi(2) / curv;
    (l0 + shift, q, b.u)
}

/// Extrema of `Q` along a scan, refined by successively narrower parabolas.
pub fn scan_folds(m: &ProblemModel, g: &RadialGrid, scan: &[ScanPoint]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for w in 1..scan.len().saturating_sub(1) {
        let (a, b, c) = (&scan[w - 1], &scan[w], &scan[w + 1]);
        if (b.q - a.q) * (c.q - b.q) < 0.0 {
            let mut l = b.lambda;
            let mut q = b.q;
            let mut guess = b.u.clone();
            for d in [2e-3, 2e-4, 5e-5] {
                let (nl, nq, u) = vertex(m, g, l, d, &guess);
                l = nl;
                q = nq;
                guess = u;
            }
            out.push((l, q));
        }
    }
    out
}

/// Cubic Hermite interpolation of `E(Q)` on one monotone piece, with `dE/dQ = λ`.
pub fn hermite_energy(piece: &[ScanPoint], c: f64) -> Option<f64> {
    piece.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        let (lo, hi) = if a.q < b.q { (a.q, b.q) } else { (b.q, a.q) };
        if c < lo || c > hi {
            return None;
        }
        let dq = b.q - a.q;
        let t = (c - a.q) / dq;
        let h00 = 2.0 * t.powi(3) - 3.0 * t * t + 1.0;
        let h10 = t.powi(3) - 2.0 * t * t + t;
        let h01 = -2.0 * t.powi(3) + 3.0 * t * t;
        let h11 = t.powi(3) - t * t;
        Some(h00 * a.e + h10 * dq * a.lambda + h01 * b.e + h11 * dq * b.lambda)
    })
}

/// Splits a scan at the indices nearest to the given fold multipliers.
pub fn split_scan(scan: &[ScanPoint], folds: &[(f64, f64)]) -> Vec<Vec<ScanPoint>> {
    let mut cuts: Vec<usize> = folds
        .iter()
        .map(|&(l, _)| {
            (0..scan.len())
                .min_by(|&i, &j| (scan[i].lambda - l).abs().total_cmp(&(scan[j].lambda - l).abs()))
                .unwrap()
        })
        .collect();
    cuts.sort();
    let mut pieces = Vec::new();
    let mut start = 0;
    for &c in &cuts {
        pieces.push(scan[start..c].to_vec());
        start = c + 1;
    }
    pieces.push(scan[start..].to_vec());
    pieces
}

#[derive(Debug, Clone, Copy)]
pub struct MaxwellOracle {
    pub c: f64,
    pub lambda_left: f64,
    pub lambda_right: f64,
}

/// Secant root in `c` of `E_left(c) - E_right(c)` on two scan pieces.
pub fn maxwell_oracle(
    m: &ProblemModel,
    g: &RadialGrid,
    left: &[ScanPoint],
    right: &[ScanPoint],
    bracket: (f64, f64),
) -> MaxwellOracle {
    let diff = |c: f64| hermite_energy(left, c).unwrap() - hermite_energy(right, c).unwrap();
    let (mut x0, mut x1) = bracket;
    let (mut f0, mut f1) = (diff(x0), diff(x1));
    assert!(f0 * f1 < 0.0, "no energy crossing in {bracket:?}");
    for _ in 0..100 {
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        let f2 = diff(x2);
        if f2 * f1 < 0.0 {
            x0 = x1;
            f0 = f1;
        } else {
            f0 *= 0.5;
        }
        x1 = x2;
        f1 = f2;
        if f1.abs() < 1e-14 || (x1 - x0).abs() < 1e-13 {
            break;
        }
    }
    let c = x1;
    MaxwellOracle {
        c,
        lambda_left: multiplier_at_mass(m, g, left, c),
        lambda_right: multiplier_at_mass(m, g, right, c),
    }
}

/// λ with `Q(λ) = c` on a monotone piece, by secant iteration on fresh solves.
pub fn multiplier_at_mass(m: &ProblemModel, g: &RadialGrid, piece: &[ScanPoint], c: f64) -> f64 {
    let j = piece
        .windows(2)
        .position(|w| (w[0].q - c) * (w[1].q - c) <= 0.0)
        .expect("mass not covered by the scan piece");
    let (mut a, mut b) = (piece[j].clone(), piece[j + 1].clone());
    for _ in 0..60 {
        let l = a.lambda + (c - a.q) * (b.lambda - a.lambda) / (b.q - a.q);
        let p = solve_point(m, g, l, &a.u);
        if (p.q - c).abs() < 1e-13 * c || (b.lambda - a.lambda).abs() < 1e-14 {
            return p.lambda;
        }
        if (p.q - c) * (a.q - c) > 0.0 {
            a = p;
        } else {
            b = p;
        }
    }
    a.lambda
}
