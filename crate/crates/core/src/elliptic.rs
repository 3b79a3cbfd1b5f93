//! Residual, Jacobian and the damped Newton solver for the stationary equation.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridId, RadialGrid};
use crate::linalg::SymmetricTridiagonal;
use crate::model::{self, ProblemModel};
use crate::spectral;

/// Fraction of nodes next to `R` excluded from the positivity check.
const BOUNDARY_LAYER: f64 = 0.02;
/// Residuals below `ROUNDOFF · ‖A‖ · ‖u‖∞` are at the rounding floor of the stencil.
const ROUNDOFF: f64 = 64.0 * f64::EPSILON;
/// Relative size below which the decay window is considered unresolved.
const TAIL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DecayStatus {
    Fitted,
    /// `u(0.8 R)` is below `1e-12 · max u`: enlarge `R` or accept an unverified tail.
    TailUnresolved,
    NonPositiveTail,
}

/// Shape and spectral diagnostics of a computed solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub positive: bool,
    pub radially_decreasing: bool,
    pub morse_index: usize,
    pub nondegeneracy_margin: f64,
    pub margin_floor: f64,
    pub slope: f64,
    pub decay_rate_fit: Option<f64>,
    pub decay_status: DecayStatus,
    pub pohozaev: f64,
}

impl Certificate {
    /// Positive, decreasing, Morse index one and a nondegenerate radial kernel.
    pub fn is_certified(&self) -> bool {
        self.positive
            && self.radially_decreasing
            && self.morse_index == 1
            && self.nondegeneracy_margin > self.margin_floor
    }

    /// Human-readable reason for a failed certificate.
    pub fn failure(&self) -> Option<String> {
        if self.is_certified() {
            return None;
        }
        let mut why = Vec::new();
        if !self.positive {
            why.push("not positive".to_string());
        }
        if !self.radially_decreasing {
            why.push("not radially decreasing".to_string());
        }
        if self.morse_index != 1 {
            why.push(format!("morse index {}", self.morse_index));
        }
        if self.nondegeneracy_margin <= self.margin_floor {
            why.push(format!(
                "margin {:.3e} below floor {:.3e}",
                self.nondegeneracy_margin, self.margin_floor
            ));
        }
        Some(why.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub u: GridFunction,
    pub lambda: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub certificate: Certificate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Certified profiles keep the spectrum of `L_u` this far from zero, relative to `‖L_u‖`.
    pub margin_rtol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            max_halvings: 8,
            margin_rtol: spectral::MARGIN_RTOL,
        }
    }
}

/// `Au + Vu - λu - f(r, u)`.
pub fn residual(
    m: &ProblemModel,
    g: &RadialGrid,
    lambda: f64,
    u: &GridFunction,
) -> Result<GridFunction> {
    g.check(u)?;
    m.check_grid(g)?;
    g.wrap(residual_values(m, g, lambda, &u.values))
}

pub(crate) fn residual_values(m: &ProblemModel, g: &RadialGrid, lambda: f64, u: &[f64]) -> Vec<f64> {
    let mut out = g.apply_laplacian(u);
    for ((o, &r), &t) in out.iter_mut().zip(g.nodes()).zip(u) {
        *o += (m.potential.value(r) - lambda) * t - m.f(r, t);
    }
    out
}

/// `L_u = A + diag(V - λ - ∂_t f(r, u))`.
pub fn linearize(
    m: &ProblemModel,
    g: &RadialGrid,
    lambda: f64,
    u: &GridFunction,
) -> Result<SymmetricTridiagonal> {
    g.check(u)?;
    m.check_grid(g)?;
    Ok(linearize_values(m, g, lambda, &u.values))
}

pub(crate) fn linearize_values(
    m: &ProblemModel,
    g: &RadialGrid,
    lambda: f64,
    u: &[f64],
) -> SymmetricTridiagonal {
    let diag: Vec<f64> = g
        .nodes()
        .iter()
        .zip(u)
        .map(|(&r, &t)| m.potential.value(r) - lambda - m.f_t(r, t))
        .collect();
    g.laplacian_stencil().with_potential(&diag)
}

pub fn solve_tridiagonal(l: &SymmetricTridiagonal, rhs: &GridFunction) -> Result<GridFunction> {
    if rhs.len() != l.len() {
        return Err(Error::GridMismatch(format!(
            "operator has {} rows, right-hand side {}",
            l.len(),
            rhs.len()
        )));
    }
    Ok(GridFunction {
        values: l.solve(&rhs.values)?,
        grid: rhs.grid,
    })
}

pub(crate) fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Damped Newton iteration for `Eq_λ(u) = 0` started from `u0`.
pub fn newton_solve(
    m: &ProblemModel,
    g: &RadialGrid,
    lambda: f64,
    u0: &GridFunction,
    tol: f64,
    max_iter: usize,
) -> Result<Profile> {
    newton_solve_with(
        m,
        g,
        lambda,
        u0,
        &NewtonOptions {
            tol,
            max_iter,
            ..NewtonOptions::default()
        },
    )
}

pub fn newton_solve_with(
    m: &ProblemModel,
    g: &RadialGrid,
    lambda: f64,
    u0: &GridFunction,
    opts: &NewtonOptions,
) -> Result<Profile> {
    let (u, history, iterations) = newton_core(m, g, lambda, u0, opts)?;
    let residual_norm = *history.last().unwrap_or(&0.0);
    let u = g.wrap(u)?;
    let certificate = certify(m, g, lambda, &u, opts.margin_rtol)?;
    Ok(Profile {
        u,
        lambda,
        residual_norm,
        iterations,
        residual_history: history,
        certificate,
    })
}

/// Newton from a fixed list of sech and Gaussian starts of width `1/√(-λ)`.
///
/// Returns the first certified profile, else the first converged one.
pub fn solve_without_seed(
    m: &ProblemModel,
    g: &RadialGrid,
    lambda: f64,
    opts: &NewtonOptions,
) -> Result<Profile> {
    if !(lambda < 0.0) {
        return Err(Error::InvalidModel(format!("lambda must be negative, got {lambda}")));
    }
    let k = (-lambda).sqrt();
    let mut first: Option<Profile> = None;
    let mut last_err = Error::CollapsedToZero;
    for amp in [1.0, 2.0, 0.5, 4.0] {
        for width in [1.0, 0.5, 2.0] {
            let a = amp * k.max(1e-3).powf(0.5);
            let sech = g.from_fn(|r| a / (k * r / width).cosh());
            let gauss = g.from_fn(|r| a * (-0.5 * (k * r / width).powi(2)).exp());
            for u0 in [sech, gauss] {
                match newton_solve_with(m, g, lambda, &u0, opts) {
                    Ok(p) if p.certificate.is_certified() => return Ok(p),
                    Ok(p) => {
                        first.get_or_insert(p);
                    }
                    Err(e) => last_err = e,
                }
            }
        }
    }
    first.ok_or(last_err)
}

/// `tol`, raised to the rounding floor of the stencil applied to `u`.
pub fn effective_tol(g: &RadialGrid, u: &GridFunction, tol: f64) -> f64 {
    effective_tol_values(g, &u.values, tol)
}

pub(crate) fn effective_tol_values(g: &RadialGrid, u: &[f64], tol: f64) -> f64 {
    tol.max(ROUNDOFF * g.laplacian_stencil().norm_estimate() * max_norm(u))
}

/// Newton loop without the certificate: returns the values, residual history and
/// the number of steps needed to reach `tol`.
pub(crate) fn newton_core(
    m: &ProblemModel,
    g: &RadialGrid,
    lambda: f64,
    u0: &GridFunction,
    opts: &NewtonOptions,
) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    g.check(u0)?;
    m.check_grid(g)?;
    let norm0 = g.norm(&u0.values);
    if !(norm0 > 0.0) {
        return Err(Error::CollapsedToZero);
    }
    let scale = g.laplacian_stencil().norm_estimate();
    let mut u = u0.values.clone();
    let mut res = residual_values(m, g, lambda, &u);
    let mut rn = max_norm(&res);
    let mut history = vec![rn];
    let mut iterations = 0;
    let mut polish = 0;
    let mut reached = None;
    loop {
        let tol = opts.tol.max(ROUNDOFF * scale * max_norm(&u));
        if rn <= tol {
            reached.get_or_insert(iterations);
            if polish >= 1 {
                break;
            }
            polish += 1;
        } else if iterations >= opts.max_iter {
            return Err(Error::NoConvergence {
                iterations,
                last_norm: rn,
            });
        }
        let l = linearize_values(m, g, lambda, &u);
        let rhs: Vec<f64> = res.iter().map(|r| -r).collect();
        let delta = l.solve(&rhs)?;
        let mut t = 1.0;
        let mut trial;
        let mut trial_res;
        let mut trial_norm;
        let mut halvings = 0;
        loop {
            trial = u.iter().zip(&delta).map(|(a, d)| a + t * d).collect::<Vec<_>>();
            trial_res = residual_values(m, g, lambda, &trial);
            trial_norm = max_norm(&trial_res);
            if trial_norm < rn || halvings >= opts.max_halvings || rn <= tol {
                break;
            }
            t *= 0.5;
            halvings += 1;
        }
        if rn <= tol && !(trial_norm <= tol) {
            break;
        }
        u = trial;
        res = trial_res;
        rn = trial_norm;
        if reached.is_none() {
            iterations += 1;
        }
        history.push(rn);
        if !rn.is_finite() {
            return Err(Error::NoConvergence {
                iterations,
                last_norm: rn,
            });
        }
        if g.norm(&u) < 1e-6 * norm0 {
            return Err(Error::CollapsedToZero);
        }
    }
    Ok((u, history, reached.unwrap_or(iterations)))
}

/// Seeds Newton by the exact scaling `u_λ(r) = s^{1/(p-2)} u_ref(√s r)`, `s = λ / λ_ref`,
/// valid for a single focusing power with `V ≡ 0`.
pub fn scaling_guess(
    m: &ProblemModel,
    g: &RadialGrid,
    lambda: f64,
    reference: &Profile,
    reference_grid: &RadialGrid,
) -> Result<GridFunction> {
    let (coeff, p) = m.single_power().ok_or(Error::WrongModelKind)?;
    if coeff <= 0.0 || !(lambda < 0.0) || !(reference.lambda < 0.0) {
        return Err(Error::WrongModelKind);
    }
    reference_grid.check(&reference.u)?;
    let s = lambda / reference.lambda;
    let amp = s.powf(1.0 / (p - 2.0));
    let k = s.sqrt();
    Ok(g.from_fn(|r| amp * reference.u.eval_at(reference_grid, k * r)))
}

/// Least-squares slope of `-log(r^{(n-1)/2} u)` over `r ∈ [0.5R, 0.8R]`.
///
/// The algebraic prefactor removes the `r^{-(n-1)/2}` part of the radial tail;
/// for `n = 1` this is the plain slope of `-log u`.
pub fn decay_rate(u: &GridFunction, g: &RadialGrid) -> Result<f64> {
    g.check(u)?;
    let (lo, hi) = (0.5 * g.radius(), 0.8 * g.radius());
    let shift = 0.5 * (g.dim() as f64 - 1.0);
    let mut pts = Vec::new();
    for (&r, &v) in g.nodes().iter().zip(&u.values) {
        if r >= lo && r <= hi {
            if !(v > 0.0) {
                return Err(Error::NonPositiveTail);
            }
            pts.push((r, -(v.ln() + shift * r.ln())));
        }
    }
    if pts.len() < 2 {
        return Err(Error::NonPositiveTail);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Recomputes the certificate of `p` from scratch.
pub fn check_profile(m: &ProblemModel, g: &RadialGrid, p: &Profile) -> Result<Certificate> {
    certify(m, g, p.lambda, &p.u, spectral::MARGIN_RTOL)
}

pub(crate) fn certify(
    m: &ProblemModel,
    g: &RadialGrid,
    lambda: f64,
    u: &GridFunction,
    margin_rtol: f64,
) -> Result<Certificate> {
    g.check(u)?;
    let v = &u.values;
    let scale = u.max_abs();
    let interior = ((1.0 - BOUNDARY_LAYER) * v.len() as f64).floor() as usize;
    let positive = scale > 0.0 && v[..interior.max(1)].iter().all(|&x| x > 0.0);
    let radially_decreasing = scale > 0.0 && v.windows(2).all(|w| w[1] <= w[0] + 1e-12 * scale);
    let l = linearize(m, g, lambda, u)?;
    let (morse_index, nondegeneracy_margin) = spectral::morse_and_margin_of(&l);
    let margin_floor = spectral::margin_floor_rel(&l, margin_rtol);
    let slope = if nondegeneracy_margin > 0.0 {
        match l.solve(v) {
            Ok(a) => g.dot(&a, v),
            Err(_) => f64::NAN,
        }
    } else {
        f64::NAN
    };
    let tail_value = u.eval_at(g, 0.8 * g.radius());
    let (decay_rate_fit, decay_status) = if !positive {
        (None, DecayStatus::NonPositiveTail)
    } else if tail_value <= TAIL_FLOOR * scale {
        (None, DecayStatus::TailUnresolved)
    } else {
        match decay_rate(u, g) {
            Ok(a) => (Some(a), DecayStatus::Fitted),
            Err(_) => (None, DecayStatus::NonPositiveTail),
        }
    };
    let pohozaev = model::pohozaev_residual(m, g, u, lambda)?;
    Ok(Certificate {
        positive,
        radially_decreasing,
        morse_index,
        nondegeneracy_margin,
        margin_floor,
        slope,
        decay_rate_fit,
        decay_status,
        pohozaev,
    })
}

/// Contents of a solution file.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionFile {
    pub grid: GridId,
    pub lambda: f64,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
}

impl SolutionFile {
    /// Values as a function on `g`; the stored grid must be `g`.
    pub fn on_grid(&self, g: &RadialGrid) -> Result<GridFunction> {
        if self.grid != g.id() {
            return Err(Error::GridMismatch(format!(
                "solution file is on [{}], configured grid is [{}]",
                self.grid,
                g.id()
            )));
        }
        g.wrap(self.u.clone())
    }
}

pub fn format_solution(g: &RadialGrid, lambda: f64, u: &GridFunction) -> Result<String> {
    g.check(u)?;
    let mut s = format!(
        "# dim={} lambda={} R={} M={}\n",
        g.dim(),
        crate::fmt17(lambda),
        crate::fmt17(g.radius()),
        g.points()
    );
    for (&r, &v) in g.nodes().iter().zip(&u.values) {
        s.push_str(&crate::fmt17(r));
        s.push('\t');
        s.push_str(&crate::fmt17(v));
        s.push('\n');
    }
    Ok(s)
}

pub fn write_solution(path: &Path, g: &RadialGrid, lambda: f64, u: &GridFunction) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(format_solution(g, lambda, u)?.as_bytes())?;
    f.flush()?;
    Ok(())
}

pub fn parse_solution(reader: impl BufRead) -> Result<SolutionFile> {
    let mut header = None;
    let mut r = Vec::new();
    let mut u = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if header.is_none() {
                header = Some(parse_header(rest)?);
            }
            continue;
        }
        let mut cols = line.split('\t');
        let (a, b) = match (cols.next(), cols.next()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::Parse(format!("line {}: expected r<TAB>u", lineno + 1))),
        };
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {}: bad number `{s}`", lineno + 1)))
        };
        r.push(parse(a)?);
        u.push(parse(b)?);
    }
    let (grid, lambda) = header.ok_or_else(|| Error::Parse("missing `# dim=..` header".into()))?;
    if u.len() != grid.points + 1 {
        return Err(Error::Parse(format!(
            "header announces M={} but file has {} rows",
            grid.points,
            u.len()
        )));
    }
    Ok(SolutionFile { grid, lambda, r, u })
}

fn parse_header(rest: &str) -> Result<(GridId, f64)> {
    let mut dim = None;
    let mut lambda = None;
    let mut radius = None;
    let mut points = None;
    for tok in rest.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad header token `{tok}`")))?;
        let bad = || Error::Parse(format!("bad header value `{tok}`"));
        match k {
            "dim" => dim = Some(v.parse::<usize>().map_err(|_| bad())?),
            "lambda" => lambda = Some(v.parse::<f64>().map_err(|_| bad())?),
            "R" => radius = Some(v.parse::<f64>().map_err(|_| bad())?),
            "M" => points = Some(v.parse::<usize>().map_err(|_| bad())?),
            _ => {}
        }
    }
    match (dim, lambda, radius, points) {
        (Some(dim), Some(lambda), Some(radius), Some(points)) => Ok((
            GridId {
                dim,
                radius,
                points,
            },
            lambda,
        )),
        _ => Err(Error::Parse("header needs dim, lambda, R and M".into())),
    }
}

pub fn read_solution(path: &Path) -> Result<SolutionFile> {
    let f = std::fs::File::open(path)?;
    parse_solution(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic1() -> (ProblemModel, RadialGrid) {
        (
            ProblemModel::pure_power(1, 1.0, 4.0).unwrap(),
            RadialGrid::new(1, 30.0, 6000).unwrap(),
        )
    }

    fn soliton(g: &RadialGrid, omega: f64) -> GridFunction {
        g.from_fn(|r| (2.0 * omega).sqrt() / (omega.sqrt() * r).cosh())
    }

    #[test]
    fn seedless_solve_finds_the_cubic_soliton() {
        let m = ProblemModel::pure_power(1, 1.0, 4.0).unwrap();
        let g = RadialGrid::new(1, 30.0, 3000).unwrap();
        let p = solve_without_seed(&m, &g, -1.0, &NewtonOptions::default()).unwrap();
        assert!(p.certificate.is_certified());
        assert!((model::mass(&g, &p.u).unwrap() - 2.0).abs() < 1e-4);
        let m3 = ProblemModel::pure_power(3, 1.0, 3.0).unwrap();
        let g3 = RadialGrid::new(3, 30.0, 3000).unwrap();
        assert!(solve_without_seed(&m3, &g3, -1.0, &NewtonOptions::default())
            .unwrap()
            .certificate
            .is_certified());
    }

    #[test]
    fn residual_of_zero_and_of_the_soliton() {
        let (m, g) = cubic1();
        assert_eq!(max_norm(&residual(&m, &g, -1.0, &g.zeros()).unwrap().values), 0.0);
        let res = residual(&m, &g, -1.0, &soliton(&g, 1.0)).unwrap();
        assert!(max_norm(&res.values) < 2.0 * g.h() * g.h(), "{}", max_norm(&res.values));
    }

    #[test]
    fn residual_of_a_gaussian_without_nonlinearity() {
        let m = ProblemModel::new(3, vec![], crate::model::Potential::Zero).unwrap();
        let g = RadialGrid::new(3, 12.0, 2400).unwrap();
        let u = g.from_fn(|r| (-r * r / 2.0).exp());
        let res = residual(&m, &g, -0.5, &u).unwrap();
        for i in (200..g.len() - 600).step_by(7) {
            let r = g.nodes()[i];
            let exact = (3.0 - r * r + 0.5) * u.values[i];
            assert!((res.values[i] - exact).abs() < 1e-4, "i={i}");
        }
    }

    #[test]
    fn linearization_matches_directional_derivatives() {
        let m = ProblemModel::double_power(2, 3.0, 5.0).unwrap();
        let g = RadialGrid::new(2, 15.0, 600).unwrap();
        let u = g.from_fn(|r| 1.2 * (-r * r / 4.0).exp());
        let phi = g.from_fn(|r| (r * 1.3).cos() * (-r / 3.0).exp());
        let lambda = -0.4;
        let l = linearize(&m, &g, lambda, &u).unwrap();
        let lphi = l.apply(&phi.values);
        let base = residual(&m, &g, lambda, &u).unwrap();
        let mismatch = |eps: f64| {
            let shifted = g.wrap(u.values.iter().zip(&phi.values).map(|(a, b)| a + eps * b).collect()).unwrap();
            let r = residual(&m, &g, lambda, &shifted).unwrap();
            (0..g.len())
                .map(|i| ((r.values[i] - base.values[i]) / eps - lphi[i]).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (mismatch(1e-4), mismatch(5e-5));
        assert!(e1 < 1e-3);
        assert!((e1 / e2 - 2.0).abs() < 0.2, "{e1} {e2}");
    }

    #[test]
    fn linearization_at_zero_is_the_shifted_laplacian() {
        let (m, g) = cubic1();
        let l = linearize(&m, &g, -1.0, &g.zeros()).unwrap();
        let x = g.from_fn(|r| (-r * r).exp());
        let lx = l.apply(&x.values);
        let ax = g.apply_laplacian(&x.values);
        for i in 0..g.len() {
            assert!((lx[i] - ax[i] - x.values[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn soliton_has_negative_quadratic_form() {
        let (m, g) = cubic1();
        let u = soliton(&g, 1.0);
        let l = linearize(&m, &g, -1.0, &u).unwrap();
        assert!(g.dot(&l.apply(&u.values), &u.values) < 0.0);
    }

    #[test]
    fn newton_recovers_the_soliton() {
        let (m, g) = cubic1();
        let exact = soliton(&g, 1.0);
        let p = newton_solve(&m, &g, -1.0, &exact.scaled(1.05), 1e-10, 30).unwrap();
        assert!(p.iterations <= 6, "{} iterations", p.iterations);
        assert!(p.residual_norm <= 1e-10);
        let err = max_norm(&p.u.values.iter().zip(&exact.values).map(|(a, b)| a - b).collect::<Vec<_>>());
        assert!(err < 3.0 * g.h() * g.h(), "{err}");
        let c = &p.certificate;
        assert!(c.positive && c.radially_decreasing);
        assert_eq!(c.morse_index, 1);
        assert!(c.is_certified());
    }

    #[test]
    fn newton_converges_quadratically() {
        let (m, g) = cubic1();
        let p = newton_solve(&m, &g, -1.0, &soliton(&g, 1.0).scaled(1.2), 1e-10, 30).unwrap();
        let h = &p.residual_history;
        let k = h.iter().position(|&r| r < 1e-3).unwrap();
        let ratio = h[k + 1].ln() / h[k].ln();
        assert!(ratio > 1.6, "{h:?}");
    }

    #[test]
    fn zero_start_is_rejected() {
        let (m, g) = cubic1();
        assert_eq!(
            newton_solve(&m, &g, -1.0, &g.zeros(), 1e-10, 10).unwrap_err(),
            Error::CollapsedToZero
        );
    }

    #[test]
    fn newton_reports_non_convergence() {
        let (m, g) = cubic1();
        let err = newton_solve(&m, &g, -1.0, &soliton(&g, 1.0).scaled(3.0), 1e-10, 1).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }), "{err:?}");
    }

    #[test]
    fn scaling_guess_matches_the_closed_form() {
        let (m, g) = cubic1();
        let reference = newton_solve(&m, &g, -1.0, &soliton(&g, 1.0), 1e-10, 10).unwrap();
        let same = scaling_guess(&m, &g, -1.0, &reference, &g).unwrap();
        assert!(max_norm(&same.values.iter().zip(&reference.u.values).map(|(a, b)| a - b).collect::<Vec<_>>()) < 1e-14);
        let guess = scaling_guess(&m, &g, -4.0, &reference, &g).unwrap();
        let res = residual(&m, &g, -4.0, &guess).unwrap();
        assert!(max_norm(&res.values) < 1e-3);
        let q_ref = model::mass(&g, &reference.u).unwrap();
        let q = model::mass(&g, &guess).unwrap();
        let predicted = 4f64.powf(2.0 / 2.0 - 0.5) * q_ref;
        assert!((q - predicted).abs() < 1e-6 * predicted, "{q} {predicted}");

        let double = ProblemModel::double_power(1, 4.0, 6.0).unwrap();
        assert_eq!(
            scaling_guess(&double, &g, -1.0, &reference, &g).unwrap_err(),
            Error::WrongModelKind
        );
    }

    #[test]
    fn decay_rate_of_pure_exponential_and_soliton() {
        let g = RadialGrid::new(1, 30.0, 3000).unwrap();
        let e = g.from_fn(|r| (-r).exp());
        assert!((decay_rate(&e, &g).unwrap() - 1.0).abs() < 1e-10);
        let s = soliton(&g, 1.0);
        assert!((decay_rate(&s, &g).unwrap() - 1.0).abs() < 0.02);
        let neg = s.scaled(-1.0);
        assert_eq!(decay_rate(&neg, &g).unwrap_err(), Error::NonPositiveTail);
    }

    #[test]
    fn certificate_flags_bad_shapes() {
        let (m, g) = cubic1();
        let u = soliton(&g, 1.0);
        let c = certify(&m, &g, -1.0, &u.scaled(-1.0), spectral::MARGIN_RTOL).unwrap();
        assert!(!c.positive);
        let z = certify(&m, &g, -1.0, &g.zeros(), spectral::MARGIN_RTOL).unwrap();
        assert!(!z.positive);
        assert_eq!(z.morse_index, 0);
    }

    #[test]
    fn unresolved_tail_is_reported() {
        let (m, g) = cubic1();
        let p = newton_solve(&m, &g, -4.0, &soliton(&g, 4.0), 1e-10, 20).unwrap();
        assert_eq!(p.certificate.decay_status, DecayStatus::TailUnresolved);
        assert!(p.certificate.decay_rate_fit.is_none());
    }

    #[test]
    fn solution_file_round_trip() {
        let g = RadialGrid::new(2, 10.0, 64).unwrap();
        let u = g.from_fn(|r| (-r * r / 3.0).exp() / 7.0 + 1e-300);
        let text = format_solution(&g, -0.123_456_789_012_345_68, &u).unwrap();
        let back = parse_solution(text.as_bytes()).unwrap();
        assert_eq!(back.grid, g.id());
        assert_eq!(back.lambda, -0.123_456_789_012_345_68);
        assert_eq!(back.on_grid(&g).unwrap(), u);
        let other = RadialGrid::new(2, 10.0, 65).unwrap();
        assert!(matches!(back.on_grid(&other), Err(Error::GridMismatch(_))));
        assert!(parse_solution("0 1\n".as_bytes()).is_err());
    }
}
