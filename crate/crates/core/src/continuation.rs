//! Predictor–corrector continuation of `λ ↦ u_λ`.
//!
//! Unknowns are `(u, λ)`; the arclength metric is `‖Δu‖² + θ Δλ²` with the
//! weighted L² norm of the grid. Each corrector step eliminates the bordered
//! system
//!
//! ```text
//! L_u δu - u δλ = -G,     ⟨τ_u, δu⟩ + θ τ_λ δλ = -N
//! ```
//!
//! through two solves with the same factorization, `a = L⁻¹(-G)` and
//! `b = L⁻¹u`, so that `δu = a + δλ b`.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::elliptic::{self, max_norm, NewtonOptions, Profile};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, RadialGrid};
use crate::model::{self, ProblemModel};
use crate::spectral::{self, SpectrumReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StepMode {
    PseudoArclength,
    /// Fixed steps in λ; valid while `L_u` stays invertible.
    Natural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Both,
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuationOptions {
    pub ds_init: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_steps: usize,
    pub newton: NewtonOptions,
    pub corrector_max_iter: usize,
    pub mode: StepMode,
    pub direction: Direction,
    /// Weight θ of `Δλ²` in the arclength metric.
    pub lambda_weight: f64,
    pub spectrum_k: usize,
    pub require_certificate: bool,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            ds_init: 0.05,
            ds_min: 1e-6,
            ds_max: 0.2,
            max_steps: 2000,
            newton: NewtonOptions::default(),
            corrector_max_iter: 10,
            mode: StepMode::PseudoArclength,
            direction: Direction::Both,
            lambda_weight: 1.0,
            spectrum_k: 2,
            require_certificate: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchPoint {
    pub lambda: f64,
    pub profile: Profile,
    pub q: f64,
    pub e: f64,
    pub slope: f64,
    pub spectrum: SpectrumReport,
}

impl BranchPoint {
    fn tangent(&self) -> &GridFunction {
        &self.spectrum.adjoint_state
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Termination {
    RangeEnd { lambda: f64 },
    MaxSteps,
    /// `‖u‖∞ < 1e-6`: the branch reached the linear limit.
    LinearLimit,
    CertificateFailure { lambda: f64, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FoldKind {
    MassMaximum,
    MassMinimum,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldRecord {
    pub lambda: f64,
    pub q: f64,
    /// Indices of the bracketing branch points.
    pub bracket: (usize, usize),
    pub kind: Option<FoldKind>,
    pub slope_at_fold: f64,
    /// `|Δλ / ΔQ|` next to the fold; it grows without bound at a genuine fold.
    pub reciprocal_quotient: f64,
    pub one_sided: bool,
}

impl FoldRecord {
    pub fn blowup_confirmed(&self) -> bool {
        self.reciprocal_quotient > 1e3
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    pub folds: Vec<FoldRecord>,
    /// Termination at the start and at the end of the ordered point list.
    pub termination: (Termination, Termination),
}

impl Branch {
    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lambda).collect()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.q).collect()
    }
}

/// Builds an accepted branch point, recomputing every diagnostic.
pub fn make_point(
    m: &ProblemModel,
    g: &RadialGrid,
    profile: Profile,
    spectrum_k: usize,
) -> Result<BranchPoint> {
    let l = elliptic::linearize(m, g, profile.lambda, &profile.u)?;
    let spectrum = spectral::spectrum_report_of(&l, g, &profile.u, spectrum_k)?;
    let q = model::mass(g, &profile.u)?;
    let e = model::energy(m, g, &profile.u)?;
    Ok(BranchPoint {
        lambda: profile.lambda,
        slope: spectrum.slope,
        q,
        e,
        spectrum,
        profile,
    })
}

/// Profile at fixed λ from a starting guess, certificate included.
pub(crate) fn solve_at(
    m: &ProblemModel,
    g: &RadialGrid,
    lambda: f64,
    guess: &[f64],
    newton: &NewtonOptions,
) -> Result<Profile> {
    elliptic::newton_solve_with(m, g, lambda, &g.wrap(guess.to_vec())?, newton)
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(yi, xi)| yi + a * xi).collect()
}

struct Corrected {
    u: Vec<f64>,
    lambda: f64,
    iterations: usize,
}

/// Newton on the bordered system `G(u, λ) = 0`, `⟨τ_u, u - u_p⟩ + θ τ_λ (λ - λ_p) = 0`.
fn arclength_correct(
    m: &ProblemModel,
    g: &RadialGrid,
    pred: (&[f64], f64),
    tangent: (&[f64], f64),
    opts: &ContinuationOptions,
) -> Result<Corrected> {
    let (up, lp) = pred;
    let (tu, tl) = tangent;
    let theta = opts.lambda_weight;
    let mut u = up.to_vec();
    let mut lambda = lp;
    let mut polished = false;
    for it in 0..=opts.corrector_max_iter {
        let res = elliptic::residual_values(m, g, lambda, &u);
        let rn = max_norm(&res);
        if !rn.is_finite() {
            break;
        }
        let tol = elliptic::effective_tol_values(g, &u, opts.newton.tol);
        if rn <= tol {
            if polished {
                return Ok(Corrected {
                    u,
                    lambda,
                    iterations: it,
                });
            }
            polished = true;
        }
        let l = elliptic::linearize_values(m, g, lambda, &u);
        let lu = l.factor()?;
        let a = lu.solve(&res.iter().map(|r| -r).collect::<Vec<_>>())?;
        let b = lu.solve(&u)?;
        let diff: Vec<f64> = u.iter().zip(up).map(|(x, y)| x - y).collect();
        let n = g.dot(tu, &diff) + theta * tl * (lambda - lp);
        let denom = g.dot(tu, &b) + theta * tl;
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let dl = (-n - g.dot(tu, &a)) / denom;
        let du: Vec<f64> = a.iter().zip(&b).map(|(ai, bi)| ai + dl * bi).collect();
        u = u.iter().zip(&du).map(|(x, d)| x + d).collect();
        lambda += dl;
        if polished {
            let res = elliptic::residual_values(m, g, lambda, &u);
            if max_norm(&res) <= elliptic::effective_tol_values(g, &u, opts.newton.tol) {
                return Ok(Corrected {
                    u,
                    lambda,
                    iterations: it,
                });
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.corrector_max_iter,
        last_norm: max_norm(&elliptic::residual_values(m, g, lambda, &u)),
    })
}

enum StepOutcome {
    Accepted(Box<BranchPoint>, usize),
    Terminated(Termination, Option<Box<BranchPoint>>),
}

/// Traces one direction from `start`; `sign` orients the initial tangent in λ.
fn trace(
    m: &ProblemModel,
    g: &RadialGrid,
    start: &BranchPoint,
    range: (f64, f64),
    sign: f64,
    opts: &ContinuationOptions,
) -> Result<(Vec<BranchPoint>, Termination)> {
    let (lo, hi) = range;
    let mut out: Vec<BranchPoint> = Vec::new();
    let mut ds = opts.ds_init.min(opts.ds_max);
    let mut easy = 0;
    let mut prev_dir: Option<(Vec<f64>, f64)> = None;
    for _ in 0..opts.max_steps {
        let cur_lambda = out.last().unwrap_or(start).lambda;
        if (sign > 0.0 && cur_lambda >= hi) || (sign < 0.0 && cur_lambda <= lo) {
            return Ok((out, Termination::RangeEnd { lambda: cur_lambda }));
        }
        let cur = out.last().unwrap_or(start);
        // Exact tangent (L⁻¹u, 1), oriented along the previous step.
        let b = &cur.tangent().values;
        let norm = (g.dot(b, b) + opts.lambda_weight).sqrt();
        let mut tu: Vec<f64> = b.iter().map(|x| x / norm).collect();
        let mut tl = 1.0 / norm;
        let orient = match &prev_dir {
            Some((du, dl)) => g.dot(&tu, du) + opts.lambda_weight * tl * dl,
            None => sign * tl,
        };
        if orient < 0.0 {
            tu.iter_mut().for_each(|x| *x = -*x);
            tl = -tl;
        }
        let outcome = loop {
            match step(m, g, cur, (&tu, tl), ds, range, opts) {
                Ok(o) => break o,
                Err(e @ Error::CollapsedToZero) => return Err(e),
                Err(_) => {
                    ds *= 0.5;
                    easy = 0;
                    if ds < opts.ds_min {
                        return Err(Error::StepCollapse {
                            ds_min: opts.ds_min,
                            lambda: cur.lambda,
                        });
                    }
                }
            }
        };
        match outcome {
            StepOutcome::Accepted(p, iterations) => {
                let du: Vec<f64> = p.profile.u.values.iter().zip(&cur.profile.u.values).map(|(a, b)| a - b).collect();
                prev_dir = Some((du, p.lambda - cur.lambda));
                out.push(*p);
                if iterations <= 3 {
                    easy += 1;
                    if easy >= 4 {
                        ds = (1.3 * ds).min(opts.ds_max);
                        easy = 0;
                    }
                } else {
                    easy = 0;
                }
            }
            StepOutcome::Terminated(reason, last) => {
                if let Some(p) = last {
                    out.push(*p);
                }
                return Ok((out, reason));
            }
        }
    }
    Ok((out, Termination::MaxSteps))
}

fn step(
    m: &ProblemModel,
    g: &RadialGrid,
    cur: &BranchPoint,
    tangent: (&[f64], f64),
    ds: f64,
    range: (f64, f64),
    opts: &ContinuationOptions,
) -> Result<StepOutcome> {
    let (tu, tl) = tangent;
    let u0 = &cur.profile.u.values;
    let (u, lambda, iterations) = match opts.mode {
        StepMode::PseudoArclength => {
            let up = axpy(ds, tu, u0);
            let lp = cur.lambda + ds * tl;
            let c = arclength_correct(m, g, (&up, lp), (tu, tl), opts)?;
            (c.u, c.lambda, c.iterations)
        }
        StepMode::Natural => {
            let dl = ds * tl.signum();
            let lambda = cur.lambda + dl;
            let guess = axpy(dl, &cur.tangent().values, u0);
            let (u, _, it) = elliptic::newton_core(m, g, lambda, &g.wrap(guess)?, &opts.newton)?;
            (u, lambda, it)
        }
    };
    if max_norm(&u) < 1e-6 {
        return Ok(StepOutcome::Terminated(Termination::LinearLimit, None));
    }
    let du: Vec<f64> = u.iter().zip(u0).map(|(a, b)| a - b).collect();
    let step_norm = (g.dot(&du, &du) + opts.lambda_weight * (lambda - cur.lambda).powi(2)).sqrt();
    if opts.mode == StepMode::PseudoArclength && step_norm > opts.ds_max * 1.5 {
        return Err(Error::NoConvergence {
            iterations,
            last_norm: step_norm,
        });
    }
    let (lo, hi) = range;
    let crossed = if lambda > hi {
        Some(hi)
    } else if lambda < lo {
        Some(lo)
    } else {
        None
    };
    if let Some(end) = crossed {
        let guess = axpy(end - cur.lambda, &cur.tangent().values, u0);
        let p = solve_at(m, g, end, &guess, &opts.newton)?;
        let point = accept(m, g, p, opts)?;
        return Ok(match point {
            Ok(p) => StepOutcome::Terminated(Termination::RangeEnd { lambda: end }, Some(Box::new(p))),
            Err(reason) => StepOutcome::Terminated(reason, None),
        });
    }
    let p = elliptic::newton_solve_with(m, g, lambda, &g.wrap(u)?, &opts.newton)?;
    Ok(match accept(m, g, p, opts)? {
        Ok(p) => StepOutcome::Accepted(Box::new(p), iterations),
        Err(reason) => StepOutcome::Terminated(reason, None),
    })
}

fn accept(
    m: &ProblemModel,
    g: &RadialGrid,
    p: Profile,
    opts: &ContinuationOptions,
) -> Result<std::result::Result<BranchPoint, Termination>> {
    if opts.require_certificate {
        if let Some(reason) = p.certificate.failure() {
            return Ok(Err(Termination::CertificateFailure {
                lambda: p.lambda,
                reason,
            }));
        }
    }
    Ok(Ok(make_point(m, g, p, opts.spectrum_k)?))
}

/// Traces the branch through `seed` over `lambda_range = (lo, hi)`.
///
/// Points are ordered by arclength, starting at the end reached when moving
/// toward decreasing λ.
pub fn continue_branch(
    m: &ProblemModel,
    g: &RadialGrid,
    seed: &Profile,
    lambda_range: (f64, f64),
    opts: &ContinuationOptions,
) -> Result<Branch> {
    let (lo, hi) = lambda_range;
    if !(lo < hi) {
        return Err(Error::InvalidModel(format!("empty lambda range [{lo}, {hi}]")));
    }
    if !(seed.residual_norm <= elliptic::effective_tol(g, &seed.u, opts.newton.tol)) {
        return Err(Error::SeedNotConverged(seed.residual_norm));
    }
    if seed.lambda < lo || seed.lambda > hi {
        return Err(Error::InvalidModel(format!(
            "seed lambda {} outside [{lo}, {hi}]",
            seed.lambda
        )));
    }
    let start = make_point(m, g, seed.clone(), opts.spectrum_k)?;
    let (back, back_end) = if opts.direction != Direction::Increasing {
        trace(m, g, &start, lambda_range, -1.0, opts)?
    } else {
        (Vec::new(), Termination::RangeEnd { lambda: start.lambda })
    };
    let (fwd, fwd_end) = if opts.direction != Direction::Decreasing {
        trace(m, g, &start, lambda_range, 1.0, opts)?
    } else {
        (Vec::new(), Termination::RangeEnd { lambda: start.lambda })
    };
    let mut points: Vec<BranchPoint> = back.into_iter().rev().collect();
    points.push(start);
    points.extend(fwd);
    let mut branch = Branch {
        points,
        folds: Vec::new(),
        termination: (back_end, fwd_end),
    };
    branch.folds = detect_folds(m, g, &branch, &opts.newton)?;
    Ok(branch)
}

/// Traces several branches in parallel; results keep the order of `seeds`.
pub fn continue_branches(
    m: &ProblemModel,
    g: &RadialGrid,
    seeds: &[Profile],
    lambda_range: (f64, f64),
    opts: &ContinuationOptions,
) -> Vec<Result<Branch>> {
    seeds
        .par_iter()
        .map(|s| continue_branch(m, g, s, lambda_range, opts))
        .collect()
}

fn slope_scale(q: f64) -> f64 {
    1e-8 * q.abs().max(1.0)
}

/// Fold records for every sign change of the slope along `b`.
pub fn detect_folds(
    m: &ProblemModel,
    g: &RadialGrid,
    b: &Branch,
    newton: &NewtonOptions,
) -> Result<Vec<FoldRecord>> {
    let pts = &b.points;
    let mut folds = Vec::new();
    for k in 0..pts.len().saturating_sub(1) {
        let (p0, p1) = (&pts[k], &pts[k + 1]);
        if p0.slope.is_nan() || p1.slope.is_nan() {
            continue;
        }
        if p0.slope.abs() < slope_scale(p0.q) || p1.slope.abs() < slope_scale(p1.q) {
            continue;
        }
        if p0.slope.signum() == p1.slope.signum() {
            continue;
        }
        folds.push(refine_fold(m, g, p0, p1, (k, k + 1), newton)?);
    }
    for (idx, endpoint) in [(0, pts.first()), (pts.len().saturating_sub(1), pts.last())] {
        if let Some(p) = endpoint {
            if p.slope.abs() < slope_scale(p.q) {
                folds.push(FoldRecord {
                    lambda: p.lambda,
                    q: p.q,
                    bracket: (idx, idx),
                    kind: None,
                    slope_at_fold: p.slope,
                    reciprocal_quotient: f64::INFINITY,
                    one_sided: true,
                });
            }
        }
    }
    folds.sort_by_key(|a| a.bracket);
    folds.dedup_by(|a, b| a.bracket == b.bracket);
    Ok(folds)
}

struct Sample {
    lambda: f64,
    q: f64,
    slope: f64,
    u: Vec<f64>,
    tangent: Vec<f64>,
}

fn resolve(
    m: &ProblemModel,
    g: &RadialGrid,
    from: &Sample,
    lambda: f64,
    newton: &NewtonOptions,
) -> Result<Sample> {
    let guess = axpy(lambda - from.lambda, &from.tangent, &from.u);
    let (u, _, _) = elliptic::newton_core(m, g, lambda, &g.wrap(guess)?, newton)?;
    let l = elliptic::linearize_values(m, g, lambda, &u);
    let tangent = l.solve(&u)?;
    Ok(Sample {
        lambda,
        q: 0.5 * g.dot(&u, &u),
        slope: g.dot(&tangent, &u),
        u,
        tangent,
    })
}

fn sample_of(p: &BranchPoint) -> Sample {
    Sample {
        lambda: p.lambda,
        q: p.q,
        slope: p.slope,
        u: p.profile.u.values.clone(),
        tangent: p.tangent().values.clone(),
    }
}

/// Illinois regula falsi on `λ ↦ ⟨L⁻¹u, u⟩` between two bracketing points.
fn refine_fold(
    m: &ProblemModel,
    g: &RadialGrid,
    p0: &BranchPoint,
    p1: &BranchPoint,
    bracket: (usize, usize),
    newton: &NewtonOptions,
) -> Result<FoldRecord> {
    let mut a = sample_of(p0);
    let mut b = sample_of(p1);
    let mut side = 0i8;
    let mut best = if a.slope.abs() < b.slope.abs() { sample_of(p0) } else { sample_of(p1) };
    for _ in 0..200 {
        if best.slope.abs() < slope_scale(best.q) {
            break;
        }
        let width = (b.lambda - a.lambda).abs();
        if width <= 1e-15 * a.lambda.abs().max(1.0) {
            break;
        }
        let mut x = (a.lambda * b.slope - b.lambda * a.slope) / (b.slope - a.slope);
        let (lo, hi) = (a.lambda.min(b.lambda), a.lambda.max(b.lambda));
        if !(x > lo && x < hi) {
            x = 0.5 * (a.lambda + b.lambda);
        }
        let from = if (x - a.lambda).abs() < (x - b.lambda).abs() { &a } else { &b };
        let s = resolve(m, g, from, x, newton)?;
        if s.slope.signum() == a.slope.signum() {
            if side == -1 {
                b.slope *= 0.5;
            }
            side = -1;
            a = s;
            if a.slope.abs() < best.slope.abs() {
                best = resolve(m, g, &a, a.lambda, newton)?;
            }
        } else {
            if side == 1 {
                a.slope *= 0.5;
            }
            side = 1;
            b = s;
            if b.slope.abs() < best.slope.abs() {
                best = resolve(m, g, &b, b.lambda, newton)?;
            }
        }
    }
    // Positive slope to the left of the fold means Q peaks there.
    let left_slope = if p0.lambda < p1.lambda { p0.slope } else { p1.slope };
    let kind = if left_slope > 0.0 {
        FoldKind::MassMaximum
    } else {
        FoldKind::MassMinimum
    };
    let d = 1e-6 * best.lambda.abs().max(1.0);
    let off = resolve(m, g, &best, best.lambda + d, newton)?;
    let reciprocal_quotient = (d / (off.q - best.q)).abs();
    Ok(FoldRecord {
        lambda: best.lambda,
        q: best.q,
        bracket,
        kind: Some(kind),
        slope_at_fold: best.slope,
        reciprocal_quotient,
        one_sided: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityReport {
    /// Worst `|⟨L⁻¹u, u⟩ - dQ/dλ|` with the three-point difference along the branch.
    pub slope_mismatch: f64,
    /// Worst `‖L_u(L⁻¹u) - u‖ / ‖u‖`.
    pub adjoint_residual: f64,
    /// Worst `|E' - λ Q'| / (1 + |λ Q'|)`.
    pub energy_identity: f64,
    pub checked: usize,
}

fn three_point_derivative(x: [f64; 3], y: [f64; 3]) -> f64 {
    let h1 = x[1] - x[0];
    let h2 = x[2] - x[1];
    -h2 / (h1 * (h1 + h2)) * y[0] + (h2 - h1) / (h1 * h2) * y[1] + h1 / (h2 * (h1 + h2)) * y[2]
}

pub fn branch_identities(b: &Branch) -> Result<IdentityReport> {
    let pts = &b.points;
    if pts.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            got: pts.len(),
        });
    }
    let mut rep = IdentityReport {
        slope_mismatch: 0.0,
        adjoint_residual: pts.iter().map(|p| p.spectrum.adjoint_residual).fold(0.0, f64::max),
        energy_identity: 0.0,
        checked: 0,
    };
    for w in pts.windows(3) {
        let x = [w[0].lambda, w[1].lambda, w[2].lambda];
        if (x[1] - x[0]) * (x[2] - x[1]) <= 0.0 {
            continue;
        }
        let dq = three_point_derivative(x, [w[0].q, w[1].q, w[2].q]);
        let de = three_point_derivative(x, [w[0].e, w[1].e, w[2].e]);
        rep.slope_mismatch = rep.slope_mismatch.max((w[1].slope - dq).abs());
        let lq = w[1].lambda * dq;
        rep.energy_identity = rep.energy_identity.max((de - lq).abs() / (1.0 + lq.abs()));
        rep.checked += 1;
    }
    Ok(rep)
}

/// `(Q(λ+h) - Q(λ-h)) / 2h` from two fresh solves next to `p`.
pub fn centered_mass_derivative(
    m: &ProblemModel,
    g: &RadialGrid,
    p: &BranchPoint,
    h: f64,
    newton: &NewtonOptions,
) -> Result<f64> {
    let s = sample_of(p);
    let plus = resolve(m, g, &s, p.lambda + h, newton)?;
    let minus = resolve(m, g, &s, p.lambda - h, newton)?;
    Ok((plus.q - minus.q) / (2.0 * h))
}

/// Centered differences `(Q', E')` in λ from fresh solves next to `p`.
pub fn centered_derivatives(
    m: &ProblemModel,
    g: &RadialGrid,
    p: &BranchPoint,
    h: f64,
    newton: &NewtonOptions,
) -> Result<(f64, f64)> {
    let s = sample_of(p);
    let plus = resolve(m, g, &s, p.lambda + h, newton)?;
    let minus = resolve(m, g, &s, p.lambda - h, newton)?;
    let e = |u: &[f64]| model::energy_values(m, g, u);
    Ok((
        (plus.q - minus.q) / (2.0 * h),
        (e(&plus.u) - e(&minus.u)) / (2.0 * h),
    ))
}

pub const BRANCH_CSV_HEADER: &str = "lambda,Q,E,slope,ev1,ev2,morse,decay_fit,pohozaev";

pub fn format_branch_csv(b: &Branch) -> String {
    use crate::fmt17;
    let mut s = String::from(BRANCH_CSV_HEADER);
    s.push('\n');
    for p in &b.points {
        let ev = |i: usize| p.spectrum.eigenvalues_low.get(i).copied().unwrap_or(f64::NAN);
        let c = &p.profile.certificate;
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt17(p.lambda),
            fmt17(p.q),
            fmt17(p.e),
            fmt17(p.slope),
            fmt17(ev(0)),
            fmt17(ev(1)),
            p.spectrum.morse_index,
            fmt17(c.decay_rate_fit.unwrap_or(f64::NAN)),
            fmt17(c.pohozaev)
        ));
    }
    for f in &b.folds {
        s.push_str(&format!("# fold lambda={} Q={}\n", fmt17(f.lambda), fmt17(f.q)));
    }
    s
}

pub fn write_branch_csv(path: &Path, b: &Branch) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(format_branch_csv(b).as_bytes())?;
    Ok(())
}
