//! Mass curve `c ↦ (λ(c), m(c))` assembled from traced branches.
//!
//! Every reported sample is an exact-mass solution of the bordered system
//!
//! ```text
//! L_u δu - u δλ = -G,     ⟨u, δu⟩ = -(Q(u) - c)
//! ```
//!
//! seeded by interpolation along a branch segment. A segment is a maximal run
//! of branch points between two folds, so `Q` is monotone on it and each mass
//! is hit at most once per segment.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::continuation::{self, Branch, BranchPoint};
use crate::elliptic::{self, max_norm, NewtonOptions};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, RadialGrid};
use crate::model::{self, ProblemModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassCurveOptions {
    pub newton: NewtonOptions,
    /// Step of the centered differences in `c`.
    pub dc: f64,
    /// Step of the one-sided differences at a bad mass.
    pub dc_one_sided: f64,
    pub tie_rtol: f64,
    /// A multiplier jump must exceed this many times `|λ'| Δc`, with the
    /// smaller of the two one-sided `|λ'|`.
    pub jump_factor: f64,
    pub max_iter: usize,
    pub spectrum_k: usize,
}

impl Default for MassCurveOptions {
    fn default() -> Self {
        Self {
            newton: NewtonOptions::default(),
            dc: 1e-3,
            dc_one_sided: 1e-4,
            tie_rtol: 1e-9,
            jump_factor: 10.0,
            max_iter: 40,
            spectrum_k: 2,
        }
    }
}

/// Branch index and segment index within that branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SourceId {
    pub branch: usize,
    pub segment: usize,
}

impl std::fmt::Display for SourceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "b{}s{}", self.branch, self.segment)
    }
}

/// Point indices `first..=last` of one branch with a fixed slope sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    pub id: SourceId,
    pub first: usize,
    pub last: usize,
    pub q_min: f64,
    pub q_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SampleFlag {
    Ok,
    BadValueNear,
    BadMassLeft,
    BadMassRight,
}

impl SampleFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleFlag::Ok => "ok",
            SampleFlag::BadValueNear => "bad_value_near",
            SampleFlag::BadMassLeft => "bad_mass_left",
            SampleFlag::BadMassRight => "bad_mass_right",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Candidate {
    pub source: SourceId,
    pub lambda: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MassSample {
    pub c: f64,
    pub lambda: f64,
    pub m: f64,
    pub source: SourceId,
    pub flag: SampleFlag,
    /// Every solution found at this mass, selected one included.
    pub candidates: Vec<Candidate>,
    /// Another candidate ties the selected energy within the tolerance.
    pub multi_valued: bool,
    #[serde(skip)]
    pub point: BranchPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BadValue {
    pub c: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BadMass {
    pub c: f64,
    pub lambda_left: f64,
    pub lambda_right: f64,
    pub energy_tie_gap: f64,
    pub left: SourceId,
    pub right: SourceId,
    /// One-sided second-order differences of `m` at `c`.
    pub mprime_left: f64,
    pub mprime_right: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeRow {
    pub c: f64,
    pub lambda: f64,
    pub mprime_fd: f64,
    pub mprime_fd_half: f64,
    pub msecond_fd: f64,
    pub lambda_prime_fd: f64,
    /// `‖(u_{c+dc} - u_{c-dc})/(2dc)‖` in weighted L², reported only.
    pub difference_quotient: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MassCurve {
    pub samples: Vec<MassSample>,
    pub segments: Vec<Segment>,
    pub bad_values: Vec<BadValue>,
    pub bad_masses: Vec<BadMass>,
    pub derivative_table: Vec<DerivativeRow>,
    pub dc: f64,
}

/// Splits a branch at its folds.
pub fn segments_of(b: &Branch, branch: usize) -> Vec<Segment> {
    let n = b.points.len();
    let mut cuts: Vec<usize> = b
        .folds
        .iter()
        .filter(|f| !f.one_sided)
        .map(|f| f.bracket.0)
        .collect();
    cuts.sort_unstable();
    cuts.dedup();
    let mut out = Vec::new();
    let mut first = 0;
    for end in cuts.into_iter().chain(std::iter::once(n.saturating_sub(1))) {
        if end < first || n == 0 {
            continue;
        }
        let qs = b.points[first..=end].iter().map(|p| p.q);
        let q_min = qs.clone().fold(f64::INFINITY, f64::min);
        let q_max = qs.fold(f64::NEG_INFINITY, f64::max);
        out.push(Segment {
            id: SourceId {
                branch,
                segment: out.len(),
            },
            first,
            last: end,
            q_min,
            q_max,
        });
        first = end + 1;
    }
    out
}

/// Exact-mass Newton from `(u, λ)`: solves `Eq_λ(u) = 0`, `Q(u) = c`.
pub fn solve_exact_mass(
    m: &ProblemModel,
    g: &RadialGrid,
    c: f64,
    guess: &[f64],
    lambda_guess: f64,
    newton: &NewtonOptions,
    max_iter: usize,
) -> Result<(Vec<f64>, f64)> {
    let mut u = guess.to_vec();
    let mut lambda = lambda_guess;
    let merit = |u: &[f64], lambda: f64| {
        let r = max_norm(&elliptic::residual_values(m, g, lambda, u));
        r.max((0.5 * g.dot(u, u) - c).abs())
    };
    let tol = elliptic::effective_tol_values(g, guess, newton.tol);
    let mut current = merit(&u, lambda);
    let mut polished = false;
    for _ in 0..max_iter {
        if current <= tol {
            if polished {
                return Ok((u, lambda));
            }
            polished = true;
        }
        let res = elliptic::residual_values(m, g, lambda, &u);
        let l = elliptic::linearize_values(m, g, lambda, &u);
        let lu = l.factor()?;
        let a = lu.solve(&res.iter().map(|r| -r).collect::<Vec<_>>())?;
        let b = lu.solve(&u)?;
        let q = 0.5 * g.dot(&u, &u);
        let ub = g.dot(&u, &b);
        if ub == 0.0 || !ub.is_finite() {
            break;
        }
        let dl = (-(q - c) - g.dot(&u, &a)) / ub;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=newton.max_halvings {
            let trial: Vec<f64> = u
                .iter()
                .zip(a.iter().zip(&b))
                .map(|(x, (ai, bi))| x + t * (ai + dl * bi))
                .collect();
            let tl = lambda + t * dl;
            let mt = merit(&trial, tl);
            if mt < current || polished {
                accepted = Some((trial, tl, mt));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((nu, nl, mt)) => {
                if polished && mt > tol {
                    return Ok((u, lambda));
                }
                u = nu;
                lambda = nl;
                current = mt;
            }
            None => break,
        }
    }
    if current <= tol {
        return Ok((u, lambda));
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        last_norm: current,
    })
}

struct Ctx<'a> {
    m: &'a ProblemModel,
    g: &'a RadialGrid,
    branches: &'a [Branch],
    opts: &'a MassCurveOptions,
}

impl Ctx<'_> {
    fn points(&self, s: &Segment) -> &[BranchPoint] {
        &self.branches[s.id.branch].points[s.first..=s.last]
    }

    fn covers(&self, s: &Segment, c: f64) -> bool {
        c >= s.q_min && c <= s.q_max
    }

    /// Interpolated `(u, λ)` at mass `c` along the segment.
    fn predict(&self, s: &Segment, c: f64) -> Option<(Vec<f64>, f64)> {
        let pts = self.points(s);
        if pts.len() == 1 {
            let p = &pts[0];
            return (p.q == c).then(|| (p.profile.u.values.clone(), p.lambda));
        }
        for w in pts.windows(2) {
            let (q0, q1) = (w[0].q, w[1].q);
            if (q0 - c) * (q1 - c) <= 0.0 && q0 != q1 {
                let t = (c - q0) / (q1 - q0);
                let u = w[0]
                    .profile
                    .u
                    .values
                    .iter()
                    .zip(&w[1].profile.u.values)
                    .map(|(a, b)| (1.0 - t) * a + t * b)
                    .collect();
                return Some((u, (1.0 - t) * w[0].lambda + t * w[1].lambda));
            }
        }
        None
    }

    fn solve_on(&self, s: &Segment, c: f64) -> Result<(Vec<f64>, f64)> {
        let (u, l) = self.predict(s, c).ok_or_else(|| Error::UncoveredMass(vec![c]))?;
        solve_exact_mass(self.m, self.g, c, &u, l, &self.opts.newton, self.opts.max_iter)
    }

    fn energy(&self, u: &[f64]) -> f64 {
        model::energy_values(self.m, self.g, u)
    }

    /// `m(c)` on one segment, with `λ`.
    fn m_on(&self, s: &Segment, c: f64) -> Result<(f64, f64)> {
        let (u, l) = self.solve_on(s, c)?;
        Ok((self.energy(&u), l))
    }
}

pub fn build_mass_curve(
    m: &ProblemModel,
    g: &RadialGrid,
    branches: &[Branch],
    c_grid: &[f64],
    opts: &MassCurveOptions,
) -> Result<MassCurve> {
    if branches.is_empty() {
        return Err(Error::UncoveredMass(c_grid.to_vec()));
    }
    let ctx = Ctx {
        m,
        g,
        branches,
        opts,
    };
    let segments: Vec<Segment> = branches
        .iter()
        .enumerate()
        .flat_map(|(i, b)| segments_of(b, i))
        .collect();
    let mut cs = c_grid.to_vec();
    cs.sort_by(f64::total_cmp);
    cs.dedup();
    let uncovered: Vec<f64> = cs
        .iter()
        .copied()
        .filter(|&c| !segments.iter().any(|s| ctx.covers(s, c)))
        .collect();
    if !uncovered.is_empty() {
        return Err(Error::UncoveredMass(uncovered));
    }

    let results: Vec<Result<MassSample>> = cs
        .par_iter()
        .map(|&c| sample_at(&ctx, &segments, c))
        .collect();
    let mut samples = results.into_iter().collect::<Result<Vec<_>>>()?;

    let bad_values: Vec<BadValue> = branches
        .iter()
        .flat_map(|b| b.folds.iter())
        .map(|f| BadValue {
            c: f.q,
            lambda: f.lambda,
        })
        .collect();

    let mut bad_masses = Vec::new();
    for j in 0..samples.len().saturating_sub(1) {
        let (a, b) = (&samples[j], &samples[j + 1]);
        if a.source == b.source {
            continue;
        }
        let rate = (1.0 / a.point.slope).abs().min((1.0 / b.point.slope).abs());
        if (b.lambda - a.lambda).abs() <= opts.jump_factor * rate * (b.c - a.c) {
            continue;
        }
        let sa = *segments.iter().find(|s| s.id == a.source).unwrap();
        let sb = *segments.iter().find(|s| s.id == b.source).unwrap();
        if let Some(bm) = maxwell_point(&ctx, &sa, &sb, a.c, b.c)? {
            bad_masses.push(bm);
        }
    }
    for bm in &bad_masses {
        if let Some(j) = samples.iter().rposition(|s| s.c < bm.c) {
            samples[j].flag = SampleFlag::BadMassLeft;
        }
        if let Some(j) = samples.iter().position(|s| s.c > bm.c) {
            samples[j].flag = SampleFlag::BadMassRight;
        }
    }
    for j in 0..samples.len() {
        if samples[j].flag != SampleFlag::Ok {
            continue;
        }
        let spacing = {
            let l = if j > 0 { samples[j].c - samples[j - 1].c } else { f64::INFINITY };
            let r = if j + 1 < samples.len() { samples[j + 1].c - samples[j].c } else { f64::INFINITY };
            l.min(r)
        };
        let near = branches[samples[j].source.branch]
            .folds
            .iter()
            .any(|f| (f.q - samples[j].c).abs() < 0.5 * spacing);
        if near {
            samples[j].flag = SampleFlag::BadValueNear;
        }
    }

    let rows: Vec<Result<Option<DerivativeRow>>> = samples
        .par_iter()
        .map(|s| {
            let seg = segments.iter().find(|x| x.id == s.source).unwrap();
            derivative_row(&ctx, seg, s)
        })
        .collect();
    let derivative_table = rows
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    Ok(MassCurve {
        samples,
        segments,
        bad_values,
        bad_masses,
        derivative_table,
        dc: opts.dc,
    })
}

fn sample_at(ctx: &Ctx, segments: &[Segment], c: f64) -> Result<MassSample> {
    let mut found: Vec<(SourceId, Vec<f64>, f64, f64)> = Vec::new();
    for s in segments.iter().filter(|s| ctx.covers(s, c)) {
        match ctx.solve_on(s, c) {
            Ok((u, l)) => {
                let e = ctx.energy(&u);
                found.push((s.id, u, l, e));
            }
            Err(Error::UncoveredMass(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if found.is_empty() {
        return Err(Error::UncoveredMass(vec![c]));
    }
    let best = found
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .3.total_cmp(&b.1 .3).then(a.1 .0.cmp(&b.1 .0)))
        .map(|(i, _)| i)
        .unwrap();
    let e_best = found[best].3;
    let multi_valued = found
        .iter()
        .enumerate()
        .any(|(i, f)| i != best && (f.3 - e_best).abs() <= ctx.opts.tie_rtol * e_best.abs() && (f.2 - found[best].2).abs() > 1e-8);
    let candidates = found
        .iter()
        .map(|f| Candidate {
            source: f.0,
            lambda: f.2,
            energy: f.3,
        })
        .collect();
    let (source, u, lambda, m) = found.swap_remove(best);
    let profile = elliptic::newton_solve_with(ctx.m, ctx.g, lambda, &ctx.g.wrap(u)?, &ctx.opts.newton)?;
    let point = continuation::make_point(ctx.m, ctx.g, profile, ctx.opts.spectrum_k)?;
    Ok(MassSample {
        c,
        lambda,
        m,
        source,
        flag: SampleFlag::Ok,
        candidates,
        multi_valued,
        point,
    })
}

/// Equal-energy point of two segments between masses `a` and `b`.
fn maxwell_point(ctx: &Ctx, left: &Segment, right: &Segment, a: f64, b: f64) -> Result<Option<BadMass>> {
    let lo = a.max(left.q_min).max(right.q_min);
    let hi = b.min(left.q_max).min(right.q_max);
    if !(lo < hi) {
        return Ok(None);
    }
    let diff = |c: f64| -> Result<(f64, f64, f64, f64)> {
        let (el, ll) = ctx.m_on(left, c)?;
        let (er, lr) = ctx.m_on(right, c)?;
        Ok((el - er, el, ll, lr))
    };
    let (mut x0, mut x1) = (lo, hi);
    let (mut d0, ..) = diff(x0)?;
    let (d1, ..) = diff(x1)?;
    if d0.signum() == d1.signum() {
        return Ok(None);
    }
    let mut mid = 0.5 * (x0 + x1);
    let mut at = diff(mid)?;
    for _ in 0..200 {
        if at.0.abs() <= ctx.opts.tie_rtol * at.1.abs() || x1 - x0 <= 1e-14 * mid.abs() {
            break;
        }
        if at.0.signum() == d0.signum() {
            x0 = mid;
            d0 = at.0;
        } else {
            x1 = mid;
        }
        mid = 0.5 * (x0 + x1);
        at = diff(mid)?;
    }
    if at.0.abs() > ctx.opts.tie_rtol * at.1.abs() {
        return Ok(None);
    }
    let c = mid;
    let d = ctx.opts.dc_one_sided;
    let one_sided = |s: &Segment, sign: f64| -> Result<f64> {
        let (m0, _) = ctx.m_on(s, c)?;
        let (m1, _) = ctx.m_on(s, c + sign * d)?;
        let (m2, _) = ctx.m_on(s, c + 2.0 * sign * d)?;
        Ok(sign * (-3.0 * m0 + 4.0 * m1 - m2) / (2.0 * d))
    };
    Ok(Some(BadMass {
        c,
        lambda_left: at.2,
        lambda_right: at.3,
        energy_tie_gap: at.0.abs(),
        left: left.id,
        right: right.id,
        mprime_left: one_sided(left, -1.0)?,
        mprime_right: one_sided(right, 1.0)?,
    }))
}

fn derivative_row(ctx: &Ctx, seg: &Segment, s: &MassSample) -> Result<Option<DerivativeRow>> {
    let dc = ctx.opts.dc;
    if !(ctx.covers(seg, s.c - dc) && ctx.covers(seg, s.c + dc)) {
        return Ok(None);
    }
    let eval = |c: f64| ctx.m_on(seg, c);
    let (up, lp) = ctx.solve_on(seg, s.c + dc)?;
    let (um, lm) = ctx.solve_on(seg, s.c - dc)?;
    let (mp, mm) = (ctx.energy(&up), ctx.energy(&um));
    let quotient = ctx
        .g
        .weights()
        .iter()
        .zip(up.iter().zip(&um))
        .map(|(w, (a, b))| w * ((a - b) / (2.0 * dc)).powi(2))
        .sum::<f64>()
        .sqrt();
    let (mp2, _) = eval(s.c + 0.5 * dc)?;
    let (mm2, _) = eval(s.c - 0.5 * dc)?;
    Ok(Some(DerivativeRow {
        c: s.c,
        lambda: s.lambda,
        mprime_fd: (mp - mm) / (2.0 * dc),
        mprime_fd_half: (mp2 - mm2) / dc,
        msecond_fd: (mp - 2.0 * s.m + mm) / (dc * dc),
        lambda_prime_fd: (lp - lm) / (2.0 * dc),
        difference_quotient: quotient,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeReport {
    /// Worst `|m'_fd - λ(c)|`.
    pub mprime_mismatch: f64,
    /// Smallest observed ratio of the `m'` errors at `dc` and `dc/2`.
    pub mprime_order_ratio: f64,
    /// Worst `|m''_fd - λ'_fd|`.
    pub msecond_mismatch: f64,
    /// Largest sampled `m''_fd`, negative for a concave curve.
    pub msecond_max: f64,
    /// Worst `|m'_∓ - λ_{left/right}|` at bad masses.
    pub one_sided_mismatch: f64,
    /// Worst `|(m'_- - m'_+) - (λ_left - λ_right)|` at bad masses.
    pub jump_mismatch: f64,
    /// Largest difference quotient of the profiles away from bad masses.
    pub difference_quotient_max: f64,
    pub lambda_decreasing: bool,
    pub m_decreasing: bool,
    pub rows: usize,
}

pub fn derivative_checks(mc: &MassCurve) -> DerivativeReport {
    let mut rep = DerivativeReport {
        mprime_mismatch: 0.0,
        mprime_order_ratio: f64::INFINITY,
        msecond_mismatch: 0.0,
        msecond_max: f64::NEG_INFINITY,
        one_sided_mismatch: 0.0,
        jump_mismatch: 0.0,
        difference_quotient_max: 0.0,
        lambda_decreasing: lambda_strictly_decreasing(mc),
        m_decreasing: mc.samples.windows(2).all(|w| w[1].m < w[0].m),
        rows: mc.derivative_table.len(),
    };
    let between_bad = |c: f64| {
        mc.bad_masses
            .iter()
            .any(|b| (b.c - c).abs() < 2.0 * mc.dc)
    };
    for row in &mc.derivative_table {
        if between_bad(row.c) {
            continue;
        }
        let e1 = (row.mprime_fd - row.lambda).abs();
        let e2 = (row.mprime_fd_half - row.lambda).abs();
        rep.mprime_mismatch = rep.mprime_mismatch.max(e1);
        if e2 > 0.0 && e1 > 1e-11 {
            rep.mprime_order_ratio = rep.mprime_order_ratio.min(e1 / e2);
        }
        rep.msecond_mismatch = rep.msecond_mismatch.max((row.msecond_fd - row.lambda_prime_fd).abs());
        rep.msecond_max = rep.msecond_max.max(row.msecond_fd);
        rep.difference_quotient_max = rep.difference_quotient_max.max(row.difference_quotient);
    }
    for b in &mc.bad_masses {
        rep.one_sided_mismatch = rep
            .one_sided_mismatch
            .max((b.mprime_left - b.lambda_left).abs())
            .max((b.mprime_right - b.lambda_right).abs());
        let gap = b.mprime_left - b.mprime_right;
        rep.jump_mismatch = rep.jump_mismatch.max((gap - (b.lambda_left - b.lambda_right)).abs());
    }
    rep
}

/// `λ(c)` strictly decreasing between consecutive bad masses, and dropping across each.
pub fn lambda_strictly_decreasing(mc: &MassCurve) -> bool {
    mc.samples.windows(2).all(|w| w[1].lambda < w[0].lambda)
        && mc.bad_masses.iter().all(|b| b.lambda_right < b.lambda_left)
}

/// The positive `t` with `t·u` on the Nehari manifold of `Φ_λ = E - λQ`.
pub fn nehari_project(
    m: &ProblemModel,
    g: &RadialGrid,
    lambda: f64,
    u: &GridFunction,
) -> Result<(f64, GridFunction)> {
    g.check(u)?;
    let v = &u.values;
    let quad = g.dirichlet_form(v)
        + g.nodes()
            .iter()
            .zip(v)
            .zip(g.weights())
            .map(|((&r, &t), w)| w * (m.potential.value(r) - lambda) * t * t)
            .sum::<f64>();
    if !(quad > 0.0) {
        return Err(Error::NoProjection);
    }
    let gfun = |t: f64| -> (f64, f64) {
        let mut nl = 0.0;
        let mut dnl = 0.0;
        for ((&r, &x), w) in g.nodes().iter().zip(v).zip(g.weights()) {
            nl += w * m.f(r, t * x) * x;
            dnl += w * m.f_t(r, t * x) * x * x;
        }
        (t * quad - nl, quad - dnl)
    };
    let mut hi = 1.0;
    let mut lo = 0.0;
    let mut found = false;
    for _ in 0..200 {
        if gfun(hi).0 < 0.0 {
            found = true;
            break;
        }
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            break;
        }
    }
    if !found {
        return Err(Error::NoProjection);
    }
    // Shrink from below so the bracket isolates the first sign change.
    while lo == 0.0 || gfun(lo).0 <= 0.0 {
        let next = if lo == 0.0 { 0.5 * hi } else { 0.5 * lo };
        if gfun(next).0 > 0.0 {
            lo = next;
            break;
        }
        hi = next;
        lo = 0.0;
        if hi < 1e-300 {
            return Err(Error::NoProjection);
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (gv, dg) = gfun(t);
        if gv.abs() <= 1e-15 * quad * t {
            break;
        }
        if gv > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let newton = t - gv / dg;
        t = if dg != 0.0 && newton >= lo && newton <= hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * t {
            break;
        }
    }
    if !(gfun(t).1 < 0.0) {
        return Err(Error::NoProjection);
    }
    Ok((t, u.scaled(t)))
}

/// Exponents `(α, β)` of `T(c)u = c^α u(c^β ·)` for the power `p̄` in dimension `n`.
pub fn scaling_exponents(pbar: f64, n: usize) -> Result<(f64, f64)> {
    let d = (pbar - 2.0) * n as f64 - 4.0;
    if d.abs() < 1e-12 {
        return Err(Error::CriticalExponent);
    }
    Ok((2.0 / d, (pbar - 2.0) / d))
}

/// `T(c)u = c^α u(c^β ·)`; maps mass `c` to mass 1.
pub fn rescale_to_unit_mass(g: &RadialGrid, u: &GridFunction, c: f64, pbar: f64) -> Result<GridFunction> {
    g.check(u)?;
    let (alpha, beta) = scaling_exponents(pbar, g.dim())?;
    if c == 1.0 {
        return Ok(u.clone());
    }
    let amp = c.powf(alpha);
    let k = c.powf(beta);
    Ok(g.from_fn(|r| amp * u.eval_at(g, k * r)))
}

/// `ρ(c) = c^{p̄α - nβ}`.
pub fn energy_scale(c: f64, pbar: f64, n: usize) -> Result<f64> {
    let (alpha, beta) = scaling_exponents(pbar, n)?;
    Ok(c.powf(pbar * alpha - n as f64 * beta))
}

/// `E_c(v) = ½∫|∇v|² + ½c^{2β}∫V(c^β x)v² - c^{p̄α}∫F(c^β x, c^{-α}v)`,
/// so that `E_c(T(c)u) = ρ(c) E(u)`.
pub fn scaled_energy(m: &ProblemModel, g: &RadialGrid, v: &GridFunction, c: f64, pbar: f64) -> Result<f64> {
    g.check(v)?;
    let (alpha, beta) = scaling_exponents(pbar, g.dim())?;
    let k = c.powf(beta);
    let inv = c.powf(-alpha);
    let outer = c.powf(pbar * alpha);
    let mut pot = 0.0;
    let mut nl = 0.0;
    for ((&r, &x), w) in g.nodes().iter().zip(&v.values).zip(g.weights()) {
        pot += w * m.potential.value(k * r) * x * x;
        nl += w * m.big_f(k * r, inv * x);
    }
    Ok(0.5 * g.dirichlet_form(&v.values) + 0.5 * c.powf(2.0 * beta) * pot - outer * nl)
}

pub const MASSCURVE_CSV_HEADER: &str = "c,lambda,m,mprime_fd,msecond_fd,source_branch,flags";

pub fn format_masscurve_csv(mc: &MassCurve) -> String {
    use crate::fmt17;
    let mut s = String::from(MASSCURVE_CSV_HEADER);
    s.push('\n');
    for smp in &mc.samples {
        let row = mc.derivative_table.iter().find(|r| r.c == smp.c);
        let (mp, ms) = row.map_or((f64::NAN, f64::NAN), |r| (r.mprime_fd, r.msecond_fd));
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt17(smp.c),
            fmt17(smp.lambda),
            fmt17(smp.m),
            fmt17(mp),
            fmt17(ms),
            smp.source,
            smp.flag.as_str()
        ));
    }
    s.push_str(&format!("# bad_masses={}\n", mc.bad_masses.len()));
    for b in &mc.bad_masses {
        s.push_str(&format!(
            "# bad_mass c={} lambda_left={} lambda_right={} energy_gap={} mprime_left={} mprime_right={}\n",
            fmt17(b.c),
            fmt17(b.lambda_left),
            fmt17(b.lambda_right),
            fmt17(b.energy_tie_gap),
            fmt17(b.mprime_left),
            fmt17(b.mprime_right)
        ));
    }
    for v in &mc.bad_values {
        s.push_str(&format!("# bad_value c={} lambda={}\n", fmt17(v.c), fmt17(v.lambda)));
    }
    s
}

pub fn write_masscurve_csv(path: &Path, mc: &MassCurve) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(format_masscurve_csv(mc).as_bytes())?;
    Ok(())
}
