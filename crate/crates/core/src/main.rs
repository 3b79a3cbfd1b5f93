#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use gss_atlas::config::{OutputFormat, RunConfig};
use gss_atlas::continuation::{self, Branch};
use gss_atlas::elliptic::{self, DecayStatus, Profile};
use gss_atlas::flow;
use gss_atlas::mass_curve::{self, MassCurve};
use gss_atlas::model;
use gss_atlas::{fmt17, Error, RadialGrid};

#[derive(Parser)]
#[command(name = "gss-atlas", version, about = "Normalized ground states of radial NLS-type equations")]
struct Cli {
    /// Worker threads for the parallel stages.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Also write a JSON mirror of every CSV.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Solve Eq_λ(u) = 0 at one λ and certify the profile.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long)]
        seed: Option<PathBuf>,
    },
    /// Trace the branch through a seed solution.
    Continue {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: PathBuf,
    },
    /// Build the mass curve from the seeds stored in a directory.
    Masscurve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        branches: PathBuf,
    },
    /// Normalized gradient flow at fixed mass.
    Flow {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mass: f64,
    },
    /// Run the invariant and closed-form checks.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        all: bool,
    },
}

enum Failure {
    Usage(String),
    Unconverged(String),
    Uncertified(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Unconverged(_) => 3,
            Failure::Uncertified(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(s) | Failure::Unconverged(s) | Failure::Uncertified(s) => s,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let s = e.to_string();
        match e {
            Error::Config { .. }
            | Error::Parse(_)
            | Error::GridMismatch(_)
            | Error::InvalidModel(_)
            | Error::WrongModelKind
            | Error::SeedNotConverged(_)
            | Error::CriticalExponent
            | Error::Io(_) => Failure::Usage(s),
            _ => Failure::Unconverged(s),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

struct Ctx {
    cfg: RunConfig,
    grid: RadialGrid,
    out: PathBuf,
    json: bool,
}

impl Ctx {
    fn load(path: &Path, format: Option<Format>) -> std::result::Result<Self, Failure> {
        let cfg = RunConfig::load(path)?;
        let grid = cfg.grid()?;
        let out = std::env::var_os("GSS_ATLAS_OUT")
            .map(PathBuf::from)
            .unwrap_or_else(|| cfg.output.directory.clone());
        std::fs::create_dir_all(&out).map_err(|e| Failure::Usage(format!("{}: {e}", out.display())))?;
        let json = matches!(format, Some(Format::Json)) || cfg.wants(OutputFormat::Json);
        Ok(Self { cfg, grid, out, json })
    }

    fn path(&self, suffix: &str) -> PathBuf {
        self.out.join(format!("{}.{suffix}", self.cfg.output.name))
    }

    fn write(&self, suffix: &str, text: &str) -> Outcome {
        let p = self.path(suffix);
        std::fs::write(&p, text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
        println!("wrote {}", p.display());
        Ok(())
    }

    fn write_csv(&self, suffix: &str, csv: &str) -> Outcome {
        self.write(&format!("{suffix}.csv"), csv)?;
        if self.json {
            let v = csv_to_json(csv);
            self.write(&format!("{suffix}.json"), &pretty(&v))?;
        }
        Ok(())
    }

    fn solve_seed(&self, path: &Path) -> std::result::Result<Profile, Failure> {
        let file = elliptic::read_solution(path)?;
        let u0 = file.on_grid(&self.grid)?;
        Ok(elliptic::newton_solve_with(
            &self.cfg.problem,
            &self.grid,
            file.lambda,
            &u0,
            &self.cfg.newton(),
        )?)
    }

    fn trace(&self, seed: &Profile) -> std::result::Result<Branch, Failure> {
        let b = continuation::continue_branch(
            &self.cfg.problem,
            &self.grid,
            seed,
            self.cfg.lambda_range(),
            &self.cfg.continuation_options(),
        )?;
        for t in [&b.termination.0, &b.termination.1] {
            if let continuation::Termination::CertificateFailure { lambda, reason } = t {
                eprintln!("branch stopped at lambda = {lambda}: {reason}");
            }
        }
        Ok(b)
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

/// Header row becomes the object keys; `#` lines are kept as notes.
fn csv_to_json(csv: &str) -> Value {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for line in lines {
        if let Some(note) = line.strip_prefix('#') {
            notes.push(Value::String(note.trim().to_string()));
            continue;
        }
        let obj: serde_json::Map<String, Value> = header
            .iter()
            .zip(line.split(','))
            .map(|(k, v)| {
                let val = v
                    .parse::<f64>()
                    .ok()
                    .and_then(|x| serde_json::Number::from_f64(x).map(Value::Number))
                    .unwrap_or_else(|| Value::String(v.to_string()));
                (k.to_string(), val)
            })
            .collect();
        rows.push(Value::Object(obj));
    }
    json!({ "rows": rows, "notes": notes })
}

fn certificate_json(p: &Profile, g: &RadialGrid) -> Value {
    let c = &p.certificate;
    json!({
        "lambda": fmt17(p.lambda),
        "Q": fmt17(model::mass(g, &p.u).unwrap_or(f64::NAN)),
        "residual": fmt17(p.residual_norm),
        "iterations": p.iterations,
        "certified": c.is_certified(),
        "failure": c.failure(),
        "positive": c.positive,
        "radially_decreasing": c.radially_decreasing,
        "morse_index": c.morse_index,
        "nondegeneracy_margin": fmt17(c.nondegeneracy_margin),
        "margin_floor": fmt17(c.margin_floor),
        "slope": fmt17(c.slope),
        "decay_rate_fit": c.decay_rate_fit.map(fmt17),
        "decay_expected": fmt17((-p.lambda).sqrt()),
        "decay_status": format!("{:?}", c.decay_status),
        "pohozaev": fmt17(c.pohozaev),
    })
}

fn solve(ctx: &Ctx, lambda: f64, seed: Option<&Path>) -> Outcome {
    if !(lambda < 0.0) {
        return Err(Failure::Usage(format!("lambda must be negative, got {lambda}")));
    }
    let m = &ctx.cfg.problem;
    let lambda0 = model::lambda0(m, &ctx.grid)?;
    if !(lambda < lambda0.min(0.0)) {
        return Err(Failure::Usage(format!(
            "lambda = {lambda} is not below the spectral bottom {lambda0}"
        )));
    }
    let p = match seed {
        Some(path) => {
            let file = elliptic::read_solution(path)?;
            let u0 = file.on_grid(&ctx.grid)?;
            elliptic::newton_solve_with(m, &ctx.grid, lambda, &u0, &ctx.cfg.newton())?
        }
        None => elliptic::solve_without_seed(m, &ctx.grid, lambda, &ctx.cfg.newton())?,
    };
    ctx.write("sol", &elliptic::format_solution(&ctx.grid, lambda, &p.u)?)?;
    let cert = certificate_json(&p, &ctx.grid);
    println!("Q = {}  residual = {:.3e}", cert["Q"].as_str().unwrap_or(""), p.residual_norm);
    ctx.write("certificate.json", &pretty(&cert))?;
    match p.certificate.failure() {
        None => Ok(()),
        Some(reason) => Err(Failure::Uncertified(reason)),
    }
}

fn continue_cmd(ctx: &Ctx, seed: &Path) -> Outcome {
    let p = ctx.solve_seed(seed)?;
    let b = ctx.trace(&p)?;
    ctx.write("seed.sol", &elliptic::format_solution(&ctx.grid, p.lambda, &p.u)?)?;
    ctx.write_csv("branch", &continuation::format_branch_csv(&b))?;
    println!("{} points, {} folds", b.points.len(), b.folds.len());
    for f in &b.folds {
        println!("fold lambda = {} Q = {}", fmt17(f.lambda), fmt17(f.q));
    }
    Ok(())
}

fn seeds_in(dir: &Path) -> std::result::Result<Vec<PathBuf>, Failure> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".seed.sol"))
        .collect();
    v.sort();
    if v.is_empty() {
        return Err(Failure::Usage(format!("no *.seed.sol files in {}", dir.display())));
    }
    Ok(v)
}

fn mass_curve_of(ctx: &Ctx, dir: &Path) -> std::result::Result<MassCurve, Failure> {
    let seeds = seeds_in(dir)?
        .iter()
        .map(|s| ctx.solve_seed(s))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let branches = continuation::continue_branches(
        &ctx.cfg.problem,
        &ctx.grid,
        &seeds,
        ctx.cfg.lambda_range(),
        &ctx.cfg.continuation_options(),
    )
    .into_iter()
    .collect::<gss_atlas::Result<Vec<_>>>()?;
    Ok(mass_curve::build_mass_curve(
        &ctx.cfg.problem,
        &ctx.grid,
        &branches,
        &ctx.cfg.masscurve.c_values,
        &ctx.cfg.masscurve_options(),
    )?)
}

fn masscurve_cmd(ctx: &Ctx, dir: &Path) -> Outcome {
    let mc = mass_curve_of(ctx, dir)?;
    ctx.write_csv("masscurve", &mass_curve::format_masscurve_csv(&mc))?;
    println!("bad masses: {}", mc.bad_masses.len());
    for b in &mc.bad_masses {
        println!(
            "bad mass c = {} lambda_left = {} lambda_right = {}",
            fmt17(b.c),
            fmt17(b.lambda_left),
            fmt17(b.lambda_right)
        );
    }
    println!("bad values: {}", mc.bad_values.len());
    Ok(())
}

fn flow_cmd(ctx: &Ctx, c: f64) -> Outcome {
    if !(c > 0.0) {
        return Err(Failure::Usage(format!("mass must be positive, got {c}")));
    }
    let ms = flow::multi_start(
        &ctx.cfg.problem,
        &ctx.grid,
        c,
        &ctx.cfg.flow.seeds,
        &ctx.cfg.flow_options(),
    )?;
    let best = ms.best();
    println!(
        "starts: Gaussian widths {:?} (deterministic), selected width {}",
        ms.widths, ms.widths[ms.best]
    );
    println!(
        "m = {}  lambda = {}  steps = {}",
        fmt17(best.m_estimate),
        fmt17(best.profile.lambda),
        best.iterations
    );
    ctx.write(
        "flow.sol",
        &elliptic::format_solution(&ctx.grid, best.profile.lambda, &best.profile.u)?,
    )?;
    ctx.write_csv("flow_history", &flow::format_history_csv(best))?;
    if !best.is_converged() {
        return Err(Failure::Unconverged(format!(
            "flow stopped after {} steps at residual {:.3e}",
            best.iterations,
            best.residual_history.last().unwrap_or(&f64::NAN)
        )));
    }
    match best.profile.certificate.failure() {
        None => Ok(()),
        Some(r) => Err(Failure::Uncertified(r)),
    }
}

struct Check {
    name: String,
    value: f64,
    bound: f64,
    pass: bool,
}

fn check(name: &str, value: f64, bound: f64) -> Check {
    Check {
        name: name.into(),
        value,
        bound,
        pass: value <= bound,
    }
}

fn verify_cmd(ctx: &Ctx, all: bool) -> Outcome {
    let m = &ctx.cfg.problem;
    let g = &ctx.grid;
    let newton = ctx.cfg.newton();
    let (lo, hi) = ctx.cfg.lambda_range();
    let mid = 0.5 * (lo + hi);
    let mut checks = Vec::new();
    let p = elliptic::solve_without_seed(m, g, mid, &newton)?;
    let cert = &p.certificate;
    checks.push(check("certificate (0 = certified)", cert.failure().map_or(0.0, |_| 1.0), 0.0));
    let mut notes = Vec::new();
    let k_max = 22.0 / (0.8 * g.radius());
    let lambda_d = (-k_max * k_max).clamp(lo, hi);
    let pd = if lambda_d == mid {
        p.clone()
    } else {
        elliptic::solve_without_seed(m, g, lambda_d, &newton)?
    };
    match pd.certificate.decay_status {
        DecayStatus::Fitted => {
            let k = (-lambda_d).sqrt();
            let fit = pd.certificate.decay_rate_fit.unwrap_or(f64::NAN);
            checks.push(check(&format!("decay rate relative error at lambda = {lambda_d}"), (fit - k).abs() / k, 0.02));
        }
        s => notes.push(format!("NOTE decay at lambda = {lambda_d}: {s:?}, enlarge R to resolve the tail")),
    }
    let coarse = RadialGrid::new(g.dim(), g.radius(), g.points() / 2)?;
    let pc = elliptic::newton_solve_with(m, &coarse, mid, &p.u.resample(g, &coarse), &newton)?;
    let ratio = pc.certificate.pohozaev.abs() / cert.pohozaev.abs();
    println!("pohozaev residual {:.3e} (M/2: {:.3e}, ratio {ratio:.3})", cert.pohozaev, pc.certificate.pohozaev);
    checks.push(check("pohozaev second-order ratio deviation", (ratio - 4.0).abs(), 1.0));

    let cubic_1d = g.dim() == 1 && m.single_power() == Some((1.0, 4.0)) && m.potential.is_zero();
    let pt = continuation::make_point(m, g, p.clone(), 2)?;
    let (dq, de) = continuation::centered_derivatives(m, g, &pt, 1e-3, &newton)?;
    checks.push(check("slope identity |<L^-1u,u> - dQ/dlambda|", (pt.slope - dq).abs(), 1e-4 * dq.abs().max(1.0)));
    checks.push(check("energy identity |E' - lambda Q'|", (de - mid * dq).abs(), 1e-4));
    checks.push(check("adjoint residual", pt.spectrum.adjoint_residual, 1e-9));
    if cubic_1d {
        checks.push(check("slope vs -1/sqrt(-lambda)", (pt.slope + 1.0 / (-mid).sqrt()).abs(), 1e-4));
    }
    let (t, _) = mass_curve::nehari_project(m, g, mid, &p.u)?;
    checks.push(check("nehari |t - 1|", (t - 1.0).abs(), 1e-8));

    if all {
        let b = ctx.trace(&p)?;
        let ids = continuation::branch_identities(&b)?;
        checks.push(check("branch adjoint residual", ids.adjoint_residual, 1e-9));
        let stride = (b.points.len() / 10).max(1);
        let (mut slope_err, mut energy_err) = (0.0f64, 0.0f64);
        for q in b.points.iter().step_by(stride) {
            let h = 1e-3 * q.lambda.abs().min(1.0);
            let (dq1, de1) = continuation::centered_derivatives(m, g, q, h, &newton)?;
            let (dq2, de2) = continuation::centered_derivatives(m, g, q, 0.5 * h, &newton)?;
            let dq = (4.0 * dq2 - dq1) / 3.0;
            let de = (4.0 * de2 - de1) / 3.0;
            slope_err = slope_err.max((q.slope - dq).abs() / dq.abs().max(1.0));
            energy_err = energy_err.max((de - q.lambda * dq).abs());
        }
        checks.push(check("branch slope identity (extrapolated centered differences)", slope_err, 1e-4));
        checks.push(check("branch energy identity (extrapolated centered differences)", energy_err, 1e-4));
        let fitted: Vec<f64> = b
            .points
            .iter()
            .filter_map(|q| {
                let k = (-q.lambda).sqrt();
                q.profile.certificate.decay_rate_fit.map(|f| (f - k).abs() / k)
            })
            .collect();
        if !fitted.is_empty() {
            checks.push(check("branch decay rate relative error", fitted.iter().cloned().fold(0.0, f64::max), 0.02));
        }
        if fitted.len() < b.points.len() {
            notes.push(format!("NOTE decay: {} branch point(s) with unresolved tails", b.points.len() - fitted.len()));
        }
        let mc = mass_curve::build_mass_curve(m, g, &[b], &ctx.cfg.masscurve.c_values, &ctx.cfg.masscurve_options())?;
        let rep = mass_curve::derivative_checks(&mc);
        if cubic_1d || rep.mprime_mismatch <= 1e-5 {
            checks.push(check("|m'_fd - lambda|", rep.mprime_mismatch, 1e-5));
        } else {
            checks.push(check("|m'_fd - lambda| order ratio deviation from 4", (rep.mprime_order_ratio - 4.0).abs(), 1.0));
        }
        checks.push(check("|m''_fd - lambda'|", rep.msecond_mismatch, 1e-3));
        notes.push(format!(
            "NOTE difference quotient max ||(u_(c+dc) - u_(c-dc))/(2dc)|| = {:.6e} (diagnostic)",
            rep.difference_quotient_max
        ));
        checks.push(check("max m''_fd (must be < 0)", rep.msecond_max, -f64::MIN_POSITIVE));
        checks.push(check("lambda(c) strictly decreasing (0 = yes)", if rep.lambda_decreasing { 0.0 } else { 1.0 }, 0.0));
        let uncert = mc.samples.iter().filter(|s| !s.point.profile.certificate.is_certified()).count();
        checks.push(check("uncertified selected profiles", uncert as f64, 0.0));
        if cubic_1d {
            let lam = mc.samples.iter().map(|s| (s.lambda + s.c * s.c / 4.0).abs() / (s.c * s.c / 4.0)).fold(0.0, f64::max);
            let mm = mc.samples.iter().map(|s| (s.m + s.c.powi(3) / 12.0).abs() / (s.c.powi(3) / 12.0)).fold(0.0, f64::max);
            checks.push(check("lambda(c) = -c^2/4 relative error", lam, 1e-4));
            checks.push(check("m(c) = -c^3/12 relative error", mm, 1e-4));
        }
        if let Some(s) = mc.samples.get(mc.samples.len() / 2) {
            let ms = flow::multi_start(m, g, s.c, &ctx.cfg.flow.seeds, &ctx.cfg.flow_options())?;
            let best = ms.best();
            let diff: Vec<f64> = best.profile.u.values.iter().zip(&s.point.profile.u.values).map(|(a, b)| a - b).collect();
            let d = g.wrap(diff)?;
            let l2 = g.inner(&d, &d)?.sqrt();
            checks.push(check("flow vs mass curve weighted L2", l2, 1e-3));
            checks.push(check("flow vs mass curve |dlambda|", (best.profile.lambda - s.lambda).abs(), 1e-3));
        }
    }

    let mut report = String::new();
    for c in &checks {
        report.push_str(&format!(
            "{} {}: {} (bound {})\n",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            fmt17(c.value),
            fmt17(c.bound)
        ));
    }
    for n in &notes {
        report.push_str(n);
        report.push('\n');
    }
    print!("{report}");
    ctx.write("verify.txt", &report)?;
    if ctx.json {
        let v: Vec<Value> = checks
            .iter()
            .map(|c| json!({"check": c.name, "value": c.value, "bound": c.bound, "pass": c.pass}))
            .collect();
        ctx.write("verify.json", &pretty(&Value::Array(v)))?;
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Uncertified(format!("{failed} check(s) failed")))
    }
}

fn run(cli: Cli) -> Outcome {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.max(1))
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    match &cli.command {
        Command::Solve { config, lambda, seed } => {
            solve(&Ctx::load(config, cli.format)?, *lambda, seed.as_deref())
        }
        Command::Continue { config, seed } => continue_cmd(&Ctx::load(config, cli.format)?, seed),
        Command::Masscurve { config, branches } => {
            masscurve_cmd(&Ctx::load(config, cli.format)?, branches)
        }
        Command::Flow { config, mass } => flow_cmd(&Ctx::load(config, cli.format)?, *mass),
        Command::Verify { config, all } => verify_cmd(&Ctx::load(config, cli.format)?, *all),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
