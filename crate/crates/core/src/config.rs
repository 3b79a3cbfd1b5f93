//! Run configuration.
//!
//! Grammar: `[section]` headers, `key = value` lines, `#` comments. The
//! `[term]` section may repeat; each occurrence adds one nonlinear term.
//!
//! ```text
//! [problem]
//! dim = 1
//! potential = zero          # zero | well | harmonic
//!
//! [term]
//! kind = power              # power | radial_gaussian | weighted
//! coefficient = 1.0
//! power = 4
//!
//! [grid]
//! R = 30
//! M = 6000
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::continuation::{ContinuationOptions, StepMode};
use crate::elliptic::NewtonOptions;
use crate::error::{Error, Result};
use crate::flow::{FlowOptions, DEFAULT_WIDTHS};
use crate::grid::RadialGrid;
use crate::mass_curve::MassCurveOptions;
use crate::model::{NonlinearTerm, Potential, ProblemModel, RadialProfile, TermKind};

pub const R_BOUNDS: (f64, f64) = (5.0, 200.0);
pub const M_BOUNDS: (usize, usize) = (256, 200_000);

#[derive(Debug, Clone, Default)]
struct Section {
    name: String,
    line: usize,
    entries: BTreeMap<String, String>,
}

impl Section {
    fn qualified(&self, key: &str) -> String {
        format!("{}.{}", self.name, key)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| Error::Config {
                key: self.qualified(key),
                message: format!("cannot parse `{v}`"),
            }),
        }
    }

    fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| Error::Config {
            key: self.qualified(key),
            message: format!("missing required key in [{}] (line {})", self.name, self.line),
        })
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| Error::Config {
                        key: self.qualified(key),
                        message: format!("cannot parse list entry `{}`", s.trim()),
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }
}

fn parse_sections(text: &str) -> Result<Vec<Section>> {
    let mut out: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| {
                Error::Parse(format!("line {}: unterminated section header", i + 1))
            })?;
            out.push(Section {
                name: name.trim().to_string(),
                line: i + 1,
                entries: BTreeMap::new(),
            });
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", i + 1)))?;
        let sec = out
            .last_mut()
            .ok_or_else(|| Error::Parse(format!("line {}: entry before any section", i + 1)))?;
        if sec.entries.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(Error::Config {
                key: sec.qualified(k.trim()),
                message: format!("duplicate key on line {}", i + 1),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub radius: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverSpec {
    pub tol: f64,
    pub max_iter: usize,
    pub margin_rtol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuationSpec {
    pub lambda_start: f64,
    pub lambda_end: f64,
    pub ds_init: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_steps: usize,
    pub mode: StepMode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassCurveSpec {
    pub c_values: Vec<f64>,
    pub dc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSpec {
    pub dt: f64,
    pub tol: f64,
    pub max_steps: usize,
    pub seeds: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSpec {
    pub directory: PathBuf,
    pub name: String,
    pub formats: Vec<OutputFormat>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub problem: ProblemModel,
    pub grid: GridSpec,
    pub solver: SolverSpec,
    pub continuation: ContinuationSpec,
    pub masscurve: MassCurveSpec,
    pub flow: FlowSpec,
    pub output: OutputSpec,
}

const KNOWN: &[(&str, &[&str])] = &[
    ("problem", &["dim", "potential", "well_depth", "well_width"]),
    ("term", &["kind", "coefficient", "power", "amplitude", "width", "theta"]),
    ("grid", &["R", "M"]),
    ("solver", &["tol", "max_iter", "margin_rtol"]),
    (
        "continuation",
        &["lambda_start", "lambda_end", "ds_init", "ds_min", "ds_max", "max_steps", "mode"],
    ),
    ("masscurve", &["c_min", "c_max", "c_count", "c_values", "dc"]),
    ("flow", &["dt", "tol", "max_steps", "seeds"]),
    ("output", &["directory", "name", "formats"]),
];

fn parse_term(s: &Section) -> Result<NonlinearTerm> {
    let power: f64 = s.require("power")?;
    let coefficient: f64 = s.or("coefficient", 1.0)?;
    let kind = match s.raw("kind").unwrap_or("power") {
        "power" => TermKind::ConstantPower,
        "radial_gaussian" => TermKind::RadialCoefficientPower(RadialProfile::GaussianBump {
            amplitude: s.require("amplitude")?,
            width: s.require("width")?,
        }),
        "weighted" => TermKind::WeightedPower {
            theta: s.require("theta")?,
        },
        other => {
            return Err(Error::Config {
                key: s.qualified("kind"),
                message: format!("unknown term kind `{other}`"),
            })
        }
    };
    NonlinearTerm::new(kind, coefficient, power).map_err(|e| Error::Config {
        key: s.qualified("power"),
        message: e.to_string(),
    })
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config {
            key: key.into(),
            message: format!("must be positive, got {v}"),
        })
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let sections = parse_sections(text)?;
        for s in &sections {
            let known = KNOWN
                .iter()
                .find(|(n, _)| *n == s.name)
                .ok_or_else(|| Error::Config {
                    key: s.name.clone(),
                    message: format!("unknown section on line {}", s.line),
                })?;
            if s.name != "term" && sections.iter().filter(|t| t.name == s.name).count() > 1 {
                return Err(Error::Config {
                    key: s.name.clone(),
                    message: "section may appear only once".into(),
                });
            }
            if let Some(k) = s.entries.keys().find(|k| !known.1.contains(&k.as_str())) {
                return Err(Error::Config {
                    key: s.qualified(k),
                    message: "unknown key".into(),
                });
            }
        }
        let empty = |name: &str| Section {
            name: name.into(),
            ..Section::default()
        };
        let find = |name: &str| {
            sections
                .iter()
                .find(|s| s.name == name)
                .cloned()
                .unwrap_or_else(|| empty(name))
        };

        let problem = find("problem");
        let dim: usize = problem.require("dim")?;
        let potential = match problem.raw("potential").unwrap_or("zero") {
            "zero" => Potential::Zero,
            "well" => Potential::BoundedWell {
                depth: positive("problem.well_depth", problem.require("well_depth")?)?,
                width: positive("problem.well_width", problem.require("well_width")?)?,
            },
            "harmonic" => Potential::Harmonic,
            other => {
                return Err(Error::Config {
                    key: "problem.potential".into(),
                    message: format!("unknown potential `{other}`"),
                })
            }
        };
        let terms = sections
            .iter()
            .filter(|s| s.name == "term")
            .map(parse_term)
            .collect::<Result<Vec<_>>>()?;
        if terms.is_empty() {
            return Err(Error::Config {
                key: "term.power".into(),
                message: "at least one [term] section is required".into(),
            });
        }
        let problem = ProblemModel::new(dim, terms, potential).map_err(|e| Error::Config {
            key: "problem.dim".into(),
            message: e.to_string(),
        })?;

        let grid = find("grid");
        let grid = GridSpec {
            radius: grid.require("R")?,
            points: grid.require("M")?,
        };
        if !(grid.radius >= R_BOUNDS.0 && grid.radius <= R_BOUNDS.1) {
            return Err(Error::Config {
                key: "grid.R".into(),
                message: format!("must lie in [{}, {}]", R_BOUNDS.0, R_BOUNDS.1),
            });
        }
        if !(grid.points >= M_BOUNDS.0 && grid.points <= M_BOUNDS.1) {
            return Err(Error::Config {
                key: "grid.M".into(),
                message: format!("must lie in [{}, {}]", M_BOUNDS.0, M_BOUNDS.1),
            });
        }

        let solver = find("solver");
        let nd = NewtonOptions::default();
        let solver = SolverSpec {
            tol: positive("solver.tol", solver.or("tol", nd.tol)?)?,
            max_iter: solver.or("max_iter", nd.max_iter)?,
            margin_rtol: positive("solver.margin_rtol", solver.or("margin_rtol", nd.margin_rtol)?)?,
        };

        let cont = find("continuation");
        let cd = ContinuationOptions::default();
        let mode = match cont.raw("mode").unwrap_or("arclength") {
            "arclength" => StepMode::PseudoArclength,
            "natural" => StepMode::Natural,
            other => {
                return Err(Error::Config {
                    key: "continuation.mode".into(),
                    message: format!("unknown mode `{other}`"),
                })
            }
        };
        let continuation = ContinuationSpec {
            lambda_start: cont.or("lambda_start", -0.25)?,
            lambda_end: cont.or("lambda_end", -4.0)?,
            ds_init: positive("continuation.ds_init", cont.or("ds_init", cd.ds_init)?)?,
            ds_min: positive("continuation.ds_min", cont.or("ds_min", cd.ds_min)?)?,
            ds_max: positive("continuation.ds_max", cont.or("ds_max", cd.ds_max)?)?,
            max_steps: cont.or("max_steps", cd.max_steps)?,
            mode,
        };
        if !(continuation.lambda_end < continuation.lambda_start && continuation.lambda_start < 0.0)
        {
            return Err(Error::Config {
                key: "continuation.lambda_start".into(),
                message: "require lambda_end < lambda_start < 0".into(),
            });
        }
        if !(continuation.ds_min <= continuation.ds_init && continuation.ds_init <= continuation.ds_max)
        {
            return Err(Error::Config {
                key: "continuation.ds_init".into(),
                message: "require ds_min <= ds_init <= ds_max".into(),
            });
        }

        let mc = find("masscurve");
        let c_values = match mc.list("c_values")? {
            Some(v) => v,
            None => {
                let lo: f64 = mc.or("c_min", 0.5)?;
                let hi: f64 = mc.or("c_max", 4.0)?;
                let n: usize = mc.or("c_count", 8)?;
                if n < 2 || !(lo < hi) {
                    return Err(Error::Config {
                        key: "masscurve.c_count".into(),
                        message: "require c_count >= 2 and c_min < c_max".into(),
                    });
                }
                (0..n)
                    .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                    .collect()
            }
        };
        for &c in &c_values {
            positive("masscurve.c_values", c)?;
        }
        let masscurve = MassCurveSpec {
            c_values,
            dc: positive("masscurve.dc", mc.or("dc", MassCurveOptions::default().dc)?)?,
        };

        let fl = find("flow");
        let fd = FlowOptions::default();
        let flow = FlowSpec {
            dt: positive("flow.dt", fl.or("dt", fd.dt)?)?,
            tol: positive("flow.tol", fl.or("tol", fd.tol)?)?,
            max_steps: fl.or("max_steps", fd.max_steps)?,
            seeds: fl.list("seeds")?.unwrap_or_else(|| DEFAULT_WIDTHS.to_vec()),
        };
        for &w in &flow.seeds {
            positive("flow.seeds", w)?;
        }

        let out = find("output");
        let formats = out
            .raw("formats")
            .unwrap_or("csv")
            .split(',')
            .map(|f| match f.trim() {
                "csv" => Ok(OutputFormat::Csv),
                "json" => Ok(OutputFormat::Json),
                other => Err(Error::Config {
                    key: "output.formats".into(),
                    message: format!("unknown format `{other}`"),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        let output = OutputSpec {
            directory: PathBuf::from(out.raw("directory").unwrap_or("out")),
            name: out.raw("name").unwrap_or("run").to_string(),
            formats,
        };

        Ok(Self {
            problem,
            grid,
            solver,
            continuation,
            masscurve,
            flow,
            output,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            key: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.problem.dim, self.grid.radius, self.grid.points)
    }

    pub fn newton(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            margin_rtol: self.solver.margin_rtol,
            ..NewtonOptions::default()
        }
    }

    pub fn continuation_options(&self) -> ContinuationOptions {
        let c = &self.continuation;
        ContinuationOptions {
            ds_init: c.ds_init,
            ds_min: c.ds_min,
            ds_max: c.ds_max,
            max_steps: c.max_steps,
            mode: c.mode,
            newton: self.newton(),
            ..ContinuationOptions::default()
        }
    }

    pub fn lambda_range(&self) -> (f64, f64) {
        (self.continuation.lambda_end, self.continuation.lambda_start)
    }

    pub fn masscurve_options(&self) -> MassCurveOptions {
        MassCurveOptions {
            newton: self.newton(),
            dc: self.masscurve.dc,
            ..MassCurveOptions::default()
        }
    }

    pub fn flow_options(&self) -> FlowOptions {
        FlowOptions {
            dt: self.flow.dt,
            tol: self.flow.tol,
            max_steps: self.flow.max_steps,
            ..FlowOptions::default()
        }
    }

    pub fn wants(&self, f: OutputFormat) -> bool {
        self.output.formats.contains(&f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBIC: &str = "
[problem]
dim = 1

[term]
power = 4   # cubic

[grid]
R = 30
M = 6000
";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::parse(CUBIC).unwrap();
        assert_eq!(c.problem.single_power(), Some((1.0, 4.0)));
        assert_eq!(c.grid.points, 6000);
        assert_eq!(c.solver.tol, NewtonOptions::default().tol);
        assert_eq!(c.flow.seeds, DEFAULT_WIDTHS.to_vec());
        assert_eq!(c.masscurve.c_values.len(), 8);
        assert_eq!(c.lambda_range(), (-4.0, -0.25));
        assert_eq!(c.output.formats, vec![OutputFormat::Csv]);
    }

    #[test]
    fn repeated_terms_and_lists() {
        let text = format!(
            "{CUBIC}\n[term]\ncoefficient = -1.5\npower = 5\n[masscurve]\nc_values = 1, 2.5 ,3\n[output]\nformats = csv, json\n"
        );
        let c = RunConfig::parse(&text).unwrap();
        assert_eq!(c.problem.terms.len(), 2);
        assert_eq!(c.masscurve.c_values, vec![1.0, 2.5, 3.0]);
        assert!(c.wants(OutputFormat::Json));
    }

    fn key_of(text: &str) -> String {
        match RunConfig::parse(text).unwrap_err() {
            Error::Config { key, .. } => key,
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn errors_name_the_key() {
        assert_eq!(key_of(&CUBIC.replace("power = 4", "coefficient = 2")), "term.power");
        assert_eq!(key_of(&CUBIC.replace("M = 6000", "M = 100")), "grid.M");
        assert_eq!(key_of(&CUBIC.replace("R = 30", "R = 500")), "grid.R");
        assert_eq!(key_of(&format!("{CUBIC}[solver]\ntol = -1\n")), "solver.tol");
        assert_eq!(key_of(&format!("{CUBIC}[solver]\nfoo = 1\n")), "solver.foo");
        assert_eq!(key_of(&CUBIC.replace("dim = 1", "")), "problem.dim");
        assert_eq!(
            key_of(&format!("{CUBIC}[continuation]\nlambda_start = 0.5\n")),
            "continuation.lambda_start"
        );
        assert!(matches!(RunConfig::parse("x = 1"), Err(Error::Parse(_))));
    }
}
