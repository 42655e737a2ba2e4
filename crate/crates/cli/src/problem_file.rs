//! Loading of TOML problem files.

use std::collections::BTreeMap;
use std::path::Path;

use ccop_core::numkern::ToleranceError;
use ccop_core::{ModelError, Problem, RegularizedProblem, Tolerances};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed problem file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tolerance(#[from] ToleranceError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    problem: RawProblem,
    regularization: Option<RawRegularization>,
    #[serde(default)]
    points: BTreeMap<String, RawPoint>,
    #[serde(default)]
    tolerances: RawTolerances,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    n: usize,
    s: usize,
    f: String,
    #[serde(default)]
    h: Vec<String>,
    #[serde(default)]
    g: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegularization {
    c: Vec<f64>,
    eps: f64,
    #[serde(default, rename = "override")]
    override_flag: bool,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawPoint {
    Flat(Vec<f64>),
    Pair { x: Vec<f64>, y: Vec<f64> },
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTolerances {
    pub tol_feas: Option<f64>,
    pub tol_act: Option<f64>,
    pub tol_rank: Option<f64>,
    pub tol_strict: Option<f64>,
}

impl RawTolerances {
    /// Fill unset fields from `other`.
    pub fn or(self, other: &RawTolerances) -> RawTolerances {
        RawTolerances {
            tol_feas: self.tol_feas.or(other.tol_feas),
            tol_act: self.tol_act.or(other.tol_act),
            tol_rank: self.tol_rank.or(other.tol_rank),
            tol_strict: self.tol_strict.or(other.tol_strict),
        }
    }

    fn resolve(&self) -> Result<Tolerances, ToleranceError> {
        let d = Tolerances::default();
        let t = Tolerances {
            tol_feas: self.tol_feas.unwrap_or(d.tol_feas),
            tol_act: self.tol_act.unwrap_or(d.tol_act),
            tol_rank: self.tol_rank.unwrap_or(d.tol_rank),
            tol_strict: self.tol_strict.unwrap_or(d.tol_strict),
        };
        t.validate()?;
        Ok(t)
    }
}

/// A named point: `x`, optionally with a `y` for the regularized problem.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedPoint {
    pub x: Vec<f64>,
    pub y: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct ProblemFile {
    pub problem: Problem,
    pub regularization: Option<RegularizedProblem>,
    pub points: BTreeMap<String, NamedPoint>,
    pub tolerances: Tolerances,
}

/// Command-line settings that take precedence over the file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub tolerances: RawTolerances,
    pub admissibility: bool,
}

impl ProblemFile {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<ProblemFile, InputError> {
        let text = std::fs::read_to_string(path).map_err(|source| InputError::Io {
            path: path.display().to_string(),
            source,
        })?;
        ProblemFile::from_str(&text, overrides)
    }

    pub fn from_str(text: &str, overrides: &Overrides) -> Result<ProblemFile, InputError> {
        let raw: RawFile = toml::from_str(text)?;
        let tolerances = overrides.tolerances.or(&raw.tolerances).resolve()?;

        let p = raw.problem;
        let h: Vec<&str> = p.h.iter().map(String::as_str).collect();
        let g: Vec<&str> = p.g.iter().map(String::as_str).collect();
        let problem = Problem::parse(p.n, p.s, &p.f, &h, &g)?;
        let n = problem.n();

        let regularization = raw
            .regularization
            .map(|r| {
                RegularizedProblem::new(problem.clone(), r.c, r.eps, &tolerances)
                    .map(|rp| rp.with_override(r.override_flag || overrides.admissibility))
            })
            .transpose()?;

        let mut points = BTreeMap::new();
        for (name, raw_point) in raw.points {
            let point = match raw_point {
                RawPoint::Flat(v) if v.len() == n => NamedPoint { x: v, y: None },
                RawPoint::Flat(v) if v.len() == 2 * n => NamedPoint {
                    y: Some(v[n..].to_vec()),
                    x: v[..n].to_vec(),
                },
                RawPoint::Flat(v) => {
                    return Err(InputError::Invalid(format!(
                        "point `{name}` has {} entries; expected {n} (x) or {} (x and y)",
                        v.len(),
                        2 * n
                    )))
                }
                RawPoint::Pair { x, y } => {
                    if x.len() != n || y.len() != n {
                        return Err(InputError::Invalid(format!(
                            "point `{name}`: x and y must both have {n} entries"
                        )));
                    }
                    NamedPoint { x, y: Some(y) }
                }
            };
            if point.x.iter().chain(point.y.iter().flatten()).any(|v| !v.is_finite()) {
                return Err(InputError::Invalid(format!("point `{name}` has non-finite entries")));
            }
            points.insert(name, point);
        }
        Ok(ProblemFile {
            problem,
            regularization,
            points,
            tolerances,
        })
    }

    pub fn point(&self, name: &str) -> Result<&NamedPoint, InputError> {
        self.points.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.points.keys().map(String::as_str).collect();
            InputError::Invalid(format!(
                "no point named `{name}` (file defines: {})",
                if known.is_empty() { "none".to_string() } else { known.join(", ") }
            ))
        })
    }

    pub fn regularized(&self) -> Result<&RegularizedProblem, InputError> {
        self.regularization
            .as_ref()
            .ok_or_else(|| InputError::Invalid("this command needs a [regularization] section".into()))
    }
}
