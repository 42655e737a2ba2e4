//! Subcommand implementations. Each returns an [`Outcome`] carrying the exit
//! code, or a [`Failure`] for input problems.

use ccop_core::bridge::{lift, project, verify_counts, BridgeError};
use ccop_core::oracle::SideStatus;
use ccop_core::regmpoc::{check_mpoc_licq, check_y_structure};
use ccop_core::{
    census_newton, census_newton_t, census_quadratic, census_t_quadratic, certify_m, certify_t, check_cc_licq,
    CensusReport, CertError, Grid, OracleError, RegularizedProblem,
};
use serde_json::json;
use thiserror::Error;

use crate::problem_file::{InputError, NamedPoint, ProblemFile};
use crate::report::{self, fmt_vec, Check, Outcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DEGENERATE: i32 = 1;
pub const EXIT_NOT_STATIONARY: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NOT_QUADRATIC: i32 = 4;

#[derive(Debug, Error)]
pub enum Failure {
    #[error(transparent)]
    Input(#[from] InputError),
    #[error("{0}")]
    Rejected(String),
    #[error("{0}")]
    NotQuadratic(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::NotQuadratic(_) => EXIT_NOT_QUADRATIC,
            _ => EXIT_INPUT,
        }
    }
}

impl From<CertError> for Failure {
    fn from(e: CertError) -> Self {
        Failure::Rejected(e.to_string())
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::NotQuadratic { .. } => Failure::NotQuadratic(e.to_string()),
            other => Failure::Rejected(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointSide {
    M,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Quadratic,
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CensusSide {
    M,
    T,
    Both,
}

fn y_of<'a>(name: &str, p: &'a NamedPoint) -> Result<&'a [f64], Failure> {
    p.y.as_deref().ok_or_else(|| {
        Failure::Input(InputError::Invalid(format!(
            "point `{name}` has no y part; give 2n entries or {{ x = [...], y = [...] }}"
        )))
    })
}

fn preamble(out: &mut Outcome, file: &ProblemFile) {
    out.set("problem", report::problem(&file.problem));
    if let Some(rp) = &file.regularization {
        out.set("regularization", report::regularization(rp));
    }
}

pub fn certify(file: &ProblemFile, name: &str, side: PointSide) -> Result<Outcome, Failure> {
    let point = file.point(name)?;
    let tol = &file.tolerances;
    let mut out = Outcome::new("certify", tol);
    preamble(&mut out, file);
    out.set("point", json!(name));
    match side {
        PointSide::M => {
            let c = certify_m(&file.problem, &point.x, tol)?;
            out.code = if !c.stationary {
                EXIT_NOT_STATIONARY
            } else if c.nondegenerate() {
                EXIT_OK
            } else {
                EXIT_DEGENERATE
            };
            out.say(format!("M-certificate for `{name}` at x = {}", fmt_vec(&c.point)));
            out.say(match (c.stationary, c.m_index) {
                (false, _) => format!("not M-stationary: {}", c.degenerate_reason.as_deref().unwrap_or("")),
                (true, Some(mi)) => format!(
                    "nondegenerate M-stationary, MI = {mi} (QI = {}, SI = {})",
                    c.quadratic_index, c.sparsity_index
                ),
                (true, None) => format!(
                    "degenerate M-stationary, fails {}",
                    c.ndm.first_failure().unwrap_or("?")
                ),
            });
            out.set("side", json!("m"));
            out.set("certificate", report::m_certificate(&c));
        }
        PointSide::T => {
            let rp = file.regularized()?;
            let y = y_of(name, point)?;
            let c = certify_t(rp, &point.x, y, tol)?;
            let full = c.nondegenerate() && c.ndt.ndt5;
            out.code = if !c.stationary {
                EXIT_NOT_STATIONARY
            } else if full {
                EXIT_OK
            } else {
                EXIT_DEGENERATE
            };
            out.say(format!(
                "T-certificate for `{name}` at x = {}, y = {}",
                fmt_vec(&c.x),
                fmt_vec(&c.y)
            ));
            out.say(if !c.stationary {
                format!("not T-stationary: {}", c.degenerate_reason.as_deref().unwrap_or(""))
            } else if full {
                format!(
                    "nondegenerate T-stationary, TI = {} (QI = {}, BI = {})",
                    c.t_index.unwrap_or_default(),
                    c.quadratic_index,
                    c.biactive_index
                )
            } else {
                let mut line = format!("degenerate T-stationary, fails {}", c.ndt.first_failure().unwrap_or("?"));
                if let Some(ti) = c.t_index {
                    line.push_str(&format!(" (TI = {ti} from NDT1-NDT4)"));
                }
                line
            });
            out.set("side", json!("t"));
            out.set("certificate", report::t_certificate(&c));
        }
    }
    Ok(out)
}

pub fn lift_point(file: &ProblemFile, name: &str) -> Result<Outcome, Failure> {
    let point = file.point(name)?;
    let rp = file.regularized()?;
    let tol = &file.tolerances;
    let mut out = Outcome::new("lift", tol);
    preamble(&mut out, file);
    out.set("point", json!(name));
    let set = match lift(rp, &point.x, tol) {
        Ok(set) => set,
        Err(BridgeError::NotMStationary(why)) => {
            out.code = EXIT_NOT_STATIONARY;
            out.say(format!("`{name}` at x = {} is not M-stationary: {why}", fmt_vec(&point.x)));
            out.set("error", json!(format!("not M-stationary: {why}")));
            return Ok(out);
        }
        Err(e) => return Err(Failure::Rejected(e.to_string())),
    };
    let mi = set.base.m_index;
    let violations: Vec<String> = set
        .companions
        .iter()
        .filter(|_| set.count_applicable)
        .filter_map(|c| {
            let t = &c.certificate;
            let ok = t.nondegenerate() && t.ndt.ndt5 && t.t_index == mi && c.multipliers_agree;
            (!ok).then(|| format!("upper set {}", report::indices(&c.upper_set)))
        })
        .collect();
    out.code = match (set.count_ok(), violations.is_empty()) {
        (Some(true), true) => EXIT_OK,
        _ => EXIT_DEGENERATE,
    };
    out.say(format!(
        "lift of `{name}` at x = {}: pivot {}, {} companions, expected {}",
        fmt_vec(&point.x),
        set.pivot + 1,
        set.companions.len(),
        set.expected_count
    ));
    if !set.count_applicable {
        out.say(format!(
            "base point is degenerate ({}); count not asserted",
            set.base.ndm.first_failure().unwrap_or("?")
        ));
    } else if out.code == EXIT_OK {
        out.say(format!(
            "count holds; every companion is nondegenerate with NDT5 and TI = MI = {}",
            mi.unwrap_or_default()
        ));
    } else {
        out.say(format!("assertions failed: {}", violations.join("; ")));
    }
    for c in &set.companions {
        out.say(format!(
            "  upper set {}  y = {}  TI = {}",
            report::indices(&c.upper_set),
            fmt_vec(&c.y),
            c.certificate.t_index.map_or("-".to_string(), |t| t.to_string())
        ));
    }
    out.set("lift", report::lift_set(&set));
    Ok(out)
}

pub fn project_point(file: &ProblemFile, name: &str) -> Result<Outcome, Failure> {
    let point = file.point(name)?;
    let rp = file.regularized()?;
    let y = y_of(name, point)?;
    let tol = &file.tolerances;
    let mut out = Outcome::new("project", tol);
    preamble(&mut out, file);
    out.set("point", json!(name));
    let p = match project(rp, &point.x, y, tol) {
        Ok(p) => p,
        Err(BridgeError::NotTStationary(why)) => {
            out.code = EXIT_NOT_STATIONARY;
            out.say(format!("`{name}` is not T-stationary: {why}"));
            out.set("error", json!(format!("not T-stationary: {why}")));
            return Ok(out);
        }
        Err(e) => return Err(Failure::Rejected(e.to_string())),
    };
    let m = &p.certificate;
    out.code = if m.nondegenerate() && p.transfer_holds != Some(false) {
        EXIT_OK
    } else {
        EXIT_DEGENERATE
    };
    out.say(format!("projection of `{name}` onto x = {}", fmt_vec(&m.point)));
    out.say(match m.m_index {
        Some(mi) => format!("nondegenerate M-stationary, MI = {mi}"),
        None => format!(
            "M-point fails {}",
            m.ndm.first_failure().unwrap_or("stationarity")
        ),
    });
    if let Some(holds) = p.transfer_holds {
        out.say(format!("index transfer {}", if holds { "holds" } else { "FAILS" }));
    }
    out.set("projection", report::projection(&p));
    Ok(out)
}

pub fn check_licq(file: &ProblemFile, name: &str) -> Result<Outcome, Failure> {
    let point = file.point(name)?;
    let tol = &file.tolerances;
    let mut out = Outcome::new("check-licq", tol);
    preamble(&mut out, file);
    out.set("point", json!(name));
    let cc = check_cc_licq(&file.problem, &point.x, tol)?;
    out.set("cc_licq", json!(cc));
    out.say(format!("CC-LICQ at x = {}: {}", fmt_vec(&point.x), verdict(cc)));
    let mut all = cc;
    match (&file.regularization, point.y.as_deref()) {
        (Some(rp), Some(y)) => {
            let mpoc = check_mpoc_licq(rp, &point.x, y, tol)?;
            out.set("mpoc_licq", json!(mpoc));
            out.set("agree", json!(mpoc == cc));
            out.say(format!("MPOC-LICQ at y = {}: {}", fmt_vec(y), verdict(mpoc)));
            all &= mpoc;
        }
        _ => out.set("mpoc_licq", json!(null)),
    }
    out.code = if all { EXIT_OK } else { EXIT_DEGENERATE };
    Ok(out)
}

fn verdict(b: bool) -> &'static str {
    if b {
        "holds"
    } else {
        "fails"
    }
}

fn run_census<'a>(
    file: &'a ProblemFile,
    method: Method,
    side: CensusSide,
    grid: &Grid,
) -> Result<(CensusReport, Option<&'a RegularizedProblem>), Failure> {
    let tol = &file.tolerances;
    let need_t = side != CensusSide::M;
    let rp = if need_t {
        Some(file.regularized()?)
    } else {
        file.regularization.as_ref()
    };
    let m = (side != CensusSide::T)
        .then(|| match method {
            Method::Quadratic => census_quadratic(&file.problem, tol),
            Method::Newton => census_newton(&file.problem, grid, tol),
        })
        .transpose()?;
    let t = match (need_t, rp) {
        (true, Some(rp)) => Some(match method {
            Method::Quadratic => census_t_quadratic(rp, tol)?,
            Method::Newton => census_newton_t(rp, grid, tol)?,
        }),
        _ => None,
    };
    let report = match (m, t) {
        (Some(m), Some(t)) => m.merge(t),
        (Some(m), None) => m,
        (None, Some(t)) => t,
        (None, None) => unreachable!("at least one side runs"),
    };
    Ok((report, rp))
}

/// Checks that apply to a finished census.
fn census_checks(file: &ProblemFile, census: &CensusReport, rp: Option<&RegularizedProblem>) -> Result<Vec<Check>, Failure> {
    let Some(rp) = rp else {
        return Ok(Vec::new());
    };
    let tol = &file.tolerances;
    let mut checks = Check::from_counts(&verify_counts(rp, census, tol).map_err(|e| Failure::Rejected(e.to_string()))?);
    let t_ran = census.t_side != SideStatus::NotRun;
    if rp.admissible() {
        let bad = census
            .t_points
            .iter()
            .filter(|t| t.stationary && !check_y_structure(rp, &t.y, tol))
            .count();
        checks.push(Check {
            name: "y-structure".into(),
            applicable: t_ran,
            passed: bad == 0,
            detail: format!("{bad} stationary T-points without the structured y"),
        });
    }
    let reformulation = rp.eps() == 0.0 && rp.c().iter().all(|&c| c == 0.0);
    if reformulation && t_ran {
        let nondegenerate = census.t_points.iter().filter(|t| t.nondegenerate()).count();
        checks.push(Check {
            name: "reformulation-degenerate".into(),
            applicable: true,
            passed: nondegenerate == 0,
            detail: format!(
                "{} T-points found without regularization, {nondegenerate} of them nondegenerate",
                census.t_points.len()
            ),
        });
    }
    Ok(checks)
}

fn summarize(out: &mut Outcome, census: &CensusReport) {
    let hist = |m: &std::collections::BTreeMap<usize, usize>, without: usize| {
        let mut parts: Vec<String> = m.iter().map(|(i, c)| format!("index {i}: {c}")).collect();
        if without > 0 {
            parts.push(format!("no index: {without}"));
        }
        if parts.is_empty() {
            "none".to_string()
        } else {
            parts.join(", ")
        }
    };
    let side = |s: SideStatus| match s {
        SideStatus::NotRun => "not run",
        SideStatus::Complete => "complete",
        SideStatus::Partial => "partial",
    };
    if census.m_side != SideStatus::NotRun {
        out.say(format!(
            "M side ({}): {} points; {}",
            side(census.m_side),
            census.m_points.len(),
            hist(&census.m_by_index, census.m_without_index)
        ));
        for m in &census.m_points {
            out.say(format!(
                "  x = {}  {}",
                fmt_vec(&m.point),
                m.m_index.map_or_else(
                    || format!("degenerate ({})", m.ndm.first_failure().unwrap_or("?")),
                    |i| format!("MI = {i}")
                )
            ));
        }
    }
    if census.t_side != SideStatus::NotRun {
        out.say(format!(
            "T side ({}): {} points; {}",
            side(census.t_side),
            census.t_points.len(),
            hist(&census.t_by_index, census.t_without_index)
        ));
        for t in &census.t_points {
            let status = match (t.t_index, t.ndt.ndt5) {
                (Some(i), true) => format!("TI = {i}"),
                (Some(i), false) => format!("TI = {i}, fails NDT5"),
                (None, _) => format!("degenerate ({})", t.ndt.first_failure().unwrap_or("?")),
            };
            out.say(format!("  x = {}  y = {}  {status}", fmt_vec(&t.x), fmt_vec(&t.y)));
        }
    }
    if census.skipped_patterns > 0 {
        out.say(format!("{} singular patterns skipped", census.skipped_patterns));
    }
    for r in &census.review {
        out.say(format!("review: {r}"));
    }
}

fn finish_checks(out: &mut Outcome, checks: &[Check]) {
    for c in checks {
        out.say(c.line());
    }
    out.code = if Check::all_passed(checks) { EXIT_OK } else { EXIT_DEGENERATE };
    out.set("checks", Check::to_json(checks));
}

pub fn census(file: &ProblemFile, method: Method, side: CensusSide, grid: &Grid) -> Result<Outcome, Failure> {
    let (census, rp) = run_census(file, method, side, grid)?;
    let mut out = Outcome::new("census", &file.tolerances);
    preamble(&mut out, file);
    out.set("method", json!(method_name(method)));
    summarize(&mut out, &census);
    let checks = census_checks(file, &census, rp)?;
    finish_checks(&mut out, &checks);
    out.set("census", report::census(&census));
    Ok(out)
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Quadratic => "quadratic",
        Method::Newton => "newton",
    }
}

/// Census of both sides, the counting checks, and a lift/project round
/// trip through every nondegenerate M-point.
pub fn verify(file: &ProblemFile, method: Method, grid: &Grid) -> Result<Outcome, Failure> {
    let (census, rp) = run_census(file, method, CensusSide::Both, grid)?;
    let rp = rp.expect("both sides need regularization");
    let tol = &file.tolerances;
    let mut out = Outcome::new("verify", tol);
    preamble(&mut out, file);
    out.set("method", json!(method_name(method)));
    summarize(&mut out, &census);
    let mut checks = census_checks(file, &census, Some(rp))?;

    let mut trips = Vec::new();
    let mut failures = Vec::new();
    let mut companions = 0;
    if rp.admissible() {
        for m in census.m_points.iter().filter(|m| m.nondegenerate()) {
            let set = lift(rp, &m.point, tol).map_err(|e| Failure::Rejected(e.to_string()))?;
            let mut ok = set.count_ok() == Some(true);
            for c in &set.companions {
                companions += 1;
                let t = &c.certificate;
                let back = project(rp, &m.point, &c.y, tol).map_err(|e| Failure::Rejected(e.to_string()))?;
                ok &= t.nondegenerate()
                    && t.ndt.ndt5
                    && t.t_index == m.m_index
                    && c.multipliers_agree
                    && back.transfer_holds == Some(true);
            }
            if !ok {
                failures.push(fmt_vec(&m.point));
            }
            trips.push(json!({
                "x": m.point,
                "m_index": m.m_index,
                "companions": set.companions.len(),
                "expected": set.expected_count,
                "passed": ok,
            }));
        }
    }
    checks.push(Check {
        name: "round-trip".into(),
        applicable: rp.admissible(),
        passed: failures.is_empty(),
        detail: if rp.admissible() {
            format!(
                "{} nondegenerate M-points, {companions} companions{}",
                trips.len(),
                if failures.is_empty() {
                    String::new()
                } else {
                    format!("; failures at {}", failures.join(", "))
                }
            )
        } else {
            "regularization parameters inadmissible".into()
        },
    });
    finish_checks(&mut out, &checks);
    out.set("round_trips", json!(trips));
    out.set("census", report::census(&census));
    Ok(out)
}
