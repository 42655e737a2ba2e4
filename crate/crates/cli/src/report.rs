//! Report documents. Every index set and multiplier key is shifted to
//! 1-based numbering here; the library itself is 0-based.

use std::collections::BTreeMap;
use std::fmt::Write;

use ccop_core::bridge::{CountReport, LiftSet, Projection};
use ccop_core::{CensusReport, MCertificate, Problem, RegularizedProblem, TCertificate, Tolerances};
use serde_json::{json, Map, Value};

pub const SCHEMA: &str = "ccop-report/1";

pub fn indices(v: &[usize]) -> Value {
    v.iter().map(|i| i + 1).collect()
}

/// `[{"index": i, "value": v}, ...]` in ascending index order.
pub fn indexed(m: &BTreeMap<usize, f64>) -> Value {
    m.iter().map(|(i, v)| json!({"index": i + 1, "value": v})).collect()
}

fn histogram(m: &BTreeMap<usize, usize>) -> Value {
    m.iter().map(|(index, count)| json!({"index": index, "count": count})).collect()
}

pub fn tolerances(t: &Tolerances) -> Value {
    json!({
        "tol_feas": t.tol_feas,
        "tol_act": t.tol_act,
        "tol_rank": t.tol_rank,
        "tol_strict": t.tol_strict,
    })
}

pub fn problem(pr: &Problem) -> Value {
    let show = |es: &[ccop_core::Expr]| es.iter().map(|e| e.to_string()).collect::<Vec<_>>();
    json!({
        "n": pr.n(),
        "s": pr.s(),
        "f": pr.objective().to_string(),
        "h": show(pr.equalities()),
        "g": show(pr.inequalities()),
    })
}

pub fn regularization(rp: &RegularizedProblem) -> Value {
    json!({
        "c": rp.c(),
        "eps": rp.eps(),
        "admissible": rp.admissible(),
        "override": rp.override_set(),
    })
}

pub fn m_certificate(c: &MCertificate) -> Value {
    let a = &c.activity;
    let m = &c.multipliers;
    json!({
        "x": c.point,
        "feasible": c.feasible,
        "stationary": c.stationary,
        "nondegenerate": c.nondegenerate(),
        "degenerate_reason": c.degenerate_reason,
        "activity": {
            "active_inequalities": indices(&a.q0),
            "zero_coordinates": indices(&a.i0),
            "x_norm0": a.x_norm0,
            "h_violation": a.h_violation,
            "g_min": a.g_min,
        },
        "multipliers": {
            "lambda": m.lambda,
            "mu": indexed(&m.mu),
            "gamma": indexed(&m.gamma),
            "unique": c.multipliers_unique,
        },
        "residual": c.residual,
        "conditions": {"NDM1": c.ndm.ndm1, "NDM2": c.ndm.ndm2, "NDM3": c.ndm.ndm3, "NDM4": c.ndm.ndm4},
        "inertia": {"negative": c.inertia.neg, "zero": c.inertia.zero, "positive": c.inertia.pos},
        "tangent_dim": c.tangent_dim,
        "quadratic_index": c.quadratic_index,
        "sparsity_index": c.sparsity_index,
        "m_index": c.m_index,
    })
}

pub fn t_certificate(c: &TCertificate) -> Value {
    let a = &c.activity;
    let m = &c.multipliers;
    let branches: Vec<Value> = c
        .branches
        .iter()
        .map(|(i, b)| json!({"index": i + 1, "rho1_zero": b.rho1_zero, "rho2_nonpositive": b.rho2_nonpositive}))
        .collect();
    let f = &c.ndt;
    json!({
        "x": c.x,
        "y": c.y,
        "feasible": c.feasible,
        "stationary": c.stationary,
        "nondegenerate": c.nondegenerate() && f.ndt5,
        "degenerate_reason": c.degenerate_reason,
        "activity": {
            "a00": indices(&a.a00),
            "a01": indices(&a.a01),
            "a10": indices(&a.a10),
            "upper_bound": indices(&a.upper),
            "orthogonality_violated": indices(&a.violated),
            "sum_active": a.sum_active,
            "y_sum": a.y_sum,
            "active_inequalities": indices(&a.q0),
            "h_violation": a.h_violation,
            "g_min": a.g_min,
        },
        "multipliers": t_multipliers(m),
        "multipliers_unique": c.multipliers_unique,
        "biactive_branches": branches,
        "residual": c.residual,
        "conditions": {"NDT1": f.ndt1, "NDT2": f.ndt2, "NDT3": f.ndt3, "NDT4": f.ndt4, "NDT5": f.ndt5},
        "inertia": {"negative": c.inertia.neg, "zero": c.inertia.zero, "positive": c.inertia.pos},
        "tangent_dim": c.tangent_dim,
        "quadratic_index": c.quadratic_index,
        "biactive_index": c.biactive_index,
        "t_index": c.t_index,
    })
}

fn t_multipliers(m: &ccop_core::regmpoc::TMultipliers) -> Value {
    json!({
        "lambda": m.lambda,
        "mu1": indexed(&m.mu1),
        "mu2": indexed(&m.mu2),
        "mu3": m.mu3,
        "sigma1": indexed(&m.sigma1),
        "sigma2": indexed(&m.sigma2),
        "rho1": indexed(&m.rho1),
        "rho2": indexed(&m.rho2),
    })
}

pub fn lift_set(set: &LiftSet) -> Value {
    let companions: Vec<Value> = set
        .companions
        .iter()
        .map(|c| {
            json!({
                "upper_set": indices(&c.upper_set),
                "y": c.y,
                "closed_form_multipliers": t_multipliers(&c.closed_form),
                "multiplier_gap": c.multiplier_gap,
                "multipliers_agree": c.multipliers_agree,
                "certificate": t_certificate(&c.certificate),
            })
        })
        .collect();
    json!({
        "base": m_certificate(&set.base),
        "pivot": set.pivot + 1,
        "expected_count": set.expected_count,
        "count_applicable": set.count_applicable,
        "count_ok": set.count_ok(),
        "companions": companions,
    })
}

pub fn projection(p: &Projection) -> Value {
    json!({
        "t_certificate": t_certificate(&p.t_certificate),
        "m_certificate": m_certificate(&p.certificate),
        "mapped_gamma": indexed(&p.mapped_gamma),
        "multiplier_gap": p.multiplier_gap,
        "multipliers_agree": p.multipliers_agree,
        "transfer_applicable": p.transfer_applicable,
        "transfer_holds": p.transfer_holds,
    })
}

pub fn census(c: &CensusReport) -> Value {
    json!({
        "instance_id": c.instance_id,
        "m_side": c.m_side,
        "t_side": c.t_side,
        "complete": c.complete,
        "skipped_patterns": c.skipped_patterns,
        "m_points_by_index": histogram(&c.m_by_index),
        "t_points_by_index": histogram(&c.t_by_index),
        "m_points_without_index": c.m_without_index,
        "t_points_without_index": c.t_without_index,
        "review": c.review,
        "m_points": c.m_points.iter().map(m_certificate).collect::<Vec<_>>(),
        "t_points": c.t_points.iter().map(t_certificate).collect::<Vec<_>>(),
    })
}

/// A named check with its verdict; `applicable = false` means skipped.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub applicable: bool,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn from_counts(r: &CountReport) -> Vec<Check> {
        r.checks
            .iter()
            .map(|c| Check {
                name: c.name.to_string(),
                applicable: c.applicable,
                passed: c.passed,
                detail: c.detail.clone(),
            })
            .collect()
    }

    pub fn to_json(checks: &[Check]) -> Value {
        checks
            .iter()
            .map(|c| json!({"name": c.name, "applicable": c.applicable, "passed": c.passed, "detail": c.detail}))
            .collect()
    }

    pub fn all_passed(checks: &[Check]) -> bool {
        checks.iter().all(|c| !c.applicable || c.passed)
    }

    pub fn line(&self) -> String {
        let verdict = match (self.applicable, self.passed) {
            (false, _) => "n/a ",
            (true, true) => "PASS",
            (true, false) => "FAIL",
        };
        format!("[{verdict}] {}: {}", self.name, self.detail)
    }
}

/// Finished output of a command.
pub struct Outcome {
    pub code: i32,
    pub command: &'static str,
    pub headline: Vec<String>,
    pub body: Map<String, Value>,
}

impl Outcome {
    pub fn new(command: &'static str, tol: &Tolerances) -> Outcome {
        let mut body = Map::new();
        body.insert("tolerances".into(), tolerances(tol));
        Outcome {
            code: 0,
            command,
            headline: Vec::new(),
            body,
        }
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.body.insert(key.to_string(), value);
    }

    pub fn say(&mut self, line: impl Into<String>) {
        self.headline.push(line.into());
    }

    pub fn machine(&self) -> String {
        let mut doc = self.body.clone();
        doc.insert("schema".into(), SCHEMA.into());
        doc.insert("command".into(), self.command.into());
        doc.insert("exit_code".into(), self.code.into());
        doc.insert("summary".into(), self.headline.clone().into());
        let mut out = serde_json::to_string_pretty(&Value::Object(doc)).expect("serializable");
        out.push('\n');
        out
    }

    /// Headline followed by the report body as an indented outline.
    pub fn human(&self, detail_keys: &[&str]) -> String {
        let mut out = String::new();
        for line in &self.headline {
            out.push_str(line);
            out.push('\n');
        }
        for key in detail_keys {
            if let Some(v) = self.body.get(*key) {
                out.push('\n');
                outline(&mut out, key, v, 0);
            }
        }
        out
    }
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("-".into()),
        Value::String(s) => Some(s.clone()),
        Value::Array(items) if items.iter().all(|i| !i.is_object() && !i.is_array()) => Some(format!(
            "[{}]",
            items.iter().map(|i| scalar(i).unwrap_or_default()).collect::<Vec<_>>().join(", ")
        )),
        Value::Array(_) | Value::Object(_) => None,
        other => Some(other.to_string()),
    }
}

fn compact_pair(v: &Value) -> Option<String> {
    let o = v.as_object()?;
    let (i, val) = (o.get("index")?, o.get("value")?);
    (o.len() == 2).then(|| format!("{i}: {val}"))
}

fn outline(out: &mut String, key: &str, v: &Value, depth: usize) {
    let pad = "  ".repeat(depth);
    if let Some(s) = scalar(v) {
        let _ = writeln!(out, "{pad}{key}: {s}");
        return;
    }
    match v {
        Value::Object(o) => {
            let _ = writeln!(out, "{pad}{key}:");
            for (k, child) in o {
                outline(out, k, child, depth + 1);
            }
        }
        Value::Array(items) => {
            if let Some(pairs) = items.iter().map(compact_pair).collect::<Option<Vec<_>>>() {
                let _ = writeln!(out, "{pad}{key}: {{{}}}", pairs.join(", "));
                return;
            }
            let _ = writeln!(out, "{pad}{key}:");
            for (k, child) in items.iter().enumerate() {
                outline(out, &format!("[{}]", k + 1), child, depth + 1);
            }
        }
        _ => unreachable!("scalars handled above"),
    }
}

pub fn fmt_vec(v: &[f64]) -> String {
    format!("({})", v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", "))
}
