//! Cardinality-constrained programs
//!
//! ```text
//! min f(x)  s.t.  h(x) = 0,  g(x) >= 0,  ‖x‖₀ <= s
//! ```
//!
//! and certification of M-stationary points: activity sets, CC-LICQ, the
//! multiplier solve, nondegeneracy conditions NDM1–NDM4 and the M-index.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{parse, EvalError, Expr, Jet2, ParseError};
use crate::numkern::{
    rank_and_nullbasis, restricted_inertia, solve_multipliers, solve_multipliers_signed, Inertia, Tolerances,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("sparsity budget s = {s} must satisfy 0 <= s <= n - 1 for n = {n}")]
    InvalidSparsity { n: usize, s: usize },
    #[error("dimension n must be at least 1")]
    ZeroDimension,
    #[error("{which} references x{index} but n = {n}")]
    VariableOutOfRange { which: String, index: usize, n: usize },
    #[error("cannot parse {which}: {source}")]
    Parse {
        which: String,
        #[source]
        source: ParseError,
    },
    #[error("{what} has length {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

/// A cardinality-constrained program.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    n: usize,
    s: usize,
    f: Expr,
    h: Vec<Expr>,
    g: Vec<Expr>,
}

impl Problem {
    pub fn new(n: usize, s: usize, f: Expr, h: Vec<Expr>, g: Vec<Expr>) -> Result<Problem, ModelError> {
        if n == 0 {
            return Err(ModelError::ZeroDimension);
        }
        if s >= n {
            return Err(ModelError::InvalidSparsity { n, s });
        }
        let named = std::iter::once(("f".to_string(), &f))
            .chain(h.iter().enumerate().map(|(p, e)| (format!("h{}", p + 1), e)))
            .chain(g.iter().enumerate().map(|(q, e)| (format!("g{}", q + 1), e)));
        for (which, e) in named {
            if let Some(i) = e.max_var().filter(|&i| i >= n) {
                return Err(ModelError::VariableOutOfRange {
                    which,
                    index: i + 1,
                    n,
                });
            }
        }
        Ok(Problem { n, s, f, h, g })
    }

    /// Build from expression sources.
    pub fn parse(n: usize, s: usize, f: &str, h: &[&str], g: &[&str]) -> Result<Problem, ModelError> {
        let p = |which: String, src: &str| {
            parse(src, n.max(1)).map_err(|source| ModelError::Parse { which, source })
        };
        let f = p("f".into(), f)?;
        let h = h
            .iter()
            .enumerate()
            .map(|(i, src)| p(format!("h{}", i + 1), src))
            .collect::<Result<Vec<_>, _>>()?;
        let g = g
            .iter()
            .enumerate()
            .map(|(i, src)| p(format!("g{}", i + 1), src))
            .collect::<Result<Vec<_>, _>>()?;
        Problem::new(n, s, f, h, g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn objective(&self) -> &Expr {
        &self.f
    }

    pub fn equalities(&self) -> &[Expr] {
        &self.h
    }

    pub fn inequalities(&self) -> &[Expr] {
        &self.g
    }

    /// Same constraints, objective multiplied by `alpha`.
    pub fn with_scaled_objective(&self, alpha: f64) -> Problem {
        Problem {
            f: self.f.clone().scaled(alpha),
            ..self.clone()
        }
    }

    pub(crate) fn check_len(&self, what: &'static str, v: &[f64]) -> Result<(), ModelError> {
        if v.len() != self.n {
            return Err(ModelError::DimensionMismatch {
                what,
                expected: self.n,
                got: v.len(),
            });
        }
        Ok(())
    }
}

/// Errors raised while certifying a point.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("regularization parameters must have c positive and pairwise distinct and 0 < eps <= 1/(n-s); set the override to proceed anyway")]
    AssumptionViolated,
}

/// Index sets at a CCOP point. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CcopActivity {
    /// Active inequality constraints.
    pub q0: Vec<usize>,
    /// Vanishing coordinates.
    pub i0: Vec<usize>,
    /// Number of nonvanishing coordinates.
    pub x_norm0: usize,
    /// `max_p |h_p(x)|` (0 without equalities).
    pub h_violation: f64,
    /// `min_q g_q(x)` (+∞ without inequalities).
    pub g_min: f64,
}

/// Feasibility of `x` together with its activity sets.
pub fn check_feasible(pr: &Problem, x: &[f64], tol: &Tolerances) -> Result<(bool, CcopActivity), CertError> {
    pr.check_len("x", x)?;
    let mut h_violation = 0.0_f64;
    for h in &pr.h {
        h_violation = h_violation.max(h.value(x)?.abs());
    }
    let mut g_min = f64::INFINITY;
    let mut q0 = Vec::new();
    for (q, g) in pr.g.iter().enumerate() {
        let v = g.value(x)?;
        g_min = g_min.min(v);
        if v.abs() <= tol.tol_act {
            q0.push(q);
        }
    }
    let i0: Vec<usize> = (0..pr.n).filter(|&i| x[i].abs() <= tol.tol_act).collect();
    let x_norm0 = pr.n - i0.len();
    let feasible = h_violation <= tol.tol_feas && g_min >= -tol.tol_feas && x_norm0 <= pr.s;
    Ok((
        feasible,
        CcopActivity {
            q0,
            i0,
            x_norm0,
            h_violation,
            g_min,
        },
    ))
}

/// Rows ∇h_p, ∇g_q (q ∈ Q0), e_i (i ∈ I0), in that order.
fn active_rows(pr: &Problem, hj: &[Jet2], gj: &[Jet2], act: &CcopActivity) -> DMatrix<f64> {
    let n = pr.n;
    let rows = hj.len() + act.q0.len() + act.i0.len();
    let mut a = DMatrix::zeros(rows, n);
    let mut r = 0;
    for j in hj {
        a.row_mut(r).copy_from_slice(j.gradient());
        r += 1;
    }
    for &q in &act.q0 {
        a.row_mut(r).copy_from_slice(gj[q].gradient());
        r += 1;
    }
    for &i in &act.i0 {
        a[(r, i)] = 1.0;
        r += 1;
    }
    a
}

fn jets(exprs: &[Expr], x: &[f64]) -> Result<Vec<Jet2>, EvalError> {
    exprs.iter().map(|e| e.eval2(x)).collect()
}

/// CC-LICQ: the gradients ∇h_p, ∇g_q (q ∈ Q0) and unit vectors e_i
/// (i ∈ I0) are linearly independent.
pub fn check_cc_licq(pr: &Problem, x: &[f64], tol: &Tolerances) -> Result<bool, CertError> {
    let (_, act) = check_feasible(pr, x, tol)?;
    let hj = jets(&pr.h, x)?;
    let gj = jets(&pr.g, x)?;
    let a = active_rows(pr, &hj, &gj, &act);
    let (rank, _) = rank_and_nullbasis(&a, tol);
    Ok(rank == a.nrows())
}

/// Multipliers of the M-stationarity system. Map keys are 0-based indices.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MMultipliers {
    /// One per equality constraint.
    pub lambda: Vec<f64>,
    /// Keyed by active inequality index.
    pub mu: BTreeMap<usize, f64>,
    /// Keyed by vanishing coordinate.
    pub gamma: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct NdmFlags {
    pub ndm1: bool,
    pub ndm2: bool,
    pub ndm3: bool,
    pub ndm4: bool,
}

impl NdmFlags {
    pub fn all(&self) -> bool {
        self.ndm1 && self.ndm2 && self.ndm3 && self.ndm4
    }

    pub fn first_failure(&self) -> Option<&'static str> {
        [
            ("NDM1", self.ndm1),
            ("NDM2", self.ndm2),
            ("NDM3", self.ndm3),
            ("NDM4", self.ndm4),
        ]
        .into_iter()
        .find(|(_, ok)| !ok)
        .map(|(name, _)| name)
    }
}

/// Outcome of [`certify_m`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MCertificate {
    pub point: Vec<f64>,
    pub feasible: bool,
    pub stationary: bool,
    pub activity: CcopActivity,
    pub multipliers: MMultipliers,
    /// CC-LICQ holds, so the multipliers are the unique solution. Otherwise
    /// they are the minimum-norm solution, or a sign-feasible one when the
    /// minimum-norm solution has a negative `μ`.
    pub multipliers_unique: bool,
    pub residual: f64,
    pub ndm: NdmFlags,
    /// Inertia of the Lagrangian Hessian on the tangent space.
    pub inertia: Inertia,
    pub tangent_dim: usize,
    pub quadratic_index: usize,
    pub sparsity_index: usize,
    /// `QI + SI`, present only for nondegenerate points.
    pub m_index: Option<usize>,
    pub degenerate_reason: Option<String>,
}

impl MCertificate {
    pub fn nondegenerate(&self) -> bool {
        self.feasible && self.stationary && self.ndm.all()
    }

    fn infeasible(x: &[f64], activity: CcopActivity) -> MCertificate {
        MCertificate {
            point: x.to_vec(),
            feasible: false,
            stationary: false,
            activity,
            multipliers: MMultipliers::default(),
            multipliers_unique: false,
            residual: f64::NAN,
            ndm: NdmFlags::default(),
            inertia: Inertia::default(),
            tangent_dim: 0,
            quadratic_index: 0,
            sparsity_index: 0,
            m_index: None,
            degenerate_reason: Some("infeasible".into()),
        }
    }
}

/// Whether a least-squares residual counts as an exact solve.
pub(crate) fn residual_ok(residual: f64, target_norm: f64, tol: &Tolerances) -> bool {
    residual <= tol.tol_feas * (1.0 + target_norm)
}

/// Certify M-stationarity, nondegeneracy and the M-index at `x`.
///
/// Infeasible or non-stationary inputs produce a certificate with the
/// corresponding flags cleared rather than an error.
pub fn certify_m(pr: &Problem, x: &[f64], tol: &Tolerances) -> Result<MCertificate, CertError> {
    let (feasible, act) = check_feasible(pr, x, tol)?;
    if !feasible {
        return Ok(MCertificate::infeasible(x, act));
    }
    let fj = pr.f.eval2(x)?;
    let hj = jets(&pr.h, x)?;
    let gj = jets(&pr.g, x)?;

    let rows = active_rows(pr, &hj, &gj, &act);
    let (rank, tangent) = rank_and_nullbasis(&rows, tol);
    let licq = rank == rows.nrows();

    let grad_f = fj.gradient_vector();
    let columns = rows.transpose();
    let (mut coeffs, mut residual) = solve_multipliers(&columns, &grad_f, tol);

    let np = hj.len();
    let nq = act.q0.len();
    let negative_mu = (0..nq).any(|k| coeffs[np + k] < -tol.tol_strict);
    if !licq && negative_mu {
        // Non-unique multipliers: look for a sign-feasible solution before giving up.
        let nonneg: Vec<bool> = (0..columns.ncols()).map(|j| j >= np && j < np + nq).collect();
        let (signed, r) = solve_multipliers_signed(&columns, &grad_f, &nonneg, tol);
        if residual_ok(r, grad_f.norm(), tol) {
            coeffs = signed;
            residual = r;
        }
    }
    let multipliers = MMultipliers {
        lambda: coeffs.rows(0, np).iter().cloned().collect(),
        mu: act.q0.iter().enumerate().map(|(k, &q)| (q, coeffs[np + k])).collect(),
        gamma: act
            .i0
            .iter()
            .enumerate()
            .map(|(k, &i)| (i, coeffs[np + nq + k]))
            .collect(),
    };

    let signs_ok = multipliers.mu.values().all(|&m| m >= -tol.tol_strict);
    let equation_ok = residual_ok(residual, grad_f.norm(), tol);
    let stationary = equation_ok && signs_ok;

    // D²L = D²f − Σ λ_p D²h_p − Σ μ_q D²g_q; the γ-terms are linear.
    let mut hess = fj.hessian();
    for (lam, j) in multipliers.lambda.iter().zip(&hj) {
        hess -= j.hessian() * *lam;
    }
    for (&q, &mu) in &multipliers.mu {
        hess -= gj[q].hessian() * mu;
    }
    let inertia = restricted_inertia(&hess, &tangent, tol);

    let ndm = NdmFlags {
        ndm1: licq,
        ndm2: multipliers.mu.values().all(|&m| m > tol.tol_strict),
        ndm3: act.x_norm0 == pr.s || multipliers.gamma.values().all(|g| g.abs() > tol.tol_strict),
        ndm4: inertia.zero == 0,
    };

    let quadratic_index = inertia.neg;
    let sparsity_index = pr.s - act.x_norm0;
    let degenerate_reason = if !equation_ok {
        Some(format!("not stationary: residual {residual:.3e}"))
    } else if !signs_ok {
        Some("not stationary: negative inequality multiplier".to_string())
    } else {
        ndm.first_failure().map(str::to_string)
    };
    let m_index = (stationary && ndm.all()).then_some(quadratic_index + sparsity_index);

    Ok(MCertificate {
        point: x.to_vec(),
        feasible,
        stationary,
        activity: act,
        multipliers,
        multipliers_unique: licq,
        residual,
        ndm,
        inertia,
        tangent_dim: tangent.ncols(),
        quadratic_index,
        sparsity_index,
        m_index,
        degenerate_reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    /// `(x1-1)^2 + (x2-1)^2`, n = 2, s = 1.
    fn both_shifted() -> Problem {
        Problem::parse(2, 1, "(x1-1)^2 + (x2-1)^2", &[], &[]).unwrap()
    }

    /// `(x1-1)^2 + x2^2`, n = 2, s = 1.
    fn one_shifted() -> Problem {
        Problem::parse(2, 1, "(x1-1)^2 + x2^2", &[], &[]).unwrap()
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            Problem::parse(2, 2, "x1", &[], &[]).unwrap_err(),
            ModelError::InvalidSparsity { n: 2, s: 2 }
        );
        assert!(matches!(
            Problem::parse(2, 1, "x1", &["x3"], &[]).unwrap_err(),
            ModelError::Parse { .. }
        ));
        let err = Problem::new(2, 1, Expr::var(0), vec![], vec![Expr::var(4)]).unwrap_err();
        assert_eq!(
            err,
            ModelError::VariableOutOfRange {
                which: "g1".into(),
                index: 5,
                n: 2
            }
        );
        assert_eq!(Problem::parse(0, 0, "1", &[], &[]).unwrap_err(), ModelError::ZeroDimension);
    }

    #[test]
    fn feasibility_examples() {
        let pr = both_shifted();
        let (ok, act) = check_feasible(&pr, &[1.0, 0.0], &tol()).unwrap();
        assert!(ok);
        assert_eq!(act.i0, vec![1]);
        assert!(act.q0.is_empty());
        let (ok, act) = check_feasible(&pr, &[1.0, 1.0], &tol()).unwrap();
        assert!(!ok);
        assert_eq!(act.x_norm0, 2);
        let (ok, act) = check_feasible(&pr, &[0.0, 0.0], &tol()).unwrap();
        assert!(ok);
        assert_eq!(act.i0, vec![0, 1]);
        assert!(check_feasible(&pr, &[0.0], &tol()).is_err());
    }

    #[test]
    fn activity_boundary_counts_as_active() {
        let pr = Problem::parse(2, 1, "x1", &[], &["x1 + x2"]).unwrap();
        let t = tol();
        let (_, act) = check_feasible(&pr, &[t.tol_act, 0.0], &t).unwrap();
        assert_eq!(act.i0, vec![0, 1]);
        assert_eq!(act.q0, vec![0]);
    }

    #[test]
    fn licq_examples() {
        assert!(check_cc_licq(&both_shifted(), &[0.0, 0.0], &tol()).unwrap());
        let dup = Problem::parse(2, 1, "x1^2", &["x1"], &[]).unwrap();
        assert!(!check_cc_licq(&dup, &[0.0, 0.0], &tol()).unwrap());
        assert!(check_cc_licq(&one_shifted(), &[0.0, 0.0], &tol()).unwrap());
    }

    #[test]
    fn origin_of_both_shifted_is_saddle() {
        let c = certify_m(&both_shifted(), &[0.0, 0.0], &tol()).unwrap();
        assert!(c.stationary && c.nondegenerate());
        assert_eq!(c.multipliers.gamma[&0], -2.0);
        assert_eq!(c.multipliers.gamma[&1], -2.0);
        assert_eq!(c.tangent_dim, 0);
        assert_eq!((c.quadratic_index, c.sparsity_index, c.m_index), (0, 1, Some(1)));
    }

    #[test]
    fn axis_point_is_minimizer() {
        let c = certify_m(&both_shifted(), &[1.0, 0.0], &tol()).unwrap();
        assert!(c.nondegenerate());
        assert!((c.multipliers.gamma[&1] + 2.0).abs() < 1e-12);
        assert_eq!(c.tangent_dim, 1);
        assert_eq!(c.inertia, Inertia { neg: 0, zero: 0, pos: 1 });
        assert_eq!(c.m_index, Some(0));
    }

    #[test]
    fn vanishing_gamma_breaks_ndm3() {
        let c = certify_m(&one_shifted(), &[0.0, 0.0], &tol()).unwrap();
        assert!(c.stationary);
        assert_eq!(c.multipliers.gamma[&0], -2.0);
        assert_eq!(c.multipliers.gamma[&1], 0.0);
        assert!(c.ndm.ndm1 && c.ndm.ndm2 && !c.ndm.ndm3 && c.ndm.ndm4);
        assert_eq!(c.degenerate_reason.as_deref(), Some("NDM3"));
        assert_eq!(c.m_index, None);
    }

    #[test]
    fn non_stationary_and_infeasible() {
        let c = certify_m(&both_shifted(), &[2.0, 0.0], &tol()).unwrap();
        assert!(c.feasible && !c.stationary);
        assert!(c.residual > 1.0);
        assert!(c.degenerate_reason.unwrap().starts_with("not stationary"));
        let c = certify_m(&both_shifted(), &[1.0, 1.0], &tol()).unwrap();
        assert!(!c.feasible && !c.stationary);
    }

    #[test]
    fn inequality_sign_conditions() {
        // min (x1+1)^2 s.t. x1 >= 0: μ = 2 at x = 0 but x1 = 0 is also in I0,
        // so use a constraint not aligned with a coordinate.
        let pr = Problem::parse(2, 1, "(x1 + 1)^2 + (x2 + 1)^2", &[], &["x1 + x2 + 1"]).unwrap();
        // x = (-1, 0): g = 0 active, support {1}
        let c = certify_m(&pr, &[-1.0, 0.0], &tol()).unwrap();
        assert!(c.stationary);
        assert_eq!(c.activity.q0, vec![0]);
        // ∇f = (0, 2) = μ (1,1) + γ2 e2 → μ = 0 → NDM2 fails
        assert!(c.multipliers.mu[&0].abs() < 1e-12);
        assert!(!c.ndm.ndm2);

        let pr = Problem::parse(2, 1, "(x1 - 2)^2 + x2^2", &[], &["1 - x1"]).unwrap();
        let c = certify_m(&pr, &[1.0, 0.0], &tol()).unwrap();
        // ∇f = (-2, 0) = μ (-1, 0) + γ e2 → μ = 2 > 0
        assert!(c.stationary && c.nondegenerate());
        assert!((c.multipliers.mu[&0] - 2.0).abs() < 1e-12);

        let pr = Problem::parse(2, 1, "x1^2 + x2^2", &[], &["x1 - 1"]).unwrap();
        let c = certify_m(&pr, &[1.0, 0.0], &tol()).unwrap();
        assert!(c.stationary);
        let pr = Problem::parse(2, 1, "-(x1^2)", &[], &["x1 - 1"]).unwrap();
        let c = certify_m(&pr, &[1.0, 0.0], &tol()).unwrap();
        // ∇f = (-2, 0) = μ (1, 0) → μ = -2 < 0
        assert!(!c.stationary);
    }

    #[test]
    fn equality_hessian_enters_lagrangian() {
        // min x2 on the circle x1^2 + x2^2 = 1 with s = 1: point (0, -1)
        let pr = Problem::parse(2, 1, "x2", &["x1^2 + x2^2 - 1"], &[]).unwrap();
        let c = certify_m(&pr, &[0.0, -1.0], &tol()).unwrap();
        assert!(c.stationary);
        // ∇f = (0,1) = λ (0,-2) + γ1 e1 → λ = -1/2, γ1 = 0, but ‖x‖₀ = s
        assert!((c.multipliers.lambda[0] + 0.5).abs() < 1e-12);
        assert!(c.nondegenerate());
        // tangent is trivial: e1 and ∇h = (0,-2) span R²
        assert_eq!(c.tangent_dim, 0);
        assert_eq!(c.m_index, Some(0));
    }

    #[test]
    fn dependent_rows_keep_sign_feasible_multipliers() {
        // g = x1 duplicates the coordinate row e1 at (0, 1); the minimum-norm
        // split gives μ = -1 but μ = 0, γ1 = -2 is valid
        let pr = Problem::parse(2, 1, "(x1-1)^2 + (x2-1)^2", &[], &["x1"]).unwrap();
        let c = certify_m(&pr, &[0.0, 1.0], &tol()).unwrap();
        assert!(c.stationary);
        assert!(!c.multipliers_unique);
        assert!(c.multipliers.mu[&0] >= 0.0);
        assert!((c.multipliers.mu[&0] + c.multipliers.gamma[&0] + 2.0).abs() < 1e-10);
        assert_eq!(c.degenerate_reason.as_deref(), Some("NDM1"));
        // flipping g changes nothing since γ is free
        let pr = Problem::parse(2, 1, "(x1-1)^2 + (x2-1)^2", &[], &["-x1"]).unwrap();
        assert!(certify_m(&pr, &[0.0, 1.0], &tol()).unwrap().stationary);
    }
}
