//! The regularized reformulation
//!
//! ```text
//! R(c, ε):  min f(x) + cᵀy  s.t.  h(x) = 0, g(x) >= 0,
//!           Σ y_i >= n − s,  x_i y_i = 0,  0 <= y_i <= 1 + ε
//! ```
//!
//! as a program with orthogonality-type constraints, and certification of
//! its T-stationary points (MPOC-LICQ, NDT1–NDT5, T-index).
//!
//! Setting `c = 0`, `ε = 0` gives the unregularized continuous
//! reformulation; its parameters are inadmissible, so certification only
//! runs with the override set.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::ccop::{residual_ok, CertError, ModelError, Problem};
use crate::expr::{EvalError, Expr, Jet2};
use crate::numkern::{
    rank_and_nullbasis, restricted_inertia, solve_multipliers, solve_multipliers_signed, Inertia, Tolerances,
};

/// A CCOP together with regularization parameters `c` and `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedProblem {
    base: Problem,
    c: Vec<f64>,
    eps: f64,
    admissible: bool,
    override_admissibility: bool,
}

/// `c` positive and pairwise distinct (gap above `tol_strict`), `0 < ε <= 1/(n − s)`.
fn admissible(n: usize, s: usize, c: &[f64], eps: f64, tol: &Tolerances) -> bool {
    let positive = c.iter().all(|&ci| ci > tol.tol_strict);
    let mut sorted = c.to_vec();
    sorted.sort_by(f64::total_cmp);
    let distinct = sorted.windows(2).all(|w| w[1] - w[0] > tol.tol_strict);
    let eps_ok = eps > 0.0 && eps <= 1.0 / (n - s) as f64;
    positive && distinct && eps_ok
}

impl RegularizedProblem {
    /// Builds `R(c, ε)`; the admissibility check uses `tol.tol_strict` as the
    /// minimum gap between components of `c`.
    pub fn new(base: Problem, c: Vec<f64>, eps: f64, tol: &Tolerances) -> Result<Self, ModelError> {
        base.check_len("c", &c)?;
        let admissible = c.iter().all(|v| v.is_finite())
            && eps.is_finite()
            && admissible(base.n(), base.s(), &c, eps, tol);
        Ok(RegularizedProblem {
            base,
            c,
            eps,
            admissible,
            override_admissibility: false,
        })
    }

    /// The unregularized reformulation (`c = 0`, `ε = 0`), override enabled.
    pub fn reformulation(base: Problem) -> Self {
        let n = base.n();
        RegularizedProblem {
            base,
            c: vec![0.0; n],
            eps: 0.0,
            admissible: false,
            override_admissibility: true,
        }
    }

    pub fn with_override(mut self, on: bool) -> Self {
        self.override_admissibility = on;
        self
    }

    pub fn base(&self) -> &Problem {
        &self.base
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn s(&self) -> usize {
        self.base.s()
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn upper(&self) -> f64 {
        1.0 + self.eps
    }

    /// Regularization parameters satisfy the standing assumption.
    pub fn admissible(&self) -> bool {
        self.admissible
    }

    pub fn override_set(&self) -> bool {
        self.override_admissibility
    }

    /// Certification may run: admissible, or explicitly overridden.
    pub fn certifiable(&self) -> bool {
        self.admissible || self.override_admissibility
    }

    /// The y-vector with `1 + ε` on `upper_set`, `1 − (n−s−1)ε` at `pivot`
    /// and zero elsewhere.
    pub fn structured_y(&self, pivot: usize, upper_set: &[usize]) -> Vec<f64> {
        let k = (self.n() - self.s() - 1) as f64;
        let mut y = vec![0.0; self.n()];
        for &i in upper_set {
            y[i] = 1.0 + self.eps;
        }
        y[pivot] = 1.0 - k * self.eps;
        y
    }
}

/// `R(c, ε)` with default tolerances for the admissibility check.
pub fn make_regularized(pr: Problem, c: Vec<f64>, eps: f64) -> Result<RegularizedProblem, ModelError> {
    RegularizedProblem::new(pr, c, eps, &Tolerances::default())
}

/// Index sets at a point `(x, y)` of `R(c, ε)`. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MpocActivity {
    /// `x_i = 0`, `y_i = 0`.
    pub a00: Vec<usize>,
    /// `x_i = 0`, `y_i > 0`.
    pub a01: Vec<usize>,
    /// `x_i ≠ 0`, `y_i = 0`.
    pub a10: Vec<usize>,
    /// `y_i` at its upper bound `1 + ε`.
    pub upper: Vec<usize>,
    /// Both `x_i` and `y_i` nonzero (orthogonality violated).
    pub violated: Vec<usize>,
    /// `Σ y_i = n − s`.
    pub sum_active: bool,
    pub y_sum: f64,
    pub q0: Vec<usize>,
    pub h_violation: f64,
    pub g_min: f64,
}

fn jets(exprs: &[Expr], x: &[f64]) -> Result<Vec<Jet2>, EvalError> {
    exprs.iter().map(|e| e.eval2(x)).collect()
}

/// Feasibility of `(x, y)` for `R(c, ε)` with its index sets.
pub fn check_feasible_r(
    rp: &RegularizedProblem,
    x: &[f64],
    y: &[f64],
    tol: &Tolerances,
) -> Result<(bool, MpocActivity), CertError> {
    let pr = &rp.base;
    pr.check_len("x", x)?;
    pr.check_len("y", y)?;
    let n = pr.n();
    let mut h_violation = 0.0_f64;
    for h in pr.equalities() {
        h_violation = h_violation.max(h.value(x)?.abs());
    }
    let mut g_min = f64::INFINITY;
    let mut q0 = Vec::new();
    for (q, g) in pr.inequalities().iter().enumerate() {
        let v = g.value(x)?;
        g_min = g_min.min(v);
        if v.abs() <= tol.tol_act {
            q0.push(q);
        }
    }
    let mut act = MpocActivity {
        q0,
        h_violation,
        g_min,
        ..MpocActivity::default()
    };
    for i in 0..n {
        let xz = x[i].abs() <= tol.tol_act;
        let yz = y[i].abs() <= tol.tol_act;
        match (xz, yz) {
            (true, true) => act.a00.push(i),
            (true, false) => {
                act.a01.push(i);
                if (y[i] - rp.upper()).abs() <= tol.tol_act {
                    act.upper.push(i);
                }
            }
            (false, true) => act.a10.push(i),
            (false, false) => act.violated.push(i),
        }
    }
    let target = (n - pr.s()) as f64;
    act.y_sum = y.iter().sum();
    act.sum_active = (act.y_sum - target).abs() <= tol.tol_act;

    let feasible = h_violation <= tol.tol_feas
        && g_min >= -tol.tol_feas
        && act.y_sum >= target - tol.tol_feas
        && x.iter().zip(y).all(|(a, b)| (a * b).abs() <= tol.tol_feas)
        && y.iter().all(|&v| v >= -tol.tol_feas && v <= rp.upper() + tol.tol_feas);
    Ok((feasible, act))
}

/// Constraint vectors in ℝ²ⁿ, one per row, in multiplier order:
/// λ, μ₁, μ₂, μ₃ (if the sum is active), σ₁, σ₂, ϱ₁, ϱ₂.
fn mpoc_rows(n: usize, hj: &[Jet2], gj: &[Jet2], act: &MpocActivity) -> DMatrix<f64> {
    let k = hj.len()
        + act.q0.len()
        + act.upper.len()
        + usize::from(act.sum_active)
        + act.a01.len()
        + act.a10.len()
        + 2 * act.a00.len();
    let mut a = DMatrix::zeros(k, 2 * n);
    let mut r = 0;
    for j in hj {
        a.view_mut((r, 0), (1, n)).copy_from_slice(j.gradient());
        r += 1;
    }
    for &q in &act.q0 {
        a.view_mut((r, 0), (1, n)).copy_from_slice(gj[q].gradient());
        r += 1;
    }
    for &i in &act.upper {
        a[(r, n + i)] = 1.0;
        r += 1;
    }
    if act.sum_active {
        a.view_mut((r, n), (1, n)).fill(1.0);
        r += 1;
    }
    for &i in &act.a01 {
        a[(r, i)] = 1.0;
        r += 1;
    }
    for &i in &act.a10 {
        a[(r, n + i)] = 1.0;
        r += 1;
    }
    for &i in &act.a00 {
        a[(r, i)] = 1.0;
        r += 1;
    }
    for &i in &act.a00 {
        a[(r, n + i)] = 1.0;
        r += 1;
    }
    a
}

/// MPOC-LICQ at `(x, y)`.
pub fn check_mpoc_licq(rp: &RegularizedProblem, x: &[f64], y: &[f64], tol: &Tolerances) -> Result<bool, CertError> {
    let (_, act) = check_feasible_r(rp, x, y, tol)?;
    let pr = &rp.base;
    let hj = jets(pr.equalities(), x)?;
    let gj = jets(pr.inequalities(), x)?;
    let rows = mpoc_rows(pr.n(), &hj, &gj, &act);
    let (rank, _) = rank_and_nullbasis(&rows, tol);
    Ok(rank == rows.nrows())
}

/// Multipliers of the T-stationarity system. Map keys are 0-based indices.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TMultipliers {
    pub lambda: Vec<f64>,
    /// Active inequalities.
    pub mu1: BTreeMap<usize, f64>,
    /// Upper bounds `y_i <= 1 + ε` that are active.
    pub mu2: BTreeMap<usize, f64>,
    /// Sum constraint; fixed to 0 when the constraint is inactive.
    pub mu3: f64,
    /// On `a01`.
    pub sigma1: BTreeMap<usize, f64>,
    /// On `a10`.
    pub sigma2: BTreeMap<usize, f64>,
    /// x-branch on `a00`.
    pub rho1: BTreeMap<usize, f64>,
    /// y-branch on `a00`.
    pub rho2: BTreeMap<usize, f64>,
}

impl TMultipliers {
    /// Largest absolute difference over all entries; `∞` if the index sets differ.
    pub fn max_abs_diff(&self, other: &TMultipliers) -> f64 {
        fn maps(a: &BTreeMap<usize, f64>, b: &BTreeMap<usize, f64>) -> f64 {
            if a.len() != b.len() || a.keys().zip(b.keys()).any(|(x, y)| x != y) {
                return f64::INFINITY;
            }
            a.values().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        }
        if self.lambda.len() != other.lambda.len() {
            return f64::INFINITY;
        }
        let lam = self
            .lambda
            .iter()
            .zip(&other.lambda)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        [
            lam,
            maps(&self.mu1, &other.mu1),
            maps(&self.mu2, &other.mu2),
            (self.mu3 - other.mu3).abs(),
            maps(&self.sigma1, &other.sigma1),
            maps(&self.sigma2, &other.sigma2),
            maps(&self.rho1, &other.rho1),
            maps(&self.rho2, &other.rho2),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Which side of the biactive disjunction `ϱ₁ = 0 or ϱ₂ <= 0` holds.
/// Both branches are recorded when both hold within tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BiactiveBranches {
    pub rho1_zero: bool,
    pub rho2_nonpositive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct NdtFlags {
    pub ndt1: bool,
    pub ndt2: bool,
    pub ndt3: bool,
    pub ndt4: bool,
    pub ndt5: bool,
}

impl NdtFlags {
    /// NDT1–NDT4.
    pub fn core(&self) -> bool {
        self.ndt1 && self.ndt2 && self.ndt3 && self.ndt4
    }

    pub fn first_failure(&self) -> Option<&'static str> {
        [
            ("NDT1", self.ndt1),
            ("NDT2", self.ndt2),
            ("NDT3", self.ndt3),
            ("NDT4", self.ndt4),
            ("NDT5", self.ndt5),
        ]
        .into_iter()
        .find(|(_, ok)| !ok)
        .map(|(name, _)| name)
    }
}

/// Outcome of [`certify_t`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TCertificate {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub feasible: bool,
    pub stationary: bool,
    pub activity: MpocActivity,
    pub multipliers: TMultipliers,
    /// MPOC-LICQ holds. Otherwise the multipliers are the minimum-norm
    /// solution, or a sign-feasible one when that violates the sign conditions.
    pub multipliers_unique: bool,
    pub branches: BTreeMap<usize, BiactiveBranches>,
    pub residual: f64,
    pub ndt: NdtFlags,
    pub inertia: Inertia,
    pub tangent_dim: usize,
    pub quadratic_index: usize,
    pub biactive_index: usize,
    /// `QI + BI`, present only when NDT1–NDT4 hold.
    pub t_index: Option<usize>,
    pub degenerate_reason: Option<String>,
}

impl TCertificate {
    /// T-stationary with NDT1–NDT4.
    pub fn nondegenerate(&self) -> bool {
        self.feasible && self.stationary && self.ndt.core()
    }

    fn infeasible(x: &[f64], y: &[f64], activity: MpocActivity) -> TCertificate {
        TCertificate {
            x: x.to_vec(),
            y: y.to_vec(),
            feasible: false,
            stationary: false,
            activity,
            multipliers: TMultipliers::default(),
            multipliers_unique: false,
            branches: BTreeMap::new(),
            residual: f64::NAN,
            ndt: NdtFlags::default(),
            inertia: Inertia::default(),
            tangent_dim: 0,
            quadratic_index: 0,
            biactive_index: 0,
            t_index: None,
            degenerate_reason: Some("infeasible".into()),
        }
    }
}

fn decode(coeffs: &DVector<f64>, n_eq: usize, act: &MpocActivity) -> TMultipliers {
    let mut it = coeffs.iter().cloned();
    let lambda: Vec<f64> = it.by_ref().take(n_eq).collect();
    let mut take = |idx: &[usize]| -> BTreeMap<usize, f64> {
        idx.iter().map(|&i| (i, it.next().expect("column count"))).collect()
    };
    let mu1 = take(&act.q0);
    let mu2 = take(&act.upper);
    let mu3 = if act.sum_active { take(&[0])[&0] } else { 0.0 };
    let sigma1 = take(&act.a01);
    let sigma2 = take(&act.a10);
    let rho1 = take(&act.a00);
    let rho2 = take(&act.a00);
    TMultipliers {
        lambda,
        mu1,
        mu2,
        mu3,
        sigma1,
        sigma2,
        rho1,
        rho2,
    }
}

fn branch(m: &TMultipliers, i: usize, tol: &Tolerances) -> BiactiveBranches {
    BiactiveBranches {
        rho1_zero: m.rho1[&i].abs() <= tol.tol_strict,
        rho2_nonpositive: m.rho2[&i] <= tol.tol_strict,
    }
}

/// (bound and sum multipliers nonnegative, biactive disjunction holds).
fn sign_conditions(m: &TMultipliers, tol: &Tolerances) -> (bool, bool) {
    let signs = m
        .mu1
        .values()
        .chain(m.mu2.values())
        .chain(std::iter::once(&m.mu3))
        .all(|&v| v >= -tol.tol_strict);
    let disjunction = m.rho1.keys().all(|&i| {
        let b = branch(m, i, tol);
        b.rho1_zero || b.rho2_nonpositive
    });
    (signs, disjunction)
}

/// Largest biactive set for which every branch combination is tried.
const MAX_BRANCH_BITS: usize = 16;

/// For each choice of branch per biactive index (`ϱ₁ = 0` or `ϱ₂ <= 0`),
/// solve with sign constraints and return the first exact solution.
fn signed_search(
    columns: &DMatrix<f64>,
    target: &DVector<f64>,
    n_eq: usize,
    act: &MpocActivity,
    tol: &Tolerances,
) -> Option<(TMultipliers, f64)> {
    let nb = act.a00.len();
    if nb > MAX_BRANCH_BITS {
        log::warn!("biactive set of size {nb} too large for branch search");
        return None;
    }
    let n_mu = act.q0.len() + act.upper.len() + usize::from(act.sum_active);
    let rho1_start = n_eq + n_mu + act.a01.len() + act.a10.len();
    let rho2_start = rho1_start + nb;
    for mask in 0..(1usize << nb) {
        let mut g = columns.clone();
        let mut nonneg = vec![false; g.ncols()];
        for flag in nonneg.iter_mut().skip(n_eq).take(n_mu) {
            *flag = true;
        }
        for b in 0..nb {
            if mask & (1 << b) == 0 {
                g.column_mut(rho1_start + b).fill(0.0);
            } else {
                g.column_mut(rho2_start + b).neg_mut();
                nonneg[rho2_start + b] = true;
            }
        }
        let (mut z, r) = solve_multipliers_signed(&g, target, &nonneg, tol);
        if residual_ok(r, target.norm(), tol) {
            for b in 0..nb {
                if mask & (1 << b) != 0 {
                    z[rho2_start + b] = -z[rho2_start + b];
                }
            }
            return Some((decode(&z, n_eq, act), r));
        }
    }
    None
}

/// Certify T-stationarity, NDT1–NDT5 and the T-index at `(x, y)`.
///
/// Fails with [`CertError::AssumptionViolated`] unless the parameters are
/// admissible or the override is set.
pub fn certify_t(rp: &RegularizedProblem, x: &[f64], y: &[f64], tol: &Tolerances) -> Result<TCertificate, CertError> {
    if !rp.certifiable() {
        return Err(CertError::AssumptionViolated);
    }
    let (feasible, act) = check_feasible_r(rp, x, y, tol)?;
    if !feasible {
        return Ok(TCertificate::infeasible(x, y, act));
    }
    let pr = &rp.base;
    let n = pr.n();
    let fj = pr.objective().eval2(x)?;
    let hj = jets(pr.equalities(), x)?;
    let gj = jets(pr.inequalities(), x)?;

    let rows = mpoc_rows(n, &hj, &gj, &act);
    let (rank, tangent) = rank_and_nullbasis(&rows, tol);
    let licq = rank == rows.nrows();

    // The upper-bound multipliers enter the stationarity equation with a minus sign.
    let mut columns = rows.transpose();
    let mu2_start = hj.len() + act.q0.len();
    for k in 0..act.upper.len() {
        columns.column_mut(mu2_start + k).neg_mut();
    }
    let mut target = DVector::zeros(2 * n);
    target.rows_mut(0, n).copy_from_slice(fj.gradient());
    target.rows_mut(n, n).copy_from_slice(&rp.c);
    let (coeffs, mut residual) = solve_multipliers(&columns, &target, tol);
    let mut multipliers = decode(&coeffs, hj.len(), &act);
    let equation_ok = residual_ok(residual, target.norm(), tol);
    let (mut signs_ok, mut disjunction_ok) = sign_conditions(&multipliers, tol);

    if !licq && equation_ok && !(signs_ok && disjunction_ok) {
        // Non-unique multipliers: search the biactive branches for a
        // sign-feasible solution.
        if let Some((m, r)) = signed_search(&columns, &target, hj.len(), &act, tol) {
            multipliers = m;
            residual = r;
            (signs_ok, disjunction_ok) = (true, true);
        }
    }
    let stationary = equation_ok && signs_ok && disjunction_ok;

    let branches: BTreeMap<usize, BiactiveBranches> = act
        .a00
        .iter()
        .map(|&i| (i, branch(&multipliers, i, tol)))
        .collect();

    // Hessian of the Lagrangian: x-block from f, h, g; every y-term is linear.
    let mut hx = fj.hessian();
    for (lam, j) in multipliers.lambda.iter().zip(&hj) {
        hx -= j.hessian() * *lam;
    }
    for (&q, &mu) in &multipliers.mu1 {
        hx -= gj[q].hessian() * mu;
    }
    let mut hess = DMatrix::zeros(2 * n, 2 * n);
    hess.view_mut((0, 0), (n, n)).copy_from(&hx);
    let inertia = restricted_inertia(&hess, &tangent, tol);

    let ndt = NdtFlags {
        ndt1: licq,
        ndt2: multipliers
            .mu1
            .values()
            .chain(multipliers.mu2.values())
            .all(|&m| m > tol.tol_strict)
            && (!act.sum_active || multipliers.mu3 > tol.tol_strict),
        ndt3: act
            .a00
            .iter()
            .all(|i| multipliers.rho1[i].abs() > tol.tol_strict && multipliers.rho2[i] < -tol.tol_strict),
        ndt4: inertia.zero == 0,
        ndt5: act.a00.is_empty() || multipliers.sigma1.values().all(|s| s.abs() > tol.tol_strict),
    };

    let quadratic_index = inertia.neg;
    let biactive_index = act.a00.len();
    let t_index = (stationary && ndt.core()).then_some(quadratic_index + biactive_index);
    let degenerate_reason = if !equation_ok {
        Some(format!("not stationary: residual {residual:.3e}"))
    } else if !signs_ok {
        Some("not stationary: negative bound or sum multiplier".to_string())
    } else if !disjunction_ok {
        Some("not stationary: biactive sign condition violated".to_string())
    } else {
        ndt.first_failure().map(str::to_string)
    };

    Ok(TCertificate {
        x: x.to_vec(),
        y: y.to_vec(),
        feasible,
        stationary,
        activity: act,
        multipliers,
        multipliers_unique: licq,
        branches,
        residual,
        ndt,
        inertia,
        tangent_dim: tangent.ncols(),
        quadratic_index,
        biactive_index,
        t_index,
        degenerate_reason,
    })
}

/// Whether `y` has the shape every T-stationary point must have: `n−s−1`
/// components at `1+ε`, one at `1−(n−s−1)ε`, `s` zeros, and `Σ y = n − s`.
pub fn check_y_structure(rp: &RegularizedProblem, y: &[f64], tol: &Tolerances) -> bool {
    let (n, s) = (rp.n(), rp.s());
    if y.len() != n {
        return false;
    }
    let k = n - s - 1;
    let mut expected: Vec<f64> = std::iter::repeat_n(rp.upper(), k)
        .chain(std::iter::once(1.0 - k as f64 * rp.eps))
        .chain(std::iter::repeat_n(0.0, s))
        .collect();
    let mut actual = y.to_vec();
    expected.sort_by(f64::total_cmp);
    actual.sort_by(f64::total_cmp);
    let shape = expected.iter().zip(&actual).all(|(e, a)| (e - a).abs() <= tol.tol_act);
    let sum: f64 = y.iter().sum();
    shape && (sum - (n - s) as f64).abs() <= tol.tol_feas
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-10
    }

    fn one_shifted() -> Problem {
        Problem::parse(2, 1, "(x1-1)^2 + x2^2", &[], &[]).unwrap()
    }

    fn both_shifted() -> Problem {
        Problem::parse(2, 1, "(x1-1)^2 + (x2-1)^2", &[], &[]).unwrap()
    }

    #[test]
    fn admissibility() {
        let rp = make_regularized(one_shifted(), vec![0.3, 0.7], 0.5).unwrap();
        assert!(rp.admissible());
        let rp = make_regularized(one_shifted(), vec![0.5, 0.5], 0.5).unwrap();
        assert!(!rp.admissible());
        let rp = make_regularized(one_shifted(), vec![0.0, 0.0], 0.0).unwrap();
        assert!(!rp.admissible() && !rp.certifiable());
        assert!(rp.clone().with_override(true).certifiable());
        let rp = make_regularized(one_shifted(), vec![0.3, 0.7], 1.5).unwrap();
        assert!(!rp.admissible());
        let rp = make_regularized(one_shifted(), vec![-0.3, 0.7], 0.5).unwrap();
        assert!(!rp.admissible());
        assert!(matches!(
            make_regularized(one_shifted(), vec![0.3], 0.5),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn inadmissible_refuses_certification() {
        let rp = make_regularized(one_shifted(), vec![0.5, 0.5], 0.5).unwrap();
        assert_eq!(
            certify_t(&rp, &[0.0, 0.0], &[0.0, 1.0], &tol()).unwrap_err(),
            CertError::AssumptionViolated
        );
    }

    #[test]
    fn feasibility_and_index_sets() {
        let rp = make_regularized(one_shifted(), vec![0.3, 0.7], 0.5).unwrap();
        let (ok, act) = check_feasible_r(&rp, &[0.0, 0.0], &[0.0, 1.0], &tol()).unwrap();
        assert!(ok);
        assert_eq!((act.a00.clone(), act.a01.clone()), (vec![0], vec![1]));
        assert!(act.a10.is_empty() && act.upper.is_empty() && act.sum_active);

        let (ok, act) = check_feasible_r(&rp, &[1.0, 0.0], &[1.0, 0.0], &tol()).unwrap();
        assert!(!ok);
        assert_eq!(act.violated, vec![0]);

        let (ok, act) = check_feasible_r(&rp, &[0.0, 2.0], &[1.5, 0.0], &tol()).unwrap();
        assert!(ok);
        assert_eq!(act.a01, vec![0]);
        assert_eq!(act.a10, vec![1]);
        assert_eq!(act.upper, vec![0]);
        assert!(!act.sum_active);

        // sum too small, bound exceeded
        assert!(!check_feasible_r(&rp, &[0.0, 0.0], &[0.4, 0.4], &tol()).unwrap().0);
        assert!(!check_feasible_r(&rp, &[0.0, 0.0], &[1.6, 0.0], &tol()).unwrap().0);
    }

    #[test]
    fn licq_examples() {
        let rp = make_regularized(one_shifted(), vec![0.3, 0.7], 0.5).unwrap();
        assert!(check_mpoc_licq(&rp, &[0.0, 0.0], &[0.0, 1.0], &tol()).unwrap());
        let dup = Problem::parse(2, 1, "x1^2", &["x1 + x2", "2*x1 + 2*x2"], &[]).unwrap();
        let rp = make_regularized(dup, vec![0.3, 0.7], 0.5).unwrap();
        assert!(!check_mpoc_licq(&rp, &[0.0, 0.0], &[0.0, 1.0], &tol()).unwrap());
    }

    #[test]
    fn ndt5_failure_at_lifted_origin() {
        let rp = make_regularized(one_shifted(), vec![0.3, 0.7], 0.5).unwrap();
        let t = certify_t(&rp, &[0.0, 0.0], &[0.0, 1.0], &tol()).unwrap();
        assert!(t.stationary);
        let m = &t.multipliers;
        assert!(close(m.mu3, 0.7));
        assert!(close(m.sigma1[&1], 0.0));
        assert!(close(m.rho1[&0], -2.0));
        assert!(close(m.rho2[&0], -0.4));
        assert!(t.ndt.ndt1 && t.ndt.ndt2 && t.ndt.ndt3 && t.ndt.ndt4 && !t.ndt.ndt5);
        assert_eq!(t.degenerate_reason.as_deref(), Some("NDT5"));
        assert_eq!((t.quadratic_index, t.biactive_index, t.t_index), (0, 1, Some(1)));
        assert!(t.nondegenerate());
        assert_eq!(
            t.branches[&0],
            BiactiveBranches {
                rho1_zero: false,
                rho2_nonpositive: true
            }
        );
    }

    #[test]
    fn lifted_points_of_both_shifted() {
        let rp = make_regularized(both_shifted(), vec![0.3, 0.7], 0.5).unwrap();
        let t = certify_t(&rp, &[0.0, 0.0], &[0.0, 1.0], &tol()).unwrap();
        assert!(t.nondegenerate() && t.ndt.ndt5);
        assert_eq!(t.t_index, Some(1));
        let t = certify_t(&rp, &[1.0, 0.0], &[0.0, 1.0], &tol()).unwrap();
        assert!(t.nondegenerate());
        assert_eq!(t.t_index, Some(0));
        // wrong pivot: ϱ₂ = c2 − c1 > 0 and ϱ₁ = −2 ≠ 0
        let t = certify_t(&rp, &[0.0, 0.0], &[1.0, 0.0], &tol()).unwrap();
        assert!(!t.stationary);
    }

    #[test]
    fn unregularized_points_are_degenerate() {
        let rp = RegularizedProblem::reformulation(both_shifted());
        for (x, y) in [
            ([1.0, 0.0], [0.0, 1.0]),
            ([0.0, 1.0], [1.0, 0.0]),
            ([0.0, 0.0], [0.5, 0.5]),
            ([0.0, 0.0], [1.0, 1.0]),
            ([0.0, 0.0], [0.0, 1.0]),
        ] {
            let t = certify_t(&rp, &x, &y, &tol()).unwrap();
            assert!(t.stationary, "{x:?} {y:?}");
            assert!(!t.nondegenerate(), "{x:?} {y:?}");
        }
    }

    #[test]
    fn y_structure() {
        let p2 = Problem::parse(2, 1, "x1", &[], &[]).unwrap();
        let rp = make_regularized(p2, vec![0.3, 0.7], 0.5).unwrap();
        assert!(check_y_structure(&rp, &[0.0, 1.0], &tol()));
        assert!(!check_y_structure(&rp, &[0.5, 0.5], &tol()));
        let p3 = Problem::parse(3, 1, "x1", &[], &[]).unwrap();
        let rp = make_regularized(p3, vec![0.1, 0.2, 0.3], 0.4).unwrap();
        assert!(check_y_structure(&rp, &[1.4, 0.6, 0.0], &tol()));
        assert!(check_y_structure(&rp, &[0.0, 1.4, 0.6], &tol()));
        assert!(!check_y_structure(&rp, &[1.0, 1.0, 0.0], &tol()));
        assert_eq!(rp.structured_y(1, &[2]), vec![0.0, 0.6, 1.4]);
    }

    #[test]
    fn inactive_sum_leaves_y_directions_free() {
        let rp = make_regularized(both_shifted(), vec![0.3, 0.7], 0.5).unwrap();
        // interior y with inactive sum: μ₃ fixed to zero, y-rows force c = 0
        let t = certify_t(&rp, &[0.0, 0.0], &[0.7, 0.7], &tol()).unwrap();
        assert!(t.feasible && !t.stationary);
        assert_eq!(t.multipliers.mu3, 0.0);
    }
}
