//! Brute-force enumeration of stationary points on small instances.
//!
//! For quadratic objectives with affine constraints every stationary point
//! solves a linear system determined by its support and active set, so
//! enumerating those patterns is exhaustive. The T-side uses the fact that
//! at T-stationary points of `R(c, ε)` the vector `y` is fixed by a pivot
//! and an upper set. Smooth non-quadratic instances fall back to damped
//! Newton from a grid of starts.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ccop::{certify_m, check_feasible, CertError, MCertificate, Problem};
use crate::expr::{EvalError, Jet2};
use crate::numkern::{rank, solve_multipliers, Tolerances};
use crate::regmpoc::{certify_t, RegularizedProblem, TCertificate};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("{which} is not {required}; use the Newton census instead")]
    NotQuadratic { which: String, required: &'static str },
    #[error(transparent)]
    Cert(#[from] CertError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// How one side of a census was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SideStatus {
    NotRun,
    /// Exhaustive pattern enumeration.
    Complete,
    /// Sampling or multistart; points may be missing.
    Partial,
}

impl SideStatus {
    pub fn is_complete(self) -> bool {
        self == SideStatus::Complete
    }
}

/// Stationary points found on one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusReport {
    pub instance_id: String,
    pub m_side: SideStatus,
    pub t_side: SideStatus,
    /// Sorted lexicographically by point.
    pub m_points: Vec<MCertificate>,
    /// Sorted lexicographically by `(x, y)`.
    pub t_points: Vec<TCertificate>,
    /// Points with a defined M-index, by index.
    pub m_by_index: BTreeMap<usize, usize>,
    /// Points with a defined T-index, by index.
    pub t_by_index: BTreeMap<usize, usize>,
    pub m_without_index: usize,
    pub t_without_index: usize,
    /// At least one side ran and every side that ran is exhaustive.
    pub complete: bool,
    /// Patterns whose linear system was singular.
    pub skipped_patterns: usize,
    /// Nearby points with different indices that were not merged.
    pub review: Vec<String>,
}

fn lex(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

fn near(a: &[f64], b: &[f64], radius: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= radius)
}

impl CensusReport {
    pub fn new(instance_id: String) -> CensusReport {
        CensusReport {
            instance_id,
            m_side: SideStatus::NotRun,
            t_side: SideStatus::NotRun,
            m_points: Vec::new(),
            t_points: Vec::new(),
            m_by_index: BTreeMap::new(),
            t_by_index: BTreeMap::new(),
            m_without_index: 0,
            t_without_index: 0,
            complete: false,
            skipped_patterns: 0,
            review: Vec::new(),
        }
    }

    /// Combine the two sides of one instance.
    pub fn merge(mut self, other: CensusReport) -> CensusReport {
        if other.m_side != SideStatus::NotRun {
            self.m_side = other.m_side;
            self.m_points = other.m_points;
        }
        if other.t_side != SideStatus::NotRun {
            self.t_side = other.t_side;
            self.t_points = other.t_points;
        }
        self.skipped_patterns += other.skipped_patterns;
        self.review.extend(other.review);
        self.finish();
        self
    }

    fn finish(&mut self) {
        self.m_points.sort_by(|a, b| lex(&a.point, &b.point));
        self.t_points
            .sort_by(|a, b| lex(&a.x, &b.x).then_with(|| lex(&a.y, &b.y)));
        self.m_by_index.clear();
        self.t_by_index.clear();
        self.m_without_index = 0;
        self.t_without_index = 0;
        for m in &self.m_points {
            match m.m_index {
                Some(k) => *self.m_by_index.entry(k).or_default() += 1,
                None => self.m_without_index += 1,
            }
        }
        for t in &self.t_points {
            match t.t_index {
                Some(k) => *self.t_by_index.entry(k).or_default() += 1,
                None => self.t_without_index += 1,
            }
        }
        let sides = [self.m_side, self.t_side];
        self.complete = sides.iter().any(|&s| s != SideStatus::NotRun)
            && sides
                .iter()
                .all(|&s| s == SideStatus::NotRun || s == SideStatus::Complete);
    }

    fn insert_m(&mut self, cert: MCertificate, radius: f64) {
        if let Some(old) = self.m_points.iter().find(|m| near(&m.point, &cert.point, radius)) {
            if old.m_index != cert.m_index {
                self.review.push(format!(
                    "M-points {:?} and {:?} coincide with indices {:?} and {:?}",
                    old.point, cert.point, old.m_index, cert.m_index
                ));
            }
            return;
        }
        self.m_points.push(cert);
    }

    fn insert_t(&mut self, cert: TCertificate, radius: f64) {
        if let Some(old) = self
            .t_points
            .iter()
            .find(|t| near(&t.x, &cert.x, radius) && near(&t.y, &cert.y, radius))
        {
            if old.t_index != cert.t_index {
                self.review.push(format!(
                    "T-points ({:?}, {:?}) and ({:?}, {:?}) coincide with indices {:?} and {:?}",
                    old.x, old.y, cert.x, cert.y, old.t_index, cert.t_index
                ));
            }
            return;
        }
        self.t_points.push(cert);
    }
}

/// Stable identifier derived from the problem data.
pub fn instance_id(pr: &Problem) -> String {
    let mut hasher = DefaultHasher::new();
    pr.objective().to_string().hash(&mut hasher);
    for e in pr.equalities().iter().chain(pr.inequalities()) {
        e.to_string().hash(&mut hasher);
    }
    format!("n{}-s{}-{:016x}", pr.n(), pr.s(), hasher.finish())
}

/// Coefficients of a quadratic objective and affine constraints.
struct QuadData {
    q: DMatrix<f64>,
    b: DVector<f64>,
    h: Vec<(Vec<f64>, f64)>,
    g: Vec<(Vec<f64>, f64)>,
}

fn quadratic_data(pr: &Problem) -> Result<QuadData, OracleError> {
    let within = |d: Option<u32>, max: u32| d.is_some_and(|d| d <= max);
    if !within(pr.objective().polynomial_degree(), 2) {
        return Err(OracleError::NotQuadratic {
            which: "f".into(),
            required: "quadratic",
        });
    }
    for (name, list) in [("h", pr.equalities()), ("g", pr.inequalities())] {
        if let Some(p) = list.iter().position(|e| !within(e.polynomial_degree(), 1)) {
            return Err(OracleError::NotQuadratic {
                which: format!("{name}{}", p + 1),
                required: "affine",
            });
        }
    }
    let origin = vec![0.0; pr.n()];
    let fj = pr.objective().eval2(&origin)?;
    let affine = |list: &[crate::expr::Expr]| -> Result<Vec<(Vec<f64>, f64)>, EvalError> {
        list.iter()
            .map(|e| e.eval2(&origin).map(|j| (j.gradient().to_vec(), j.value())))
            .collect()
    };
    Ok(QuadData {
        q: fj.hessian(),
        b: fj.gradient_vector(),
        h: affine(pr.equalities())?,
        g: affine(pr.inequalities())?,
    })
}

fn supports(n: usize, s: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..=s).flat_map(move |k| (0..n).combinations(k))
}

fn push_candidate(out: &mut Vec<Vec<f64>>, x: Vec<f64>, radius: f64) {
    if !out.iter().any(|c| near(c, &x, radius)) {
        out.push(x);
    }
}

/// Feasible solutions of every (support, active set) linear KKT system,
/// with the number of singular patterns.
fn quadratic_candidates(pr: &Problem, data: &QuadData, tol: &Tolerances) -> Result<(Vec<Vec<f64>>, usize), OracleError> {
    let n = pr.n();
    let p = data.h.len();
    let mut out = Vec::new();
    let mut skipped = 0;
    for support in supports(n, pr.s()) {
        let off: Vec<usize> = (0..n).filter(|i| !support.contains(i)).collect();
        for active in (0..data.g.len()).powerset() {
            let size = n + p + active.len() + off.len();
            let mut k = DMatrix::zeros(size, size);
            let mut rhs = DVector::zeros(size);
            k.view_mut((0, 0), (n, n)).copy_from(&data.q);
            rhs.rows_mut(0, n).copy_from(&(-&data.b));
            let mut col = n;
            let mut row = n;
            for (a, c0) in data.h.iter().chain(active.iter().map(|&q| &data.g[q])) {
                for i in 0..n {
                    k[(i, col)] = -a[i];
                    k[(row, i)] = a[i];
                }
                rhs[row] = -c0;
                col += 1;
                row += 1;
            }
            for &i in &off {
                k[(i, col)] = -1.0;
                k[(row, i)] = 1.0;
                col += 1;
                row += 1;
            }
            if rank(&k, tol) < size {
                log::debug!("singular pattern: support {support:?}, active {active:?}");
                skipped += 1;
                continue;
            }
            let (z, _) = solve_multipliers(&k, &rhs, tol);
            let mut x: Vec<f64> = z.rows(0, n).iter().cloned().collect();
            for &i in &off {
                x[i] = 0.0;
            }
            if check_feasible(pr, &x, tol)?.0 {
                push_candidate(&mut out, x, tol.dedup_radius());
            }
        }
    }
    Ok((out, skipped))
}

fn m_side(pr: &Problem, candidates: &[Vec<f64>], status: SideStatus, tol: &Tolerances) -> Result<CensusReport, OracleError> {
    let mut report = CensusReport::new(instance_id(pr));
    report.m_side = status;
    for x in candidates {
        let cert = certify_m(pr, x, tol)?;
        if cert.stationary {
            report.insert_m(cert, tol.dedup_radius());
        }
    }
    report.finish();
    Ok(report)
}

/// Per-axis grid resolution for sampling the y-polytope over `free` coordinates.
const SAMPLE_BUDGET: f64 = 4096.0;

fn t_side(rp: &RegularizedProblem, candidates: &[Vec<f64>], status: SideStatus, tol: &Tolerances) -> Result<CensusReport, OracleError> {
    if !rp.certifiable() {
        return Err(CertError::AssumptionViolated.into());
    }
    let pr = rp.base();
    let (n, s) = (pr.n(), pr.s());
    let mut report = CensusReport::new(instance_id(pr));
    report.t_side = if rp.admissible() { status } else { SideStatus::Partial };
    let radius = tol.dedup_radius();
    for x in candidates {
        let (_, act) = check_feasible(pr, x, tol)?;
        let i0 = act.i0;
        let mut ys = Vec::new();
        if rp.admissible() {
            for &pivot in &i0 {
                let rest: Vec<usize> = i0.iter().copied().filter(|&i| i != pivot).collect();
                for upper in rest.into_iter().combinations(n - s - 1) {
                    ys.push(rp.structured_y(pivot, &upper));
                }
            }
        } else {
            // No finite pattern space: sample a grid on the y-box over I0.
            let free = i0.len();
            if free == 0 {
                continue;
            }
            let per_axis = (SAMPLE_BUDGET.powf(1.0 / free as f64).floor() as usize).clamp(2, 5);
            let levels: Vec<f64> = (0..per_axis)
                .map(|j| rp.upper() * j as f64 / (per_axis - 1) as f64)
                .collect();
            for values in (0..free).map(|_| levels.iter().copied()).multi_cartesian_product() {
                let mut y = vec![0.0; n];
                for (&i, v) in i0.iter().zip(values) {
                    y[i] = v;
                }
                if y.iter().sum::<f64>() >= (n - s) as f64 - tol.tol_feas {
                    ys.push(y);
                }
            }
        }
        for y in ys {
            let cert = certify_t(rp, x, &y, tol)?;
            if cert.stationary {
                report.insert_t(cert, radius);
            }
        }
    }
    report.finish();
    Ok(report)
}

/// Exhaustive M-side census of a quadratic-affine instance.
pub fn census_quadratic(pr: &Problem, tol: &Tolerances) -> Result<CensusReport, OracleError> {
    let data = quadratic_data(pr)?;
    let (candidates, skipped) = quadratic_candidates(pr, &data, tol)?;
    let mut report = m_side(pr, &candidates, SideStatus::Complete, tol)?;
    report.skipped_patterns = skipped;
    Ok(report)
}

/// Exhaustive T-side census of `R(c, ε)` over a quadratic-affine base.
///
/// With inadmissible parameters (override set) the y-polytope is sampled
/// instead and the side is reported partial.
pub fn census_t_quadratic(rp: &RegularizedProblem, tol: &Tolerances) -> Result<CensusReport, OracleError> {
    let data = quadratic_data(rp.base())?;
    let (candidates, skipped) = quadratic_candidates(rp.base(), &data, tol)?;
    let mut report = t_side(rp, &candidates, SideStatus::Complete, tol)?;
    report.skipped_patterns = skipped;
    Ok(report)
}

/// Multistart box: `per_axis` equally spaced values in `[lower, upper]` per coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub per_axis: usize,
    pub lower: f64,
    pub upper: f64,
}

impl Grid {
    fn axis(&self) -> Vec<f64> {
        match self.per_axis {
            0 => Vec::new(),
            1 => vec![0.5 * (self.lower + self.upper)],
            k => (0..k)
                .map(|j| self.lower + (self.upper - self.lower) * j as f64 / (k - 1) as f64)
                .collect(),
        }
    }
}

const NEWTON_MAX_ITER: usize = 100;
const NEWTON_MAX_HALVINGS: usize = 30;
const NEWTON_EXIT: f64 = 1e-13;

/// Residual and Jacobian of the reduced stationarity system for one pattern.
/// Unknowns are `x` on `support`, then λ, then μ on `active`.
fn pattern_system(
    pr: &Problem,
    support: &[usize],
    active: &[usize],
    u: &[f64],
) -> Result<(DVector<f64>, DMatrix<f64>), EvalError> {
    let n = pr.n();
    let k = support.len();
    let p = pr.equalities().len();
    let mut x = vec![0.0; n];
    for (j, &i) in support.iter().enumerate() {
        x[i] = u[j];
    }
    let fj = pr.objective().eval2(&x)?;
    let cons: Vec<Jet2> = pr
        .equalities()
        .iter()
        .chain(active.iter().map(|&q| &pr.inequalities()[q]))
        .map(|e| e.eval2(&x))
        .collect::<Result<_, _>>()?;
    let size = k + cons.len();
    let mut res = DVector::zeros(size);
    let mut jac = DMatrix::zeros(size, size);
    let mut hess = fj.hessian();
    for (r, c) in cons.iter().enumerate() {
        let m = u[k + r];
        hess -= c.hessian() * m;
    }
    for (a, &i) in support.iter().enumerate() {
        res[a] = fj.gradient()[i];
        for (b, &j) in support.iter().enumerate() {
            jac[(a, b)] = hess[(i, j)];
        }
        for (r, c) in cons.iter().enumerate() {
            res[a] -= u[k + r] * c.gradient()[i];
            jac[(a, k + r)] = -c.gradient()[i];
            jac[(k + r, a)] = c.gradient()[i];
        }
    }
    for (r, c) in cons.iter().enumerate() {
        res[k + r] = c.value();
    }
    debug_assert_eq!(size, k + p + active.len());
    Ok((res, jac))
}

fn newton(pr: &Problem, support: &[usize], active: &[usize], start: Vec<f64>, tol: &Tolerances) -> Option<Vec<f64>> {
    let mut u = start;
    let mut norm = pattern_system(pr, support, active, &u).ok()?.0.norm();
    for _ in 0..NEWTON_MAX_ITER {
        if norm <= NEWTON_EXIT {
            break;
        }
        let (res, jac) = pattern_system(pr, support, active, &u).ok()?;
        let (step, _) = solve_multipliers(&jac, &(-res), tol);
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..=NEWTON_MAX_HALVINGS {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            if let Ok((r, _)) = pattern_system(pr, support, active, &trial) {
                if r.norm() < norm {
                    u = trial;
                    norm = r.norm();
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if norm > tol.tol_feas {
        log::debug!("newton: no convergence on support {support:?}, active {active:?} (residual {norm:.3e})");
        return None;
    }
    let mut x = vec![0.0; pr.n()];
    for (j, &i) in support.iter().enumerate() {
        x[i] = u[j];
    }
    Some(x)
}

fn newton_candidates(pr: &Problem, grid: &Grid, tol: &Tolerances) -> Result<Vec<Vec<f64>>, OracleError> {
    let axis = grid.axis();
    let mut out = Vec::new();
    if axis.is_empty() {
        return Ok(out);
    }
    let p = pr.equalities().len();
    for support in supports(pr.n(), pr.s()) {
        let starts: Vec<Vec<f64>> = if support.is_empty() {
            vec![Vec::new()]
        } else {
            (0..support.len())
                .map(|_| axis.iter().copied())
                .multi_cartesian_product()
                .collect()
        };
        for active in (0..pr.inequalities().len()).powerset() {
            for start in &starts {
                let mut u = start.clone();
                u.resize(support.len() + p + active.len(), 0.0);
                if let Some(x) = newton(pr, &support, &active, u, tol) {
                    if check_feasible(pr, &x, tol)?.0 {
                        push_candidate(&mut out, x, tol.dedup_radius());
                    }
                }
            }
        }
    }
    Ok(out)
}

/// M-side census by damped Newton on each pattern from every grid start.
/// Never complete.
pub fn census_newton(pr: &Problem, grid: &Grid, tol: &Tolerances) -> Result<CensusReport, OracleError> {
    let candidates = newton_candidates(pr, grid, tol)?;
    m_side(pr, &candidates, SideStatus::Partial, tol)
}

/// T-side counterpart of [`census_newton`].
pub fn census_newton_t(rp: &RegularizedProblem, grid: &Grid, tol: &Tolerances) -> Result<CensusReport, OracleError> {
    let candidates = newton_candidates(rp.base(), grid, tol)?;
    t_side(rp, &candidates, SideStatus::Partial, tol)
}
