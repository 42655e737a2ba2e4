//! Correspondence between M-stationary points of a CCOP and T-stationary
//! points of `R(c, ε)`: lifting, projection and the counting checks.

use std::collections::BTreeMap;

use itertools::Itertools;
use serde::Serialize;
use thiserror::Error;

use crate::ccop::{certify_m, CertError, MCertificate};
use crate::numkern::Tolerances;
use crate::oracle::CensusReport;
use crate::regmpoc::{certify_t, RegularizedProblem, TCertificate, TMultipliers};

/// Closed-form and solved multipliers must agree to this accuracy, relative
/// to `max(1, largest multiplier magnitude)`.
pub const MULTIPLIER_AGREEMENT: f64 = 1e-8;

fn agreement_scale<'a>(values: impl Iterator<Item = &'a f64>) -> f64 {
    values.fold(1.0_f64, |acc, v| acc.max(v.abs()))
}

fn t_values(m: &TMultipliers) -> impl Iterator<Item = &f64> {
    m.lambda
        .iter()
        .chain(m.mu1.values())
        .chain(m.mu2.values())
        .chain(std::iter::once(&m.mu3))
        .chain(m.sigma1.values())
        .chain(m.sigma2.values())
        .chain(m.rho1.values())
        .chain(m.rho2.values())
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BridgeError {
    #[error(transparent)]
    Cert(#[from] CertError),
    #[error("point is not M-stationary ({0})")]
    NotMStationary(String),
    #[error("point is not T-stationary ({0})")]
    NotTStationary(String),
    #[error("largest c over the vanishing coordinates is attained more than once; no pivot can be chosen")]
    AmbiguousPivot,
    #[error("only {zeros} vanishing coordinates, at least {needed} required")]
    TooFewZeros { zeros: usize, needed: usize },
    #[error("binomial({n}, {k}) does not fit in 64 bits")]
    BinomialOverflow { n: u64, k: u64 },
}

/// Exact `n choose k`; 0 when `k > n`.
pub fn binomial(n: u64, k: u64) -> Result<u64, BridgeError> {
    if k > n {
        return Ok(0);
    }
    let k_small = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k_small {
        // acc * (n - i) is divisible by i + 1 at every step
        acc = acc
            .checked_mul(u128::from(n - i))
            .ok_or(BridgeError::BinomialOverflow { n, k })?
            / u128::from(i + 1);
    }
    u64::try_from(acc).map_err(|_| BridgeError::BinomialOverflow { n, k })
}

/// Number of T-points above an M-point with `x_norm0` nonzeros:
/// `binom(n − ‖x‖₀ − 1, n − s − 1)`.
pub fn companion_count(n: usize, s: usize, x_norm0: usize) -> Result<u64, BridgeError> {
    if x_norm0 >= n {
        return Ok(0);
    }
    binomial((n - x_norm0 - 1) as u64, (n - s - 1) as u64)
}

/// One T-point above a lifted M-point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Companion {
    /// Coordinates where `y = 1 + ε` (0-based, ascending).
    pub upper_set: Vec<usize>,
    pub y: Vec<f64>,
    /// Multipliers from the explicit construction.
    pub closed_form: TMultipliers,
    /// Certificate from the independent solve.
    pub certificate: TCertificate,
    /// Largest absolute deviation between closed-form and solved multipliers.
    pub multiplier_gap: f64,
    pub multipliers_agree: bool,
}

/// All lifts of an M-stationary point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftSet {
    pub base_point: Vec<f64>,
    pub base: MCertificate,
    /// Index in `I0` with the largest `c` (0-based).
    pub pivot: usize,
    pub expected_count: u64,
    /// The count is only asserted for nondegenerate base points.
    pub count_applicable: bool,
    pub companions: Vec<Companion>,
}

impl LiftSet {
    pub fn subsets(&self) -> impl Iterator<Item = &[usize]> {
        self.companions.iter().map(|c| c.upper_set.as_slice())
    }

    /// `Some(matches)` when the count applies.
    pub fn count_ok(&self) -> Option<bool> {
        self.count_applicable
            .then_some(self.companions.len() as u64 == self.expected_count)
    }
}

fn closed_form(rp: &RegularizedProblem, m: &MCertificate, pivot: usize, upper: &[usize]) -> TMultipliers {
    let c = rp.c();
    let cp = c[pivot];
    let mut out = TMultipliers {
        lambda: m.multipliers.lambda.clone(),
        mu1: m.multipliers.mu.clone(),
        mu3: cp,
        ..TMultipliers::default()
    };
    for &i in upper {
        out.mu2.insert(i, cp - c[i]);
    }
    for (&i, &g) in &m.multipliers.gamma {
        if i == pivot || upper.contains(&i) {
            out.sigma1.insert(i, g);
        } else {
            out.rho1.insert(i, g);
            out.rho2.insert(i, c[i] - cp);
        }
    }
    for i in (0..rp.n()).filter(|i| !m.multipliers.gamma.contains_key(i)) {
        out.sigma2.insert(i, c[i] - cp);
    }
    out
}

/// Enumerate every T-stationary companion of the M-stationary point `x`.
///
/// The pivot is the vanishing coordinate with the largest `c`; each subset
/// of the remaining vanishing coordinates of size `n − s − 1` gives one
/// companion, in lexicographic order.
pub fn lift(rp: &RegularizedProblem, x: &[f64], tol: &Tolerances) -> Result<LiftSet, BridgeError> {
    if !rp.certifiable() {
        return Err(CertError::AssumptionViolated.into());
    }
    let base = certify_m(rp.base(), x, tol)?;
    if !base.stationary {
        return Err(BridgeError::NotMStationary(
            base.degenerate_reason.clone().unwrap_or_default(),
        ));
    }
    let (n, s) = (rp.n(), rp.s());
    let i0 = &base.activity.i0;
    let needed = n - s;
    if i0.len() < needed {
        return Err(BridgeError::TooFewZeros {
            zeros: i0.len(),
            needed,
        });
    }
    let c = rp.c();
    let pivot = *i0
        .iter()
        .max_by(|&&a, &&b| c[a].total_cmp(&c[b]))
        .expect("I0 is nonempty");
    if i0
        .iter()
        .any(|&i| i != pivot && (c[i] - c[pivot]).abs() <= tol.tol_strict)
    {
        return Err(BridgeError::AmbiguousPivot);
    }
    let expected_count = companion_count(n, s, base.activity.x_norm0)?;

    let rest: Vec<usize> = i0.iter().copied().filter(|&i| i != pivot).collect();
    let mut companions = Vec::new();
    for upper_set in rest.into_iter().combinations(needed - 1) {
        let y = rp.structured_y(pivot, &upper_set);
        let certificate = certify_t(rp, x, &y, tol)?;
        let closed = closed_form(rp, &base, pivot, &upper_set);
        let multiplier_gap = closed.max_abs_diff(&certificate.multipliers);
        let scale = agreement_scale(t_values(&closed));
        companions.push(Companion {
            upper_set,
            y,
            closed_form: closed,
            certificate,
            multiplier_gap,
            multipliers_agree: multiplier_gap <= MULTIPLIER_AGREEMENT * scale,
        });
    }
    log::debug!("lift of {x:?}: {} companions, expected {expected_count}", companions.len());
    Ok(LiftSet {
        base_point: x.to_vec(),
        count_applicable: base.nondegenerate(),
        base,
        pivot,
        expected_count,
        companions,
    })
}

/// Result of projecting a T-stationary point onto the CCOP.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Projection {
    pub certificate: MCertificate,
    pub t_certificate: TCertificate,
    /// `γ_i = σ₁,ᵢ` on `a01`, `ϱ₁,ᵢ` on `a00`.
    pub mapped_gamma: BTreeMap<usize, f64>,
    /// Largest absolute deviation between mapped and solved M-multipliers.
    pub multiplier_gap: f64,
    pub multipliers_agree: bool,
    /// The T-point is nondegenerate including NDT5, so the M-point must be
    /// nondegenerate with the same index.
    pub transfer_applicable: bool,
    pub transfer_holds: Option<bool>,
}

fn gap_maps(a: &BTreeMap<usize, f64>, b: &BTreeMap<usize, f64>) -> f64 {
    if !a.keys().eq(b.keys()) {
        return f64::INFINITY;
    }
    a.values().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Certify the x-part of a T-stationary point as an M-point and compare
/// multipliers.
pub fn project(rp: &RegularizedProblem, x: &[f64], y: &[f64], tol: &Tolerances) -> Result<Projection, BridgeError> {
    let t = certify_t(rp, x, y, tol)?;
    if !t.stationary {
        return Err(BridgeError::NotTStationary(t.degenerate_reason.clone().unwrap_or_default()));
    }
    let m = certify_m(rp.base(), x, tol)?;
    let mapped_gamma: BTreeMap<usize, f64> = t
        .multipliers
        .sigma1
        .iter()
        .chain(&t.multipliers.rho1)
        .map(|(&i, &v)| (i, v))
        .collect();
    let lam_gap = if m.multipliers.lambda.len() == t.multipliers.lambda.len() {
        m.multipliers
            .lambda
            .iter()
            .zip(&t.multipliers.lambda)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let multiplier_gap = lam_gap
        .max(gap_maps(&m.multipliers.mu, &t.multipliers.mu1))
        .max(gap_maps(&m.multipliers.gamma, &mapped_gamma));
    let scale = agreement_scale(t_values(&t.multipliers));
    let transfer_applicable = t.nondegenerate() && t.ndt.ndt5;
    let transfer_holds = transfer_applicable.then(|| m.nondegenerate() && m.m_index == t.t_index);
    Ok(Projection {
        certificate: m,
        t_certificate: t,
        mapped_gamma,
        multiplier_gap,
        multipliers_agree: multiplier_gap <= MULTIPLIER_AGREEMENT * scale,
        transfer_applicable,
        transfer_holds,
    })
}

/// One finding of [`verify_counts`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountCheck {
    pub name: &'static str,
    pub applicable: bool,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountReport {
    pub complete: bool,
    pub checks: Vec<CountCheck>,
}

impl CountReport {
    /// Every applicable check passed.
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| !c.applicable || c.passed)
    }
}

fn not_applicable(name: &'static str, why: &str) -> CountCheck {
    CountCheck {
        name,
        applicable: false,
        passed: false,
        detail: why.to_string(),
    }
}

/// Check the counting statements on a census holding both sides:
///
/// * `companions`: T-points above each nondegenerate M-point number
///   `binom(n − ‖x‖₀ − 1, n − s − 1)`;
/// * `binomial-identity`: that number equals `binom(n − ‖x‖₀ − 1, s − ‖x‖₀)`;
/// * `minimizers`: `#(MI = 0) = #(TI = 0)`;
/// * `mountain-pass`: `#(TI = 1) >= #(TI = 0) − 1`.
///
/// Checks that need exhaustive enumeration are marked not applicable when
/// the census is incomplete or the parameters are inadmissible.
pub fn verify_counts(rp: &RegularizedProblem, census: &CensusReport, tol: &Tolerances) -> Result<CountReport, BridgeError> {
    let (n, s) = (rp.n(), rp.s());
    let exhaustive = census.m_side.is_complete() && census.t_side.is_complete() && rp.admissible();
    let why = if !rp.admissible() {
        "regularization parameters inadmissible"
    } else {
        "census incomplete"
    };
    let mut checks = Vec::new();

    if exhaustive {
        let radius = tol.dedup_radius();
        let mut failures = Vec::new();
        let mut examined = 0;
        for m in census.m_points.iter().filter(|m| m.nondegenerate()) {
            examined += 1;
            let expected = companion_count(n, s, m.activity.x_norm0)?;
            let found = census
                .t_points
                .iter()
                .filter(|t| {
                    t.x.iter()
                        .zip(&m.point)
                        .all(|(a, b)| (a - b).abs() <= radius)
                })
                .count() as u64;
            if found != expected {
                failures.push(format!("{:?}: found {found}, expected {expected}", m.point));
            }
        }
        checks.push(CountCheck {
            name: "companions",
            applicable: true,
            passed: failures.is_empty(),
            detail: if failures.is_empty() {
                format!("{examined} nondegenerate M-points match")
            } else {
                failures.join("; ")
            },
        });
    } else {
        checks.push(not_applicable("companions", why));
    }

    let mut triples = Vec::new();
    for m in &census.m_points {
        let k = m.activity.x_norm0;
        if k <= s && !triples.contains(&k) {
            triples.push(k);
        }
    }
    triples.sort_unstable();
    let mut identity_ok = true;
    for &k in &triples {
        let top = (n - k - 1) as u64;
        identity_ok &= binomial(top, (n - s - 1) as u64)? == binomial(top, (s - k) as u64)?;
    }
    checks.push(CountCheck {
        name: "binomial-identity",
        applicable: !triples.is_empty(),
        passed: identity_ok,
        detail: format!("n = {n}, s = {s}, nonzero counts {triples:?}"),
    });

    let m0 = census.m_by_index.get(&0).copied().unwrap_or(0);
    let t0 = census.t_by_index.get(&0).copied().unwrap_or(0);
    let t1 = census.t_by_index.get(&1).copied().unwrap_or(0);
    if exhaustive {
        checks.push(CountCheck {
            name: "minimizers",
            applicable: true,
            passed: m0 == t0,
            detail: format!("#(MI=0) = {m0}, #(TI=0) = {t0}"),
        });
        checks.push(CountCheck {
            name: "mountain-pass",
            applicable: true,
            passed: t1 + 1 >= t0,
            detail: format!("#(TI=1) = {t1}, #(TI=0) = {t0}"),
        });
    } else {
        checks.push(not_applicable("minimizers", why));
        checks.push(not_applicable("mountain-pass", why));
    }

    Ok(CountReport {
        complete: census.complete,
        checks,
    })
}
