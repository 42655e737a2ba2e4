//! Dense kernels shared by every certificate: numerical rank with an
//! orthonormal null-space basis, least-squares multiplier solves, and the
//! inertia of a symmetric matrix restricted to a subspace.
//!
//! All decisions about "zero" go through one [`Tolerances`] value.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Numerical thresholds used throughout certification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Absolute feasibility tolerance.
    pub tol_feas: f64,
    /// Activity detection: `|v| <= tol_act` counts as zero.
    pub tol_act: f64,
    /// Relative singular-value cutoff for rank decisions.
    pub tol_rank: f64,
    /// Margin for strict sign conditions on multipliers and eigenvalues.
    pub tol_strict: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_feas: 1e-9,
            tol_act: 1e-8,
            tol_rank: 1e-10,
            tol_strict: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ToleranceError {
    #[error("tolerance `{0}` must be finite and strictly positive")]
    NotPositive(&'static str),
    #[error("tol_rank ({rank}) must be smaller than tol_strict ({strict})")]
    RankAboveStrict { rank: f64, strict: f64 },
}

impl Tolerances {
    pub fn validate(&self) -> Result<(), ToleranceError> {
        for (name, v) in [
            ("tol_feas", self.tol_feas),
            ("tol_act", self.tol_act),
            ("tol_rank", self.tol_rank),
            ("tol_strict", self.tol_strict),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ToleranceError::NotPositive(name));
            }
        }
        if self.tol_rank >= self.tol_strict {
            return Err(ToleranceError::RankAboveStrict {
                rank: self.tol_rank,
                strict: self.tol_strict,
            });
        }
        Ok(())
    }

    /// Radius used to merge points found by the enumeration oracles.
    pub fn dedup_radius(&self) -> f64 {
        10.0 * self.tol_act
    }
}

/// Counts of negative, zero and positive eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Inertia {
    pub neg: usize,
    pub zero: usize,
    pub pos: usize,
}

impl Inertia {
    pub fn dim(&self) -> usize {
        self.neg + self.zero + self.pos
    }
}

/// Numerical rank of `a` (m×k) and an orthonormal basis (k×(k−rank)) of its
/// null space.
///
/// Rank counts singular values above `tol_rank · σ_max`; an empty or zero
/// matrix has rank 0 and the full identity as null basis.
pub fn rank_and_nullbasis(a: &DMatrix<f64>, tol: &Tolerances) -> (usize, DMatrix<f64>) {
    let (m, k) = a.shape();
    if k == 0 {
        return (0, DMatrix::zeros(0, 0));
    }
    if m == 0 {
        return (0, DMatrix::identity(k, k));
    }
    // Pad with zero rows so the SVD yields a full k×k right factor.
    let padded = if m < k {
        let mut p = DMatrix::zeros(k, k);
        p.rows_mut(0, m).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = SVD::new(padded, false, true);
    let sigma = &svd.singular_values;
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma_max = sigma.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = tol.tol_rank * sigma_max;
    let keep: Vec<usize> = if sigma_max == 0.0 {
        Vec::new()
    } else {
        (0..sigma.len()).filter(|&j| sigma[j] > cutoff).collect()
    };
    let rank = keep.len();
    let null: Vec<usize> = (0..k).filter(|j| !keep.contains(j)).collect();
    let mut basis = DMatrix::zeros(k, null.len());
    for (col, &j) in null.iter().enumerate() {
        basis.set_column(col, &v_t.row(j).transpose());
    }
    (rank, basis)
}

pub fn rank(a: &DMatrix<f64>, tol: &Tolerances) -> usize {
    rank_and_nullbasis(a, tol).0
}

/// Minimum-norm least-squares coefficients for `g · coeffs ≈ target`, with
/// the residual norm `‖g · coeffs − target‖₂`.
pub fn solve_multipliers(
    g: &DMatrix<f64>,
    target: &DVector<f64>,
    tol: &Tolerances,
) -> (DVector<f64>, f64) {
    let k = g.ncols();
    if k == 0 || g.nrows() == 0 {
        return (DVector::zeros(k), target.norm());
    }
    let svd = SVD::new(g.clone(), true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let coeffs = if sigma_max == 0.0 {
        DVector::zeros(k)
    } else {
        svd.solve(target, tol.tol_rank * sigma_max)
            .expect("both singular factors computed")
    };
    let residual = (g * &coeffs - target).norm();
    (coeffs, residual)
}

fn solve_on(g: &DMatrix<f64>, target: &DVector<f64>, cols: &[usize], tol: &Tolerances) -> DVector<f64> {
    let sub = g.select_columns(cols);
    let (z, _) = solve_multipliers(&sub, target, tol);
    let mut full = DVector::zeros(g.ncols());
    for (k, &j) in cols.iter().enumerate() {
        full[j] = z[k];
    }
    full
}

/// Least squares `g · coeffs ≈ target` with `coeffs[j] >= 0` wherever
/// `nonneg[j]`; other coefficients are free.
///
/// Lawson–Hanson active-set iteration with the free columns kept in the
/// passive set throughout. Returns the coefficients and residual norm.
pub fn solve_multipliers_signed(
    g: &DMatrix<f64>,
    target: &DVector<f64>,
    nonneg: &[bool],
    tol: &Tolerances,
) -> (DVector<f64>, f64) {
    let k = g.ncols();
    assert_eq!(nonneg.len(), k, "one sign flag per column");
    let mut passive: Vec<bool> = nonneg.iter().map(|&c| !c).collect();
    let cols = |p: &[bool]| (0..k).filter(|&j| p[j]).collect::<Vec<_>>();
    let mut x = solve_on(g, target, &cols(&passive), tol);
    let scale = g.amax().max(1.0) * target.amax().max(1.0);
    let dual_tol = 1e-12 * scale;
    for _ in 0..(3 * k + 10) {
        let w = g.transpose() * (target - g * &x);
        let entering = (0..k)
            .filter(|&j| !passive[j] && w[j] > dual_tol)
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(j) = entering else { break };
        passive[j] = true;
        loop {
            let z = solve_on(g, target, &cols(&passive), tol);
            let blocking: Vec<usize> = (0..k).filter(|&i| passive[i] && nonneg[i] && z[i] <= 0.0).collect();
            if blocking.is_empty() {
                x = z;
                break;
            }
            let alpha = blocking
                .iter()
                .map(|&i| {
                    let d = x[i] - z[i];
                    if d > 0.0 {
                        x[i] / d
                    } else {
                        0.0
                    }
                })
                .fold(f64::INFINITY, f64::min)
                .clamp(0.0, 1.0);
            x += (z - &x) * alpha;
            for i in 0..k {
                if passive[i] && nonneg[i] && x[i] <= 1e-15 * scale {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
    }
    let residual = (g * &x - target).norm();
    (x, residual)
}

/// Inertia of `nᵀ h n`, i.e. of `h` restricted to the column span of `n`.
///
/// Eigenvalues within `[−tol_strict, tol_strict]` count as zero.
pub fn restricted_inertia(h: &DMatrix<f64>, n: &DMatrix<f64>, tol: &Tolerances) -> Inertia {
    if n.ncols() == 0 {
        return Inertia::default();
    }
    let reduced = n.transpose() * h * n;
    let sym = (&reduced + reduced.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut inertia = Inertia::default();
    for &lam in eig.eigenvalues.iter() {
        if lam < -tol.tol_strict {
            inertia.neg += 1;
        } else if lam > tol.tol_strict {
            inertia.pos += 1;
        } else {
            inertia.zero += 1;
        }
    }
    inertia
}
