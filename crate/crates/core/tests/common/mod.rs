//! Random instance generators shared by the integration targets.
#![allow(dead_code)]

use ccop_core::{Expr, Problem, RegularizedProblem, Tolerances};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn tol() -> Tolerances {
    Tolerances::default()
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

/// Nonzero value bounded away from zero, either sign.
pub fn signed(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let v = uniform(rng, lo, hi);
    if rng.gen_bool(0.5) {
        v
    } else {
        -v
    }
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| uniform(rng, lo, hi)).collect()
}

/// Symmetric matrix with entries in [-1, 1]; with `pd`, `AᵀA + I/2` instead.
pub fn random_sym(rng: &mut ChaCha8Rng, n: usize, pd: bool) -> Vec<Vec<f64>> {
    let a = DMatrix::from_fn(n, n, |_, _| uniform(rng, -1.0, 1.0));
    let m = if pd {
        a.transpose() * &a + DMatrix::identity(n, n) * 0.5
    } else {
        (&a + a.transpose()) * 0.5 + DMatrix::identity(n, n) * uniform(rng, -0.5, 0.5)
    };
    (0..n).map(|i| (0..n).map(|j| m[(i, j)]).collect()).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub n: usize,
    pub s: usize,
    pub n_eq: usize,
    pub n_ineq: usize,
}

impl Shape {
    pub fn random(rng: &mut ChaCha8Rng, max_n: usize, max_eq: usize, max_ineq: usize) -> Shape {
        let n = rng.gen_range(2..=max_n);
        Shape {
            n,
            s: rng.gen_range(1..n),
            n_eq: rng.gen_range(0..=max_eq.min(n - 1)),
            n_ineq: rng.gen_range(0..=max_ineq),
        }
    }
}

/// Quadratic objective with affine constraints and generic data.
pub fn random_quadratic(rng: &mut ChaCha8Rng, shape: Shape) -> Problem {
    let n = shape.n;
    let q = random_sym(rng, n, false);
    let b: Vec<f64> = (0..n).map(|_| signed(rng, 0.2, 2.0)).collect();
    let f = Expr::quadratic(&q, &b, 0.0);
    let h = (0..shape.n_eq)
        .map(|_| Expr::affine(&random_vec(rng, n, -1.0, 1.0), uniform(rng, -1.0, 1.0)))
        .collect();
    let g = (0..shape.n_ineq)
        .map(|_| Expr::affine(&random_vec(rng, n, -1.0, 1.0), uniform(rng, -0.5, 1.5)))
        .collect();
    Problem::new(n, shape.s, f, h, g).expect("valid shape")
}

/// Positive-definite objective, `h(0) = 0` and `g(0) > 0`: the feasible set
/// is star-shaped around the origin and the objective is coercive. With
/// equalities present the origin has more active rows than coordinates, so
/// callers wanting nondegenerate instances pass `n_eq = 0`.
pub fn random_connected(rng: &mut ChaCha8Rng, shape: Shape) -> Problem {
    let n = shape.n;
    let q = random_sym(rng, n, true);
    let b: Vec<f64> = (0..n).map(|_| signed(rng, 0.3, 2.0)).collect();
    let f = Expr::quadratic(&q, &b, 0.0);
    let h = (0..shape.n_eq)
        .map(|_| Expr::affine(&random_vec(rng, n, -1.0, 1.0), 0.0))
        .collect();
    let g = (0..shape.n_ineq)
        .map(|_| Expr::affine(&random_vec(rng, n, -1.0, 1.0), uniform(rng, 0.2, 1.5)))
        .collect();
    Problem::new(n, shape.s, f, h, g).expect("valid shape")
}

/// Admissible `c` (distinct, positive, shuffled) and `ε`.
pub fn random_params(rng: &mut ChaCha8Rng, n: usize, s: usize) -> (Vec<f64>, f64) {
    let mut c: Vec<f64> = (0..n).map(|i| 0.1 + 0.9 * (i as f64 + uniform(rng, 0.1, 0.9)) / n as f64).collect();
    c.shuffle(rng);
    let eps = uniform(rng, 0.1, 1.0) / (n - s) as f64;
    (c, eps)
}

pub fn regularize(rng: &mut ChaCha8Rng, pr: Problem) -> RegularizedProblem {
    let (c, eps) = random_params(rng, pr.n(), pr.s());
    let rp = RegularizedProblem::new(pr, c, eps, &tol()).expect("matching length");
    assert!(rp.admissible());
    rp
}

/// `(x1-1)^2 + x2^2`, n = 2, s = 1.
pub fn single_shift() -> Problem {
    Problem::parse(2, 1, "(x1-1)^2 + x2^2", &[], &[]).unwrap()
}

/// `(x1-1)^2 + (x2-1)^2`, n = 2, s = 1.
pub fn double_shift() -> Problem {
    Problem::parse(2, 1, "(x1-1)^2 + (x2-1)^2", &[], &[]).unwrap()
}

/// `c = (0.3, 0.7)`, `ε = 0.5`.
pub fn reference_params(pr: Problem) -> RegularizedProblem {
    ccop_core::make_regularized(pr, vec![0.3, 0.7], 0.5).unwrap()
}

/// A feasible point of a problem whose constraints are built around it,
/// together with a feasible `y` for `R(c, ε)`.
pub struct FeasibleCase {
    pub problem: Problem,
    pub rp: RegularizedProblem,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Random instance and feasible `(x, y)`. Constraint gradients are sometimes
/// chosen to collide with coordinate directions or each other so that both
/// LICQ verdicts occur.
pub fn random_feasible_case(rng: &mut ChaCha8Rng, max_n: usize) -> FeasibleCase {
    let shape = Shape::random(rng, max_n, 2, 2);
    let (n, s) = (shape.n, shape.s);
    let nnz = rng.gen_range(0..=s);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let support: Vec<usize> = idx[..nnz].to_vec();
    let zeros: Vec<usize> = idx[nnz..].to_vec();
    let mut x = vec![0.0; n];
    for &i in &support {
        x[i] = signed(rng, 0.3, 2.0);
    }

    let mut gradients: Vec<Vec<f64>> = Vec::new();
    let gradient = |rng: &mut ChaCha8Rng, prev: &[Vec<f64>]| -> Vec<f64> {
        match rng.gen_range(0..6) {
            0 => {
                let mut a = vec![0.0; n];
                a[*zeros.choose(rng).unwrap()] = signed(rng, 0.5, 2.0);
                a
            }
            1 if !prev.is_empty() => {
                let k = uniform(rng, 0.5, 2.0);
                prev.choose(rng).unwrap().iter().map(|v| k * v).collect()
            }
            _ => random_vec(rng, n, -1.0, 1.0),
        }
    };
    let through = |a: &[f64], c: f64| Expr::affine(a, c - a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>());

    let mut h = Vec::new();
    for _ in 0..shape.n_eq {
        let a = gradient(rng, &gradients);
        h.push(through(&a, 0.0));
        gradients.push(a);
    }
    let mut g = Vec::new();
    for _ in 0..shape.n_ineq {
        let a = gradient(rng, &gradients);
        let slack = if rng.gen_bool(0.6) { 0.0 } else { uniform(rng, 0.2, 1.0) };
        g.push(through(&a, slack));
        gradients.push(a);
    }
    let q = random_sym(rng, n, false);
    let f = Expr::quadratic(&q, &random_vec(rng, n, -1.0, 1.0), 0.0);
    let problem = Problem::new(n, s, f, h, g).unwrap();
    let rp = regularize(rng, problem.clone());

    // y vanishes on the support; on the zero set some entries are biactive.
    let mut y = vec![0.0; n];
    let mut free = zeros.clone();
    free.shuffle(rng);
    let keep = rng.gen_range((n - s)..=free.len());
    let positive = &free[..keep];
    if rng.gen_bool(0.3) {
        let pivot = positive[0];
        y = rp.structured_y(pivot, &positive[1..n - s]);
    } else {
        let lo = (n - s) as f64 / keep as f64;
        for &i in positive {
            y[i] = if rng.gen_bool(0.3) { rp.upper() } else { uniform(rng, lo, rp.upper()) };
        }
    }
    FeasibleCase { problem, rp, x, y }
}

/// Random polynomial expression over `n` variables.
pub fn random_polynomial(rng: &mut ChaCha8Rng, n: usize, depth: usize) -> Expr {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.7) {
            Expr::var(rng.gen_range(0..n))
        } else {
            Expr::constant(uniform(rng, -2.0, 2.0))
        };
    }
    let a = Box::new(random_polynomial(rng, n, depth - 1));
    match rng.gen_range(0..6) {
        0 => Expr::Add(a, Box::new(random_polynomial(rng, n, depth - 1))),
        1 => Expr::Sub(a, Box::new(random_polynomial(rng, n, depth - 1))),
        2 | 3 => Expr::Mul(a, Box::new(random_polynomial(rng, n, depth - 1))),
        4 => Expr::Pow(a, rng.gen_range(0..=3)),
        _ => Expr::Neg(a),
    }
}

/// Random orthonormal `k × m` matrix (thin QR of a Gaussian-like matrix).
pub fn random_orthonormal(rng: &mut ChaCha8Rng, k: usize, m: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(k, m, |_, _| uniform(rng, -1.0, 1.0));
    a.qr().q()
}
