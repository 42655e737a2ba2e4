use nalgebra::{DMatrix, DVector};

use super::{EvalError, Expr, Func};

/// Value, gradient and Hessian of a scalar expression at a point.
///
/// The Hessian is stored as its packed upper triangle, so the matrix
/// returned by [`Jet2::hessian`] is symmetric by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    value: f64,
    gradient: Vec<f64>,
    upper: Vec<f64>,
}

#[inline]
fn packed(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

impl Jet2 {
    fn constant(v: f64, n: usize) -> Jet2 {
        Jet2 {
            value: v,
            gradient: vec![0.0; n],
            upper: vec![0.0; n * (n + 1) / 2],
        }
    }

    fn variable(i: usize, v: f64, n: usize) -> Jet2 {
        let mut j = Jet2::constant(v, n);
        j.gradient[i] = 1.0;
        j
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn gradient(&self) -> &[f64] {
        &self.gradient
    }

    pub fn gradient_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.gradient)
    }

    /// Single Hessian entry; `hessian_entry(i, j) == hessian_entry(j, i)` always.
    pub fn hessian_entry(&self, i: usize, j: usize) -> f64 {
        self.upper[packed(self.dim(), i, j)]
    }

    pub fn hessian(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.hessian_entry(i, j))
    }

    /// `φ(self)` given `φ(u)`, `φ'(u)`, `φ''(u)`.
    fn chain(&self, phi: f64, d1: f64, d2: f64) -> Jet2 {
        let n = self.dim();
        let mut upper = Vec::with_capacity(self.upper.len());
        for i in 0..n {
            for j in i..n {
                upper.push(d1 * self.upper[packed(n, i, j)] + d2 * self.gradient[i] * self.gradient[j]);
            }
        }
        Jet2 {
            value: phi,
            gradient: self.gradient.iter().map(|g| d1 * g).collect(),
            upper,
        }
    }

    fn add(&self, other: &Jet2, sign: f64) -> Jet2 {
        Jet2 {
            value: self.value + sign * other.value,
            gradient: self
                .gradient
                .iter()
                .zip(&other.gradient)
                .map(|(a, b)| a + sign * b)
                .collect(),
            upper: self
                .upper
                .iter()
                .zip(&other.upper)
                .map(|(a, b)| a + sign * b)
                .collect(),
        }
    }

    fn mul(&self, other: &Jet2) -> Jet2 {
        let n = self.dim();
        let (a, b) = (self.value, other.value);
        let (ga, gb) = (&self.gradient, &other.gradient);
        let mut upper = Vec::with_capacity(self.upper.len());
        for i in 0..n {
            for j in i..n {
                let k = packed(n, i, j);
                upper.push(a * other.upper[k] + b * self.upper[k] + ga[i] * gb[j] + gb[i] * ga[j]);
            }
        }
        Jet2 {
            value: a * b,
            gradient: ga.iter().zip(gb).map(|(x, y)| a * y + b * x).collect(),
            upper,
        }
    }

    fn negate(&self) -> Jet2 {
        self.chain(-self.value, -1.0, 0.0)
    }
}

impl Expr {
    /// Value, exact gradient and exact Hessian at `x`.
    pub fn eval2(&self, x: &[f64]) -> Result<Jet2, EvalError> {
        let n = x.len();
        match self {
            Expr::Const(c) => Ok(Jet2::constant(*c, n)),
            Expr::Var(i) => {
                let v = *x.get(*i).ok_or(EvalError::Dimension {
                    expected: i + 1,
                    got: n,
                })?;
                Ok(Jet2::variable(*i, v, n))
            }
            Expr::Neg(a) => Ok(a.eval2(x)?.negate()),
            Expr::Add(a, b) => Ok(a.eval2(x)?.add(&b.eval2(x)?, 1.0)),
            Expr::Sub(a, b) => Ok(a.eval2(x)?.add(&b.eval2(x)?, -1.0)),
            Expr::Mul(a, b) => Ok(a.eval2(x)?.mul(&b.eval2(x)?)),
            Expr::Div(a, b) => {
                let den = b.eval2(x)?;
                let d = den.value;
                if d == 0.0 {
                    return Err(self.domain("division by zero"));
                }
                let recip = den.chain(1.0 / d, -1.0 / (d * d), 2.0 / (d * d * d));
                Ok(a.eval2(x)?.mul(&recip))
            }
            Expr::Pow(a, k) => {
                let u = a.eval2(x)?;
                let v = u.value;
                let k = *k;
                if v == 0.0 && k < 0 {
                    return Err(self.domain("negative power of zero"));
                }
                // Branches keep u^(k-2) from being formed when its coefficient vanishes.
                let jet = match k {
                    0 => Jet2::constant(1.0, n),
                    1 => u,
                    _ => {
                        let kf = f64::from(k);
                        let d1 = kf * v.powi(k - 1);
                        let d2 = kf * (kf - 1.0) * v.powi(k - 2);
                        u.chain(v.powi(k), d1, d2)
                    }
                };
                Ok(jet)
            }
            Expr::Call(func, a) => {
                let u = a.eval2(x)?;
                let v = u.value;
                let jet = match func {
                    Func::Sin => u.chain(v.sin(), v.cos(), -v.sin()),
                    Func::Cos => u.chain(v.cos(), -v.sin(), -v.cos()),
                    Func::Exp => {
                        let e = v.exp();
                        u.chain(e, e, e)
                    }
                    Func::Log => {
                        if v <= 0.0 {
                            return Err(self.domain("log of nonpositive argument"));
                        }
                        u.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
                    }
                };
                Ok(jet)
            }
        }
    }
}
