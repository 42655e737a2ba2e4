//! Scalar expressions over `x1 … xn` with exact first and second derivatives.
//!
//! Expressions are parsed from a small infix grammar (see [`parse`]) and
//! evaluated to a [`Jet2`], which carries value, gradient and Hessian
//! computed by forward-on-forward differentiation over the AST.

mod jet;
mod parse;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use jet::Jet2;
pub use parse::{parse, ParseError, ParseErrorKind};

/// Elementary functions admitted by the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            _ => None,
        }
    }
}

/// Expression tree. Variables are stored 0-based (`Var(0)` is `x1`).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

/// Evaluation failed because a singular operation was hit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("point has length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("domain error in `{subterm}`: {reason}")]
    Domain { subterm: String, reason: &'static str },
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    /// Variable by 0-based index.
    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    /// `constant + Σ coeffs[i]·x_{i+1}`, skipping zero coefficients.
    pub fn affine(coeffs: &[f64], constant: f64) -> Expr {
        let mut acc = Expr::Const(constant);
        for (i, &a) in coeffs.iter().enumerate() {
            if a != 0.0 {
                let term = Expr::Mul(Box::new(Expr::Const(a)), Box::new(Expr::Var(i)));
                acc = Expr::Add(Box::new(acc), Box::new(term));
            }
        }
        acc
    }

    /// `½ xᵀQx + bᵀx + constant`. Only the upper triangle of `q` is read,
    /// the lower triangle is assumed to mirror it.
    pub fn quadratic(q: &[Vec<f64>], b: &[f64], constant: f64) -> Expr {
        let mut acc = Expr::affine(b, constant);
        for i in 0..q.len() {
            for j in i..q.len() {
                let coef = if i == j { 0.5 * q[i][i] } else { q[i][j] };
                if coef == 0.0 {
                    continue;
                }
                let term = Expr::Mul(
                    Box::new(Expr::Mul(Box::new(Expr::Const(coef)), Box::new(Expr::Var(i)))),
                    Box::new(Expr::Var(j)),
                );
                acc = Expr::Add(Box::new(acc), Box::new(term));
            }
        }
        acc
    }

    pub fn scaled(self, alpha: f64) -> Expr {
        Expr::Mul(Box::new(Expr::Const(alpha)), Box::new(self))
    }

    /// Largest variable index referenced (0-based), if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, None) => x,
                    (None, y) => y,
                }
            }
        }
    }

    /// Polynomial degree, or `None` when the expression is not a polynomial
    /// (a variable under a transcendental function, a non-constant
    /// denominator, or a negative power of a non-constant).
    pub fn polynomial_degree(&self) -> Option<u32> {
        match self {
            Expr::Const(_) => Some(0),
            Expr::Var(_) => Some(1),
            Expr::Neg(a) => a.polynomial_degree(),
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                Some(a.polynomial_degree()?.max(b.polynomial_degree()?))
            }
            Expr::Mul(a, b) => Some(a.polynomial_degree()? + b.polynomial_degree()?),
            Expr::Div(a, b) => match b.polynomial_degree()? {
                0 => a.polynomial_degree(),
                _ => None,
            },
            Expr::Pow(a, k) => {
                let d = a.polynomial_degree()?;
                if d == 0 {
                    Some(0)
                } else if *k >= 0 {
                    Some(d * (*k as u32))
                } else {
                    None
                }
            }
            Expr::Call(_, a) => match a.polynomial_degree()? {
                0 => Some(0),
                _ => None,
            },
        }
    }

    /// Value only; cheaper than [`Expr::eval2`] and independent of the jet code.
    pub fn value(&self, x: &[f64]) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => *x.get(*i).ok_or(EvalError::Dimension {
                expected: i + 1,
                got: x.len(),
            })?,
            Expr::Neg(a) => -a.value(x)?,
            Expr::Add(a, b) => a.value(x)? + b.value(x)?,
            Expr::Sub(a, b) => a.value(x)? - b.value(x)?,
            Expr::Mul(a, b) => a.value(x)? * b.value(x)?,
            Expr::Div(a, b) => {
                let d = b.value(x)?;
                if d == 0.0 {
                    return Err(self.domain("division by zero"));
                }
                a.value(x)? / d
            }
            Expr::Pow(a, k) => {
                let base = a.value(x)?;
                if base == 0.0 && *k < 0 {
                    return Err(self.domain("negative power of zero"));
                }
                base.powi(*k)
            }
            Expr::Call(func, a) => {
                let u = a.value(x)?;
                match func {
                    Func::Sin => u.sin(),
                    Func::Cos => u.cos(),
                    Func::Exp => u.exp(),
                    Func::Log => {
                        if u <= 0.0 {
                            return Err(self.domain("log of nonpositive argument"));
                        }
                        u.ln()
                    }
                }
            }
        };
        Ok(v)
    }

    fn domain(&self, reason: &'static str) -> EvalError {
        EvalError::Domain {
            subterm: self.to_string(),
            reason,
        }
    }

    /// Binding strength used by the printer; mirrors the grammar levels.
    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Pow(..) => 3,
            Expr::Const(..) | Expr::Var(..) | Expr::Neg(..) | Expr::Call(..) => 4,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "(")?;
            self.fmt_at(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Expr::Const(c) if *c < 0.0 => write!(f, "(-{})", -c),
            Expr::Const(c) => write!(f, "{}", c),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.fmt_at(f, 4)
            }
            Expr::Add(a, b) => {
                a.fmt_at(f, 1)?;
                write!(f, " + ")?;
                b.fmt_at(f, 2)
            }
            Expr::Sub(a, b) => {
                a.fmt_at(f, 1)?;
                write!(f, " - ")?;
                b.fmt_at(f, 2)
            }
            Expr::Mul(a, b) => {
                a.fmt_at(f, 2)?;
                write!(f, "*")?;
                b.fmt_at(f, 3)
            }
            Expr::Div(a, b) => {
                a.fmt_at(f, 2)?;
                write!(f, "/")?;
                b.fmt_at(f, 3)
            }
            Expr::Pow(a, k) => {
                a.fmt_at(f, 4)?;
                write!(f, "^{}", k)
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.fmt_at(f, 0)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}
