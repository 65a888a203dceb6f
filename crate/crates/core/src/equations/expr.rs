//! Residual expression trees with exact first derivatives.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::ops;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of a negative number")]
    SqrtOfNegative,
    #[error("non-finite value")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Sqrt(Box<Expr>),
    Dot(Vec<Expr>, Vec<Expr>),
    /// Evaluates `branches[k]` where `k` indexes the largest `|pivot[k]|`
    /// (first index wins ties). Piecewise smooth; the derivative is the
    /// derivative of the selected branch.
    Dominant {
        pivot: Vec<Expr>,
        branches: Vec<Expr>,
    },
}

pub fn c(v: f64) -> Expr {
    Expr::Const(v)
}

pub fn var(i: usize) -> Expr {
    Expr::Var(i)
}

pub fn sq(e: Expr) -> Expr {
    e.clone() * e
}

pub fn sin(e: Expr) -> Expr {
    Expr::Sin(Box::new(e))
}

pub fn cos(e: Expr) -> Expr {
    Expr::Cos(Box::new(e))
}

pub fn sqrt(e: Expr) -> Expr {
    Expr::Sqrt(Box::new(e))
}

pub fn dot(a: Vec<Expr>, b: Vec<Expr>) -> Expr {
    debug_assert_eq!(a.len(), b.len());
    Expr::Dot(a, b)
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Sub(Box::new(self), Box::new(rhs))
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }
}

impl ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::Div(Box::new(self), Box::new(rhs))
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

fn checked(v: f64) -> Result<f64, DomainError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(DomainError::NonFinite)
    }
}

fn dominant_index(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if v.abs() > values[best].abs() {
            best = k;
        }
    }
    best
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> Result<f64, DomainError> {
        let v = match self {
            Expr::Const(v) => *v,
            Expr::Var(i) => x[*i],
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let den = b.eval(x)?;
                if den == 0.0 {
                    return Err(DomainError::DivisionByZero);
                }
                a.eval(x)? / den
            }
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Sin(a) => a.eval(x)?.sin(),
            Expr::Cos(a) => a.eval(x)?.cos(),
            Expr::Sqrt(a) => {
                let v = a.eval(x)?;
                if v < 0.0 {
                    return Err(DomainError::SqrtOfNegative);
                }
                v.sqrt()
            }
            Expr::Dot(a, b) => {
                let mut s = 0.0;
                for (p, q) in a.iter().zip(b) {
                    s += p.eval(x)? * q.eval(x)?;
                }
                s
            }
            Expr::Dominant { pivot, branches } => {
                let pv = pivot.iter().map(|p| p.eval(x)).collect::<Result<Vec<_>, _>>()?;
                branches[dominant_index(&pv)].eval(x)?
            }
        };
        checked(v)
    }

    /// Evaluates the expression and adds `seed · ∂self/∂x` into `grad`.
    pub fn accumulate(&self, x: &[f64], seed: f64, grad: &mut [f64]) -> Result<f64, DomainError> {
        let v = match self {
            Expr::Const(v) => *v,
            Expr::Var(i) => {
                grad[*i] += seed;
                x[*i]
            }
            Expr::Add(a, b) => a.accumulate(x, seed, grad)? + b.accumulate(x, seed, grad)?,
            Expr::Sub(a, b) => a.accumulate(x, seed, grad)? - b.accumulate(x, -seed, grad)?,
            Expr::Mul(a, b) => {
                let va = a.eval(x)?;
                let vb = b.eval(x)?;
                a.accumulate(x, seed * vb, grad)?;
                b.accumulate(x, seed * va, grad)?;
                va * vb
            }
            Expr::Div(a, b) => {
                let vb = b.eval(x)?;
                if vb == 0.0 {
                    return Err(DomainError::DivisionByZero);
                }
                let va = a.accumulate(x, seed / vb, grad)?;
                b.accumulate(x, -seed * va / (vb * vb), grad)?;
                va / vb
            }
            Expr::Neg(a) => -a.accumulate(x, -seed, grad)?,
            Expr::Sin(a) => {
                let va = a.eval(x)?;
                a.accumulate(x, seed * va.cos(), grad)?;
                va.sin()
            }
            Expr::Cos(a) => {
                let va = a.eval(x)?;
                a.accumulate(x, -seed * va.sin(), grad)?;
                va.cos()
            }
            Expr::Sqrt(a) => {
                let va = a.eval(x)?;
                if va < 0.0 {
                    return Err(DomainError::SqrtOfNegative);
                }
                let r = va.sqrt();
                if r == 0.0 {
                    return Err(DomainError::DivisionByZero);
                }
                a.accumulate(x, seed * 0.5 / r, grad)?;
                r
            }
            Expr::Dot(a, b) => {
                let mut s = 0.0;
                for (p, q) in a.iter().zip(b) {
                    let vp = p.eval(x)?;
                    let vq = q.eval(x)?;
                    p.accumulate(x, seed * vq, grad)?;
                    q.accumulate(x, seed * vp, grad)?;
                    s += vp * vq;
                }
                s
            }
            Expr::Dominant { pivot, branches } => {
                let pv = pivot.iter().map(|p| p.eval(x)).collect::<Result<Vec<_>, _>>()?;
                branches[dominant_index(&pv)].accumulate(x, seed, grad)?
            }
        };
        checked(v)
    }

    /// Every variable occurring anywhere in the tree (all branches included).
    pub fn collect_vars(&self, out: &mut BTreeSet<usize>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(i) => {
                out.insert(*i);
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Sqrt(a) => a.collect_vars(out),
            Expr::Dot(a, b) | Expr::Dominant { pivot: a, branches: b } => {
                a.iter().chain(b).for_each(|e| e.collect_vars(out));
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<usize> {
        let mut s = BTreeSet::new();
        self.collect_vars(&mut s);
        s
    }

    /// Fully parenthesized infix rendering using the given variable names.
    pub fn render(&self, names: &[String]) -> String {
        let mut s = String::new();
        self.render_into(names, &mut s);
        s
    }

    fn render_into(&self, names: &[String], s: &mut String) {
        let bin = |s: &mut String, a: &Expr, op: &str, b: &Expr| {
            s.push('(');
            a.render_into(names, s);
            s.push_str(op);
            b.render_into(names, s);
            s.push(')');
        };
        let list = |s: &mut String, items: &[Expr]| {
            s.push('[');
            for (k, e) in items.iter().enumerate() {
                if k > 0 {
                    s.push_str(", ");
                }
                e.render_into(names, s);
            }
            s.push(']');
        };
        match self {
            Expr::Const(v) => {
                let _ = write!(s, "{v}");
            }
            Expr::Var(i) => s.push_str(names.get(*i).map(String::as_str).unwrap_or("?")),
            Expr::Add(a, b) => bin(s, a, " + ", b),
            Expr::Sub(a, b) => bin(s, a, " - ", b),
            Expr::Mul(a, b) => bin(s, a, " * ", b),
            Expr::Div(a, b) => bin(s, a, " / ", b),
            Expr::Neg(a) => {
                s.push('-');
                a.render_into(names, s);
            }
            Expr::Sin(a) | Expr::Cos(a) | Expr::Sqrt(a) => {
                s.push_str(match self {
                    Expr::Sin(_) => "sin(",
                    Expr::Cos(_) => "cos(",
                    _ => "sqrt(",
                });
                a.render_into(names, s);
                s.push(')');
            }
            Expr::Dot(a, b) => {
                s.push_str("dot(");
                list(s, a);
                s.push_str(", ");
                list(s, b);
                s.push(')');
            }
            Expr::Dominant { pivot, branches } => {
                s.push_str("dominant(");
                list(s, pivot);
                s.push_str(" -> ");
                list(s, branches);
                s.push(')');
            }
        }
    }
}
