//! Implicit-surface expressions `g(x, y[, z])` and their exact gradients.
//!
//! The grammar covers real literals, the variables `x`, `y`, `z` (dimension
//! permitting), `+ - * /`, integer exponents via `^`, unary minus, and the
//! functions `sin cos sqrt exp abs`. Evaluation runs on forward-mode dual
//! numbers, so gradients are exact up to rounding. No implicit multiplication
//! and no non-integer exponents.

mod dual;
mod parser;

pub use dual::Dual;
pub use parser::parse;

use std::fmt;
use thiserror::Error;

pub const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Sqrt,
    Exp,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "sqrt" => Some(Func::Sqrt),
            "exp" => Some(Func::Exp),
            "abs" => Some(Func::Abs),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(f64),
    /// Variable index: 0 = x, 1 = y, 2 = z.
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

/// A parsed implicit-surface expression, tied to a dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceExpr {
    root: Expr,
    dim: usize,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("`{name}` takes {expected} argument(s), found {found} (at byte {offset})")]
    WrongArity {
        offset: usize,
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("variable `{var}` not allowed in dimension {dim} (at byte {offset})")]
    VariableNotAllowedInDim { offset: usize, var: char, dim: usize },
    #[error("expression nesting exceeds depth {MAX_DEPTH} (at byte {offset})")]
    TooDeep { offset: usize },
}

/// Runtime failure while evaluating, carrying the offending subexpression.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("{kind} in `{subexpr}`")]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub subexpr: String,
}

#[derive(Debug, Clone, Copy, Error, PartialEq, Eq)]
pub enum EvalErrorKind {
    #[error("square root of a negative number")]
    NegativeSqrt,
    #[error("division by zero")]
    DivisionByZero,
}

impl SurfaceExpr {
    pub(crate) fn new(root: Expr, dim: usize) -> SurfaceExpr {
        SurfaceExpr { root, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    /// Evaluate the expression value only.
    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        Ok(self.eval_dual(&seed_constants(x))?.v)
    }

    /// Evaluate value and gradient at `x` via dual numbers.
    pub fn eval_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>), EvalError> {
        assert_eq!(x.len(), self.dim, "point dimension mismatch");
        let vars: Vec<Dual> = x.iter().enumerate().map(|(i, &v)| Dual::var(v, i)).collect();
        let out = self.eval_dual(&vars)?;
        Ok((out.v, out.dx[..self.dim].to_vec()))
    }

    /// Evaluate on caller-supplied dual variables. This is how composed
    /// coordinates (co-rotating frames, cylinder cross-sections) chain their
    /// derivatives through the expression.
    pub fn eval_dual(&self, vars: &[Dual]) -> Result<Dual, EvalError> {
        assert_eq!(vars.len(), self.dim, "variable count mismatch");
        eval_node(&self.root, vars)
    }
}

fn seed_constants(x: &[f64]) -> Vec<Dual> {
    x.iter().map(|&v| Dual::constant(v)).collect()
}

fn eval_node(node: &Expr, vars: &[Dual]) -> Result<Dual, EvalError> {
    match node {
        Expr::Lit(v) => Ok(Dual::constant(*v)),
        Expr::Var(i) => Ok(vars[*i]),
        Expr::Neg(e) => Ok(-eval_node(e, vars)?),
        Expr::Add(a, b) => Ok(eval_node(a, vars)? + eval_node(b, vars)?),
        Expr::Sub(a, b) => Ok(eval_node(a, vars)? - eval_node(b, vars)?),
        Expr::Mul(a, b) => Ok(eval_node(a, vars)? * eval_node(b, vars)?),
        Expr::Div(a, b) => {
            let num = eval_node(a, vars)?;
            let den = eval_node(b, vars)?;
            if den.v == 0.0 {
                return Err(EvalError {
                    kind: EvalErrorKind::DivisionByZero,
                    subexpr: format!("{}", DisplayExpr(node)),
                });
            }
            Ok(num / den)
        }
        Expr::Pow(base, n) => {
            let b = eval_node(base, vars)?;
            b.powi(*n).ok_or_else(|| EvalError {
                kind: EvalErrorKind::DivisionByZero,
                subexpr: format!("{}", DisplayExpr(node)),
            })
        }
        Expr::Call(f, arg) => {
            let a = eval_node(arg, vars)?;
            match f {
                Func::Sin => Ok(a.sin()),
                Func::Cos => Ok(a.cos()),
                Func::Exp => Ok(a.exp()),
                Func::Abs => Ok(a.abs()),
                Func::Sqrt => a.sqrt().ok_or_else(|| EvalError {
                    kind: EvalErrorKind::NegativeSqrt,
                    subexpr: format!("{}", DisplayExpr(node)),
                }),
            }
        }
    }
}

const VAR_NAMES: [char; 3] = ['x', 'y', 'z'];

struct DisplayExpr<'a>(&'a Expr);

impl fmt::Display for DisplayExpr<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Expr::Lit(v) => write!(f, "{v}"),
            Expr::Var(i) => write!(f, "{}", VAR_NAMES[*i]),
            Expr::Neg(e) => write!(f, "(-{})", DisplayExpr(e)),
            Expr::Add(a, b) => write!(f, "({} + {})", DisplayExpr(a), DisplayExpr(b)),
            Expr::Sub(a, b) => write!(f, "({} - {})", DisplayExpr(a), DisplayExpr(b)),
            Expr::Mul(a, b) => write!(f, "({} * {})", DisplayExpr(a), DisplayExpr(b)),
            Expr::Div(a, b) => write!(f, "({} / {})", DisplayExpr(a), DisplayExpr(b)),
            Expr::Pow(b, n) => {
                if *n < 0 {
                    write!(f, "({}^-{})", DisplayExpr(b), -i64::from(*n))
                } else {
                    write!(f, "({}^{})", DisplayExpr(b), n)
                }
            }
            Expr::Call(func, a) => write!(f, "{}({})", func.name(), DisplayExpr(a)),
        }
    }
}

impl fmt::Display for SurfaceExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", DisplayExpr(&self.root))
    }
}
