//! A small closed-form expression language for profile functions.
//!
//! Expressions are built from real literals, the constant `pi`, the
//! variables `x` and `y`, the binary operators `+ - * / ^`, unary minus and
//! the functions `sin cos exp abs sqrt`. Angles are in radians.
//!
//! ```
//! use thinhom::expr::{parse, Bindings, Var};
//!
//! let g = parse("2 + cos(2*pi*y)", &[Var::X, Var::Y]).unwrap();
//! let dg = g.diff(Var::Y).unwrap();
//! let at = Bindings::xy(0.0, 0.25);
//! assert!((dg.eval(&at).unwrap() + 2.0 * std::f64::consts::PI).abs() < 1e-12);
//! ```

mod diff;
mod parse;

use std::fmt;

use thiserror::Error;

pub use diff::DiffError;
pub use parse::{parse, ParseError, ParseErrorKind};

/// Free variable of an expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Y,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
        }
    }

    pub(crate) fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// Expression tree. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Pi,
    Var(Var),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

/// Values for the free variables of an expression.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Bindings {
    pub x: Option<f64>,
    pub y: Option<f64>,
}

impl Bindings {
    pub fn x(x: f64) -> Self {
        Bindings { x: Some(x), y: None }
    }

    pub fn xy(x: f64, y: f64) -> Self {
        Bindings {
            x: Some(x),
            y: Some(y),
        }
    }

    pub fn get(&self, var: Var) -> Option<f64> {
        match var {
            Var::X => self.x,
            Var::Y => self.y,
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("variable `{0}` is not bound")]
    Unbound(&'static str),
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of negative value {0}")]
    NegativeSqrt(f64),
    #[error("non-integer power of negative base {base}^{exponent}")]
    NegativeBase { base: f64, exponent: f64 },
    #[error("non-finite result in `{0}`")]
    NonFinite(String),
}

impl Expr {
    pub fn constant(value: f64) -> Expr {
        Expr::Const(value)
    }

    pub fn var(var: Var) -> Expr {
        Expr::Var(var)
    }

    /// Evaluates the expression in IEEE double precision.
    ///
    /// Domain violations are reported as errors; a NaN or infinite value is
    /// never returned.
    pub fn eval(&self, bindings: &Bindings) -> Result<f64, EvalError> {
        let value = match self {
            Expr::Const(c) => *c,
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(v) => bindings.get(*v).ok_or(EvalError::Unbound(v.name()))?,
            Expr::Neg(a) => -a.eval(bindings)?,
            Expr::Call(func, a) => {
                let a = a.eval(bindings)?;
                match func {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Abs => a.abs(),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(EvalError::NegativeSqrt(a));
                        }
                        a.sqrt()
                    }
                }
            }
            Expr::Binary(op, a, b) => {
                let a = a.eval(bindings)?;
                let b = b.eval(bindings)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a / b
                    }
                    BinOp::Pow => {
                        if a == 0.0 && b < 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        if a < 0.0 && b.fract() != 0.0 {
                            return Err(EvalError::NegativeBase {
                                base: a,
                                exponent: b,
                            });
                        }
                        if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
                            a.powi(b as i32)
                        } else {
                            a.powf(b)
                        }
                    }
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(EvalError::NonFinite(self.to_string()))
        }
    }

    /// Shorthand for evaluating with both `x` and `y` bound.
    pub fn eval_xy(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        self.eval(&Bindings::xy(x, y))
    }

    /// Returns true if `var` occurs in the tree.
    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Const(_) | Expr::Pi => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(var),
            Expr::Binary(_, a, b) => a.depends_on(var) || b.depends_on(var),
        }
    }

    /// Value of a variable-free subtree.
    pub fn as_constant(&self) -> Option<f64> {
        if self.depends_on(Var::X) || self.depends_on(Var::Y) {
            return None;
        }
        self.eval(&Bindings::default()).ok()
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Const(c) if c.is_sign_negative() => 3,
            Expr::Binary(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
            if e.precedence() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Pi => write!(f, "pi"),
            Expr::Var(v) => write!(f, "{}", v.name()),
            Expr::Neg(a) => {
                write!(f, "-")?;
                // `--x` would not re-parse as intended, so nested signs get parentheses.
                child(f, a, 4)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Binary(op, a, b) => {
                let prec = self.precedence();
                // Right-nested operands of the left-associative operators keep
                // their parentheses so that re-parsing rebuilds the same tree.
                let (left_min, right_min) = match op {
                    BinOp::Pow => (prec + 1, 3),
                    _ => (prec, prec + 1),
                };
                child(f, a, left_min)?;
                write!(f, " {} ", op.symbol())?;
                child(f, b, right_min)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xy() -> [Var; 2] {
        [Var::X, Var::Y]
    }

    #[test]
    fn eval_linear_combination() {
        let e = parse("x + 2*y", &xy()).unwrap();
        assert_eq!(e.eval(&Bindings::xy(1.0, 2.0)).unwrap(), 5.0);
    }

    #[test]
    fn eval_sin_pi() {
        let e = parse("sin(pi)", &[]).unwrap();
        assert!(e.eval(&Bindings::default()).unwrap().abs() <= 1e-15);
    }

    #[test]
    fn eval_locally_periodic_profile_at_origin() {
        let e = parse("2 + cos(2*pi*y/(1+0.5*x*(1-x)))", &xy()).unwrap();
        let v = e.eval(&Bindings::xy(0.0, 1.0)).unwrap();
        assert!((v - 3.0).abs() < 1e-15);
    }

    #[test]
    fn endpoint_of_quadratic_period() {
        let e = parse("1 + 0.5*x*(1-x)", &[Var::X]).unwrap();
        assert_eq!(e.eval(&Bindings::x(0.0)).unwrap(), 1.0);
    }

    #[test]
    fn domain_errors_are_reported() {
        let e = parse("x/0", &[Var::X]).unwrap();
        assert_eq!(e.eval(&Bindings::x(1.0)), Err(EvalError::DivisionByZero));
        let e = parse("sqrt(x)", &[Var::X]).unwrap();
        assert!(matches!(
            e.eval(&Bindings::x(-1.0)),
            Err(EvalError::NegativeSqrt(_))
        ));
        let e = parse("exp(x)", &[Var::X]).unwrap();
        assert!(matches!(
            e.eval(&Bindings::x(1e6)),
            Err(EvalError::NonFinite(_))
        ));
        let e = parse("x^0.5", &[Var::X]).unwrap();
        assert!(matches!(
            e.eval(&Bindings::x(-4.0)),
            Err(EvalError::NegativeBase { .. })
        ));
    }

    #[test]
    fn unbound_variable() {
        let e = parse("x*y", &xy()).unwrap();
        assert_eq!(e.eval(&Bindings::x(1.0)), Err(EvalError::Unbound("y")));
    }

    #[test]
    fn display_respects_precedence() {
        let cases = [
            ("1 - (2 - 3)", "1 - (2 - 3)"),
            ("(1 - 2) - 3", "1 - 2 - 3"),
            ("2^3^2", "2 ^ 3 ^ 2"),
            ("(2^3)^2", "(2 ^ 3) ^ 2"),
            ("-x^2", "-x ^ 2"),
            ("(-x)^2", "(-x) ^ 2"),
            ("x/(y*2)", "x / (y * 2)"),
            ("-(-x)", "-(-x)"),
        ];
        for (src, printed) in cases {
            let e = parse(src, &xy()).unwrap();
            assert_eq!(e.to_string(), printed, "source {src}");
        }
    }
}
