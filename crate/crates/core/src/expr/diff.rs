use thiserror::Error;

use super::{BinOp, Expr, Func, Var};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum DiffError {
    /// `a ^ b` where `b` depends on the differentiation variable.
    #[error("cannot differentiate `{0}`: exponent depends on the variable")]
    VariableExponent(String),
}

impl Expr {
    /// Symbolic derivative with respect to `var`.
    ///
    /// Only literal zeros and ones are folded; no further simplification.
    pub fn diff(&self, var: Var) -> Result<Expr, DiffError> {
        Ok(match self {
            Expr::Const(_) | Expr::Pi => zero(),
            Expr::Var(v) => {
                if *v == var {
                    one()
                } else {
                    zero()
                }
            }
            Expr::Neg(a) => neg(a.diff(var)?),
            Expr::Call(func, a) => {
                let da = a.diff(var)?;
                let a = (**a).clone();
                let outer = match func {
                    Func::Sin => call(Func::Cos, a),
                    Func::Cos => neg(call(Func::Sin, a)),
                    Func::Exp => call(Func::Exp, a),
                    Func::Abs => div(a.clone(), call(Func::Abs, a)),
                    Func::Sqrt => div(one(), mul(Expr::Const(2.0), call(Func::Sqrt, a))),
                };
                mul(outer, da)
            }
            Expr::Binary(op, a, b) => {
                let da = a.diff(var)?;
                let db = b.diff(var)?;
                let (a, b) = ((**a).clone(), (**b).clone());
                match op {
                    BinOp::Add => add(da, db),
                    BinOp::Sub => sub(da, db),
                    BinOp::Mul => add(mul(da, b), mul(a, db)),
                    BinOp::Div => div(sub(mul(da, b.clone()), mul(a, db)), mul(b.clone(), b)),
                    BinOp::Pow => {
                        if b.depends_on(var) {
                            return Err(DiffError::VariableExponent(self.to_string()));
                        }
                        let lowered = match b.as_constant() {
                            Some(n) => Expr::Const(n - 1.0),
                            None => sub(b.clone(), one()),
                        };
                        mul(mul(b, pow(a, lowered)), da)
                    }
                }
            }
        })
    }
}

fn zero() -> Expr {
    Expr::Const(0.0)
}

fn one() -> Expr {
    Expr::Const(1.0)
}

fn is(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Const(c) if *c == v)
}

fn call(func: Func, a: Expr) -> Expr {
    Expr::Call(func, Box::new(a))
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        a => Expr::Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    if is(&a, 0.0) {
        b
    } else if is(&b, 0.0) {
        a
    } else {
        Expr::Binary(BinOp::Add, Box::new(a), Box::new(b))
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    if is(&b, 0.0) {
        a
    } else if is(&a, 0.0) {
        neg(b)
    } else {
        Expr::Binary(BinOp::Sub, Box::new(a), Box::new(b))
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if is(&a, 0.0) || is(&b, 0.0) {
        zero()
    } else if is(&a, 1.0) {
        b
    } else if is(&b, 1.0) {
        a
    } else {
        Expr::Binary(BinOp::Mul, Box::new(a), Box::new(b))
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    if is(&a, 0.0) {
        zero()
    } else if is(&b, 1.0) {
        a
    } else {
        Expr::Binary(BinOp::Div, Box::new(a), Box::new(b))
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    if is(&b, 1.0) {
        a
    } else if is(&b, 0.0) {
        one()
    } else {
        Expr::Binary(BinOp::Pow, Box::new(a), Box::new(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Bindings};

    const XY: [Var; 2] = [Var::X, Var::Y];

    fn d(src: &str, var: Var, at: (f64, f64)) -> f64 {
        parse(src, &XY)
            .unwrap()
            .diff(var)
            .unwrap()
            .eval(&Bindings::xy(at.0, at.1))
            .unwrap()
    }

    fn central(src: &str, var: Var, at: (f64, f64)) -> f64 {
        let e = parse(src, &XY).unwrap();
        let h = 1e-6;
        let (p, m) = match var {
            Var::X => ((at.0 + h, at.1), (at.0 - h, at.1)),
            Var::Y => ((at.0, at.1 + h), (at.0, at.1 - h)),
        };
        (e.eval_xy(p.0, p.1).unwrap() - e.eval_xy(m.0, m.1).unwrap()) / (2.0 * h)
    }

    #[test]
    fn cosine_at_zero() {
        assert_eq!(d("cos(y)", Var::Y, (0.0, 0.0)).abs(), 0.0);
    }

    #[test]
    fn product_partial() {
        assert_eq!(d("x*y", Var::X, (3.0, 5.0)), 5.0);
    }

    #[test]
    fn cosine_profile_slope_against_finite_difference() {
        let src = "2 + cos(2*pi*y)";
        let fd = central(src, Var::Y, (0.3, 0.25));
        let exact = d(src, Var::Y, (0.3, 0.25));
        assert!((exact - fd).abs() <= 1e-7 * fd.abs());
        assert!((exact + 2.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn folding_keeps_trees_small() {
        let e = parse("3*x + y", &XY).unwrap().diff(Var::X).unwrap();
        assert_eq!(e, Expr::Const(3.0));
        let e = parse("y^2", &XY).unwrap().diff(Var::X).unwrap();
        assert_eq!(e, Expr::Const(0.0));
    }

    #[test]
    fn powers() {
        for (src, at) in [
            ("x^3", (1.3, 0.0)),
            ("(1 + x*x)^-2", (0.7, 0.0)),
            ("x^y", (1.7, 2.5)),
            ("sqrt(1 + x^2) / (2 + sin(x))", (0.4, 0.0)),
            ("abs(x - 0.5) * exp(-x)", (0.9, 0.0)),
        ] {
            let fd = central(src, Var::X, at);
            let exact = d(src, Var::X, at);
            assert!((exact - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "{src}: {exact} vs {fd}");
        }
    }

    #[test]
    fn variable_exponent_is_rejected() {
        let e = parse("2^x", &XY).unwrap();
        assert!(matches!(e.diff(Var::X), Err(DiffError::VariableExponent(_))));
        assert!(e.diff(Var::Y).is_ok());
    }
}
