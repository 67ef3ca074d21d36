//! Unfolding `T_ε` and averaging `U_ε` on sampled fields, with the
//! diagnostics that tie integrals over `R^ε` to integrals over `(0,1) × Y*`.
//!
//! Fields on the thin domain are extended by zero. A field `φ` unfolds to
//! `T_ε(φ)(x, y₁, y₂) = φ([x]_ε + Γ y₁, ε y₂)` for `y₁ < l([x]_ε)`, and to zero
//! otherwise.

mod average;
mod grid;
mod quadrature;

use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::geometry::ProfileSpec;

pub use average::{average, Averaged, TwoScaleField};
pub use grid::{char_gap, unfold, UnfoldGrid, UnfoldedField};
pub use quadrature::{adjoint_gap, left_inverse_residual, rescaled_norm, uci_gap, IdentityGap, ThinQuadrature};

#[derive(Debug, Error)]
pub enum UnfoldError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("averaging needs at least 8 quadrature points, got {0}")]
    Quadrature(usize),
    #[error("norm exponent must be 1 or 2, got {0}")]
    Exponent(u32),
    #[error("unfolding grid sizes must be positive, got ({0}, {1}, {2})")]
    Grid(usize, usize, usize),
}

/// `R^ε` for one profile and one ε.
#[derive(Clone, Debug)]
pub struct ThinDomain {
    pub spec: ProfileSpec,
    pub eps: f64,
}

impl ThinDomain {
    pub fn new(spec: ProfileSpec, eps: f64) -> ThinDomain {
        ThinDomain { spec, eps }
    }

    pub fn top(&self, x: f64) -> Result<f64, EvalError> {
        self.spec.top(x, self.eps)
    }

    pub fn contains(&self, x: f64, y: f64) -> Result<bool, EvalError> {
        Ok(x > 0.0 && x < 1.0 && y > 0.0 && y < self.top(x)?)
    }
}

/// Real field on `R^ε`, zero outside it.
pub trait ThinField: Sync {
    fn domain(&self) -> &ThinDomain;

    /// Value at a point already known to lie in `R^ε`.
    fn sample_inside(&self, x: f64, y: f64) -> Result<f64, EvalError>;

    fn sample(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        if self.domain().contains(x, y)? {
            self.sample_inside(x, y)
        } else {
            Ok(0.0)
        }
    }
}

/// Closed-form field `φ(x, y)`.
#[derive(Clone, Debug)]
pub struct ExprField {
    pub domain: ThinDomain,
    pub expr: Expr,
}

impl ThinField for ExprField {
    fn domain(&self) -> &ThinDomain {
        &self.domain
    }

    fn sample_inside(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        self.expr.eval_xy(x, y)
    }
}

/// Field backed by a Rust closure.
pub struct FnField<F> {
    pub domain: ThinDomain,
    pub f: F,
}

impl<F> FnField<F>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    pub fn new(domain: ThinDomain, f: F) -> Self {
        FnField { domain, f }
    }
}

impl<F> ThinField for FnField<F>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    fn domain(&self) -> &ThinDomain {
        &self.domain
    }

    fn sample_inside(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        Ok((self.f)(x, y))
    }
}
