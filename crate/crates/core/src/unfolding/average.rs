use super::{ThinDomain, ThinField, UnfoldError, UnfoldedField};
use crate::expr::EvalError;
use crate::geometry::Partition;

/// Function of `(x, y₁, y₂)` on `(0,1) × Y*`.
pub trait TwoScaleField: Sync {
    fn value(&self, x: f64, y1: f64, y2: f64) -> f64;
}

impl<F> TwoScaleField for F
where
    F: Fn(f64, f64, f64) -> f64 + Sync,
{
    fn value(&self, x: f64, y1: f64, y2: f64) -> f64 {
        self(x, y1, y2)
    }
}

impl TwoScaleField for UnfoldedField {
    fn value(&self, x: f64, y1: f64, y2: f64) -> f64 {
        self.lookup(x, y1, y2)
    }
}

/// `U_ε(ψ)` as a field on `R^ε`, with the `z`-average taken by the midpoint
/// rule on `nq` points.
pub struct Averaged<'a, P: ?Sized> {
    pub domain: ThinDomain,
    partition: &'a Partition,
    psi: &'a P,
    nq: usize,
}

/// `U_ε(ψ)(x, y) = (1/l_k) ∫₀^{l_k} ψ(x_k + Γ_k z, (x − x_k)/Γ_k, y/ε) dz` on
/// the interval `[x_k, x_{k+1})` containing `x`.
pub fn average<'a, P: TwoScaleField + ?Sized>(
    psi: &'a P,
    domain: ThinDomain,
    partition: &'a Partition,
    nq: usize,
) -> Result<Averaged<'a, P>, UnfoldError> {
    if nq < 8 {
        return Err(UnfoldError::Quadrature(nq));
    }
    Ok(Averaged {
        domain,
        partition,
        psi,
        nq,
    })
}

impl<P: TwoScaleField + ?Sized> ThinField for Averaged<'_, P> {
    fn domain(&self) -> &ThinDomain {
        &self.domain
    }

    fn sample_inside(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        let at = self.partition.locate(x);
        let length = at.period_at_base;
        let y2 = y / self.domain.eps;
        let dz = length / self.nq as f64;
        let total: f64 = (0..self.nq)
            .map(|q| {
                let z = (q as f64 + 0.5) * dz;
                self.psi.value(at.base + at.gamma * z, at.y1, y2)
            })
            .sum();
        Ok(total / self.nq as f64)
    }
}
