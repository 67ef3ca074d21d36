use rayon::prelude::*;

use super::{average, unfold, ThinDomain, ThinField, TwoScaleField, UnfoldError, UnfoldGrid};
use crate::expr::EvalError;
use crate::geometry::Partition;

/// Midpoint rule on `R^ε`: `per_interval` columns in each partition interval,
/// `ny` rows under the top in each column.
#[derive(Clone, Debug)]
pub struct ThinQuadrature {
    pub eps: f64,
    /// `(x, y, weight)`.
    pub nodes: Vec<(f64, f64, f64)>,
}

impl ThinQuadrature {
    pub fn new(
        domain: &ThinDomain,
        partition: &Partition,
        per_interval: usize,
        ny: usize,
    ) -> Result<ThinQuadrature, UnfoldError> {
        if per_interval == 0 || ny == 0 {
            return Err(UnfoldError::Grid(per_interval, ny, 1));
        }
        let columns = partition
            .points
            .windows(2)
            .flat_map(|w| {
                let dx = (w[1] - w[0]) / per_interval as f64;
                (0..per_interval).map(move |c| (w[0] + (c as f64 + 0.5) * dx, dx))
            })
            .collect::<Vec<_>>();
        let nodes = columns
            .par_iter()
            .map(|&(x, dx)| -> Result<Vec<(f64, f64, f64)>, EvalError> {
                let top = domain.top(x)?;
                let dy = top / ny as f64;
                Ok((0..ny).map(|r| (x, (r as f64 + 0.5) * dy, dx * dy)).collect())
            })
            .collect::<Result<Vec<_>, _>>()?
            .concat();
        Ok(ThinQuadrature { eps: domain.eps, nodes })
    }

    /// `∫_{R^ε} g`.
    pub fn integrate(&self, g: impl Fn(f64, f64) -> Result<f64, EvalError> + Sync) -> Result<f64, EvalError> {
        let terms = self
            .nodes
            .par_iter()
            .map(|&(x, y, w)| g(x, y).map(|v| w * v))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(terms.iter().sum())
    }
}

/// Two sides of an integral identity and their relative gap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityGap {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

impl IdentityGap {
    fn new(lhs: f64, rhs: f64) -> IdentityGap {
        let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
        IdentityGap {
            lhs,
            rhs,
            gap: (lhs - rhs).abs() / scale,
        }
    }
}

/// `∫ (1/l([x]_ε)) T_ε(φ)` on the grid against `(1/ε) ∫_{R^ε} φ`.
pub fn uci_gap<F: ThinField + ?Sized>(
    field: &F,
    partition: &Partition,
    grid: &UnfoldGrid,
    quad: &ThinQuadrature,
) -> Result<IdentityGap, UnfoldError> {
    let lhs = unfold(field, partition, grid)?.uci_integral();
    let rhs = quad.integrate(|x, y| field.sample_inside(x, y))? / quad.eps;
    Ok(IdentityGap::new(lhs, rhs))
}

/// `(1/ε) ∫_{R^ε} φ U_ε(ψ)` against `∫ (1/l([x]_ε)) T_ε(φ) ψ`.
pub fn adjoint_gap<F: ThinField + ?Sized, P: TwoScaleField + ?Sized>(
    field: &F,
    psi: &P,
    partition: &Partition,
    grid: &UnfoldGrid,
    quad: &ThinQuadrature,
    nq: usize,
) -> Result<IdentityGap, UnfoldError> {
    let averaged = average(psi, field.domain().clone(), partition, nq)?;
    let lhs = quad.integrate(|x, y| Ok(field.sample_inside(x, y)? * averaged.sample_inside(x, y)?))? / quad.eps;
    let rhs = unfold(field, partition, grid)?.integrate(|v, x, y1, y2, period| v * psi.value(x, y1, y2) / period);
    Ok(IdentityGap::new(lhs, rhs))
}

/// `max |U_ε(T_ε φ) − φ|` over the quadrature nodes.
pub fn left_inverse_residual<F: ThinField + ?Sized>(
    field: &F,
    partition: &Partition,
    grid: &UnfoldGrid,
    quad: &ThinQuadrature,
    nq: usize,
) -> Result<f64, UnfoldError> {
    let unfolded = unfold(field, partition, grid)?;
    let back = average(&unfolded, field.domain().clone(), partition, nq)?;
    let worst = quad
        .nodes
        .par_iter()
        .map(|&(x, y, _)| Ok((back.sample_inside(x, y)? - field.sample_inside(x, y)?).abs()))
        .collect::<Result<Vec<f64>, EvalError>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(worst)
}

/// `|||φ|||_p = ε^{−1/p} ‖φ‖_{L^p(R^ε)}` for `p ∈ {1, 2}`.
pub fn rescaled_norm<F: ThinField + ?Sized>(field: &F, quad: &ThinQuadrature, p: u32) -> Result<f64, UnfoldError> {
    match p {
        1 => Ok(quad.integrate(|x, y| Ok(field.sample_inside(x, y)?.abs()))? / quad.eps),
        2 => Ok((quad.integrate(|x, y| Ok(field.sample_inside(x, y)?.powi(2)))? / quad.eps).sqrt()),
        _ => Err(UnfoldError::Exponent(p)),
    }
}
