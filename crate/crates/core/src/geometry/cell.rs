use super::{GeometryError, ProfileSpec};
use crate::expr::EvalError;

/// Reference cell `Y*(x) = {0 < y₁ < l(x), 0 < y₂ < G(x, y₁)}` frozen at an anchor `x`.
#[derive(Clone, Copy, Debug)]
pub struct CellGeometry<'a> {
    pub spec: &'a ProfileSpec,
    pub anchor_x: f64,
    pub period: f64,
}

pub fn cell_at(spec: &ProfileSpec, x: f64) -> Result<CellGeometry<'_>, GeometryError> {
    let period = spec.period(x)?;
    if !(period > 0.0) {
        return Err(GeometryError::DegenerateCell {
            y1: 0.0,
            height: period,
        });
    }
    Ok(CellGeometry {
        spec,
        anchor_x: x,
        period,
    })
}

impl CellGeometry<'_> {
    /// Height `G(x, y₁)` of the cell at the anchor.
    pub fn height(&self, y1: f64) -> Result<f64, EvalError> {
        self.spec.height(self.anchor_x, y1)
    }

    /// `∂G/∂y(x, y₁)`.
    pub fn height_slope(&self, y1: f64) -> Result<f64, EvalError> {
        self.spec.height_slope(self.anchor_x, y1)
    }

    /// `|Y*(x)|` by the trapezoidal rule on `n` panels, which is spectrally
    /// accurate for smooth periodic heights.
    pub fn area(&self, n: usize) -> Result<f64, EvalError> {
        let n = n.max(1);
        let h = self.period / n as f64;
        let mut sum = 0.0;
        for i in 0..n {
            sum += self.height(i as f64 * h)?;
        }
        Ok(sum * h)
    }
}
