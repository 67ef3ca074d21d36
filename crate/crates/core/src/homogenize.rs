//! Effective coefficients across `x` and the one-dimensional limit problem.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::expr::{Bindings, Expr};
use crate::fem::{solve_cell, solve_homog_1d, CellSolution, FemError, Homog1DSolution, SolverOptions};
use crate::geometry::ProfileSpec;

/// Coefficients at one anchor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveRow {
    pub x: f64,
    pub r: f64,
    pub p: f64,
    pub l: f64,
    pub f0: f64,
}

/// Anchored effective coefficients, sorted by `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveTable {
    rows: Vec<EffectiveRow>,
}

impl EffectiveTable {
    /// # Panics
    /// If `rows` is empty.
    pub fn new(mut rows: Vec<EffectiveRow>) -> EffectiveTable {
        assert!(!rows.is_empty(), "effective table needs at least one anchor");
        rows.sort_by(|a, b| a.x.total_cmp(&b.x));
        EffectiveTable { rows }
    }

    pub fn rows(&self) -> &[EffectiveRow] {
        &self.rows
    }

    /// Linear interpolation between neighbouring anchors, constant beyond the
    /// first and last.
    pub fn eval(&self, x: f64) -> EffectiveRow {
        let rows = &self.rows;
        let last = rows.len() - 1;
        if x <= rows[0].x {
            return EffectiveRow { x, ..rows[0] };
        }
        if x >= rows[last].x {
            return EffectiveRow { x, ..rows[last] };
        }
        let j = rows.partition_point(|r| r.x <= x) - 1;
        let (a, b) = (rows[j], rows[j + 1]);
        let s = (x - a.x) / (b.x - a.x);
        let lerp = |u: f64, v: f64| u + s * (v - u);
        EffectiveRow {
            x,
            r: lerp(a.r, b.r),
            p: lerp(a.p, b.p),
            l: lerp(a.l, b.l),
            f0: lerp(a.f0, b.f0),
        }
    }

    /// Violations of `r > 0`, `r ≤ p/l` and strictly increasing anchors.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for row in &self.rows {
            if !(row.r > 0.0) || row.r > row.p / row.l * (1.0 + 1e-12) {
                out.push(format!("x = {}: r = {} outside (0, p/l = {}]", row.x, row.r, row.p / row.l));
            }
        }
        for w in self.rows.windows(2) {
            if w[1].x <= w[0].x {
                out.push(format!("anchors {} and {} are not increasing", w[0].x, w[1].x));
            }
        }
        out
    }

    /// Centred finite-difference estimates of `r′` at interior anchors.
    pub fn r_slopes(&self) -> Vec<(f64, f64)> {
        self.rows
            .windows(3)
            .map(|w| (w[1].x, (w[2].r - w[0].r) / (w[2].x - w[0].x)))
            .collect()
    }

    /// CSV with header `x,r,p,l,f0`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,r,p,l,f0\n");
        for row in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", row.x, row.r, row.p, row.l, row.f0);
        }
        out
    }
}

/// Cell solutions at the anchors, in anchor order.
#[derive(Clone, Debug)]
pub struct CellBank {
    pub cells: Vec<CellSolution>,
}

impl CellBank {
    pub fn anchors(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells.iter().map(|c| c.anchor_x)
    }
}

/// Resolution and solver settings that do not depend on ε.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineParams {
    pub anchors: usize,
    pub n1: usize,
    pub n2: usize,
    pub n_1d: usize,
    pub solver: SolverOptions,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            anchors: 32,
            n1: 64,
            n2: 64,
            n_1d: 512,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HomogError {
    #[error("at least 8 anchors are needed, got {0}")]
    TooFewAnchors(usize),
    #[error("anchor x = {anchor}: {source}")]
    Anchor { anchor: f64, source: FemError },
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("effective table: {0}")]
    Invariant(String),
}

/// Solves the cell problem at the midpoint anchors `(j − 1/2)/M` in parallel.
pub fn compute_effective(
    spec: &ProfileSpec,
    f: &Expr,
    params: &PipelineParams,
) -> Result<(EffectiveTable, CellBank), HomogError> {
    let m = params.anchors;
    if m < 8 {
        return Err(HomogError::TooFewAnchors(m));
    }
    let cells = (0..m)
        .into_par_iter()
        .map(|j| {
            let x = (j as f64 + 0.5) / m as f64;
            solve_cell(spec, x, params.n1, params.n2, &params.solver)
                .map_err(|source| HomogError::Anchor { anchor: x, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rows = cells
        .iter()
        .map(|c| {
            let fx = f
                .eval(&Bindings::xy(c.anchor_x, 0.0))
                .map_err(|e| HomogError::Anchor { anchor: c.anchor_x, source: e.into() })?;
            Ok(EffectiveRow {
                x: c.anchor_x,
                r: c.r,
                p: c.p,
                l: c.period,
                f0: c.p / c.period * fx,
            })
        })
        .collect::<Result<Vec<_>, HomogError>>()?;
    let table = EffectiveTable::new(rows);
    if let Some(v) = table.invariant_violations().into_iter().next() {
        return Err(HomogError::Invariant(v));
    }
    Ok((table, CellBank { cells }))
}

#[derive(Clone, Debug)]
pub struct Pipeline {
    pub table: EffectiveTable,
    pub cells: CellBank,
    pub homog: Homog1DSolution,
}

/// Effective coefficients followed by the 1D limit solve.
pub fn run_pipeline(spec: &ProfileSpec, f: &Expr, params: &PipelineParams) -> Result<Pipeline, HomogError> {
    let (table, cells) = compute_effective(spec, f, params)?;
    let homog = solve_homog_1d(&table, params.n_1d, f)?;
    Ok(Pipeline { table, cells, homog })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Var};
    use crate::geometry::Bounds;

    fn small() -> PipelineParams {
        PipelineParams {
            anchors: 8,
            n1: 16,
            n2: 8,
            n_1d: 256,
            solver: SolverOptions::default(),
        }
    }

    fn fx(src: &str) -> Expr {
        parse(src, &[Var::X]).unwrap()
    }

    #[test]
    fn flat_rows() {
        let spec = ProfileSpec::parse("2", "1", Bounds::new(1.0, 3.0, 0.5, 1.5).unwrap()).unwrap();
        let f = fx("1+cos(pi*x)");
        let (table, _) = compute_effective(&spec, &f, &small()).unwrap();
        for row in table.rows() {
            assert!((row.r - 2.0).abs() < 1e-12);
            assert!((row.p - 2.0).abs() < 1e-12);
            assert_eq!(row.l, 1.0);
            let expected = 2.0 * (1.0 + (std::f64::consts::PI * row.x).cos());
            assert!((row.f0 - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn x_dependent_flat_top() {
        let spec = ProfileSpec::parse("1.5 + x", "1", Bounds::new(1.0, 3.0, 0.5, 1.5).unwrap()).unwrap();
        let (table, _) = compute_effective(&spec, &fx("1"), &small()).unwrap();
        for row in table.rows() {
            assert!((row.r - (1.5 + row.x)).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation() {
        let table = EffectiveTable::new(vec![
            EffectiveRow { x: 0.25, r: 1.0, p: 2.0, l: 1.0, f0: 4.0 },
            EffectiveRow { x: 0.75, r: 3.0, p: 2.0, l: 1.5, f0: 0.0 },
        ]);
        assert_eq!(table.eval(0.25), table.rows()[0]);
        let mid = table.eval(0.5);
        assert_eq!((mid.r, mid.l, mid.f0), (2.0, 1.25, 2.0));
        assert_eq!(table.eval(0.0).r, 1.0);
        assert_eq!(table.eval(1.0).r, 3.0);
        assert!(table.to_csv().starts_with("x,r,p,l,f0\n0.25,1,2,1,4\n"));
    }

    #[test]
    fn unit_forcing_gives_unit_solution() {
        let spec = ProfileSpec::parse(
            "2 + cos(2*pi*y/(1+0.5*x*(1-x)))",
            "1+0.5*x*(1-x)",
            Bounds::new(1.0, 3.0, 1.0, 1.25).unwrap(),
        )
        .unwrap();
        let run = run_pipeline(&spec, &fx("1"), &small()).unwrap();
        assert!(run.homog.u.iter().all(|u| (u - 1.0).abs() < 1e-12));
    }

    #[test]
    fn too_few_anchors() {
        let spec = ProfileSpec::parse("2", "1", Bounds::new(1.0, 3.0, 0.5, 1.5).unwrap()).unwrap();
        let params = PipelineParams { anchors: 4, ..small() };
        assert!(matches!(
            compute_effective(&spec, &fx("1"), &params),
            Err(HomogError::TooFewAnchors(4))
        ));
    }
}
