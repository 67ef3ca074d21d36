//! P1 finite elements for the cell problem, the thin-domain Neumann problem
//! and the one-dimensional limit problem.

mod assemble;
mod cell;
mod homog1d;
mod sparse;
mod thin;

use thiserror::Error;

use crate::expr::EvalError;
use crate::geometry::GeometryError;
use crate::mesh::MeshError;

pub use assemble::{assemble_p1, basis_gradients, field_gradient, top_chord_load, top_flux_load};
pub use cell::{solve_cell, CellSolution};
pub use homog1d::{assemble_homog_1d, solve_homog_1d, Homog1DSolution};
pub use sparse::{solve_spd, solve_tridiagonal, CsrMatrix, SolveStats};
pub use thin::{solve_thin_neumann, FemField, GradientComponent};

#[derive(Debug, Error)]
pub enum FemError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("triangle {triangle} has non-positive area {area}")]
    DegenerateTriangle { triangle: usize, area: f64 },
    #[error("conjugate gradients stopped after {iterations} iterations at relative residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("matrix is not positive definite (detected at step {iteration})")]
    NotPositiveDefinite { iteration: usize },
    #[error("cell at x = {anchor}: top flux sums to {sum:e}, expected 0")]
    Incompatible { anchor: f64, sum: f64 },
    #[error("cell at x = {anchor}: {source}")]
    Cell { anchor: f64, source: Box<FemError> },
    #[error("cell at x = {anchor}: {what}")]
    CellInvariant { anchor: f64, what: String },
    #[error("interpolated coefficient {name} = {value} at x = {x} is not positive")]
    Coefficient { name: &'static str, x: f64, value: f64 },
}

/// Conjugate-gradient controls; `max_iter = None` means `20 ×` the number of unknowns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: None,
        }
    }
}

impl SolverOptions {
    pub fn max_iter_for(&self, unknowns: usize) -> usize {
        self.max_iter.unwrap_or(20 * unknowns.max(1))
    }
}
