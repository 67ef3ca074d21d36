use super::assemble::{element_triplets, field_gradient, top_chord_load};
use super::sparse::{solve_spd, CsrMatrix, SolveStats};
use super::{FemError, SolverOptions};
use crate::geometry::{cell_at, ProfileSpec};
use crate::mesh::{mesh_cell, TriMesh};

/// Discrete solution of the cell problem at one anchor.
#[derive(Clone, Debug)]
pub struct CellSolution {
    pub anchor_x: f64,
    pub period: f64,
    pub mesh: TriMesh,
    /// `X` at every vertex; periodic partners carry the same value.
    pub values: Vec<f64>,
    /// `∇X` per triangle.
    pub gradients: Vec<[f64; 2]>,
    pub r: f64,
    /// `|Y*(x)|` of the meshed cell.
    pub p: f64,
    /// `(1/l) ∫ |∇(y₁ − X)|²`, equal to `r` for an exact discrete solve.
    pub energy_r: f64,
    pub stats: SolveStats,
}

impl CellSolution {
    /// `X` and `∇X` at a cell point, projected onto the meshed cell.
    pub fn sample(&self, y1: f64, y2: f64) -> (f64, [f64; 2]) {
        let hit = self.mesh.locate_clamped(y1, y2);
        let tri = self.mesh.triangles[hit.triangle];
        let value = (0..3).map(|k| hit.bary[k] * self.values[tri[k]]).sum();
        (value, self.gradients[hit.triangle])
    }

    pub fn value(&self, y1: f64, y2: f64) -> f64 {
        self.sample(y1, y2).0
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Area-weighted mean of `X`.
    pub fn mean(&self) -> f64 {
        area_mean(&self.mesh, &self.values)
    }
}

fn area_mean(mesh: &TriMesh, values: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut area = 0.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let a = mesh.triangle_area(t);
        total += a * (values[tri[0]] + values[tri[1]] + values[tri[2]]) / 3.0;
        area += a;
    }
    total / area
}

/// Solves `−ΔX = 0` in `Y*(x)`, `∂X/∂N = N₁` on the top, `0` on the bottom,
/// `l(x)`-periodic in `y₁`, with zero mean.
///
/// The top flux is integrated along the meshed chord of the profile, which
/// keeps `r` and its energy form equal up to solver tolerance.
pub fn solve_cell(
    spec: &ProfileSpec,
    x: f64,
    n1: usize,
    n2: usize,
    solver: &SolverOptions,
) -> Result<CellSolution, FemError> {
    let cell = cell_at(spec, x)?;
    let mesh = mesh_cell(&cell, n1, n2)?;
    let nv = mesh.vertices.len();

    // Right-column vertices share the unknown of their left partner.
    let mut dof = vec![usize::MAX; nv];
    for &(left, right) in &mesh.periodic_pairs {
        dof[right] = left;
    }
    let mut ndof = 0;
    let mut compact = vec![usize::MAX; nv];
    for v in 0..nv {
        if dof[v] == usize::MAX {
            compact[v] = ndof;
            ndof += 1;
        }
    }
    for v in 0..nv {
        dof[v] = if dof[v] == usize::MAX { compact[v] } else { compact[dof[v]] };
    }

    let vertex_load = top_chord_load(&mesh);
    let total: f64 = vertex_load.iter().sum();
    if total.abs() > 1e-8 {
        return Err(FemError::Incompatible { anchor: x, sum: total });
    }
    let mut b = vec![0.0; ndof];
    for (v, load) in vertex_load.iter().enumerate() {
        b[dof[v]] += load;
    }

    // Pin unknown 0 to remove the constants from the kernel.
    let (stiffness, _) = element_triplets(&mesh, &dof)?;
    let reduced: Vec<(usize, usize, f64)> = stiffness
        .into_iter()
        .filter(|&(r, c, _)| r != 0 && c != 0)
        .map(|(r, c, v)| (r - 1, c - 1, v))
        .collect();
    let a = CsrMatrix::from_triplets(ndof - 1, &reduced);
    let (sol, stats) = solve_spd(&a, &b[1..], solver.tol, solver.max_iter_for(ndof - 1))
        .map_err(|e| FemError::Cell { anchor: x, source: Box::new(e) })?;
    let mut values: Vec<f64> = (0..nv)
        .map(|v| if dof[v] == 0 { 0.0 } else { sol[dof[v] - 1] })
        .collect();
    let mean = area_mean(&mesh, &values);
    for v in &mut values {
        *v -= mean;
    }

    let gradients = (0..mesh.triangles.len())
        .map(|t| field_gradient(&mesh, &values, t))
        .collect::<Result<Vec<_>, _>>()?;
    let mut flux = 0.0;
    let mut energy = 0.0;
    let mut p = 0.0;
    for (t, g) in gradients.iter().enumerate() {
        let area = mesh.triangle_area(t);
        p += area;
        flux += area * (1.0 - g[0]);
        energy += area * ((1.0 - g[0]).powi(2) + g[1] * g[1]);
    }
    let l = cell.period;
    let solution = CellSolution {
        anchor_x: x,
        period: l,
        mesh,
        values,
        gradients,
        r: flux / l,
        p,
        energy_r: energy / l,
        stats,
    };
    check_invariants(&solution)?;
    Ok(solution)
}

fn check_invariants(s: &CellSolution) -> Result<(), FemError> {
    let fail = |what: String| Err(FemError::CellInvariant { anchor: s.anchor_x, what });
    if s.mean().abs() > 1e-10 * s.p {
        return fail(format!("mean of X is {:e}", s.mean()));
    }
    if !(s.r > 0.0) || s.r > s.p / s.period * (1.0 + 1e-12) {
        return fail(format!("r = {} outside (0, p/l = {}]", s.r, s.p / s.period));
    }
    if (s.r - s.energy_r).abs() > 1e-6 * s.r.max(1.0) {
        return fail(format!("r = {} but energy gives {}", s.r, s.energy_r));
    }
    Ok(())
}
