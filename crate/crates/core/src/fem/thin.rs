use super::assemble::{element_triplets, field_gradient};
use super::sparse::{solve_spd, CsrMatrix, SolveStats};
use super::{FemError, SolverOptions};
use crate::expr::{EvalError, Expr};
use crate::geometry::{Partition, ProfileSpec};
use crate::mesh::{mesh_thin, TriMesh};
use crate::unfolding::{ThinDomain, ThinField};

/// P1 field on a thin-domain mesh, extended by zero outside `R^ε`.
#[derive(Clone, Debug)]
pub struct FemField {
    pub domain: ThinDomain,
    pub mesh: TriMesh,
    pub values: Vec<f64>,
    pub gradients: Vec<[f64; 2]>,
    pub stats: SolveStats,
}

impl FemField {
    pub fn new(domain: ThinDomain, mesh: TriMesh, values: Vec<f64>) -> Result<FemField, FemError> {
        let gradients = (0..mesh.triangles.len())
            .map(|t| field_gradient(&mesh, &values, t))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FemField {
            domain,
            mesh,
            values,
            gradients,
            stats: SolveStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        })
    }

    /// P1 interpolant at `(x, y)` projected onto the meshed region.
    pub fn interpolate(&self, x: f64, y: f64) -> f64 {
        let hit = self.mesh.locate_clamped(x, y);
        let tri = self.mesh.triangles[hit.triangle];
        (0..3).map(|k| hit.bary[k] * self.values[tri[k]]).sum()
    }

    /// Gradient of the triangle containing the projection of `(x, y)`.
    pub fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        self.gradients[self.mesh.locate_clamped(x, y).triangle]
    }

    /// One gradient component as a thin field.
    pub fn gradient_component(&self, component: usize) -> GradientComponent<'_> {
        GradientComponent {
            field: self,
            component,
        }
    }
}

impl ThinField for FemField {
    fn domain(&self) -> &ThinDomain {
        &self.domain
    }

    fn sample_inside(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        Ok(self.interpolate(x, y))
    }
}

pub struct GradientComponent<'a> {
    field: &'a FemField,
    component: usize,
}

impl ThinField for GradientComponent<'_> {
    fn domain(&self) -> &ThinDomain {
        &self.field.domain
    }

    fn sample_inside(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        Ok(self.field.gradient(x, y)[self.component])
    }
}

/// Solves `−Δu + u = f(x)` in `R^ε` with homogeneous Neumann conditions on
/// the whole boundary.
pub fn solve_thin_neumann(
    spec: &ProfileSpec,
    partition: &Partition,
    f: &Expr,
    n_per: usize,
    ny: usize,
    solver: &SolverOptions,
) -> Result<FemField, FemError> {
    let mesh = mesh_thin(spec, partition, n_per, ny)?;
    let n = mesh.vertices.len();
    let identity: Vec<usize> = (0..n).collect();
    let (mut k, m) = element_triplets(&mesh, &identity)?;
    let mass = CsrMatrix::from_triplets(n, &m);
    k.extend(m);
    let system = CsrMatrix::from_triplets(n, &k);
    let nodal = mesh
        .vertices
        .iter()
        .map(|v| f.eval_xy(v[0], v[1]))
        .collect::<Result<Vec<_>, _>>()?;
    let rhs = mass.mul_vec(&nodal);
    let (values, stats) = solve_spd(&system, &rhs, solver.tol, solver.max_iter_for(n))?;
    let mut field = FemField::new(ThinDomain::new(spec.clone(), partition.eps), mesh, values)?;
    field.stats = stats;
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Var};
    use crate::geometry::{build_partition, Bounds};

    fn flat() -> ProfileSpec {
        ProfileSpec::parse("2", "1", Bounds::new(1.0, 3.0, 0.5, 1.5).unwrap()).unwrap()
    }

    fn forcing(src: &str) -> Expr {
        parse(src, &[Var::X, Var::Y]).unwrap()
    }

    #[test]
    fn constant_forcing_gives_constant_solution() {
        let spec = ProfileSpec::parse("2+cos(2*pi*y)", "1", Bounds::new(1.0, 3.0, 0.5, 1.5).unwrap())
            .unwrap();
        let p = build_partition(&spec, 0.125).unwrap();
        let opts = SolverOptions { tol: 1e-12, max_iter: None };
        let u = solve_thin_neumann(&spec, &p, &forcing("3"), 8, 4, &opts).unwrap();
        assert!(u.values.iter().all(|v| (v - 3.0).abs() < 1e-9));
        let zero = solve_thin_neumann(&spec, &p, &forcing("0"), 8, 4, &opts).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn flat_strip_matches_ode_solution() {
        let spec = flat();
        let exact = |x: f64| 1.0 + (std::f64::consts::PI * x).cos() / (1.0 + std::f64::consts::PI.powi(2));
        for eps in [0.25, 0.125, 1.0 / 16.0] {
            let p = build_partition(&spec, eps).unwrap();
            let u = solve_thin_neumann(&spec, &p, &forcing("1+cos(pi*x)"), 16, 8, &SolverOptions::default())
                .unwrap();
            let worst = u
                .mesh
                .vertices
                .iter()
                .zip(&u.values)
                .map(|(v, val)| (val - exact(v[0])).abs())
                .fold(0.0, f64::max);
            assert!(worst <= 5e-3, "eps {eps}: {worst}");
        }
    }

    #[test]
    fn zero_outside_domain() {
        let spec = flat();
        let p = build_partition(&spec, 0.125).unwrap();
        let u = solve_thin_neumann(&spec, &p, &forcing("1"), 8, 4, &SolverOptions::default()).unwrap();
        assert_eq!(u.sample(0.5, 0.3).unwrap(), 0.0);
        assert_eq!(u.sample(0.5, -0.01).unwrap(), 0.0);
        assert!((u.sample(0.5, 0.1).unwrap() - 1.0).abs() < 1e-9);
    }
}
