use super::sparse::CsrMatrix;
use super::FemError;
use crate::geometry::CellGeometry;
use crate::mesh::{EdgeTag, TriMesh};

const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
];

/// Gradients of the three barycentric hat functions on triangle `t`.
pub fn basis_gradients(mesh: &TriMesh, t: usize) -> Result<[[f64; 2]; 3], FemError> {
    let [a, b, c] = mesh.triangles[t].map(|v| mesh.vertices[v]);
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    if !(det > 0.0) {
        return Err(FemError::DegenerateTriangle { triangle: t, area: 0.5 * det });
    }
    Ok([
        [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
        [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
        [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
    ])
}

/// Gradient of the P1 interpolant of `values` on triangle `t`.
pub fn field_gradient(mesh: &TriMesh, values: &[f64], t: usize) -> Result<[f64; 2], FemError> {
    let g = basis_gradients(mesh, t)?;
    let v = mesh.triangles[t].map(|i| values[i]);
    Ok([
        g[0][0] * v[0] + g[1][0] * v[1] + g[2][0] * v[2],
        g[0][1] * v[0] + g[1][1] * v[1] + g[2][1] * v[2],
    ])
}

pub(crate) type Triplets = Vec<(usize, usize, f64)>;

/// Element stiffness and consistent mass triplets with vertex `v` mapped to
/// unknown `dof[v]`.
pub(crate) fn element_triplets(mesh: &TriMesh, dof: &[usize]) -> Result<(Triplets, Triplets), FemError> {
    let mut stiffness = Vec::with_capacity(9 * mesh.triangles.len());
    let mut mass = Vec::with_capacity(9 * mesh.triangles.len());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let g = basis_gradients(mesh, t)?;
        let area = mesh.triangle_area(t);
        for i in 0..3 {
            for j in 0..3 {
                let (p, q) = (dof[tri[i]], dof[tri[j]]);
                stiffness.push((p, q, area * (g[i][0] * g[j][0] + g[i][1] * g[j][1])));
                let m = if i == j { area / 6.0 } else { area / 12.0 };
                mass.push((p, q, m));
            }
        }
    }
    Ok((stiffness, mass))
}

/// P1 stiffness and consistent mass matrices, one unknown per vertex.
pub fn assemble_p1(mesh: &TriMesh) -> Result<(CsrMatrix, CsrMatrix), FemError> {
    let identity: Vec<usize> = (0..mesh.vertices.len()).collect();
    let (k, m) = element_triplets(mesh, &identity)?;
    let n = mesh.vertices.len();
    Ok((CsrMatrix::from_triplets(n, &k), CsrMatrix::from_triplets(n, &m)))
}

/// `b_i = −∫ ∂G/∂y₁(x, y₁) φ_i dy₁` along the top boundary, using
/// `N₁ dS = −G′ dy₁` and four Gauss points per top edge.
pub fn top_flux_load(cell: &CellGeometry<'_>, mesh: &TriMesh) -> Result<Vec<f64>, FemError> {
    let mut b = vec![0.0; mesh.vertices.len()];
    for ([p, q], tag) in &mesh.boundary {
        if *tag != EdgeTag::Top {
            continue;
        }
        let (y_p, y_q) = (mesh.vertices[*p][0], mesh.vertices[*q][0]);
        let half = 0.5 * (y_q - y_p);
        let mid = 0.5 * (y_q + y_p);
        for (xi, w) in GAUSS4 {
            let y1 = mid + half * xi;
            let slope = cell.height_slope(y1)?;
            let phi_q = 0.5 * (1.0 + xi);
            let weight = -w * half.abs() * slope;
            b[*p] += weight * (1.0 - phi_q);
            b[*q] += weight * phi_q;
        }
    }
    Ok(b)
}

/// Same load with the profile replaced by its piecewise-linear chord, which
/// is the boundary the mesh actually has.
pub fn top_chord_load(mesh: &TriMesh) -> Vec<f64> {
    let mut b = vec![0.0; mesh.vertices.len()];
    for ([p, q], tag) in &mesh.boundary {
        if *tag != EdgeTag::Top {
            continue;
        }
        let (vp, vq) = (mesh.vertices[*p], mesh.vertices[*q]);
        // −∫ (ΔG/Δy₁) φ dy₁ over the edge, with ∫ φ = |Δy₁|/2 per endpoint.
        let rise = if vq[0] > vp[0] { vq[1] - vp[1] } else { vp[1] - vq[1] };
        b[*p] -= 0.5 * rise;
        b[*q] -= 0.5 * rise;
    }
    b
}
