//! Structured triangulations of the reference cell and of the thin domain.
//!
//! Both meshes are column-structured: vertex `(i, j)` sits at
//! `(xs[i], tops[i] * j / ny)`, so that every horizontal mesh line is straight
//! and point location costs a binary search.

use std::fmt::Write as _;

use thiserror::Error;

use crate::expr::EvalError;
use crate::geometry::{CellGeometry, Partition, ProfileSpec};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh resolution {got} is below the minimum {min}")]
    Resolution { got: usize, min: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("non-positive height {height} at x = {x}")]
    Height { x: f64, height: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeTag {
    Bottom,
    Top,
    Left,
    Right,
}

impl EdgeTag {
    pub fn name(self) -> &'static str {
        match self {
            EdgeTag::Bottom => "BOTTOM",
            EdgeTag::Top => "TOP",
            EdgeTag::Left => "LEFT",
            EdgeTag::Right => "RIGHT",
        }
    }
}

/// Triangle containing a point with its barycentric coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub triangle: usize,
    pub bary: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<([usize; 2], EdgeTag)>,
    /// `(left, right)` vertex pairs identified under periodicity.
    pub periodic_pairs: Vec<(usize, usize)>,
    xs: Vec<f64>,
    tops: Vec<f64>,
    ny: usize,
}

impl TriMesh {
    fn structured(xs: Vec<f64>, tops: Vec<f64>, ny: usize) -> TriMesh {
        let nx = xs.len() - 1;
        let id = |i: usize, j: usize| i * (ny + 1) + j;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for (x, t) in xs.iter().zip(&tops) {
            for j in 0..=ny {
                vertices.push([*x, t * j as f64 / ny as f64]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                let (v00, v10, v11, v01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        let mut boundary = Vec::with_capacity(2 * (nx + ny));
        for i in 0..nx {
            boundary.push(([id(i, 0), id(i + 1, 0)], EdgeTag::Bottom));
            boundary.push(([id(i + 1, ny), id(i, ny)], EdgeTag::Top));
        }
        for j in 0..ny {
            boundary.push(([id(0, j + 1), id(0, j)], EdgeTag::Left));
            boundary.push(([id(nx, j), id(nx, j + 1)], EdgeTag::Right));
        }
        TriMesh {
            vertices,
            triangles,
            boundary,
            periodic_pairs: Vec::new(),
            xs,
            tops,
            ny,
        }
    }

    pub fn columns(&self) -> &[f64] {
        &self.xs
    }

    /// Height of the top chord at each column.
    pub fn column_tops(&self) -> &[f64] {
        &self.tops
    }

    pub fn rows(&self) -> usize {
        self.ny
    }

    pub fn vertex_index(&self, column: usize, row: usize) -> usize {
        column * (self.ny + 1) + row
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Height of the piecewise-linear top boundary at `x`, clamped to the mesh.
    pub fn chord_top(&self, x: f64) -> f64 {
        let i = self.column(x);
        let s = ((x - self.xs[i]) / (self.xs[i + 1] - self.xs[i])).clamp(0.0, 1.0);
        self.tops[i] + s * (self.tops[i + 1] - self.tops[i])
    }

    fn column(&self, x: f64) -> usize {
        self.xs
            .partition_point(|&c| c <= x)
            .saturating_sub(1)
            .min(self.xs.len() - 2)
    }

    /// Triangle containing `(x, y)`, or `None` outside the meshed region.
    pub fn locate(&self, x: f64, y: f64) -> Option<Hit> {
        let (lo, hi) = (self.xs[0], self.xs[self.xs.len() - 1]);
        let slack = 1e-12 * (hi - lo);
        if x < lo - slack || x > hi + slack {
            return None;
        }
        let top = self.chord_top(x);
        if y < -1e-12 * top || y > top * (1.0 + 1e-12) {
            return None;
        }
        Some(self.locate_clamped(x, y))
    }

    /// Like [`TriMesh::locate`] after projecting `(x, y)` vertically and
    /// horizontally onto the meshed region.
    pub fn locate_clamped(&self, x: f64, y: f64) -> Hit {
        let x = x.clamp(self.xs[0], self.xs[self.xs.len() - 1]);
        let i = self.column(x);
        let top = self.chord_top(x);
        let y = y.clamp(0.0, top);
        let row = ((y / top * self.ny as f64).floor() as usize).min(self.ny - 1);
        let first = 2 * (i * self.ny + row);
        let mut best = Hit {
            triangle: first,
            bary: [f64::NEG_INFINITY; 3],
        };
        let mut best_min = f64::NEG_INFINITY;
        for t in [first, first + 1] {
            let bary = self.barycentric(t, x, y);
            let m = bary.iter().copied().fold(f64::INFINITY, f64::min);
            if m > best_min {
                best_min = m;
                best = Hit { triangle: t, bary };
            }
        }
        best
    }

    pub fn barycentric(&self, t: usize, x: f64, y: f64) -> [f64; 3] {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((x - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (y - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (y - a[1]) - (x - a[0]) * (b[1] - a[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Plain-text export: `v x y`, `t i j k` and `e i j TAG` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for [x, y] in &self.vertices {
            let _ = writeln!(out, "v {x} {y}");
        }
        for [a, b, c] in &self.triangles {
            let _ = writeln!(out, "t {a} {b} {c}");
        }
        for ([a, b], tag) in &self.boundary {
            let _ = writeln!(out, "e {a} {b} {}", tag.name());
        }
        out
    }
}

/// Mesh of `Y*(x)` with `n1` columns and `n2` rows. The right column copies
/// the left one so that the periodic pairs coincide up to translation by `l(x)`.
pub fn mesh_cell(cell: &CellGeometry<'_>, n1: usize, n2: usize) -> Result<TriMesh, MeshError> {
    for n in [n1, n2] {
        if n == 0 {
            return Err(MeshError::Resolution { got: n, min: 1 });
        }
    }
    let xs: Vec<f64> = (0..=n1).map(|i| cell.period * i as f64 / n1 as f64).collect();
    let mut tops = Vec::with_capacity(n1 + 1);
    for &x in &xs[..n1] {
        let height = cell.height(x)?;
        if !(height >= 1e-12) {
            return Err(MeshError::Height { x, height });
        }
        tops.push(height);
    }
    tops.push(tops[0]);
    let mut mesh = TriMesh::structured(xs, tops, n2);
    mesh.periodic_pairs = (0..=n2)
        .map(|j| (mesh.vertex_index(0, j), mesh.vertex_index(n1, j)))
        .collect();
    Ok(mesh)
}

/// Mesh of the thin domain with `n_per` columns per partition interval and
/// `ny` rows.
pub fn mesh_thin(
    spec: &ProfileSpec,
    partition: &Partition,
    n_per: usize,
    ny: usize,
) -> Result<TriMesh, MeshError> {
    for (got, min) in [(n_per, 8), (ny, 4)] {
        if got < min {
            return Err(MeshError::Resolution { got, min });
        }
    }
    let mut xs = Vec::with_capacity(partition.len() * n_per + 1);
    for w in partition.points.windows(2) {
        for k in 0..n_per {
            xs.push(w[0] + (w[1] - w[0]) * k as f64 / n_per as f64);
        }
    }
    xs.push(1.0);
    let tops = xs
        .iter()
        .map(|&x| {
            let height = spec.top(x, partition.eps)?;
            if height >= 1e-12 * partition.eps {
                Ok(height)
            } else {
                Err(MeshError::Height { x, height })
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TriMesh::structured(xs, tops, ny))
}
