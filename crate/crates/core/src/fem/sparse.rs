use super::FemError;

/// Square sparse matrix in compressed row form with sorted column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate `(row, col, value)` entries.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> CsrMatrix {
        let mut counts = vec![0usize; n + 1];
        for &(r, _, _) in triplets {
            counts[r + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut order = vec![(0usize, 0.0f64); triplets.len()];
        let mut fill = counts.clone();
        for &(r, c, v) in triplets {
            order[fill[r]] = (c, v);
            fill[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for r in 0..n {
            let row = &mut order[counts[r]..counts[r + 1]];
            row.sort_by_key(|e| e.0);
            for &(c, v) in row.iter() {
                if cols.len() > row_ptr[r] && *cols.last().expect("non-empty") == c {
                    *vals.last_mut().expect("non-empty") += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_into(x, &mut y);
        y
    }

    fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            *out = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    /// `self + alpha * other`; both matrices must have the same dimension.
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix) -> CsrMatrix {
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.n {
            t.extend(self.row(r).map(|(c, v)| (r, c, v)));
            t.extend(other.row(r).map(|(c, v)| (r, c, alpha * v)));
        }
        CsrMatrix::from_triplets(self.n, &t)
    }

    /// Largest `|a_ij − a_ji|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }
}

/// Outcome of an iterative solve.
#[derive(Clone, Debug)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Conjugate gradients with Jacobi preconditioning. Stops once
/// `‖b − A x‖ ≤ tol ‖b‖`.
pub fn solve_spd(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats), FemError> {
    let n = a.dim();
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut residual = 1.0;
    for it in 0..max_iter {
        a.mul_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(FemError::NotPositiveDefinite { iteration: it });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        residual = norm(&r) / b_norm;
        if residual <= tol {
            return Ok((
                x,
                SolveStats {
                    iterations: it + 1,
                    relative_residual: residual,
                },
            ));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(FemError::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

/// Direct solve of a symmetric tridiagonal system `lower[i] x[i-1] + diag[i] x[i]
/// + lower[i+1] x[i+1] = rhs[i]`, with `lower[0]` unused.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], rhs: &[f64]) -> Result<Vec<f64>, FemError> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut prev_c = 0.0;
    let mut prev_d = 0.0;
    for i in 0..n {
        let sub = if i > 0 { lower[i] } else { 0.0 };
        let pivot = diag[i] - sub * prev_c;
        if !(pivot.abs() > 0.0) || !pivot.is_finite() {
            return Err(FemError::NotPositiveDefinite { iteration: i });
        }
        let sup = if i + 1 < n { lower[i + 1] } else { 0.0 };
        c[i] = sup / pivot;
        d[i] = (rhs[i] - sub * prev_d) / pivot;
        prev_c = c[i];
        prev_d = d[i];
    }
    let mut x = d;
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
