use super::sparse::solve_tridiagonal;
use super::FemError;
use crate::expr::{Bindings, Expr};
use crate::homogenize::EffectiveTable;

/// P1 solution of `−(r u′)′ + (p/l) u = f₀` on `[0, 1]` with `u′(0) = u′(1) = 0`.
#[derive(Clone, Debug)]
pub struct Homog1DSolution {
    pub nodes: Vec<f64>,
    pub u: Vec<f64>,
    /// Slope on each element.
    pub du: Vec<f64>,
}

impl Homog1DSolution {
    fn element(&self, x: f64) -> usize {
        let n = self.du.len();
        ((x * n as f64).floor().max(0.0) as usize).min(n - 1)
    }

    /// Piecewise-linear `u`.
    pub fn value(&self, x: f64) -> f64 {
        let e = self.element(x);
        let s = (x - self.nodes[e]) / (self.nodes[e + 1] - self.nodes[e]);
        self.u[e] + s * (self.u[e + 1] - self.u[e])
    }

    /// Element slope, piecewise constant.
    pub fn slope(&self, x: f64) -> f64 {
        self.du[self.element(x)]
    }

    /// Recovered slope: element slopes averaged at interior nodes, zero at
    /// the ends, interpolated linearly.
    pub fn recovered_slope(&self, x: f64) -> f64 {
        let e = self.element(x);
        let n = self.du.len();
        let nodal = |i: usize| {
            if i == 0 || i == n {
                0.0
            } else {
                0.5 * (self.du[i - 1] + self.du[i])
            }
        };
        let s = ((x - self.nodes[e]) / (self.nodes[e + 1] - self.nodes[e])).clamp(0.0, 1.0);
        nodal(e) + s * (nodal(e + 1) - nodal(e))
    }
}

const GAUSS2: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

/// Tridiagonal system of the 1D limit problem: `(lower, diag, rhs)`.
///
/// `r` and `p/l` are interpolated from the table; the load is
/// `(p/l)(x) f(x)` with `f` evaluated exactly at the Gauss points.
pub fn assemble_homog_1d(
    table: &EffectiveTable,
    n: usize,
    f: &Expr,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), FemError> {
    let h = 1.0 / n as f64;
    let mut lower = vec![0.0; n + 1];
    let mut diag = vec![0.0; n + 1];
    let mut rhs = vec![0.0; n + 1];
    for e in 0..n {
        let (a, b) = (e as f64 * h, (e + 1) as f64 * h);
        let mut k = 0.0;
        let mut m = [[0.0; 2]; 2];
        let mut load = [0.0; 2];
        for xi in GAUSS2 {
            let s = 0.5 * (1.0 + xi);
            let x = a + s * (b - a);
            let row = table.eval(x);
            if !(row.r > 0.0) {
                return Err(FemError::Coefficient { name: "r", x, value: row.r });
            }
            let c = row.p / row.l;
            let fx = f.eval(&Bindings::xy(x, 0.0))?;
            let phi = [1.0 - s, s];
            let w = 0.5 * h;
            k += w * row.r / (h * h);
            for i in 0..2 {
                load[i] += w * c * fx * phi[i];
                for j in 0..2 {
                    m[i][j] += w * c * phi[i] * phi[j];
                }
            }
        }
        diag[e] += k + m[0][0];
        diag[e + 1] += k + m[1][1];
        lower[e + 1] += -k + m[0][1];
        rhs[e] += load[0];
        rhs[e + 1] += load[1];
    }
    Ok((lower, diag, rhs))
}

pub fn solve_homog_1d(table: &EffectiveTable, n: usize, f: &Expr) -> Result<Homog1DSolution, FemError> {
    let n = n.max(1);
    let (lower, diag, rhs) = assemble_homog_1d(table, n, f)?;
    let u = solve_tridiagonal(&lower, &diag, &rhs)?;
    let nodes: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let du = (0..n).map(|e| (u[e + 1] - u[e]) * n as f64).collect();
    Ok(Homog1DSolution { nodes, u, du })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Var};
    use crate::homogenize::{EffectiveRow, EffectiveTable};

    fn constant_table(r: f64, p: f64, l: f64) -> EffectiveTable {
        EffectiveTable::new(
            (0..8)
                .map(|j| EffectiveRow {
                    x: (j as f64 + 0.5) / 8.0,
                    r,
                    p,
                    l,
                    f0: 0.0,
                })
                .collect(),
        )
    }

    fn exact(x: f64) -> f64 {
        1.0 + (std::f64::consts::PI * x).cos() / (1.0 + std::f64::consts::PI.powi(2))
    }

    #[test]
    fn constant_coefficients_match_closed_form() {
        let f = parse("1+cos(pi*x)", &[Var::X]).unwrap();
        let sol = solve_homog_1d(&constant_table(2.0, 2.0, 1.0), 512, &f).unwrap();
        let worst = sol
            .nodes
            .iter()
            .zip(&sol.u)
            .map(|(x, u)| (u - exact(*x)).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-4, "{worst}");
    }

    #[test]
    fn constant_forcing_is_reproduced() {
        let f = parse("1.5", &[Var::X]).unwrap();
        let sol = solve_homog_1d(&constant_table(1.3, 2.6, 1.2), 64, &f).unwrap();
        assert!(sol.u.iter().all(|u| (u - 1.5).abs() < 1e-12));
    }

    #[test]
    fn second_order_convergence() {
        let f = parse("1+cos(pi*x)", &[Var::X]).unwrap();
        let table = constant_table(2.0, 2.0, 1.0);
        let l2 = |n: usize| {
            let sol = solve_homog_1d(&table, n, &f).unwrap();
            let m = 20 * n;
            ((0..m)
                .map(|i| {
                    let x = (i as f64 + 0.5) / m as f64;
                    (sol.value(x) - exact(x)).powi(2)
                })
                .sum::<f64>()
                / m as f64)
                .sqrt()
        };
        let ratio = l2(16) / l2(32);
        assert!((ratio - 4.0).abs() < 0.4, "{ratio}");
    }

    #[test]
    fn system_is_positive_definite() {
        let f = parse("1", &[Var::X]).unwrap();
        let (lower, diag, _) = assemble_homog_1d(&constant_table(0.7, 1.1, 1.0), 32, &f).unwrap();
        for k in 0..10 {
            let v: Vec<f64> = (0..33).map(|i| (1.7 * i as f64 + 0.9 * k as f64).sin()).collect();
            let mut quad = 0.0;
            for i in 0..33 {
                quad += diag[i] * v[i] * v[i];
                if i > 0 {
                    quad += 2.0 * lower[i] * v[i] * v[i - 1];
                }
            }
            assert!(quad > 0.0);
        }
    }

    #[test]
    fn recovered_slope_is_second_order_accurate() {
        let f = parse("1+cos(pi*x)", &[Var::X]).unwrap();
        let sol = solve_homog_1d(&constant_table(2.0, 2.0, 1.0), 256, &f).unwrap();
        let c = std::f64::consts::PI / (1.0 + std::f64::consts::PI.powi(2));
        for x in [0.1, 0.37, 0.5, 0.93] {
            let exact_slope = -c * (std::f64::consts::PI * x).sin();
            assert!((sol.recovered_slope(x) - exact_slope).abs() < 1e-4);
        }
    }
}
