//! First-order corrector `ε u′(x) X(x, x/ε, y/ε)` and convergence reports that
//! compare direct thin-domain solves `u^ε` against the homogenized `u`.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::fem::{solve_thin_neumann, CellSolution, FemError, FemField};
use crate::geometry::{build_partition, GeometryError, ProfileSpec};
use crate::homogenize::{run_pipeline, CellBank, HomogError, Pipeline, PipelineParams};
use crate::unfolding::{average, char_gap, unfold, ThinDomain, ThinField, UnfoldError, UnfoldGrid};

#[derive(Debug, Error)]
pub enum CorrectorError {
    #[error("point ({x}, {y}) is outside the thin domain")]
    Outside { x: f64, y: f64 },
    #[error("eps list: {0}")]
    EpsList(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Homog(#[from] HomogError),
    #[error(transparent)]
    Unfold(#[from] UnfoldError),
}

/// Cell solutions at the anchors, evaluable at any slow position `x`.
#[derive(Clone, Copy)]
pub struct CellCorrector<'a> {
    spec: &'a ProfileSpec,
    cells: &'a [CellSolution],
}

/// `X^ε` at a point of `R^ε` with its cell coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrectorSample {
    pub y1: f64,
    pub y2: f64,
    pub value: f64,
    /// `∇_y X` at `(y₁*, y₂*)`.
    pub grad: [f64; 2],
}

impl<'a> CellCorrector<'a> {
    /// # Panics
    /// If the bank is empty.
    pub fn new(spec: &'a ProfileSpec, bank: &'a CellBank) -> CellCorrector<'a> {
        assert!(!bank.cells.is_empty(), "corrector needs at least one anchor cell");
        CellCorrector {
            spec,
            cells: &bank.cells,
        }
    }

    /// Anchors used at `x` with their blend weights.
    fn blend(&self, x: f64) -> [(usize, f64); 2] {
        let cells = self.cells;
        let last = cells.len() - 1;
        if x <= cells[0].anchor_x {
            return [(0, 1.0), (0, 0.0)];
        }
        if x >= cells[last].anchor_x {
            return [(last, 1.0), (last, 0.0)];
        }
        let j = cells.partition_point(|c| c.anchor_x <= x) - 1;
        let w = (x - cells[j].anchor_x) / (cells[j + 1].anchor_x - cells[j].anchor_x);
        [(j, 1.0 - w), (j + 1, w)]
    }

    /// `X(x)` and `∇_y X(x)` at `(y₁, y₂) ∈ Y*(x)`.
    ///
    /// The point is carried to each neighbouring anchor cell through the
    /// reference square `(y₁/l, y₂/G)`, and the gradient is pulled back through
    /// the Jacobian of that map.
    pub fn cell_value(&self, x: f64, y1: f64, y2: f64) -> Result<(f64, [f64; 2]), EvalError> {
        let spec = self.spec;
        let period = spec.period(x)?;
        let height = spec.height(x, y1)?;
        let slope = spec.height_slope(x, y1)?;
        let (s, t) = (y1 / period, y2 / height);
        let mut value = 0.0;
        let mut grad = [0.0; 2];
        for (j, w) in self.blend(x) {
            if w == 0.0 {
                continue;
            }
            let cell = &self.cells[j];
            let stretch = cell.period / period;
            let z1 = s * cell.period;
            let h = spec.height(cell.anchor_x, z1)?;
            let dh = spec.height_slope(cell.anchor_x, z1)?;
            let (v, g) = cell.sample(z1, t * h);
            let dz2_dy1 = t * dh * stretch - y2 * slope * h / (height * height);
            let dz2_dy2 = h / height;
            value += w * v;
            grad[0] += w * (g[0] * stretch + g[1] * dz2_dy1);
            grad[1] += w * g[1] * dz2_dy2;
        }
        Ok((value, grad))
    }
}

/// `X^ε(x, y) = X(x)(y₁*, y₂*)` with `y₁* = (x/ε) mod l(x)` and `y₂* = y/ε`.
pub fn evaluate_cell_corrector(
    corrector: &CellCorrector<'_>,
    eps: f64,
    x: f64,
    y: f64,
) -> Result<CorrectorSample, CorrectorError> {
    let domain = ThinDomain::new(corrector.spec.clone(), eps);
    if !domain.contains(x, y)? {
        return Err(CorrectorError::Outside { x, y });
    }
    let y1 = (x / eps).rem_euclid(corrector.spec.period(x)?);
    let y2 = y / eps;
    let (value, grad) = corrector.cell_value(x, y1, y2)?;
    Ok(CorrectorSample { y1, y2, value, grad })
}

/// Discretization of one convergence row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StudyParams {
    pub pipeline: PipelineParams,
    pub n_per: usize,
    pub ny: usize,
    pub grid: (usize, usize, usize),
    pub nq: usize,
}

impl Default for StudyParams {
    fn default() -> Self {
        StudyParams {
            pipeline: PipelineParams::default(),
            n_per: 16,
            ny: 8,
            grid: (256, 64, 64),
            nq: 16,
        }
    }
}

/// One row of a convergence report.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReportRow {
    pub eps: f64,
    /// `|||u^ε − u|||_{L²}`.
    pub e_l2: f64,
    /// `|||u^ε − u + ε u′ X^ε|||_{H¹}`.
    pub e_h1_corr: f64,
    /// `‖T_ε(∇u^ε) − (ξ₀, ξ₁) χ_W‖_{L²((0,1) × Y*)}`.
    pub e_unfold_grad: f64,
    pub char_gap: f64,
    pub seconds: f64,
    /// `L²` part of `e_h1_corr`.
    pub l2_part: f64,
    /// `|||ε u′ X^ε|||_{L²}`.
    pub corrector_l2: f64,
    /// `ε max|u′| max|X| (|R^ε|/ε)^{1/2}`.
    pub corrector_bound: f64,
    /// `|||∇u^ε − ∇u − l U_ε(∇_y u₁)|||_{L²}`.
    pub averaged_grad: f64,
}

impl ReportRow {
    /// Triangle inequality between `l2_part`, `e_l2` and the corrector term.
    pub fn l2_consistent(&self) -> bool {
        let slack = 1e-12 * (1.0 + self.e_l2 + self.l2_part);
        (self.l2_part - self.e_l2).abs() <= self.corrector_l2 + slack
            && self.corrector_l2 <= self.corrector_bound * (1.0 + 1e-9) + slack
    }

    /// True if `averaged_grad` lies within a factor `l1/l0` of `e_unfold_grad`.
    pub fn tracks_unfolded_gradient(&self, l0: f64, l1: f64) -> bool {
        let k = l1 / l0;
        self.averaged_grad <= k * self.e_unfold_grad && self.e_unfold_grad <= k * self.averaged_grad
    }

    fn entries(&self) -> [f64; 10] {
        [
            self.eps,
            self.e_l2,
            self.e_h1_corr,
            self.e_unfold_grad,
            self.char_gap,
            self.seconds,
            self.l2_part,
            self.corrector_l2,
            self.corrector_bound,
            self.averaged_grad,
        ]
    }
}

const TRIANGLE_RULE: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

#[derive(Default)]
struct Sums {
    l2: f64,
    h1_value: f64,
    h1_grad: f64,
    corrector: f64,
    averaged: f64,
    max_x: f64,
}

fn mesh_sums(
    spec: &ProfileSpec,
    uh: &FemField,
    run: &Pipeline,
    corrector: &CellCorrector<'_>,
    eps: f64,
    nq: usize,
) -> Result<Sums, CorrectorError> {
    let partition = build_partition(spec, eps)?;
    let psi = |x: f64, y1: f64, y2: f64, component: usize| -> f64 {
        let du = run.homog.recovered_slope(x);
        corrector
            .cell_value(x, y1, y2)
            .map(|(_, g)| -du * g[component])
            .unwrap_or(f64::NAN)
    };
    let psi0 = |x: f64, y1: f64, y2: f64| psi(x, y1, y2, 0);
    let psi1 = |x: f64, y1: f64, y2: f64| psi(x, y1, y2, 1);
    let u0 = average(&psi0, uh.domain.clone(), &partition, nq)?;
    let u1 = average(&psi1, uh.domain.clone(), &partition, nq)?;
    let mesh = &uh.mesh;
    let parts = (0..mesh.triangles.len())
        .into_par_iter()
        .map(|t| -> Result<Sums, CorrectorError> {
            let tri = mesh.triangles[t];
            let area = mesh.triangle_area(t);
            let grad = uh.gradients[t];
            let mut acc = Sums::default();
            for bary in TRIANGLE_RULE {
                let w = area / 3.0;
                let (mut x, mut y, mut value) = (0.0, 0.0, 0.0);
                for k in 0..3 {
                    let v = mesh.vertices[tri[k]];
                    x += bary[k] * v[0];
                    y += bary[k] * v[1];
                    value += bary[k] * uh.values[tri[k]];
                }
                let u = run.homog.value(x);
                let du = run.homog.recovered_slope(x);
                let top = uh.domain.top(x)?;
                let y = y.min(top * (1.0 - 1e-12)).max(0.0);
                let cell_y1 = (x / eps).rem_euclid(spec.period(x)?);
                let (chi, dchi) = corrector.cell_value(x, cell_y1, y / eps)?;
                let corr = eps * du * chi;
                let e = value - u;
                let gx = grad[0] - du + du * dchi[0];
                let gy = grad[1] + du * dchi[1];
                acc.l2 += w * e * e;
                acc.h1_value += w * (e + corr).powi(2);
                acc.h1_grad += w * (gx * gx + gy * gy);
                acc.corrector += w * corr * corr;
                acc.max_x = acc.max_x.max(chi.abs());
                let l = spec.period(x)?;
                let ax = grad[0] - du - l * u0.sample_inside(x, y)?;
                let ay = grad[1] - l * u1.sample_inside(x, y)?;
                acc.averaged += w * (ax * ax + ay * ay);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut total = Sums::default();
    for s in parts {
        total.l2 += s.l2;
        total.h1_value += s.h1_value;
        total.h1_grad += s.h1_grad;
        total.corrector += s.corrector;
        total.averaged += s.averaged;
        total.max_x = total.max_x.max(s.max_x);
    }
    Ok(total)
}

fn unfolded_gradient_error(
    spec: &ProfileSpec,
    uh: &FemField,
    run: &Pipeline,
    corrector: &CellCorrector<'_>,
    eps: f64,
    grid: &UnfoldGrid,
) -> Result<f64, CorrectorError> {
    let partition = build_partition(spec, eps)?;
    let tx = unfold(&uh.gradient_component(0), &partition, grid)?;
    let ty = unfold(&uh.gradient_component(1), &partition, grid)?;
    let slabs = (0..grid.nx)
        .into_par_iter()
        .map(|i| -> Result<f64, EvalError> {
            let x = grid.x(i);
            let period = spec.period(x)?;
            let du = run.homog.recovered_slope(x);
            let mut sum = 0.0;
            for a in 0..grid.n1 {
                let y1 = grid.y1(a);
                let height = if y1 < period { Some(spec.height(x, y1)?) } else { None };
                for b in 0..grid.n2 {
                    let y2 = grid.y2(b);
                    let xi = match height {
                        Some(h) if y2 < h => {
                            let (_, g) = corrector.cell_value(x, y1, y2)?;
                            [du * (1.0 - g[0]), -du * g[1]]
                        }
                        _ => [0.0, 0.0],
                    };
                    let k = grid.index(i, a, b);
                    let (w, t) = if tx.mask[k] {
                        (tx.weights[k], [tx.values[k], ty.values[k]])
                    } else {
                        (grid.cell_volume(), [0.0, 0.0])
                    };
                    sum += w * ((t[0] - xi[0]).powi(2) + (t[1] - xi[1]).powi(2));
                }
            }
            Ok(sum)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(slabs.iter().sum::<f64>().sqrt())
}

/// One report row from an existing homogenization run.
pub fn error_report_with(
    spec: &ProfileSpec,
    f: &Expr,
    run: &Pipeline,
    eps: f64,
    params: &StudyParams,
) -> Result<ReportRow, CorrectorError> {
    let start = Instant::now();
    let partition = build_partition(spec, eps)?;
    let uh = solve_thin_neumann(spec, &partition, f, params.n_per, params.ny, &params.pipeline.solver)?;
    let corrector = CellCorrector::new(spec, &run.cells);
    let sums = mesh_sums(spec, &uh, run, &corrector, eps, params.nq)?;
    let (nx, n1, n2) = params.grid;
    let grid = UnfoldGrid::new(spec, nx, n1, n2)?;
    let e_unfold_grad = unfolded_gradient_error(spec, &uh, run, &corrector, eps, &grid)?;
    let gap = char_gap(&uh.domain, &partition, &grid)?;
    let max_du = (0..=4 * params.pipeline.n_1d)
        .map(|i| run.homog.recovered_slope(i as f64 / (4 * params.pipeline.n_1d) as f64).abs())
        .fold(0.0, f64::max);
    let measure = uh.mesh.area();
    Ok(ReportRow {
        eps,
        e_l2: (sums.l2 / eps).sqrt(),
        e_h1_corr: ((sums.h1_value + sums.h1_grad) / eps).sqrt(),
        e_unfold_grad,
        char_gap: gap,
        seconds: start.elapsed().as_secs_f64(),
        l2_part: (sums.h1_value / eps).sqrt(),
        corrector_l2: (sums.corrector / eps).sqrt(),
        corrector_bound: eps * max_du * sums.max_x * (measure / eps).sqrt(),
        averaged_grad: (sums.averaged / eps).sqrt(),
    })
}

/// Homogenizes, solves the thin problem at `eps` and measures the errors.
pub fn error_report(spec: &ProfileSpec, f: &Expr, eps: f64, params: &StudyParams) -> Result<ReportRow, CorrectorError> {
    let run = run_pipeline(spec, f, &params.pipeline)?;
    error_report_with(spec, f, &run, eps, params)
}

/// Rows of an ε-sweep, in the order given.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ReportRow>,
}

/// Which error column a ratio refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorColumn {
    L2,
    H1Corr,
    UnfoldGrad,
    CharGap,
}

impl ErrorColumn {
    pub const ALL: [ErrorColumn; 4] = [
        ErrorColumn::L2,
        ErrorColumn::H1Corr,
        ErrorColumn::UnfoldGrad,
        ErrorColumn::CharGap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorColumn::L2 => "e_L2",
            ErrorColumn::H1Corr => "e_H1_corr",
            ErrorColumn::UnfoldGrad => "e_unfold_grad",
            ErrorColumn::CharGap => "char_gap",
        }
    }

    pub fn of(self, row: &ReportRow) -> f64 {
        match self {
            ErrorColumn::L2 => row.e_l2,
            ErrorColumn::H1Corr => row.e_h1_corr,
            ErrorColumn::UnfoldGrad => row.e_unfold_grad,
            ErrorColumn::CharGap => row.char_gap,
        }
    }
}

impl ConvergenceReport {
    /// `e(ε_{i+1}) / e(ε_i)` for each consecutive pair.
    pub fn ratios(&self, column: ErrorColumn) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| column.of(&w[1]) / column.of(&w[0]))
            .collect()
    }

    /// Consecutive rows where an error column fails to decrease.
    pub fn non_decreasing(&self) -> Vec<String> {
        let mut out = Vec::new();
        for column in ErrorColumn::ALL {
            for w in self.rows.windows(2) {
                if column.of(&w[1]) >= column.of(&w[0]) {
                    out.push(format!(
                        "{} does not decrease from eps = {} ({:e}) to eps = {} ({:e})",
                        column.name(),
                        w[0].eps,
                        column.of(&w[0]),
                        w[1].eps,
                        column.of(&w[1])
                    ));
                }
            }
        }
        out
    }

    /// Rows with a non-finite or negative entry.
    pub fn invalid_rows(&self) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.entries().iter().any(|v| !v.is_finite() || *v < 0.0))
            .map(|r| r.eps)
            .collect()
    }

    /// CSV with header
    /// `eps,e_L2,e_H1_corr,e_unfold_grad,char_gap,ratio_L2,ratio_H1,ratio_unfold,seconds`.
    ///
    /// Ratios are empty on the first row. Wall-clock seconds vary between
    /// runs, so they are written only when `timing` is set.
    pub fn to_csv(&self, timing: bool) -> String {
        let mut out = String::from("eps,e_L2,e_H1_corr,e_unfold_grad,char_gap,ratio_L2,ratio_H1,ratio_unfold,seconds\n");
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(
                out,
                "{},{},{},{},{}",
                row.eps, row.e_l2, row.e_h1_corr, row.e_unfold_grad, row.char_gap
            );
            for column in [ErrorColumn::L2, ErrorColumn::H1Corr, ErrorColumn::UnfoldGrad] {
                if i == 0 {
                    out.push(',');
                } else {
                    let _ = write!(out, ",{}", column.of(row) / column.of(&self.rows[i - 1]));
                }
            }
            if timing {
                let _ = writeln!(out, ",{}", row.seconds);
            } else {
                out.push_str(",\n");
            }
        }
        out
    }
}

/// Checks that an ε list is strictly decreasing, inside `(0, 1/4]`, and
/// long enough for a sweep.
pub fn check_eps_list(eps: &[f64], min_len: usize) -> Result<(), CorrectorError> {
    if eps.len() < min_len {
        return Err(CorrectorError::EpsList(format!(
            "need at least {min_len} values, got {}",
            eps.len()
        )));
    }
    if let Some(bad) = eps.iter().find(|e| !(**e > 0.0 && **e <= 0.25)) {
        return Err(CorrectorError::EpsList(format!("{bad} is outside (0, 1/4]")));
    }
    if let Some(w) = eps.windows(2).find(|w| w[1] >= w[0]) {
        return Err(CorrectorError::EpsList(format!(
            "values must strictly decrease, but {} is followed by {}",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// One homogenization run shared by a concurrent ε-sweep.
pub fn convergence_study(
    spec: &ProfileSpec,
    f: &Expr,
    eps: &[f64],
    params: &StudyParams,
) -> Result<ConvergenceReport, CorrectorError> {
    check_eps_list(eps, 3)?;
    let run = run_pipeline(spec, f, &params.pipeline)?;
    let rows = eps
        .par_iter()
        .map(|&e| error_report_with(spec, f, &run, e, params))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ConvergenceReport { rows })
}
