//! Thin-domain family `R^ε = {(x, y) : 0 < x < 1, 0 < y < ε G(x, x/ε)}` with a
//! profile `G(x, ·)` that is `l(x)`-periodic.

mod cell;
mod partition;

use thiserror::Error;

use crate::expr::{self, DiffError, EvalError, Expr, ParseError, Var};

pub use cell::{cell_at, CellGeometry};
pub use partition::{build_partition, Interval, Located, Partition};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("expression `{source_text}`: {error}")]
    Parse {
        source_text: String,
        error: ParseError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("invalid bounds: {0}")]
    Bounds(String),
    #[error("eps = {0} outside (0, 1/4]")]
    Eps(f64),
    #[error("validation lattice density {0} is below 64")]
    LatticeDensity(usize),
    #[error("root finding failed for level k = {level} in [{lo}, {hi}]: {cause}")]
    RootFinding {
        level: i64,
        lo: f64,
        hi: f64,
        cause: EvalError,
    },
    #[error("more than {limit} level crossings at eps = {eps}")]
    TooManyCrossings { eps: f64, limit: usize },
    #[error("degenerate cell: height {height} at y1 = {y1}")]
    DegenerateCell { y1: f64, height: f64 },
}

/// Declared bounds `G0 ≤ G ≤ G1` and `l0 ≤ l < l1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub g0: f64,
    pub g1: f64,
    pub l0: f64,
    pub l1: f64,
}

impl Bounds {
    pub fn new(g0: f64, g1: f64, l0: f64, l1: f64) -> Result<Self, GeometryError> {
        let all_positive = [g0, g1, l0, l1].iter().all(|v| v.is_finite() && *v > 0.0);
        if !all_positive {
            return Err(GeometryError::Bounds(format!(
                "bounds must be positive and finite, got G0={g0}, G1={g1}, l0={l0}, l1={l1}"
            )));
        }
        if g0 > g1 || l0 >= l1 {
            return Err(GeometryError::Bounds(format!(
                "need G0 <= G1 and l0 < l1, got G0={g0}, G1={g1}, l0={l0}, l1={l1}"
            )));
        }
        Ok(Bounds { g0, g1, l0, l1 })
    }
}

/// Profile `G(x, y)`, period `l(x)` and their declared bounds.
#[derive(Clone, Debug)]
pub struct ProfileSpec {
    g: Expr,
    l: Expr,
    dg_dy: Expr,
    dl_dx: Expr,
    pub bounds: Bounds,
}

impl ProfileSpec {
    pub fn new(g: Expr, l: Expr, bounds: Bounds) -> Result<Self, GeometryError> {
        let dg_dy = g.diff(Var::Y)?;
        let dl_dx = l.diff(Var::X)?;
        Ok(ProfileSpec {
            g,
            l,
            dg_dy,
            dl_dx,
            bounds,
        })
    }

    /// Parses `G` in `(x, y)` and `l` in `x`.
    pub fn parse(g: &str, l: &str, bounds: Bounds) -> Result<Self, GeometryError> {
        let parse = |src: &str, vars: &[Var]| {
            expr::parse(src, vars).map_err(|error| GeometryError::Parse {
                source_text: src.to_string(),
                error,
            })
        };
        let g = parse(g, &[Var::X, Var::Y])?;
        let l = parse(l, &[Var::X])?;
        ProfileSpec::new(g, l, bounds)
    }

    pub fn g_expr(&self) -> &Expr {
        &self.g
    }

    pub fn l_expr(&self) -> &Expr {
        &self.l
    }

    /// `∂G/∂y` as an expression.
    pub fn dg_dy_expr(&self) -> &Expr {
        &self.dg_dy
    }

    /// `G(x, y)`.
    pub fn height(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        self.g.eval_xy(x, y)
    }

    /// `∂G/∂y(x, y)`.
    pub fn height_slope(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        self.dg_dy.eval_xy(x, y)
    }

    /// `l(x)`.
    pub fn period(&self, x: f64) -> Result<f64, EvalError> {
        self.l.eval(&expr::Bindings::x(x))
    }

    /// `l'(x)`.
    pub fn period_slope(&self, x: f64) -> Result<f64, EvalError> {
        self.dl_dx.eval(&expr::Bindings::x(x))
    }

    /// `h(x) = x / l(x)`, whose integer levels in units of ε define the partition.
    pub fn level_function(&self, x: f64) -> Result<f64, EvalError> {
        Ok(x / self.period(x)?)
    }

    /// Upper boundary of `R^ε` at `x`: `ε G(x, x/ε)`.
    pub fn top(&self, x: f64, eps: f64) -> Result<f64, EvalError> {
        Ok(eps * self.height(x, x / eps)?)
    }

    /// True if `G` does not depend on its second argument.
    pub fn is_flat(&self) -> bool {
        !self.g.depends_on(Var::Y)
    }
}

/// Result of sampling a profile against hypothesis (H) and its declared bounds.
#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub lattice_density: usize,
    pub g_range: (f64, f64),
    pub l_range: (f64, f64),
    pub bound_violations: Vec<String>,
    /// `max |G(x, y + l(x)) − G(x, y)|` over the lattice.
    pub periodicity_residual: f64,
    pub periodicity_tolerance: f64,
    /// Set when `G(x, ·)` is also `l(x)/m`-periodic for this `m`, so the declared
    /// period is not the fundamental one.
    pub sub_period: Option<(f64, u32)>,
    /// Fraction of lattice points with `|x l'(x) − l(x)| < tol · l0`.
    pub critical_fraction: f64,
    pub critical_flagged: bool,
    /// Level-crossing scan step of the partition builder, divided by ε.
    pub scan_step_per_eps: f64,
}

impl ValidationReport {
    pub fn is_fatal(&self) -> bool {
        !self.bound_violations.is_empty()
            || self.periodicity_residual > self.periodicity_tolerance
            || self.sub_period.is_some()
    }

    pub fn fatal_reasons(&self) -> Vec<String> {
        let mut out = self.bound_violations.clone();
        if self.periodicity_residual > self.periodicity_tolerance {
            out.push(format!(
                "G(x, y + l(x)) differs from G(x, y) by {:e} (tolerance {:e})",
                self.periodicity_residual, self.periodicity_tolerance
            ));
        }
        if let Some((x, m)) = self.sub_period {
            out.push(format!(
                "at x = {x}, G(x, ·) already repeats after l(x)/{m}; declare its fundamental period"
            ));
        }
        out
    }
}

/// Checks bounds, periodicity and the critical-set proxy for hypothesis (H)
/// on a `lattice_density × lattice_density` sample of `(x, y₁)`.
pub fn validate_profile(
    spec: &ProfileSpec,
    lattice_density: usize,
    tol: f64,
) -> Result<ValidationReport, GeometryError> {
    if lattice_density < 64 {
        return Err(GeometryError::LatticeDensity(lattice_density));
    }
    let b = spec.bounds;
    let n = lattice_density;
    let periodicity_tolerance = 1e-10 * (1.0 + b.g1);
    let mut violations = Vec::new();
    let mut g_range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut l_range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut residual: f64 = 0.0;
    let mut sub_period = None;
    let mut critical = 0usize;

    let xs: Vec<f64> = std::iter::once(0.0)
        .chain((0..n).map(|i| (i as f64 + 0.5) / n as f64))
        .chain(std::iter::once(1.0))
        .collect();
    for &x in &xs {
        let l = spec.period(x)?;
        l_range = (l_range.0.min(l), l_range.1.max(l));
        if !(l >= b.l0 && l < b.l1) && violations.len() < 16 {
            violations.push(format!("l({x}) = {l} outside [{}, {})", b.l0, b.l1));
        }
    }
    for &x in &xs[1..=n] {
        let l = spec.period(x)?;
        let dl = spec.period_slope(x)?;
        if (x * dl - l).abs() < tol * b.l0 {
            critical += 1;
        }
        let mut g_min = f64::INFINITY;
        let mut g_max = f64::NEG_INFINITY;
        let ys: Vec<f64> = (0..n).map(|j| j as f64 / n as f64 * l).collect();
        let gs = ys
            .iter()
            .map(|&y| spec.height(x, y))
            .collect::<Result<Vec<_>, _>>()?;
        for (&y, &g) in ys.iter().zip(&gs) {
            g_min = g_min.min(g);
            g_max = g_max.max(g);
            if !(g >= b.g0 && g <= b.g1) && violations.len() < 16 {
                violations.push(format!("G({x}, {y}) = {g} outside [{}, {}]", b.g0, b.g1));
            }
            residual = residual.max((spec.height(x, y + l)? - g).abs());
        }
        g_range = (g_range.0.min(g_min), g_range.1.max(g_max));
        if sub_period.is_none() && g_max - g_min > 1e-8 * (1.0 + b.g1) {
            for m in 2..=4u32 {
                let shift = l / m as f64;
                let mut worst: f64 = 0.0;
                for (&y, &g) in ys.iter().zip(&gs) {
                    worst = worst.max((spec.height(x, y + shift)? - g).abs());
                }
                if worst <= periodicity_tolerance {
                    sub_period = Some((x, m));
                    break;
                }
            }
        }
    }
    let critical_fraction = critical as f64 / n as f64;
    Ok(ValidationReport {
        lattice_density,
        g_range,
        l_range,
        bound_violations: violations,
        periodicity_residual: residual,
        periodicity_tolerance,
        sub_period,
        critical_fraction,
        critical_flagged: critical_fraction > 0.01,
        scan_step_per_eps: partition::scan_step(1.0, b.l0),
    })
}
