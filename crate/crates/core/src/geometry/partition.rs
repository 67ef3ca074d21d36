use std::fmt::Write as _;

use super::{GeometryError, ProfileSpec};
use crate::expr::EvalError;

const MERGE_TOL: f64 = 1e-10;
const MAX_ROOTS: usize = 1_000_000;

/// Level-crossing scan step for a given ε and lower period bound.
pub(crate) fn scan_step(eps: f64, l0: f64) -> f64 {
    eps * l0 / 16.0
}

/// One interval `[x_k, x_{k+1})` of the partition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub base: f64,
    pub period_at_base: f64,
    /// `(x_{k+1} − x_k) / l(x_k)`.
    pub gamma: f64,
}

/// Position of a point relative to the partition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Located {
    pub index: usize,
    pub base: f64,
    pub gamma: f64,
    pub period_at_base: f64,
    /// Local cell coordinate `(x − x_k) / Γ_k`, in `[0, l(x_k))`.
    pub y1: f64,
}

/// `0 = x_0 < x_1 < … < x_N = 1` where the interior points solve `x / l(x) = k ε`.
#[derive(Clone, Debug)]
pub struct Partition {
    pub eps: f64,
    pub points: Vec<f64>,
    /// Level index `k` of each point; `None` for the endpoints 0 and 1.
    pub levels: Vec<Option<i64>>,
    pub intervals: Vec<Interval>,
}

/// Builds the `l(x)`-partition of `[0, 1]` for this ε.
///
/// Crossings of `h(x) = x / l(x)` through the levels `k ε` are detected by a
/// scan with step `ε l0 / 16` and refined by bisection to full precision.
/// Tangential touches of a level that do not change sign are not roots.
pub fn build_partition(spec: &ProfileSpec, eps: f64) -> Result<Partition, GeometryError> {
    if !(eps > 0.0 && eps <= 0.25) {
        return Err(GeometryError::Eps(eps));
    }
    let h = |x: f64| spec.level_function(x);
    let steps = (1.0 / scan_step(eps, spec.bounds.l0)).ceil() as usize;
    let mut roots: Vec<(f64, i64)> = Vec::new();
    let mut lo = 0.0;
    let mut h_lo = h(lo)?;
    for i in 1..=steps {
        let hi = if i == steps { 1.0 } else { i as f64 / steps as f64 };
        let h_hi = h(hi)?;
        // Levels c with c in (h_lo, h_hi] (rising) or [h_hi, h_lo) (falling).
        let (a, b) = if h_hi >= h_lo { (h_lo, h_hi) } else { (h_hi, h_lo) };
        let first = (a / eps).floor() as i64 + 1;
        let last = (b / eps).floor() as i64;
        for k in first.max(1)..=last {
            let level = k as f64 * eps;
            if h_hi < h_lo && level == h_lo {
                continue;
            }
            if level == a && h_hi >= h_lo {
                continue;
            }
            let root = bisect(&h, level, lo, hi).map_err(|cause| GeometryError::RootFinding {
                level: k,
                lo,
                hi,
                cause,
            })?;
            roots.push((root, k));
            if roots.len() > MAX_ROOTS {
                return Err(GeometryError::TooManyCrossings {
                    eps,
                    limit: MAX_ROOTS,
                });
            }
        }
        lo = hi;
        h_lo = h_hi;
    }
    roots.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut points = vec![0.0];
    let mut levels = vec![None];
    for (x, k) in roots {
        let last = *points.last().expect("non-empty");
        if x - last <= MERGE_TOL || 1.0 - x <= MERGE_TOL {
            continue;
        }
        points.push(x);
        levels.push(Some(k));
    }
    points.push(1.0);
    levels.push(None);

    let intervals = points
        .windows(2)
        .map(|w| {
            let period_at_base = spec.period(w[0])?;
            Ok(Interval {
                base: w[0],
                period_at_base,
                gamma: (w[1] - w[0]) / period_at_base,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(Partition {
        eps,
        points,
        levels,
        intervals,
    })
}

fn bisect(
    h: &impl Fn(f64) -> Result<f64, EvalError>,
    level: f64,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64, EvalError> {
    let mut f_lo = h(lo)? - level;
    let mut f_hi = h(hi)? - level;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = h(mid)? - level;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    Ok(if f_lo.abs() <= f_hi.abs() { lo } else { hi })
}

impl Partition {
    /// Number of intervals.
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Interval containing `x`; points outside `[0, 1)` are clamped to the
    /// first or last interval.
    pub fn locate(&self, x: f64) -> Located {
        let index = self
            .points
            .partition_point(|&p| p <= x)
            .saturating_sub(1)
            .min(self.intervals.len() - 1);
        let iv = self.intervals[index];
        Located {
            index,
            base: iv.base,
            gamma: iv.gamma,
            period_at_base: iv.period_at_base,
            y1: (x - iv.base) / iv.gamma,
        }
    }

    /// `[x]_ε`, the left endpoint of the interval containing `x`.
    pub fn floor(&self, x: f64) -> f64 {
        self.locate(x).base
    }

    /// Violations of the structural invariants: strict monotonicity, the
    /// endpoints, `|h(x_{k+1}) − h(x_k)| ∈ {0, ε}` for interior neighbours,
    /// positive `Γ_k`, `h(x_k) = k ε` and `Σ Γ_k l(x_k) = 1`.
    pub fn invariant_violations(&self, spec: &ProfileSpec, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        if self.points.first() != Some(&0.0) || self.points.last() != Some(&1.0) {
            out.push("partition does not start at 0 and end at 1".to_string());
        }
        for (i, w) in self.points.windows(2).enumerate() {
            if w[1] <= w[0] {
                out.push(format!("x_{} = {} is not above x_{} = {}", i + 1, w[1], i, w[0]));
            }
        }
        let n = self.points.len();
        for i in 0..n.saturating_sub(2) {
            let (a, b) = (self.points[i], self.points[i + 1]);
            match (spec.level_function(a), spec.level_function(b)) {
                (Ok(ha), Ok(hb)) => {
                    let d = (hb - ha).abs();
                    if d > tol && (d - self.eps).abs() > tol {
                        out.push(format!("|h(x_{}) - h(x_{})| = {d} is neither 0 nor eps", i + 1, i));
                    }
                }
                (Err(e), _) | (_, Err(e)) => out.push(e.to_string()),
            }
        }
        for (k, iv) in self.intervals.iter().enumerate() {
            if !(iv.gamma > 0.0) {
                out.push(format!("Gamma_{k} = {} is not positive", iv.gamma));
            }
        }
        for (i, (x, level)) in self.points.iter().zip(&self.levels).enumerate() {
            let Some(k) = level else { continue };
            match spec.level_function(*x) {
                Ok(h) if (h - *k as f64 * self.eps).abs() > tol => {
                    out.push(format!("h(x_{i}) = {h} is not level {k} * eps"));
                }
                Ok(_) => {}
                Err(e) => out.push(e.to_string()),
            }
        }
        let total: f64 = self.intervals.iter().map(|iv| iv.gamma * iv.period_at_base).sum();
        if (total - 1.0).abs() > tol {
            out.push(format!("sum of Gamma_k l(x_k) is {total}, not 1"));
        }
        out
    }

    /// CSV with header `k,x_k,l(x_k),Γ_k`; the last row is the endpoint 1.
    pub fn to_csv(&self, spec: &ProfileSpec) -> Result<String, EvalError> {
        let mut out = String::from("k,x_k,l(x_k),Γ_k\n");
        for (k, iv) in self.intervals.iter().enumerate() {
            let _ = writeln!(out, "{k},{},{},{}", iv.base, iv.period_at_base, iv.gamma);
        }
        let k = self.intervals.len();
        let _ = writeln!(out, "{k},1,{},", spec.period(1.0)?);
        Ok(out)
    }
}
