use std::fmt::Write as _;

use rayon::prelude::*;

use super::{ThinDomain, ThinField, UnfoldError};
use crate::expr::EvalError;
use crate::geometry::{Partition, ProfileSpec};

/// Cell-centred lattice over `(0,1) × (0,l1) × (0,G1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnfoldGrid {
    pub nx: usize,
    pub n1: usize,
    pub n2: usize,
    pub l1: f64,
    pub g1: f64,
}

impl UnfoldGrid {
    pub fn new(spec: &ProfileSpec, nx: usize, n1: usize, n2: usize) -> Result<UnfoldGrid, UnfoldError> {
        if nx == 0 || n1 == 0 || n2 == 0 {
            return Err(UnfoldError::Grid(nx, n1, n2));
        }
        Ok(UnfoldGrid {
            nx,
            n1,
            n2,
            l1: spec.bounds.l1,
            g1: spec.bounds.g1,
        })
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn dy1(&self) -> f64 {
        self.l1 / self.n1 as f64
    }

    pub fn dy2(&self) -> f64 {
        self.g1 / self.n2 as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    pub fn y1(&self, a: usize) -> f64 {
        (a as f64 + 0.5) * self.dy1()
    }

    pub fn y2(&self, b: usize) -> f64 {
        (b as f64 + 0.5) * self.dy2()
    }

    pub fn index(&self, i: usize, a: usize, b: usize) -> usize {
        (i * self.n1 + a) * self.n2 + b
    }

    pub fn len(&self) -> usize {
        self.nx * self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume of one lattice cell.
    pub fn cell_volume(&self) -> f64 {
        self.dx() * self.dy1() * self.dy2()
    }
}

/// Partition data shared by every node of one `x`-slab.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Slab {
    pub interval: usize,
    pub base: f64,
    pub gamma: f64,
    /// `l([x]_ε)`.
    pub period: f64,
}

/// `T_ε(φ)` sampled on an [`UnfoldGrid`].
///
/// Each node also carries a quadrature weight. It is the cell volume, except
/// that the last node inside the mask along `y₁` (and along `y₂`) absorbs the
/// exact distance to the mask boundary, so that integrals over `W^ε` do not
/// pick up an `O(Δy)` bias from the fixed lattice.
#[derive(Clone, Debug)]
pub struct UnfoldedField {
    pub grid: UnfoldGrid,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
    pub weights: Vec<f64>,
    pub slabs: Vec<Slab>,
    points: Vec<f64>,
    rows_inside: Vec<usize>,
    depth_inside: Vec<usize>,
}

struct SlabData {
    slab: Slab,
    rows_inside: usize,
    depth_inside: Vec<usize>,
    values: Vec<f64>,
    mask: Vec<bool>,
    weights: Vec<f64>,
}

fn unfold_slab(
    domain: &ThinDomain,
    partition: &Partition,
    grid: &UnfoldGrid,
    i: usize,
    mut sample: impl FnMut(f64, f64) -> Result<f64, EvalError>,
) -> Result<SlabData, EvalError> {
    let at = partition.locate(grid.x(i));
    let slab = Slab {
        interval: at.index,
        base: at.base,
        gamma: at.gamma,
        period: at.period_at_base,
    };
    let (dy1, dy2) = (grid.dy1(), grid.dy2());
    let rows_inside = (0..grid.n1).take_while(|&a| grid.y1(a) < slab.period).count();
    let n = grid.n1 * grid.n2;
    let mut values = vec![0.0; n];
    let mut mask = vec![false; n];
    let mut weights = vec![0.0; n];
    let mut depth_inside = vec![0; grid.n1];
    for a in 0..rows_inside {
        let w1 = if a + 1 == rows_inside {
            slab.period.min(grid.l1) - a as f64 * dy1
        } else {
            dy1
        };
        let x = slab.base + slab.gamma * grid.y1(a);
        let height = domain.spec.height(x, x / domain.eps)?;
        let depth = (0..grid.n2).take_while(|&b| grid.y2(b) < height).count();
        depth_inside[a] = depth;
        for b in 0..depth {
            let w2 = if b + 1 == depth {
                height.min(grid.g1) - b as f64 * dy2
            } else {
                dy2
            };
            let k = a * grid.n2 + b;
            mask[k] = true;
            weights[k] = grid.dx() * w1 * w2;
            values[k] = sample(x, domain.eps * grid.y2(b))?;
        }
    }
    Ok(SlabData {
        slab,
        rows_inside,
        depth_inside,
        values,
        mask,
        weights,
    })
}

fn assemble(grid: UnfoldGrid, partition: &Partition, slabs: Vec<SlabData>) -> UnfoldedField {
    let mut field = UnfoldedField {
        grid,
        values: Vec::with_capacity(grid.len()),
        mask: Vec::with_capacity(grid.len()),
        weights: Vec::with_capacity(grid.len()),
        slabs: Vec::with_capacity(grid.nx),
        points: partition.points.clone(),
        rows_inside: Vec::with_capacity(grid.nx),
        depth_inside: Vec::with_capacity(grid.nx * grid.n1),
    };
    for s in slabs {
        field.values.extend(s.values);
        field.mask.extend(s.mask);
        field.weights.extend(s.weights);
        field.slabs.push(s.slab);
        field.rows_inside.push(s.rows_inside);
        field.depth_inside.extend(s.depth_inside);
    }
    field
}

/// Samples `T_ε(φ)` at the lattice nodes.
pub fn unfold<F: ThinField + ?Sized>(
    field: &F,
    partition: &Partition,
    grid: &UnfoldGrid,
) -> Result<UnfoldedField, UnfoldError> {
    let domain = field.domain();
    let slabs = (0..grid.nx)
        .into_par_iter()
        .map(|i| unfold_slab(domain, partition, grid, i, |x, y| field.sample_inside(x, y)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble(*grid, partition, slabs))
}

impl UnfoldedField {
    /// Coordinates `(x, y₁, y₂)` of node `(i, a, b)`.
    pub fn node(&self, i: usize, a: usize, b: usize) -> (f64, f64, f64) {
        (self.grid.x(i), self.grid.y1(a), self.grid.y2(b))
    }

    /// `Σ w · g(value, x, y₁, y₂, l([x]_ε))` over the mask.
    pub fn integrate(&self, g: impl Fn(f64, f64, f64, f64, f64) -> f64) -> f64 {
        let grid = &self.grid;
        let mut total = 0.0;
        for i in 0..grid.nx {
            let period = self.slabs[i].period;
            for a in 0..self.rows_inside[i] {
                for b in 0..self.depth_inside[i * grid.n1 + a] {
                    let k = grid.index(i, a, b);
                    total += self.weights[k] * g(self.values[k], grid.x(i), grid.y1(a), grid.y2(b), period);
                }
            }
        }
        total
    }

    /// `∫ (1/l([x]_ε)) T_ε(φ)`.
    pub fn uci_integral(&self) -> f64 {
        self.integrate(|v, _, _, _, period| v / period)
    }

    /// `‖T_ε(φ)‖` in `L¹` or `L²` of `(0,1) × Y*`.
    pub fn norm(&self, p: u32) -> Result<f64, UnfoldError> {
        match p {
            1 => Ok(self.integrate(|v, _, _, _, _| v.abs())),
            2 => Ok(self.integrate(|v, _, _, _, _| v * v).sqrt()),
            _ => Err(UnfoldError::Exponent(p)),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Value at the node nearest to `(x, y₁, y₂)` that lies inside the mask
    /// and in the same partition interval as `x`.
    pub fn lookup(&self, x: f64, y1: f64, y2: f64) -> f64 {
        let grid = &self.grid;
        let interval = self
            .points
            .partition_point(|&p| p <= x)
            .saturating_sub(1)
            .min(self.points.len() - 2);
        let mut i = ((x * grid.nx as f64).floor().max(0.0) as usize).min(grid.nx - 1);
        while self.slabs[i].interval < interval && i + 1 < grid.nx {
            i += 1;
        }
        while self.slabs[i].interval > interval && i > 0 {
            i -= 1;
        }
        let rows = self.rows_inside[i];
        if rows == 0 {
            return 0.0;
        }
        let a = ((y1 / grid.dy1()).floor().max(0.0) as usize).min(rows - 1);
        let depth = self.depth_inside[i * grid.n1 + a];
        if depth == 0 {
            return 0.0;
        }
        let b = ((y2 / grid.dy2()).floor().max(0.0) as usize).min(depth - 1);
        self.values[grid.index(i, a, b)]
    }

    /// CSV with header `x,y1,y2,mask,value`.
    pub fn to_csv(&self) -> String {
        let grid = &self.grid;
        let mut out = String::from("x,y1,y2,mask,value\n");
        for i in 0..grid.nx {
            for a in 0..grid.n1 {
                for b in 0..grid.n2 {
                    let k = grid.index(i, a, b);
                    let (x, y1, y2) = self.node(i, a, b);
                    let _ = writeln!(out, "{x},{y1},{y2},{},{}", u8::from(self.mask[k]), self.values[k]);
                }
            }
        }
        out
    }
}

/// `‖T_ε(χ^ε) − χ_W‖` in `L¹((0,1) × Y*)` by counting lattice cells where
/// the unfolded mask and `χ_W = [y₁ < l(x)] [y₂ < G(x, y₁)]` disagree.
pub fn char_gap(domain: &ThinDomain, partition: &Partition, grid: &UnfoldGrid) -> Result<f64, UnfoldError> {
    let spec = &domain.spec;
    let counts = (0..grid.nx)
        .into_par_iter()
        .map(|i| -> Result<usize, EvalError> {
            let data = unfold_slab(domain, partition, grid, i, |_, _| Ok(1.0))?;
            let x = grid.x(i);
            let period = spec.period(x)?;
            let mut mismatched = 0;
            for a in 0..grid.n1 {
                let y1 = grid.y1(a);
                let height = if y1 < period { Some(spec.height(x, y1)?) } else { None };
                for b in 0..grid.n2 {
                    let limit = height.is_some_and(|h| grid.y2(b) < h);
                    if limit != data.mask[a * grid.n2 + b] {
                        mismatched += 1;
                    }
                }
            }
            Ok(mismatched)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(counts.iter().sum::<usize>() as f64 * grid.cell_volume())
}
