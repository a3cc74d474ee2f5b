//! Star discrepancy
//!
//! `D*(x_1..x_n) = sup_ξ |#{j : x_j ∈ [0, ξ)} / n − vol([0, ξ))|`
//! over anchored boxes `[0, ξ) ⊂ [0,1]^d`.
//!
//! Three routes are provided:
//!
//! * [`star_discrepancy_1d`]: the closed form for `d = 1`;
//! * [`star_discrepancy_exact`]: enumeration of the critical corners, whose
//!   coordinates are drawn from the point coordinates plus `1`;
//! * [`star_discrepancy_lower_bound`]: the same local evaluation restricted
//!   to a uniform grid, for point sets too large to enumerate.
//!
//! At a corner `ξ` the supremum over nearby boxes is the larger of
//! `vol(ξ) − A_open(ξ)/n` (approached from below) and `A_closed(ξ)/n − vol(ξ)`
//! (approached from above), where `A_open` counts points with `x < ξ` and
//! `A_closed` points with `x ≤ ξ` componentwise. Both counts are obtained for
//! a whole corner grid at once with a d-dimensional prefix sum over a
//! histogram of the points.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::pointset::PointSet;

/// Default cap on `n · Π_k m_k` (points times critical corners).
pub const DEFAULT_WORK_BUDGET: u64 = 100_000_000;

/// Largest corner grid held in memory (two `u32` counts per corner).
pub const MAX_CORNER_CELLS: usize = 1 << 25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiscrepancyError {
    #[error("expected a 1-dimensional point set, got dimension {0}")]
    Dimension(usize),
    #[error(
        "exact enumeration needs about {estimated_cost:.3e} steps, over the budget of {budget}; \
         use the grid lower bound instead"
    )]
    BudgetExceeded { estimated_cost: f64, budget: u64 },
    #[error("grid resolution must be >= 2, got {0}")]
    Grid(usize),
    #[error("corner grid has {cells:.3e} cells, over the limit of {limit}; use a coarser grid")]
    TooManyCorners { cells: f64, limit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DiscrepancyMode {
    Exact,
    LowerBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscrepancyResult {
    pub value: f64,
    pub mode: DiscrepancyMode,
    pub n: usize,
    pub dim: usize,
}

/// Closed form in one dimension:
/// `D* = 1/(2n) + max_i |x_(i) − (2i−1)/(2n)|` over the sorted points.
pub fn star_discrepancy_1d(points: &PointSet) -> Result<DiscrepancyResult, DiscrepancyError> {
    if points.dim() != 1 {
        return Err(DiscrepancyError::Dimension(points.dim()));
    }
    let n = points.len();
    let mut xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
    xs.sort_by(f64::total_cmp);
    let two_n = 2.0 * n as f64;
    let worst = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - (2 * i + 1) as f64 / two_n).abs())
        .fold(0.0, f64::max);
    Ok(DiscrepancyResult {
        value: 1.0 / two_n + worst,
        mode: DiscrepancyMode::Exact,
        n,
        dim: 1,
    })
}

/// Exact star discrepancy by critical-corner enumeration.
///
/// Fails with [`DiscrepancyError::BudgetExceeded`] when `n` times the number
/// of critical corners exceeds `budget`.
pub fn star_discrepancy_exact(
    points: &PointSet,
    budget: u64,
) -> Result<DiscrepancyResult, DiscrepancyError> {
    let grids: Vec<Vec<f64>> = (0..points.dim())
        .map(|k| {
            let mut g: Vec<f64> = points.iter().map(|p| p[k]).collect();
            g.push(1.0);
            g.sort_by(f64::total_cmp);
            g.dedup();
            g
        })
        .collect();
    let cells = cell_count(&grids);
    let estimated_cost = points.len() as f64 * cells;
    if estimated_cost > budget as f64 {
        return Err(DiscrepancyError::BudgetExceeded {
            estimated_cost,
            budget,
        });
    }
    check_cells(cells)?;
    Ok(DiscrepancyResult {
        value: max_local_discrepancy(points, &grids),
        mode: DiscrepancyMode::Exact,
        n: points.len(),
        dim: points.dim(),
    })
}

/// Lower bound on `D*` from corners on the uniform grid `{k/g}` in each
/// dimension, plus each grid value snapped up to the nearest point
/// coordinate.
///
/// Grid `g·m` contains grid `g`, so refining by an integer factor never
/// lowers the bound.
pub fn star_discrepancy_lower_bound(
    points: &PointSet,
    grid_per_dim: usize,
) -> Result<DiscrepancyResult, DiscrepancyError> {
    if grid_per_dim < 2 {
        return Err(DiscrepancyError::Grid(grid_per_dim));
    }
    let grids = lower_bound_grids(points, grid_per_dim);
    check_cells(cell_count(&grids))?;
    Ok(lower_bound_result(points, &grids))
}

/// The grid lower bound at the finest resolution `≤ max_grid` that fits in
/// [`MAX_CORNER_CELLS`]. Never fails: at resolution 1 the only corner is
/// `(1, ..., 1)`, giving the trivial bound 0.
pub(crate) fn lower_bound_within(points: &PointSet, max_grid: usize) -> DiscrepancyResult {
    let grids = (1..=max_grid.max(1))
        .rev()
        .map(|g| lower_bound_grids(points, g))
        .find(|grids| cell_count(grids) <= MAX_CORNER_CELLS as f64)
        .expect("resolution 1 has a single corner");
    lower_bound_result(points, &grids)
}

fn lower_bound_grids(points: &PointSet, grid_per_dim: usize) -> Vec<Vec<f64>> {
    (0..points.dim())
        .map(|k| {
            let mut coords: Vec<f64> = points.iter().map(|p| p[k]).collect();
            coords.sort_by(f64::total_cmp);
            let mut g = Vec::with_capacity(2 * grid_per_dim);
            for i in 1..=grid_per_dim {
                let t = i as f64 / grid_per_dim as f64;
                g.push(t);
                let j = coords.partition_point(|&x| x < t);
                if let Some(&x) = coords.get(j) {
                    g.push(x);
                }
            }
            g.sort_by(f64::total_cmp);
            g.dedup();
            g
        })
        .collect()
}

fn lower_bound_result(points: &PointSet, grids: &[Vec<f64>]) -> DiscrepancyResult {
    DiscrepancyResult {
        value: max_local_discrepancy(points, grids),
        mode: DiscrepancyMode::LowerBound,
        n: points.len(),
        dim: points.dim(),
    }
}

fn cell_count(grids: &[Vec<f64>]) -> f64 {
    grids.iter().map(|g| g.len() as f64).product()
}

fn check_cells(cells: f64) -> Result<(), DiscrepancyError> {
    if cells > MAX_CORNER_CELLS as f64 {
        return Err(DiscrepancyError::TooManyCorners {
            cells,
            limit: MAX_CORNER_CELLS,
        });
    }
    Ok(())
}

/// Exact value when affordable: the closed form in one dimension, corner
/// enumeration otherwise.
pub fn star_discrepancy(
    points: &PointSet,
    budget: u64,
) -> Result<DiscrepancyResult, DiscrepancyError> {
    if points.dim() == 1 {
        star_discrepancy_1d(points)
    } else {
        star_discrepancy_exact(points, budget)
    }
}

/// Maximum local discrepancy over all corners of the product grid.
/// Each grid must be sorted, deduplicated, and end at a value ≤ 1.
fn max_local_discrepancy(points: &PointSet, grids: &[Vec<f64>]) -> f64 {
    let n = points.len() as f64;
    let shape: Vec<usize> = grids.iter().map(Vec::len).collect();
    let closed = corner_counts(points, grids, &shape, |g, x| g.partition_point(|&t| t < x));
    let open = corner_counts(points, grids, &shape, |g, x| g.partition_point(|&t| t <= x));

    let cells = closed.len();
    let chunk = 4096;
    (0..cells.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut best = 0.0f64;
            let mut index = vec![0usize; shape.len()];
            for cell in c * chunk..((c + 1) * chunk).min(cells) {
                unravel(cell, &shape, &mut index);
                let vol: f64 = index.iter().zip(grids).map(|(&i, g)| g[i]).product();
                let below = vol - open[cell] as f64 / n;
                let above = closed[cell] as f64 / n - vol;
                best = best.max(below).max(above);
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// For every grid corner `c`, the number of points whose per-dimension
/// bucket index (from `bucket`) is `≤ c` componentwise.
fn corner_counts(
    points: &PointSet,
    grids: &[Vec<f64>],
    shape: &[usize],
    bucket: impl Fn(&[f64], f64) -> usize,
) -> Vec<u32> {
    let cells: usize = shape.iter().product();
    let mut counts = vec![0u32; cells];
    'points: for p in points.iter() {
        let mut flat = 0;
        for (k, (&x, g)) in p.iter().zip(grids).enumerate() {
            let b = bucket(g, x);
            if b == shape[k] {
                continue 'points;
            }
            flat = flat * shape[k] + b;
        }
        counts[flat] += 1;
    }
    // Inclusive prefix sum along each axis in turn.
    let mut stride = 1;
    for &len in shape.iter().rev() {
        for cell in 0..cells {
            if (cell / stride) % len != 0 {
                counts[cell] += counts[cell - stride];
            }
        }
        stride *= len;
    }
    counts
}

fn unravel(mut flat: usize, shape: &[usize], index: &mut [usize]) {
    for k in (0..shape.len()).rev() {
        index[k] = flat % shape[k];
        flat /= shape[k];
    }
}
