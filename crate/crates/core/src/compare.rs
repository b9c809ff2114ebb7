//! Set comparison on a shared grid: counts and the Chebyshev boundary
//! discrepancy.

use alloc::vec::Vec;

use crate::cellset::CellSet;
use crate::error::{Error, Result};
use crate::grid::{CellGrid, CellId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Comparison {
    pub a: usize,
    pub b: usize,
    pub both: usize,
    pub a_only: usize,
    pub b_only: usize,
    /// Largest Chebyshev index distance from a cell of A \ B to B; `None`
    /// when A \ B is non-empty and B is empty.
    pub a_to_b: Option<usize>,
    pub b_to_a: Option<usize>,
}

impl Comparison {
    /// The larger one-sided discrepancy (`None` if either side is unbounded).
    pub fn discrepancy(&self) -> Option<usize> {
        Some(self.a_to_b?.max(self.b_to_a?))
    }
}

pub fn compare(grid: &CellGrid, a: &CellSet, b: &CellSet) -> Result<Comparison> {
    if a.universe() != grid.len() || b.universe() != grid.len() {
        return Err(Error::GridMismatch("cell sets are over a different grid".into()));
    }
    let a_only = a.difference(b);
    let b_only = b.difference(a);
    Ok(Comparison {
        a: a.len(),
        b: b.len(),
        both: a.intersection(b).len(),
        a_only: a_only.len(),
        b_only: b_only.len(),
        a_to_b: one_sided(grid, &a_only, b),
        b_to_a: one_sided(grid, &b_only, a),
    })
}

fn one_sided(grid: &CellGrid, from: &CellSet, to: &CellSet) -> Option<usize> {
    let mut worst = 0;
    for c in from.iter() {
        worst = worst.max(chebyshev_distance(grid, CellId(c), to)?);
    }
    Some(worst)
}

/// Chebyshev index distance from `cell` to the nearest member of `set`.
pub fn chebyshev_distance(grid: &CellGrid, cell: CellId, set: &CellSet) -> Option<usize> {
    if set.is_empty() {
        return None;
    }
    if set.contains(cell.0) {
        return Some(0);
    }
    let m = grid.multi_index(cell);
    let reach = grid.divisions().iter().copied().max().unwrap_or(0);
    let mut range: Vec<(usize, usize)> = Vec::with_capacity(m.len());
    for r in 1..=reach {
        range.clear();
        range.extend(
            m.iter()
                .zip(grid.divisions())
                .map(|(&k, &n)| (k.saturating_sub(r), (k + r).min(n - 1))),
        );
        if set.first_in_box(grid, &range).is_some() {
            return Some(r);
        }
    }
    None
}

/// Projection of `set` onto the grid axes `dims`: a projected cell is present
/// when some member maps onto it.
pub fn project_set(grid: &CellGrid, set: &CellSet, dims: &[usize]) -> Result<(CellGrid, CellSet)> {
    if dims.iter().any(|&d| d >= grid.dim()) {
        return Err(Error::DimensionMismatch {
            what: "projection axis",
            expected: grid.dim(),
            got: dims.iter().copied().max().unwrap_or(0) + 1,
        });
    }
    let sub = grid.project(dims)?;
    let mut out = CellSet::new(sub.len());
    let mut m = alloc::vec![0usize; grid.dim()];
    let mut pm = alloc::vec![0usize; dims.len()];
    for c in set.iter() {
        grid.multi_index_into(CellId(c), &mut m);
        for (p, &d) in pm.iter_mut().zip(dims) {
            *p = m[d];
        }
        out.insert(sub.flat(&pm).0);
    }
    Ok((sub, out))
}

/// Comparisons of the projections onto every pair of axes, keyed by the pair.
pub fn compare_pairs(grid: &CellGrid, a: &CellSet, b: &CellSet) -> Result<Vec<((usize, usize), Comparison)>> {
    let mut out = Vec::new();
    for i in 0..grid.dim() {
        for j in i + 1..grid.dim() {
            let (g, pa) = project_set(grid, a, &[i, j])?;
            let (_, pb) = project_set(grid, b, &[i, j])?;
            out.push(((i, j), compare(&g, &pa, &pb)?));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::quantize;
    use crate::interval::IntervalBox;

    fn grid2(n: usize) -> CellGrid {
        quantize(&IntervalBox::cube(2, 0.0, 1.0), &[n, n]).unwrap()
    }

    #[test]
    fn identical_sets_have_no_discrepancy() {
        let g = grid2(6);
        let a = CellSet::from_indices(36, [0, 7, 8, 20]);
        let c = compare(&g, &a, &a).unwrap();
        assert_eq!((c.a, c.both, c.a_only, c.b_only), (4, 4, 0, 0));
        assert_eq!(c.discrepancy(), Some(0));
    }

    #[test]
    fn subset_has_one_sided_distance() {
        let g = grid2(6);
        let a = CellSet::from_indices(36, [14]);
        // B adds a cell two columns to the right
        let b = CellSet::from_indices(36, [14, 16]);
        let c = compare(&g, &a, &b).unwrap();
        assert_eq!(c.a_only, 0);
        assert_eq!(c.a_to_b, Some(0));
        assert_eq!(c.b_to_a, Some(2));
        assert_eq!(compare(&g, &CellSet::new(36), &b).unwrap().b_to_a, None);
    }

    #[test]
    fn pair_projections() {
        let g = quantize(&IntervalBox::cube(3, 0.0, 1.0), &[4, 4, 4]).unwrap();
        let a = CellSet::from_indices(64, [g.flat(&[1, 2, 3]).0]);
        let (pg, pa) = project_set(&g, &a, &[0, 2]).unwrap();
        assert_eq!(pa.to_vec(), [pg.flat(&[1, 3]).0]);
        let pairs = compare_pairs(&g, &a, &a).unwrap();
        assert_eq!(pairs.iter().map(|p| p.0).collect::<Vec<_>>(), [(0, 1), (0, 2), (1, 2)]);
        assert!(project_set(&g, &a, &[3]).is_err());
    }
}
