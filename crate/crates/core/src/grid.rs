//! Uniform quantization of a box into cells.
//!
//! Cells are half-open `[lo + k·w, lo + (k+1)·w)` per dimension except the
//! last slab, which is closed. Cell boundaries are always computed from the
//! integer index, so the last boundary equals the domain bound exactly.
//! Flat indices are row-major with dimension 0 varying slowest.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalBox};

/// Largest number of cells a grid may address.
pub const MAX_CELLS: u128 = u32::MAX as u128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId(pub usize);

impl CellId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

/// Inclusive per-dimension index ranges `[first, last]`.
pub type IndexBox = Vec<(usize, usize)>;

#[derive(Clone, Debug, PartialEq)]
pub struct CellGrid {
    domain: IntervalBox,
    divisions: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

/// Quantizes `domain` into `divisions[d]` cells along each dimension.
pub fn quantize(domain: &IntervalBox, divisions: &[usize]) -> Result<CellGrid> {
    CellGrid::new(domain.clone(), divisions.to_vec())
}

impl CellGrid {
    pub fn new(domain: IntervalBox, divisions: Vec<usize>) -> Result<Self> {
        if domain.dim() == 0 {
            return Err(Error::InvalidBox("grid domain must have at least one dimension".into()));
        }
        if divisions.len() != domain.dim() {
            return Err(Error::DimensionMismatch {
                what: "divisions vs domain",
                expected: domain.dim(),
                got: divisions.len(),
            });
        }
        if !domain.is_finite() {
            return Err(Error::InvalidBox("grid domain has non-finite bounds".into()));
        }
        if divisions.contains(&0) {
            return Err(Error::InvalidBox("every dimension needs at least one division".into()));
        }
        let requested = divisions.iter().fold(1u128, |acc, &k| acc.saturating_mul(k as u128));
        if requested > MAX_CELLS || requested > usize::MAX as u128 {
            return Err(Error::GridTooLarge {
                requested,
                limit: MAX_CELLS,
            });
        }
        let mut strides = alloc::vec![1usize; divisions.len()];
        for d in (0..divisions.len().saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * divisions[d + 1];
        }
        Ok(Self {
            domain,
            divisions,
            strides,
            total: requested as usize,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.divisions.len()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn domain(&self) -> &IntervalBox {
        &self.domain
    }

    pub fn divisions(&self) -> &[usize] {
        &self.divisions
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn widths(&self) -> Vec<f64> {
        self.domain
            .intervals()
            .iter()
            .zip(&self.divisions)
            .map(|(iv, &k)| iv.width() / k as f64)
            .collect()
    }

    /// Coordinate of boundary `k ∈ [0, divisions[d]]` along dimension `d`.
    #[inline]
    pub fn boundary(&self, d: usize, k: usize) -> f64 {
        let iv = self.domain.intervals()[d];
        let n = self.divisions[d];
        if k >= n {
            iv.hi()
        } else {
            iv.lo() + (iv.hi() - iv.lo()) * (k as f64) / (n as f64)
        }
    }

    /// Slab index `k` with `boundary(k) <= v < boundary(k+1)`, as a signed
    /// value: `-1` below the domain, `divisions[d]` at or above the top bound.
    pub fn slab(&self, d: usize, v: f64) -> isize {
        let n = self.divisions[d] as isize;
        let iv = self.domain.intervals()[d];
        if v < iv.lo() {
            return -1;
        }
        if v >= iv.hi() {
            return n;
        }
        let guess = libm::floor((v - iv.lo()) / (iv.hi() - iv.lo()) * n as f64);
        let mut k = (guess as isize).clamp(0, n - 1);
        while k > 0 && self.boundary(d, k as usize) > v {
            k -= 1;
        }
        while k + 1 < n && self.boundary(d, (k + 1) as usize) <= v {
            k += 1;
        }
        k
    }

    pub fn flat(&self, multi: &[usize]) -> CellId {
        debug_assert_eq!(multi.len(), self.dim());
        CellId(multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum())
    }

    /// Flat index, or `None` when any component is out of range.
    pub fn try_flat(&self, multi: &[usize]) -> Option<CellId> {
        if multi.len() != self.dim() || multi.iter().zip(&self.divisions).any(|(i, n)| i >= n) {
            return None;
        }
        Some(self.flat(multi))
    }

    pub fn multi_index(&self, id: CellId) -> Vec<usize> {
        let mut out = alloc::vec![0; self.dim()];
        self.multi_index_into(id, &mut out);
        out
    }

    pub fn multi_index_into(&self, id: CellId, out: &mut [usize]) {
        let mut rest = id.0;
        for (d, s) in self.strides.iter().enumerate() {
            out[d] = rest / s;
            rest %= s;
        }
    }

    pub fn check(&self, id: CellId) -> Result<()> {
        if id.0 >= self.total {
            return Err(Error::CellOutOfRange {
                index: id.0,
                total: self.total,
            });
        }
        Ok(())
    }

    /// Closed bounds of a cell.
    pub fn cell_bounds(&self, id: CellId) -> Result<IntervalBox> {
        self.check(id)?;
        let multi = self.multi_index(id);
        Ok(self.bounds_of_multi(&multi))
    }

    pub fn bounds_of_multi(&self, multi: &[usize]) -> IntervalBox {
        IntervalBox::new(
            multi
                .iter()
                .enumerate()
                .map(|(d, &k)| Interval::new(self.boundary(d, k), self.boundary(d, k + 1)))
                .collect(),
        )
    }

    /// Closed bounds of an index range box.
    pub fn bounds_of_range(&self, range: &[(usize, usize)]) -> IntervalBox {
        IntervalBox::new(
            range
                .iter()
                .enumerate()
                .map(|(d, &(a, b))| Interval::new(self.boundary(d, a), self.boundary(d, b + 1)))
                .collect(),
        )
    }

    /// The unique cell containing `point` under the half-open convention.
    pub fn locate(&self, point: &[f64]) -> Result<CellId> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "point vs grid",
                expected: self.dim(),
                got: point.len(),
            });
        }
        let mut flat = 0;
        for (d, &v) in point.iter().enumerate() {
            let n = self.divisions[d] as isize;
            let mut k = self.slab(d, v);
            if k == n && v == self.domain.intervals()[d].hi() {
                k = n - 1;
            }
            if k < 0 || k >= n {
                return Err(Error::PointOutsideDomain);
            }
            flat += k as usize * self.strides[d];
        }
        Ok(CellId(flat))
    }

    /// Index ranges of all cells whose closed bounds meet the closed box
    /// `image`, after clipping to the domain. `None` when the image misses the
    /// domain entirely. Zero-measure contact counts as intersection.
    pub fn cells_meeting(&self, image: &[Interval]) -> Option<IndexBox> {
        let mut out = Vec::with_capacity(self.dim());
        self.cells_meeting_into(image, &mut out).then_some(out)
    }

    /// Allocation-free variant of [`cells_meeting`](Self::cells_meeting);
    /// returns false when the image misses the domain.
    pub fn cells_meeting_into(&self, image: &[Interval], out: &mut IndexBox) -> bool {
        out.clear();
        for (d, iv) in image.iter().enumerate() {
            match self.slabs_meeting(d, *iv) {
                Some(r) => out.push(r),
                None => return false,
            }
        }
        true
    }

    /// Inclusive slab range along `d` meeting the closed interval `iv`.
    pub fn slabs_meeting(&self, d: usize, iv: Interval) -> Option<(usize, usize)> {
        let dom = self.domain.intervals()[d];
        if iv.hi() < dom.lo() || iv.lo() > dom.hi() {
            return None;
        }
        let n = self.divisions[d] as isize;
        let mut first = self.slab(d, iv.lo());
        if first >= 0 && first < n && self.boundary(d, first as usize) == iv.lo() {
            // touching the lower face of slab `first` also touches slab `first-1`
            first -= 1;
        }
        if first >= n {
            // iv.lo() == hi bound exactly
            first = n - 1;
        }
        let last = self.slab(d, iv.hi()).min(n - 1);
        let first = first.max(0);
        if first > last {
            return None;
        }
        Some((first as usize, last as usize))
    }

    /// Euclidean diameter of a cell (all cells are congruent).
    pub fn diameter(&self) -> f64 {
        libm::sqrt(self.widths().iter().map(|w| w * w).sum())
    }

    /// Sub-grid over a subset of dimensions (same bounds and divisions).
    pub fn project(&self, dims: &[usize]) -> Result<CellGrid> {
        CellGrid::new(
            self.domain.project(dims),
            dims.iter().map(|&d| self.divisions[d]).collect(),
        )
    }

    /// True when dimension `a` of `self` and dimension `b` of `other` have the
    /// same bounds and division count.
    pub fn axis_matches(&self, a: usize, other: &CellGrid, b: usize) -> bool {
        self.divisions[a] == other.divisions[b] && self.domain.intervals()[a] == other.domain.intervals()[b]
    }
}

/// Visits every multi-index of an index box in ascending flat order.
pub fn for_each_in_range(range: &[(usize, usize)], mut f: impl FnMut(&[usize])) {
    if range.is_empty() {
        return;
    }
    let mut idx: Vec<usize> = range.iter().map(|r| r.0).collect();
    loop {
        f(&idx);
        let mut d = range.len();
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            if idx[d] < range[d].1 {
                idx[d] += 1;
                break;
            }
            idx[d] = range[d].0;
        }
    }
}

/// Visits the flat indices of an index box in ascending order.
pub fn for_each_flat_in_range(grid: &CellGrid, range: &[(usize, usize)], mut f: impl FnMut(usize)) {
    let dim = range.len();
    if dim == 0 {
        return;
    }
    let strides = grid.strides();
    let last = dim - 1;
    let (a, b) = range[last];
    let mut idx: Vec<usize> = range.iter().map(|r| r.0).collect();
    loop {
        let base: usize = idx[..last].iter().zip(strides).map(|(i, s)| i * s).sum();
        for k in a..=b {
            f(base + k);
        }
        let mut d = last;
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            if idx[d] < range[d].1 {
                idx[d] += 1;
                break;
            }
            idx[d] = range[d].0;
        }
    }
}

pub fn range_volume(range: &[(usize, usize)]) -> usize {
    range.iter().map(|(a, b)| b - a + 1).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn line(lo: f64, hi: f64, n: usize) -> CellGrid {
        quantize(&IntervalBox::cube(1, lo, hi), &[n]).unwrap()
    }

    #[test]
    fn uniform_split_bounds() {
        let g = line(-5.0, 5.0, 4);
        let b: Vec<_> = (0..4)
            .map(|i| g.cell_bounds(CellId(i)).unwrap().intervals()[0])
            .collect();
        assert_eq!(b[0], Interval::new(-5.0, -2.5));
        assert_eq!(b[1], Interval::new(-2.5, 0.0));
        assert_eq!(b[2], Interval::new(0.0, 2.5));
        assert_eq!(b[3], Interval::new(2.5, 5.0));
        assert!(g.cell_bounds(CellId(4)).is_err());
    }

    #[test]
    fn locate_half_open() {
        let g = line(-5.0, 5.0, 4);
        assert_eq!(g.locate(&[0.0]).unwrap(), CellId(2));
        assert_eq!(g.locate(&[5.0]).unwrap(), CellId(3));
        assert_eq!(g.locate(&[-2.5]).unwrap(), CellId(1));
        assert_eq!(g.locate(&[-5.0]).unwrap(), CellId(0));
        assert!(g.locate(&[5.000001]).is_err());
        assert!(g.locate(&[-5.1]).is_err());
    }

    #[test]
    fn closed_top_in_two_dimensions() {
        let g = quantize(&IntervalBox::cube(2, 0.0, 1.0), &[2, 2]).unwrap();
        assert_eq!(g.len(), 4);
        let id = g.locate(&[1.0, 1.0]).unwrap();
        assert_eq!(g.multi_index(id), vec![1, 1]);
    }

    #[test]
    fn large_grid_count() {
        let g = quantize(&IntervalBox::cube(3, -5.0, 5.0), &[128, 128, 128]).unwrap();
        assert_eq!(g.len(), 2_097_152);
    }

    #[test]
    fn overflow_reported() {
        let err = quantize(&IntervalBox::cube(6, 0.0, 1.0), &[128; 6]).unwrap_err();
        match err {
            Error::GridTooLarge { requested, .. } => assert_eq!(requested, 128u128.pow(6)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn last_cell_closure_six_d() {
        let g = quantize(&IntervalBox::cube(6, 0.0, 1.0), &[16; 6]).unwrap();
        let id = g.flat(&[15; 6]);
        let b = g.cell_bounds(id).unwrap();
        assert_eq!(b.hi(), vec![1.0; 6]);
    }

    #[test]
    fn diameters() {
        assert_eq!(line(-5.0, 5.0, 4).diameter(), 2.5);
        let g = quantize(&IntervalBox::cube(2, -5.0, 5.0), &[4, 4]).unwrap();
        assert!((g.diameter() - 2.5 * core::f64::consts::SQRT_2).abs() < 1e-15);
        assert_eq!(line(0.0, 1.0, 1).diameter(), 1.0);
    }

    #[test]
    fn slabs_meeting_contact_rules() {
        let g = line(-5.0, 5.0, 4);
        // [-11,-4] clipped to the first cell only
        assert_eq!(g.slabs_meeting(0, Interval::new(-11.0, -4.0)), Some((0, 0)));
        // [-6, 1] meets cells 0..=2
        assert_eq!(g.slabs_meeting(0, Interval::new(-6.0, 1.0)), Some((0, 2)));
        // touching the boundary at 0 meets both neighbours
        assert_eq!(g.slabs_meeting(0, Interval::new(0.0, 0.0)), Some((1, 2)));
        assert_eq!(g.slabs_meeting(0, Interval::new(5.0, 7.0)), Some((3, 3)));
        assert_eq!(g.slabs_meeting(0, Interval::new(-7.0, -5.0)), Some((0, 0)));
        assert_eq!(g.slabs_meeting(0, Interval::new(5.5, 7.0)), None);
    }

    #[test]
    fn range_enumeration_is_sorted() {
        let g = quantize(&IntervalBox::cube(3, 0.0, 1.0), &[4, 3, 5]).unwrap();
        let mut seen = Vec::new();
        for_each_flat_in_range(&g, &[(1, 2), (0, 1), (2, 4)], |f| seen.push(f));
        assert_eq!(seen.len(), 12);
        assert!(seen.windows(2).all(|w| w[0] < w[1]));
        let mut multi = Vec::new();
        for_each_in_range(&[(1, 2), (0, 1), (2, 4)], |m| multi.push(g.flat(m).0));
        assert_eq!(seen, multi);
    }
}
