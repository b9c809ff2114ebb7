//! Dense bitsets over flat cell indices.

use alloc::vec::Vec;

use crate::grid::CellGrid;

/// A set of cell indices drawn from `0..universe`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CellSet {
    universe: usize,
    words: Vec<u64>,
}

impl core::fmt::Debug for CellSet {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl CellSet {
    pub fn new(universe: usize) -> Self {
        Self {
            universe,
            words: alloc::vec![0; universe.div_ceil(64)],
        }
    }

    pub fn full(universe: usize) -> Self {
        let mut s = Self::new(universe);
        s.words.iter_mut().for_each(|w| *w = u64::MAX);
        s.trim();
        s
    }

    /// Panics when an index is outside the universe.
    pub fn from_indices(universe: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::new(universe);
        for i in indices {
            s.insert(i);
        }
        s
    }

    fn trim(&mut self) {
        let rem = self.universe % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    #[inline]
    pub fn universe(&self) -> usize {
        self.universe
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        i < self.universe && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    /// Smallest member in `lo..=hi`, if any.
    pub fn first_in(&self, lo: usize, hi: usize) -> Option<usize> {
        let hi = hi.min(self.universe.checked_sub(1)?);
        if lo > hi {
            return None;
        }
        let (wl, wh) = (lo / 64, hi / 64);
        for w in wl..=wh {
            let mut bits = self.words[w];
            if w == wl {
                bits &= !0u64 << (lo % 64);
            }
            if w == wh && hi % 64 != 63 {
                bits &= (1u64 << (hi % 64 + 1)) - 1;
            }
            if bits != 0 {
                return Some(w * 64 + bits.trailing_zeros() as usize);
            }
        }
        None
    }

    /// Smallest member inside an inclusive index box of `grid`.
    pub fn first_in_box(&self, grid: &CellGrid, range: &[(usize, usize)]) -> Option<usize> {
        let dim = range.len();
        let strides = grid.strides();
        let (a, b) = *range.last()?;
        let mut idx: Vec<usize> = range.iter().map(|r| r.0).collect();
        loop {
            let base: usize = idx[..dim - 1].iter().zip(strides).map(|(i, s)| i * s).sum();
            if let Some(w) = self.first_in(base + a, base + b) {
                return Some(w);
            }
            let mut d = dim - 1;
            loop {
                if d == 0 {
                    return None;
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

    /// Returns true when `i` was newly inserted.
    #[inline]
    pub fn insert(&mut self, i: usize) -> bool {
        assert!(i < self.universe, "cell {i} outside universe {}", self.universe);
        let w = &mut self.words[i / 64];
        let bit = 1u64 << (i % 64);
        let fresh = *w & bit == 0;
        *w |= bit;
        fresh
    }

    #[inline]
    pub fn remove(&mut self, i: usize) -> bool {
        if i >= self.universe {
            return false;
        }
        let w = &mut self.words[i / 64];
        let bit = 1u64 << (i % 64);
        let had = *w & bit != 0;
        *w &= !bit;
        had
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
    }

    /// Ascending iteration.
    pub fn iter(&self) -> Iter<'_> {
        Iter {
            words: &self.words,
            word: 0,
            current: self.words.first().copied().unwrap_or(0),
        }
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    fn same_universe(&self, other: &CellSet) {
        assert_eq!(self.universe, other.universe, "cell sets over different grids");
    }

    pub fn union_with(&mut self, other: &CellSet) {
        self.same_universe(other);
        self.words.iter_mut().zip(&other.words).for_each(|(a, b)| *a |= b);
    }

    pub fn intersect_with(&mut self, other: &CellSet) {
        self.same_universe(other);
        self.words.iter_mut().zip(&other.words).for_each(|(a, b)| *a &= b);
    }

    pub fn difference_with(&mut self, other: &CellSet) {
        self.same_universe(other);
        self.words.iter_mut().zip(&other.words).for_each(|(a, b)| *a &= !b);
    }

    pub fn union(&self, other: &CellSet) -> CellSet {
        let mut s = self.clone();
        s.union_with(other);
        s
    }

    pub fn intersection(&self, other: &CellSet) -> CellSet {
        let mut s = self.clone();
        s.intersect_with(other);
        s
    }

    pub fn difference(&self, other: &CellSet) -> CellSet {
        let mut s = self.clone();
        s.difference_with(other);
        s
    }

    pub fn complement(&self) -> CellSet {
        let mut s = self.clone();
        s.words.iter_mut().for_each(|w| *w = !*w);
        s.trim();
        s
    }

    pub fn is_subset(&self, other: &CellSet) -> bool {
        self.same_universe(other);
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &CellSet) -> bool {
        self.same_universe(other);
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    /// Cartesian product `self × other` indexed `a * |other| + b`, which is the
    /// row-major flat index on the concatenated grid.
    pub fn product(&self, other: &CellSet) -> CellSet {
        let mut s = CellSet::new(self.universe * other.universe);
        for a in self.iter() {
            let base = a * other.universe;
            for b in other.iter() {
                s.insert(base + b);
            }
        }
        s
    }
}

pub struct Iter<'a> {
    words: &'a [u64],
    word: usize,
    current: u64,
}

impl Iterator for Iter<'_> {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        loop {
            if self.current != 0 {
                let bit = self.current.trailing_zeros() as usize;
                self.current &= self.current - 1;
                return Some(self.word * 64 + bit);
            }
            self.word += 1;
            if self.word >= self.words.len() {
                return None;
            }
            self.current = self.words[self.word];
        }
    }
}

impl<'a> IntoIterator for &'a CellSet {
    type Item = usize;
    type IntoIter = Iter<'a>;

    fn into_iter(self) -> Iter<'a> {
        self.iter()
    }
}
