//! Symbolic image: a directed graph over grid cells whose edges
//! over-approximate one-step transitions.
//!
//! An edge `i → j` exists when the interval image of cell `i` (over all inputs
//! and exogenous ranges) meets the closed bounds of cell `j`. Images are
//! clipped to the grid domain, so transitions leaving X produce no edges.

use alloc::vec::Vec;

use crate::cellset::CellSet;
use crate::dynamics::SystemModel;
use crate::error::{Error, EvalError, Result};
use crate::grid::{for_each_flat_in_range, CellGrid, CellId, IndexBox};
use crate::interval::{Interval, IntervalBox};
use crate::par;

/// How the input box is covered when over-approximating images.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputStrategy {
    /// One interval evaluation over all of U.
    Whole,
    /// Split every input dimension into `k` equal pieces and take the union.
    Partition(usize),
}

impl InputStrategy {
    /// Whole U for models affine in the input, an 8-way split otherwise.
    pub fn default_for(model: &SystemModel) -> Self {
        if model.is_affine_in_input() {
            InputStrategy::Whole
        } else {
            InputStrategy::Partition(8)
        }
    }

    pub fn input_boxes(&self, u: &IntervalBox) -> Vec<IntervalBox> {
        match *self {
            InputStrategy::Whole | InputStrategy::Partition(0 | 1) => alloc::vec![u.clone()],
            InputStrategy::Partition(k) => u.partition(k),
        }
    }
}

/// Per-cell ranges of exogenous variables; an empty slice means the cell has
/// no admissible exogenous value and therefore no successors.
pub trait ExoRanges: Sync {
    fn ranges(&self, cell: CellId) -> &[IntervalBox];
}

#[derive(Clone, Copy)]
pub enum Exogenous<'a> {
    /// The model's own `exo_box` for every cell.
    Static,
    PerCell(&'a dyn ExoRanges),
}

#[derive(Clone, Copy)]
pub struct GraphOptions<'a> {
    pub inputs: InputStrategy,
    pub exogenous: Exogenous<'a>,
    /// Only these cells get outgoing edges; edges may still point anywhere.
    pub sources: Option<&'a CellSet>,
}

impl<'a> GraphOptions<'a> {
    pub fn new(inputs: InputStrategy) -> Self {
        Self {
            inputs,
            exogenous: Exogenous::Static,
            sources: None,
        }
    }
}

/// Union of boxes covering `F(cell) = {f(x,u) : x ∈ cell, u ∈ U}` using the
/// model's static exogenous range.
pub fn image_overapprox(
    model: &SystemModel,
    cell: &IntervalBox,
    inputs: InputStrategy,
) -> core::result::Result<Vec<IntervalBox>, EvalError> {
    inputs
        .input_boxes(model.input_box())
        .iter()
        .map(|ub| model.evaluate_interval(cell, ub))
        .collect()
}

/// Compressed sparse row adjacency with sorted, duplicate-free rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Csr {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Csr {
    pub fn empty(n: usize) -> Self {
        Self {
            offsets: alloc::vec![0; n + 1],
            targets: Vec::new(),
        }
    }

    /// Builds from an edge list; duplicates are removed.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut sorted: Vec<(usize, usize)> = edges.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut offsets = alloc::vec![0; n + 1];
        for &(s, t) in &sorted {
            assert!(s < n && t < n, "edge ({s}, {t}) outside {n} vertices");
            offsets[s + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Self {
            offsets,
            targets: sorted.iter().map(|&(_, t)| t as u32).collect(),
        }
    }

    /// Assembles rows produced in order; each row must already be sorted.
    fn from_rows(n: usize, chunks: Vec<(Vec<u32>, Vec<u32>)>) -> Self {
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let total = chunks.iter().map(|c| c.1.len()).sum();
        let mut targets = Vec::with_capacity(total);
        for (degrees, t) in chunks {
            for d in degrees {
                let last = *offsets.last().unwrap();
                offsets.push(last + d as usize);
            }
            targets.extend_from_slice(&t);
        }
        debug_assert_eq!(offsets.len(), n + 1);
        Self { offsets, targets }
    }

    #[inline]
    pub fn num_vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.targets.len()
    }

    #[inline]
    pub fn successors(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn has_edge(&self, s: usize, t: usize) -> bool {
        self.successors(s).binary_search(&(t as u32)).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_vertices()).flat_map(move |s| self.successors(s).iter().map(move |&t| (s, t as usize)))
    }

    /// Exact transpose; rows come out sorted because sources are visited in order.
    pub fn transpose(&self) -> Csr {
        let n = self.num_vertices();
        let mut offsets = alloc::vec![0usize; n + 1];
        for &t in &self.targets {
            offsets[t as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut targets = alloc::vec![0u32; self.targets.len()];
        for s in 0..n {
            for &t in self.successors(s) {
                targets[fill[t as usize]] = s as u32;
                fill[t as usize] += 1;
            }
        }
        Csr { offsets, targets }
    }
}

/// The graph `G = (V, E)` over the cells of a grid.
#[derive(Clone, Debug)]
pub struct SymbolicImage {
    grid: CellGrid,
    forward: Csr,
    reverse: Option<Csr>,
}

impl SymbolicImage {
    pub fn new(grid: CellGrid, forward: Csr) -> Result<Self> {
        if forward.num_vertices() != grid.len() {
            return Err(Error::GridMismatch(alloc::format!(
                "adjacency has {} vertices, grid has {} cells",
                forward.num_vertices(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            forward,
            reverse: None,
        })
    }

    pub fn from_edges(grid: CellGrid, edges: &[(usize, usize)]) -> Result<Self> {
        let n = grid.len();
        if let Some(&(s, t)) = edges.iter().find(|&&(s, t)| s >= n || t >= n) {
            return Err(Error::CellOutOfRange {
                index: s.max(t),
                total: n,
            });
        }
        Self::new(grid, Csr::from_edges(n, edges))
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    pub fn csr(&self) -> &Csr {
        &self.forward
    }

    pub fn num_vertices(&self) -> usize {
        self.forward.num_vertices()
    }

    pub fn num_edges(&self) -> usize {
        self.forward.num_edges()
    }

    pub fn successors(&self, v: CellId) -> &[u32] {
        self.forward.successors(v.0)
    }

    /// Builds and caches the reverse adjacency.
    pub fn ensure_reverse(&mut self) -> &Csr {
        self.reverse.get_or_insert_with(|| self.forward.transpose())
    }

    pub fn reverse(&self) -> Option<&Csr> {
        self.reverse.as_ref()
    }

    pub fn into_parts(self) -> (CellGrid, Csr) {
        (self.grid, self.forward)
    }
}

/// `{ v : ∃ u ∈ targets, (v, u) ∈ E }`.
pub fn in_neighbors(g: &SymbolicImage, targets: &CellSet) -> CellSet {
    let n = g.num_vertices();
    let mut out = CellSet::new(n);
    match g.reverse() {
        Some(rev) => {
            for t in targets.iter() {
                for &s in rev.successors(t) {
                    out.insert(s as usize);
                }
            }
        }
        None => {
            for s in 0..n {
                if g.csr().successors(s).iter().any(|&t| targets.contains(t as usize)) {
                    out.insert(s);
                }
            }
        }
    }
    out
}

pub fn build_graph(model: &SystemModel, grid: &CellGrid, inputs: InputStrategy) -> Result<SymbolicImage> {
    build_graph_with(model, grid, &GraphOptions::new(inputs))
}

pub fn build_graph_with(model: &SystemModel, grid: &CellGrid, opts: &GraphOptions<'_>) -> Result<SymbolicImage> {
    check_grid(model, grid)?;
    if let Some(src) = opts.sources {
        if src.universe() != grid.len() {
            return Err(Error::GridMismatch("source set is over a different grid".into()));
        }
    }
    let input_boxes = opts.inputs.input_boxes(model.input_box());
    let n = grid.len();
    let chunks = par::map_chunks(n, par::chunk_size(n), |range| {
        let mut ctx = ImageContext::new(model, grid, &input_boxes);
        let mut degrees = Vec::with_capacity(range.len());
        let mut targets = Vec::new();
        let mut row = Vec::new();
        for c in range {
            row.clear();
            let active = opts.sources.is_none_or(|s| s.contains(c));
            if active {
                let exo: &[IntervalBox] = match opts.exogenous {
                    Exogenous::Static => core::slice::from_ref(model.exo_box()),
                    Exogenous::PerCell(p) => p.ranges(CellId(c)),
                };
                ctx.successors(CellId(c), exo, &mut row)?;
            }
            degrees.push(row.len() as u32);
            targets.extend_from_slice(&row);
        }
        Ok::<_, Error>((degrees, targets))
    });
    let chunks = chunks.into_iter().collect::<Result<Vec<_>>>()?;
    SymbolicImage::new(grid.clone(), Csr::from_rows(n, chunks))
}

pub(crate) fn check_grid(model: &SystemModel, grid: &CellGrid) -> Result<()> {
    if grid.dim() != model.state_dim() {
        return Err(Error::DimensionMismatch {
            what: "grid vs model state",
            expected: model.state_dim(),
            got: grid.dim(),
        });
    }
    if grid.domain() != model.state_box() {
        return Err(Error::GridMismatch(
            "grid domain differs from the model's state box".into(),
        ));
    }
    Ok(())
}

/// Reusable buffers for per-cell image rasterization.
pub(crate) struct ImageContext<'a> {
    model: &'a SystemModel,
    grid: &'a CellGrid,
    input_boxes: &'a [IntervalBox],
    multi: Vec<usize>,
    xbox: Vec<Interval>,
    image: Vec<Interval>,
    stack: Vec<Interval>,
    range: IndexBox,
}

impl<'a> ImageContext<'a> {
    pub(crate) fn new(model: &'a SystemModel, grid: &'a CellGrid, input_boxes: &'a [IntervalBox]) -> Self {
        Self {
            model,
            grid,
            input_boxes,
            multi: alloc::vec![0; grid.dim()],
            xbox: Vec::with_capacity(grid.dim()),
            image: Vec::with_capacity(grid.dim()),
            stack: Vec::new(),
            range: Vec::with_capacity(grid.dim()),
        }
    }

    fn load_cell(&mut self, cell: CellId) {
        self.grid.multi_index_into(cell, &mut self.multi);
        self.xbox.clear();
        for (d, &k) in self.multi.iter().enumerate() {
            self.xbox
                .push(Interval::new(self.grid.boundary(d, k), self.grid.boundary(d, k + 1)));
        }
    }

    /// Calls `visit` with the clipped index range of every image box of `cell`.
    /// Stops early and returns true as soon as `visit` returns true.
    pub(crate) fn for_each_image_range(
        &mut self,
        cell: CellId,
        exo: &[IntervalBox],
        mut visit: impl FnMut(&CellGrid, &IndexBox) -> bool,
    ) -> Result<bool> {
        self.load_cell(cell);
        for ub in self.input_boxes {
            for eb in exo {
                self.model.eval_into(
                    &self.xbox,
                    ub.intervals(),
                    eb.intervals(),
                    &mut self.stack,
                    &mut self.image,
                )?;
                if self.grid.cells_meeting_into(&self.image, &mut self.range) && visit(self.grid, &self.range) {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    /// Sorted, duplicate-free successor list of `cell`.
    pub(crate) fn successors(&mut self, cell: CellId, exo: &[IntervalBox], row: &mut Vec<u32>) -> Result<()> {
        let mut pieces = 0usize;
        self.for_each_image_range(cell, exo, |grid, range| {
            pieces += 1;
            for_each_flat_in_range(grid, range, |f| row.push(f as u32));
            false
        })?;
        if pieces > 1 {
            row.sort_unstable();
            row.dedup();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{default_resolver, parse};
    use crate::grid::quantize;
    use alloc::vec;

    fn model(eqs: &[&str], x: IntervalBox, u: IntervalBox) -> SystemModel {
        SystemModel::new(
            "t",
            eqs.iter().map(|s| parse(s, &default_resolver).unwrap()).collect(),
            x,
            u,
        )
        .unwrap()
    }

    fn doubling() -> SystemModel {
        model(
            &["2*x1 + u1"],
            IntervalBox::cube(1, -5.0, 5.0),
            IntervalBox::cube(1, -1.0, 1.0),
        )
    }

    #[test]
    fn images_whole_and_split() {
        let m = doubling();
        let cell = IntervalBox::cube(1, -5.0, -2.5);
        assert_eq!(
            image_overapprox(&m, &cell, InputStrategy::Whole).unwrap(),
            vec![IntervalBox::cube(1, -11.0, -4.0)]
        );
        assert_eq!(
            image_overapprox(&m, &cell, InputStrategy::Partition(2)).unwrap(),
            vec![IntervalBox::cube(1, -11.0, -5.0), IntervalBox::cube(1, -10.0, -4.0)]
        );
    }

    #[test]
    fn degenerate_image_is_a_point() {
        let m = model(
            &["x1*x2 + u1", "x1 - x2"],
            IntervalBox::cube(2, -2.0, 2.0),
            IntervalBox::cube(1, 0.5, 0.5),
        );
        let img = image_overapprox(&m, &IntervalBox::point(&[1.5, -0.5]), InputStrategy::Whole).unwrap();
        assert_eq!(img, vec![IntervalBox::point(&[-0.25, 2.0])]);
    }

    #[test]
    fn doubling_graph_successors() {
        let m = doubling();
        let grid = quantize(m.state_box(), &[4]).unwrap();
        let g = build_graph(&m, &grid, InputStrategy::Whole).unwrap();
        assert_eq!(g.successors(CellId(0)), &[0]);
        assert_eq!(g.successors(CellId(1)), &[0, 1, 2]);
        assert_eq!(g.successors(CellId(2)), &[1, 2, 3]);
        assert_eq!(g.successors(CellId(3)), &[3]);
    }

    #[test]
    fn identity_self_loops_and_contact_neighbours() {
        let m = model(
            &["x1 + u1"],
            IntervalBox::cube(1, 0.0, 1.0),
            IntervalBox::cube(1, 0.0, 0.0),
        );
        let grid = quantize(m.state_box(), &[5]).unwrap();
        let g = build_graph(&m, &grid, InputStrategy::Whole).unwrap();
        for c in 0..5usize {
            let succ = g.successors(CellId(c));
            assert!(succ.contains(&(c as u32)));
            let want: Vec<u32> = (c.saturating_sub(1)..=(c + 1).min(4)).map(|i| i as u32).collect();
            assert_eq!(succ, want.as_slice());
        }
    }

    #[test]
    fn in_neighbour_queries() {
        let grid = quantize(&IntervalBox::cube(1, 0.0, 5.0), &[5]).unwrap();
        let mut g = SymbolicImage::from_edges(grid, &[(1, 2), (3, 2), (4, 4)]).unwrap();
        let t = CellSet::from_indices(5, [2]);
        assert_eq!(in_neighbors(&g, &t).to_vec(), vec![1, 3]);
        assert!(in_neighbors(&g, &CellSet::new(5)).is_empty());
        g.ensure_reverse();
        assert_eq!(in_neighbors(&g, &t).to_vec(), vec![1, 3]);
        assert_eq!(in_neighbors(&g, &CellSet::from_indices(5, [4])).to_vec(), vec![4]);
    }

    #[test]
    fn grid_must_match_model() {
        let m = doubling();
        let grid = quantize(&IntervalBox::cube(2, -5.0, 5.0), &[4, 4]).unwrap();
        assert!(matches!(
            build_graph(&m, &grid, InputStrategy::Whole),
            Err(Error::DimensionMismatch { .. })
        ));
        let other = quantize(&IntervalBox::cube(1, -4.0, 5.0), &[4]).unwrap();
        assert!(matches!(
            build_graph(&m, &other, InputStrategy::Whole),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn source_restriction_drops_rows_only() {
        let m = doubling();
        let grid = quantize(m.state_box(), &[16]).unwrap();
        let full = build_graph(&m, &grid, InputStrategy::Whole).unwrap();
        let src = CellSet::from_indices(16, [3, 7, 8]);
        let opts = GraphOptions {
            sources: Some(&src),
            ..GraphOptions::new(InputStrategy::Whole)
        };
        let g = build_graph_with(&m, &grid, &opts).unwrap();
        for c in 0..16 {
            let want: &[u32] = if src.contains(c) {
                full.successors(CellId(c))
            } else {
                &[]
            };
            assert_eq!(g.successors(CellId(c)), want);
        }
    }

    #[test]
    fn transpose_round_trip() {
        let csr = Csr::from_edges(6, &[(0, 1), (0, 5), (2, 1), (5, 0), (3, 3), (0, 1)]);
        assert_eq!(csr.num_edges(), 5);
        let t = csr.transpose();
        assert_eq!(t.successors(1), &[0, 2]);
        assert_eq!(t.transpose(), csr);
    }
}
