//! Decentralized and distributed subsystem passes.
//!
//! The decentralized pass solves every subsystem with its missing upstream
//! states ranging over their whole projected constraint. The distributed pass
//! walks the chain in order and, for each downstream cell, narrows the missing
//! states to the values the upstream solution actually admits at the same
//! overlap coordinates.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::cellset::CellSet;
use crate::decomposition::{ChainLink, Decomposition, Subsystem};
use crate::error::{Error, Result};
use crate::grid::{CellGrid, CellId, IndexBox};
use crate::interval::{Interval, IntervalBox};
use crate::invariance::i_plus;
use crate::symbolic_image::{build_graph_with, ExoRanges, Exogenous, GraphOptions, InputStrategy, SymbolicImage};

/// `(Rᵢ, Gᵢ)` for one subsystem.
#[derive(Clone, Debug)]
pub struct SubsystemSolution {
    index: usize,
    graph: SymbolicImage,
    cells: CellSet,
}

impl SubsystemSolution {
    pub fn new(index: usize, graph: SymbolicImage, cells: CellSet) -> Result<Self> {
        if cells.universe() != graph.num_vertices() {
            return Err(Error::GridMismatch("cell set and graph sizes differ".into()));
        }
        Ok(Self { index, graph, cells })
    }

    /// Position of the subsystem in the chain (0-based).
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn grid(&self) -> &CellGrid {
        self.graph.grid()
    }

    pub fn graph(&self) -> &SymbolicImage {
        &self.graph
    }

    pub fn graph_mut(&mut self) -> &mut SymbolicImage {
        &mut self.graph
    }

    pub fn cells(&self) -> &CellSet {
        &self.cells
    }
}

/// Options shared by both passes.
#[derive(Clone, Debug, Default)]
pub struct PassOptions {
    /// Input strategy for every subsystem; `None` picks the per-model default.
    pub inputs: Option<InputStrategy>,
}

impl PassOptions {
    fn inputs_for(&self, sub: &Subsystem) -> InputStrategy {
        self.inputs.unwrap_or_else(|| InputStrategy::default_for(sub.model()))
    }
}

/// The same division count along every dimension of every subsystem.
pub fn uniform_divisions(d: &Decomposition, k: usize) -> Vec<Vec<usize>> {
    d.subsystems().iter().map(|s| alloc::vec![k; s.dim()]).collect()
}

/// Indices of subsystems whose solution is empty.
pub fn empty_subsystems(solutions: &[SubsystemSolution]) -> Vec<usize> {
    solutions
        .iter()
        .filter(|s| s.cells.is_empty())
        .map(|s| s.index)
        .collect()
}

fn subsystem_grids(d: &Decomposition, divisions: &[Vec<usize>]) -> Result<Vec<CellGrid>> {
    if divisions.len() != d.len() {
        return Err(Error::DimensionMismatch {
            what: "division lists vs subsystems",
            expected: d.len(),
            got: divisions.len(),
        });
    }
    d.subsystems()
        .iter()
        .zip(divisions)
        .map(|(s, k)| CellGrid::new(s.model().state_box().clone(), k.clone()))
        .collect()
}

fn solve(index: usize, sub: &Subsystem, grid: &CellGrid, opts: &GraphOptions<'_>) -> Result<SubsystemSolution> {
    let mut graph = build_graph_with(sub.model(), grid, opts)?;
    graph.ensure_reverse();
    let cells = i_plus(&graph);
    SubsystemSolution::new(index, graph, cells)
}

/// Solves every subsystem with missing states fixed to their projected
/// constraint box. Subsystems are independent and run concurrently.
pub fn decentralized_pass(
    d: &Decomposition,
    divisions: &[Vec<usize>],
    opts: &PassOptions,
) -> Result<Vec<SubsystemSolution>> {
    let grids = subsystem_grids(d, divisions)?;
    let run = |i: usize| {
        let sub = &d.subsystems()[i];
        solve(i, sub, &grids[i], &GraphOptions::new(opts.inputs_for(sub)))
    };
    #[cfg(feature = "parallel")]
    let results: Vec<Result<SubsystemSolution>> = {
        use rayon::prelude::*;
        (0..d.len()).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<SubsystemSolution>> = (0..d.len()).map(run).collect();
    results.into_iter().collect()
}

/// Solves the chain in order, narrowing each subsystem's missing states with
/// the upstream solution. With `seed` (a decentralized result on the same
/// grids) only the seed's cells get outgoing edges, which shrinks the work
/// without changing the result.
pub fn distributed_pass(
    d: &Decomposition,
    divisions: &[Vec<usize>],
    seed: Option<&[SubsystemSolution]>,
    opts: &PassOptions,
) -> Result<Vec<SubsystemSolution>> {
    let grids = subsystem_grids(d, divisions)?;
    if let Some(seed) = seed {
        if seed.len() != d.len() || seed.iter().zip(&grids).any(|(s, g)| s.grid() != g) {
            return Err(Error::GridMismatch(
                "seed solutions do not match the requested grids".into(),
            ));
        }
    }
    let mut out: Vec<SubsystemSolution> = Vec::with_capacity(d.len());
    for (i, sub) in d.subsystems().iter().enumerate() {
        let sources = seed.map(|s| s[i].cells());
        let inputs = opts.inputs_for(sub);
        let sol = match d.link(i) {
            None => match seed {
                Some(s) => s[0].clone(),
                None => solve(i, sub, &grids[i], &GraphOptions::new(inputs))?,
            },
            Some(link) => {
                let table = estimate_missing(&out[i - 1], &grids[i], link)?;
                let g = GraphOptions {
                    inputs,
                    exogenous: Exogenous::PerCell(&table),
                    sources,
                };
                solve(i, sub, &grids[i], &g)?
            }
        };
        out.push(sol);
    }
    Ok(out)
}

/// Admissible missing-state values per downstream cell, keyed by the cell's
/// overlap coordinates. Each entry is a list of pairwise disjoint boxes over
/// the missing dimensions whose union is exactly the projection of the
/// matching upstream cells.
#[derive(Clone, Debug)]
pub struct MissingStateTable {
    /// Downstream local dimension of each overlap coordinate.
    down_dims: Vec<usize>,
    down_divisions: Vec<usize>,
    down_strides: Vec<usize>,
    key_strides: Vec<usize>,
    index_boxes: Vec<Vec<IndexBox>>,
    boxes: Vec<Vec<IntervalBox>>,
}

impl MissingStateTable {
    fn key_of(&self, cell: CellId) -> usize {
        self.down_dims
            .iter()
            .zip(&self.key_strides)
            .map(|(&d, ks)| (cell.0 / self.down_strides[d]) % self.down_divisions[d] * ks)
            .sum()
    }

    /// Disjoint boxes of admissible missing-state values for a downstream cell.
    pub fn entry(&self, cell: CellId) -> &[IntervalBox] {
        &self.boxes[self.key_of(cell)]
    }

    /// The same entry as inclusive upstream index ranges.
    pub fn index_entry(&self, cell: CellId) -> &[IndexBox] {
        &self.index_boxes[self.key_of(cell)]
    }

    /// Number of distinct overlap keys.
    pub fn keys(&self) -> usize {
        self.boxes.len()
    }
}

impl ExoRanges for MissingStateTable {
    fn ranges(&self, cell: CellId) -> &[IntervalBox] {
        self.entry(cell)
    }
}

/// Builds the missing-state table of the subsystem downstream of `upstream`.
pub fn estimate_missing(
    upstream: &SubsystemSolution,
    target_grid: &CellGrid,
    link: &ChainLink,
) -> Result<MissingStateTable> {
    let ug = upstream.grid();
    for &(u, t) in &link.overlap {
        if u >= ug.dim() || t >= target_grid.dim() || !ug.axis_matches(u, target_grid, t) {
            return Err(Error::GridMismatch(format!(
                "overlap axis {} upstream and {} downstream differ in bounds or divisions",
                u + 1,
                t + 1
            )));
        }
    }
    if let Some(&m) = link.missing.iter().find(|&&m| m >= ug.dim()) {
        return Err(Error::GridMismatch(format!(
            "missing axis {} outside the upstream grid",
            m + 1
        )));
    }

    let mut key_strides = alloc::vec![0; link.overlap.len()];
    let mut keys = 1usize;
    for k in (0..link.overlap.len()).rev() {
        key_strides[k] = keys;
        keys *= ug.divisions()[link.overlap[k].0];
    }

    let mut points: Vec<Vec<Vec<usize>>> = alloc::vec![Vec::new(); keys];
    let mut multi = alloc::vec![0; ug.dim()];
    for c in upstream.cells().iter() {
        ug.multi_index_into(CellId(c), &mut multi);
        let key: usize = link
            .overlap
            .iter()
            .zip(&key_strides)
            .map(|(&(u, _), s)| multi[u] * s)
            .sum();
        points[key].push(link.missing.iter().map(|&m| multi[m]).collect());
    }

    let mut index_boxes = Vec::with_capacity(keys);
    let mut boxes = Vec::with_capacity(keys);
    for mut pts in points {
        pts.sort_unstable();
        pts.dedup();
        let ib = compress(&pts);
        boxes.push(
            ib.iter()
                .map(|r| {
                    IntervalBox::new(
                        r.iter()
                            .zip(&link.missing)
                            .map(|(&(a, b), &m)| Interval::new(ug.boundary(m, a), ug.boundary(m, b + 1)))
                            .collect(),
                    )
                })
                .collect(),
        );
        index_boxes.push(ib);
    }

    Ok(MissingStateTable {
        down_dims: link.overlap.iter().map(|&(_, t)| t).collect(),
        down_divisions: target_grid.divisions().to_vec(),
        down_strides: target_grid.strides().to_vec(),
        key_strides,
        index_boxes,
        boxes,
    })
}

/// Exact disjoint box cover of a sorted, duplicate-free set of integer points.
///
/// Points are grouped by their first coordinate; each group's remainder is
/// compressed recursively and consecutive first coordinates with identical
/// remainders are merged into one run.
pub(crate) fn compress(points: &[Vec<usize>]) -> Vec<IndexBox> {
    if points.is_empty() {
        return Vec::new();
    }
    if points[0].is_empty() {
        return alloc::vec![Vec::new()];
    }
    let mut groups: BTreeMap<usize, Vec<Vec<usize>>> = BTreeMap::new();
    for p in points {
        groups.entry(p[0]).or_default().push(p[1..].to_vec());
    }
    let mut runs: Vec<(usize, usize, Vec<IndexBox>)> = Vec::new();
    for (v, rest) in groups {
        let sub = compress(&rest);
        match runs.last_mut() {
            Some((_, end, prev)) if *end + 1 == v && *prev == sub => *end = v,
            _ => runs.push((v, v, sub)),
        }
    }
    let mut out = Vec::new();
    for (a, b, subs) in runs {
        for s in subs {
            let mut r = Vec::with_capacity(s.len() + 1);
            r.push((a, b));
            r.extend(s);
            out.push(r);
        }
    }
    out
}
