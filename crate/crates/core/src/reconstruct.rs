//! Reconstruction of the full-dimension cover from subsystem solutions,
//! flagging of suspect cells and validation against the full model.

use alloc::vec::Vec;

use crate::cellset::CellSet;
use crate::decomposition::Decomposition;
use crate::distributed::SubsystemSolution;
use crate::dynamics::SystemModel;
use crate::error::{Error, Result};
use crate::grid::{CellGrid, CellId};
use crate::interval::IntervalBox;
use crate::par;
use crate::symbolic_image::{check_grid, in_neighbors, ImageContext, InputStrategy, SymbolicImage};

/// Full-dimension cells built from subsystem solutions.
///
/// Every subsystem owns a subset of the global axes; a full cell's
/// provenance is its projection onto each subsystem grid.
#[derive(Clone, Debug)]
pub struct FullCover {
    grid: CellGrid,
    cells: CellSet,
    owned: Vec<Vec<usize>>,
    sub_strides: Vec<Vec<usize>>,
}

impl FullCover {
    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    pub fn cells(&self) -> &CellSet {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn subsystems(&self) -> usize {
        self.owned.len()
    }

    pub fn with_cells(&self, cells: CellSet) -> FullCover {
        assert_eq!(cells.universe(), self.grid.len());
        FullCover { cells, ..self.clone() }
    }

    /// Cell of subsystem `sub`'s grid that `cell` projects onto.
    pub fn project(&self, cell: CellId, sub: usize) -> CellId {
        let strides = self.grid.strides();
        let divs = self.grid.divisions();
        CellId(
            self.owned[sub]
                .iter()
                .zip(&self.sub_strides[sub])
                .map(|(&g, s)| (cell.0 / strides[g]) % divs[g] * s)
                .sum(),
        )
    }

    /// Per-subsystem cells a full cell was built from.
    pub fn provenance(&self, cell: CellId) -> Vec<CellId> {
        (0..self.subsystems()).map(|s| self.project(cell, s)).collect()
    }
}

/// Full grid assembled from the subsystem grids; shared axes must agree.
fn full_grid(d: &Decomposition, solutions: &[SubsystemSolution]) -> Result<CellGrid> {
    if solutions.len() != d.len() {
        return Err(Error::DimensionMismatch {
            what: "solutions vs subsystems",
            expected: d.len(),
            got: solutions.len(),
        });
    }
    let n = d.full_model().state_dim();
    let mut divisions: Vec<Option<usize>> = alloc::vec![None; n];
    for (sub, sol) in d.subsystems().iter().zip(solutions) {
        let g = sol.grid();
        if g.domain() != sub.model().state_box() {
            return Err(Error::GridMismatch(alloc::format!(
                "solution {} is not over its subsystem's state box",
                sol.index() + 1
            )));
        }
        for (k, &glob) in sub.owned().iter().enumerate() {
            let div = g.divisions()[k];
            match divisions[glob] {
                Some(prev) if prev != div => {
                    return Err(Error::GridMismatch(alloc::format!(
                        "x{} is divided {prev} and {div} times in different subsystems",
                        glob + 1
                    )))
                }
                _ => divisions[glob] = Some(div),
            }
        }
    }
    let divisions = divisions
        .into_iter()
        .map(|d| d.ok_or_else(|| Error::GridMismatch("a state is owned by no subsystem".into())))
        .collect::<Result<Vec<_>>>()?;
    CellGrid::new(d.full_model().state_box().clone(), divisions)
}

/// Joins the subsystem solutions along the chain: a full cell belongs to the
/// cover when its projection onto every subsystem lies in that subsystem's
/// solution. Downstream cells are paired with every upstream cell that agrees
/// on the overlap coordinates, so the cover is an exact union of cells.
pub fn reconstruct(d: &Decomposition, solutions: &[SubsystemSolution]) -> Result<FullCover> {
    let grid = full_grid(d, solutions)?;
    let owned: Vec<Vec<usize>> = d.subsystems().iter().map(|s| s.owned().to_vec()).collect();
    let sub_strides: Vec<Vec<usize>> = solutions.iter().map(|s| s.grid().strides().to_vec()).collect();
    let mut cover = FullCover {
        cells: CellSet::new(grid.len()),
        grid,
        owned,
        sub_strides,
    };

    // For each downstream subsystem, its solution cells grouped by the
    // coordinates it shares with the upstream one.
    let mut groups: Vec<alloc::collections::BTreeMap<Vec<usize>, Vec<Vec<usize>>>> = Vec::new();
    for (i, sol) in solutions.iter().enumerate().skip(1) {
        let link = d.link(i).expect("downstream subsystem has a link");
        let mut map: alloc::collections::BTreeMap<Vec<usize>, Vec<Vec<usize>>> = Default::default();
        for c in sol.cells().iter() {
            let m = sol.grid().multi_index(CellId(c));
            let key = link.overlap.iter().map(|&(_, t)| m[t]).collect();
            map.entry(key).or_default().push(m);
        }
        groups.push(map);
    }

    let mut global = alloc::vec![0usize; cover.grid.dim()];
    let first = &solutions[0];
    for c in first.cells().iter() {
        let m = first.grid().multi_index(CellId(c));
        for (k, &g) in cover.owned[0].iter().enumerate() {
            global[g] = m[k];
        }
        extend_chain(d, &groups, &cover.owned, 1, &m, &mut global, &mut |gl| {
            let id = cover.grid.flat(gl);
            cover.cells.insert(id.0);
        });
    }
    Ok(cover)
}

fn extend_chain(
    d: &Decomposition,
    groups: &[alloc::collections::BTreeMap<Vec<usize>, Vec<Vec<usize>>>],
    owned: &[Vec<usize>],
    i: usize,
    upstream: &[usize],
    global: &mut Vec<usize>,
    emit: &mut dyn FnMut(&[usize]),
) {
    if i == owned.len() {
        emit(global);
        return;
    }
    let link = d.link(i).unwrap();
    let key: Vec<usize> = link.overlap.iter().map(|&(u, _)| upstream[u]).collect();
    let Some(matches) = groups[i - 1].get(&key) else {
        return;
    };
    for m in matches {
        for (k, &g) in owned[i].iter().enumerate() {
            global[g] = m[k];
        }
        extend_chain(d, groups, owned, i + 1, m, global, emit);
    }
}

/// Non-leaving cells of `g2` with a direct edge into a leaving cell.
pub fn flag_cells(g2: &SymbolicImage, r2: &CellSet) -> CellSet {
    let leaving = r2.complement();
    let mut flags = in_neighbors(g2, &leaving);
    flags.intersect_with(r2);
    flags
}

/// Cover cells whose projection onto subsystem `sub` is flagged.
pub fn lift_flags(flags: &CellSet, sub: usize, cover: &FullCover) -> CellSet {
    let mut out = CellSet::new(cover.grid.len());
    if flags.is_empty() {
        return out;
    }
    for c in cover.cells.iter() {
        if flags.contains(cover.project(CellId(c), sub).0) {
            out.insert(c);
        }
    }
    out
}

/// Flags from every downstream subsystem, lifted to the cover.
pub fn flag_cover(solutions: &[SubsystemSolution], cover: &FullCover) -> CellSet {
    let mut out = CellSet::new(cover.grid.len());
    for (i, sol) in solutions.iter().enumerate().skip(1) {
        let f = flag_cells(sol.graph(), sol.cells());
        out.union_with(&lift_flags(&f, i, cover));
    }
    out
}

/// Cells removed by each validation sweep, in ascending order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationLog {
    pub removed: Vec<Vec<usize>>,
    /// Sweeps executed, including the final one that removed nothing.
    pub sweeps: usize,
}

impl ValidationLog {
    pub fn total_removed(&self) -> usize {
        self.removed.iter().map(Vec::len).sum()
    }
}

/// A member of `set` met by some image box of `cell`.
fn image_witness(ctx: &mut ImageContext<'_>, exo: &[IntervalBox], set: &CellSet, cell: usize) -> Result<Option<usize>> {
    let mut found = None;
    ctx.for_each_image_range(CellId(cell), exo, |g, range| {
        found = set.first_in_box(g, range);
        found.is_some()
    })?;
    Ok(found)
}

/// True when some image box of `cell` meets a member of `set`, checked by
/// enumerating the image's index range. Independent of the witness search
/// used by validation, so it can replay validation decisions.
pub fn image_meets(
    model: &SystemModel,
    grid: &CellGrid,
    set: &CellSet,
    cell: CellId,
    inputs: InputStrategy,
) -> Result<bool> {
    let ubs = inputs.input_boxes(model.input_box());
    let mut ctx = ImageContext::new(model, grid, &ubs);
    ctx.for_each_image_range(cell, core::slice::from_ref(model.exo_box()), |g, r| {
        let mut hit = false;
        crate::grid::for_each_flat_in_range(g, r, |f| hit |= set.contains(f));
        hit
    })
}

/// Order in which validation visits flagged cells.
#[derive(Clone, Debug)]
pub enum SweepOrder<'a> {
    /// Test every flagged cell against the cover at the start of the sweep,
    /// then remove all failures together.
    Synchronous,
    /// Visit cells in the given order and remove each failure immediately.
    InPlace(&'a [usize]),
}

/// Repeatedly removes flagged cells whose over-approximate image misses the
/// current cover, until a sweep removes nothing.
pub fn validate(
    model: &SystemModel,
    cover: &FullCover,
    flags: &CellSet,
    inputs: InputStrategy,
) -> Result<(FullCover, ValidationLog)> {
    validate_with(model, cover, flags, inputs, SweepOrder::Synchronous)
}

pub fn validate_with(
    model: &SystemModel,
    cover: &FullCover,
    flags: &CellSet,
    inputs: InputStrategy,
    order: SweepOrder<'_>,
) -> Result<(FullCover, ValidationLog)> {
    check_grid(model, &cover.grid)?;
    if flags.universe() != cover.grid.len() {
        return Err(Error::GridMismatch("flags are over a different grid".into()));
    }
    let ubs = inputs.input_boxes(model.input_box());
    let exo = core::slice::from_ref(model.exo_box());
    let grid = &cover.grid;
    let mut remaining = cover.cells.clone();
    let mut candidates = flags.intersection(&remaining);
    let mut log = ValidationLog::default();
    // (candidate, last known member of the cover met by its image)
    let mut pending: Vec<(usize, Option<usize>)> = candidates.iter().map(|c| (c, None)).collect();
    loop {
        log.sweeps += 1;
        let removed: Vec<usize> = match order {
            SweepOrder::Synchronous => {
                // Cells whose witness survived the previous sweep still meet
                // the cover and are skipped.
                let list: Vec<usize> = pending
                    .iter()
                    .filter(|(_, w)| w.is_none_or(|w| !remaining.contains(w)))
                    .map(|&(c, _)| c)
                    .collect();
                let current = &remaining;
                let chunks = par::map_chunks(list.len(), par::chunk_size(list.len()), |r| {
                    let mut ctx = ImageContext::new(model, grid, &ubs);
                    let mut out = Vec::with_capacity(r.len());
                    for &c in &list[r] {
                        out.push((c, image_witness(&mut ctx, exo, current, c)?));
                    }
                    Ok::<_, Error>(out)
                });
                let mut fresh = Vec::with_capacity(list.len());
                for chunk in chunks {
                    fresh.extend(chunk?);
                }
                let removed: Vec<usize> = fresh.iter().filter(|(_, w)| w.is_none()).map(|&(c, _)| c).collect();
                for &c in &removed {
                    remaining.remove(c);
                }
                // both lists are ascending by cell
                let mut it = fresh.into_iter().peekable();
                pending.retain_mut(|(c, w)| {
                    if it.peek().is_some_and(|&(f, _)| f == *c) {
                        *w = it.next().and_then(|(_, fw)| fw);
                    }
                    remaining.contains(*c)
                });
                removed
            }
            SweepOrder::InPlace(visit) => {
                let mut ctx = ImageContext::new(model, grid, &ubs);
                let mut removed = Vec::new();
                for &c in visit {
                    if !candidates.contains(c) || !remaining.contains(c) {
                        continue;
                    }
                    if image_witness(&mut ctx, exo, &remaining, c)?.is_none() {
                        remaining.remove(c);
                        removed.push(c);
                    }
                }
                removed.sort_unstable();
                removed
            }
        };
        if removed.is_empty() {
            break;
        }
        for &c in &removed {
            candidates.remove(c);
        }
        log.removed.push(removed);
    }
    Ok((cover.with_cells(remaining), log))
}

/// Box of a full cell; convenience for diagnostics.
pub fn cell_box(cover: &FullCover, cell: CellId) -> Result<IntervalBox> {
    cover.grid.cell_bounds(cell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::decompose;
    use crate::distributed::{distributed_pass, uniform_divisions, PassOptions};
    use crate::grid::quantize;
    use crate::registry::builtin_model;
    use alloc::vec;

    #[test]
    fn fig9_flagging() {
        // cells B1..B9 as 0..8; R2 = {B2..B6}; B5, B6 reach the leaving cells B8, B9
        let grid = quantize(&IntervalBox::cube(1, 0.0, 9.0), &[9]).unwrap();
        let g =
            SymbolicImage::from_edges(grid, &[(1, 2), (2, 1), (3, 2), (4, 3), (4, 7), (5, 4), (5, 8), (0, 6)]).unwrap();
        let r2 = CellSet::from_indices(9, [1, 2, 3, 4, 5]);
        assert_eq!(flag_cells(&g, &r2).to_vec(), vec![4, 5]);
        assert!(flag_cells(&g, &CellSet::full(9)).is_empty());
        let closed = CellSet::from_indices(9, [1, 2]);
        assert!(flag_cells(&g, &closed).is_empty());
    }

    fn linear3_full(k: usize) -> (Decomposition, Vec<SubsystemSolution>, FullCover) {
        let bm = builtin_model("linear3").unwrap();
        let d = decompose(&bm.model, bm.cascade.as_ref().unwrap(), &bm.default_grouping.unwrap()).unwrap();
        let sols = distributed_pass(&d, &uniform_divisions(&d, k), None, &PassOptions::default()).unwrap();
        let cover = reconstruct(&d, &sols).unwrap();
        (d, sols, cover)
    }

    #[test]
    fn reconstruction_projects_into_solutions() {
        let (_, sols, cover) = linear3_full(8);
        assert!(!cover.is_empty());
        for c in cover.cells().iter() {
            let p = cover.provenance(CellId(c));
            assert!(sols[0].cells().contains(p[0].0));
            assert!(sols[1].cells().contains(p[1].0));
            // overlap coordinate agrees
            let m0 = sols[0].grid().multi_index(p[0]);
            let m1 = sols[1].grid().multi_index(p[1]);
            assert_eq!(m0[1], m1[0]);
        }
        let want: usize = sols[1]
            .cells()
            .iter()
            .map(|c| {
                let m = sols[1].grid().multi_index(CellId(c));
                sols[0]
                    .cells()
                    .iter()
                    .filter(|&u| sols[0].grid().multi_index(CellId(u))[1] == m[0])
                    .count()
            })
            .sum();
        assert_eq!(cover.len(), want);
    }

    #[test]
    fn lifting_and_validation_edges() {
        let (d, sols, cover) = linear3_full(8);
        assert!(lift_flags(&CellSet::new(sols[1].grid().len()), 1, &cover).is_empty());
        assert_eq!(lift_flags(sols[1].cells(), 1, &cover), *cover.cells());
        let model = d.full_model();
        let (same, log) = validate(model, &cover, &CellSet::new(cover.grid().len()), InputStrategy::Whole).unwrap();
        assert_eq!(same.cells(), cover.cells());
        assert_eq!(log.total_removed(), 0);
        assert_eq!(log.sweeps, 1);
    }

    #[test]
    fn image_outside_domain_is_removed() {
        let m = crate::dynamics::SystemModel::new(
            "shift",
            vec![crate::expr::Expr::state(0) + 10.0],
            IntervalBox::cube(1, 0.0, 1.0),
            IntervalBox::cube(0, 0.0, 0.0),
        )
        .unwrap();
        let grid = quantize(m.state_box(), &[4]).unwrap();
        let cover = FullCover {
            cells: CellSet::full(4),
            grid,
            owned: vec![vec![0]],
            sub_strides: vec![vec![1]],
        };
        let flags = CellSet::from_indices(4, [2]);
        let (out, log) = validate(&m, &cover, &flags, InputStrategy::Whole).unwrap();
        assert_eq!(out.cells().to_vec(), vec![0, 1, 3]);
        assert_eq!(log.removed, vec![vec![2]]);
    }
}
