//! Brute-force references: viability iteration on cells and pointwise
//! invariance audits. Neither uses the graph code.

use alloc::vec::Vec;

use rand::Rng;

use crate::cellset::CellSet;
use crate::dynamics::SystemModel;
use crate::error::{Error, Result};
use crate::grid::{for_each_flat_in_range, CellGrid, CellId};
use crate::interval::IntervalBox;
use crate::par;
use crate::symbolic_image::InputStrategy;

/// Default number of audit input points per input dimension.
pub const DEFAULT_INPUT_GRID: usize = 11;

pub fn viability_iterate(model: &SystemModel, grid: &CellGrid, inputs: InputStrategy) -> Result<CellSet> {
    viability_iterate_with(model, grid, inputs, &mut |_| {})
}

/// Starts from every cell and removes, sweep by sweep, each cell whose image
/// misses the survivors. `on_sweep` sees the survivors after every sweep.
pub fn viability_iterate_with(
    model: &SystemModel,
    grid: &CellGrid,
    inputs: InputStrategy,
    on_sweep: &mut dyn FnMut(&CellSet),
) -> Result<CellSet> {
    if grid.domain() != model.state_box() {
        return Err(Error::GridMismatch(
            "grid domain differs from the model's state box".into(),
        ));
    }
    let ubs = inputs.input_boxes(model.input_box());
    let mut alive = CellSet::full(grid.len());
    loop {
        let list = alive.to_vec();
        let current = &alive;
        let chunks = par::map_chunks(list.len(), par::chunk_size(list.len()), |r| {
            let mut dead = Vec::new();
            for &c in &list[r] {
                if !stays(model, grid, &ubs, current, CellId(c))? {
                    dead.push(c);
                }
            }
            Ok::<_, Error>(dead)
        });
        let mut removed = 0;
        for chunk in chunks {
            for c in chunk? {
                alive.remove(c);
                removed += 1;
            }
        }
        on_sweep(&alive);
        if removed == 0 {
            return Ok(alive);
        }
    }
}

fn stays(model: &SystemModel, grid: &CellGrid, ubs: &[IntervalBox], alive: &CellSet, c: CellId) -> Result<bool> {
    let cell = grid.cell_bounds(c)?;
    for ub in ubs {
        let image = model.evaluate_interval(&cell, ub)?;
        if let Some(range) = grid.cells_meeting(image.intervals()) {
            let mut hit = false;
            for_each_flat_in_range(grid, &range, |f| hit |= alive.contains(f));
            if hit {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub samples: usize,
    /// Sample points with no input on the grid keeping the successor in the cover.
    pub failures: Vec<Vec<f64>>,
    /// Input values tried at every sample, one list per input dimension.
    pub input_grid: Vec<Vec<f64>>,
}

impl AuditReport {
    pub fn failure_count(&self) -> usize {
        self.failures.len()
    }

    pub fn failure_rate(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.failures.len() as f64 / self.samples as f64
        }
    }
}

/// Uniform grid of `k` values over each input dimension (the midpoint when `k == 1`).
pub fn input_grid_values(u: &IntervalBox, k: usize) -> Vec<Vec<f64>> {
    u.intervals()
        .iter()
        .map(|iv| match k {
            0 => Vec::new(),
            1 => alloc::vec![iv.mid()],
            _ => (0..k)
                .map(|j| {
                    if j == k - 1 {
                        iv.hi()
                    } else {
                        iv.lo() + (iv.hi() - iv.lo()) * j as f64 / (k - 1) as f64
                    }
                })
                .collect(),
        })
        .collect()
}

/// True when some input on the grid maps `x` into the cover.
pub fn has_admissible_input(
    model: &SystemModel,
    grid: &CellGrid,
    cover: &CellSet,
    values: &[Vec<f64>],
    x: &[f64],
) -> bool {
    let mut u = alloc::vec![0.0; values.len()];
    let mut idx = alloc::vec![0usize; values.len()];
    if values.iter().any(Vec::is_empty) {
        return false;
    }
    loop {
        for (d, &i) in idx.iter().enumerate() {
            u[d] = values[d][i];
        }
        if let Ok(y) = model.evaluate(x, &u) {
            if let Ok(c) = grid.locate(&y) {
                if cover.contains(c.0) {
                    return true;
                }
            }
        }
        let mut d = values.len();
        loop {
            if d == 0 {
                return false;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < values[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// Samples `samples` points uniformly from the cover cells (cell uniformly,
/// then a point uniformly inside it) and searches `input_grid` values per
/// input dimension for one that keeps the successor in the cover.
pub fn audit_invariance<R: Rng + ?Sized>(
    model: &SystemModel,
    grid: &CellGrid,
    cover: &CellSet,
    samples: usize,
    input_grid: usize,
    rng: &mut R,
) -> Result<AuditReport> {
    audit_invariance_from(model, grid, cover, cover, samples, input_grid, rng)
}

/// Like [`audit_invariance`] but draws the sample points from `sample_cells`
/// (for instance the interior cells of the cover) while membership is still
/// tested against the whole cover.
pub fn audit_invariance_from<R: Rng + ?Sized>(
    model: &SystemModel,
    grid: &CellGrid,
    cover: &CellSet,
    sample_cells: &CellSet,
    samples: usize,
    input_grid: usize,
    rng: &mut R,
) -> Result<AuditReport> {
    let cells = sample_cells.to_vec();
    let values = input_grid_values(model.input_box(), input_grid);
    if cells.is_empty() {
        return Ok(AuditReport {
            samples: 0,
            failures: Vec::new(),
            input_grid: values,
        });
    }
    let mut points = Vec::with_capacity(samples);
    for _ in 0..samples {
        let c = cells[rng.gen_range(0..cells.len())];
        let b = grid.cell_bounds(CellId(c))?;
        let p: Vec<f64> = b
            .intervals()
            .iter()
            .map(|iv| {
                if iv.width() > 0.0 {
                    rng.gen_range(iv.lo()..iv.hi())
                } else {
                    iv.lo()
                }
            })
            .collect();
        points.push(p);
    }
    audit_points(model, grid, cover, &points, &values)
}

/// Audit over explicit points; used for reproducing reported failures.
pub fn audit_points(
    model: &SystemModel,
    grid: &CellGrid,
    cover: &CellSet,
    points: &[Vec<f64>],
    values: &[Vec<f64>],
) -> Result<AuditReport> {
    let chunks = par::map_chunks(points.len(), par::chunk_size(points.len()), |r| {
        points[r]
            .iter()
            .filter(|p| !has_admissible_input(model, grid, cover, values, p))
            .cloned()
            .collect::<Vec<_>>()
    });
    Ok(AuditReport {
        samples: points.len(),
        failures: chunks.into_iter().flatten().collect(),
        input_grid: values.to_vec(),
    })
}

/// True when `cell` has a Chebyshev neighbour (distance 1, including positions
/// outside the grid) that is not in `set`.
pub fn is_boundary_cell(grid: &CellGrid, set: &CellSet, cell: CellId) -> bool {
    let m = grid.multi_index(cell);
    let range: Vec<(usize, usize)> = m.iter().map(|&k| (k.saturating_sub(1), k + 1)).collect();
    let mut boundary = m.iter().zip(grid.divisions()).any(|(&k, &n)| k == 0 || k + 1 == n);
    if boundary {
        return true;
    }
    crate::grid::for_each_in_range(&range, |nb| {
        if !boundary && !set.contains(grid.flat(nb).0) {
            boundary = true;
        }
    });
    boundary
}

/// Cover cells that are not boundary cells: their whole Chebyshev
/// neighbourhood lies inside the grid and inside the cover, so every point of
/// such a cell is at least one cell width away from the cover's boundary.
pub fn interior_cells(grid: &CellGrid, set: &CellSet) -> CellSet {
    CellSet::from_indices(
        set.universe(),
        set.iter().filter(|&c| !is_boundary_cell(grid, set, CellId(c))),
    )
}
