//! Deterministic SVG plots of cell sets.
//!
//! Two projection axes give filled cell unions with a convex-hull outline per
//! set. Three axes give the wireframe of each set's convex hull under a fixed
//! orthographic view. Hulls are computed on cell corners in integer grid
//! coordinates, so they are exact and the output bytes depend only on the
//! input sets.

use std::collections::HashMap;
use std::fmt::Write as _;

use cisgraph::compare::project_set;
use cisgraph::grid::CellId;
use cisgraph::{CellGrid, CellSet};

const SIZE: f64 = 480.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error("projection needs 2 or 3 axes, got {0}")]
    AxisCount(usize),
    #[error("axis {axis} outside a {dim}-dimensional grid")]
    AxisRange { axis: usize, dim: usize },
    #[error("all sets must share one grid")]
    GridMismatch,
    #[error("nothing to plot")]
    NoSets,
    #[error(transparent)]
    Core(#[from] cisgraph::Error),
}

pub struct Layer<'a> {
    pub label: String,
    pub set: &'a CellSet,
}

/// Renders `layers` (all over `grid`) projected onto `axes` (0-based).
pub fn render(grid: &CellGrid, layers: &[Layer<'_>], axes: &[usize]) -> Result<String, PlotError> {
    if layers.is_empty() {
        return Err(PlotError::NoSets);
    }
    if !(2..=3).contains(&axes.len()) {
        return Err(PlotError::AxisCount(axes.len()));
    }
    if let Some(&axis) = axes.iter().find(|&&a| a >= grid.dim()) {
        return Err(PlotError::AxisRange { axis, dim: grid.dim() });
    }
    if layers.iter().any(|l| l.set.universe() != grid.len()) {
        return Err(PlotError::GridMismatch);
    }
    let mut svg = String::new();
    let total = SIZE + 2.0 * MARGIN;
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{total}" height="{total}" fill="white"/>"#).unwrap();
    let projected: Vec<(CellGrid, CellSet)> = layers
        .iter()
        .map(|l| project_set(grid, l.set, axes))
        .collect::<Result<_, _>>()?;
    if axes.len() == 2 {
        frame_2d(&mut svg, grid, axes);
        for (k, (pg, ps)) in projected.iter().enumerate() {
            cells_2d(&mut svg, pg, ps, PALETTE[k % PALETTE.len()]);
        }
        for (k, (pg, ps)) in projected.iter().enumerate() {
            hull_2d(&mut svg, pg, ps, PALETTE[k % PALETTE.len()]);
        }
    } else {
        let view = View::new(&projected[0].0);
        frame_3d(&mut svg, grid, axes, &view);
        for (k, (pg, ps)) in projected.iter().enumerate() {
            hull_3d(&mut svg, pg, ps, &view, PALETTE[k % PALETTE.len()]);
        }
    }
    legend(&mut svg, layers);
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn px(v: f64) -> String {
    format!("{v:.2}")
}

/// Pixel position of grid coordinate `k` on a 2-D axis with `n` divisions.
fn to_px(k: i64, n: usize, vertical: bool) -> f64 {
    let t = k as f64 / n as f64 * SIZE;
    if vertical {
        MARGIN + SIZE - t
    } else {
        MARGIN + t
    }
}

fn frame_2d(svg: &mut String, grid: &CellGrid, axes: &[usize]) {
    let (a, b) = (axes[0], axes[1]);
    let (ia, ib) = (grid.domain().intervals()[a], grid.domain().intervals()[b]);
    writeln!(
        svg,
        r#"<rect x="{m}" y="{m}" width="{s}" height="{s}" fill="none" stroke="black"/>"#,
        m = px(MARGIN),
        s = px(SIZE)
    )
    .unwrap();
    let bottom = MARGIN + SIZE + 16.0;
    writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, px(MARGIN), px(bottom), ia.lo()).unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        px(MARGIN + SIZE),
        px(bottom),
        ia.hi()
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">x{}</text>"#,
        px(MARGIN + SIZE / 2.0),
        px(bottom + 16.0),
        a + 1
    )
    .unwrap();
    let left = MARGIN - 6.0;
    writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        px(left),
        px(MARGIN + SIZE),
        ib.lo()
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        px(left),
        px(MARGIN + 10.0),
        ib.hi()
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">x{}</text>"#,
        px(16.0),
        px(MARGIN + SIZE / 2.0),
        b + 1
    )
    .unwrap();
}

/// Filled cells, merged into horizontal runs.
fn cells_2d(svg: &mut String, grid: &CellGrid, set: &CellSet, color: &str) {
    let (na, nb) = (grid.divisions()[0], grid.divisions()[1]);
    writeln!(svg, r#"<g fill="{color}" fill-opacity="0.3" stroke="none">"#).unwrap();
    // flat index = a * nb + b, so runs along b are contiguous
    let mut iter = set.iter().peekable();
    while let Some(start) = iter.next() {
        let mut end = start;
        while let Some(&next) = iter.peek() {
            if next == end + 1 && next % nb != 0 {
                end = next;
                iter.next();
            } else {
                break;
            }
        }
        let (a, b0, b1) = ((start / nb) as i64, (start % nb) as i64, (end % nb) as i64 + 1);
        let x = to_px(a, na, false);
        let w = to_px(a + 1, na, false) - x;
        let y = to_px(b1, nb, true);
        let h = to_px(b0, nb, true) - y;
        writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="{}" height="{}"/>"#,
            px(x),
            px(y),
            px(w),
            px(h)
        )
        .unwrap();
    }
    svg.push_str("</g>\n");
}

fn cross2(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull (counter-clockwise, no collinear vertices) by monotone chain.
pub fn convex_hull_2d(mut pts: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(i64, i64)>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross2(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn hull_2d(svg: &mut String, grid: &CellGrid, set: &CellSet, color: &str) {
    let nb = grid.divisions()[1];
    let mut pts = Vec::new();
    let mut column: Option<(usize, usize, usize)> = None;
    // lowest and highest cell per column suffice
    let mut push = |a: usize, lo: usize, hi: usize| {
        for (x, y) in [(a, lo), (a + 1, lo), (a, hi + 1), (a + 1, hi + 1)] {
            pts.push((x as i64, y as i64));
        }
    };
    for c in set.iter() {
        let (a, b) = (c / nb, c % nb);
        column = match column {
            Some((ca, lo, _)) if ca == a => Some((ca, lo, b)),
            Some((ca, lo, hi)) => {
                push(ca, lo, hi);
                Some((a, b, b))
            }
            None => Some((a, b, b)),
        };
    }
    if let Some((a, lo, hi)) = column {
        push(a, lo, hi);
    }
    let hull = convex_hull_2d(pts);
    if hull.is_empty() {
        return;
    }
    let (na, nb) = (grid.divisions()[0], grid.divisions()[1]);
    let points: Vec<String> = hull
        .iter()
        .map(|&(a, b)| format!("{},{}", px(to_px(a, na, false)), px(to_px(b, nb, true))))
        .collect();
    writeln!(
        svg,
        r#"<polygon points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
        points.join(" ")
    )
    .unwrap();
}

/// Fixed orthographic view of the unit cube spanned by a 3-D grid.
struct View {
    divisions: [f64; 3],
}

impl View {
    const AZIMUTH: f64 = 0.6;
    const ELEVATION: f64 = 0.45;

    fn new(grid: &CellGrid) -> Self {
        let d = grid.divisions();
        Self {
            divisions: [d[0] as f64, d[1] as f64, d[2] as f64],
        }
    }

    /// Pixel position of grid corner `p`.
    fn project(&self, p: [i64; 3]) -> (f64, f64) {
        let u: Vec<f64> = (0..3).map(|i| p[i] as f64 / self.divisions[i] - 0.5).collect();
        let (sa, ca) = Self::AZIMUTH.sin_cos();
        let (se, ce) = Self::ELEVATION.sin_cos();
        let x = ca * u[0] - sa * u[1];
        let depth = sa * u[0] + ca * u[1];
        let y = ce * u[2] - se * depth;
        // the unit cube's projection fits in a disc of radius sqrt(3)/2
        let scale = SIZE / 3f64.sqrt();
        (MARGIN + SIZE / 2.0 + x * scale, MARGIN + SIZE / 2.0 - y * scale)
    }
}

fn frame_3d(svg: &mut String, grid: &CellGrid, axes: &[usize], view: &View) {
    let n = view.divisions.map(|d| d as i64);
    let corner = |m: usize| {
        [
            (m & 1) as i64 * n[0],
            (m >> 1 & 1) as i64 * n[1],
            (m >> 2 & 1) as i64 * n[2],
        ]
    };
    writeln!(svg, r##"<g stroke="#999" stroke-dasharray="4 3" fill="none">"##).unwrap();
    for m in 0..8usize {
        for bit in [1usize, 2, 4] {
            if m & bit == 0 {
                let (p, q) = (view.project(corner(m)), view.project(corner(m | bit)));
                writeln!(
                    svg,
                    r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
                    px(p.0),
                    px(p.1),
                    px(q.0),
                    px(q.1)
                )
                .unwrap();
            }
        }
    }
    svg.push_str("</g>\n");
    for (k, bit) in [1usize, 2, 4].into_iter().enumerate() {
        let q = view.project(corner(bit));
        let iv = grid.domain().intervals()[axes[k]];
        writeln!(
            svg,
            r#"<text x="{}" y="{}">x{} [{}, {}]</text>"#,
            px(q.0 + 4.0),
            px(q.1 + 14.0),
            axes[k] + 1,
            iv.lo(),
            iv.hi()
        )
        .unwrap();
    }
}

type P3 = [i64; 3];

fn sub3(a: P3, b: P3) -> P3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross3(a: P3, b: P3) -> P3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot3(a: P3, b: P3) -> i128 {
    (0..3).map(|i| a[i] as i128 * b[i] as i128).sum()
}

/// Signed volume: positive when `p` lies on the outer side of face `(a, b, c)`.
fn orient(a: P3, b: P3, c: P3, p: P3) -> i128 {
    dot3(cross3(sub3(b, a), sub3(c, a)), sub3(p, a))
}

/// Triangulated convex hull of lattice points (incremental, exact).
/// Returns outward-oriented faces as point triples, or `None` when the points
/// are coplanar.
pub fn convex_hull_3d(mut pts: Vec<P3>) -> Option<(Vec<P3>, Vec<[usize; 3]>)> {
    pts.sort_unstable();
    pts.dedup();
    let a = 0;
    let b = (1..pts.len()).find(|&i| pts[i] != pts[a])?;
    let c = (1..pts.len()).find(|&i| cross3(sub3(pts[b], pts[a]), sub3(pts[i], pts[a])) != [0, 0, 0])?;
    let d = (1..pts.len()).find(|&i| orient(pts[a], pts[b], pts[c], pts[i]) != 0)?;
    let mut faces: Vec<[usize; 3]> = if orient(pts[a], pts[b], pts[c], pts[d]) < 0 {
        vec![[a, b, c], [a, d, b], [b, d, c], [c, d, a]]
    } else {
        vec![[a, c, b], [a, b, d], [b, c, d], [c, a, d]]
    };
    let mut alive = vec![true; 4];
    let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
    let edges = |f: [usize; 3]| [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])];
    for (i, &f) in faces.iter().enumerate() {
        for e in edges(f) {
            owner.insert(e, i);
        }
    }
    for p in 0..pts.len() {
        if [a, b, c, d].contains(&p) {
            continue;
        }
        let visible: Vec<usize> = (0..faces.len())
            .filter(|&i| alive[i] && orient(pts[faces[i][0]], pts[faces[i][1]], pts[faces[i][2]], pts[p]) > 0)
            .collect();
        if visible.is_empty() {
            continue;
        }
        let mut horizon = Vec::new();
        for &i in &visible {
            for (u, v) in edges(faces[i]) {
                let twin = owner[&(v, u)];
                if orient(pts[faces[twin][0]], pts[faces[twin][1]], pts[faces[twin][2]], pts[p]) <= 0 {
                    horizon.push((u, v));
                }
            }
        }
        for &i in &visible {
            alive[i] = false;
            for e in edges(faces[i]) {
                owner.remove(&e);
            }
        }
        for (u, v) in horizon {
            let f = [u, v, p];
            faces.push(f);
            alive.push(true);
            for e in edges(f) {
                owner.insert(e, faces.len() - 1);
            }
        }
    }
    let faces = faces
        .into_iter()
        .zip(alive)
        .filter(|(_, a)| *a)
        .map(|(f, _)| f)
        .collect();
    Some((pts, faces))
}

fn hull_3d(svg: &mut String, grid: &CellGrid, set: &CellSet, view: &View, color: &str) {
    // extreme corners along the last axis of every column
    let mut column: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
    let mut m = [0usize; 3];
    for c in set.iter() {
        grid.multi_index_into(CellId(c), &mut m);
        column
            .entry((m[0], m[1]))
            .and_modify(|e| *e = (e.0.min(m[2]), e.1.max(m[2])))
            .or_insert((m[2], m[2]));
    }
    let mut pts = Vec::new();
    for (&(x, y), &(lo, hi)) in &column {
        for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            pts.push([(x + dx) as i64, (y + dy) as i64, lo as i64]);
            pts.push([(x + dx) as i64, (y + dy) as i64, hi as i64 + 1]);
        }
    }
    let Some((pts, faces)) = convex_hull_3d(pts) else {
        return;
    };
    let normal = |f: &[usize; 3]| cross3(sub3(pts[f[1]], pts[f[0]]), sub3(pts[f[2]], pts[f[0]]));
    let mut face_of: HashMap<(usize, usize), usize> = HashMap::new();
    for (i, f) in faces.iter().enumerate() {
        for e in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
            face_of.insert(e, i);
        }
    }
    // feature edges: the two adjacent faces are not coplanar
    let mut lines: Vec<(usize, usize)> = face_of
        .iter()
        .filter(|(&(u, v), &i)| u < v && cross3(normal(&faces[i]), normal(&faces[face_of[&(v, u)]])) != [0, 0, 0])
        .map(|(&e, _)| e)
        .collect();
    lines.sort_unstable_by_key(|&(u, v)| (pts[u], pts[v]));
    writeln!(svg, r#"<g stroke="{color}" stroke-width="1.5" fill="none">"#).unwrap();
    for (u, v) in lines {
        let (p, q) = (view.project(pts[u]), view.project(pts[v]));
        writeln!(
            svg,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
            px(p.0),
            px(p.1),
            px(q.0),
            px(q.1)
        )
        .unwrap();
    }
    svg.push_str("</g>\n");
}

fn legend(svg: &mut String, layers: &[Layer<'_>]) {
    for (k, l) in layers.iter().enumerate() {
        let y = 18.0 + 16.0 * k as f64;
        let color = PALETTE[k % PALETTE.len()];
        writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="12" height="12" fill="{color}"/>"#,
            px(MARGIN),
            px(y - 10.0)
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{}" y="{}">{} ({} cells)</text>"#,
            px(MARGIN + 18.0),
            px(y),
            escape(&l.label),
            l.set.len()
        )
        .unwrap();
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
