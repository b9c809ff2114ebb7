//! Plain-text artifact formats.
//!
//! Every file starts with a grid descriptor:
//!
//! ```text
//! # cisgraph cells
//! dims 2
//! lo -5.0 -5.0
//! hi 5.0 5.0
//! divisions 64 64
//! ```
//!
//! A cell set follows with `count N` and one flat index per line, ascending.
//! A graph follows with `vertices N`, `edges M` and one `source: t1 t2 ...`
//! line per vertex with successors. Floats are written with Rust's shortest
//! round-trip formatting, so a reload reproduces the grid bit for bit.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use cisgraph::reconstruct::ValidationLog;
use cisgraph::symbolic_image::SymbolicImage;
use cisgraph::{CellGrid, CellSet, IntervalBox};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Core(#[from] cisgraph::Error),
}

type Result<T> = std::result::Result<T, FormatError>;

pub const CELLS_MAGIC: &str = "# cisgraph cells";
pub const GRAPH_MAGIC: &str = "# cisgraph graph";

fn join<T: std::fmt::Debug>(xs: impl IntoIterator<Item = T>) -> String {
    let mut s = String::new();
    for (i, x) in xs.into_iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{x:?}").unwrap();
    }
    s
}

pub fn write_grid(out: &mut (impl Write + ?Sized), grid: &CellGrid) -> std::io::Result<()> {
    writeln!(out, "dims {}", grid.dim())?;
    writeln!(out, "lo {}", join(grid.domain().lo()))?;
    writeln!(out, "hi {}", join(grid.domain().hi()))?;
    writeln!(out, "divisions {}", join(grid.divisions()))
}

pub fn write_cells(out: &mut (impl Write + ?Sized), grid: &CellGrid, set: &CellSet) -> std::io::Result<()> {
    assert_eq!(set.universe(), grid.len(), "cell set and grid disagree");
    writeln!(out, "{CELLS_MAGIC}")?;
    write_grid(out, grid)?;
    writeln!(out, "count {}", set.len())?;
    for c in set.iter() {
        writeln!(out, "{c}")?;
    }
    Ok(())
}

pub fn write_graph(out: &mut (impl Write + ?Sized), g: &SymbolicImage) -> std::io::Result<()> {
    writeln!(out, "{GRAPH_MAGIC}")?;
    write_grid(out, g.grid())?;
    writeln!(out, "vertices {}", g.num_vertices())?;
    writeln!(out, "edges {}", g.num_edges())?;
    let csr = g.csr();
    for v in 0..csr.num_vertices() {
        let succ = csr.successors(v);
        if !succ.is_empty() {
            write!(out, "{v}:")?;
            for t in succ {
                write!(out, " {t}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

/// `sweeps N`, then one `sweep k removed m:` line per sweep listing the cells.
pub fn write_validation_log(out: &mut (impl Write + ?Sized), log: &ValidationLog) -> std::io::Result<()> {
    writeln!(out, "sweeps {}", log.sweeps)?;
    writeln!(out, "removed {}", log.total_removed())?;
    for (k, removed) in log.removed.iter().enumerate() {
        write!(out, "sweep {} removed {}:", k + 1, removed.len())?;
        for c in removed {
            write!(out, " {c}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Creates `path` and runs `f` on a buffered writer.
pub fn save(path: &Path, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    f(&mut w)?;
    w.flush()
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn new(r: R) -> Self {
        Self {
            inner: r.lines(),
            line: 0,
        }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(FormatError::Syntax {
            line: self.line,
            message: message.into(),
        })
    }

    /// Next non-blank line.
    fn next(&mut self) -> Result<Option<String>> {
        for l in self.inner.by_ref() {
            self.line += 1;
            let l = l?;
            if !l.trim().is_empty() {
                return Ok(Some(l));
            }
        }
        Ok(None)
    }

    fn expect(&mut self, what: &str) -> Result<String> {
        match self.next()? {
            Some(l) => Ok(l),
            None => self.err(format!("unexpected end of file, expected {what}")),
        }
    }

    /// Values after `key` on the next line.
    fn field(&mut self, key: &str) -> Result<String> {
        let l = self.expect(key)?;
        match l.trim().strip_prefix(key) {
            Some(rest) if rest.is_empty() || rest.starts_with(' ') => Ok(rest.trim().to_string()),
            _ => self.err(format!("expected `{key}`")),
        }
    }

    fn parse_list<T: std::str::FromStr>(&self, s: &str, what: &str) -> Result<Vec<T>> {
        s.split_whitespace()
            .map(|t| t.parse().or_else(|_| self.err(format!("bad {what} `{t}`"))))
            .collect()
    }

    fn magic(&mut self, magic: &str) -> Result<()> {
        let l = self.expect("header")?;
        if l.trim() != magic {
            return self.err(format!("expected `{magic}`"));
        }
        Ok(())
    }
}

fn read_grid<R: BufRead>(lines: &mut Lines<R>) -> Result<CellGrid> {
    let dims: usize = {
        let s = lines.field("dims")?;
        s.parse().or_else(|_| lines.err("bad dimension"))?
    };
    let lo: Vec<f64> = {
        let s = lines.field("lo")?;
        lines.parse_list(&s, "bound")?
    };
    let hi: Vec<f64> = {
        let s = lines.field("hi")?;
        lines.parse_list(&s, "bound")?
    };
    let divisions: Vec<usize> = {
        let s = lines.field("divisions")?;
        lines.parse_list(&s, "division count")?
    };
    if lo.len() != dims || hi.len() != dims || divisions.len() != dims {
        return lines.err(format!("grid descriptor does not have {dims} entries per line"));
    }
    let Some(domain) = IntervalBox::from_bounds(&lo, &hi) else {
        return lines.err("lower bound above upper bound");
    };
    Ok(CellGrid::new(domain, divisions)?)
}

pub fn read_cells(r: impl BufRead) -> Result<(CellGrid, CellSet)> {
    let mut lines = Lines::new(r);
    lines.magic(CELLS_MAGIC)?;
    let grid = read_grid(&mut lines)?;
    let count: usize = {
        let s = lines.field("count")?;
        s.parse().or_else(|_| lines.err("bad count"))?
    };
    let mut set = CellSet::new(grid.len());
    let mut prev = None;
    for _ in 0..count {
        let l = lines.expect("cell index")?;
        let c: usize = l.trim().parse().or_else(|_| lines.err("bad cell index"))?;
        if c >= grid.len() {
            return lines.err(format!("cell {c} outside a grid of {} cells", grid.len()));
        }
        if prev.is_some_and(|p| p >= c) {
            return lines.err("cell indices must be strictly ascending");
        }
        prev = Some(c);
        set.insert(c);
    }
    if lines.next()?.is_some() {
        return lines.err("trailing content after the last cell");
    }
    Ok((grid, set))
}

pub fn read_graph(r: impl BufRead) -> Result<SymbolicImage> {
    let mut lines = Lines::new(r);
    lines.magic(GRAPH_MAGIC)?;
    let grid = read_grid(&mut lines)?;
    let vertices: usize = {
        let s = lines.field("vertices")?;
        s.parse().or_else(|_| lines.err("bad vertex count"))?
    };
    if vertices != grid.len() {
        return lines.err("vertex count differs from the grid size");
    }
    let edges: usize = {
        let s = lines.field("edges")?;
        s.parse().or_else(|_| lines.err("bad edge count"))?
    };
    let mut list = Vec::with_capacity(edges);
    while let Some(l) = lines.next()? {
        let Some((src, rest)) = l.split_once(':') else {
            return lines.err("expected `source: targets`");
        };
        let s: usize = src.trim().parse().or_else(|_| lines.err("bad source"))?;
        for t in lines.parse_list::<usize>(rest, "target")? {
            if s >= vertices || t >= vertices {
                return lines.err("edge endpoint outside the grid");
            }
            list.push((s, t));
        }
    }
    if list.len() != edges {
        return lines.err(format!("header announces {edges} edges, found {}", list.len()));
    }
    Ok(SymbolicImage::from_edges(grid, &list)?)
}

pub fn read_validation_log(r: impl BufRead) -> Result<ValidationLog> {
    let mut lines = Lines::new(r);
    let sweeps: usize = {
        let s = lines.field("sweeps")?;
        s.parse().or_else(|_| lines.err("bad sweep count"))?
    };
    lines.field("removed")?;
    let mut removed = Vec::new();
    while let Some(l) = lines.next()? {
        let Some((_, rest)) = l.split_once(':') else {
            return lines.err("expected `sweep k removed m: cells`");
        };
        removed.push(lines.parse_list(rest, "cell")?);
    }
    Ok(ValidationLog { removed, sweeps })
}

pub fn load_cells(path: &Path) -> Result<(CellGrid, CellSet)> {
    read_cells(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn load_graph(path: &Path) -> Result<SymbolicImage> {
    read_graph(std::io::BufReader::new(std::fs::File::open(path)?))
}
