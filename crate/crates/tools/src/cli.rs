//! Command-line driver.

use std::cell::Cell;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use cisgraph::compare::{compare, compare_pairs, Comparison};
use cisgraph::distributed::{decentralized_pass, distributed_pass, PassOptions, SubsystemSolution};
use cisgraph::grid::CellId;
use cisgraph::oracle::{audit_invariance_from, interior_cells, is_boundary_cell, DEFAULT_INPUT_GRID};
use cisgraph::pipeline::{centralized, full_with, FullConfig, StageOutput, StageTiming};
use cisgraph::registry::BuiltinModel;
use cisgraph::{decompose, CellGrid, CellSet, Decomposition, InputStrategy};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bench::{self, BenchConfig};
use crate::bundle::save_bundle;
use crate::formats::{load_cells, save, write_cells, write_graph, write_validation_log};
use crate::model_file::load_model;
use crate::plot::{render, Layer};
use crate::summary::Summary;

/// Exit status when validation leaves no cells.
pub const EXIT_EMPTY: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "cisgraph",
    version,
    about = "Graph-based control invariant sets for cascade systems"
)]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute a cover and write its artifacts.
    Run(RunArgs),
    /// Compare two cell-set files on the same grid.
    Compare(CompareArgs),
    /// Draw cell sets as SVG.
    Plot(PlotArgs),
    /// Time the centralized run against the decomposition pipeline.
    Bench(BenchArgs),
    /// Sample points of a cover and check that some input keeps them inside.
    Audit(AuditArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Centralized,
    Decentralized,
    Distributed,
    Full,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Registry name or model file.
    #[arg(long)]
    pub model: String,
    /// One count for every axis, or one per state (`32,32,16`).
    #[arg(long)]
    pub divisions: String,
    #[arg(long, value_enum, default_value = "full")]
    pub mode: Mode,
    /// Blocks per subsystem, 1-based (`1,2;2,3`); defaults to the model's grouping.
    #[arg(long)]
    pub grouping: Option<String>,
    /// `auto`, `whole`, or pieces per input axis.
    #[arg(long, default_value = "auto")]
    pub inputs_split: String,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Recorded in the summary; runs themselves are deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also export the centralized graph.
    #[arg(long)]
    pub graphs: bool,
    /// Build the distributed graphs over the whole grid instead of the
    /// decentralized solution.
    #[arg(long)]
    pub unseeded: bool,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    /// Also compare the projections onto every pair of axes.
    #[arg(long)]
    pub pairs: bool,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    #[arg(required = true)]
    pub sets: Vec<PathBuf>,
    /// Two or three 1-based axes.
    #[arg(long, default_value = "1,2")]
    pub axes: String,
    /// Legend labels, comma separated; defaults to file stems.
    #[arg(long)]
    pub labels: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long)]
    pub model: String,
    /// Division counts to sweep.
    #[arg(long, default_value = "16,32,64")]
    pub divisions: String,
    #[arg(long)]
    pub grouping: Option<String>,
    #[arg(long, default_value = "auto")]
    pub inputs_split: String,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Skip the centralized run above this many cells.
    #[arg(long, default_value_t = 50_000_000)]
    pub centralized_limit: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AuditArgs {
    #[arg(long)]
    pub model: String,
    /// Cell-set file of the cover.
    #[arg(long)]
    pub cells: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = DEFAULT_INPUT_GRID)]
    pub input_grid: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sample only cells whose neighbours all lie in the cover.
    #[arg(long)]
    pub interior: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Validated settings of a `run` invocation.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub model: BuiltinModel,
    pub model_spec: String,
    pub divisions: Vec<usize>,
    pub mode: Mode,
    pub grouping: Option<Vec<Vec<usize>>>,
    pub inputs: InputStrategy,
    pub out: PathBuf,
    pub seed: u64,
    pub graphs: bool,
    pub seeded: bool,
}

pub fn parse_list(s: &str, what: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().with_context(|| format!("bad {what} `{t}`")))
        .collect()
}

/// `1,2;2,3` to 0-based block lists.
pub fn parse_grouping(s: &str) -> Result<Vec<Vec<usize>>> {
    s.split(';')
        .map(|g| {
            parse_list(g, "block")?
                .into_iter()
                .map(|b| b.checked_sub(1).context("blocks are 1-based"))
                .collect()
        })
        .collect()
}

pub fn parse_inputs(s: &str, model: &cisgraph::SystemModel) -> Result<InputStrategy> {
    Ok(match s {
        "auto" => InputStrategy::default_for(model),
        "whole" => InputStrategy::Whole,
        k => match k.parse::<usize>() {
            Ok(0) | Err(_) => bail!("--inputs-split takes auto, whole or a positive count"),
            Ok(1) => InputStrategy::Whole,
            Ok(k) => InputStrategy::Partition(k),
        },
    })
}

impl RunConfig {
    pub fn from_args(a: &RunArgs) -> Result<Self> {
        let model = load_model(&a.model).with_context(|| format!("loading model `{}`", a.model))?;
        let n = model.model.state_dim();
        let mut divisions = parse_list(&a.divisions, "division count")?;
        if divisions.len() == 1 {
            divisions = vec![divisions[0]; n];
        }
        if divisions.len() != n {
            bail!("--divisions needs 1 or {n} counts, got {}", divisions.len());
        }
        if divisions.contains(&0) {
            bail!("division counts must be at least 1");
        }
        let grouping = match &a.grouping {
            Some(g) => Some(parse_grouping(g)?),
            None => model.default_grouping.clone(),
        };
        if a.mode != Mode::Centralized && (grouping.is_none() || model.cascade.is_none()) {
            bail!("mode {:?} needs a cascade model and a grouping", a.mode);
        }
        let inputs = parse_inputs(&a.inputs_split, &model.model)?;
        Ok(RunConfig {
            model,
            model_spec: a.model.clone(),
            divisions,
            mode: a.mode,
            grouping,
            inputs,
            out: a.out.clone(),
            seed: a.seed,
            graphs: a.graphs,
            seeded: !a.unseeded,
        })
    }
}

fn inputs_name(s: InputStrategy) -> String {
    match s {
        InputStrategy::Whole => "whole".into(),
        InputStrategy::Partition(k) => k.to_string(),
    }
}

fn join(xs: &[usize]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn grouping_name(g: &[Vec<usize>]) -> String {
    g.iter()
        .map(|b| join(&b.iter().map(|i| i + 1).collect::<Vec<_>>()))
        .collect::<Vec<_>>()
        .join(";")
}

/// Prints a summary record to stdout as it is added.
struct Reporter {
    summary: Summary,
}

impl Reporter {
    fn record(&mut self, fields: &[(&str, &dyn Display)]) {
        println!("{}", self.summary.record(fields));
    }

    fn stage(&mut self, t: &cisgraph::pipeline::StageTiming) {
        println!("{}", self.summary.stage(t));
    }
}

/// Writes run artifacts and counts them, so a failed run can report whether
/// anything partial was left behind.
struct Artifacts<'a> {
    dir: &'a Path,
    written: Cell<usize>,
}

impl Artifacts<'_> {
    fn put(&self, name: &str, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
        save(&self.dir.join(name), f).with_context(|| format!("writing {name}"))?;
        self.written.set(self.written.get() + 1);
        Ok(())
    }

    fn bundle(
        &self,
        name: &str,
        cfg: &RunConfig,
        grouping: &[Vec<usize>],
        d: &Decomposition,
        sols: &[SubsystemSolution],
    ) -> Result<()> {
        save_bundle(&self.dir.join(name), &cfg.model_spec, name, grouping, d, sols)
            .with_context(|| format!("writing {name}"))?;
        self.written.set(self.written.get() + 1);
        Ok(())
    }
}

pub fn run(cfg: &RunConfig) -> Result<u8> {
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let mut rep = Reporter {
        summary: Summary::new(),
    };
    let mode = format!("{:?}", cfg.mode).to_lowercase();
    rep.record(&[
        ("model", &cfg.model.model.name()),
        ("mode", &mode),
        ("divisions", &join(&cfg.divisions)),
        ("inputs", &inputs_name(cfg.inputs)),
        ("seed", &cfg.seed),
    ]);
    if let Some(g) = &cfg.grouping {
        rep.record(&[("grouping", &grouping_name(g))]);
    }
    let art = Artifacts {
        dir: &cfg.out,
        written: Cell::new(0),
    };
    let outcome = run_mode(cfg, &mut rep, &art);
    match &outcome {
        Ok(code) => rep.record(&[("status", &if *code == EXIT_EMPTY { "empty" } else { "ok" })]),
        Err(e) => rep.record(&[
            ("status", &"error"),
            ("partial", &(art.written.get() > 0)),
            ("message", &format!("{e:#}")),
        ]),
    }
    save(&cfg.out.join("summary.txt"), |w| rep.summary.write(w))?;
    outcome
}

fn run_mode(cfg: &RunConfig, rep: &mut Reporter, art: &Artifacts<'_>) -> Result<u8> {
    let m = &cfg.model.model;
    if cfg.mode == Mode::Centralized {
        let r = centralized(m, &cfg.divisions, Some(cfg.inputs))?;
        for t in &r.timings {
            rep.stage(t);
        }
        art.put("centralized.cells", |w| write_cells(w, r.graph.grid(), &r.cells))?;
        if cfg.graphs {
            art.put("centralized.graph", |w| write_graph(w, &r.graph))?;
        }
        return Ok(0);
    }

    let grouping = cfg.grouping.as_ref().expect("checked in RunConfig");
    let cascade = cfg.model.cascade.as_ref().expect("checked in RunConfig");
    let d = decompose(m, cascade, grouping)?;
    let divisions: Vec<Vec<usize>> = d
        .subsystems()
        .iter()
        .map(|s| s.owned().iter().map(|&g| cfg.divisions[g]).collect())
        .collect();
    let opts = PassOptions {
        inputs: Some(cfg.inputs),
    };
    if cfg.mode != Mode::Full {
        let t = Instant::now();
        let (name, sols) = if cfg.mode == Mode::Decentralized {
            ("decentralized", decentralized_pass(&d, &divisions, &opts)?)
        } else {
            let seed = if cfg.seeded {
                Some(decentralized_pass(&d, &divisions, &opts)?)
            } else {
                None
            };
            ("distributed", distributed_pass(&d, &divisions, seed.as_deref(), &opts)?)
        };
        rep.stage(&StageTiming {
            stage: name.into(),
            seconds: t.elapsed().as_secs_f64(),
            cells: sols.iter().map(|s| s.cells().len()).sum(),
        });
        for (i, s) in sols.iter().enumerate() {
            rep.record(&[("subsystem", &(i + 1)), ("cells", &s.cells().len())]);
        }
        art.bundle(name, cfg, grouping, &d, &sols)?;
        return Ok(0);
    }

    let fc = FullConfig {
        grouping: grouping.clone(),
        divisions,
        inputs: Some(cfg.inputs),
        seeded: cfg.seeded,
    };
    let mut io_error: Option<anyhow::Error> = None;
    let mut full_grid: Option<CellGrid> = None;
    let result = full_with(m, cascade, &fc, &mut |t, stage| {
        rep.stage(t);
        if io_error.is_some() {
            return;
        }
        let r = match stage {
            StageOutput::Decentralized(s) => art.bundle("decentralized", cfg, grouping, &d, s),
            StageOutput::Distributed(s) => art.bundle("distributed", cfg, grouping, &d, s),
            StageOutput::Reconstructed(c) => {
                full_grid = Some(c.grid().clone());
                art.put("reconstructed.cells", |w| write_cells(w, c.grid(), c.cells()))
            }
            StageOutput::Flags(f) => {
                let g = full_grid.as_ref().expect("reconstruction precedes flagging");
                art.put("flags.cells", |w| write_cells(w, g, f))
            }
            StageOutput::Validated(c, log) => art
                .put("validated.cells", |w| write_cells(w, c.grid(), c.cells()))
                .and_then(|()| art.put("validation.log", |w| write_validation_log(w, log))),
        };
        io_error = r.err();
    });
    let r = result?;
    if let Some(e) = io_error {
        return Err(e);
    }
    rep.record(&[
        ("sweeps", &r.log.sweeps),
        ("removed", &r.log.total_removed()),
        ("validated", &r.validated.len()),
    ]);
    if r.validated.is_empty() {
        eprintln!("warning: validation left no cells");
        return Ok(EXIT_EMPTY);
    }
    Ok(0)
}

fn load_pair(a: &Path, b: &Path) -> Result<(CellGrid, CellSet, CellSet)> {
    let (ga, sa) = load_cells(a).with_context(|| format!("reading {}", a.display()))?;
    let (gb, sb) = load_cells(b).with_context(|| format!("reading {}", b.display()))?;
    if ga != gb {
        bail!("grid mismatch between {} and {}", a.display(), b.display());
    }
    Ok((ga, sa, sb))
}

fn distance(d: Option<usize>) -> String {
    d.map_or_else(|| "inf".into(), |d| d.to_string())
}

fn comparison_fields(c: &Comparison) -> [(&'static str, String); 7] {
    [
        ("a", c.a.to_string()),
        ("b", c.b.to_string()),
        ("both", c.both.to_string()),
        ("a_only", c.a_only.to_string()),
        ("b_only", c.b_only.to_string()),
        ("a_to_b", distance(c.a_to_b)),
        ("b_to_a", distance(c.b_to_a)),
    ]
}

pub fn compare_cmd(a: &CompareArgs) -> Result<Summary> {
    let (grid, sa, sb) = load_pair(&a.a, &a.b)?;
    let mut s = Summary::new();
    let c = compare(&grid, &sa, &sb)?;
    let f = comparison_fields(&c);
    s.record(&f.iter().map(|(k, v)| (*k, v as &dyn Display)).collect::<Vec<_>>());
    if a.pairs {
        for ((i, j), c) in compare_pairs(&grid, &sa, &sb)? {
            let axes = format!("{},{}", i + 1, j + 1);
            let f = comparison_fields(&c);
            let mut fields: Vec<(&str, &dyn Display)> = vec![("axes", &axes)];
            fields.extend(f.iter().map(|(k, v)| (*k, v as &dyn Display)));
            s.record(&fields);
        }
    }
    Ok(s)
}

pub fn plot_cmd(a: &PlotArgs) -> Result<String> {
    let axes: Vec<usize> = parse_list(&a.axes, "axis")?
        .into_iter()
        .map(|x| x.checked_sub(1).context("axes are 1-based"))
        .collect::<Result<_>>()?;
    let mut grid: Option<CellGrid> = None;
    let mut sets = Vec::new();
    for p in &a.sets {
        let (g, s) = load_cells(p).with_context(|| format!("reading {}", p.display()))?;
        match &grid {
            Some(g0) if *g0 != g => bail!("{} is on a different grid", p.display()),
            Some(_) => {}
            None => grid = Some(g),
        }
        sets.push(s);
    }
    let labels: Vec<String> = match &a.labels {
        Some(l) => l.split(',').map(str::to_string).collect(),
        None => a
            .sets
            .iter()
            .map(|p| p.file_stem().unwrap_or_default().to_string_lossy().into_owned())
            .collect(),
    };
    if labels.len() != sets.len() {
        bail!("{} labels for {} sets", labels.len(), sets.len());
    }
    let layers: Vec<Layer<'_>> = labels
        .into_iter()
        .zip(&sets)
        .map(|(label, set)| Layer { label, set })
        .collect();
    Ok(render(grid.as_ref().expect("at least one set"), &layers, &axes)?)
}

pub fn bench_cmd(a: &BenchArgs) -> Result<Summary> {
    let bm = load_model(&a.model)?;
    let grouping = match &a.grouping {
        Some(g) => parse_grouping(g)?,
        None => bm.default_grouping.clone().context("model has no default grouping")?,
    };
    let cfg = BenchConfig {
        grouping,
        divisions: parse_list(&a.divisions, "division count")?,
        repeats: a.repeats,
        inputs: Some(parse_inputs(&a.inputs_split, &bm.model)?),
        centralized_limit: a.centralized_limit,
    };
    let rows = bench::run(&bm, &cfg)?;
    let mut s = Summary::new();
    for r in &rows {
        let c = r
            .centralized
            .map_or_else(|| "skipped".to_string(), |c| format!("{c:.6}"));
        let speedup = r
            .centralized
            .map_or_else(|| "-".to_string(), |c| format!("{:.2}", c / r.pipeline));
        println!(
            "{}",
            s.record(&[
                ("divisions", &r.divisions),
                ("centralized", &c),
                ("pipeline", &format_args!("{:.6}", r.pipeline)),
                ("speedup", &speedup),
                ("validated", &r.validated_cells),
            ])
        );
    }
    if rows.len() >= 2 {
        let pipe: Vec<(f64, f64)> = rows.iter().map(|r| (r.divisions as f64, r.pipeline)).collect();
        let bound = cisgraph::decompose(&bm.model, bm.cascade.as_ref().expect("checked by bench"), &cfg.grouping)?
            .subsystems()
            .iter()
            .map(|s| s.dim())
            .max()
            .unwrap_or(0);
        let slope = format!("{:.3}", bench::fit_slope(&pipe));
        let mut fields: Vec<(&str, &dyn Display)> = vec![("slope_pipeline", &slope), ("max_subsystem_dim", &bound)];
        let cen: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| r.centralized.map(|c| (r.divisions as f64, c)))
            .collect();
        let cslope = (cen.len() >= 2).then(|| format!("{:.3}", bench::fit_slope(&cen)));
        if let Some(cs) = &cslope {
            fields.push(("slope_centralized", cs));
        }
        println!("{}", s.record(&fields));
    }
    Ok(s)
}

/// Structured audit report: settings, input grid, counts, then every failure
/// point with full float precision.
pub fn audit_cmd(a: &AuditArgs) -> Result<String> {
    let bm = load_model(&a.model)?;
    let (grid, cover) = load_cells(&a.cells).with_context(|| format!("reading {}", a.cells.display()))?;
    if grid.domain() != bm.model.state_box() {
        bail!("cover grid does not match the model's state box");
    }
    let from = if a.interior {
        interior_cells(&grid, &cover)
    } else {
        cover.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let report = audit_invariance_from(&bm.model, &grid, &cover, &from, a.samples, a.input_grid, &mut rng)?;
    let near_boundary = report
        .failures
        .iter()
        .filter(|p| grid.locate(p).is_ok_and(|c| is_boundary_cell(&grid, &cover, c)))
        .count();
    let mut out = String::new();
    use std::fmt::Write as _;
    writeln!(out, "model {}", bm.model.name())?;
    writeln!(out, "cells {}", cover.len())?;
    writeln!(
        out,
        "sampled_from {} ({} cells)",
        if a.interior { "interior" } else { "cover" },
        from.len()
    )?;
    writeln!(out, "seed {}", a.seed)?;
    writeln!(out, "samples {}", report.samples)?;
    for (k, vals) in report.input_grid.iter().enumerate() {
        writeln!(out, "input_grid u{} {:?}", k + 1, vals)?;
    }
    writeln!(out, "failures {}", report.failure_count())?;
    writeln!(out, "failure_rate {:.6}", report.failure_rate())?;
    writeln!(out, "failures_in_boundary_cells {near_boundary}")?;
    for p in &report.failures {
        let cell = grid.locate(p).map_or(usize::MAX, |c: CellId| c.0);
        writeln!(out, "failure cell {cell} at {p:?}")?;
    }
    Ok(out)
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> Result<u8> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match &cli.command {
        Command::Run(a) => run(&RunConfig::from_args(a)?),
        Command::Compare(a) => {
            let s = compare_cmd(a)?;
            let mut out = Vec::new();
            s.write(&mut out)?;
            emit(std::str::from_utf8(&out)?, None)?;
            Ok(0)
        }
        Command::Plot(a) => {
            emit(&plot_cmd(a)?, a.out.as_deref())?;
            Ok(0)
        }
        Command::Bench(a) => {
            let s = bench_cmd(a)?;
            if let Some(p) = &a.out {
                save(p, |w| s.write(w))?;
            }
            Ok(0)
        }
        Command::Audit(a) => {
            emit(&audit_cmd(a)?, a.out.as_deref())?;
            Ok(0)
        }
    }
}
