//! End-to-end runs: centralized GIS and the decompose → decentralized →
//! distributed → reconstruct → validate chain.

use alloc::string::String;
use alloc::vec::Vec;

use crate::cellset::CellSet;
use crate::decomposition::{decompose, Decomposition};
use crate::distributed::{decentralized_pass, distributed_pass, PassOptions, SubsystemSolution};
use crate::dynamics::{CascadeStructure, SystemModel};
use crate::error::Result;
use crate::grid::CellGrid;
use crate::invariance::i_plus;
use crate::reconstruct::{flag_cover, reconstruct, validate, FullCover, ValidationLog};
use crate::symbolic_image::{build_graph, InputStrategy, SymbolicImage};

/// Wall-clock seconds of a named stage; zero without the `std` feature.
#[derive(Clone, Debug, PartialEq)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
    pub cells: usize,
}

struct Stopwatch {
    #[cfg(feature = "std")]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            #[cfg(feature = "std")]
            start: std::time::Instant::now(),
        }
    }

    fn seconds(&self) -> f64 {
        #[cfg(feature = "std")]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(not(feature = "std"))]
        {
            0.0
        }
    }
}

#[derive(Clone, Debug)]
pub struct CentralizedResult {
    pub graph: SymbolicImage,
    pub cells: CellSet,
    pub timings: Vec<StageTiming>,
}

pub fn centralized(
    model: &SystemModel,
    divisions: &[usize],
    inputs: Option<InputStrategy>,
) -> Result<CentralizedResult> {
    let grid = CellGrid::new(model.state_box().clone(), divisions.to_vec())?;
    let inputs = inputs.unwrap_or_else(|| InputStrategy::default_for(model));
    let sw = Stopwatch::start();
    let mut graph = build_graph(model, &grid, inputs)?;
    let t_graph = sw.seconds();
    let sw = Stopwatch::start();
    graph.ensure_reverse();
    let cells = i_plus(&graph);
    let t_inv = sw.seconds();
    Ok(CentralizedResult {
        timings: alloc::vec![
            StageTiming {
                stage: "graph".into(),
                seconds: t_graph,
                cells: grid.len(),
            },
            StageTiming {
                stage: "invariance".into(),
                seconds: t_inv,
                cells: cells.len(),
            },
        ],
        graph,
        cells,
    })
}

#[derive(Clone, Debug)]
pub struct FullConfig {
    pub grouping: Vec<Vec<usize>>,
    /// Division count per dimension of every subsystem.
    pub divisions: Vec<Vec<usize>>,
    pub inputs: Option<InputStrategy>,
    /// Restrict the distributed pass to the decentralized solution's cells.
    pub seeded: bool,
}

#[derive(Clone, Debug)]
pub struct FullResult {
    pub decomposition: Decomposition,
    pub decentralized: Vec<SubsystemSolution>,
    pub distributed: Vec<SubsystemSolution>,
    pub reconstructed: FullCover,
    pub flags: CellSet,
    pub validated: FullCover,
    pub log: ValidationLog,
    pub timings: Vec<StageTiming>,
}

impl FullResult {
    pub fn total_seconds(&self) -> f64 {
        self.timings.iter().map(|t| t.seconds).sum()
    }
}

/// Output of one pipeline stage, handed to the observer of [`full_with`].
#[derive(Clone, Copy, Debug)]
pub enum StageOutput<'a> {
    Decentralized(&'a [SubsystemSolution]),
    Distributed(&'a [SubsystemSolution]),
    Reconstructed(&'a FullCover),
    Flags(&'a CellSet),
    Validated(&'a FullCover, &'a ValidationLog),
}

/// Runs the whole decomposition chain on `model`.
pub fn full(model: &SystemModel, structure: &CascadeStructure, cfg: &FullConfig) -> Result<FullResult> {
    full_with(model, structure, cfg, &mut |_, _| {})
}

/// Like [`full`], calling `observe` after every stage.
pub fn full_with(
    model: &SystemModel,
    structure: &CascadeStructure,
    cfg: &FullConfig,
    observe: &mut dyn FnMut(&StageTiming, StageOutput<'_>),
) -> Result<FullResult> {
    let opts = PassOptions { inputs: cfg.inputs };
    let mut timings = Vec::new();
    let mut stage = |name: &str, sw: Stopwatch, cells: usize, out: StageOutput<'_>| {
        let t = StageTiming {
            stage: name.into(),
            seconds: sw.seconds(),
            cells,
        };
        observe(&t, out);
        timings.push(t);
    };
    let cells_of = |s: &[SubsystemSolution]| s.iter().map(|x| x.cells().len()).sum();

    let d = decompose(model, structure, &cfg.grouping)?;

    let sw = Stopwatch::start();
    let dec = decentralized_pass(&d, &cfg.divisions, &opts)?;
    stage("decentralized", sw, cells_of(&dec), StageOutput::Decentralized(&dec));

    let sw = Stopwatch::start();
    let dist = distributed_pass(&d, &cfg.divisions, cfg.seeded.then_some(dec.as_slice()), &opts)?;
    stage("distributed", sw, cells_of(&dist), StageOutput::Distributed(&dist));

    let sw = Stopwatch::start();
    let cover = reconstruct(&d, &dist)?;
    stage("reconstruct", sw, cover.len(), StageOutput::Reconstructed(&cover));

    let sw = Stopwatch::start();
    let flags = flag_cover(&dist, &cover);
    stage("flag", sw, flags.len(), StageOutput::Flags(&flags));

    let sw = Stopwatch::start();
    let inputs = cfg.inputs.unwrap_or_else(|| InputStrategy::default_for(model));
    let (validated, log) = validate(model, &cover, &flags, inputs)?;
    stage(
        "validate",
        sw,
        validated.len(),
        StageOutput::Validated(&validated, &log),
    );

    Ok(FullResult {
        decomposition: d,
        decentralized: dec,
        distributed: dist,
        reconstructed: cover,
        flags,
        validated,
        log,
        timings,
    })
}
