//! Per-subsystem solution bundles.
//!
//! A bundle directory holds `bundle.toml` plus `S<i>.cells` and `S<i>.graph`
//! for every subsystem. The manifest names the model and grouping, so the
//! decomposition can be rebuilt and the bundle fed to reconstruction.

use std::path::Path;

use cisgraph::distributed::SubsystemSolution;
use cisgraph::registry::BuiltinModel;
use cisgraph::{decompose, Decomposition};
use serde::{Deserialize, Serialize};

use crate::formats::{load_cells, load_graph, save, write_cells, write_graph, FormatError};
use crate::model_file::{load_model, ModelFileError};

pub const MANIFEST: &str = "bundle.toml";

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Model(#[from] ModelFileError),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Core(#[from] cisgraph::Error),
}

impl From<std::io::Error> for BundleError {
    fn from(e: std::io::Error) -> Self {
        BundleError::Format(e.into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemEntry {
    /// 1-based subsystem position in the chain.
    pub index: usize,
    /// 1-based global state indices.
    pub states: Vec<usize>,
    pub cells: String,
    pub graph: String,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    /// Registry name or model file path.
    pub model: String,
    /// Pass that produced the bundle.
    pub pass: String,
    /// 1-based block indices per subsystem.
    pub grouping: Vec<Vec<usize>>,
    pub subsystem: Vec<SubsystemEntry>,
}

pub fn save_bundle(
    dir: &Path,
    model: &str,
    pass: &str,
    grouping: &[Vec<usize>],
    d: &Decomposition,
    solutions: &[SubsystemSolution],
) -> std::result::Result<(), BundleError> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for (i, s) in solutions.iter().enumerate() {
        let cells = format!("S{}.cells", i + 1);
        let graph = format!("S{}.graph", i + 1);
        save(&dir.join(&cells), |w| write_cells(w, s.grid(), s.cells()))?;
        save(&dir.join(&graph), |w| write_graph(w, s.graph()))?;
        entries.push(SubsystemEntry {
            index: i + 1,
            states: d.subsystems()[i].owned().iter().map(|g| g + 1).collect(),
            cells,
            graph,
            count: s.cells().len(),
        });
    }
    let manifest = Manifest {
        model: model.to_string(),
        pass: pass.to_string(),
        grouping: grouping.iter().map(|g| g.iter().map(|b| b + 1).collect()).collect(),
        subsystem: entries,
    };
    let text = toml::to_string(&manifest).map_err(|e| BundleError::Manifest(e.to_string()))?;
    std::fs::write(dir.join(MANIFEST), text)?;
    Ok(())
}

pub struct LoadedBundle {
    pub manifest: Manifest,
    pub model: BuiltinModel,
    pub decomposition: Decomposition,
    pub solutions: Vec<SubsystemSolution>,
}

pub fn load_bundle(dir: &Path) -> std::result::Result<LoadedBundle, BundleError> {
    let text = std::fs::read_to_string(dir.join(MANIFEST))?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| BundleError::Manifest(e.to_string()))?;
    let model = load_model(&manifest.model)?;
    let cascade = model
        .cascade
        .as_ref()
        .ok_or_else(|| BundleError::Manifest(format!("model `{}` has no cascade blocks", manifest.model)))?;
    let grouping: Vec<Vec<usize>> = manifest
        .grouping
        .iter()
        .map(|g| g.iter().map(|b| b.checked_sub(1)).collect::<Option<Vec<_>>>())
        .collect::<Option<_>>()
        .ok_or_else(|| BundleError::Manifest("grouping indices are 1-based".into()))?;
    let decomposition = decompose(&model.model, cascade, &grouping)?;
    if manifest.subsystem.len() != decomposition.len() {
        return Err(BundleError::Manifest(format!(
            "{} subsystem entries for a chain of {}",
            manifest.subsystem.len(),
            decomposition.len()
        )));
    }
    let mut solutions = Vec::new();
    for (i, e) in manifest.subsystem.iter().enumerate() {
        let (grid, cells) = load_cells(&dir.join(&e.cells))?;
        let graph = load_graph(&dir.join(&e.graph))?;
        if &grid != graph.grid() {
            return Err(BundleError::Manifest(format!(
                "S{}: cells and graph grids differ",
                i + 1
            )));
        }
        if grid.domain() != decomposition.subsystems()[i].model().state_box() {
            return Err(BundleError::Manifest(format!(
                "S{}: grid does not match the subsystem",
                i + 1
            )));
        }
        solutions.push(SubsystemSolution::new(i, graph, cells)?);
    }
    Ok(LoadedBundle {
        manifest,
        model,
        decomposition,
        solutions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use cisgraph::distributed::{distributed_pass, uniform_divisions, PassOptions};
    use cisgraph::reconstruct;
    use cisgraph::registry::builtin_model;

    #[test]
    fn bundle_reloads_for_reconstruction() {
        let bm = builtin_model("linear3").unwrap();
        let grouping = bm.default_grouping.clone().unwrap();
        let d = decompose(&bm.model, bm.cascade.as_ref().unwrap(), &grouping).unwrap();
        let sols = distributed_pass(&d, &uniform_divisions(&d, 8), None, &PassOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_bundle(dir.path(), "linear3", "distributed", &grouping, &d, &sols).unwrap();
        let back = load_bundle(dir.path()).unwrap();
        assert_eq!(back.manifest.grouping, vec![vec![1, 2], vec![2, 3]]);
        assert_eq!(back.manifest.subsystem[1].states, vec![2, 3]);
        for (a, b) in sols.iter().zip(&back.solutions) {
            assert_eq!(a.cells(), b.cells());
            assert_eq!(a.graph().csr(), b.graph().csr());
        }
        let want = reconstruct(&d, &sols).unwrap();
        let got = reconstruct(&back.decomposition, &back.solutions).unwrap();
        assert_eq!(want.cells(), got.cells());
    }

    #[test]
    fn rejects_mismatched_manifest() {
        let bm = builtin_model("linear3").unwrap();
        let grouping = bm.default_grouping.clone().unwrap();
        let d = decompose(&bm.model, bm.cascade.as_ref().unwrap(), &grouping).unwrap();
        let sols = distributed_pass(&d, &uniform_divisions(&d, 4), None, &PassOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_bundle(dir.path(), "linear3", "distributed", &grouping, &d, &sols).unwrap();
        let path = dir.path().join(MANIFEST);
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.replace("model = \"linear3\"", "model = \"nonlinear3\"")).unwrap();
        assert!(load_bundle(dir.path()).is_ok(), "same state box, same grouping");
        std::fs::write(&path, text.replace("model = \"linear3\"", "model = \"example2\"")).unwrap();
        assert!(load_bundle(dir.path()).is_err());
    }
}
