//! Overlapping decomposition of a cascade into chained subsystems.
//!
//! Each subsystem owns the states of a run of consecutive cascade blocks.
//! Consecutive subsystems either share their boundary block (the overlap) or
//! simply abut. Upstream states read by a subsystem's first block but not
//! owned by it become exogenous variables of the local model.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dynamics::{CascadeStructure, SystemModel};
use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::interval::IntervalBox;

#[derive(Clone, Debug)]
pub struct Subsystem {
    model: SystemModel,
    blocks: Vec<usize>,
    owned: Vec<usize>,
    overlap_in: Vec<usize>,
    missing: Vec<usize>,
    inputs: Vec<usize>,
}

impl Subsystem {
    /// Local model; state `k` is global state `owned()[k]`, exogenous
    /// variable `k` is global state `missing()[k]`, input `k` is global input
    /// `inputs()[k]`.
    pub fn model(&self) -> &SystemModel {
        &self.model
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn owned(&self) -> &[usize] {
        &self.owned
    }

    /// Global indices shared with the upstream subsystem.
    pub fn overlap_in(&self) -> &[usize] {
        &self.overlap_in
    }

    pub fn missing(&self) -> &[usize] {
        &self.missing
    }

    pub fn inputs(&self) -> &[usize] {
        &self.inputs
    }

    pub fn dim(&self) -> usize {
        self.owned.len()
    }

    pub fn local_of(&self, global: usize) -> Option<usize> {
        self.owned.iter().position(|&g| g == global)
    }
}

/// How subsystem `i` attaches to subsystem `i-1`, in local indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainLink {
    /// `(upstream local, downstream local)` for every shared state.
    pub overlap: Vec<(usize, usize)>,
    /// Upstream local index of each missing state, in exogenous order.
    pub missing: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    full: SystemModel,
    subsystems: Vec<Subsystem>,
    links: Vec<ChainLink>,
}

impl Decomposition {
    pub fn full_model(&self) -> &SystemModel {
        &self.full
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    /// Link from subsystem `i-1` to subsystem `i`; `None` for `i == 0`.
    pub fn link(&self, i: usize) -> Option<&ChainLink> {
        i.checked_sub(1).map(|k| &self.links[k])
    }

    /// `Σ nᵢ`.
    pub fn expanded_dim(&self) -> usize {
        self.subsystems.iter().map(Subsystem::dim).sum()
    }

    /// Pairs `(subsystem, local index)` holding each global state.
    pub fn overlap_map(&self) -> Vec<Vec<(usize, usize)>> {
        let mut map = alloc::vec![Vec::new(); self.full.state_dim()];
        for (s, sub) in self.subsystems.iter().enumerate() {
            for (k, &g) in sub.owned.iter().enumerate() {
                map[g].push((s, k));
            }
        }
        map
    }
}

/// Coordinate projection of a box.
pub fn project_box(x: &IntervalBox, indices: &[usize]) -> IntervalBox {
    x.project(indices)
}

/// Splits `model` along `structure` into one subsystem per group of
/// 0-based block indices.
pub fn decompose(model: &SystemModel, structure: &CascadeStructure, grouping: &[Vec<usize>]) -> Result<Decomposition> {
    check_structure(model, structure)?;
    check_grouping(structure.len(), grouping)?;

    let mut subsystems: Vec<Subsystem> = Vec::with_capacity(grouping.len());
    for (gi, group) in grouping.iter().enumerate() {
        let owned: Vec<usize> = group
            .iter()
            .flat_map(|&b| structure.blocks()[b].iter().copied())
            .collect();
        let overlap_in = match subsystems.last() {
            Some(up) if up.blocks.last() == group.first() => structure.blocks()[group[0]].clone(),
            _ => Vec::new(),
        };
        let missing: Vec<usize> = structure.couplings()[group[0]].clone();
        if let Some(up) = subsystems.last() {
            if let Some(&g) = missing.iter().find(|g| !up.owned.contains(g)) {
                return Err(Error::InvalidGrouping(format!(
                    "subsystem {} reads x{} which the upstream subsystem does not own",
                    gi + 1,
                    g + 1
                )));
            }
        }
        let mut inputs: Vec<usize> = owned
            .iter()
            .flat_map(|&i| model.equations()[i].variables())
            .filter_map(|v| match v {
                Var::Input(j) => Some(j),
                _ => None,
            })
            .collect();
        inputs.sort_unstable();
        inputs.dedup();

        let local_model = local_model(model, gi, &owned, &missing, &inputs)?;
        subsystems.push(Subsystem {
            model: local_model,
            blocks: group.clone(),
            owned,
            overlap_in,
            missing,
            inputs,
        });
    }

    let links = (1..subsystems.len())
        .map(|i| {
            let (up, down) = (&subsystems[i - 1], &subsystems[i]);
            ChainLink {
                overlap: down
                    .overlap_in
                    .iter()
                    .map(|&g| (up.local_of(g).unwrap(), down.local_of(g).unwrap()))
                    .collect(),
                missing: down.missing.iter().map(|&g| up.local_of(g).unwrap()).collect(),
            }
        })
        .collect();

    Ok(Decomposition {
        full: model.clone(),
        subsystems,
        links,
    })
}

fn local_model(
    model: &SystemModel,
    gi: usize,
    owned: &[usize],
    missing: &[usize],
    inputs: &[usize],
) -> Result<SystemModel> {
    let rename = |v: Var| -> Expr {
        match v {
            Var::State(g) => match owned.iter().position(|&o| o == g) {
                Some(k) => Expr::state(k),
                None => Expr::exo(missing.iter().position(|&m| m == g).expect("coupling checked")),
            },
            Var::Input(j) => Expr::input(inputs.iter().position(|&i| i == j).expect("input collected")),
            Var::Exo(k) => Expr::exo(k),
        }
    };
    let equations = owned
        .iter()
        .map(|&i| model.equations()[i].substitute(&rename))
        .collect();
    let name: String = format!("{}/S{}", model.name(), gi + 1);
    SystemModel::with_exogenous(
        name,
        equations,
        project_box(model.state_box(), owned),
        project_box(model.input_box(), inputs),
        project_box(model.state_box(), missing),
    )
}

fn check_structure(model: &SystemModel, structure: &CascadeStructure) -> Result<()> {
    let n = model.state_dim();
    if model.exo_dim() != 0 {
        return Err(Error::InvalidModel(
            "cannot decompose a model with exogenous inputs".into(),
        ));
    }
    let covered: usize = structure.blocks().iter().map(Vec::len).sum();
    if covered != n {
        return Err(Error::InvalidCascade(format!(
            "blocks cover {covered} states, model has {n}"
        )));
    }
    for (b, block) in structure.blocks().iter().enumerate() {
        for &i in block {
            for v in model.equations()[i].variables() {
                if let Var::State(j) = v {
                    if !block.contains(&j) && !structure.couplings()[b].contains(&j) {
                        return Err(Error::InvalidCascade(format!(
                            "equation for x{} reads x{} outside its block and declared coupling",
                            i + 1,
                            j + 1
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

fn check_grouping(blocks: usize, grouping: &[Vec<usize>]) -> Result<()> {
    if grouping.is_empty() {
        return Err(Error::InvalidGrouping("no groups".into()));
    }
    for (gi, g) in grouping.iter().enumerate() {
        if g.is_empty() {
            return Err(Error::InvalidGrouping(format!("group {} is empty", gi + 1)));
        }
        if g.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(Error::InvalidGrouping(format!(
                "group {} is not a run of consecutive blocks",
                gi + 1
            )));
        }
        if g.iter().any(|&b| b >= blocks) {
            return Err(Error::InvalidGrouping(format!(
                "group {} names a block beyond the {blocks} available",
                gi + 1
            )));
        }
    }
    if grouping[0][0] != 0 || *grouping.last().unwrap().last().unwrap() != blocks - 1 {
        return Err(Error::InvalidGrouping(
            "groups must start at the first block and end at the last".into(),
        ));
    }
    for (gi, w) in grouping.windows(2).enumerate() {
        let last = *w[0].last().unwrap();
        let first = w[1][0];
        if first != last && first != last + 1 {
            return Err(Error::InvalidGrouping(format!(
                "groups {} and {} must share their boundary block or abut",
                gi + 1,
                gi + 2
            )));
        }
        if w[1].len() == 1 && first == last {
            return Err(Error::InvalidGrouping(format!("group {} adds no new block", gi + 2)));
        }
    }
    Ok(())
}
