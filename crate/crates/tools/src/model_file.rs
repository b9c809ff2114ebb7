//! TOML model definitions.
//!
//! ```toml
//! name = "series"
//! states = 2
//! inputs = 2
//! equations = ["a*x1 + u1", "x1 + a*x2 + u2"]
//! blocks = [[1], [2]]      # optional, 1-based state indices per block
//! grouping = [[1], [2]]    # optional, 1-based block indices per subsystem
//!
//! [constants]
//! a = 2.0
//!
//! [state]
//! lo = [-5.0, -5.0]
//! hi = [5.0, 5.0]
//!
//! [input]
//! lo = [-1.0, -1.0]
//! hi = [1.0, 1.0]
//!
//! [ode]                    # optional: equations give dx/dt
//! step = 1.0
//! scheme = "euler"         # or "heun"
//! ```
//!
//! Variables are `x1..`, `u1..` (1-based). Registry names are accepted wherever
//! a model file is.

use std::collections::BTreeMap;
use std::path::Path;

use cisgraph::dynamics::{discretize_ode_with, Discretization, OdeModel};
use cisgraph::expr::{default_resolver, default_var_name, parse, Expr};
use cisgraph::registry::{builtin_model, BuiltinModel};
use cisgraph::{CascadeStructure, IntervalBox, SystemModel};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ModelFileError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("equation {index}: {source}")]
    Equation { index: usize, source: cisgraph::ParseError },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] cisgraph::Error),
}

type Result<T> = std::result::Result<T, ModelFileError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeSection {
    pub step: f64,
    #[serde(default)]
    pub scheme: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub name: String,
    pub states: usize,
    pub inputs: usize,
    pub equations: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grouping: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub constants: BTreeMap<String, f64>,
    pub state: Bounds,
    pub input: Bounds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ode: Option<OdeSection>,
}

fn bounds_box(b: &Bounds, dim: usize, what: &str) -> Result<IntervalBox> {
    if b.lo.len() != dim || b.hi.len() != dim {
        return Err(ModelFileError::Invalid(format!(
            "{what} bounds must have {dim} entries"
        )));
    }
    IntervalBox::from_bounds(&b.lo, &b.hi)
        .ok_or_else(|| ModelFileError::Invalid(format!("{what} bounds are not finite or lo > hi")))
}

fn to_zero_based(lists: &[Vec<usize>], what: &str) -> Result<Vec<Vec<usize>>> {
    lists
        .iter()
        .map(|l| {
            l.iter()
                .map(|&i| {
                    i.checked_sub(1)
                        .ok_or_else(|| ModelFileError::Invalid(format!("{what} indices are 1-based")))
                })
                .collect()
        })
        .collect()
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn build(&self) -> Result<BuiltinModel> {
        if self.equations.len() != self.states {
            return Err(ModelFileError::Invalid(format!(
                "{} equations for {} states",
                self.equations.len(),
                self.states
            )));
        }
        let resolve = |name: &str| {
            self.constants
                .get(name)
                .map(|&c| Expr::constant(c))
                .or_else(|| default_resolver(name))
        };
        let equations = self
            .equations
            .iter()
            .enumerate()
            .map(|(i, src)| parse(src, &resolve).map_err(|source| ModelFileError::Equation { index: i + 1, source }))
            .collect::<Result<Vec<_>>>()?;
        for (i, e) in equations.iter().enumerate() {
            if let Some(v) = e.variables().into_iter().find(|v| !self.declares(*v)) {
                return Err(ModelFileError::Invalid(format!(
                    "equation {} uses undeclared variable {}",
                    i + 1,
                    default_var_name(v)
                )));
            }
        }
        let state_box = bounds_box(&self.state, self.states, "state")?;
        let input_box = bounds_box(&self.input, self.inputs, "input")?;
        let model = match &self.ode {
            None => SystemModel::new(self.name.clone(), equations, state_box, input_box)?,
            Some(ode) => {
                let scheme = match ode.scheme.as_deref() {
                    None | Some("euler") => Discretization::ExplicitEuler,
                    Some("heun") => Discretization::Heun,
                    Some(other) => return Err(ModelFileError::Invalid(format!("unknown scheme `{other}`"))),
                };
                let ode_model = OdeModel {
                    name: self.name.clone(),
                    field: equations,
                    state_box,
                    input_box,
                };
                discretize_ode_with(&ode_model, ode.step, scheme)?
            }
        };
        let cascade = match &self.blocks {
            Some(b) => Some(CascadeStructure::infer(&model, to_zero_based(b, "block")?)?),
            None => None,
        };
        let default_grouping = match (&self.grouping, &cascade) {
            (Some(_), None) => return Err(ModelFileError::Invalid("grouping given without blocks".into())),
            (Some(g), Some(_)) => Some(to_zero_based(g, "grouping")?),
            (None, _) => None,
        };
        Ok(BuiltinModel {
            model,
            cascade,
            default_grouping,
        })
    }

    fn declares(&self, v: cisgraph::expr::Var) -> bool {
        use cisgraph::expr::Var;
        match v {
            Var::State(i) => i < self.states,
            Var::Input(i) => i < self.inputs,
            Var::Exo(_) => false,
        }
    }

    /// File describing an existing discrete-time model.
    pub fn from_model(bm: &BuiltinModel) -> Self {
        let m = &bm.model;
        let one_based = |l: &Vec<Vec<usize>>| l.iter().map(|v| v.iter().map(|i| i + 1).collect()).collect();
        ModelFile {
            name: m.name().to_string(),
            states: m.state_dim(),
            inputs: m.input_dim(),
            equations: m.equations().iter().map(ToString::to_string).collect(),
            blocks: bm.cascade.as_ref().map(|c| one_based(&c.blocks().to_vec())),
            grouping: bm.default_grouping.as_ref().map(one_based),
            constants: BTreeMap::new(),
            state: Bounds {
                lo: m.state_box().lo(),
                hi: m.state_box().hi(),
            },
            input: Bounds {
                lo: m.input_box().lo(),
                hi: m.input_box().hi(),
            },
            ode: None,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model files always serialize")
    }
}

/// A registry name, or else a path to a model file.
pub fn load_model(spec: &str) -> Result<BuiltinModel> {
    match builtin_model(spec) {
        Ok(bm) => Ok(bm),
        Err(cisgraph::Error::UnknownModel(_)) if Path::new(spec).exists() => {
            ModelFile::parse(&std::fs::read_to_string(spec)?)?.build()
        }
        Err(e) => Err(e.into()),
    }
}
