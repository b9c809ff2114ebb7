//! Graph-based outer approximation of control invariant sets.
//!
//! A state box is quantized into cells, a directed graph over the cells
//! over-approximates one-step transitions, and the cells with infinite paths
//! form an outer approximation of the largest control invariant set. Cascade
//! systems can be split into overlapping subsystems that are solved one by one
//! and then reconstructed and validated against the full model.
//!
//! The crate is `no_std` with `alloc` when the default `std` feature is off.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod cellset;
pub mod compare;
pub mod decomposition;
pub mod distributed;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod grid;
pub mod interval;
pub mod invariance;
pub mod oracle;
mod par;
pub mod pipeline;
pub mod reconstruct;
pub mod registry;
pub mod symbolic_image;

pub use cellset::CellSet;
pub use compare::{compare, compare_pairs, project_set, Comparison};
pub use decomposition::{decompose, project_box, Decomposition, Subsystem};
pub use distributed::{decentralized_pass, distributed_pass, estimate_missing, MissingStateTable, SubsystemSolution};
pub use dynamics::{discretize_ode, CascadeStructure, Discretization, OdeModel, SystemModel};
pub use error::{Error, EvalError, ParseError, Result};
pub use expr::Expr;
pub use grid::{quantize, CellGrid, CellId};
pub use interval::{Interval, IntervalBox};
pub use invariance::{cartesian_product, i_plus, scc};
pub use oracle::{audit_invariance, interior_cells, viability_iterate, AuditReport};
pub use reconstruct::{flag_cells, lift_flags, reconstruct, validate, FullCover, ValidationLog};
pub use registry::builtin_model;
pub use symbolic_image::{build_graph, image_overapprox, in_neighbors, InputStrategy, SymbolicImage};
