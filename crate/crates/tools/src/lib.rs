//! File formats, plotting, benchmarking and the command-line driver around
//! the `cisgraph` core.

pub mod bench;
pub mod bundle;
pub mod cli;
pub mod formats;
pub mod model_file;
pub mod plot;
pub mod summary;
