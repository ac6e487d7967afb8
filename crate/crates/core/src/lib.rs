//! Pathwise fractional calculus and mixed Wiener/fractional SDE solvers.

pub mod error;
pub mod exec;
pub mod experiments;
pub mod fracint;
pub mod holder;
pub mod io;
pub mod mollify;
pub mod path;
pub mod process_gen;
pub mod quadrature;
pub mod selftest;
pub mod solver;
pub mod stats;

pub use error::{Error, Result};
pub use holder::{HolderNorms, HolderParams};
pub use path::GridPath;
pub use solver::{CoefficientSet, SolveConfig, TruncationLevel};
pub use process_gen::{gen_fbm, gen_wiener, FbmGenerator, GenConfig};
