//! Structured semidefinite programs with equality, inequality and
//! non-negativity constraints: modeling, a dense interior point solver,
//! tensor products of programs, and mechanical checks of the sufficient
//! conditions under which program values multiply under product.

pub mod error;
pub mod format;
pub mod library;
pub mod linalg;
pub mod model;
pub mod solver;
pub mod structure;
pub mod suite;

pub use error::{Error, Result};
pub use linalg::{Matrix, SparseMatrix, SymMatrix};
pub use model::{product, Relation, SdpProgram, SdpSolution};
pub use solver::{solve, SolveReport, SolverConfig, Status};
