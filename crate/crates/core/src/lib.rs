pub mod assembly;
pub mod basis;
pub mod error;
pub mod geometry;
pub mod oracle;
pub mod reconstruct;
pub mod solver;
pub mod steklov;

pub use assembly::{Assembler, MatrixPair, Method, QuadConfig, TrialPair, DEFAULT_TRUNCATION};
pub use basis::{BasisFunction, BasisSpec, Parity};
pub use error::{Error, Result};
pub use geometry::{make_domain, CompositeDomain, Region};
pub use oracle::{FdmMode, FdmProblem, FdmShape, OracleResult};
pub use reconstruct::{ExportFormat, FieldGrid, GridSpec, ModeEstimate};
pub use solver::{EigenSolution, IterationConfig, IterationTrace, Tracking};
pub use steklov::{SteklovMode, SteklovSpectrum};
