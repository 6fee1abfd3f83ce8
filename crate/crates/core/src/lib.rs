//! Configuration-aware logging enhancement.
//!
//! The pipeline labels configuration engine classes from parameter
//! documentation, builds a program dependence graph over an SSA IR of a small
//! class-based language, tracks configuration taint from validated getter
//! calls to branch conditions, extracts the checking/handling blocks around
//! those branches and injects one diagnostic logging statement per block.
//! The [`eval`] module scores injected logs against ground truth and scores
//! run-time logs for direct misconfiguration localization.

pub mod catalog;
pub mod cli;
pub mod depgraph;
pub mod engines;
pub mod eval;
pub mod frontend;
pub mod interp;
pub mod synth;
pub mod taint;

pub use catalog::{ConfigParameter, ParameterCatalog};
pub use depgraph::{EdgeKind, Pdg};
pub use engines::{ConfigEngine, EngineKind, EngineSet};
pub use frontend::ir::{CompilationUnit, Program, StmtId};
pub use taint::{SensitiveBlock, SourceStatement, TaintPath};

/// Default bound on taint path length, counted in PDG edges.
pub const DEFAULT_MAX_PATH_LEN: usize = 30;
