//! Optimal transmission switching with de-energization (OTSD).
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`] holds the immutable network, contingency and configuration types.
//! * [`case_io`] reads MATPOWER-style case files and writes result documents.
//! * [`graph`] provides connectivity, bridges, cutsets and the hop neighbourhood.
//! * [`dc`] is the linear-algebra security analysis (DC flows, PTDF, rebalancing).
//! * [`milp`] builds the mixed-integer programs against a backend contract, with a
//!   HiGHS adapter.
//! * [`heuristic`] is the iterative feasible-solution finder.
//! * [`oracle`] contains brute-force references used to check everything above.

pub mod case_io;
pub mod dc;
pub mod graph;
pub mod grid;
pub mod heuristic;
pub mod milp;
pub mod oracle;
pub mod result;

mod error;

pub use error::Error;
pub use grid::{
    Branch, Bus, BuildOptions, CaseId, Contingency, ContingencySet, Grid, ProbabilityConvention,
    SwitchConfig,
};
pub use result::{SolveResult, SolveStatus};
