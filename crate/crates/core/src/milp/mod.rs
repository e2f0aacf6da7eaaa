//! Mixed-integer programs for switching with de-energization.
//!
//! [`OtsdModel`] assembles the base-case and per-contingency constraint
//! blocks on any [`MilpBackend`]. The programs in [`programs`] combine blocks
//! with different objectives and thermal-limit treatments.

pub mod backend;
pub mod highs;
mod model;
pub mod programs;

use thiserror::Error;

use crate::dc::DcError;
use crate::grid::Grid;

pub use backend::{BackendFactory, BackendStatus, MilpBackend, Sense, SolveOutcome, Var, VarKind};
pub use highs::{HighsBackend, HighsFactory, HighsOptions};
pub use model::{AddedCut, BlockSolution, ContingencyBlock, OtsdModel, ThermalMode};
pub use programs::{
    angle_spread_bound, fixed_config_flows, minimize_openings, reduce_violations, remove_unnecessary_openings, solve_extensive,
    CaseFlows, ExtensiveOptions, ReduceOutcome, ViolationReducer,
};

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("backend error: {0}")]
    Backend(String),
    #[error("contingency {0} is already part of the model")]
    DuplicateContingency(usize),
    #[error("model is infeasible")]
    Infeasible,
    #[error("time limit reached without a solution")]
    Timeout,
    #[error(transparent)]
    Dc(#[from] DcError),
}

/// Bounds used by the linearizations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BigMConfig {
    /// Bound on angle differences across a branch (rad).
    pub delta_theta_max: f64,
    /// Bound on virtual flows, normally the number of buses.
    pub virtual_flow_bound: f64,
    /// Upper bound on the generation scaling factor.
    pub sigma_max: f64,
}

/// Cap applied to the derived `sigma_max`.
pub const SIGMA_CAP: f64 = 10.0;

impl BigMConfig {
    /// Defaults derived from the grid: `2π` angle bound, `|V|` virtual flow
    /// bound, and `Σ pd / pg_r` (or the smallest positive generation when the
    /// reference has none) capped at [`SIGMA_CAP`].
    pub fn for_grid(grid: &Grid) -> Self {
        let load = grid.total_load();
        let pg_ref = grid.bus(grid.reference()).pg_ref;
        let smallest = if pg_ref > 0.0 {
            pg_ref
        } else {
            grid.buses()
                .iter()
                .map(|b| b.pg_ref)
                .filter(|g| *g > 0.0)
                .fold(f64::INFINITY, f64::min)
        };
        let sigma_max = if smallest.is_finite() {
            (load / smallest).clamp(1.0, SIGMA_CAP)
        } else {
            1.0
        };
        Self {
            delta_theta_max: 2.0 * std::f64::consts::PI,
            virtual_flow_bound: grid.num_buses() as f64,
            sigma_max,
        }
    }
}
