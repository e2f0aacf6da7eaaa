use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::grid::SwitchConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Proven optimal (extensive MIP or exhaustive search).
    Optimal,
    /// Feasible configuration found, no optimality claim.
    Feasible,
    /// No feasible configuration exists.
    Infeasible,
    /// The heuristic hit its hop ceiling before the line graph was saturated.
    InfeasibleWithinHorizon,
    /// The base case cannot be made free of overloads.
    BaseCaseInfeasible,
    Timeout,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Optimal => "optimal",
            Self::Feasible => "feasible",
            Self::Infeasible => "infeasible",
            Self::InfeasibleWithinHorizon => "infeasible_within_horizon",
            Self::BaseCaseInfeasible => "base_case_infeasible",
            Self::Timeout => "timeout",
        }
    }

    pub fn is_success(self) -> bool {
        matches!(self, Self::Optimal | Self::Feasible)
    }

    pub fn is_infeasible(self) -> bool {
        matches!(
            self,
            Self::Infeasible | Self::InfeasibleWithinHorizon | Self::BaseCaseInfeasible
        )
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Optimal | Self::Feasible => 0,
            Self::Infeasible | Self::InfeasibleWithinHorizon => 2,
            Self::BaseCaseInfeasible => 3,
            Self::Timeout => 4,
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One step of the heuristic, recorded after every violation-reduction solve
/// and every full security analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub outer: usize,
    pub inner: usize,
    pub phase: String,
    pub working_contingencies: usize,
    pub switchable: usize,
    pub residual_overload: f64,
    pub openings: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub config: Option<SwitchConfig>,
    pub objective: Option<f64>,
    pub openings: Vec<usize>,
    /// Loss of load per contingency id.
    pub loss_of_load: Vec<(usize, f64)>,
    pub timings: BTreeMap<String, Duration>,
    pub iterations: Vec<IterationRecord>,
    pub elapsed: Duration,
}

impl SolveResult {
    pub fn without_solution(status: SolveStatus, elapsed: Duration) -> Self {
        Self {
            status,
            config: None,
            objective: None,
            openings: Vec::new(),
            loss_of_load: Vec::new(),
            timings: BTreeMap::new(),
            iterations: Vec::new(),
            elapsed,
        }
    }

    pub fn num_openings(&self) -> usize {
        self.openings.len()
    }
}
