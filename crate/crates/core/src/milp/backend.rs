//! Solver-independent contract for building and solving mixed-integer programs.

use std::time::Duration;

use super::MilpError;

/// Column index.
pub type Var = usize;
/// Row index.
pub type Row = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendStatus {
    Optimal,
    Infeasible,
    TimeLimit,
    /// Anything else the engine reports (unbounded, numerical trouble, ...).
    Other,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: BackendStatus,
    /// Column values; empty when no primal solution is available.
    pub values: Vec<f64>,
    pub objective: f64,
}

impl SolveOutcome {
    pub fn has_solution(&self) -> bool {
        !self.values.is_empty()
    }
}

/// Incremental MILP model.
///
/// Implementations must accept new columns and rows after a solve and solve
/// again from the extended model.
pub trait MilpBackend {
    fn add_var(&mut self, lb: f64, ub: f64, kind: VarKind) -> Var;

    /// Adds `lb <= Σ coef·var <= ub`; use infinities for one-sided rows.
    fn add_row(&mut self, lb: f64, ub: f64, terms: &[(Var, f64)]) -> Row;

    /// Replaces the objective. Columns not listed get a zero coefficient.
    fn set_objective(&mut self, terms: &[(Var, f64)], offset: f64, sense: Sense);

    fn set_bounds(&mut self, var: Var, lb: f64, ub: f64);

    fn bounds(&self, var: Var) -> (f64, f64);

    /// Starting point for the next solve; may be partial.
    fn set_warm_start(&mut self, values: &[(Var, f64)]);

    fn solve(&mut self, time_limit: Option<Duration>) -> Result<SolveOutcome, MilpError>;

    fn num_vars(&self) -> usize;

    fn num_rows(&self) -> usize;

    fn le(&mut self, terms: &[(Var, f64)], rhs: f64) -> Row {
        self.add_row(f64::NEG_INFINITY, rhs, terms)
    }

    fn ge(&mut self, terms: &[(Var, f64)], rhs: f64) -> Row {
        self.add_row(rhs, f64::INFINITY, terms)
    }

    fn eq(&mut self, terms: &[(Var, f64)], rhs: f64) -> Row {
        self.add_row(rhs, rhs, terms)
    }

    fn fix(&mut self, var: Var, value: f64) {
        self.set_bounds(var, value, value);
    }
}

/// Produces fresh backend instances.
pub trait BackendFactory {
    type Backend: MilpBackend;
    fn create(&self) -> Self::Backend;
}
