//! Complete programs built from [`OtsdModel`] blocks.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use super::backend::{BackendFactory, BackendStatus, MilpBackend, Sense, Var};
use super::model::{BlockSolution, OtsdModel, ThermalMode};
use super::{BigMConfig, MilpError};
use crate::dc;
use crate::grid::{CaseId, Contingency, ContingencySet, Grid, SwitchConfig};
use crate::result::{SolveResult, SolveStatus};

#[derive(Debug, Clone)]
pub struct ExtensiveOptions {
    pub bigm: BigMConfig,
    pub time_limit: Option<Duration>,
    /// Optional starting configuration handed to the backend.
    pub warm_start: Option<SwitchConfig>,
    pub tolerance: f64,
    /// Upper bound on the number of open branches.
    pub max_openings: Option<usize>,
}

impl ExtensiveOptions {
    pub fn for_grid(grid: &Grid) -> Self {
        Self {
            bigm: BigMConfig::for_grid(grid),
            time_limit: None,
            warm_start: None,
            tolerance: dc::DEFAULT_TOLERANCE,
            max_openings: None,
        }
    }
}

/// Extensive formulation: base case and every contingency with thermal limits,
/// minimizing expected loss of load. Cutsets are separated lazily.
///
/// The returned objective and loss of load are re-evaluated with the DC
/// security analysis on the rounded configuration.
pub fn solve_extensive<F: BackendFactory>(
    grid: &Grid,
    contingencies: &ContingencySet,
    opts: &ExtensiveOptions,
    factory: &F,
) -> Result<SolveResult, MilpError> {
    let start = Instant::now();
    let mut model = OtsdModel::build_base_case(grid, opts.bigm, factory.create(), ThermalMode::Enforce);
    for c in &contingencies.cases {
        model.add_contingency_block(c, ThermalMode::Enforce)?;
    }
    if let Some(k) = opts.max_openings {
        // Σ (1 - v) ≤ k
        let terms: Vec<(Var, f64)> = model.v.iter().map(|&v| (v, 1.0)).collect();
        model.backend.ge(&terms, (grid.num_branches() - k.min(grid.num_branches())) as f64);
    }
    let (terms, offset) = model.expected_loss_terms();
    model.backend.set_objective(&terms, offset, Sense::Minimize);
    if let Some(ws) = &opts.warm_start {
        let hint: Vec<(Var, f64)> = model
            .v
            .iter()
            .enumerate()
            .map(|(e, &v)| (v, if ws.is_closed(e) { 1.0 } else { 0.0 }))
            .collect();
        model.backend.set_warm_start(&hint);
    }
    let (out, _) = model.solve_separated(opts.time_limit)?;
    let build_time = start.elapsed();
    let status = match out.status {
        BackendStatus::Optimal => SolveStatus::Optimal,
        BackendStatus::Infeasible => SolveStatus::Infeasible,
        BackendStatus::TimeLimit => SolveStatus::Timeout,
        BackendStatus::Other => return Err(MilpError::Backend("unexpected solver status".into())),
    };
    if !out.has_solution() {
        return Ok(SolveResult::without_solution(status, start.elapsed()));
    }
    let config = model.config_from(&out.values);
    let report = dc::security_analysis(grid, &config, contingencies, opts.tolerance)?;
    let mut result = SolveResult::without_solution(status, Duration::ZERO);
    result.objective = Some(report.total_objective);
    result.openings = config.openings();
    result.loss_of_load = report.loss_of_load.iter().copied().enumerate().collect();
    result.timings.insert("milp".into(), build_time);
    result.config = Some(config);
    result.elapsed = start.elapsed();
    Ok(result)
}

/// Upper bound on any angle difference inside an energized component of any
/// case of `config`: no branch carries more than the total load, so a simple
/// path spans at most `Σ pd · Σ x` over closed branches.
pub fn angle_spread_bound(grid: &Grid, config: &SwitchConfig) -> f64 {
    let reactance: f64 = grid
        .branches()
        .iter()
        .filter(|b| config.is_closed(b.id))
        .map(|b| 1.0 / b.susceptance)
        .sum();
    grid.total_load().max(grid.total_generation()) * reactance * 1.01
}

/// Solved state of one case from the fixed-configuration program.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseFlows {
    pub case: CaseId,
    pub flows: Vec<f64>,
    pub angles: Vec<f64>,
    /// Energization indicators (all ones for the base case).
    pub pi: Vec<f64>,
    pub sigma: f64,
    pub loss_of_load: f64,
    pub virtual_flows: Option<Vec<f64>>,
}

/// Flows of every case with the configuration fixed and thermal limits omitted.
pub fn fixed_config_flows<F: BackendFactory>(
    grid: &Grid,
    config: &SwitchConfig,
    contingencies: &ContingencySet,
    bigm: BigMConfig,
    factory: &F,
) -> Result<Vec<CaseFlows>, MilpError> {
    // With v fixed the angle bound only has to be valid, not tight.
    let bigm = BigMConfig {
        delta_theta_max: bigm.delta_theta_max.max(angle_spread_bound(grid, config)),
        ..bigm
    };
    let mut model = OtsdModel::build_base_case(grid, bigm, factory.create(), ThermalMode::Omit);
    for c in &contingencies.cases {
        model.add_contingency_block(c, ThermalMode::Omit)?;
    }
    model.fix_config(config);
    model.backend.set_objective(&[], 0.0, Sense::Minimize);
    let (out, _) = model.solve_separated(None)?;
    match out.status {
        BackendStatus::Optimal => {}
        BackendStatus::Infeasible => return Err(MilpError::Infeasible),
        _ => return Err(MilpError::Backend("fixed configuration program not solved".into())),
    }
    let mut states = Vec::with_capacity(contingencies.len() + 1);
    if contingencies.include_base_case {
        let (flows, angles) = model.base_flows(&out.values);
        states.push(CaseFlows {
            case: CaseId::Base,
            flows,
            angles,
            pi: vec![1.0; grid.num_buses()],
            sigma: 1.0,
            loss_of_load: 0.0,
            virtual_flows: Some(model.virtual_flows(&out.values)),
        });
    }
    for (k, blk) in model.blocks().iter().enumerate() {
        let BlockSolution {
            pi,
            sigma,
            flows,
            angles,
            loss_of_load,
        } = model.block_solution(k, &out.values);
        states.push(CaseFlows {
            case: CaseId::Outage(blk.contingency.id),
            flows,
            angles,
            pi,
            sigma,
            loss_of_load,
            virtual_flows: None,
        });
    }
    Ok(states)
}

/// Result of one violation-reduction solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ReduceOutcome {
    pub config: SwitchConfig,
    /// Cases whose overload could not be brought to zero.
    pub residual: Vec<CaseId>,
    /// Overloaded branches and overload values per case (above tolerance).
    pub overloads: BTreeMap<CaseId, Vec<(usize, f64)>>,
    pub objective: f64,
    pub timed_out: bool,
}

/// Violation-reduction program kept alive across calls: contingency blocks are
/// appended as the working set grows, the switchable set only changes bounds,
/// and each solve starts from the previous solution.
pub struct ViolationReducer<'g, B: MilpBackend> {
    model: OtsdModel<'g, B>,
    last: Option<Vec<f64>>,
    tolerance: f64,
}

impl<'g, B: MilpBackend> ViolationReducer<'g, B> {
    pub fn new(grid: &'g Grid, bigm: BigMConfig, backend: B, tolerance: f64) -> Self {
        Self {
            model: OtsdModel::build_base_case(grid, bigm, backend, ThermalMode::Slack),
            last: None,
            tolerance,
        }
    }

    pub fn add_contingency(&mut self, c: &Contingency) -> Result<(), MilpError> {
        self.model.add_contingency_block(c, ThermalMode::Slack)
    }

    pub fn contains(&self, id: usize) -> bool {
        self.model.has_contingency(id)
    }

    /// Minimizes total overload with every branch outside `switchable`
    /// fixed closed.
    pub fn solve(
        &mut self,
        switchable: &[bool],
        warm_start: Option<&SwitchConfig>,
        time_limit: Option<Duration>,
    ) -> Result<ReduceOutcome, MilpError> {
        for (e, &v) in self.model.v.clone().iter().enumerate() {
            let lb = if switchable[e] { 0.0 } else { 1.0 };
            self.model.backend.set_bounds(v, lb, 1.0);
        }
        let ol: Vec<(Var, f64)> = self.model.overload_vars().into_iter().map(|v| (v, 1.0)).collect();
        self.model.backend.set_objective(&ol, 0.0, Sense::Minimize);

        let mut hint: Vec<(Var, f64)> = Vec::new();
        if let Some(prev) = &self.last {
            // previous values for columns that existed then; new blocks are left to the solver
            hint.extend(prev.iter().copied().enumerate());
        }
        if let Some(ws) = warm_start {
            for (e, &v) in self.model.v.iter().enumerate() {
                let x = if ws.is_closed(e) { 1.0 } else { 0.0 };
                match hint.get_mut(v) {
                    Some(h) => h.1 = x,
                    None => hint.push((v, x)),
                }
            }
        }
        if !hint.is_empty() {
            self.model.backend.set_warm_start(&hint);
        }

        let (out, _) = self.model.solve_separated(time_limit)?;
        if !out.has_solution() {
            return match out.status {
                BackendStatus::TimeLimit => Err(MilpError::Timeout),
                BackendStatus::Infeasible => Err(MilpError::Infeasible),
                _ => Err(MilpError::Backend("violation reduction not solved".into())),
            };
        }
        let config = self.model.config_from(&out.values);
        let mut overloads = BTreeMap::new();
        let mut residual = Vec::new();
        for (case, list) in self.model.overloads(&out.values, self.tolerance) {
            if !list.is_empty() {
                residual.push(case);
                overloads.insert(case, list);
            }
        }
        self.last = Some(out.values.clone());
        Ok(ReduceOutcome {
            config,
            residual,
            overloads,
            objective: out.objective,
            timed_out: out.status == BackendStatus::TimeLimit,
        })
    }
}

/// One-shot violation reduction over `working` (the base case is always part
/// of the program).
pub fn reduce_violations<F: BackendFactory>(
    grid: &Grid,
    working: &[Contingency],
    switchable: &[bool],
    warm_start: Option<&SwitchConfig>,
    bigm: BigMConfig,
    tolerance: f64,
    factory: &F,
    time_limit: Option<Duration>,
) -> Result<ReduceOutcome, MilpError> {
    let mut reducer = ViolationReducer::new(grid, bigm, factory.create(), tolerance);
    for c in working {
        reducer.add_contingency(c)?;
    }
    reducer.solve(switchable, warm_start, time_limit)
}

/// Re-closes as many of the openings of `feasible` as possible while keeping
/// thermal limits on the base case and `working`. Never opens a branch that
/// `feasible` keeps closed. Falls back to `feasible` if the program is not
/// solved.
pub fn remove_unnecessary_openings<F: BackendFactory>(
    grid: &Grid,
    feasible: &SwitchConfig,
    working: &[Contingency],
    bigm: BigMConfig,
    factory: &F,
    time_limit: Option<Duration>,
) -> Result<SwitchConfig, MilpError> {
    minimize_openings(grid, feasible, None, working, bigm, factory, time_limit)
}

/// Fewest openings keeping thermal limits on the base case and `working`.
/// Branches may open if `feasible` opens them or `also_open` marks them;
/// `feasible` is the warm start and the fallback.
pub fn minimize_openings<F: BackendFactory>(
    grid: &Grid,
    feasible: &SwitchConfig,
    also_open: Option<&[bool]>,
    working: &[Contingency],
    bigm: BigMConfig,
    factory: &F,
    time_limit: Option<Duration>,
) -> Result<SwitchConfig, MilpError> {
    let mut openings: BTreeSet<usize> = feasible.openings().into_iter().collect();
    if openings.is_empty() {
        return Ok(feasible.clone());
    }
    if let Some(mask) = also_open {
        openings.extend((0..mask.len()).filter(|&e| mask[e]));
    }
    let mut model = OtsdModel::build_base_case(grid, bigm, factory.create(), ThermalMode::Enforce);
    for c in working {
        model.add_contingency_block(c, ThermalMode::Enforce)?;
    }
    let v = model.v.clone();
    for (e, &var) in v.iter().enumerate() {
        if !openings.contains(&e) {
            model.backend.fix(var, 1.0);
        }
    }
    let terms: Vec<(Var, f64)> = v.iter().map(|&x| (x, -1.0)).collect();
    model.backend.set_objective(&terms, v.len() as f64, Sense::Minimize);
    let hint: Vec<(Var, f64)> = v
        .iter()
        .enumerate()
        .map(|(e, &x)| (x, if feasible.is_closed(e) { 1.0 } else { 0.0 }))
        .collect();
    model.backend.set_warm_start(&hint);
    let (out, _) = model.solve_separated(time_limit)?;
    if !out.has_solution() {
        log::warn!("opening simplification returned {:?}; keeping input", out.status);
        return Ok(feasible.clone());
    }
    let simplified = model.config_from(&out.values);
    if simplified.num_openings() > feasible.num_openings() {
        return Ok(feasible.clone());
    }
    debug_assert!(simplified.openings().iter().all(|e| openings.contains(e)));
    Ok(simplified)
}
