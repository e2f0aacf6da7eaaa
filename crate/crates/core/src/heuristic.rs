//! Fast feasible-solution finder.
//!
//! Starting from the all-closed configuration, the outer loop grows a working
//! set of contingencies one at a time (the most constraining violator of the
//! last security analysis). For a fixed working set, the inner loop solves the
//! violation-reduction program with switching restricted to line-graph
//! neighbourhoods of monitored branches, widening the neighbourhoods around
//! contingencies that keep residual overloads. A zero-overload configuration
//! is then stripped of unnecessary openings and checked against every
//! contingency.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use crate::dc::{self, SecurityReport};
use crate::graph;
use crate::grid::{CaseId, Contingency, ContingencySet, Grid, SwitchConfig};
use crate::milp::{self, BackendFactory, BigMConfig, MilpError, ViolationReducer};
use crate::result::{IterationRecord, SolveResult, SolveStatus};

#[derive(Debug, Clone)]
pub struct HeuristicParams {
    pub nh_0: usize,
    pub nh_max: usize,
    pub tolerance: f64,
    /// Limit for each embedded MILP solve.
    pub solve_time_limit: Option<Duration>,
    /// Limit for the whole run.
    pub time_limit: Option<Duration>,
    /// Big-M bounds; derived from the grid when `None`.
    pub bigm: Option<BigMConfig>,
    pub simplify: SimplifyScope,
}

/// Branches the simplification step may leave open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SimplifyScope {
    /// Only openings of the violation-reduction solution.
    Openings,
    /// Any branch of the current switchable set.
    #[default]
    Switchable,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        Self {
            nh_0: 1,
            nh_max: 4,
            tolerance: dc::DEFAULT_TOLERANCE,
            solve_time_limit: Some(Duration::from_secs(5)),
            time_limit: None,
            bigm: None,
            simplify: SimplifyScope::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicState {
    /// Working contingency set, base case first.
    pub working: Vec<CaseId>,
    /// Monitored branches per case.
    pub monitored: BTreeMap<CaseId, BTreeSet<usize>>,
    /// Hop radius per monitored branch.
    pub hops: BTreeMap<usize, usize>,
    /// Branches allowed to open.
    pub switchable: Vec<bool>,
    pub incumbent: SwitchConfig,
    pub outer: usize,
    pub inner: usize,
    pub log: Vec<IterationRecord>,
}

/// Why hop expansion stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HopCeiling {
    /// The base case was among the residual cases.
    pub base_residual: bool,
}

impl HeuristicState {
    pub fn new(num_branches: usize) -> Self {
        Self {
            working: vec![CaseId::Base],
            monitored: BTreeMap::new(),
            hops: BTreeMap::new(),
            switchable: vec![false; num_branches],
            incumbent: SwitchConfig::all_closed(num_branches),
            outer: 0,
            inner: 0,
            log: Vec::new(),
        }
    }

    /// Adds `case` to the working set and its violated branches to the
    /// monitored set, new branches starting at `nh_0` hops.
    pub fn seed(&mut self, case: CaseId, violated: &[usize], nh_0: usize) {
        if !self.working.contains(&case) {
            self.working.push(case);
        }
        let mb = self.monitored.entry(case).or_default();
        for &e in violated {
            mb.insert(e);
            self.hops.entry(e).or_insert(nh_0);
        }
    }

    /// Union of hop neighbourhoods of all monitored branches.
    pub fn recompute_switchable(&mut self, grid: &Grid) {
        self.switchable.iter_mut().for_each(|s| *s = false);
        for (&e, &l) in &self.hops {
            for b in graph::hop(grid, e, l) {
                self.switchable[b] = true;
            }
        }
    }

    pub fn num_switchable(&self) -> usize {
        self.switchable.iter().filter(|s| **s).count()
    }

    fn record(&mut self, phase: &str, residual: f64, openings: usize) {
        self.log.push(IterationRecord {
            outer: self.outer,
            inner: self.inner,
            phase: phase.to_string(),
            working_contingencies: self.working.len() - 1,
            switchable: self.num_switchable(),
            residual_overload: residual,
            openings,
        });
    }
}

/// Violating case with the most overloaded branches; ties go to the larger
/// total overload, then to the lowest case id. Cases in `exclude` are skipped.
pub fn most_constraining(report: &SecurityReport, exclude: &[CaseId]) -> Option<CaseId> {
    report
        .violating
        .iter()
        .filter(|(id, _)| !exclude.contains(id))
        .max_by(|(ia, a), (ib, b)| {
            a.violated
                .len()
                .cmp(&b.violated.len())
                .then(a.total_overload().total_cmp(&b.total_overload()))
                .then(ib.cmp(ia))
        })
        .map(|(id, _)| *id)
}

/// Folds the residual violations of a reduction round into the monitored
/// sets and widens hop radii. Returns `Err` when a radius would exceed
/// `nh_max`.
pub fn expand_switchable(
    state: &mut HeuristicState,
    grid: &Grid,
    residual: &[CaseId],
    violated: &BTreeMap<CaseId, Vec<(usize, f64)>>,
    nh_0: usize,
    nh_max: usize,
) -> Result<(), HopCeiling> {
    let mut to_expand = BTreeSet::new();
    for case in residual {
        let mb = state.monitored.entry(*case).or_default();
        if let Some(list) = violated.get(case) {
            mb.extend(list.iter().map(|(e, _)| *e));
        }
        to_expand.extend(mb.iter().copied());
    }
    for vb in to_expand {
        match state.hops.get_mut(&vb) {
            None => {
                state.hops.insert(vb, nh_0);
            }
            Some(h) if *h >= nh_max => {
                return Err(HopCeiling {
                    base_residual: residual.contains(&CaseId::Base),
                })
            }
            Some(h) => *h += 1,
        }
    }
    state.recompute_switchable(grid);
    Ok(())
}

fn outage_list(contingencies: &ContingencySet, working: &[CaseId]) -> Vec<Contingency> {
    working
        .iter()
        .filter_map(|id| match id {
            CaseId::Outage(c) => Some(contingencies.get(*c).clone()),
            CaseId::Base => None,
        })
        .collect()
}

fn remaining(start: Instant, total: Option<Duration>, per_solve: Option<Duration>) -> Option<Duration> {
    let left = total.map(|t| t.saturating_sub(start.elapsed()));
    match (left, per_solve) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// Runs the heuristic. On success the returned configuration passes a full
/// security analysis with no violation.
pub fn solve<F: BackendFactory>(
    grid: &Grid,
    contingencies: &ContingencySet,
    params: &HeuristicParams,
    factory: &F,
) -> Result<SolveResult, MilpError> {
    let start = Instant::now();
    let bigm = params.bigm.unwrap_or_else(|| BigMConfig::for_grid(grid));
    let m = grid.num_branches();
    let mut state = HeuristicState::new(m);
    let mut timings: BTreeMap<String, Duration> = BTreeMap::new();
    let mut tick = |name: &str, since: Instant| {
        *timings.entry(name.to_string()).or_default() += since.elapsed();
    };

    let t = Instant::now();
    let mut report = dc::security_analysis(grid, &state.incumbent, contingencies, params.tolerance)?;
    tick("security_analysis", t);
    state.record("security", report.total_overload(), 0);
    if report.is_secure() {
        return Ok(finish(SolveStatus::Feasible, state, &report, timings, start));
    }

    // A violated base case is repaired first; contingencies join later.
    let seeds: Vec<CaseId> = if report.base_violated() {
        vec![CaseId::Base]
    } else {
        report.violating.keys().copied().collect()
    };
    for id in seeds {
        state.seed(id, &report.violating[&id].branches(), params.nh_0);
    }
    let mut reducer = ViolationReducer::new(grid, bigm, factory.create(), params.tolerance);
    let diameter = graph::line_graph_diameter(grid);
    let mut vfsol = state.incumbent.clone();

    loop {
        for c in outage_list(contingencies, &state.working) {
            if !reducer.contains(c.id) {
                reducer.add_contingency(&c)?;
            }
        }
        state.inner = 0;
        state.recompute_switchable(grid);
        loop {
            if params.time_limit.is_some_and(|t| start.elapsed() >= t) {
                return Ok(stop(SolveStatus::Timeout, state, timings, start));
            }
            let t = Instant::now();
            let out = match reducer.solve(
                &state.switchable,
                Some(&vfsol),
                remaining(start, params.time_limit, params.solve_time_limit),
            ) {
                Ok(out) => out,
                Err(MilpError::Timeout) => return Ok(stop(SolveStatus::Timeout, state, timings, start)),
                Err(e) => return Err(e),
            };
            tick("reduce_violations", t);
            vfsol = out.config.clone();
            let residual_sum: f64 = out.overloads.values().flatten().map(|(_, x)| x).sum();
            state.record("reduce", residual_sum, vfsol.num_openings());
            if out.residual.is_empty() {
                break;
            }
            if let Err(ceiling) =
                expand_switchable(&mut state, grid, &out.residual, &out.overloads, params.nh_0, params.nh_max)
            {
                let status = if ceiling.base_residual && state.working.len() == 1 {
                    SolveStatus::BaseCaseInfeasible
                } else if params.nh_max >= diameter {
                    SolveStatus::Infeasible
                } else {
                    SolveStatus::InfeasibleWithinHorizon
                };
                return Ok(stop(status, state, timings, start));
            }
            state.inner += 1;
        }

        let t = Instant::now();
        let working = outage_list(contingencies, &state.working);
        let scope = match params.simplify {
            SimplifyScope::Openings => None,
            SimplifyScope::Switchable => Some(state.switchable.as_slice()),
        };
        let simplified = milp::minimize_openings(
            grid,
            &vfsol,
            scope,
            &working,
            bigm,
            factory,
            remaining(start, params.time_limit, params.solve_time_limit),
        )?;
        tick("remove_openings", t);
        state.incumbent = simplified;

        let t = Instant::now();
        report = dc::security_analysis(grid, &state.incumbent, contingencies, params.tolerance)?;
        tick("security_analysis", t);
        state.record("security", report.total_overload(), state.incumbent.num_openings());
        if report.is_secure() {
            return Ok(finish(SolveStatus::Feasible, state, &report, timings, start));
        }
        let Some(next) = most_constraining(&report, &state.working) else {
            log::warn!("violations remain only in working cases; numerical tolerance mismatch");
            return Ok(stop(SolveStatus::InfeasibleWithinHorizon, state, timings, start));
        };
        let vb = report.violating[&next].branches();
        state.seed(next, &vb, params.nh_0);
        state.outer += 1;
    }
}

fn finish(
    status: SolveStatus,
    state: HeuristicState,
    report: &SecurityReport,
    timings: BTreeMap<String, Duration>,
    start: Instant,
) -> SolveResult {
    SolveResult {
        status,
        objective: Some(report.total_objective),
        openings: state.incumbent.openings(),
        loss_of_load: report.loss_of_load.iter().copied().enumerate().collect(),
        config: Some(state.incumbent),
        timings,
        iterations: state.log,
        elapsed: start.elapsed(),
    }
}

fn stop(status: SolveStatus, state: HeuristicState, timings: BTreeMap<String, Duration>, start: Instant) -> SolveResult {
    let mut r = SolveResult::without_solution(status, start.elapsed());
    r.timings = timings;
    r.iterations = state.log;
    r
}
