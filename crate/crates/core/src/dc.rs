//! DC power flow and contingency security analysis.
//!
//! Flows follow the sign convention `f_e = b_e (θ_d(e) − θ_o(e))`, with
//! `f_e > 0` meaning power travelling from origin to destination.
//!
//! [`Analyzer`] factors the energized base network once and evaluates every
//! single-branch trip from the resulting PTDF: line-outage factors for
//! non-bridges, and zeroed island injections for bridges. Trips of several
//! branches are recomputed from scratch.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::graph::{self, EnergizedSet};
use crate::grid::{CaseId, ContingencySet, Grid, SwitchConfig};

/// Default overload tolerance (per-unit).
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum DcError {
    #[error("susceptance matrix of the component containing bus index {bus} is singular")]
    SingularSystem { bus: usize },
    #[error("energized area has load {load} p.u. but no generation")]
    UnbalanceableIsland { load: f64 },
    #[error("injections of the component containing bus index {bus} do not sum to zero ({residual:e})")]
    Unbalanced { bus: usize, residual: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    /// Phase angles (rad); zero at each component's pinned bus.
    pub angles: Vec<f64>,
    pub flows: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RebalanceResult {
    pub sigma: f64,
    pub pg: Vec<f64>,
    pub pd: Vec<f64>,
    pub loss_of_load: f64,
}

impl RebalanceResult {
    pub fn injections(&self) -> Vec<f64> {
        self.pg.iter().zip(&self.pd).map(|(g, d)| g - d).collect()
    }
}

/// Solved post-contingency (or base) state.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseState {
    pub energized: EnergizedSet,
    pub sigma: f64,
    pub loss_of_load: f64,
    pub flows: Vec<f64>,
    /// The energized area had load but no generation; all load counts as lost.
    pub collapsed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchOverload {
    pub branch: usize,
    pub flow: f64,
    pub limit: f64,
    /// `|flow| - limit`.
    pub overload: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationDetail {
    pub violated: Vec<BranchOverload>,
    pub loss_of_load: f64,
    pub de_energized: Vec<usize>,
}

impl ViolationDetail {
    pub fn total_overload(&self) -> f64 {
        self.violated.iter().map(|v| v.overload).sum()
    }

    pub fn branches(&self) -> Vec<usize> {
        self.violated.iter().map(|v| v.branch).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecurityReport {
    pub violating: BTreeMap<CaseId, ViolationDetail>,
    /// Loss of load per contingency, in contingency order.
    pub loss_of_load: Vec<f64>,
    pub base_loss_of_load: f64,
    /// `Σ_c p_c · LL_c` over all contingencies.
    pub total_objective: f64,
}

impl SecurityReport {
    pub fn is_secure(&self) -> bool {
        self.violating.is_empty()
    }

    pub fn base_violated(&self) -> bool {
        self.violating.contains_key(&CaseId::Base)
    }

    pub fn total_overload(&self) -> f64 {
        self.violating.values().map(ViolationDetail::total_overload).sum()
    }
}

fn closed_within(grid: &Grid, closed: &[bool], energized: &EnergizedSet) -> Vec<bool> {
    grid.branches()
        .iter()
        .map(|br| closed[br.id] && energized.is_energized(br.origin) && energized.is_energized(br.destination))
        .collect()
}

/// Reduced Laplacian of the component `buses` (with `pin` removed), factored.
struct Factor {
    /// Position of each bus in the reduced system, `usize::MAX` if absent.
    pos: Vec<usize>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

fn factor(grid: &Grid, closed: &[bool], buses: &[usize], pin: usize) -> Result<Factor, DcError> {
    let mut pos = vec![usize::MAX; grid.num_buses()];
    let mut k = 0;
    for &i in buses {
        if i != pin {
            pos[i] = k;
            k += 1;
        }
    }
    let mut lap = DMatrix::<f64>::zeros(k, k);
    for br in grid.branches() {
        if !closed[br.id] {
            continue;
        }
        let (a, b) = (pos[br.origin], pos[br.destination]);
        let in_a = a != usize::MAX;
        let in_b = b != usize::MAX;
        if !(in_a || in_b || (br.origin == pin || br.destination == pin)) {
            continue;
        }
        let s = br.susceptance;
        if in_a {
            lap[(a, a)] += s;
        }
        if in_b {
            lap[(b, b)] += s;
        }
        if in_a && in_b {
            lap[(a, b)] -= s;
            lap[(b, a)] -= s;
        }
    }
    let chol = nalgebra::Cholesky::new(lap).ok_or(DcError::SingularSystem { bus: pin })?;
    Ok(Factor { pos, chol })
}

/// DC power flow on the subgraph of closed branches, one pinned angle per
/// component (the reference bus where present).
pub fn dc_power_flow(grid: &Grid, closed: &[bool], injections: &[f64]) -> Result<FlowState, DcError> {
    let (labels, count) = graph::component_labels(grid, closed);
    let mut members = vec![Vec::new(); count];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let mut angles = vec![0.0; grid.num_buses()];
    for buses in &members {
        let pin = if buses.contains(&grid.reference()) {
            grid.reference()
        } else {
            buses[0]
        };
        let sum: f64 = buses.iter().map(|&i| injections[i]).sum();
        let scale: f64 = buses.iter().map(|&i| injections[i].abs()).sum::<f64>().max(1.0);
        if sum.abs() > 1e-9 * scale {
            return Err(DcError::Unbalanced {
                bus: pin,
                residual: sum,
            });
        }
        if buses.len() == 1 {
            continue;
        }
        let f = factor(grid, closed, buses, pin)?;
        let mut rhs = DVector::<f64>::zeros(buses.len() - 1);
        for &i in buses {
            if i != pin {
                rhs[f.pos[i]] = injections[i];
            }
        }
        let theta = f.chol.solve(&rhs);
        for &i in buses {
            if i != pin {
                // Laplacian angles run opposite to the f = b(θd − θo) convention.
                angles[i] = -theta[f.pos[i]];
            }
        }
    }
    let flows = grid
        .branches()
        .iter()
        .map(|br| {
            if closed[br.id] {
                br.susceptance * (angles[br.destination] - angles[br.origin])
            } else {
                0.0
            }
        })
        .collect();
    Ok(FlowState { angles, flows })
}

/// Branch-by-bus sensitivity of flows to an injection at a bus withdrawn at
/// the reference. Rows of open branches are zero.
pub fn ptdf_matrix(grid: &Grid, closed: &[bool]) -> Result<DMatrix<f64>, DcError> {
    let all: Vec<usize> = (0..grid.num_buses()).collect();
    ptdf_on(grid, closed, &all)
}

fn ptdf_on(grid: &Grid, closed: &[bool], buses: &[usize]) -> Result<DMatrix<f64>, DcError> {
    let n = grid.num_buses();
    let m = grid.num_branches();
    let r = grid.reference();
    let mut ptdf = DMatrix::<f64>::zeros(m, n);
    if buses.len() <= 1 {
        return Ok(ptdf);
    }
    let f = factor(grid, closed, buses, r)?;
    let x = f.chol.inverse();
    let row = |i: usize, j: usize| -> f64 {
        if f.pos[i] == usize::MAX || f.pos[j] == usize::MAX {
            0.0
        } else {
            x[(f.pos[i], f.pos[j])]
        }
    };
    for br in grid.branches() {
        if !closed[br.id] || (f.pos[br.origin] == usize::MAX && br.origin != r)
            || (f.pos[br.destination] == usize::MAX && br.destination != r)
        {
            continue;
        }
        for &j in buses {
            ptdf[(br.id, j)] = br.susceptance * (row(br.origin, j) - row(br.destination, j));
        }
    }
    Ok(ptdf)
}

/// Proportional rebalancing of the energized area.
///
/// Loads outside the energized set are lost; energized generation is scaled
/// by `σ = Σ pd / Σ pg` over energized buses.
pub fn rebalance(grid: &Grid, energized: &EnergizedSet) -> Result<RebalanceResult, DcError> {
    let mut load = 0.0;
    let mut gen = 0.0;
    let mut lost = 0.0;
    for (i, bus) in grid.buses().iter().enumerate() {
        if energized.is_energized(i) {
            load += bus.pd_ref;
            gen += bus.pg_ref;
        } else {
            lost += bus.pd_ref;
        }
    }
    let sigma = if gen > 0.0 {
        load / gen
    } else if load > 0.0 {
        return Err(DcError::UnbalanceableIsland { load });
    } else {
        1.0
    };
    let (pg, pd) = grid
        .buses()
        .iter()
        .enumerate()
        .map(|(i, b)| {
            if energized.is_energized(i) {
                (sigma * b.pg_ref, b.pd_ref)
            } else {
                (0.0, 0.0)
            }
        })
        .unzip();
    Ok(RebalanceResult {
        sigma,
        pg,
        pd,
        loss_of_load: lost,
    })
}

fn collapsed_state(grid: &Grid, energized: EnergizedSet) -> CaseState {
    CaseState {
        energized,
        sigma: 0.0,
        loss_of_load: grid.total_load(),
        flows: vec![0.0; grid.num_branches()],
        collapsed: true,
    }
}

/// Full recomputation of the state for a post-contingency closed mask.
pub fn case_state(grid: &Grid, closed: &[bool]) -> Result<CaseState, DcError> {
    let energized = graph::energized_component(grid, closed);
    let rb = match rebalance(grid, &energized) {
        Ok(rb) => rb,
        Err(DcError::UnbalanceableIsland { .. }) => return Ok(collapsed_state(grid, energized)),
        Err(e) => return Err(e),
    };
    let live = closed_within(grid, closed, &energized);
    let fs = dc_power_flow(grid, &live, &rb.injections())?;
    Ok(CaseState {
        energized,
        sigma: rb.sigma,
        loss_of_load: rb.loss_of_load,
        flows: fs.flows,
        collapsed: false,
    })
}

/// Branches of `closed` whose flow exceeds the limit by more than `tolerance`.
pub fn overloads(grid: &Grid, closed: &[bool], flows: &[f64], tolerance: f64) -> Vec<BranchOverload> {
    grid.branches()
        .iter()
        .filter(|br| closed[br.id] && br.is_limited())
        .filter_map(|br| {
            let over = flows[br.id].abs() - br.thermal_limit;
            (over > tolerance).then(|| BranchOverload {
                branch: br.id,
                flow: flows[br.id],
                limit: br.thermal_limit,
                overload: over,
            })
        })
        .collect()
}

/// Factored base configuration, reused across contingencies.
pub struct Analyzer<'g> {
    grid: &'g Grid,
    closed: Vec<bool>,
    base: CaseState,
    ptdf: DMatrix<f64>,
    bridge: Vec<bool>,
    live: Vec<bool>,
}

impl<'g> Analyzer<'g> {
    pub fn new(grid: &'g Grid, config: &SwitchConfig) -> Result<Self, DcError> {
        let closed = config.closed().to_vec();
        let energized = graph::energized_component(grid, &closed);
        let live = closed_within(grid, &closed, &energized);
        let m = grid.num_branches();
        let mut bridge = vec![false; m];
        for b in graph::find_bridges(grid, &live) {
            bridge[b] = true;
        }
        let rb = match rebalance(grid, &energized) {
            Ok(rb) => rb,
            Err(DcError::UnbalanceableIsland { .. }) => {
                return Ok(Self {
                    grid,
                    closed,
                    base: collapsed_state(grid, energized),
                    ptdf: DMatrix::zeros(m, grid.num_buses()),
                    bridge,
                    live,
                })
            }
            Err(e) => return Err(e),
        };
        let ptdf = ptdf_on(grid, &live, &energized.energized())?;
        let flows = (&ptdf * DVector::from_vec(rb.injections())).data.as_vec().clone();
        let base = CaseState {
            energized,
            sigma: rb.sigma,
            loss_of_load: rb.loss_of_load,
            flows,
            collapsed: false,
        };
        Ok(Self {
            grid,
            closed,
            base,
            ptdf,
            bridge,
            live,
        })
    }

    pub fn base(&self) -> &CaseState {
        &self.base
    }

    pub fn closed(&self) -> &[bool] {
        &self.closed
    }

    pub fn is_bridge(&self, e: usize) -> bool {
        self.bridge[e]
    }

    /// State after tripping `tripped` on top of the base configuration.
    pub fn evaluate(&self, tripped: &[usize]) -> Result<CaseState, DcError> {
        let effective: Vec<usize> = tripped.iter().copied().filter(|&e| self.live[e]).collect();
        if effective.is_empty() || self.base.collapsed {
            return Ok(self.base.clone());
        }
        if effective.len() == 1 {
            let k = effective[0];
            if self.bridge[k] {
                return self.bridge_trip(k);
            }
            if let Some(state) = self.line_outage(k) {
                return Ok(state);
            }
        }
        let mut post = self.closed.clone();
        for &e in tripped {
            post[e] = false;
        }
        case_state(self.grid, &post)
    }

    fn transfer_column(&self, k: usize) -> Vec<f64> {
        let br = self.grid.branch(k);
        let o = self.ptdf.column(br.origin);
        let d = self.ptdf.column(br.destination);
        o.iter().zip(d.iter()).map(|(a, b)| a - b).collect()
    }

    fn line_outage(&self, k: usize) -> Option<CaseState> {
        let phi = self.transfer_column(k);
        let denom = 1.0 - phi[k];
        if denom.abs() < 1e-10 {
            return None;
        }
        let shift = self.base.flows[k] / denom;
        let mut flows: Vec<f64> = self
            .base
            .flows
            .iter()
            .zip(&phi)
            .map(|(f, p)| f + p * shift)
            .collect();
        flows[k] = 0.0;
        Some(CaseState {
            flows,
            ..self.base.clone()
        })
    }

    fn bridge_trip(&self, k: usize) -> Result<CaseState, DcError> {
        let mut post = self.live.clone();
        post[k] = false;
        let energized = graph::energized_component(self.grid, &post);
        let rb = match rebalance(self.grid, &energized) {
            Ok(rb) => rb,
            Err(DcError::UnbalanceableIsland { .. }) => {
                return Ok(collapsed_state(self.grid, energized))
            }
            Err(e) => return Err(e),
        };
        let p = DVector::from_vec(rb.injections());
        let mut flows = (&self.ptdf * p).data.as_vec().clone();
        for br in self.grid.branches() {
            if !post[br.id]
                || !energized.is_energized(br.origin)
                || !energized.is_energized(br.destination)
            {
                flows[br.id] = 0.0;
            }
        }
        Ok(CaseState {
            energized,
            sigma: rb.sigma,
            loss_of_load: rb.loss_of_load,
            flows,
            collapsed: false,
        })
    }

    /// Post-contingency closed mask for a case.
    pub fn post_closed(&self, tripped: &[usize]) -> Vec<bool> {
        let mut post = self.closed.clone();
        for &e in tripped {
            post[e] = false;
        }
        post
    }
}

/// States of every case of `contingencies` (base first when included).
pub fn security_states(
    grid: &Grid,
    config: &SwitchConfig,
    contingencies: &ContingencySet,
) -> Result<Vec<(CaseId, CaseState)>, DcError> {
    let an = Analyzer::new(grid, config)?;
    contingencies
        .case_ids()
        .map(|id| Ok((id, an.evaluate(contingencies.tripped(id))?)))
        .collect()
}

/// Runs the base case (when included) and every contingency, reporting
/// overloads above `tolerance` and the probability-weighted loss of load.
pub fn security_analysis(
    grid: &Grid,
    config: &SwitchConfig,
    contingencies: &ContingencySet,
    tolerance: f64,
) -> Result<SecurityReport, DcError> {
    let an = Analyzer::new(grid, config)?;
    let mut violating = BTreeMap::new();
    let mut loss_of_load = Vec::with_capacity(contingencies.len());
    let mut total = 0.0;
    let mut record = |id: CaseId, state: &CaseState, tripped: &[usize]| {
        let post = an.post_closed(tripped);
        let violated = overloads(grid, &post, &state.flows, tolerance);
        if !violated.is_empty() {
            violating.insert(
                id,
                ViolationDetail {
                    violated,
                    loss_of_load: state.loss_of_load,
                    de_energized: state.energized.de_energized(),
                },
            );
        }
    };
    let base = an.base().clone();
    if contingencies.include_base_case {
        record(CaseId::Base, &base, &[]);
    }
    for c in &contingencies.cases {
        let state = an.evaluate(&c.tripped)?;
        record(CaseId::Outage(c.id), &state, &c.tripped);
        total += c.probability * state.loss_of_load;
        loss_of_load.push(state.loss_of_load);
    }
    Ok(SecurityReport {
        violating,
        loss_of_load,
        base_loss_of_load: base.loss_of_load,
        total_objective: total,
    })
}

/// Probability-weighted loss of load with every branch closed and limits ignored.
pub fn structural_risk(grid: &Grid, contingencies: &ContingencySet) -> f64 {
    let all = SwitchConfig::all_closed(grid.num_branches());
    let an = match Analyzer::new(grid, &all) {
        Ok(an) => an,
        Err(_) => return f64::NAN,
    };
    contingencies
        .cases
        .iter()
        .map(|c| match an.evaluate(&c.tripped) {
            Ok(s) => c.probability * s.loss_of_load,
            Err(_) => f64::NAN,
        })
        .sum()
}
