use std::collections::{HashMap, HashSet};
use std::time::{Duration, Instant};

use super::backend::{BackendStatus, MilpBackend, SolveOutcome, Var, VarKind};
use super::{BigMConfig, MilpError};
use crate::graph;
use crate::grid::{CaseId, Contingency, Grid, SwitchConfig};

/// How thermal limits enter a case block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThermalMode {
    /// `|f| <= f̄` as variable bounds.
    Enforce,
    /// `|f| <= f̄ + ol` with a non-negative overload variable.
    Slack,
    /// No thermal constraint.
    Omit,
}

/// Angles, flows and optional overloads of one case.
#[derive(Debug, Clone)]
struct FlowVars {
    theta: Vec<Var>,
    /// `None` for tripped branches (flow fixed at zero).
    flow: Vec<Option<Var>>,
    overload: Vec<Option<Var>>,
}

#[derive(Debug, Clone)]
pub struct ContingencyBlock {
    pub contingency: Contingency,
    pub pi: Vec<Var>,
    pub sigma: Var,
    /// `σ·π_i` for buses with generation.
    pub scaled: Vec<Option<Var>>,
    flows: FlowVars,
}

/// Cutset row added during separation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddedCut {
    pub contingency: usize,
    pub bus: usize,
    pub branches: Vec<usize>,
}

/// Values of one contingency block in a solution.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSolution {
    pub pi: Vec<f64>,
    pub sigma: f64,
    pub flows: Vec<f64>,
    pub angles: Vec<f64>,
    pub loss_of_load: f64,
}

pub struct OtsdModel<'g, B: MilpBackend> {
    grid: &'g Grid,
    pub backend: B,
    bigm: BigMConfig,
    /// Base-case branch status `v`.
    pub v: Vec<Var>,
    base: FlowVars,
    virtual_flow: Vec<Var>,
    blocks: Vec<ContingencyBlock>,
    index: HashMap<usize, usize>,
    cuts: HashSet<(usize, usize, Vec<usize>)>,
}

impl<'g, B: MilpBackend> OtsdModel<'g, B> {
    /// Base case: binary status, linearized Ohm's law, nodal balance, thermal
    /// limits per `thermal`, and virtual flows certifying connectivity.
    pub fn build_base_case(grid: &'g Grid, bigm: BigMConfig, mut backend: B, thermal: ThermalMode) -> Self {
        let v: Vec<Var> = (0..grid.num_branches())
            .map(|_| backend.add_var(0.0, 1.0, VarKind::Binary))
            .collect();
        let base = add_flow_vars(&mut backend, grid, &bigm, &v, &[], thermal);
        for i in 0..grid.num_buses() {
            let bus = grid.bus(i);
            let terms = kcl_terms(grid, &base.flow, i);
            backend.eq(&terms, bus.pg_ref - bus.pd_ref);
        }

        let big = bigm.virtual_flow_bound;
        let virtual_flow: Vec<Var> = (0..grid.num_branches())
            .map(|e| {
                let phi = backend.add_var(-big, big, VarKind::Continuous);
                backend.le(&[(phi, 1.0), (v[e], -big)], 0.0);
                backend.ge(&[(phi, 1.0), (v[e], big)], 0.0);
                phi
            })
            .collect();
        let n = grid.num_buses() as f64;
        for i in 0..grid.num_buses() {
            let delta = if i == grid.reference() { 1.0 - n } else { 1.0 };
            let phis: Vec<Option<Var>> = virtual_flow.iter().copied().map(Some).collect();
            backend.eq(&kcl_terms(grid, &phis, i), -delta);
        }

        Self {
            grid,
            backend,
            bigm,
            v,
            base,
            virtual_flow,
            blocks: Vec::new(),
            index: HashMap::new(),
            cuts: HashSet::new(),
        }
    }

    pub fn grid(&self) -> &'g Grid {
        self.grid
    }

    pub fn blocks(&self) -> &[ContingencyBlock] {
        &self.blocks
    }

    pub fn has_contingency(&self, id: usize) -> bool {
        self.index.contains_key(&id)
    }

    pub fn num_cuts(&self) -> usize {
        self.cuts.len()
    }

    /// Post-contingency block: relaxed energization indicators, proportional
    /// rebalancing, linearized flows and thermal limits per `thermal`.
    /// Cutset rows are left to [`Self::separate_cutsets`].
    pub fn add_contingency_block(&mut self, c: &Contingency, thermal: ThermalMode) -> Result<(), MilpError> {
        if self.index.contains_key(&c.id) {
            return Err(MilpError::DuplicateContingency(c.id));
        }
        let grid = self.grid;
        let b = &mut self.backend;
        let sigma_max = self.bigm.sigma_max;

        let pi: Vec<Var> = (0..grid.num_buses())
            .map(|_| b.add_var(0.0, 1.0, VarKind::Continuous))
            .collect();
        b.fix(pi[grid.reference()], 1.0);
        for br in grid.branches() {
            if c.trips(br.id) {
                continue;
            }
            let (po, pd, v) = (pi[br.origin], pi[br.destination], self.v[br.id]);
            b.le(&[(po, 1.0), (pd, -1.0), (v, 1.0)], 1.0);
            b.le(&[(pd, 1.0), (po, -1.0), (v, 1.0)], 1.0);
        }

        let sigma = b.add_var(0.0, sigma_max, VarKind::Continuous);
        let scaled: Vec<Option<Var>> = grid
            .buses()
            .iter()
            .enumerate()
            .map(|(i, bus)| {
                (bus.pg_ref > 0.0).then(|| {
                    let y = b.add_var(0.0, sigma_max, VarKind::Continuous);
                    b.le(&[(y, 1.0), (pi[i], -sigma_max)], 0.0);
                    b.ge(&[(sigma, 1.0), (y, -1.0)], 0.0);
                    b.le(&[(sigma, 1.0), (y, -1.0), (pi[i], sigma_max)], sigma_max);
                    y
                })
            })
            .collect();

        let flows = add_flow_vars(b, grid, &self.bigm, &self.v, &c.tripped, thermal);
        for i in 0..grid.num_buses() {
            let bus = grid.bus(i);
            let mut terms = kcl_terms(grid, &flows.flow, i);
            // kcl_terms gives Σ_out f − Σ_in f; balance is pg − pd − (Σ_out − Σ_in) = 0
            for t in &mut terms {
                t.1 = -t.1;
            }
            if let Some(y) = scaled[i] {
                terms.push((y, bus.pg_ref));
            }
            if bus.pd_ref > 0.0 {
                terms.push((pi[i], -bus.pd_ref));
            }
            b.eq(&terms, 0.0);
        }

        self.index.insert(c.id, self.blocks.len());
        self.blocks.push(ContingencyBlock {
            contingency: c.clone(),
            pi,
            sigma,
            scaled,
            flows,
        });
        Ok(())
    }

    /// Fixes the base-case status to `config`.
    pub fn fix_config(&mut self, config: &SwitchConfig) {
        for (e, &v) in self.v.iter().enumerate() {
            let x = if config.is_closed(e) { 1.0 } else { 0.0 };
            self.backend.fix(v, x);
        }
    }

    /// `Σ_c p_c Σ_i pd_i (1 − π_i)`.
    pub fn expected_loss_terms(&self) -> (Vec<(Var, f64)>, f64) {
        let mut terms = Vec::new();
        let mut offset = 0.0;
        for blk in &self.blocks {
            let p = blk.contingency.probability;
            for (i, bus) in self.grid.buses().iter().enumerate() {
                if bus.pd_ref > 0.0 && p > 0.0 {
                    terms.push((blk.pi[i], -p * bus.pd_ref));
                    offset += p * bus.pd_ref;
                }
            }
        }
        (terms, offset)
    }

    /// Every overload variable of the base case and all blocks.
    pub fn overload_vars(&self) -> Vec<Var> {
        self.base
            .overload
            .iter()
            .chain(self.blocks.iter().flat_map(|b| b.flows.overload.iter()))
            .flatten()
            .copied()
            .collect()
    }

    /// Overload values per case, only entries above `tolerance`.
    pub fn overloads(&self, values: &[f64], tolerance: f64) -> Vec<(CaseId, Vec<(usize, f64)>)> {
        let pick = |fv: &FlowVars| -> Vec<(usize, f64)> {
            fv.overload
                .iter()
                .enumerate()
                .filter_map(|(e, ol)| ol.map(|v| (e, values[v])))
                .filter(|(_, x)| *x > tolerance)
                .collect()
        };
        let mut out = vec![(CaseId::Base, pick(&self.base))];
        for blk in &self.blocks {
            out.push((CaseId::Outage(blk.contingency.id), pick(&blk.flows)));
        }
        out
    }

    pub fn config_from(&self, values: &[f64]) -> SwitchConfig {
        SwitchConfig::from_closed(self.v.iter().map(|&v| values[v] > 0.5).collect())
    }

    pub fn base_flows(&self, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
        read_flows(&self.base, values)
    }

    pub fn virtual_flows(&self, values: &[f64]) -> Vec<f64> {
        self.virtual_flow.iter().map(|&v| values[v]).collect()
    }

    pub fn block_solution(&self, k: usize, values: &[f64]) -> BlockSolution {
        let blk = &self.blocks[k];
        let pi: Vec<f64> = blk.pi.iter().map(|&v| values[v]).collect();
        let (flows, angles) = read_flows(&blk.flows, values);
        let loss_of_load = self
            .grid
            .buses()
            .iter()
            .zip(&pi)
            .map(|(b, p)| b.pd_ref * (1.0 - p))
            .sum();
        BlockSolution {
            pi,
            sigma: values[blk.sigma],
            flows,
            angles,
            loss_of_load,
        }
    }

    /// Adds a cutset row for every bus whose `π` is positive although the
    /// rounded configuration separates it from the reference.
    pub fn separate_cutsets(&mut self, values: &[f64]) -> Vec<AddedCut> {
        let config = self.config_from(values);
        let mut added = Vec::new();
        for k in 0..self.blocks.len() {
            let tripped = self.blocks[k].contingency.tripped.clone();
            let cid = self.blocks[k].contingency.id;
            let post = config.masked(&tripped);
            let energized = graph::energized_component(self.grid, &post);
            for i in 0..self.grid.num_buses() {
                if energized.is_energized(i) || values[self.blocks[k].pi[i]] <= 1e-9 {
                    continue;
                }
                let Some(cut) = graph::separating_cutset(self.grid, &post, i) else {
                    continue;
                };
                if !self.cuts.insert((cid, i, cut.branches.clone())) {
                    continue;
                }
                let mut terms = vec![(self.blocks[k].pi[i], 1.0)];
                for &e in &cut.branches {
                    if !tripped.contains(&e) {
                        terms.push((self.v[e], -1.0));
                    }
                }
                self.backend.le(&terms, 0.0);
                added.push(AddedCut {
                    contingency: cid,
                    bus: i,
                    branches: cut.branches,
                });
            }
        }
        added
    }

    /// Solve, separate cutsets, and re-solve until no cutset is violated.
    pub fn solve_separated(&mut self, time_limit: Option<Duration>) -> Result<(SolveOutcome, usize), MilpError> {
        let start = Instant::now();
        let mut rounds = 0;
        loop {
            let remaining = time_limit.map(|t| t.saturating_sub(start.elapsed()));
            if remaining.is_some_and(|r| r.is_zero()) {
                return Ok((
                    SolveOutcome {
                        status: BackendStatus::TimeLimit,
                        values: Vec::new(),
                        objective: f64::NAN,
                    },
                    rounds,
                ));
            }
            let out = self.backend.solve(remaining)?;
            if !out.has_solution() {
                return Ok((out, rounds));
            }
            if self.separate_cutsets(&out.values).is_empty() {
                return Ok((out, rounds));
            }
            rounds += 1;
            // keep the incumbent status (not the values) as a hint
            let hint: Vec<(Var, f64)> = self.v.iter().map(|&v| (v, out.values[v].round())).collect();
            self.backend.set_warm_start(&hint);
        }
    }
}

fn add_flow_vars<B: MilpBackend>(
    b: &mut B,
    grid: &Grid,
    bigm: &BigMConfig,
    v: &[Var],
    tripped: &[usize],
    thermal: ThermalMode,
) -> FlowVars {
    let theta: Vec<Var> = (0..grid.num_buses())
        .map(|_| b.add_var(f64::NEG_INFINITY, f64::INFINITY, VarKind::Continuous))
        .collect();
    b.fix(theta[grid.reference()], 0.0);
    let mut flow = Vec::with_capacity(grid.num_branches());
    let mut overload = Vec::with_capacity(grid.num_branches());
    for br in grid.branches() {
        if tripped.contains(&br.id) {
            flow.push(None);
            overload.push(None);
            continue;
        }
        let big = br.susceptance * bigm.delta_theta_max;
        let (lo, hi) = if thermal == ThermalMode::Enforce && br.is_limited() {
            let lim = br.thermal_limit.min(big);
            (-lim, lim)
        } else {
            (-big, big)
        };
        let f = b.add_var(lo, hi, VarKind::Continuous);
        let z = v[br.id];
        // l·z <= f <= u·z
        b.le(&[(f, 1.0), (z, -big)], 0.0);
        b.ge(&[(f, 1.0), (z, big)], 0.0);
        // (1 − z)·l <= b(θd − θo) − f <= (1 − z)·u
        let (td, to) = (theta[br.destination], theta[br.origin]);
        let s = br.susceptance;
        b.le(&[(td, s), (to, -s), (f, -1.0), (z, big)], big);
        b.ge(&[(td, s), (to, -s), (f, -1.0), (z, -big)], -big);
        flow.push(Some(f));

        if thermal == ThermalMode::Slack && br.is_limited() {
            let ol = b.add_var(0.0, f64::INFINITY, VarKind::Continuous);
            b.le(&[(f, 1.0), (ol, -1.0)], br.thermal_limit);
            b.ge(&[(f, 1.0), (ol, 1.0)], -br.thermal_limit);
            overload.push(Some(ol));
        } else {
            overload.push(None);
        }
    }
    FlowVars {
        theta,
        flow,
        overload,
    }
}

/// `Σ_{e leaving i} x_e − Σ_{e entering i} x_e`.
fn kcl_terms(grid: &Grid, x: &[Option<Var>], i: usize) -> Vec<(Var, f64)> {
    let mut terms = Vec::new();
    for &e in grid.leaving(i) {
        if let Some(v) = x[e] {
            terms.push((v, 1.0));
        }
    }
    for &e in grid.entering(i) {
        if let Some(v) = x[e] {
            terms.push((v, -1.0));
        }
    }
    terms
}

fn read_flows(fv: &FlowVars, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let flows = fv.flow.iter().map(|f| f.map_or(0.0, |v| values[v])).collect();
    let angles = fv.theta.iter().map(|&v| values[v]).collect();
    (flows, angles)
}
