//! Brute-force references for tests. Nothing here calls into the production
//! graph, DC or MILP code: connectivity is a plain BFS and power flows are
//! solved with a dense LU on the full reduced susceptance matrix.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::grid::{ContingencySet, Grid, SwitchConfig};

/// Maximum number of configurations [`exhaustive_otsd`] will enumerate.
pub const ENUMERATION_LIMIT: u64 = 100_000;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("{0} configurations exceed the enumeration limit")]
    TooLarge(u64),
}

/// Buses reachable from `root` over closed branches.
pub fn bfs_energized(grid: &Grid, closed: &[bool], root: usize) -> Vec<bool> {
    let n = grid.num_buses();
    let mut adj = vec![Vec::new(); n];
    for br in grid.branches() {
        if closed[br.id] {
            adj[br.origin].push(br.destination);
            adj[br.destination].push(br.origin);
        }
    }
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut queue = VecDeque::from([root]);
    while let Some(i) = queue.pop_front() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen
}

/// Closed branches whose removal disconnects some pair of buses that were
/// connected, found by removing each in turn.
pub fn bridges_by_removal(grid: &Grid, closed: &[bool]) -> Vec<usize> {
    let count = |mask: &[bool]| {
        let mut seen = vec![false; grid.num_buses()];
        let mut comps = 0;
        for i in 0..grid.num_buses() {
            if !seen[i] {
                comps += 1;
                for (j, s) in bfs_energized(grid, mask, i).into_iter().enumerate() {
                    seen[j] |= s;
                }
            }
        }
        comps
    };
    let base = count(closed);
    (0..grid.num_branches())
        .filter(|&e| {
            if !closed[e] {
                return false;
            }
            let mut m = closed.to_vec();
            m[e] = false;
            count(&m) > base
        })
        .collect()
}

/// Loss of load and flows of one case: rebalance on the reference component,
/// then solve the reduced system of that component.
pub fn evaluate_case(grid: &Grid, closed: &[bool]) -> (f64, Vec<f64>) {
    let n = grid.num_buses();
    let r = grid.reference();
    let on = bfs_energized(grid, closed, r);
    let (mut load, mut gen, mut lost) = (0.0, 0.0, 0.0);
    for (i, b) in grid.buses().iter().enumerate() {
        if on[i] {
            load += b.pd_ref;
            gen += b.pg_ref;
        } else {
            lost += b.pd_ref;
        }
    }
    if gen <= 0.0 && load > 0.0 {
        return (grid.total_load(), vec![0.0; grid.num_branches()]);
    }
    let sigma = if gen > 0.0 { load / gen } else { 1.0 };
    let idx: Vec<usize> = (0..n).filter(|&i| on[i] && i != r).collect();
    let mut pos = vec![usize::MAX; n];
    for (k, &i) in idx.iter().enumerate() {
        pos[i] = k;
    }
    let k = idx.len();
    let mut b = DMatrix::<f64>::zeros(k, k);
    let mut p = DVector::<f64>::zeros(k);
    for (kk, &i) in idx.iter().enumerate() {
        let bus = grid.bus(i);
        p[kk] = sigma * bus.pg_ref - bus.pd_ref;
    }
    let live = |e: usize| {
        let br = grid.branch(e);
        closed[e] && on[br.origin] && on[br.destination]
    };
    for br in grid.branches() {
        if !live(br.id) {
            continue;
        }
        let (a, c) = (pos[br.origin], pos[br.destination]);
        if a != usize::MAX {
            b[(a, a)] += br.susceptance;
        }
        if c != usize::MAX {
            b[(c, c)] += br.susceptance;
        }
        if a != usize::MAX && c != usize::MAX {
            b[(a, c)] -= br.susceptance;
            b[(c, a)] -= br.susceptance;
        }
    }
    // Laplacian angles; flow from origin to destination is b(θo − θd).
    let theta = if k > 0 {
        b.lu().solve(&p).expect("energized component is connected")
    } else {
        DVector::zeros(0)
    };
    let angle = |i: usize| if pos[i] == usize::MAX { 0.0 } else { theta[pos[i]] };
    let flows = grid
        .branches()
        .iter()
        .map(|br| if live(br.id) { br.susceptance * (angle(br.origin) - angle(br.destination)) } else { 0.0 })
        .collect();
    (lost, flows)
}

fn within_limits(grid: &Grid, closed: &[bool], flows: &[f64], tol: f64) -> bool {
    grid.branches()
        .iter()
        .all(|br| !closed[br.id] || !br.is_limited() || flows[br.id].abs() <= br.thermal_limit + tol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveResult {
    /// Every configuration attaining the optimum, by increasing opening count.
    pub best: Vec<SwitchConfig>,
    pub objective: Option<f64>,
    pub feasible: bool,
    pub enumerated: u64,
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Minimum expected loss of load over all configurations with at most
/// `max_openings` open branches whose base case is connected and every case
/// respects thermal limits (within `tol`).
pub fn exhaustive_otsd(
    grid: &Grid,
    contingencies: &ContingencySet,
    max_openings: usize,
    tol: f64,
) -> Result<ExhaustiveResult, OracleError> {
    let m = grid.num_branches();
    let total: u64 = (0..=max_openings.min(m) as u64).map(|k| binomial(m as u64, k)).sum();
    if total > ENUMERATION_LIMIT {
        return Err(OracleError::TooLarge(total));
    }
    let mut best: Vec<SwitchConfig> = Vec::new();
    let mut objective: Option<f64> = None;
    let mut enumerated = 0;
    for k in 0..=max_openings.min(m) {
        let mut combo: Vec<usize> = (0..k).collect();
        loop {
            enumerated += 1;
            let cfg = SwitchConfig::with_openings(m, &combo);
            if let Some(obj) = evaluate_config(grid, contingencies, &cfg, tol) {
                match objective {
                    Some(o) if obj > o + 1e-9 => {}
                    Some(o) if (obj - o).abs() <= 1e-9 => best.push(cfg),
                    _ => {
                        objective = Some(obj);
                        best = vec![cfg];
                    }
                }
            }
            if !next_combination(&mut combo, m) {
                break;
            }
        }
    }
    Ok(ExhaustiveResult {
        feasible: objective.is_some(),
        best,
        objective,
        enumerated,
    })
}

/// Expected loss of load of a configuration, or `None` if it is disconnected
/// or violates a limit in some case.
pub fn evaluate_config(grid: &Grid, contingencies: &ContingencySet, cfg: &SwitchConfig, tol: f64) -> Option<f64> {
    let closed = cfg.closed();
    if bfs_energized(grid, closed, grid.reference()).iter().any(|b| !b) {
        return None;
    }
    if contingencies.include_base_case {
        let (_, flows) = evaluate_case(grid, closed);
        if !within_limits(grid, closed, &flows, tol) {
            return None;
        }
    }
    let mut obj = 0.0;
    for c in &contingencies.cases {
        let mut post = closed.to_vec();
        for &e in &c.tripped {
            post[e] = false;
        }
        let (lost, flows) = evaluate_case(grid, &post);
        if !within_limits(grid, &post, &flows, tol) {
            return None;
        }
        obj += c.probability * lost;
    }
    Some(obj)
}

fn next_combination(combo: &mut [usize], m: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < m - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
