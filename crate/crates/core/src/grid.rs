//! Immutable network description, contingencies and switching configurations.
//!
//! All quantities are per-unit on the case MVA base. Buses and branches are
//! addressed by their position (`usize`) in [`Grid::buses`] / [`Grid::branches`];
//! the original MATPOWER bus number is kept in [`Bus::id`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case_io::RawCase;
use crate::graph;

/// Sentinel for branches without a thermal rating.
pub const UNLIMITED: f64 = f64::INFINITY;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("case is not connected with all branches closed ({components} components)")]
    DisconnectedCase { components: usize },
    #[error("malformed case: {0}")]
    MalformedCase(String),
    #[error("thermal limit factor must be positive and finite, got {0}")]
    InvalidTlf(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    /// Bus number in the source data.
    pub id: usize,
    /// Generation setpoint (per-unit).
    pub pg_ref: f64,
    /// Load (per-unit).
    pub pd_ref: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    /// Position of the branch in the grid.
    pub id: usize,
    /// Origin bus index.
    pub origin: usize,
    /// Destination bus index.
    pub destination: usize,
    pub susceptance: f64,
    /// Thermal limit; [`UNLIMITED`] when the source data has no rating.
    pub thermal_limit: f64,
}

impl Branch {
    pub fn is_limited(&self) -> bool {
        self.thermal_limit.is_finite()
    }

    /// The endpoint opposite to `bus`.
    pub fn other_end(&self, bus: usize) -> usize {
        if bus == self.origin {
            self.destination
        } else {
            self.origin
        }
    }
}

/// Options applied when turning a parsed case into a [`Grid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    /// Thermal limit factor applied to every rated branch.
    pub tlf: f64,
    /// Net generation against load at every bus before balancing, so a bus is
    /// either a net injector or a net consumer.
    pub net_injections: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            tlf: 1.0,
            net_injections: true,
        }
    }
}

impl BuildOptions {
    pub fn with_tlf(tlf: f64) -> Self {
        Self {
            tlf,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Grid {
    name: String,
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    reference: usize,
    base_mva: f64,
    leaving: Vec<Vec<usize>>,
    entering: Vec<Vec<usize>>,
}

impl Grid {
    /// Assembles a grid from already normalized parts and checks every invariant.
    pub fn new(
        name: impl Into<String>,
        buses: Vec<Bus>,
        branches: Vec<Branch>,
        reference: usize,
        base_mva: f64,
    ) -> Result<Self, GridError> {
        let n = buses.len();
        if n == 0 {
            return Err(GridError::MalformedCase("no buses".into()));
        }
        if branches.is_empty() {
            return Err(GridError::MalformedCase("no branches".into()));
        }
        if reference >= n {
            return Err(GridError::MalformedCase(format!(
                "reference bus index {reference} out of range"
            )));
        }
        let mut seen = std::collections::HashSet::with_capacity(n);
        for bus in &buses {
            if !seen.insert(bus.id) {
                return Err(GridError::MalformedCase(format!("duplicate bus id {}", bus.id)));
            }
            if !(bus.pg_ref >= 0.0 && bus.pd_ref >= 0.0) {
                return Err(GridError::MalformedCase(format!(
                    "bus {} has negative or non-finite injection",
                    bus.id
                )));
            }
        }
        let mut leaving = vec![Vec::new(); n];
        let mut entering = vec![Vec::new(); n];
        for (pos, br) in branches.iter().enumerate() {
            if br.id != pos {
                return Err(GridError::MalformedCase(format!(
                    "branch at position {pos} carries id {}",
                    br.id
                )));
            }
            if br.origin >= n || br.destination >= n {
                return Err(GridError::MalformedCase(format!(
                    "branch {pos} refers to a missing bus"
                )));
            }
            if br.origin == br.destination {
                return Err(GridError::MalformedCase(format!("branch {pos} is a self-loop")));
            }
            if !(br.susceptance > 0.0 && br.susceptance.is_finite()) {
                return Err(GridError::MalformedCase(format!(
                    "branch {pos} has non-positive susceptance"
                )));
            }
            if !(br.thermal_limit > 0.0) {
                return Err(GridError::MalformedCase(format!(
                    "branch {pos} has non-positive thermal limit"
                )));
            }
            leaving[br.origin].push(pos);
            entering[br.destination].push(pos);
        }
        let grid = Self {
            name: name.into(),
            buses,
            branches,
            reference,
            base_mva,
            leaving,
            entering,
        };
        let components = graph::component_count(&grid, &vec![true; grid.num_branches()]);
        if components != 1 {
            return Err(GridError::DisconnectedCase { components });
        }
        Ok(grid)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }
    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }
    pub fn bus(&self, i: usize) -> &Bus {
        &self.buses[i]
    }
    pub fn branch(&self, e: usize) -> &Branch {
        &self.branches[e]
    }
    pub fn num_buses(&self) -> usize {
        self.buses.len()
    }
    pub fn num_branches(&self) -> usize {
        self.branches.len()
    }
    pub fn reference(&self) -> usize {
        self.reference
    }
    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }

    /// Branches whose origin is `bus`.
    pub fn leaving(&self, bus: usize) -> &[usize] {
        &self.leaving[bus]
    }

    /// Branches whose destination is `bus`.
    pub fn entering(&self, bus: usize) -> &[usize] {
        &self.entering[bus]
    }

    /// All branches touching `bus`.
    pub fn incident(&self, bus: usize) -> impl Iterator<Item = usize> + '_ {
        self.leaving[bus].iter().chain(&self.entering[bus]).copied()
    }

    pub fn bus_index(&self, id: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn total_load(&self) -> f64 {
        self.buses.iter().map(|b| b.pd_ref).sum()
    }

    pub fn total_generation(&self) -> f64 {
        self.buses.iter().map(|b| b.pg_ref).sum()
    }

    /// Net base-case injection `pg - pd` per bus.
    pub fn injections(&self) -> Vec<f64> {
        self.buses.iter().map(|b| b.pg_ref - b.pd_ref).collect()
    }

    /// Copy of the grid with every thermal limit multiplied by `factor`.
    pub fn with_scaled_limits(&self, factor: f64) -> Self {
        let mut g = self.clone();
        for br in &mut g.branches {
            br.thermal_limit *= factor;
        }
        g
    }

    /// Human-readable `from-to` label using source bus numbers.
    pub fn branch_label(&self, e: usize) -> String {
        let br = &self.branches[e];
        format!("{}-{}", self.buses[br.origin].id, self.buses[br.destination].id)
    }
}

/// Turns a parsed case into a per-unit [`Grid`].
///
/// Thermal limits are scaled by `opts.tlf`; unrated branches become
/// [`UNLIMITED`]. When `opts.net_injections` is set, generation and load are
/// netted per bus. Generation is then scaled by `total_load / total_generation`
/// so the base case is balanced.
pub fn build_grid(raw: &RawCase, opts: &BuildOptions) -> Result<Grid, GridError> {
    if !(opts.tlf > 0.0 && opts.tlf.is_finite()) {
        return Err(GridError::InvalidTlf(opts.tlf));
    }
    let base = raw.base_mva;
    if !(base > 0.0) {
        return Err(GridError::MalformedCase(format!("invalid MVA base {base}")));
    }
    let mut index = std::collections::HashMap::with_capacity(raw.buses.len());
    for (pos, b) in raw.buses.iter().enumerate() {
        if index.insert(b.id, pos).is_some() {
            return Err(GridError::MalformedCase(format!("duplicate bus id {}", b.id)));
        }
    }
    let mut pg = vec![0.0; raw.buses.len()];
    for g in &raw.generators {
        let pos = *index.get(&g.bus).ok_or_else(|| {
            GridError::MalformedCase(format!("generator refers to missing bus {}", g.bus))
        })?;
        pg[pos] += g.pg / base;
    }
    let mut pd: Vec<f64> = raw.buses.iter().map(|b| b.pd / base).collect();

    if opts.net_injections {
        for (g, d) in pg.iter_mut().zip(pd.iter_mut()) {
            let net = *g - *d;
            *g = net.max(0.0);
            *d = (-net).max(0.0);
        }
    } else if let Some(i) = pg.iter().chain(&pd).position(|v| *v < 0.0) {
        return Err(GridError::MalformedCase(format!(
            "negative injection at bus position {}; enable netting",
            i % raw.buses.len()
        )));
    }

    let total_load: f64 = pd.iter().sum();
    let total_gen: f64 = pg.iter().sum();
    if total_load > 0.0 {
        if total_gen <= 0.0 {
            return Err(GridError::MalformedCase("load without any generation".into()));
        }
        let scale = total_load / total_gen;
        pg.iter_mut().for_each(|g| *g *= scale);
    } else {
        pg.iter_mut().for_each(|g| *g = 0.0);
    }

    let buses = raw
        .buses
        .iter()
        .zip(pg.into_iter().zip(pd))
        .map(|(b, (pg_ref, pd_ref))| Bus {
            id: b.id,
            pg_ref,
            pd_ref,
        })
        .collect();

    let mut branches = Vec::with_capacity(raw.branches.len());
    for br in &raw.branches {
        let origin = *index.get(&br.from).ok_or_else(|| {
            GridError::MalformedCase(format!("branch refers to missing bus {}", br.from))
        })?;
        let destination = *index.get(&br.to).ok_or_else(|| {
            GridError::MalformedCase(format!("branch refers to missing bus {}", br.to))
        })?;
        let thermal_limit = if br.rate_a > 0.0 {
            br.rate_a / base * opts.tlf
        } else {
            UNLIMITED
        };
        branches.push(Branch {
            id: branches.len(),
            origin,
            destination,
            susceptance: br.susceptance,
            thermal_limit,
        });
    }

    let reference = match raw.buses.iter().position(|b| b.bus_type == 3) {
        Some(r) => r,
        None => {
            return Err(GridError::MalformedCase("no reference bus (type 3)".into()));
        }
    };
    Grid::new(raw.name.clone(), buses, branches, reference, base)
}

/// Index of a case in a [`ContingencySet`]: the base case or an outage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CaseId {
    Base,
    Outage(usize),
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseId::Base => write!(f, "base"),
            CaseId::Outage(c) => write!(f, "c{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contingency {
    pub id: usize,
    /// Branches lost simultaneously.
    pub tripped: Vec<usize>,
    pub probability: f64,
}

impl Contingency {
    pub fn trips(&self, e: usize) -> bool {
        self.tripped.contains(&e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbabilityConvention {
    /// `p_c = 1 / |C|`.
    Uniform,
    /// `p_c = 1`.
    #[default]
    Unit,
}

impl FromStr for ProbabilityConvention {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "unit" => Ok(Self::Unit),
            other => Err(format!("unknown probability convention `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencySet {
    pub cases: Vec<Contingency>,
    /// Whether the base case (no outage) is part of the monitored cases.
    pub include_base_case: bool,
}

impl ContingencySet {
    /// One single-branch contingency per branch.
    pub fn n_minus_1(grid: &Grid, convention: ProbabilityConvention) -> Self {
        let m = grid.num_branches();
        let p = match convention {
            ProbabilityConvention::Uniform => 1.0 / m as f64,
            ProbabilityConvention::Unit => 1.0,
        };
        let cases = (0..m)
            .map(|e| Contingency {
                id: e,
                tripped: vec![e],
                probability: p,
            })
            .collect();
        Self {
            cases,
            include_base_case: true,
        }
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn get(&self, id: usize) -> &Contingency {
        &self.cases[id]
    }

    /// Base case first (when included), then every outage in order.
    pub fn case_ids(&self) -> impl Iterator<Item = CaseId> + '_ {
        self.include_base_case
            .then_some(CaseId::Base)
            .into_iter()
            .chain((0..self.cases.len()).map(CaseId::Outage))
    }

    pub fn probability(&self, id: CaseId) -> f64 {
        match id {
            CaseId::Base => 0.0,
            CaseId::Outage(c) => self.cases[c].probability,
        }
    }

    pub fn tripped(&self, id: CaseId) -> &[usize] {
        match id {
            CaseId::Base => &[],
            CaseId::Outage(c) => &self.cases[c].tripped,
        }
    }
}

/// Base-case open/closed status of every branch.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SwitchConfig {
    closed: Vec<bool>,
}

impl SwitchConfig {
    pub fn all_closed(num_branches: usize) -> Self {
        Self {
            closed: vec![true; num_branches],
        }
    }

    pub fn from_closed(closed: Vec<bool>) -> Self {
        Self { closed }
    }

    pub fn with_openings(num_branches: usize, open: &[usize]) -> Self {
        let mut cfg = Self::all_closed(num_branches);
        for &e in open {
            cfg.closed[e] = false;
        }
        cfg
    }

    pub fn len(&self) -> usize {
        self.closed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closed.is_empty()
    }

    pub fn is_closed(&self, e: usize) -> bool {
        self.closed[e]
    }

    pub fn set(&mut self, e: usize, closed: bool) {
        self.closed[e] = closed;
    }

    pub fn closed(&self) -> &[bool] {
        &self.closed
    }

    pub fn openings(&self) -> Vec<usize> {
        (0..self.closed.len()).filter(|&e| !self.closed[e]).collect()
    }

    pub fn num_openings(&self) -> usize {
        self.closed.iter().filter(|c| !**c).count()
    }

    /// Post-contingency status: tripped branches forced open, others unchanged.
    pub fn masked(&self, tripped: &[usize]) -> Vec<bool> {
        let mut v = self.closed.clone();
        for &e in tripped {
            v[e] = false;
        }
        v
    }
}
