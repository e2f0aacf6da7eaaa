#![allow(dead_code)]

use std::path::PathBuf;

use otsd::case_io::read_case;
use otsd::dc;
use otsd::grid::{
    build_grid, Branch, Bus, BuildOptions, ContingencySet, Grid, ProbabilityConvention, SwitchConfig, UNLIMITED,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_file(case: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(format!("pglib_opf_case{case}.m"))
}

/// Grid for a data file with limits scaled by `tlf_percent / 100`.
pub fn load(case: &str, tlf_percent: f64) -> Grid {
    let raw = read_case(&data_file(case)).expect("case parses");
    build_grid(&raw, &BuildOptions::with_tlf(tlf_percent / 100.0)).expect("case builds")
}

pub fn n_minus_1(grid: &Grid) -> ContingencySet {
    ContingencySet::n_minus_1(grid, ProbabilityConvention::Unit)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random connected grid: a random spanning tree plus extra branches
/// (parallel ones allowed), load on most buses, generation on the reference
/// and a few others, balanced. All branches unlimited.
pub fn random_grid(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Grid {
    assert!(m >= n - 1);
    let mut order: Vec<usize> = (1..n).collect();
    order.shuffle(rng);
    let mut placed = vec![0usize];
    let mut edges = Vec::with_capacity(m);
    for &i in &order {
        let j = placed[rng.gen_range(0..placed.len())];
        edges.push(if rng.gen_bool(0.5) { (i, j) } else { (j, i) });
        placed.push(i);
    }
    while edges.len() < m {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b {
            edges.push((a, b));
        }
    }
    let reference = rng.gen_range(0..n);
    let mut pd: Vec<f64> = (0..n)
        .map(|_| if rng.gen_bool(0.75) { rng.gen_range(0.1..1.0) } else { 0.0 })
        .collect();
    let mut pg = vec![0.0; n];
    pg[reference] = 1.0;
    for i in 0..n {
        if i != reference && rng.gen_bool(0.3) {
            pg[i] = rng.gen_range(0.2..1.5);
            pd[i] = 0.0;
        }
    }
    pd[reference] = 0.0;
    let load: f64 = pd.iter().sum();
    let gen: f64 = pg.iter().sum();
    let buses = (0..n)
        .map(|i| Bus {
            id: i + 1,
            pg_ref: pg[i] * load / gen,
            pd_ref: pd[i],
        })
        .collect();
    let branches = edges
        .iter()
        .enumerate()
        .map(|(id, &(o, d))| Branch {
            id,
            origin: o,
            destination: d,
            susceptance: rng.gen_range(1.0..20.0),
            thermal_limit: UNLIMITED,
        })
        .collect();
    Grid::new(format!("rand{n}x{m}"), buses, branches, reference, 100.0).unwrap()
}

/// Sets each branch limit to `factor` times its largest absolute flow over
/// every single outage of the all-closed grid, with factors drawn from
/// `range`, but never below 1.1 times the base-case flow.
pub fn with_tight_limits(grid: &Grid, rng: &mut ChaCha8Rng, range: std::ops::Range<f64>) -> Grid {
    let m = grid.num_branches();
    let mut worst = vec![0.0f64; m];
    let all = vec![true; m];
    let mut cases = vec![all.clone()];
    for e in 0..m {
        let mut c = all.clone();
        c[e] = false;
        cases.push(c);
    }
    let mut base = vec![0.0f64; m];
    for (k, closed) in cases.iter().enumerate() {
        let st = dc::case_state(grid, closed).unwrap();
        for e in 0..m {
            worst[e] = worst[e].max(st.flows[e].abs());
            if k == 0 {
                base[e] = st.flows[e].abs() * 1.1;
            }
        }
    }
    let branches = grid
        .branches()
        .iter()
        .map(|b| Branch {
            thermal_limit: (worst[b.id] * rng.gen_range(range.clone())).max(base[b.id]).max(1e-3),
            ..b.clone()
        })
        .collect();
    Grid::new(grid.name(), grid.buses().to_vec(), branches, grid.reference(), grid.base_mva()).unwrap()
}

/// Random configuration with at most `max_open` openings that keeps the
/// base case connected.
pub fn random_connected_config(grid: &Grid, rng: &mut ChaCha8Rng, max_open: usize) -> SwitchConfig {
    let m = grid.num_branches();
    loop {
        let k = rng.gen_range(0..=max_open);
        let mut ids: Vec<usize> = (0..m).collect();
        ids.shuffle(rng);
        let cfg = SwitchConfig::with_openings(m, &ids[..k]);
        if otsd::graph::is_connected(grid, cfg.closed()) {
            return cfg;
        }
    }
}

/// Small grids used against the exhaustive oracle: feasible ones with and
/// without required openings, and infeasible ones.
pub fn constructed_grids() -> Vec<Grid> {
    let shapes = [
        (5, 7, 3u64),
        (5, 7, 5),
        (6, 8, 0),
        (6, 9, 0),
        (7, 10, 0),
        (8, 11, 1),
        (8, 11, 6),
        (8, 12, 0),
    ];
    shapes
        .iter()
        .map(|&(n, m, seed)| {
            let mut r = rng(seed);
            let g = random_grid(&mut r, n, m);
            with_tight_limits(&g, &mut r, 0.8..1.05)
        })
        .collect()
}

/// Enumerates every configuration of a 6-bus, 9-branch grid and checks that
/// the fixed-configuration base program is feasible exactly when the
/// configuration is connected, with valid virtual flows. Returns the counts
/// of feasible and infeasible configurations.
pub fn virtual_flow_enumeration() -> Result<(usize, usize), String> {
    use otsd::milp::{BackendFactory, BackendStatus, BigMConfig, HighsFactory, MilpBackend, OtsdModel, Sense, ThermalMode};
    let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3), (1, 4), (2, 5)];
    let buses = (0..6)
        .map(|i| Bus {
            id: i + 1,
            pg_ref: if i == 0 { 1.5 } else { 0.0 },
            pd_ref: if i == 0 { 0.0 } else { 0.3 },
        })
        .collect();
    let branches = edges
        .iter()
        .enumerate()
        .map(|(id, &(o, d))| Branch {
            id,
            origin: o,
            destination: d,
            susceptance: 2.0 + id as f64,
            thermal_limit: UNLIMITED,
        })
        .collect();
    let g = Grid::new("six", buses, branches, 0, 100.0).unwrap();
    let factory = HighsFactory::default();
    let m = g.num_branches();
    let (mut feasible, mut infeasible) = (0, 0);
    for bits in 0u32..(1 << m) {
        let closed: Vec<bool> = (0..m).map(|e| bits & (1 << e) != 0).collect();
        let cfg = SwitchConfig::from_closed(closed.clone());
        let connected = otsd::oracle::bfs_energized(&g, &closed, 0).iter().all(|b| *b);
        let mut model = OtsdModel::build_base_case(&g, BigMConfig::for_grid(&g), factory.create(), ThermalMode::Omit);
        model.fix_config(&cfg);
        model.backend.set_objective(&[], 0.0, Sense::Minimize);
        let out = model.backend.solve(None).map_err(|e| e.to_string())?;
        if connected {
            feasible += 1;
            if out.status != BackendStatus::Optimal {
                return Err(format!("connected configuration {bits:09b} rejected"));
            }
            let phi = model.virtual_flows(&out.values);
            for i in 0..6 {
                let delta = if i == 0 { 1.0 - 6.0 } else { 1.0 };
                let inflow: f64 = g.entering(i).iter().map(|&e| phi[e]).sum();
                let outflow: f64 = g.leaving(i).iter().map(|&e| phi[e]).sum();
                if (inflow - outflow - delta).abs() > 1e-6 {
                    return Err(format!("virtual balance broken at bus {i} for {bits:09b}"));
                }
            }
            if (0..m).any(|e| !closed[e] && phi[e].abs() > 1e-9) {
                return Err(format!("virtual flow on an open branch for {bits:09b}"));
            }
        } else {
            infeasible += 1;
            if out.status != BackendStatus::Infeasible {
                return Err(format!("disconnected configuration {bits:09b} accepted"));
            }
        }
    }
    Ok((feasible, infeasible))
}

fn feasible_on(g: &Grid, cfg: &SwitchConfig, working: &[otsd::grid::Contingency]) -> bool {
    let subset = ContingencySet {
        cases: working.to_vec(),
        include_base_case: true,
    };
    dc::security_analysis(g, cfg, &subset, 1e-6).unwrap().is_secure()
}

/// Pads oracle optima of the constructed grids with harmless extra openings,
/// simplifies them, and re-checks the result. Returns the number of grids
/// checked.
pub fn simplification_check() -> Result<usize, String> {
    use otsd::milp::{self, BigMConfig, HighsFactory};
    let factory = HighsFactory::default();
    let mut checked = 0;
    for g in constructed_grids() {
        let cs = n_minus_1(&g);
        let ex = otsd::oracle::exhaustive_otsd(&g, &cs, g.num_branches(), 1e-6).unwrap();
        let Some(best) = ex.best.last() else { continue };
        let mut padded = best.clone();
        for e in 0..g.num_branches() {
            if padded.is_closed(e) {
                let mut trial = padded.clone();
                trial.set(e, false);
                if feasible_on(&g, &trial, &cs.cases) {
                    padded = trial;
                }
            }
        }
        let simplified = milp::remove_unnecessary_openings(&g, &padded, &cs.cases, BigMConfig::for_grid(&g), &factory, None)
            .map_err(|e| e.to_string())?;
        if simplified.openings().iter().any(|e| padded.is_closed(*e)) {
            return Err(format!("{}: simplification opened a new branch", g.name()));
        }
        if simplified.num_openings() > padded.num_openings() || !feasible_on(&g, &simplified, &cs.cases) {
            return Err(format!("{}: simplified configuration is not safe", g.name()));
        }
        checked += 1;
    }
    Ok(checked)
}
