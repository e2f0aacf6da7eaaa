use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use otsd::case_io::read_case;
use otsd::dc;
use otsd::grid::{build_grid, BuildOptions, ContingencySet, Grid, ProbabilityConvention, SwitchConfig};
use otsd::heuristic::{self, HeuristicParams};
use otsd::milp::{self, ExtensiveOptions, HighsFactory, HighsOptions};
use otsd::{SolveResult, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Heuristic,
    Extensive,
    SecurityOnly,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Heuristic => "heuristic",
            Self::Extensive => "extensive",
            Self::SecurityOnly => "security-only",
        }
    }
}

impl FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "heuristic" => Ok(Self::Heuristic),
            "extensive" => Ok(Self::Extensive),
            "security-only" => Ok(Self::SecurityOnly),
            other => Err(format!("unknown algorithm `{other}` (heuristic, extensive, security-only)")),
        }
    }
}

/// Everything needed for one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub case: PathBuf,
    pub tlf: f64,
    pub algorithm: Algorithm,
    pub nh_0: usize,
    pub nh_max: usize,
    pub tolerance: f64,
    pub probability: ProbabilityConvention,
    pub time_limit: Option<Duration>,
    pub solve_time_limit: Option<Duration>,
    pub max_openings: Option<usize>,
    pub mip_gap: f64,
    pub seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tlf.is_finite() && self.tlf > 0.0) {
            bail!("--tlf must be a positive fraction, got {}", self.tlf);
        }
        if self.nh_0 == 0 {
            bail!("--nh0 must be at least 1");
        }
        if self.nh_max < self.nh_0 {
            bail!("--nh-max ({}) is below --nh0 ({})", self.nh_max, self.nh_0);
        }
        if !(self.tolerance.is_finite() && self.tolerance >= 0.0) {
            bail!("--tolerance must be non-negative");
        }
        if !(self.mip_gap.is_finite() && self.mip_gap >= 0.0) {
            bail!("--mip-gap must be non-negative");
        }
        if self.seed > i32::MAX as u64 {
            bail!("--seed must be at most {}", i32::MAX);
        }
        Ok(())
    }

    fn factory(&self) -> HighsFactory {
        HighsFactory {
            options: HighsOptions {
                mip_rel_gap: self.mip_gap,
                seed: self.seed as i32,
                ..HighsOptions::default()
            },
        }
    }
}

pub fn seconds(s: &str) -> Result<Duration, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number of seconds"))?;
    if !(v.is_finite() && v > 0.0) {
        return Err(format!("time limit must be positive, got {v}"));
    }
    Ok(Duration::from_secs_f64(v))
}

/// A path to an existing file, or a short name such as `case30` looked up in
/// `data_dir` as `pglib_opf_<name>.m` or `pglib_opf_<name>_*.m`.
pub fn resolve_case(name: &str, data_dir: &Path) -> Result<PathBuf> {
    let direct = PathBuf::from(name);
    if direct.is_file() {
        return Ok(direct);
    }
    for file in [name.to_string(), format!("{name}.m"), format!("pglib_opf_{name}.m")] {
        let p = data_dir.join(file);
        if p.is_file() {
            return Ok(p);
        }
    }
    let prefix = format!("pglib_opf_{name}_");
    let mut hits: Vec<PathBuf> = match std::fs::read_dir(data_dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with(&prefix) && n.ends_with(".m"))
            })
            .collect(),
        Err(_) => Vec::new(),
    };
    hits.sort();
    match hits.len() {
        0 => bail!("case `{name}` not found (not a file, nothing matching in {})", data_dir.display()),
        1 => Ok(hits.pop().unwrap()),
        _ => bail!(
            "case `{name}` is ambiguous: {}",
            hits.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ")
        ),
    }
}

pub fn load_grid(path: &Path, tlf: f64) -> Result<Grid> {
    let raw = read_case(path).with_context(|| format!("reading {}", path.display()))?;
    let grid = build_grid(&raw, &BuildOptions::with_tlf(tlf)).with_context(|| format!("building {}", path.display()))?;
    Ok(grid)
}

pub struct Outcome {
    pub grid: Grid,
    pub result: SolveResult,
    pub structural_risk: f64,
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let grid = load_grid(&cfg.case, cfg.tlf)?;
    let cs = ContingencySet::n_minus_1(&grid, cfg.probability);
    let structural_risk = dc::structural_risk(&grid, &cs);
    let result = match cfg.algorithm {
        Algorithm::Heuristic => {
            let params = HeuristicParams {
                nh_0: cfg.nh_0,
                nh_max: cfg.nh_max,
                tolerance: cfg.tolerance,
                solve_time_limit: cfg.solve_time_limit,
                time_limit: cfg.time_limit,
                ..HeuristicParams::default()
            };
            heuristic::solve(&grid, &cs, &params, &cfg.factory())?
        }
        Algorithm::Extensive => {
            let opts = ExtensiveOptions {
                time_limit: cfg.time_limit,
                tolerance: cfg.tolerance,
                max_openings: cfg.max_openings,
                ..ExtensiveOptions::for_grid(&grid)
            };
            milp::solve_extensive(&grid, &cs, &opts, &cfg.factory())?
        }
        Algorithm::SecurityOnly => security_only(&grid, &cs, cfg.tolerance)?,
    };
    Ok(Outcome {
        grid,
        result,
        structural_risk,
    })
}

/// Verdict on the all-closed configuration alone: feasible when it is N-1
/// secure, infeasible otherwise.
fn security_only(grid: &Grid, cs: &ContingencySet, tolerance: f64) -> Result<SolveResult> {
    let start = Instant::now();
    let config = SwitchConfig::all_closed(grid.num_branches());
    let report = dc::security_analysis(grid, &config, cs, tolerance)?;
    let status = if report.is_secure() {
        SolveStatus::Feasible
    } else {
        SolveStatus::Infeasible
    };
    let mut result = SolveResult::without_solution(status, Duration::ZERO);
    result.objective = Some(report.total_objective);
    result.loss_of_load = report.loss_of_load.iter().copied().enumerate().collect();
    result.timings.insert("security".into(), start.elapsed());
    result.config = Some(config);
    result.elapsed = start.elapsed();
    Ok(result)
}
