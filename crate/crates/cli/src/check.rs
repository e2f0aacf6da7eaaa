use std::fmt::Write;

use anyhow::{bail, Result};
use otsd::dc::{self, Analyzer, SecurityReport};
use otsd::grid::{CaseId, ContingencySet, Grid, SwitchConfig};

/// Branch indices from `e1,e2,...`.
pub fn parse_openings(list: &str, grid: &Grid) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for tok in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let Ok(e) = tok.parse::<usize>() else {
            bail!("`{tok}` is not a branch index");
        };
        if e >= grid.num_branches() {
            bail!("branch {e} out of range (case has {} branches)", grid.num_branches());
        }
        out.push(e);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn case_label(grid: &Grid, cs: &ContingencySet, id: CaseId) -> String {
    match id {
        CaseId::Base => "base case".to_string(),
        CaseId::Outage(c) => {
            let tripped: Vec<String> = cs
                .get(c)
                .tripped
                .iter()
                .map(|&e| format!("{e} ({})", grid.branch_label(e)))
                .collect();
            format!("outage {c} of branch {}", tripped.join(" + "))
        }
    }
}

fn bus_ids(grid: &Grid, buses: &[usize]) -> String {
    buses
        .iter()
        .map(|&b| grid.bus(b).id.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn render(
    grid: &Grid,
    cs: &ContingencySet,
    config: &SwitchConfig,
    report: &SecurityReport,
    structural_risk: f64,
) -> Result<String> {
    let mut s = String::new();
    writeln!(
        s,
        "case {} ({} buses, {} branches)",
        grid.name(),
        grid.num_buses(),
        grid.num_branches()
    )?;
    let open = config.openings();
    if open.is_empty() {
        writeln!(s, "open branches: none")?;
    } else {
        let labels: Vec<String> = open.iter().map(|&e| format!("{e} ({})", grid.branch_label(e))).collect();
        writeln!(s, "open branches: {}", labels.join(", "))?;
    }

    let base = Analyzer::new(grid, config)?.base().clone();
    let stranded = base.energized.de_energized();
    if !stranded.is_empty() {
        writeln!(
            s,
            "note: base case de-energizes buses {} (loss of load {:.6})",
            bus_ids(grid, &stranded),
            base.loss_of_load
        )?;
    }

    writeln!(s, "violating cases: {}", report.violating.len())?;
    for (&id, detail) in &report.violating {
        writeln!(s, "  {}", case_label(grid, cs, id))?;
        for v in &detail.violated {
            writeln!(
                s,
                "    branch {} ({}): flow {:.6} limit {:.6} overload {:.6}",
                v.branch,
                grid.branch_label(v.branch),
                v.flow,
                v.limit,
                v.overload
            )?;
        }
        if !detail.de_energized.is_empty() {
            writeln!(s, "    de-energized buses: {}", bus_ids(grid, &detail.de_energized))?;
        }
    }

    let lossy: Vec<(usize, f64)> = report
        .loss_of_load
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, ll)| *ll > 0.0)
        .collect();
    writeln!(s, "contingencies with loss of load: {}", lossy.len())?;
    for (c, ll) in lossy {
        writeln!(s, "  {}: {:.6}", case_label(grid, cs, CaseId::Outage(c)), ll)?;
    }
    writeln!(s, "objective: {:.6}", report.total_objective)?;
    writeln!(s, "structural risk: {:.6}", structural_risk)?;
    Ok(s)
}

pub fn check(grid: &Grid, cs: &ContingencySet, open: &[usize], tolerance: f64) -> Result<String> {
    let config = SwitchConfig::with_openings(grid.num_branches(), open);
    let report = dc::security_analysis(grid, &config, cs, tolerance)?;
    render(grid, cs, &config, &report, dc::structural_risk(grid, cs))
}
