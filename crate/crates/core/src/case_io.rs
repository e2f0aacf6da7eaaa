//! MATPOWER case parsing and result serialization.
//!
//! Only `baseMVA`, `bus`, `gen` and `branch` are read. Other matrices and
//! cell arrays are skipped with a log notice; `dcline` is rejected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Grid;
use crate::result::{IterationRecord, SolveResult, SolveStatus};

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unsupported feature `{feature}`")]
    UnsupportedFeature { line: usize, feature: String },
    #[error("cannot read case file: {0}")]
    Io(#[from] std::io::Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> CaseError {
    CaseError::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawBus {
    pub id: usize,
    /// MATPOWER bus type; 3 marks the reference bus.
    pub bus_type: u8,
    /// Load in MW.
    pub pd: f64,
}

/// In-service generation at one bus, summed over its generators (MW).
#[derive(Debug, Clone, PartialEq)]
pub struct RawGenerator {
    pub bus: usize,
    pub pg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawBranch {
    pub from: usize,
    pub to: usize,
    pub reactance: f64,
    /// `1 / reactance`.
    pub susceptance: f64,
    /// Rate A in MW; 0 means unrated.
    pub rate_a: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawCase {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<RawBus>,
    pub generators: Vec<RawGenerator>,
    /// In-service branches only.
    pub branches: Vec<RawBranch>,
}

struct Matrix {
    start: usize,
    rows: Vec<(usize, Vec<f64>)>,
}

enum Block {
    None,
    Matrix(String, Matrix),
    Cell,
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn push_rows(text: &str, lineno: usize, m: &mut Matrix) -> Result<(), CaseError> {
    for seg in text.split(';') {
        let seg = seg.trim();
        if seg.is_empty() {
            continue;
        }
        let row = seg
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| parse_err(lineno, format!("invalid number `{t}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(v) = row.iter().find(|v| v.is_nan()) {
            return Err(parse_err(lineno, format!("non-numeric value {v}")));
        }
        m.rows.push((lineno, row));
    }
    Ok(())
}

/// Parses MATPOWER case text.
pub fn parse_case(text: &str) -> Result<RawCase, CaseError> {
    let mut name = String::new();
    let mut base_mva = None;
    let mut matrices: BTreeMap<String, Matrix> = BTreeMap::new();
    let mut block = Block::None;

    for (idx, full) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = strip_comment(full);
        match &mut block {
            Block::Cell => {
                if line.contains('}') {
                    block = Block::None;
                }
                continue;
            }
            Block::Matrix(_, m) => {
                let (body, done) = match line.find(']') {
                    Some(i) => (&line[..i], true),
                    None => (line, false),
                };
                push_rows(body, lineno, m)?;
                if done {
                    if let Block::Matrix(key, m) = std::mem::replace(&mut block, Block::None) {
                        matrices.insert(key, m);
                    }
                }
                continue;
            }
            Block::None => {}
        }

        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("function") {
            if let Some((_, n)) = rest.split_once('=') {
                name = n.trim().trim_end_matches(';').to_string();
            }
            continue;
        }
        let Some(rest) = trimmed.strip_prefix("mpc.") else {
            continue;
        };
        let Some((key, value)) = rest.split_once('=') else {
            return Err(parse_err(lineno, format!("expected assignment: `{trimmed}`")));
        };
        let key = key.trim().to_string();
        let value = value.trim();
        if key == "dcline" {
            return Err(CaseError::UnsupportedFeature {
                line: lineno,
                feature: "dcline".into(),
            });
        }
        if let Some(body) = value.strip_prefix('[') {
            let mut m = Matrix {
                start: lineno,
                rows: Vec::new(),
            };
            match body.find(']') {
                Some(i) => {
                    push_rows(&body[..i], lineno, &mut m)?;
                    matrices.insert(key, m);
                }
                None => {
                    push_rows(body, lineno, &mut m)?;
                    block = Block::Matrix(key, m);
                }
            }
        } else if value.starts_with('{') {
            log::info!("ignoring cell array mpc.{key}");
            if !value.contains('}') {
                block = Block::Cell;
            }
        } else if key == "baseMVA" {
            let v = value.trim_end_matches(';').trim();
            let v: f64 = v
                .parse()
                .map_err(|_| parse_err(lineno, format!("invalid baseMVA `{v}`")))?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(parse_err(lineno, "baseMVA must be positive"));
            }
            base_mva = Some(v);
        } else if key != "version" {
            log::info!("ignoring mpc.{key}");
        }
    }

    let last = text.lines().count();
    if let Block::Matrix(key, m) = block {
        return Err(parse_err(
            m.start,
            format!("matrix mpc.{key} is not terminated"),
        ));
    }
    for key in matrices.keys() {
        if !matches!(key.as_str(), "bus" | "gen" | "branch") {
            log::info!("ignoring matrix mpc.{key}");
        }
    }
    let base_mva = base_mva.ok_or_else(|| parse_err(last, "missing mpc.baseMVA"))?;
    let take = |key: &str| {
        matrices
            .get(key)
            .filter(|m| !m.rows.is_empty())
            .ok_or_else(|| parse_err(last, format!("missing or empty mpc.{key}")))
    };

    let mut buses = Vec::new();
    for (line, row) in &take("bus")?.rows {
        if row.len() < 3 {
            return Err(parse_err(*line, "bus row needs at least 3 columns"));
        }
        check_finite(*line, &row[..3])?;
        buses.push(RawBus {
            id: as_id(*line, row[0])?,
            bus_type: row[1] as u8,
            pd: row[2],
        });
    }

    let mut generation: BTreeMap<usize, f64> = BTreeMap::new();
    let mut order = Vec::new();
    for (line, row) in &take("gen")?.rows {
        if row.len() < 8 {
            return Err(parse_err(*line, "gen row needs at least 8 columns"));
        }
        check_finite(*line, &row[..2])?;
        if row[7] <= 0.0 {
            continue;
        }
        let bus = as_id(*line, row[0])?;
        if !generation.contains_key(&bus) {
            order.push(bus);
        }
        *generation.entry(bus).or_insert(0.0) += row[1];
    }
    let generators = order
        .into_iter()
        .map(|bus| RawGenerator {
            bus,
            pg: generation[&bus],
        })
        .collect();

    let mut branches = Vec::new();
    for (line, row) in &take("branch")?.rows {
        if row.len() < 11 {
            return Err(parse_err(*line, "branch row needs at least 11 columns"));
        }
        check_finite(*line, &row[..6])?;
        if row[10] == 0.0 {
            continue;
        }
        let reactance = row[3];
        if reactance == 0.0 {
            return Err(parse_err(*line, "branch reactance is zero"));
        }
        branches.push(RawBranch {
            from: as_id(*line, row[0])?,
            to: as_id(*line, row[1])?,
            reactance,
            susceptance: 1.0 / reactance,
            rate_a: row[5],
        });
    }

    Ok(RawCase {
        name,
        base_mva,
        buses,
        generators,
        branches,
    })
}

fn check_finite(line: usize, vals: &[f64]) -> Result<(), CaseError> {
    if vals.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(parse_err(line, "non-finite value"))
    }
}

fn as_id(line: usize, v: f64) -> Result<usize, CaseError> {
    if v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(parse_err(line, format!("invalid bus number {v}")))
    }
}

/// Reads and parses a case file; the case name falls back to the file stem.
pub fn read_case(path: &Path) -> Result<RawCase, CaseError> {
    let text = std::fs::read_to_string(path)?;
    let mut raw = parse_case(&text)?;
    if raw.name.is_empty() {
        raw.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(raw)
}

/// Size and balance figures of a built grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub name: String,
    pub buses: usize,
    pub branches: usize,
    pub rated_branches: usize,
    pub reference_bus: usize,
    pub base_mva: f64,
    pub total_load: f64,
    pub total_generation: f64,
}

impl GridSummary {
    pub fn of(grid: &Grid) -> Self {
        Self {
            name: grid.name().to_string(),
            buses: grid.num_buses(),
            branches: grid.num_branches(),
            rated_branches: grid.branches().iter().filter(|b| b.is_limited()).count(),
            reference_bus: grid.bus(grid.reference()).id,
            base_mva: grid.base_mva(),
            total_load: grid.total_load(),
            total_generation: grid.total_generation(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    CsvSummary,
}

/// Serializable outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub case: String,
    pub tlf: f64,
    pub algorithm: String,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub structural_risk: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub openings: Option<Vec<OpeningEntry>>,
    /// Non-zero loss of load per contingency, keyed by contingency id.
    pub loss_of_load: BTreeMap<usize, f64>,
    pub timings_ms: BTreeMap<String, f64>,
    pub iterations: Vec<IterationRecord>,
    pub time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpeningEntry {
    pub branch: usize,
    pub from_bus: usize,
    pub to_bus: usize,
}

impl ResultDocument {
    pub fn from_result(
        grid: &Grid,
        tlf: f64,
        algorithm: &str,
        result: &SolveResult,
        structural_risk: Option<f64>,
    ) -> Self {
        let solved = result.status.is_success();
        let openings = solved.then(|| {
            result
                .openings
                .iter()
                .map(|&e| {
                    let br = grid.branch(e);
                    OpeningEntry {
                        branch: e,
                        from_bus: grid.bus(br.origin).id,
                        to_bus: grid.bus(br.destination).id,
                    }
                })
                .collect()
        });
        let loss_of_load = if solved {
            result
                .loss_of_load
                .iter()
                .filter(|(_, ll)| *ll > 0.0)
                .map(|(c, ll)| (*c, *ll))
                .collect()
        } else {
            BTreeMap::new()
        };
        Self {
            case: grid.name().to_string(),
            tlf,
            algorithm: algorithm.to_string(),
            status: result.status,
            objective: if solved { result.objective } else { None },
            structural_risk,
            openings,
            loss_of_load,
            timings_ms: result
                .timings
                .iter()
                .map(|(k, d)| (k.clone(), d.as_secs_f64() * 1e3))
                .collect(),
            iterations: result.iterations.clone(),
            time_ms: result.elapsed.as_secs_f64() * 1e3,
        }
    }

    pub fn num_openings(&self) -> Option<usize> {
        self.openings.as_ref().map(Vec::len)
    }
}

pub const CSV_HEADER: &str = "case,tlf,status,objective,openings,time_ms";

/// One summary row without trailing newline.
pub fn csv_row(doc: &ResultDocument) -> String {
    let objective = doc.objective.map(|o| format!("{o:.6}")).unwrap_or_default();
    let openings = doc.num_openings().map(|n| n.to_string()).unwrap_or_default();
    format!(
        "{},{},{},{},{},{:.3}",
        doc.case,
        doc.tlf,
        doc.status.as_str(),
        objective,
        openings,
        doc.time_ms
    )
}

pub fn write_result(doc: &ResultDocument, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(doc).expect("result document serializes");
            s.push('\n');
            s
        }
        OutputFormat::CsvSummary => format!("{CSV_HEADER}\n{}\n", csv_row(doc)),
    }
}
