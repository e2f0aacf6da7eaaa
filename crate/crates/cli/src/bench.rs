use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, SystemTime};

use anyhow::{Context, Result};
use otsd::SolveStatus;
use serde::Deserialize;

use crate::run::{self, Algorithm, RunConfig};

/// One manifest line: `case,tlf[,algo]`.
#[derive(Debug, Clone, Deserialize)]
pub struct ManifestRow {
    pub case: String,
    pub tlf: f64,
    #[serde(default)]
    pub algo: Option<String>,
}

pub const HEADER: [&str; 10] = [
    "case", "tlf", "algo", "status", "T", "Obj", "O", "SR", "started", "finished",
];

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub fields: [String; 10],
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("opening manifest {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize().enumerate() {
        let row: ManifestRow = rec.with_context(|| format!("manifest row {}", i + 1))?;
        rows.push(row);
    }
    Ok(rows)
}

fn timestamp(t: SystemTime) -> String {
    humantime::format_rfc3339_seconds(t).to_string()
}

fn run_row(row: &ManifestRow, template: &RunConfig, data_dir: &Path) -> BenchRow {
    let started = SystemTime::now();
    let algo = row.algo.clone().unwrap_or_else(|| "heuristic".to_string());
    let outcome = (|| {
        let algorithm: Algorithm = algo.parse().map_err(anyhow::Error::msg)?;
        let cfg = RunConfig {
            case: run::resolve_case(&row.case, data_dir)?,
            tlf: row.tlf,
            algorithm,
            ..template.clone()
        };
        run::execute(&cfg)
    })();
    let finished = SystemTime::now();
    let (status, t, obj, o, sr) = match outcome {
        Ok(out) => {
            let r = &out.result;
            let t = if r.status == SolveStatus::Timeout {
                limit_marker(template.time_limit)
            } else {
                format!("{:.3}", r.elapsed.as_secs_f64())
            };
            let solved = r.status.is_success();
            (
                r.status.as_str().to_string(),
                t,
                if solved { r.objective.map(|v| format!("{v:.6}")).unwrap_or_default() } else { String::new() },
                if solved { r.num_openings().to_string() } else { String::new() },
                format!("{:.6}", out.structural_risk),
            )
        }
        Err(e) => (
            format!("error: {e:#}"),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ),
    };
    BenchRow {
        fields: [
            row.case.clone(),
            row.tlf.to_string(),
            algo,
            status,
            t,
            obj,
            o,
            sr,
            timestamp(started),
            timestamp(finished),
        ],
    }
}

/// `>` followed by the configured limit in seconds.
pub fn limit_marker(limit: Option<Duration>) -> String {
    match limit {
        Some(d) => format!(">{}s", d.as_secs_f64()),
        None => ">LIMIT".to_string(),
    }
}

/// Runs every row, at most `jobs` at a time. Output order follows the manifest.
pub fn run_manifest(rows: &[ManifestRow], template: &RunConfig, data_dir: &Path, jobs: usize) -> Vec<BenchRow> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<BenchRow>>> = Mutex::new(vec![None; rows.len()]);
    std::thread::scope(|s| {
        for _ in 0..jobs.max(1).min(rows.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(row) = rows.get(i) else { break };
                let out = run_row(row, template, data_dir);
                results.lock().unwrap()[i] = Some(out);
            });
        }
    });
    results.into_inner().unwrap().into_iter().map(|r| r.expect("every row ran")).collect()
}

pub fn write_table<W: std::io::Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record(&r.fields)?;
    }
    w.flush()?;
    Ok(())
}
