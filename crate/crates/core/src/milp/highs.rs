//! HiGHS adapter over the raw C API.
//!
//! Columns and rows are buffered on the Rust side and pushed in batches right
//! before each solve. Runs are single threaded with a fixed random seed, so
//! repeated solves of the same model are deterministic. The time limit is
//! wall-clock seconds as measured by HiGHS.

use std::ffi::{c_void, CString};
use std::os::raw::c_char;
use std::time::Duration;

use highs_sys::*;

use super::backend::{BackendFactory, BackendStatus, MilpBackend, Row, Sense, SolveOutcome, Var, VarKind};
use super::MilpError;

#[derive(Debug, Clone)]
pub struct HighsOptions {
    pub mip_rel_gap: f64,
    pub seed: i32,
    pub verbose: bool,
    /// Share of effort spent in primal heuristics (HiGHS default 0.05).
    pub heuristic_effort: f64,
}

impl Default for HighsOptions {
    fn default() -> Self {
        Self {
            mip_rel_gap: 1e-6,
            seed: 0,
            verbose: false,
            heuristic_effort: 0.05,
        }
    }
}

pub struct HighsBackend {
    ptr: *mut c_void,
    lb: Vec<f64>,
    ub: Vec<f64>,
    cost: Vec<f64>,
    binary: Vec<bool>,
    offset: f64,
    sense: Sense,
    pushed_cols: usize,
    row_lb: Vec<f64>,
    row_ub: Vec<f64>,
    row_start: Vec<HighsInt>,
    row_index: Vec<HighsInt>,
    row_value: Vec<f64>,
    pushed_rows: usize,
    warm: Vec<(Var, f64)>,
}

impl HighsBackend {
    pub fn new(opts: &HighsOptions) -> Self {
        // SAFETY: plain constructor; the pointer is owned by this value.
        let ptr = unsafe { Highs_create() };
        let mut b = Self {
            ptr,
            lb: Vec::new(),
            ub: Vec::new(),
            cost: Vec::new(),
            binary: Vec::new(),
            offset: 0.0,
            sense: Sense::Minimize,
            pushed_cols: 0,
            row_lb: Vec::new(),
            row_ub: Vec::new(),
            row_start: Vec::new(),
            row_index: Vec::new(),
            row_value: Vec::new(),
            pushed_rows: 0,
            warm: Vec::new(),
        };
        b.set_bool("output_flag", opts.verbose);
        b.set_int("random_seed", opts.seed);
        b.set_int("threads", 1);
        b.set_double("mip_rel_gap", opts.mip_rel_gap);
        b.set_double("mip_heuristic_effort", opts.heuristic_effort);
        b
    }

    fn set_bool(&mut self, name: &str, value: bool) {
        let c = CString::new(name).unwrap();
        // SAFETY: valid handle and NUL-terminated option name.
        unsafe { Highs_setBoolOptionValue(self.ptr, c.as_ptr() as *const c_char, value as HighsInt) };
    }

    fn set_int(&mut self, name: &str, value: i32) {
        let c = CString::new(name).unwrap();
        // SAFETY: as above.
        unsafe { Highs_setIntOptionValue(self.ptr, c.as_ptr() as *const c_char, value as HighsInt) };
    }

    fn set_double(&mut self, name: &str, value: f64) {
        let c = CString::new(name).unwrap();
        // SAFETY: as above.
        unsafe { Highs_setDoubleOptionValue(self.ptr, c.as_ptr() as *const c_char, value) };
    }

    fn flush(&mut self) -> Result<(), MilpError> {
        let n = self.lb.len();
        let inf = unsafe { Highs_getInfinity(self.ptr) };
        let clamp = |v: f64| v.clamp(-inf, inf);
        if n > self.pushed_cols {
            let k = n - self.pushed_cols;
            let lo: Vec<f64> = self.lb[self.pushed_cols..].iter().map(|&v| clamp(v)).collect();
            let hi: Vec<f64> = self.ub[self.pushed_cols..].iter().map(|&v| clamp(v)).collect();
            let zeros = vec![0.0; k];
            // SAFETY: arrays have length k; no matrix entries are passed.
            let st = unsafe {
                Highs_addCols(
                    self.ptr,
                    k as HighsInt,
                    zeros.as_ptr(),
                    lo.as_ptr(),
                    hi.as_ptr(),
                    0,
                    std::ptr::null(),
                    std::ptr::null(),
                    std::ptr::null(),
                )
            };
            check(st, "addCols")?;
            let ints: Vec<HighsInt> = (self.pushed_cols..n)
                .filter(|&j| self.binary[j])
                .map(|j| j as HighsInt)
                .collect();
            if !ints.is_empty() {
                let kinds = vec![VAR_TYPE_INTEGER; ints.len()];
                // SAFETY: both arrays have the same length.
                let st = unsafe {
                    Highs_changeColsIntegralityBySet(self.ptr, ints.len() as HighsInt, ints.as_ptr(), kinds.as_ptr())
                };
                check(st, "changeColsIntegralityBySet")?;
            }
            self.pushed_cols = n;
        }
        let r = self.row_lb.len();
        if r > self.pushed_rows {
            let from = self.pushed_rows;
            let base = self.row_start[from];
            let starts: Vec<HighsInt> = self.row_start[from..].iter().map(|s| s - base).collect();
            let lo: Vec<f64> = self.row_lb[from..].iter().map(|&v| clamp(v)).collect();
            let hi: Vec<f64> = self.row_ub[from..].iter().map(|&v| clamp(v)).collect();
            let idx = &self.row_index[base as usize..];
            let val = &self.row_value[base as usize..];
            // SAFETY: CSR arrays are consistent by construction.
            let st = unsafe {
                Highs_addRows(
                    self.ptr,
                    (r - from) as HighsInt,
                    lo.as_ptr(),
                    hi.as_ptr(),
                    idx.len() as HighsInt,
                    starts.as_ptr(),
                    idx.as_ptr(),
                    val.as_ptr(),
                )
            };
            check(st, "addRows")?;
            self.pushed_rows = r;
        }
        if n > 0 {
            let lo: Vec<f64> = self.lb.iter().map(|&v| clamp(v)).collect();
            let hi: Vec<f64> = self.ub.iter().map(|&v| clamp(v)).collect();
            // SAFETY: full-length arrays over all columns.
            unsafe {
                check(
                    Highs_changeColsBoundsByRange(self.ptr, 0, (n - 1) as HighsInt, lo.as_ptr(), hi.as_ptr()),
                    "changeColsBoundsByRange",
                )?;
                check(
                    Highs_changeColsCostByRange(self.ptr, 0, (n - 1) as HighsInt, self.cost.as_ptr()),
                    "changeColsCostByRange",
                )?;
            }
        }
        let sense = match self.sense {
            Sense::Minimize => OBJECTIVE_SENSE_MINIMIZE,
            Sense::Maximize => OBJECTIVE_SENSE_MAXIMIZE,
        };
        // SAFETY: valid handle.
        unsafe {
            check(Highs_changeObjectiveSense(self.ptr, sense), "changeObjectiveSense")?;
            check(Highs_changeObjectiveOffset(self.ptr, self.offset), "changeObjectiveOffset")?;
        }
        Ok(())
    }
}

fn check(status: HighsInt, what: &str) -> Result<(), MilpError> {
    if status == STATUS_ERROR {
        Err(MilpError::Backend(format!("HiGHS {what} failed")))
    } else {
        Ok(())
    }
}

impl Drop for HighsBackend {
    fn drop(&mut self) {
        // SAFETY: pointer came from Highs_create and is dropped once.
        unsafe { Highs_destroy(self.ptr) };
    }
}

impl MilpBackend for HighsBackend {
    fn add_var(&mut self, lb: f64, ub: f64, kind: VarKind) -> Var {
        self.lb.push(lb);
        self.ub.push(ub);
        self.cost.push(0.0);
        self.binary.push(kind == VarKind::Binary);
        self.lb.len() - 1
    }

    fn add_row(&mut self, lb: f64, ub: f64, terms: &[(Var, f64)]) -> Row {
        self.row_start.push(self.row_index.len() as HighsInt);
        for &(v, c) in terms {
            if c != 0.0 {
                self.row_index.push(v as HighsInt);
                self.row_value.push(c);
            }
        }
        self.row_lb.push(lb);
        self.row_ub.push(ub);
        self.row_lb.len() - 1
    }

    fn set_objective(&mut self, terms: &[(Var, f64)], offset: f64, sense: Sense) {
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        for &(v, c) in terms {
            self.cost[v] += c;
        }
        self.offset = offset;
        self.sense = sense;
    }

    fn set_bounds(&mut self, var: Var, lb: f64, ub: f64) {
        self.lb[var] = lb;
        self.ub[var] = ub;
    }

    fn bounds(&self, var: Var) -> (f64, f64) {
        (self.lb[var], self.ub[var])
    }

    fn set_warm_start(&mut self, values: &[(Var, f64)]) {
        self.warm = values.to_vec();
    }

    fn solve(&mut self, time_limit: Option<Duration>) -> Result<SolveOutcome, MilpError> {
        self.flush()?;
        self.set_double("time_limit", time_limit.map_or(f64::INFINITY, |d| d.as_secs_f64()));
        if !self.warm.is_empty() {
            let idx: Vec<HighsInt> = self.warm.iter().map(|(v, _)| *v as HighsInt).collect();
            let val: Vec<f64> = self.warm.iter().map(|(_, x)| *x).collect();
            // SAFETY: equal-length arrays of valid column indices.
            unsafe { Highs_setSparseSolution(self.ptr, idx.len() as HighsInt, idx.as_ptr(), val.as_ptr()) };
            self.warm.clear();
        }
        // The run clock accumulates across runs; the time limit is per solve.
        // SAFETY: valid handle.
        let run = unsafe {
            Highs_zeroAllClocks(self.ptr);
            Highs_run(self.ptr)
        };
        check(run, "run")?;
        let model_status = unsafe { Highs_getModelStatus(self.ptr) };
        let status = match model_status {
            MODEL_STATUS_OPTIMAL => BackendStatus::Optimal,
            MODEL_STATUS_INFEASIBLE => BackendStatus::Infeasible,
            MODEL_STATUS_REACHED_TIME_LIMIT => BackendStatus::TimeLimit,
            _ => BackendStatus::Other,
        };
        let mut primal: HighsInt = 0;
        let key = CString::new("primal_solution_status").unwrap();
        // SAFETY: valid handle, output pointer to a local.
        unsafe { Highs_getIntInfoValue(self.ptr, key.as_ptr() as *const c_char, &mut primal) };
        let mut values = Vec::new();
        if primal == SOLUTION_STATUS_FEASIBLE || status == BackendStatus::Optimal {
            values = vec![0.0; self.lb.len()];
            // SAFETY: buffer sized to the number of columns; other outputs skipped.
            unsafe {
                Highs_getSolution(
                    self.ptr,
                    values.as_mut_ptr(),
                    std::ptr::null_mut(),
                    std::ptr::null_mut(),
                    std::ptr::null_mut(),
                )
            };
        }
        let objective = unsafe { Highs_getObjectiveValue(self.ptr) };
        Ok(SolveOutcome {
            status,
            values,
            objective,
        })
    }

    fn num_vars(&self) -> usize {
        self.lb.len()
    }

    fn num_rows(&self) -> usize {
        self.row_lb.len()
    }
}

/// Creates [`HighsBackend`] instances with shared options.
#[derive(Debug, Clone, Default)]
pub struct HighsFactory {
    pub options: HighsOptions,
}

impl BackendFactory for HighsFactory {
    type Backend = HighsBackend;
    fn create(&self) -> HighsBackend {
        HighsBackend::new(&self.options)
    }
}
