//! Linear programs: `min cᵀx` subject to linear rows and variable bounds.
//!
//! A thin layer over `minilp` (dense-free revised simplex). Simplex gives
//! vertex solutions accurate to round-off, which the membership test and
//! the known-plant benchmark rely on.

use std::panic::{self, catch_unwind, AssertUnwindSafe};
use std::sync::Once;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Error,
}

#[derive(Clone, Debug)]
pub struct LpResult {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Row {
    Eq,
    Le,
    Ge,
}

#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    obj: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    rows: Vec<(Vec<(usize, f64)>, Row, f64)>,
}

impl LinearProgram {
    pub fn new() -> Self {
        LinearProgram::default()
    }

    pub fn num_vars(&self) -> usize {
        self.obj.len()
    }

    /// New variable with objective weight `c` and bounds `lo..=hi`
    /// (infinite bounds allowed).
    pub fn add_var(&mut self, c: f64, lo: f64, hi: f64) -> usize {
        self.obj.push(c);
        self.bounds.push((lo, hi));
        self.obj.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, kind: Row, rhs: f64) {
        self.rows.push((coeffs, kind, rhs));
    }

    pub fn solve(&self) -> LpResult {
        quiet_minilp_panics();
        let failed = |status| LpResult {
            status,
            x: Vec::new(),
            objective: f64::NAN,
        };
        let mut p = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = self
            .obj
            .iter()
            .zip(&self.bounds)
            .map(|(&c, &b)| p.add_var(c, b))
            .collect();
        for (coeffs, kind, rhs) in &self.rows {
            let mut merged: Vec<(usize, f64)> = coeffs.clone();
            merged.sort_by_key(|&(j, _)| j);
            merged.dedup_by(|next, prev| {
                if next.0 == prev.0 {
                    prev.1 += next.1;
                    true
                } else {
                    false
                }
            });
            let mut expr = minilp::LinearExpr::empty();
            for (j, c) in merged {
                if c != 0.0 {
                    expr.add(vars[j], c);
                }
            }
            let op = match kind {
                Row::Eq => ComparisonOp::Eq,
                Row::Le => ComparisonOp::Le,
                Row::Ge => ComparisonOp::Ge,
            };
            p.add_constraint(expr, op, *rhs);
        }
        match catch_unwind(AssertUnwindSafe(|| p.solve())) {
            Ok(Ok(sol)) => LpResult {
                status: LpStatus::Optimal,
                x: vars.iter().map(|&v| sol[v]).collect(),
                objective: sol.objective(),
            },
            Ok(Err(minilp::Error::Infeasible)) => failed(LpStatus::Infeasible),
            Ok(Err(minilp::Error::Unbounded)) => failed(LpStatus::Unbounded),
            Err(_) => failed(LpStatus::Error),
        }
    }
}

// minilp occasionally unwraps a singular basis; those panics are caught
// below and reported as `LpStatus::Error`, so keep them off stderr.
fn quiet_minilp_panics() {
    static HOOK: Once = Once::new();
    HOOK.call_once(|| {
        let previous = panic::take_hook();
        panic::set_hook(Box::new(move |info| {
            let from_minilp = info.location().is_some_and(|l| l.file().contains("minilp"));
            if !from_minilp {
                previous(info);
            }
        }));
    });
}
