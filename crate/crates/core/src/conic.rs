//! A small conic modeling layer over an interior-point backend.
//!
//! Models are `min cᵀx` subject to a list of cone blocks, each block a list
//! of affine rows `r(x)` that must lie in the block's cone. PSD blocks list
//! the upper triangle of a symmetric matrix column by column, unscaled; the
//! backend applies whatever scaling its vectorization needs.

use std::collections::BTreeMap;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Affine expression `constant + Σ coef_j x_j`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub terms: BTreeMap<usize, f64>,
    pub constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        LinExpr::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn var(id: usize) -> Self {
        LinExpr::term(id, 1.0)
    }

    pub fn term(id: usize, coef: f64) -> Self {
        let mut e = LinExpr::zero();
        e.add_term(id, coef);
        e
    }

    pub fn add_term(&mut self, id: usize, coef: f64) {
        if coef == 0.0 {
            return;
        }
        let slot = self.terms.entry(id).or_insert(0.0);
        *slot += coef;
        if *slot == 0.0 {
            self.terms.remove(&id);
        }
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &LinExpr, s: f64) {
        if s == 0.0 {
            return;
        }
        self.constant += s * other.constant;
        for (&id, &c) in &other.terms {
            self.add_term(id, s * c);
        }
    }

    pub fn scaled(&self, s: f64) -> LinExpr {
        let mut out = LinExpr::zero();
        out.add_scaled(self, s);
        out
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.constant == 0.0
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(&j, &c)| c * x[j]).sum::<f64>()
    }
}

impl Add<&LinExpr> for &LinExpr {
    type Output = LinExpr;
    fn add(self, rhs: &LinExpr) -> LinExpr {
        let mut out = self.clone();
        out.add_scaled(rhs, 1.0);
        out
    }
}

impl Sub<&LinExpr> for &LinExpr {
    type Output = LinExpr;
    fn sub(self, rhs: &LinExpr) -> LinExpr {
        let mut out = self.clone();
        out.add_scaled(rhs, -1.0);
        out
    }
}

impl Neg for &LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for &LinExpr {
    type Output = LinExpr;
    fn mul(self, s: f64) -> LinExpr {
        self.scaled(s)
    }
}

impl AddAssign<&LinExpr> for LinExpr {
    fn add_assign(&mut self, rhs: &LinExpr) {
        self.add_scaled(rhs, 1.0);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConeKind {
    Zero,
    Nonneg,
    /// Symmetric `n × n` matrix, rows are the `n(n+1)/2` upper-triangle
    /// entries in column-major order.
    Psd(usize),
}

#[derive(Clone, Debug)]
pub struct ConeBlock {
    pub kind: ConeKind,
    pub rows: Vec<LinExpr>,
}

#[derive(Clone, Debug, Default)]
pub struct ConicModel {
    num_vars: usize,
    pub objective: LinExpr,
    pub blocks: Vec<ConeBlock>,
}

pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Position of entry `(i, j)`, `i <= j`, in the column-major upper triangle.
pub fn svec_index(i: usize, j: usize) -> usize {
    debug_assert!(i <= j);
    j * (j + 1) / 2 + i
}

impl ConicModel {
    pub fn new() -> Self {
        ConicModel::default()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn add_var(&mut self) -> usize {
        self.num_vars += 1;
        self.num_vars - 1
    }

    pub fn add_vars(&mut self, n: usize) -> Vec<usize> {
        (0..n).map(|_| self.add_var()).collect()
    }

    pub fn minimize(&mut self, obj: LinExpr) {
        self.objective = obj;
    }

    pub fn add_zero(&mut self, row: LinExpr) {
        self.push(ConeKind::Zero, vec![row]);
    }

    pub fn add_nonneg(&mut self, row: LinExpr) {
        self.push(ConeKind::Nonneg, vec![row]);
    }

    pub fn add_psd(&mut self, n: usize, entries: Vec<LinExpr>) {
        assert_eq!(
            entries.len(),
            svec_len(n),
            "PSD block needs n(n+1)/2 entries"
        );
        if n == 1 {
            self.add_nonneg(entries.into_iter().next().expect("one entry"));
            return;
        }
        self.blocks.push(ConeBlock {
            kind: ConeKind::Psd(n),
            rows: entries,
        });
    }

    fn push(&mut self, kind: ConeKind, rows: Vec<LinExpr>) {
        if let Some(last) = self.blocks.last_mut() {
            if last.kind == kind {
                last.rows.extend(rows);
                return;
            }
        }
        self.blocks.push(ConeBlock { kind, rows });
    }

    pub fn stats(&self) -> ModelStats {
        let mut s = ModelStats {
            vars: self.num_vars,
            ..ModelStats::default()
        };
        for b in &self.blocks {
            match b.kind {
                ConeKind::Zero => s.zero_rows += b.rows.len(),
                ConeKind::Nonneg => s.nonneg_rows += b.rows.len(),
                ConeKind::Psd(n) => {
                    s.psd_blocks += 1;
                    s.psd_rows += b.rows.len();
                    s.max_psd = s.max_psd.max(n);
                }
            }
        }
        s
    }

    /// Largest violation of any cone row at `x`, using the smallest
    /// eigenvalue for PSD blocks.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for b in &self.blocks {
            match b.kind {
                ConeKind::Zero => {
                    for r in &b.rows {
                        worst = worst.max(r.eval(x).abs());
                    }
                }
                ConeKind::Nonneg => {
                    for r in &b.rows {
                        worst = worst.max(-r.eval(x));
                    }
                }
                ConeKind::Psd(n) => {
                    let vals: Vec<f64> = b.rows.iter().map(|r| r.eval(x)).collect();
                    worst = worst.max(-min_eigenvalue(&unpack_symmetric(n, &vals)));
                }
            }
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelStats {
    pub vars: usize,
    pub zero_rows: usize,
    pub nonneg_rows: usize,
    pub psd_blocks: usize,
    pub psd_rows: usize,
    pub max_psd: usize,
}

pub fn unpack_symmetric(n: usize, upper: &[f64]) -> nalgebra::DMatrix<f64> {
    let mut m = nalgebra::DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = upper[svec_index(i, j)];
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

pub fn min_eigenvalue(m: &nalgebra::DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// Converged to reduced accuracy.
    AlmostOptimal,
    Infeasible,
    Unbounded,
    /// Iteration/time limit or numerical trouble.
    Failed,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::AlmostOptimal)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: u32,
    pub solve_seconds: f64,
    pub solver: String,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("backend rejected the problem: {0}")]
    Backend(String),
    #[error("unknown solver '{0}'")]
    Unknown(String),
}

pub trait ConicSolver: Send + Sync {
    fn name(&self) -> String;
    fn solve(&self, model: &ConicModel) -> Result<ConicSolution, SolverError>;
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: u32,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 200,
            verbose: false,
        }
    }
}

/// Deserializes `null` (how JSON writes non-finite floats) as NaN.
pub fn f64_or_nan<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// Environment variable naming the conic backend.
pub const SOLVER_ENV: &str = "SUPERSTAB_SOLVER";

/// Backend chosen by [`SOLVER_ENV`] (default `clarabel`).
pub fn solver_from_env(opts: SolverOptions) -> Result<Box<dyn ConicSolver>, SolverError> {
    let name = std::env::var(SOLVER_ENV).unwrap_or_else(|_| "clarabel".into());
    match name.to_ascii_lowercase().as_str() {
        "clarabel" | "" => Ok(Box::new(ClarabelSolver { opts })),
        other => Err(SolverError::Unknown(other.to_string())),
    }
}

#[derive(Clone, Debug, Default)]
pub struct ClarabelSolver {
    pub opts: SolverOptions,
}

impl ConicSolver for ClarabelSolver {
    fn name(&self) -> String {
        "clarabel 0.11".into()
    }

    fn solve(&self, model: &ConicModel) -> Result<ConicSolution, SolverError> {
        use clarabel::algebra::CscMatrix;
        use clarabel::solver::{
            DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, PSDTriangleConeT,
            SolverStatus, SupportedConeT, ZeroConeT,
        };

        let started = Instant::now();
        let n = model.num_vars;
        // zero rows first, then nonneg, then PSD blocks; Clarabel wants
        // `A x + s = b`, so a row r(x) = c + a·x becomes A = -a, b = c
        let mut order: Vec<&ConeBlock> = Vec::new();
        for kind in [ConeKind::Zero, ConeKind::Nonneg] {
            order.extend(model.blocks.iter().filter(|b| b.kind == kind));
        }
        order.extend(
            model
                .blocks
                .iter()
                .filter(|b| matches!(b.kind, ConeKind::Psd(_))),
        );

        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut rhs = Vec::new();
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        let mut zero = 0usize;
        let mut nonneg = 0usize;
        let sqrt2 = std::f64::consts::SQRT_2;
        for b in &order {
            let scales: Vec<f64> = match b.kind {
                ConeKind::Psd(d) => (0..d)
                    .flat_map(|j| (0..=j).map(move |i| if i == j { 1.0 } else { sqrt2 }))
                    .collect(),
                _ => vec![1.0; b.rows.len()],
            };
            for (k, r) in b.rows.iter().enumerate() {
                let s = scales[k];
                let row = rhs.len();
                for (&j, &c) in &r.terms {
                    cols[j].push((row, -c * s));
                }
                rhs.push(r.constant * s);
            }
            match b.kind {
                ConeKind::Zero => zero += b.rows.len(),
                ConeKind::Nonneg => nonneg += b.rows.len(),
                ConeKind::Psd(d) => cones.push(PSDTriangleConeT(d)),
            }
        }
        let mut head = Vec::new();
        if zero > 0 {
            head.push(ZeroConeT(zero));
        }
        if nonneg > 0 {
            head.push(NonnegativeConeT(nonneg));
        }
        head.extend(cones);
        let cones = head;

        let m = rhs.len();
        let mut colptr = Vec::with_capacity(n + 1);
        let mut rowval = Vec::new();
        let mut nzval = Vec::new();
        colptr.push(0);
        for col in &mut cols {
            col.sort_by_key(|&(r, _)| r);
            for &(r, v) in col.iter() {
                rowval.push(r);
                nzval.push(v);
            }
            colptr.push(rowval.len());
        }
        let a = CscMatrix::new(m, n, colptr, rowval, nzval);
        let p = CscMatrix::<f64>::zeros((n, n));
        let mut q = vec![0.0; n];
        for (&j, &c) in &model.objective.terms {
            q[j] = c;
        }
        let settings = DefaultSettingsBuilder::default()
            .verbose(self.opts.verbose)
            .max_iter(self.opts.max_iter)
            .tol_feas(self.opts.tol)
            .tol_gap_abs(self.opts.tol)
            .tol_gap_rel(self.opts.tol)
            .build()
            .map_err(|e| SolverError::Backend(e.to_string()))?;
        let mut solver = DefaultSolver::new(&p, &q, &a, &rhs, &cones, settings)
            .map_err(|e| SolverError::Backend(format!("{e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::AlmostSolved => SolveStatus::AlmostOptimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                SolveStatus::Infeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                SolveStatus::Unbounded
            }
            _ => SolveStatus::Failed,
        };
        Ok(ConicSolution {
            status,
            objective: model.objective.eval(&sol.x),
            x: sol.x.clone(),
            iterations: sol.iterations,
            solve_seconds: started.elapsed().as_secs_f64(),
            solver: self.name(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn svec_positions() {
        assert_eq!(svec_index(0, 0), 0);
        assert_eq!(svec_index(0, 1), 1);
        assert_eq!(svec_index(1, 1), 2);
        assert_eq!(svec_index(0, 2), 3);
        assert_eq!(svec_index(2, 2), 5);
    }

    #[test]
    fn linexpr_arithmetic() {
        let mut e = LinExpr::var(0);
        e.add_term(1, 2.0);
        e.add_term(0, -1.0);
        assert_eq!(e.terms.len(), 1);
        let f = &e + &LinExpr::constant(3.0);
        assert_eq!(f.eval(&[10.0, 1.0]), 5.0);
        assert!((&f - &f).is_zero());
    }

    #[test]
    fn tiny_lp() {
        // min x + y s.t. x >= 1, y >= 2, x + y == 3.5
        let mut m = ConicModel::new();
        let x = m.add_var();
        let y = m.add_var();
        m.minimize(&LinExpr::var(x) + &LinExpr::var(y));
        m.add_nonneg(&LinExpr::var(x) - &LinExpr::constant(1.0));
        m.add_nonneg(&LinExpr::var(y) - &LinExpr::constant(2.0));
        m.add_zero(&(&LinExpr::var(x) + &LinExpr::var(y)) - &LinExpr::constant(3.5));
        let s = ClarabelSolver::default().solve(&m).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(s.objective, 3.5, epsilon = 1e-7);
    }

    #[test]
    fn small_psd() {
        // min t s.t. [[t, 1, 0], [1, t, 1], [0, 1, t]] ⪰ 0  ->  t = √2
        let mut m = ConicModel::new();
        let t = m.add_var();
        m.minimize(LinExpr::var(t));
        let one = LinExpr::constant(1.0);
        let entries = vec![
            LinExpr::var(t),
            one.clone(),
            LinExpr::var(t),
            LinExpr::zero(),
            one,
            LinExpr::var(t),
        ];
        m.add_psd(3, entries);
        let s = ClarabelSolver::default().solve(&m).unwrap();
        assert!(s.status.has_solution());
        assert_abs_diff_eq!(s.objective, std::f64::consts::SQRT_2, epsilon = 1e-6);
        assert!(m.max_violation(&s.x) < 1e-7);
    }

    #[test]
    fn infeasible_detected() {
        let mut m = ConicModel::new();
        let x = m.add_var();
        m.add_nonneg(&LinExpr::var(x) - &LinExpr::constant(1.0));
        m.add_nonneg(&LinExpr::constant(0.0) - &LinExpr::var(x));
        let s = ClarabelSolver::default().solve(&m).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
    }

    #[test]
    fn large_psd_block() {
        // min tr X s.t. X ⪰ 0, X_ii >= 1; blocks past 32 exercise the
        // blocked LAPACK paths
        for n in [8usize, 40] {
            let mut m = ConicModel::new();
            let v = m.add_vars(svec_len(n));
            let mut obj = LinExpr::zero();
            for i in 0..n {
                let d = v[svec_index(i, i)];
                obj.add_term(d, 1.0);
                m.add_nonneg(&LinExpr::var(d) - &LinExpr::constant(1.0));
            }
            m.minimize(obj);
            m.add_psd(n, v.iter().map(|&j| LinExpr::var(j)).collect());
            let s = ClarabelSolver::default().solve(&m).unwrap();
            assert_eq!(s.status, SolveStatus::Optimal, "n = {n}");
            assert_abs_diff_eq!(s.objective, n as f64, epsilon = 1e-6);
        }
    }
}
