//! Synthesis drivers.
//!
//! Both programs minimize `γ` over `(γ, ã, b̃, m)` subject to
//!
//! ```text
//! γ - Σ_i m_i >= 0,   m_i - a_cl_i >= 0,   m_i + a_cl_i >= 0
//! ```
//!
//! on the consistent plants, each certified by one Positivstellensatz
//! instance: over the full `(a, b, Δu, Δy)` set for [`Method::Full`], or
//! through the noise-free alternatives certificate for
//! [`Method::Alternatives`]. Every instance lands in one conic model and
//! one solver call.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arx::{
    closed_loop_len, closed_loop_stencil, plant_vars, ArxModel, ClosedLoopTerm, Compensator,
};
use crate::certify::{
    alternatives_constraints, alternatives_constraints_w, archimedean_augment, diagnose_putinar,
    multiplier_half_degree, parameter_box, AlternativesCert, CertDiagnostics, CertifyError,
    Putinar,
};
use crate::conic::{
    svec_len, ConicModel, ConicSolver, LinExpr, ModelStats, SolveStatus, SolverError, SolverOptions,
};
use crate::data::{consistency_set, BsaSet, Dataset};
use crate::lp::{LinearProgram, LpStatus, Row};
use crate::poly::{binomial, Monomial, Polynomial};
use crate::sos::PolyExpr;

/// Gram re-expansion must match within this.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;
/// Coupling identities must hold within this.
pub const COUPLING_TOL: f64 = 1e-6;
/// Smallest Gram eigenvalue accepted as PSD.
pub const EIGENVALUE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Full,
    Alternatives,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Method::Full),
            "alt" | "alternatives" => Ok(Method::Alternatives),
            other => Err(format!("unknown method '{other}' (expected full or alt)")),
        }
    }
}

/// Refusal thresholds checked before assembly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SizeGuard {
    pub enabled: bool,
    pub max_gram_dim: usize,
    /// Budget for the dense PSD blocks of the solver's KKT system.
    pub max_kkt_bytes: f64,
}

impl Default for SizeGuard {
    fn default() -> Self {
        SizeGuard {
            enabled: true,
            max_gram_dim: 2000,
            max_kkt_bytes: 3e9,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthesisProblem {
    pub data: Dataset,
    pub ctrl_na: usize,
    pub ctrl_nb: usize,
    pub degree: u32,
    pub method: Method,
    pub radius_a: f64,
    pub radius_b: f64,
    pub gamma_cap: f64,
    /// Certify each polynomial minus this margin.
    pub margin: f64,
    pub solver: SolverOptions,
    pub guard: SizeGuard,
}

impl SynthesisProblem {
    pub fn new(data: Dataset, ctrl_na: usize, ctrl_nb: usize, degree: u32, method: Method) -> Self {
        SynthesisProblem {
            data,
            ctrl_na,
            ctrl_nb,
            degree,
            method,
            radius_a: 2.0,
            radius_b: 2.0,
            gamma_cap: 10.0,
            margin: 0.0,
            solver: SolverOptions::default(),
            guard: SizeGuard::default(),
        }
    }

    pub fn with_degree(&self, degree: u32) -> Self {
        SynthesisProblem {
            degree,
            ..self.clone()
        }
    }

    pub fn n_cl(&self) -> usize {
        closed_loop_len(self.data.n_a, self.data.n_b, self.ctrl_na, self.ctrl_nb)
    }

    /// Parameter box Π.
    pub fn pi(&self) -> BsaSet {
        parameter_box(self.data.n_a, self.data.n_b, self.radius_a, self.radius_b)
    }

    /// The `(a, b, Δu, Δy)` set of the full program: consistency
    /// constraints, Π's per-coordinate bounds, and a ball over everything.
    pub fn full_set(&self) -> BsaSet {
        let data = &self.data;
        let mut set = consistency_set(data);
        let pi = self.pi();
        for g in pi.inequalities.iter().take(data.n_params()) {
            set.inequalities.push(g.with_vars(&set.vars));
        }
        let (nu, ny) = data.noise_dims();
        let r = data.n_a as f64 * self.radius_a.powi(2)
            + data.n_b as f64 * self.radius_b.powi(2)
            + nu as f64 * data.eps_u.powi(2)
            + ny as f64 * data.eps_y.powi(2);
        archimedean_augment(&set, r)
    }

    /// Gram dimensions of every PSD block the assembly would create.
    pub fn gram_dims(&self) -> Vec<usize> {
        let d = self.degree;
        let instances = 2 * self.n_cl() + 1;
        let putinar = |set_vars: usize, degs: &[u32]| -> Vec<usize> {
            let mut v = vec![binomial((set_vars + d as usize) as u64, d as u64) as usize];
            for &g in degs {
                if let Some(k) = multiplier_half_degree(d, g) {
                    v.push(binomial((set_vars + k as usize) as u64, k as u64) as usize);
                }
            }
            v
        };
        let one = match self.method {
            Method::Full => {
                let set = self.full_set();
                let degs: Vec<u32> = set.inequalities.iter().map(|g| g.degree()).collect();
                putinar(set.num_vars(), &degs)
            }
            Method::Alternatives => {
                let pi = self.pi();
                let degs: Vec<u32> = pi.inequalities.iter().map(|g| g.degree()).collect();
                let block = putinar(pi.num_vars(), &degs);
                let (nu, ny) = self.data.noise_dims();
                let mut pairs = 0;
                if self.data.eps_u > 0.0 {
                    pairs += nu;
                }
                if self.data.eps_y > 0.0 {
                    pairs += ny;
                }
                if self.data.eps_w.is_some() {
                    pairs += self.data.horizon;
                }
                let mut v = Vec::new();
                for _ in 0..(2 * pairs + 1) {
                    v.extend(&block);
                }
                v
            }
        };
        let mut all = Vec::with_capacity(one.len() * instances);
        for _ in 0..instances {
            all.extend(&one);
        }
        all
    }

    /// Refuses assemblies beyond the guard; the message names the largest
    /// Gram dimension.
    pub fn check_size(&self) -> Result<(), SynthError> {
        if !self.guard.enabled {
            return Ok(());
        }
        let dims = self.gram_dims();
        let max = dims.iter().copied().max().unwrap_or(0);
        let bytes: f64 = dims
            .iter()
            .filter(|&&n| n > 1)
            .map(|&n| (svec_len(n) as f64).powi(2) * 8.0)
            .sum();
        if max > self.guard.max_gram_dim || bytes > self.guard.max_kkt_bytes {
            return Err(SynthError::TooLarge {
                max_gram_dim: max,
                estimated_bytes: bytes,
                report: Box::new(psatz_sizes(
                    self.data.n_a,
                    self.data.n_b,
                    self.data.horizon,
                    self.degree,
                    self.method,
                )),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(
        "refusing to assemble: largest Gram dimension {max_gram_dim}, about {:.1} GB of dense PSD blocks (disable the size guard to force)",
        estimated_bytes / 1e9
    )]
    TooLarge {
        max_gram_dim: usize,
        estimated_bytes: f64,
        report: Box<SizeReport>,
    },
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Certify(#[from] CertifyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("LP failed with status {0:?}")]
    Lp(LpStatus),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthStatus {
    Superstabilizing,
    CertifiedNotSuperstable,
    Infeasible,
    SolverError,
}

/// Solved certificates with the primal point they refer to.
#[derive(Clone, Debug)]
pub enum Certificates {
    Full {
        set: BsaSet,
        certs: Vec<Putinar>,
    },
    Alternatives {
        pi: BsaSet,
        certs: Vec<AlternativesCert>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub method: Method,
    pub degree: u32,
    pub status: SynthStatus,
    #[serde(deserialize_with = "crate::conic::f64_or_nan")]
    pub gamma: f64,
    pub compensator: Compensator,
    /// Lifted bounds `m_i >= |a_cl_i|` as polynomials in the plant.
    pub m: Vec<Polynomial>,
    pub diagnostics: CertDiagnostics,
    pub residuals_ok: bool,
    pub sizes: SizeReport,
    pub model: ModelStats,
    pub solver: String,
    pub solver_status: SolveStatus,
    pub iterations: u32,
    pub solve_seconds: f64,
    pub wall_seconds: f64,
    #[serde(skip)]
    pub certificates: Option<Certificates>,
    #[serde(skip)]
    pub x: Vec<f64>,
}

impl SynthesisResult {
    /// `γ - Σ m_i` followed by `m_i - a_cl_i, m_i + a_cl_i` for each `i`,
    /// at the solved compensator: every one is certified nonnegative.
    pub fn certified_polynomials(&self, n_a: usize, n_b: usize) -> Vec<Polynomial> {
        let vars = plant_vars(n_a, n_b);
        let a_cl = crate::arx::closed_loop_symbolic(n_a, n_b, &self.compensator);
        let mut out = Vec::with_capacity(2 * a_cl.len() + 1);
        let mut top = Polynomial::constant(&vars, self.gamma);
        for m in &self.m {
            top = &top - m;
        }
        out.push(top);
        for (m, c) in self.m.iter().zip(&a_cl) {
            out.push(m - c);
            out.push(m + c);
        }
        out
    }

    /// Full certificate dump: every multiplier and Gram matrix.
    pub fn certificates_json(&self) -> serde_json::Value {
        match &self.certificates {
            None => serde_json::Value::Null,
            Some(Certificates::Full { set, certs }) => {
                serde_json::Value::Array(certs.iter().map(|c| c.to_json(set, &self.x)).collect())
            }
            Some(Certificates::Alternatives { pi, certs }) => {
                serde_json::Value::Array(certs.iter().map(|c| c.to_json(pi, &self.x)).collect())
            }
        }
    }
}

/// Decision handles shared by both programs.
struct Handles {
    gamma: usize,
    ctrl_a: Vec<usize>,
    ctrl_b: Vec<usize>,
    m: Vec<PolyExpr>,
    targets: Vec<PolyExpr>,
}

/// `a_cl` over plant monomials with coefficients affine in `(ã, b̃)`.
fn closed_loop_expr(n_a: usize, n_b: usize, ctrl_a: &[usize], ctrl_b: &[usize]) -> Vec<PolyExpr> {
    closed_loop_stencil(n_a, n_b, ctrl_a.len(), ctrl_b.len())
        .iter()
        .map(|terms| {
            let mut p = PolyExpr::zero();
            for t in terms {
                let (m, e) = match *t {
                    ClosedLoopTerm::PlantA(i) => (Monomial::var(i - 1), LinExpr::constant(1.0)),
                    ClosedLoopTerm::CtrlA(j) => (Monomial::one(), LinExpr::var(ctrl_a[j - 1])),
                    ClosedLoopTerm::PlantACtrlA(i, j) => {
                        (Monomial::var(i - 1), LinExpr::var(ctrl_a[j - 1]))
                    }
                    ClosedLoopTerm::PlantBCtrlB(i, j) => {
                        (Monomial::var(n_a + i - 1), LinExpr::var(ctrl_b[j - 1]))
                    }
                };
                p.add_at(m, &e, 1.0);
            }
            p
        })
        .collect()
}

fn handles(model: &mut ConicModel, problem: &SynthesisProblem) -> Handles {
    let (n_a, n_b) = (problem.data.n_a, problem.data.n_b);
    let gamma = model.add_var();
    model.add_nonneg(LinExpr::var(gamma));
    model.add_nonneg(&LinExpr::constant(problem.gamma_cap) + &LinExpr::term(gamma, -1.0));
    model.minimize(LinExpr::var(gamma));
    let ctrl_a = model.add_vars(problem.ctrl_na);
    let ctrl_b = model.add_vars(problem.ctrl_nb);
    let a_cl = closed_loop_expr(n_a, n_b, &ctrl_a, &ctrl_b);
    let m: Vec<PolyExpr> = a_cl
        .iter()
        .map(|_| PolyExpr::free(model, n_a + n_b, 2 * problem.degree))
        .collect();
    let mut top = PolyExpr::constant(LinExpr::var(gamma));
    for mi in &m {
        top.add_scaled(mi, -1.0);
    }
    let mut targets = vec![top];
    for (mi, ci) in m.iter().zip(&a_cl) {
        let mut lo = mi.clone();
        lo.add_scaled(ci, -1.0);
        let mut hi = mi.clone();
        hi.add_scaled(ci, 1.0);
        targets.push(lo);
        targets.push(hi);
    }
    Handles {
        gamma,
        ctrl_a,
        ctrl_b,
        m,
        targets,
    }
}

fn validate(problem: &SynthesisProblem) -> Result<(), SynthError> {
    if problem.degree < 1 {
        return Err(SynthError::Invalid("degree must be at least 1".into()));
    }
    if problem.ctrl_na < 1 || problem.ctrl_nb < 1 {
        return Err(SynthError::Invalid(
            "controller orders must be at least 1".into(),
        ));
    }
    if !(problem.gamma_cap > 0.0) || problem.margin < 0.0 {
        return Err(SynthError::Invalid(
            "gamma cap must be positive and margin nonnegative".into(),
        ));
    }
    Ok(())
}

fn finish(
    problem: &SynthesisProblem,
    model: &ConicModel,
    h: &Handles,
    solver: &dyn ConicSolver,
    started: Instant,
    diagnose: impl Fn(&[f64]) -> CertDiagnostics,
    certificates: Certificates,
) -> Result<SynthesisResult, SynthError> {
    let sol = solver.solve(model)?;
    let (n_a, n_b) = (problem.data.n_a, problem.data.n_b);
    let vars = plant_vars(n_a, n_b);
    let has = sol.status.has_solution();
    let x = &sol.x;
    let gamma = if has { x[h.gamma].max(0.0) } else { f64::NAN };
    let compensator = if has {
        Compensator {
            a: h.ctrl_a.iter().map(|&j| x[j]).collect(),
            b: h.ctrl_b.iter().map(|&j| x[j]).collect(),
        }
    } else {
        Compensator::zero(problem.ctrl_na, problem.ctrl_nb)
    };
    let diagnostics = if has {
        diagnose(x)
    } else {
        CertDiagnostics::empty()
    };
    let residuals_ok = has
        && diagnostics.reconstruction <= RECONSTRUCTION_TOL
        && diagnostics.coupling <= COUPLING_TOL
        && diagnostics.min_eigenvalue >= -EIGENVALUE_TOL;
    let status = match sol.status {
        SolveStatus::Optimal | SolveStatus::AlmostOptimal if gamma < 1.0 => {
            SynthStatus::Superstabilizing
        }
        SolveStatus::Optimal | SolveStatus::AlmostOptimal => SynthStatus::CertifiedNotSuperstable,
        SolveStatus::Infeasible => SynthStatus::Infeasible,
        _ => SynthStatus::SolverError,
    };
    Ok(SynthesisResult {
        method: problem.method,
        degree: problem.degree,
        status,
        gamma,
        compensator,
        m: if has {
            h.m.iter().map(|p| p.to_polynomial(&vars, x)).collect()
        } else {
            Vec::new()
        },
        diagnostics,
        residuals_ok,
        sizes: psatz_sizes(
            n_a,
            n_b,
            problem.data.horizon,
            problem.degree,
            problem.method,
        ),
        model: model.stats(),
        solver: sol.solver.clone(),
        solver_status: sol.status,
        iterations: sol.iterations,
        solve_seconds: sol.solve_seconds,
        wall_seconds: started.elapsed().as_secs_f64(),
        certificates: has.then_some(certificates),
        x: sol.x,
    })
}

/// Full program: Putinar certificates over `(a, b, Δu, Δy)`.
pub fn synth_full(
    problem: &SynthesisProblem,
    solver: &dyn ConicSolver,
) -> Result<SynthesisResult, SynthError> {
    validate(problem)?;
    problem.check_size()?;
    let started = Instant::now();
    let set = problem.full_set();
    let mut model = ConicModel::new();
    let h = handles(&mut model, problem);
    let mut certs = Vec::with_capacity(h.targets.len());
    for t in &h.targets {
        certs.push(crate::certify::putinar_constraints(
            &mut model,
            t,
            &set,
            problem.degree,
            problem.margin,
        )?);
    }
    let diagnose = |x: &[f64]| {
        let mut out = CertDiagnostics::empty();
        for (c, t) in certs.iter().zip(&h.targets) {
            let mut want = t.clone();
            want.add_at(Monomial::one(), &LinExpr::constant(-problem.margin), 1.0);
            let d = diagnose_putinar(c, &want, &set, x);
            out.reconstruction = out.reconstruction.max(d.reconstruction);
            out.min_eigenvalue = out.min_eigenvalue.min(d.min_eigenvalue);
        }
        out
    };
    let certificates = Certificates::Full {
        set: set.clone(),
        certs: certs.clone(),
    };
    finish(problem, &model, &h, solver, started, diagnose, certificates)
}

/// Alternatives program; uses the process-noise certificate when the
/// dataset carries `ε_w`.
pub fn synth_alternatives(
    problem: &SynthesisProblem,
    solver: &dyn ConicSolver,
) -> Result<SynthesisResult, SynthError> {
    validate(problem)?;
    problem.check_size()?;
    let started = Instant::now();
    let pi = problem.pi();
    let data = &problem.data;
    let mut model = ConicModel::new();
    let h = handles(&mut model, problem);
    let build = if data.eps_w.is_some() {
        alternatives_constraints_w
    } else {
        alternatives_constraints
    };
    let mut certs = Vec::with_capacity(h.targets.len());
    for t in &h.targets {
        certs.push(build(
            &mut model,
            t,
            data,
            &pi,
            problem.degree,
            problem.margin,
        )?);
    }
    let diagnose = |x: &[f64]| {
        let mut out = CertDiagnostics::empty();
        for (c, t) in certs.iter().zip(&h.targets) {
            let d = c.diagnose(t, data, &pi, problem.margin, x);
            out.reconstruction = out.reconstruction.max(d.reconstruction);
            out.coupling = out.coupling.max(d.coupling);
            out.min_eigenvalue = out.min_eigenvalue.min(d.min_eigenvalue);
        }
        out
    };
    let certificates = Certificates::Alternatives {
        pi: pi.clone(),
        certs: certs.clone(),
    };
    finish(problem, &model, &h, solver, started, diagnose, certificates)
}

pub fn synthesize(
    problem: &SynthesisProblem,
    solver: &dyn ConicSolver,
) -> Result<SynthesisResult, SynthError> {
    match problem.method {
        Method::Full => synth_full(problem, solver),
        Method::Alternatives => synth_alternatives(problem, solver),
    }
}

/// Known-plant benchmark: minimize `‖a_cl‖₁` over the compensator by LP.
/// Zero orders are allowed.
pub fn model_based_superstab(
    plant: &ArxModel,
    ctrl_na: usize,
    ctrl_nb: usize,
) -> Result<(f64, Compensator), SynthError> {
    let mut lp = LinearProgram::new();
    let inf = f64::INFINITY;
    let gamma = lp.add_var(1.0, 0.0, inf);
    let ca: Vec<usize> = (0..ctrl_na).map(|_| lp.add_var(0.0, -inf, inf)).collect();
    let cb: Vec<usize> = (0..ctrl_nb).map(|_| lp.add_var(0.0, -inf, inf)).collect();
    let stencil = closed_loop_stencil(plant.n_a(), plant.n_b(), ctrl_na, ctrl_nb);
    let mut sum = vec![(gamma, -1.0)];
    for terms in &stencil {
        let m = lp.add_var(0.0, 0.0, inf);
        sum.push((m, 1.0));
        let mut row = Vec::new();
        let mut c = 0.0;
        for t in terms {
            match *t {
                ClosedLoopTerm::PlantA(i) => c += plant.a[i - 1],
                ClosedLoopTerm::CtrlA(j) => row.push((ca[j - 1], 1.0)),
                ClosedLoopTerm::PlantACtrlA(i, j) => row.push((ca[j - 1], plant.a[i - 1])),
                ClosedLoopTerm::PlantBCtrlB(i, j) => row.push((cb[j - 1], plant.b[i - 1])),
            }
        }
        // -m <= row + c <= m
        let mut lo = row.clone();
        lo.push((m, 1.0));
        lp.add_row(lo, Row::Ge, -c);
        let mut hi = row;
        hi.push((m, -1.0));
        lp.add_row(hi, Row::Le, -c);
    }
    lp.add_row(sum, Row::Le, 0.0);
    let r = lp.solve();
    if r.status != LpStatus::Optimal {
        return Err(SynthError::Lp(r.status));
    }
    Ok((
        r.x[gamma],
        Compensator {
            a: ca.iter().map(|&j| r.x[j]).collect(),
            b: cb.iter().map(|&j| r.x[j]).collect(),
        },
    ))
}

/// Hierarchy stops once `γ_d < 1` improves on `γ_{d-1}` by less than this.
pub const HIERARCHY_STOP: f64 = 1e-4;
/// `γ_d` at or below this cannot improve and also stops the hierarchy.
pub const GAMMA_FLOOR: f64 = 1e-6;

#[derive(Debug)]
pub struct HierarchyReport {
    pub levels: Vec<(u32, Result<SynthesisResult, SynthError>)>,
    /// `γ_{d+1} <= γ_d + 1e-6` across consecutive solved levels.
    pub monotone: bool,
}

impl HierarchyReport {
    /// Last level that produced a solution.
    pub fn best(&self) -> Option<&SynthesisResult> {
        self.levels
            .iter()
            .rev()
            .filter_map(|(_, r)| r.as_ref().ok())
            .find(|r| r.gamma.is_finite())
    }
}

/// Runs `d = problem.degree..=d_max`, continuing past failed levels.
pub fn hierarchy(
    problem: &SynthesisProblem,
    d_max: u32,
    solver: &dyn ConicSolver,
) -> HierarchyReport {
    let mut levels = Vec::new();
    let mut prev: Option<f64> = None;
    let mut monotone = true;
    for d in problem.degree.max(1)..=d_max.max(problem.degree.max(1)) {
        let r = synthesize(&problem.with_degree(d), solver);
        let gamma = r.as_ref().ok().map(|r| r.gamma).filter(|g| g.is_finite());
        levels.push((d, r));
        if let Some(g) = gamma {
            if let Some(p) = prev {
                if g > p + 1e-6 {
                    monotone = false;
                }
                if g < 1.0 && p - g < HIERARCHY_STOP {
                    break;
                }
            }
            if g <= GAMMA_FLOOR {
                break;
            }
            prev = Some(g);
        }
    }
    HierarchyReport { levels, monotone }
}

/// One multiplier family of a single Positivstellensatz instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeEntry {
    pub name: String,
    pub count: usize,
    /// Gram dimension, or vector length for `μ`.
    pub dim: u128,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeReport {
    pub method: Method,
    pub n_a: usize,
    pub n_b: usize,
    pub horizon: usize,
    pub degree: u32,
    pub entries: Vec<SizeEntry>,
}

impl SizeReport {
    pub fn get(&self, name: &str) -> Option<&SizeEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Multiplier counts and sizes of one Positivstellensatz instance.
///
/// Full works over `M = 2(N + T) - 1` indeterminates: `σ₀` has Gram
/// dimension `C(M+d, d)`, the noise-box multipliers `ψ, ζ` have
/// `C(M+d-1, d-1)` and each equality multiplier `μ` is a vector of
/// `C(M+2d-2, 2d-2)` coefficients. Alternatives works over the `N` plant
/// parameters: Gram dimension `C(N+d, d)` and `μ` of length `C(N+2d-1, 2d-1)`.
pub fn psatz_sizes(n_a: usize, n_b: usize, horizon: usize, d: u32, method: Method) -> SizeReport {
    let n = (n_a + n_b) as u64;
    let t = horizon as u64;
    let d = d as u64;
    let (sigma, psi, mu) = match method {
        Method::Full => {
            let m = 2 * (n + t) - 1;
            (
                binomial(m + d, d),
                binomial(m + d - 1, d.saturating_sub(1)),
                binomial(m + 2 * d - 2, (2 * d).saturating_sub(2)),
            )
        }
        Method::Alternatives => (
            binomial(n + d, d),
            binomial(n + d, d),
            binomial(n + 2 * d - 1, (2 * d).saturating_sub(1)),
        ),
    };
    let entry = |name: &str, count: usize, dim: u128| SizeEntry {
        name: name.into(),
        count,
        dim,
    };
    SizeReport {
        method,
        n_a,
        n_b,
        horizon,
        degree: d as u32,
        entries: vec![
            entry("sigma0", 1, sigma),
            entry("psi", 2 * (n_b + horizon - 1), psi),
            entry("zeta", 2 * (n_a + horizon), psi),
            entry("mu", horizon, mu),
        ],
    }
}
