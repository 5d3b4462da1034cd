//! Recorded trajectories, error-in-variables corruption, consistency sets
//! and the membership test.
//!
//! A dataset holds `û` over `(1 - n_b)..=(T - 1)` and `ŷ` over
//! `(1 - n_a)..=T`. A plant `(a, b)` is consistent with it when there are
//! noise sequences `Δu`, `Δy` inside their boxes such that for every
//! `t = 1..T`
//!
//! ```text
//! 0 = h_t(a, b) - Σ a_i Δy_{t-i} + Σ b_i Δu_{t-i} - Δy_t,
//! h_t(a, b) = ŷ_t + Σ a_i ŷ_{t-i} - Σ b_i û_{t-i}.
//! ```
//!
//! With a process-noise bound `ε_w` the right-hand side only has to lie in
//! `[-ε_w, ε_w]`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arx::{plant_vars, simulate_full, ArxError, ArxModel};
use crate::lp::{LinearProgram, LpStatus, Row};
use crate::poly::{CoeffSequence, Polynomial};

/// Phase-1 violation below which a plant counts as consistent.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{what} has length {got}, expected {expected}")]
    Length {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("noise bound {0} is negative or not finite")]
    BadBound(f64),
    #[error(transparent)]
    Arx(#[from] ArxError),
    #[error("membership LP failed at plant a = {a:?}, b = {b:?}")]
    LpFailure { a: Vec<f64>, b: Vec<f64> },
    #[error("no consistent plant found in the search box")]
    EmptyConsistencySet,
    #[error("no consistent plant accepted after {draws} draws")]
    SamplerExhausted { draws: usize },
    #[error("box has {got} intervals, plant has {expected} parameters")]
    BoxDimension { expected: usize, got: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed dataset file {path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

/// Noise-free input/output record of a simulated plant.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub u: CoeffSequence<f64>,
    pub y: CoeffSequence<f64>,
}

/// The noise that was added to a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Noise {
    pub du: CoeffSequence<f64>,
    pub dy: CoeffSequence<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub n_a: usize,
    pub n_b: usize,
    pub horizon: usize,
    pub u_hat: CoeffSequence<f64>,
    pub y_hat: CoeffSequence<f64>,
    pub eps_u: f64,
    pub eps_y: f64,
    pub eps_w: Option<f64>,
    pub seed: Option<u64>,
}

fn check_bound(e: f64) -> Result<(), DataError> {
    if e.is_finite() && e >= 0.0 {
        Ok(())
    } else {
        Err(DataError::BadBound(e))
    }
}

impl Dataset {
    /// Builds a dataset; sequences are re-based to their canonical start
    /// indices `1 - n_b` and `1 - n_a`.
    pub fn new(
        n_a: usize,
        n_b: usize,
        u_hat: Vec<f64>,
        y_hat: Vec<f64>,
        eps_u: f64,
        eps_y: f64,
        eps_w: Option<f64>,
    ) -> Result<Self, DataError> {
        if n_b == 0 || n_a <= n_b {
            return Err(ArxError::InvalidOrders { n_a, n_b }.into());
        }
        if y_hat.len() < n_a + 1 {
            return Err(DataError::Length {
                what: "y_hat",
                expected: n_a + 1,
                got: y_hat.len(),
            });
        }
        let horizon = y_hat.len() - n_a;
        if u_hat.len() != horizon + n_b - 1 {
            return Err(DataError::Length {
                what: "u_hat",
                expected: horizon + n_b - 1,
                got: u_hat.len(),
            });
        }
        check_bound(eps_u)?;
        check_bound(eps_y)?;
        if let Some(w) = eps_w {
            check_bound(w)?;
        }
        Ok(Dataset {
            n_a,
            n_b,
            horizon,
            u_hat: CoeffSequence::new(1 - n_b as i64, u_hat),
            y_hat: CoeffSequence::new(1 - n_a as i64, y_hat),
            eps_u,
            eps_y,
            eps_w,
            seed: None,
        })
    }

    pub fn n_params(&self) -> usize {
        self.n_a + self.n_b
    }

    /// The same record cut down to its first `horizon` samples.
    pub fn truncated(&self, horizon: usize) -> Dataset {
        let horizon = horizon.min(self.horizon);
        let mut d = self.clone();
        d.horizon = horizon;
        d.u_hat.values.truncate(horizon + self.n_b - 1);
        d.y_hat.values.truncate(horizon + self.n_a);
        d
    }

    pub fn with_bounds(&self, eps_u: f64, eps_y: f64, eps_w: Option<f64>) -> Dataset {
        let mut d = self.clone();
        d.eps_u = eps_u;
        d.eps_y = eps_y;
        d.eps_w = eps_w;
        d
    }

    /// Number of `Δu` and `Δy` unknowns.
    pub fn noise_dims(&self) -> (usize, usize) {
        (self.horizon + self.n_b - 1, self.horizon + self.n_a)
    }

    fn h_value(&self, t: i64, a: &[f64], b: &[f64]) -> f64 {
        let mut v = self.y_hat.at(t);
        for (i, ai) in a.iter().enumerate() {
            v += ai * self.y_hat.at(t - 1 - i as i64);
        }
        for (i, bi) in b.iter().enumerate() {
            v -= bi * self.u_hat.at(t - 1 - i as i64);
        }
        v
    }
}

/// Uniform excitation `|u_t| <= 1` and uniform initial outputs in `[-1, 1]`.
///
/// Draws happen in time order, so a longer horizon extends a shorter one
/// with the same seed.
pub fn excite(plant: &ArxModel, horizon: usize, seed: u64) -> Result<Trajectory, DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y_init: Vec<f64> = (0..plant.n_a())
        .map(|_| rng.gen_range(-1.0..=1.0))
        .collect();
    let n_u = horizon + plant.n_b() - 1;
    let u = CoeffSequence::new(
        1 - plant.n_b() as i64,
        (0..n_u).map(|_| rng.gen_range(-1.0..=1.0)).collect(),
    );
    let y = simulate_full(plant, &u, &y_init, horizon)?;
    Ok(Trajectory { u, y })
}

/// Adds i.i.d. uniform noise on `[-ε, ε]`; returns the dataset and the
/// noise actually applied.
pub fn corrupt(
    traj: &Trajectory,
    eps_u: f64,
    eps_y: f64,
    seed: u64,
) -> Result<(Dataset, Noise), DataError> {
    check_bound(eps_u)?;
    check_bound(eps_y)?;
    let draw = |stream: u64, n: usize, eps: f64| -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        (0..n)
            .map(|_| {
                let r: f64 = rng.gen_range(-1.0..=1.0);
                r * eps
            })
            .collect()
    };
    let du = draw(1, traj.u.len(), eps_u);
    let dy = draw(2, traj.y.len(), eps_y);
    let u_hat: Vec<f64> = traj.u.values.iter().zip(&du).map(|(u, d)| u + d).collect();
    let y_hat: Vec<f64> = traj.y.values.iter().zip(&dy).map(|(y, d)| y + d).collect();
    let n_b = (1 - traj.u.start) as usize;
    let n_a = (1 - traj.y.start) as usize;
    let mut data = Dataset::new(n_a, n_b, u_hat, y_hat, eps_u, eps_y, None)?;
    data.seed = Some(seed);
    let noise = Noise {
        du: CoeffSequence::new(traj.u.start, du),
        dy: CoeffSequence::new(traj.y.start, dy),
    };
    Ok((data, noise))
}

/// Simulate and corrupt in one go.
pub fn generate(
    plant: &ArxModel,
    horizon: usize,
    eps_u: f64,
    eps_y: f64,
    seed: u64,
) -> Result<(Dataset, Trajectory, Noise), DataError> {
    let traj = excite(plant, horizon, seed)?;
    let (data, noise) = corrupt(&traj, eps_u, eps_y, seed)?;
    Ok((data, traj, noise))
}

/// `h_t` for `t = 1..T` as polynomials over `a1.., b1..`.
pub fn residual_h(data: &Dataset) -> Vec<Polynomial> {
    let vars = plant_vars(data.n_a, data.n_b);
    (1..=data.horizon as i64)
        .map(|t| {
            let mut p = Polynomial::constant(&vars, data.y_hat.at(t));
            for i in 1..=data.n_a {
                let c = data.y_hat.at(t - i as i64);
                p = &p + &Polynomial::var(&vars, &format!("a{i}")).scale(c);
            }
            for i in 1..=data.n_b {
                let c = data.u_hat.at(t - i as i64);
                p = &p - &Polynomial::var(&vars, &format!("b{i}")).scale(c);
            }
            p
        })
        .collect()
}

/// Basic semialgebraic set `{x : g_k(x) >= 0, h_j(x) = 0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BsaSet {
    pub vars: Vec<String>,
    pub inequalities: Vec<Polynomial>,
    pub equalities: Vec<Polynomial>,
}

impl BsaSet {
    pub fn new(vars: Vec<String>) -> Self {
        BsaSet {
            vars,
            inequalities: Vec::new(),
            equalities: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    /// Whether `point` (dense, registry order) satisfies every constraint
    /// to within `tol`.
    pub fn contains(&self, point: &[f64], tol: f64) -> bool {
        let ok_ineq = self
            .inequalities
            .iter()
            .all(|g| g.eval_dense(point).map(|v| v >= -tol).unwrap_or(false));
        let ok_eq = self
            .equalities
            .iter()
            .all(|h| h.eval_dense(point).map(|v| v.abs() <= tol).unwrap_or(false));
        ok_ineq && ok_eq
    }
}

pub fn du_name(t: i64) -> String {
    format!("du[{t}]")
}

pub fn dy_name(t: i64) -> String {
    format!("dy[{t}]")
}

/// The consistency set over `(a, b, Δu, Δy)`: noise boxes as linear
/// inequalities and one bilinear equality per sample (or a pair of
/// inequalities per sample when `ε_w` is set).
pub fn consistency_set(data: &Dataset) -> BsaSet {
    let mut vars = plant_vars(data.n_a, data.n_b);
    vars.extend(data.u_hat.indices().map(du_name));
    vars.extend(data.y_hat.indices().map(dy_name));
    let var = |name: &str| Polynomial::var(&vars, name);
    let one = Polynomial::constant(&vars, 1.0);
    let mut set = BsaSet::new(vars.clone());
    for (eps, names) in [
        (
            data.eps_u,
            data.u_hat.indices().map(du_name).collect::<Vec<_>>(),
        ),
        (
            data.eps_y,
            data.y_hat.indices().map(dy_name).collect::<Vec<_>>(),
        ),
    ] {
        for n in names {
            let e = one.scale(eps);
            set.inequalities.push(&e + &var(&n));
            set.inequalities.push(&e - &var(&n));
        }
    }
    for (t, h) in (1..=data.horizon as i64).zip(residual_h(data)) {
        let mut eq = h.with_vars(&vars);
        for i in 1..=data.n_a as i64 {
            eq = &eq - &(&var(&format!("a{i}")) * &var(&dy_name(t - i)));
        }
        for i in 1..=data.n_b as i64 {
            eq = &eq + &(&var(&format!("b{i}")) * &var(&du_name(t - i)));
        }
        eq = &eq - &var(&dy_name(t));
        match data.eps_w {
            None => set.equalities.push(eq),
            Some(w) => {
                let e = one.scale(w);
                set.inequalities.push(&e + &eq);
                set.inequalities.push(&e - &eq);
            }
        }
    }
    set
}

/// Outcome of the membership LP at a fixed plant.
#[derive(Clone, Debug, PartialEq)]
pub struct Membership {
    pub feasible: bool,
    /// Minimal total equation violation.
    pub violation: f64,
    /// Witness noise over the dataset's index ranges.
    pub du: Vec<f64>,
    pub dy: Vec<f64>,
}

/// Phase-1 LP: minimize the total violation of the sample equations over
/// noise inside its boxes. Feasible iff the optimum is at most
/// [`MEMBERSHIP_TOL`].
pub fn membership(plant: &ArxModel, data: &Dataset) -> Result<Membership, DataError> {
    let (a, b) = (&plant.a, &plant.b);
    if a.len() != data.n_a || b.len() != data.n_b {
        return Err(ArxError::InvalidOrders {
            n_a: a.len(),
            n_b: b.len(),
        }
        .into());
    }
    let mut lp = LinearProgram::new();
    let du0 = data.u_hat.start;
    let dy0 = data.y_hat.start;
    let du: Vec<usize> = (0..data.u_hat.len())
        .map(|_| lp.add_var(0.0, -data.eps_u, data.eps_u))
        .collect();
    let dy: Vec<usize> = (0..data.y_hat.len())
        .map(|_| lp.add_var(0.0, -data.eps_y, data.eps_y))
        .collect();
    for t in 1..=data.horizon as i64 {
        let mut row = Vec::with_capacity(data.n_a + data.n_b + 4);
        for (i, ai) in a.iter().enumerate() {
            row.push((dy[(t - 1 - i as i64 - dy0) as usize], -ai));
        }
        for (i, bi) in b.iter().enumerate() {
            row.push((du[(t - 1 - i as i64 - du0) as usize], *bi));
        }
        row.push((dy[(t - dy0) as usize], -1.0));
        row.push((lp.add_var(1.0, 0.0, f64::INFINITY), 1.0));
        row.push((lp.add_var(1.0, 0.0, f64::INFINITY), -1.0));
        if let Some(w) = data.eps_w {
            row.push((lp.add_var(0.0, -w, w), 1.0));
        }
        lp.add_row(row, Row::Eq, -data.h_value(t, a, b));
    }
    let r = lp.solve();
    if r.status != LpStatus::Optimal {
        return Err(DataError::LpFailure {
            a: a.clone(),
            b: b.clone(),
        });
    }
    let violation = r.objective.max(0.0);
    Ok(Membership {
        feasible: violation <= MEMBERSHIP_TOL,
        violation,
        du: du.iter().map(|&j| r.x[j]).collect(),
        dy: dy.iter().map(|&j| r.x[j]).collect(),
    })
}

/// Cheap necessary condition for membership: each sample equation on its
/// own must be satisfiable.
pub fn passes_prefilter(a: &[f64], b: &[f64], data: &Dataset) -> bool {
    let la: f64 = a.iter().map(|v| v.abs()).sum();
    let lb: f64 = b.iter().map(|v| v.abs()).sum();
    let slack = data.eps_y * (1.0 + la) + data.eps_u * lb + data.eps_w.unwrap_or(0.0);
    (1..=data.horizon as i64).all(|t| data.h_value(t, a, b).abs() <= slack + MEMBERSHIP_TOL)
}

/// Outer bounding box of the consistent plants inside `start`, from
/// `rounds` passes of LP bound tightening on the McCormick relaxation of
/// the bilinear sample equations.
pub fn outer_box(
    data: &Dataset,
    start: &[(f64, f64)],
    rounds: usize,
) -> Result<Vec<(f64, f64)>, DataError> {
    let np = data.n_params();
    if start.len() != np {
        return Err(DataError::BoxDimension {
            expected: np,
            got: start.len(),
        });
    }
    let mut bx = start.to_vec();
    for _ in 0..rounds.max(1) {
        let mut next = bx.clone();
        for k in 0..np {
            for dir in [1.0, -1.0] {
                let lp = mccormick_lp(data, &next, k, dir);
                let r = lp.solve();
                match r.status {
                    LpStatus::Optimal => {
                        let v = dir * r.objective;
                        if dir > 0.0 {
                            next[k].0 = next[k].0.max(v);
                        } else {
                            next[k].1 = next[k].1.min(v);
                        }
                    }
                    LpStatus::Infeasible => return Err(DataError::EmptyConsistencySet),
                    _ => {}
                }
            }
            if next[k].0 > next[k].1 {
                let mid = 0.5 * (next[k].0 + next[k].1);
                next[k] = (mid, mid);
            }
        }
        let shrink: f64 = bx
            .iter()
            .zip(&next)
            .map(|(o, n)| (o.1 - o.0) - (n.1 - n.0))
            .fold(0.0, f64::max);
        bx = next;
        if shrink < 1e-9 {
            break;
        }
    }
    Ok(bx)
}

/// McCormick envelope of `w = p·d` with `p ∈ [pl, pu]`, `d ∈ [-e, e]`.
fn product(lp: &mut LinearProgram, p: usize, d: usize, (pl, pu): (f64, f64), e: f64) -> usize {
    let w = lp.add_var(0.0, f64::NEG_INFINITY, f64::INFINITY);
    // w >= pl d - e p + pl e,  w >= pu d + e p - pu e
    lp.add_row(vec![(w, 1.0), (d, -pl), (p, e)], Row::Ge, pl * e);
    lp.add_row(vec![(w, 1.0), (d, -pu), (p, -e)], Row::Ge, -pu * e);
    // w <= pu d - e p + pu e,  w <= pl d + e p - pl e
    lp.add_row(vec![(w, 1.0), (d, -pu), (p, e)], Row::Le, pu * e);
    lp.add_row(vec![(w, 1.0), (d, -pl), (p, -e)], Row::Le, -pl * e);
    w
}

/// `min dir * θ_k` over the relaxation, θ = (a, b) restricted to `bx`.
fn mccormick_lp(data: &Dataset, bx: &[(f64, f64)], k: usize, dir: f64) -> LinearProgram {
    let mut lp = LinearProgram::new();
    let theta: Vec<usize> = bx
        .iter()
        .enumerate()
        .map(|(j, &(lo, hi))| lp.add_var(if j == k { dir } else { 0.0 }, lo, hi))
        .collect();
    let du0 = data.u_hat.start;
    let dy0 = data.y_hat.start;
    let du: Vec<usize> = (0..data.u_hat.len())
        .map(|_| lp.add_var(0.0, -data.eps_u, data.eps_u))
        .collect();
    let dy: Vec<usize> = (0..data.y_hat.len())
        .map(|_| lp.add_var(0.0, -data.eps_y, data.eps_y))
        .collect();
    for t in 1..=data.horizon as i64 {
        // h_t(θ) - Σ a_i dy + Σ b_i du - dy_t = 0, with h_t affine in θ
        let mut row = Vec::new();
        let rhs = -data.y_hat.at(t);
        for i in 0..data.n_a {
            row.push((theta[i], data.y_hat.at(t - 1 - i as i64)));
            let d = dy[(t - 1 - i as i64 - dy0) as usize];
            let w = product(&mut lp, theta[i], d, bx[i], data.eps_y);
            row.push((w, -1.0));
        }
        for i in 0..data.n_b {
            let j = data.n_a + i;
            row.push((theta[j], -data.u_hat.at(t - 1 - i as i64)));
            let d = du[(t - 1 - i as i64 - du0) as usize];
            let w = product(&mut lp, theta[j], d, bx[j], data.eps_u);
            row.push((w, 1.0));
        }
        row.push((dy[(t - dy0) as usize], -1.0));
        match data.eps_w {
            None => lp.add_row(row, Row::Eq, rhs),
            Some(wb) => {
                let slack = lp.add_var(0.0, -wb, wb);
                row.push((slack, 1.0));
                lp.add_row(row, Row::Eq, rhs);
            }
        }
    }
    lp
}

#[derive(Clone, Debug)]
pub struct SampleReport {
    pub plants: Vec<ArxModel>,
    pub draws: usize,
    pub prefilter_passed: usize,
    pub acceptance_rate: f64,
    /// Plants contributed by [`walk_consistent_plants`] (0 for pure
    /// rejection sampling).
    pub walked: usize,
}

/// Rejection sampling: uniform draws from `bounds`, kept when the
/// membership LP accepts them. Draw `i` uses its own ChaCha stream, so the
/// result depends only on `seed` and not on thread scheduling.
pub fn sample_consistent_plants(
    data: &Dataset,
    count: usize,
    bounds: &[(f64, f64)],
    seed: u64,
    max_draws: usize,
) -> Result<SampleReport, DataError> {
    let np = data.n_params();
    if bounds.len() != np {
        return Err(DataError::BoxDimension {
            expected: np,
            got: bounds.len(),
        });
    }
    const CHUNK: usize = 512;
    let mut plants = Vec::new();
    let mut draws = 0usize;
    let mut passed = 0usize;
    while plants.len() < count && draws < max_draws {
        let lo = draws;
        let hi = (draws + CHUNK).min(max_draws);
        let chunk: Vec<(bool, Option<ArxModel>)> = (lo..hi)
            .into_par_iter()
            .map(|i| {
                let theta = draw_point(bounds, seed, i as u64);
                let (a, b) = theta.split_at(data.n_a);
                if !passes_prefilter(a, b, data) {
                    return (false, None);
                }
                let plant = ArxModel {
                    a: a.to_vec(),
                    b: b.to_vec(),
                };
                match membership(&plant, data) {
                    Ok(m) if m.feasible => (true, Some(plant)),
                    _ => (true, None),
                }
            })
            .collect();
        for (k, (pre, p)) in chunk.into_iter().enumerate() {
            if plants.len() == count {
                break;
            }
            draws = lo + k + 1;
            passed += pre as usize;
            if let Some(p) = p {
                plants.push(p);
            }
        }
        if plants.len() < count {
            draws = hi;
        }
    }
    if plants.is_empty() {
        return Err(DataError::SamplerExhausted { draws });
    }
    let acceptance_rate = plants.len() as f64 / draws.max(1) as f64;
    Ok(SampleReport {
        plants,
        draws,
        prefilter_passed: passed,
        acceptance_rate,
        walked: 0,
    })
}

fn is_consistent(theta: &[f64], data: &Dataset) -> bool {
    let (a, b) = theta.split_at(data.n_a);
    passes_prefilter(a, b, data)
        && membership(
            &ArxModel {
                a: a.to_vec(),
                b: b.to_vec(),
            },
            data,
        )
        .is_ok_and(|m| m.feasible)
}

/// `θ` minimizing the total sample-equation violation inside `bounds` with
/// the noise held at `du`, `dy`.
fn refit(data: &Dataset, bounds: &[(f64, f64)], du: &[f64], dy: &[f64]) -> Option<Vec<f64>> {
    let mut lp = LinearProgram::new();
    let theta: Vec<usize> = bounds
        .iter()
        .map(|&(lo, hi)| lp.add_var(0.0, lo, hi))
        .collect();
    let u = |t: i64| data.u_hat.at(t) - du[(t - data.u_hat.start) as usize];
    let y = |t: i64| data.y_hat.at(t) - dy[(t - data.y_hat.start) as usize];
    for t in 1..=data.horizon as i64 {
        let mut row = Vec::with_capacity(data.n_params() + 3);
        for i in 0..data.n_a {
            row.push((theta[i], y(t - 1 - i as i64)));
        }
        for i in 0..data.n_b {
            row.push((theta[data.n_a + i], -u(t - 1 - i as i64)));
        }
        row.push((lp.add_var(1.0, 0.0, f64::INFINITY), 1.0));
        row.push((lp.add_var(1.0, 0.0, f64::INFINITY), -1.0));
        if let Some(w) = data.eps_w {
            row.push((lp.add_var(0.0, -w, w), 1.0));
        }
        lp.add_row(row, Row::Eq, -y(t));
    }
    let r = lp.solve();
    (r.status == LpStatus::Optimal).then(|| theta.iter().map(|&j| r.x[j]).collect())
}

/// A consistent plant inside `bounds`, by alternating the membership LP
/// (noise for fixed θ) with an L1 refit of θ for fixed noise, starting
/// from the zero-noise fit.
pub fn find_consistent_point(
    data: &Dataset,
    bounds: &[(f64, f64)],
    rounds: usize,
) -> Option<Vec<f64>> {
    let (nu, ny) = (data.u_hat.len(), data.y_hat.len());
    let mut theta = refit(data, bounds, &vec![0.0; nu], &vec![0.0; ny])?;
    for _ in 0..rounds {
        let (a, b) = theta.split_at(data.n_a);
        let plant = ArxModel {
            a: a.to_vec(),
            b: b.to_vec(),
        };
        let m = membership(&plant, data).ok()?;
        if m.feasible {
            return Some(theta);
        }
        theta = refit(data, bounds, &m.du, &m.dy)?;
    }
    None
}

/// Hit-and-run with shrinkage inside `bounds`, started at a consistent
/// `start`. Each step draws a direction, samples uniformly on the chord
/// through the current point and shrinks the chord toward it on
/// rejection. Directions are symmetric and independent of the position,
/// so the uniform distribution on the consistent set stays invariant.
/// Successive points are correlated; every `thin`-th one is returned.
pub fn walk_consistent_plants(
    data: &Dataset,
    count: usize,
    bounds: &[(f64, f64)],
    start: &[f64],
    thin: usize,
    seed: u64,
) -> Result<Vec<ArxModel>, DataError> {
    let np = data.n_params();
    if bounds.len() != np || start.len() != np {
        return Err(DataError::BoxDimension {
            expected: np,
            got: bounds.len().min(start.len()),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = start.to_vec();
    let mut out = Vec::with_capacity(count);
    let mut step = 0usize;
    while out.len() < count {
        let dir: Vec<f64> = bounds
            .iter()
            .map(|&(lo, hi)| rng.gen_range(-1.0..=1.0) * (hi - lo))
            .collect();
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for ((&d, &xk), &(bl, bh)) in dir.iter().zip(&x).zip(bounds) {
            if d != 0.0 {
                let (t1, t2) = ((bl - xk) / d, (bh - xk) / d);
                lo = lo.max(t1.min(t2));
                hi = hi.min(t1.max(t2));
            }
        }
        if !(lo.is_finite() && hi.is_finite()) {
            break;
        }
        lo = lo.min(0.0);
        hi = hi.max(0.0);
        loop {
            let t = rng.gen_range(lo..=hi);
            let y: Vec<f64> = x.iter().zip(&dir).map(|(xk, d)| xk + t * d).collect();
            if is_consistent(&y, data) {
                x = y;
                break;
            }
            if t < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            if hi - lo < 1e-12 {
                break;
            }
        }
        step += 1;
        if step % thin.max(1) == 0 {
            let (a, b) = x.split_at(data.n_a);
            out.push(ArxModel {
                a: a.to_vec(),
                b: b.to_vec(),
            });
        }
    }
    Ok(out)
}

/// Rejection sampling topped up by [`walk_consistent_plants`] when it
/// returns fewer than `count` plants. The walk starts from an accepted
/// draw, or from [`find_consistent_point`] when there is none.
pub fn sample_with_walk(
    data: &Dataset,
    count: usize,
    bounds: &[(f64, f64)],
    seed: u64,
    max_draws: usize,
) -> Result<SampleReport, DataError> {
    let mut report = match sample_consistent_plants(data, count, bounds, seed, max_draws) {
        Ok(r) => r,
        Err(DataError::SamplerExhausted { draws }) => SampleReport {
            plants: Vec::new(),
            draws,
            prefilter_passed: 0,
            acceptance_rate: 0.0,
            walked: 0,
        },
        Err(e) => return Err(e),
    };
    if report.plants.len() >= count {
        return Ok(report);
    }
    let start = match report.plants.first() {
        Some(p) => p.a.iter().chain(&p.b).copied().collect(),
        None => match find_consistent_point(data, bounds, 50) {
            Some(t) => t,
            None => {
                return Err(DataError::SamplerExhausted {
                    draws: report.draws,
                })
            }
        },
    };
    let extra = walk_consistent_plants(data, count - report.plants.len(), bounds, &start, 2, seed)?;
    report.walked = extra.len();
    report.plants.extend(extra);
    Ok(report)
}

fn draw_point(bounds: &[(f64, f64)], seed: u64, index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    bounds
        .iter()
        .map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
        .collect()
}

/// JSON sidecar stored next to the trajectory CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub n_a: usize,
    pub n_b: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub eps_u: f64,
    pub eps_y: f64,
    pub eps_w: Option<f64>,
    pub seed: Option<u64>,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes `t,u_hat,y_hat` rows (blank where a sequence is undefined) and
/// the sidecar.
pub fn save_dataset(data: &Dataset, csv_path: &Path) -> Result<(), DataError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| DataError::Io { path, source }
    };
    let mut w = csv::Writer::from_path(csv_path).map_err(|e| DataError::Format {
        path: csv_path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let fmt_err = |e: csv::Error| DataError::Format {
        path: csv_path.to_path_buf(),
        msg: e.to_string(),
    };
    w.write_record(["t", "u_hat", "y_hat"]).map_err(fmt_err)?;
    let t0 = data.u_hat.start.min(data.y_hat.start);
    for t in t0..=data.horizon as i64 {
        let u = data.u_hat.get(t).map(|v| v.to_string()).unwrap_or_default();
        let y = data.y_hat.get(t).map(|v| v.to_string()).unwrap_or_default();
        w.write_record([t.to_string(), u, y]).map_err(fmt_err)?;
    }
    w.flush().map_err(io(csv_path))?;
    let side = Sidecar {
        n_a: data.n_a,
        n_b: data.n_b,
        horizon: data.horizon,
        eps_u: data.eps_u,
        eps_y: data.eps_y,
        eps_w: data.eps_w,
        seed: data.seed,
    };
    let sp = sidecar_path(csv_path);
    let text = serde_json::to_string_pretty(&side).expect("sidecar serializes");
    fs::write(&sp, text + "\n").map_err(io(&sp))
}

pub fn load_dataset(csv_path: &Path) -> Result<Dataset, DataError> {
    let sp = sidecar_path(csv_path);
    let bad = |path: &Path, msg: String| DataError::Format {
        path: path.to_path_buf(),
        msg,
    };
    let text = fs::read_to_string(&sp).map_err(|source| DataError::Io {
        path: sp.clone(),
        source,
    })?;
    let side: Sidecar = serde_json::from_str(&text).map_err(|e| bad(&sp, e.to_string()))?;
    let mut r = csv::Reader::from_path(csv_path).map_err(|e| bad(csv_path, e.to_string()))?;
    let mut us: HashMap<i64, f64> = HashMap::new();
    let mut ys: HashMap<i64, f64> = HashMap::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(csv_path, e.to_string()))?;
        let field = |k: usize| rec.get(k).unwrap_or("").trim().to_string();
        let t: i64 = field(0)
            .parse()
            .map_err(|_| bad(csv_path, format!("bad time index '{}'", field(0))))?;
        for (k, map) in [(1usize, &mut us), (2, &mut ys)] {
            let s = field(k);
            if !s.is_empty() {
                let v: f64 = s
                    .parse()
                    .map_err(|_| bad(csv_path, format!("bad value '{s}' at t = {t}")))?;
                map.insert(t, v);
            }
        }
    }
    let collect = |map: &HashMap<i64, f64>, from: i64, to: i64, what: &str| {
        (from..=to)
            .map(|t| {
                map.get(&t)
                    .copied()
                    .ok_or_else(|| bad(csv_path, format!("{what} missing at t = {t}")))
            })
            .collect::<Result<Vec<f64>, DataError>>()
    };
    let t_end = side.horizon as i64;
    let u = collect(&us, 1 - side.n_b as i64, t_end - 1, "u_hat")?;
    let y = collect(&ys, 1 - side.n_a as i64, t_end, "y_hat")?;
    let mut data = Dataset::new(side.n_a, side.n_b, u, y, side.eps_u, side.eps_y, side.eps_w)?;
    data.seed = side.seed;
    Ok(data)
}
