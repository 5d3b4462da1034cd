//! Positivstellensatz constraint builders.
//!
//! [`putinar_constraints`] imposes `q = σ₀ + Σ σ_i g_i + Σ φ_j h_j` over a
//! basic semialgebraic set. [`alternatives_constraints`] certifies `q >= 0`
//! on the plants consistent with a dataset without quantifying over the
//! noise: with multipliers `ψ±, ζ±` that are SOS over the parameter box Π
//! and a free vector `μ`, it imposes
//!
//! ```text
//! q - ε_u 1ᵀ(ψ⁺ + ψ⁻) - hᵀμ - ε_y 1ᵀ(ζ⁺ + ζ⁻)  ∈ Σ[Π]
//! ψ⁺ - ψ⁻ = μ ⋆ b,   ζ⁺ - ζ⁻ = μ ⋆ [1; a]
//! ```
//!
//! All multiplier degrees follow one rule: a multiplier of constraint `g`
//! has degree `2⌊(2d - deg g)/2⌋`, free multipliers fill up to `2d`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::arx::{plant_vars, ArxModel};
use crate::conic::{ConicModel, LinExpr};
use crate::data::{residual_h, BsaSet, Dataset};
use crate::poly::{cross_correlate_with, monomial_basis, CoeffSequence, Monomial, Polynomial};
use crate::sos::{coeff_residual, GramBlock, PolyExpr};

#[derive(Debug, Error, PartialEq)]
pub enum CertifyError {
    #[error("target has degree {got}, the certificate only reaches {max}")]
    DegreeOverflow { got: u32, max: u32 },
    #[error("target mentions indeterminate {0}, which is not a plant parameter")]
    NotPlantPolynomial(String),
    #[error("polynomial registry {got:?} does not match the set's {expected:?}")]
    Registry {
        expected: Vec<String>,
        got: Vec<String>,
    },
}

/// Half-degree of the SOS multiplier attached to a constraint of degree
/// `deg_g`, or `None` when no multiplier fits under `2d`.
pub fn multiplier_half_degree(d: u32, deg_g: u32) -> Option<u32> {
    (2 * d >= deg_g).then(|| (2 * d - deg_g) / 2)
}

/// Putinar certificate `σ₀ + Σ σ_i g_i + Σ φ_j h_j` over a fixed set.
#[derive(Clone, Debug)]
pub struct Putinar {
    pub degree: u32,
    pub sigma0: GramBlock,
    /// One entry per inequality; `None` when its degree exceeds `2d`.
    pub sigmas: Vec<Option<GramBlock>>,
    /// One free polynomial per equality.
    pub phis: Vec<PolyExpr>,
}

fn weighted_multipliers(
    model: &mut ConicModel,
    set: &BsaSet,
    d: u32,
) -> (Vec<Option<GramBlock>>, Vec<PolyExpr>, PolyExpr) {
    let n = set.num_vars();
    let mut acc = PolyExpr::zero();
    let sigmas: Vec<Option<GramBlock>> = set
        .inequalities
        .iter()
        .map(|g| {
            multiplier_half_degree(d, g.degree()).map(|k| {
                let s = GramBlock::free(model, monomial_basis(n, k));
                acc.add_scaled(&s.polynomial().mul_poly(g), 1.0);
                s
            })
        })
        .collect();
    let phis: Vec<PolyExpr> = set
        .equalities
        .iter()
        .map(|h| {
            let deg = (2 * d).saturating_sub(h.degree());
            let phi = if 2 * d >= h.degree() {
                PolyExpr::free(model, n, deg)
            } else {
                PolyExpr::zero()
            };
            acc.add_scaled(&phi.mul_poly(h), 1.0);
            phi
        })
        .collect();
    (sigmas, phis, acc)
}

/// A polynomial known to be nonnegative on `set`, with every multiplier
/// free. Returns the certificate and its polynomial.
pub fn putinar_free(model: &mut ConicModel, set: &BsaSet, d: u32) -> (Putinar, PolyExpr) {
    let (sigmas, phis, mut acc) = weighted_multipliers(model, set, d);
    let sigma0 = GramBlock::free(model, monomial_basis(set.num_vars(), d));
    acc.add_scaled(&sigma0.polynomial(), 1.0);
    (
        Putinar {
            degree: d,
            sigma0,
            sigmas,
            phis,
        },
        acc,
    )
}

/// Imposes `target - margin ∈ Σ[set]_{<= 2d}`. Monomial ids of `target`
/// index the set's registry.
pub fn putinar_constraints(
    model: &mut ConicModel,
    target: &PolyExpr,
    set: &BsaSet,
    d: u32,
    margin: f64,
) -> Result<Putinar, CertifyError> {
    let deg = target.degree();
    if deg > 2 * d {
        return Err(CertifyError::DegreeOverflow {
            got: deg,
            max: 2 * d,
        });
    }
    let (sigmas, phis, acc) = weighted_multipliers(model, set, d);
    let mut rest = target.clone();
    rest.add_scaled(&acc, -1.0);
    if margin != 0.0 {
        rest.add_at(Monomial::one(), &LinExpr::constant(-margin), 1.0);
    }
    let sigma0 = GramBlock::equal_to(model, &rest, monomial_basis(set.num_vars(), d));
    Ok(Putinar {
        degree: d,
        sigma0,
        sigmas,
        phis,
    })
}

fn mul_terms(p: &BTreeMap<Monomial, f64>, g: &Polynomial) -> BTreeMap<Monomial, f64> {
    let mut out: BTreeMap<Monomial, f64> = BTreeMap::new();
    for (m1, c1) in p {
        for (m2, c2) in g.terms() {
            *out.entry(m1.mul(m2)).or_insert(0.0) += c1 * c2;
        }
    }
    out
}

fn add_terms(acc: &mut BTreeMap<Monomial, f64>, p: &BTreeMap<Monomial, f64>, s: f64) {
    for (m, c) in p {
        *acc.entry(m.clone()).or_insert(0.0) += s * c;
    }
}

impl Putinar {
    /// Re-expansion of the solved certificate from its numeric Gram
    /// matrices and multipliers.
    pub fn numeric(&self, set: &BsaSet, x: &[f64]) -> BTreeMap<Monomial, f64> {
        let mut acc = self.sigma0.expand(x);
        for (s, g) in self.sigmas.iter().zip(&set.inequalities) {
            if let Some(s) = s {
                add_terms(&mut acc, &mul_terms(&s.expand(x), g), 1.0);
            }
        }
        for (phi, h) in self.phis.iter().zip(&set.equalities) {
            add_terms(&mut acc, &mul_terms(&phi.value(x), h), 1.0);
        }
        acc
    }

    /// Smallest eigenvalue over all Gram matrices.
    pub fn min_eigenvalue(&self, x: &[f64]) -> f64 {
        self.grams()
            .map(|g| g.min_eigenvalue(x))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn grams(&self) -> impl Iterator<Item = &GramBlock> {
        std::iter::once(&self.sigma0).chain(self.sigmas.iter().flatten())
    }

    pub fn max_gram_dim(&self) -> usize {
        self.grams().map(|g| g.dim()).max().unwrap_or(0)
    }

    /// Multipliers and Gram matrices as JSON: polynomials in the
    /// `{"vars", "terms"}` schema, Grams as dense lower triangles.
    pub fn to_json(&self, set: &BsaSet, x: &[f64]) -> serde_json::Value {
        let gram_json = |g: &GramBlock| {
            let m = g.matrix(x);
            let lower: Vec<Vec<f64>> = (0..g.dim())
                .map(|i| (0..=i).map(|j| m[(i, j)]).collect())
                .collect();
            let basis: Vec<Vec<u32>> = g.basis.iter().map(|b| b.to_dense(set.num_vars())).collect();
            json!({
                "basis": basis,
                "gram_lower": lower,
                "polynomial": Polynomial::from_terms(&set.vars, g.expand(x)),
            })
        };
        json!({
            "degree": self.degree,
            "sigma0": gram_json(&self.sigma0),
            "sigmas": self.sigmas.iter().map(|s| s.as_ref().map(gram_json)).collect::<Vec<_>>(),
            "phis": self.phis.iter().map(|p| p.to_polynomial(&set.vars, x)).collect::<Vec<_>>(),
            "min_eigenvalue": self.min_eigenvalue(x),
        })
    }
}

/// Adjoins `R - ‖x‖² >= 0` over all of `set`'s indeterminates.
pub fn archimedean_augment(set: &BsaSet, r: f64) -> BsaSet {
    let mut out = set.clone();
    let mut ball = Polynomial::constant(&set.vars, r);
    for v in &set.vars {
        let x = Polynomial::var(&set.vars, v);
        ball = &ball - &(&x * &x);
    }
    out.inequalities.push(ball);
    out
}

/// Default parameter box Π: `r_a² - a_i² >= 0`, `r_b² - b_i² >= 0`, and the
/// enclosing ball `n_a r_a² + n_b r_b² - ‖(a, b)‖² >= 0`.
pub fn parameter_box(n_a: usize, n_b: usize, r_a: f64, r_b: f64) -> BsaSet {
    let vars = plant_vars(n_a, n_b);
    let mut set = BsaSet::new(vars.clone());
    for (k, v) in vars.iter().enumerate() {
        let r = if k < n_a { r_a } else { r_b };
        let x = Polynomial::var(&vars, v);
        set.inequalities
            .push(&Polynomial::constant(&vars, r * r) - &(&x * &x));
    }
    archimedean_augment(&set, n_a as f64 * r_a * r_a + n_b as f64 * r_b * r_b)
}

/// Bounds `(lo, hi)` per plant parameter for a [`parameter_box`].
pub fn box_bounds(n_a: usize, n_b: usize, r_a: f64, r_b: f64) -> Vec<(f64, f64)> {
    (0..n_a)
        .map(|_| (-r_a, r_a))
        .chain((0..n_b).map(|_| (-r_b, r_b)))
        .collect()
}

/// Multipliers of the noise-eliminated certificate.
#[derive(Clone, Debug)]
pub struct AlternativesCert {
    /// Over `Δu` indices `(1 - n_b)..=(T - 1)`; empty when `ε_u = 0`.
    pub psi_plus: Vec<Putinar>,
    pub psi_minus: Vec<Putinar>,
    /// Over `Δy` indices `(1 - n_a)..=T`; empty when `ε_y = 0`.
    pub zeta_plus: Vec<Putinar>,
    pub zeta_minus: Vec<Putinar>,
    /// `μ_t`, `t = 1..T` (the difference `μ⁺ - μ⁻` in the process-noise
    /// variant).
    pub mu: Vec<PolyExpr>,
    pub mu_plus: Vec<Putinar>,
    pub mu_minus: Vec<Putinar>,
    /// `μ ⋆ b` and `μ ⋆ [1; a]`.
    pub mu_b: Vec<PolyExpr>,
    pub mu_a: Vec<PolyExpr>,
    /// Certificate of `-Q ∈ Σ[Π]`.
    pub neg_q: Putinar,
    pub eps: (f64, f64, Option<f64>),
}

fn check_plant_target(q: &PolyExpr, pi: &BsaSet) -> Result<(), CertifyError> {
    for m in q.terms.keys() {
        if let Some(v) = m.max_var() {
            if v >= pi.num_vars() {
                return Err(CertifyError::NotPlantPolynomial(format!("#{v}")));
            }
        }
    }
    Ok(())
}

fn correlations(mu: &[PolyExpr], data: &Dataset) -> (Vec<PolyExpr>, Vec<PolyExpr>) {
    let mus = CoeffSequence::new(1, mu.to_vec());
    let mac = |acc: &mut PolyExpr, x: &PolyExpr, y: &(Monomial, f64)| {
        acc.add_scaled(&x.mul_monomial(&y.0, y.1), 1.0);
    };
    let b = CoeffSequence::new(
        1,
        (0..data.n_b)
            .map(|i| (Monomial::var(data.n_a + i), 1.0))
            .collect::<Vec<_>>(),
    );
    let one_a = CoeffSequence::new(
        1,
        std::iter::once((Monomial::one(), 1.0))
            .chain((0..data.n_a).map(|i| (Monomial::var(i), 1.0)))
            .collect::<Vec<_>>(),
    );
    let mu_b = cross_correlate_with(&mus, &b, mac).expect("nonempty sequences");
    let mu_a = cross_correlate_with(&mus, &one_a, mac).expect("nonempty sequences");
    (mu_b.values, mu_a.values)
}

/// Pairs `(ψ⁺, ψ⁻)` with `ψ⁺ - ψ⁻ = target`, both SOS over Π. Returns the
/// certificates and `ψ⁺ + ψ⁻`.
fn split_pair(
    model: &mut ConicModel,
    diff: &PolyExpr,
    pi: &BsaSet,
    d: u32,
) -> Result<(Putinar, Putinar, PolyExpr), CertifyError> {
    let (plus, p) = putinar_free(model, pi, d);
    let mut minus_target = p.clone();
    minus_target.add_scaled(diff, -1.0);
    let minus = putinar_constraints(model, &minus_target, pi, d, 0.0)?;
    let mut sum = p.scaled(2.0);
    sum.add_scaled(diff, -1.0);
    Ok((plus, minus, sum))
}

fn base_terms(
    model: &mut ConicModel,
    data: &Dataset,
    pi: &BsaSet,
    d: u32,
    mu: &[PolyExpr],
) -> Result<(AlternativesCert, PolyExpr), CertifyError> {
    let (mu_b, mu_a) = correlations(mu, data);
    let mut penalty = PolyExpr::zero();
    let mut cert = AlternativesCert {
        psi_plus: Vec::new(),
        psi_minus: Vec::new(),
        zeta_plus: Vec::new(),
        zeta_minus: Vec::new(),
        mu: mu.to_vec(),
        mu_plus: Vec::new(),
        mu_minus: Vec::new(),
        mu_b: mu_b.clone(),
        mu_a: mu_a.clone(),
        neg_q: Putinar {
            degree: d,
            sigma0: GramBlock {
                basis: Vec::new(),
                entries: Vec::new(),
            },
            sigmas: Vec::new(),
            phis: Vec::new(),
        },
        eps: (data.eps_u, data.eps_y, data.eps_w),
    };
    // with a zero bound the pair never reaches Q, and any polynomial of
    // degree <= 2d splits into two SOS, so the pair is left out
    if data.eps_u > 0.0 {
        for diff in &mu_b {
            let (p, m, sum) = split_pair(model, diff, pi, d)?;
            cert.psi_plus.push(p);
            cert.psi_minus.push(m);
            penalty.add_scaled(&sum, data.eps_u);
        }
    }
    if data.eps_y > 0.0 {
        for diff in &mu_a {
            let (p, m, sum) = split_pair(model, diff, pi, d)?;
            cert.zeta_plus.push(p);
            cert.zeta_minus.push(m);
            penalty.add_scaled(&sum, data.eps_y);
        }
    }
    // hᵀμ
    let h = residual_h(data);
    for (ht, mt) in h.iter().zip(mu) {
        penalty.add_scaled(&mt.mul_poly(ht), 1.0);
    }
    Ok((cert, penalty))
}

/// Noise-eliminated certificate of `q - margin >= 0` on the consistent
/// plants, for data without process noise.
pub fn alternatives_constraints(
    model: &mut ConicModel,
    q: &PolyExpr,
    data: &Dataset,
    pi: &BsaSet,
    d: u32,
    margin: f64,
) -> Result<AlternativesCert, CertifyError> {
    check_plant_target(q, pi)?;
    let deg = q.degree();
    if deg > 2 * d {
        return Err(CertifyError::DegreeOverflow {
            got: deg,
            max: 2 * d,
        });
    }
    // μ_t = ν_t / s_t with s_t the size of h_t: on long records of an
    // unstable plant h_t reaches 1e3 and more, and without this the solver
    // stalls at reduced accuracy with visibly indefinite Gram matrices
    let mu: Vec<PolyExpr> = residual_h(data)
        .iter()
        .map(|ht| {
            let s = ht.max_abs_coeff().max(1.0);
            PolyExpr::free(model, pi.num_vars(), 2 * d - 1).scaled(1.0 / s)
        })
        .collect();
    let (mut cert, penalty) = base_terms(model, data, pi, d, &mu)?;
    let mut target = q.clone();
    target.add_scaled(&penalty, -1.0);
    cert.neg_q = putinar_constraints(model, &target, pi, d, margin)?;
    Ok(cert)
}

/// Process-noise variant: `μ = μ⁺ - μ⁻` with `μ±` nonnegative on Π (SOS
/// over Π, same degree as `ψ±`) and the extra penalty `ε_w 1ᵀ(μ⁺ + μ⁻)`.
/// A missing `ε_w` is treated as zero.
pub fn alternatives_constraints_w(
    model: &mut ConicModel,
    q: &PolyExpr,
    data: &Dataset,
    pi: &BsaSet,
    d: u32,
    margin: f64,
) -> Result<AlternativesCert, CertifyError> {
    check_plant_target(q, pi)?;
    let deg = q.degree();
    if deg > 2 * d {
        return Err(CertifyError::DegreeOverflow {
            got: deg,
            max: 2 * d,
        });
    }
    let eps_w = data.eps_w.unwrap_or(0.0);
    let n = pi.num_vars();
    let mut mu = Vec::with_capacity(data.horizon);
    let mut mu_plus = Vec::with_capacity(data.horizon);
    let mut mu_minus = Vec::with_capacity(data.horizon);
    let mut w_penalty = PolyExpr::zero();
    for ht in residual_h(data) {
        let s = ht.max_abs_coeff().max(1.0);
        let nu = PolyExpr::free(model, n, 2 * d - 1).scaled(1.0 / s);
        let (plus, p) = putinar_free(model, pi, d);
        let mut minus_target = p.clone();
        minus_target.add_scaled(&nu, -1.0);
        let minus = putinar_constraints(model, &minus_target, pi, d, 0.0)?;
        let mut sum = p.scaled(2.0);
        sum.add_scaled(&nu, -1.0);
        w_penalty.add_scaled(&sum, eps_w);
        mu.push(nu);
        mu_plus.push(plus);
        mu_minus.push(minus);
    }
    let (mut cert, mut penalty) = base_terms(model, data, pi, d, &mu)?;
    penalty.add_scaled(&w_penalty, 1.0);
    cert.mu_plus = mu_plus;
    cert.mu_minus = mu_minus;
    let mut target = q.clone();
    target.add_scaled(&penalty, -1.0);
    cert.neg_q = putinar_constraints(model, &target, pi, d, margin)?;
    Ok(cert)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CertDiagnostics {
    /// Largest coefficient gap between the re-expanded Gram matrices and
    /// the polynomial each one represents.
    pub reconstruction: f64,
    /// Largest coefficient gap in `ψ⁺ - ψ⁻ = μ⋆b`, `ζ⁺ - ζ⁻ = μ⋆[1;a]`
    /// (and `μ⁺ - μ⁻ = μ`).
    pub coupling: f64,
    /// Smallest Gram eigenvalue.
    #[serde(deserialize_with = "crate::conic::f64_or_nan")]
    pub min_eigenvalue: f64,
}

impl CertDiagnostics {
    fn merge(&mut self, other: CertDiagnostics) {
        self.reconstruction = self.reconstruction.max(other.reconstruction);
        self.coupling = self.coupling.max(other.coupling);
        self.min_eigenvalue = self.min_eigenvalue.min(other.min_eigenvalue);
    }

    pub fn empty() -> Self {
        CertDiagnostics {
            reconstruction: 0.0,
            coupling: 0.0,
            min_eigenvalue: f64::INFINITY,
        }
    }
}

/// Diagnostics of a Putinar certificate for the affine `target` (what the
/// certificate should equal, margin included).
pub fn diagnose_putinar(
    cert: &Putinar,
    target: &PolyExpr,
    set: &BsaSet,
    x: &[f64],
) -> CertDiagnostics {
    CertDiagnostics {
        reconstruction: coeff_residual(&cert.numeric(set, x), &target.value(x)),
        coupling: 0.0,
        min_eigenvalue: cert.min_eigenvalue(x),
    }
}

impl AlternativesCert {
    /// Reconstruction of every block plus the coupling identities, with
    /// each side re-expanded from its own Gram matrices.
    pub fn diagnose(
        &self,
        q: &PolyExpr,
        data: &Dataset,
        pi: &BsaSet,
        margin: f64,
        x: &[f64],
    ) -> CertDiagnostics {
        let mut out = CertDiagnostics::empty();
        let pair = |plus: &[Putinar], minus: &[Putinar], diffs: &[PolyExpr]| {
            let mut diag = CertDiagnostics::empty();
            for ((p, m), diff) in plus.iter().zip(minus).zip(diffs) {
                let pv = p.numeric(pi, x);
                let mv = m.numeric(pi, x);
                let mut lhs = pv.clone();
                add_terms(&mut lhs, &mv, -1.0);
                diag.coupling = diag.coupling.max(coeff_residual(&lhs, &diff.value(x)));
                diag.min_eigenvalue = diag
                    .min_eigenvalue
                    .min(p.min_eigenvalue(x).min(m.min_eigenvalue(x)));
                // ψ⁻ is built to equal ψ⁺ - diff; check that too
                let mut want = pv;
                add_terms(&mut want, &diff.value(x), -1.0);
                diag.reconstruction = diag.reconstruction.max(coeff_residual(&mv, &want));
            }
            diag
        };
        out.merge(pair(&self.psi_plus, &self.psi_minus, &self.mu_b));
        out.merge(pair(&self.zeta_plus, &self.zeta_minus, &self.mu_a));
        out.merge(pair(&self.mu_plus, &self.mu_minus, &self.mu));

        // -Q re-expanded from the numeric multipliers
        let (eu, ey, ew) = self.eps;
        let mut neg_q = q.value(x);
        *neg_q.entry(Monomial::one()).or_insert(0.0) -= margin;
        let h = residual_h(data);
        let mut sub = |certs: &[Putinar], s: f64| {
            for c in certs {
                add_terms(&mut neg_q, &c.numeric(pi, x), -s);
            }
        };
        sub(&self.psi_plus, eu);
        sub(&self.psi_minus, eu);
        sub(&self.zeta_plus, ey);
        sub(&self.zeta_minus, ey);
        sub(&self.mu_plus, ew.unwrap_or(0.0));
        sub(&self.mu_minus, ew.unwrap_or(0.0));
        for (ht, mt) in h.iter().zip(&self.mu) {
            add_terms(&mut neg_q, &mul_terms(&mt.value(x), ht), -1.0);
        }
        out.reconstruction = out
            .reconstruction
            .max(coeff_residual(&self.neg_q.numeric(pi, x), &neg_q));
        out.min_eigenvalue = out.min_eigenvalue.min(self.neg_q.min_eigenvalue(x));
        out
    }

    pub fn num_blocks(&self) -> usize {
        self.psi_plus.len() * 2 + self.zeta_plus.len() * 2 + self.mu_plus.len() * 2 + 1
    }

    pub fn to_json(&self, pi: &BsaSet, x: &[f64]) -> serde_json::Value {
        let list = |v: &[Putinar]| v.iter().map(|c| c.to_json(pi, x)).collect::<Vec<_>>();
        json!({
            "psi_plus": list(&self.psi_plus),
            "psi_minus": list(&self.psi_minus),
            "zeta_plus": list(&self.zeta_plus),
            "zeta_minus": list(&self.zeta_minus),
            "mu": self.mu.iter().map(|m| m.to_polynomial(&pi.vars, x)).collect::<Vec<_>>(),
            "mu_plus": list(&self.mu_plus),
            "mu_minus": list(&self.mu_minus),
            "neg_q": self.neg_q.to_json(pi, x),
        })
    }
}

/// Smallest value of `q` over the given plants (the certified polynomial
/// must stay nonnegative there).
pub fn min_over_plants(q: &Polynomial, plants: &[ArxModel]) -> f64 {
    plants
        .iter()
        .map(|p| {
            let pt: Vec<f64> = p.a.iter().chain(&p.b).copied().collect();
            q.eval_dense(&pt).unwrap_or(f64::NAN)
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{ClarabelSolver, ConicSolver};

    fn interval() -> BsaSet {
        let v = vec!["x".to_string()];
        let x = Polynomial::var(&v, "x");
        let one = Polynomial::constant(&v, 1.0);
        let mut k = BsaSet::new(v);
        k.inequalities.push(x.clone());
        k.inequalities.push(&one - &x);
        k
    }

    fn feasible(q: &Polynomial, k: &BsaSet, d: u32) -> bool {
        let mut model = ConicModel::new();
        let cert = putinar_constraints(&mut model, &PolyExpr::from_poly(q), k, d, 0.0).unwrap();
        let sol = ClarabelSolver::default().solve(&model).unwrap();
        if sol.status.has_solution() {
            let diag = diagnose_putinar(&cert, &PolyExpr::from_poly(q), k, &sol.x);
            assert!(diag.reconstruction < 1e-8, "{diag:?}");
        }
        sol.status.has_solution()
    }

    #[test]
    fn constant_one_at_degree_zero() {
        let k = interval();
        let one = Polynomial::constant(&k.vars, 1.0);
        assert!(feasible(&one, &k, 0));
    }

    #[test]
    fn x_one_minus_x_needs_quadratic_multipliers() {
        let k = interval();
        let x = Polynomial::var(&k.vars, "x");
        let q = &x * &(&Polynomial::constant(&k.vars, 1.0) - &x);
        assert!(!feasible(&q, &k, 1));
        assert!(feasible(&q, &k, 2));
    }

    #[test]
    fn negative_target_never_certified() {
        let k = interval();
        let q = &Polynomial::var(&k.vars, "x") - &Polynomial::constant(&k.vars, 2.0);
        for d in 1..=3 {
            assert!(!feasible(&q, &k, d));
        }
    }

    #[test]
    fn degree_overflow() {
        let k = interval();
        let x = Polynomial::var(&k.vars, "x");
        let q = &(&x * &x) * &x;
        let mut model = ConicModel::new();
        assert_eq!(
            putinar_constraints(&mut model, &PolyExpr::from_poly(&q), &k, 1, 0.0).unwrap_err(),
            CertifyError::DegreeOverflow { got: 3, max: 2 }
        );
    }

    #[test]
    fn archimedean_ball() {
        let k = interval();
        let a = archimedean_augment(&k, 4.0);
        assert_eq!(a.inequalities.len(), 3);
        assert_eq!(a.inequalities[2].degree(), 2);
        assert!(a.contains(&[0.5], 0.0));
        let twice = archimedean_augment(&a, 9.0);
        assert!(twice.contains(&[0.5], 0.0));
        assert!(!twice.contains(&[1.5], 0.0));
    }

    #[test]
    fn parameter_box_shape() {
        let pi = parameter_box(3, 2, 2.0, 2.0);
        assert_eq!(pi.inequalities.len(), 6);
        assert!(pi.contains(&[1.9, -1.9, 0.0, 1.0, -1.0], 0.0));
        assert!(!pi.contains(&[2.1, 0.0, 0.0, 0.0, 0.0], 0.0));
    }

    #[test]
    fn multiplier_degrees() {
        assert_eq!(multiplier_half_degree(1, 1), Some(0));
        assert_eq!(multiplier_half_degree(1, 2), Some(0));
        assert_eq!(multiplier_half_degree(2, 1), Some(1));
        assert_eq!(multiplier_half_degree(1, 3), None);
    }

    fn plant_data(eps: f64, horizon: usize) -> (ArxModel, Dataset, BsaSet) {
        let plant = ArxModel::new(vec![0.3, -0.2], vec![1.0]).unwrap();
        let (data, _, _) = crate::data::generate(&plant, horizon, eps, eps, 7).unwrap();
        (plant, data, parameter_box(2, 1, 2.0, 2.0))
    }

    fn lower_bound_holds(data: &Dataset, pi: &BsaSet, c: f64, d: u32) -> bool {
        // q = a1 - c
        let mut q = PolyExpr::from_poly(&Polynomial::var(&pi.vars, "a1"));
        q.add_at(Monomial::one(), &LinExpr::constant(-c), 1.0);
        let mut model = ConicModel::new();
        let cert = if data.eps_w.is_some() {
            alternatives_constraints_w(&mut model, &q, data, pi, d, 0.0)
        } else {
            alternatives_constraints(&mut model, &q, data, pi, d, 0.0)
        }
        .unwrap();
        let sol = ClarabelSolver::default().solve(&model).unwrap();
        if sol.status.has_solution() {
            let diag = cert.diagnose(&q, data, pi, 0.0, &sol.x);
            assert!(diag.reconstruction < 1e-8, "{diag:?}");
            assert!(diag.coupling < 1e-6, "{diag:?}");
        }
        sol.status.has_solution()
    }

    #[test]
    fn alternatives_bounds_bracket_true_plant() {
        let (plant, data, pi) = plant_data(0.01, 6);
        let a1 = plant.a[0];
        assert!(lower_bound_holds(&data, &pi, -2.0, 1));
        assert!(lower_bound_holds(&data, &pi, a1 - 0.5, 1));
        assert!(!lower_bound_holds(&data, &pi, a1 + 0.01, 1));
    }

    #[test]
    fn noise_free_data_pins_the_plant() {
        let (plant, data, pi) = plant_data(0.0, 4);
        let a1 = plant.a[0];
        assert!(lower_bound_holds(&data, &pi, a1 - 1e-3, 1));
        assert!(!lower_bound_holds(&data, &pi, a1 + 1e-3, 1));
    }

    #[test]
    fn process_noise_variant_at_zero_matches_base() {
        let (plant, data, pi) = plant_data(0.01, 5);
        let w = data.with_bounds(data.eps_u, data.eps_y, Some(0.0));
        let a1 = plant.a[0];
        for c in [a1 - 0.5, a1 + 0.01] {
            assert_eq!(
                lower_bound_holds(&data, &pi, c, 1),
                lower_bound_holds(&w, &pi, c, 1)
            );
        }
        let loose = data.with_bounds(data.eps_u, data.eps_y, Some(0.05));
        assert!(!lower_bound_holds(&loose, &pi, a1 + 0.01, 1));
    }

    #[test]
    fn putinar_over_consistency_set_agrees() {
        // both certificates must reject bounds the true plant violates
        let (plant, data, _) = plant_data(0.01, 3);
        let set = crate::data::consistency_set(&data);
        let a1 = plant.a[0];
        let mut q = Polynomial::var(&set.vars, "a1");
        q = &q - &Polynomial::constant(&set.vars, a1 + 0.01);
        assert!(!feasible(&q, &archimedean_augment(&set, 50.0), 1));
    }
}
