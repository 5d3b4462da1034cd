//! Polynomials with affine-in-decision-variable coefficients, and Gram
//! blocks tying them to PSD cones.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::conic::{svec_index, svec_len, unpack_symmetric, ConicModel, LinExpr};
use crate::poly::{Monomial, Polynomial};

/// `Σ_α c_α(x) z^α` where each `c_α` is affine in the decision vector `x`
/// and `z` ranges over a fixed indeterminate registry.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolyExpr {
    pub terms: BTreeMap<Monomial, LinExpr>,
}

impl PolyExpr {
    pub fn zero() -> Self {
        PolyExpr::default()
    }

    pub fn constant(e: LinExpr) -> Self {
        let mut p = PolyExpr::zero();
        p.add_at(Monomial::one(), &e, 1.0);
        p
    }

    /// Lift a numeric polynomial; monomial ids are kept as they are.
    pub fn from_poly(p: &Polynomial) -> Self {
        let mut out = PolyExpr::zero();
        for (m, c) in p.terms() {
            out.add_at(m.clone(), &LinExpr::constant(c), 1.0);
        }
        out
    }

    /// A polynomial of degree `<= degree` in `nvars` indeterminates with one
    /// fresh decision variable per coefficient.
    pub fn free(model: &mut ConicModel, nvars: usize, degree: u32) -> Self {
        let mut out = PolyExpr::zero();
        for m in crate::poly::monomial_basis(nvars, degree) {
            out.terms.insert(m, LinExpr::var(model.add_var()));
        }
        out
    }

    pub fn add_at(&mut self, m: Monomial, e: &LinExpr, s: f64) {
        let slot = self.terms.entry(m).or_default();
        slot.add_scaled(e, s);
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &PolyExpr, s: f64) {
        for (m, e) in &other.terms {
            self.add_at(m.clone(), e, s);
        }
    }

    pub fn scaled(&self, s: f64) -> PolyExpr {
        let mut out = PolyExpr::zero();
        out.add_scaled(self, s);
        out
    }

    pub fn mul_poly(&self, p: &Polynomial) -> PolyExpr {
        let mut out = PolyExpr::zero();
        for (m1, e) in &self.terms {
            for (m2, c) in p.terms() {
                out.add_at(m1.mul(m2), e, c);
            }
        }
        out
    }

    pub fn mul_monomial(&self, m: &Monomial, c: f64) -> PolyExpr {
        let mut out = PolyExpr::zero();
        for (m1, e) in &self.terms {
            out.add_at(m1.mul(m), e, c);
        }
        out
    }

    /// Highest degree with a coefficient that is not identically zero.
    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .filter(|(_, e)| !e.is_zero())
            .map(|(m, _)| m.degree())
            .max()
            .unwrap_or(0)
    }

    /// Numeric coefficients at decision point `x`.
    pub fn value(&self, x: &[f64]) -> BTreeMap<Monomial, f64> {
        self.terms
            .iter()
            .map(|(m, e)| (m.clone(), e.eval(x)))
            .filter(|(_, v)| *v != 0.0)
            .collect()
    }

    pub fn to_polynomial(&self, vars: &[String], x: &[f64]) -> Polynomial {
        Polynomial::from_terms(vars, self.value(x))
    }
}

/// Largest coefficient difference between two numeric term maps.
pub fn coeff_residual(p: &BTreeMap<Monomial, f64>, q: &BTreeMap<Monomial, f64>) -> f64 {
    let mut worst = 0.0f64;
    for (m, &c) in p {
        worst = worst.max((c - q.get(m).copied().unwrap_or(0.0)).abs());
    }
    for (m, &c) in q {
        if !p.contains_key(m) {
            worst = worst.max(c.abs());
        }
    }
    worst
}

/// A PSD matrix `G` over a monomial basis `v`, representing `vᵀ G v`.
#[derive(Clone, Debug)]
pub struct GramBlock {
    pub basis: Vec<Monomial>,
    /// Upper triangle, column-major.
    pub entries: Vec<LinExpr>,
}

impl GramBlock {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Unconstrained PSD Gram matrix with a fresh variable per entry.
    pub fn free(model: &mut ConicModel, basis: Vec<Monomial>) -> GramBlock {
        let n = basis.len();
        let entries: Vec<LinExpr> = (0..svec_len(n))
            .map(|_| LinExpr::var(model.add_var()))
            .collect();
        if n > 0 {
            model.add_psd(n, entries.clone());
        }
        GramBlock { basis, entries }
    }

    /// Gram block whose polynomial equals `target`.
    ///
    /// Entries sharing a product monomial are parametrized so that the
    /// coefficient match holds identically: one pivot entry per monomial
    /// absorbs the target coefficient, the others become free variables.
    /// Target monomials not reachable from the basis are forced to zero.
    pub fn equal_to(model: &mut ConicModel, target: &PolyExpr, basis: Vec<Monomial>) -> GramBlock {
        let n = basis.len();
        let mut groups: BTreeMap<Monomial, Vec<(usize, usize)>> = BTreeMap::new();
        for j in 0..n {
            for i in 0..=j {
                groups
                    .entry(basis[i].mul(&basis[j]))
                    .or_default()
                    .push((i, j));
            }
        }
        for (m, e) in &target.terms {
            if !groups.contains_key(m) && !e.is_zero() {
                model.add_zero(e.clone());
            }
        }
        let mut entries = vec![LinExpr::zero(); svec_len(n)];
        let weight = |(i, j): (usize, usize)| if i == j { 1.0 } else { 2.0 };
        for (m, pairs) in &groups {
            let pivot_pos = pairs.iter().position(|&(i, j)| i == j).unwrap_or(0);
            let pivot = pairs[pivot_pos];
            let mut rest = target.terms.get(m).cloned().unwrap_or_default();
            for (k, &p) in pairs.iter().enumerate() {
                if k == pivot_pos {
                    continue;
                }
                let v = model.add_var();
                entries[svec_index(p.0, p.1)] = LinExpr::var(v);
                rest.add_term(v, -weight(p));
            }
            entries[svec_index(pivot.0, pivot.1)] = rest.scaled(1.0 / weight(pivot));
        }
        if n > 0 {
            model.add_psd(n, entries.clone());
        }
        GramBlock { basis, entries }
    }

    /// `vᵀ G v` with affine coefficients.
    pub fn polynomial(&self) -> PolyExpr {
        let mut out = PolyExpr::zero();
        let n = self.basis.len();
        for j in 0..n {
            for i in 0..=j {
                let w = if i == j { 1.0 } else { 2.0 };
                out.add_at(
                    self.basis[i].mul(&self.basis[j]),
                    &self.entries[svec_index(i, j)],
                    w,
                );
            }
        }
        out
    }

    pub fn matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let vals: Vec<f64> = self.entries.iter().map(|e| e.eval(x)).collect();
        unpack_symmetric(self.basis.len(), &vals)
    }

    /// Numeric re-expansion `vᵀ G v` of the solved matrix.
    pub fn expand(&self, x: &[f64]) -> BTreeMap<Monomial, f64> {
        let g = self.matrix(x);
        let n = self.basis.len();
        let mut out: BTreeMap<Monomial, f64> = BTreeMap::new();
        for i in 0..n {
            for j in 0..n {
                *out.entry(self.basis[i].mul(&self.basis[j])).or_insert(0.0) += g[(i, j)];
            }
        }
        out.retain(|_, v| *v != 0.0);
        out
    }

    pub fn min_eigenvalue(&self, x: &[f64]) -> f64 {
        crate::conic::min_eigenvalue(&self.matrix(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{ClarabelSolver, ConicSolver};
    use crate::poly::monomial_basis;

    fn vars() -> Vec<String> {
        vec!["x".to_string(), "y".to_string()]
    }

    #[test]
    fn gram_polynomial_of_identity() {
        let mut model = ConicModel::new();
        let g = GramBlock::free(&mut model, monomial_basis(1, 1));
        let x: Vec<f64> = vec![1.0, 0.0, 1.0];
        let p = g.polynomial().value(&x);
        // 1 + x^2
        assert_eq!(p.len(), 2);
        assert_eq!(p[&Monomial::one()], 1.0);
        assert_eq!(p[&Monomial::from_pairs([(0, 2)])], 1.0);
    }

    #[test]
    fn image_form_reproduces_target() {
        let v = vars();
        // (x - y)^2 + (1 + x)^2 is SOS
        let px = Polynomial::var(&v, "x");
        let py = Polynomial::var(&v, "y");
        let one = Polynomial::constant(&v, 1.0);
        let d1 = &px - &py;
        let d2 = &one + &px;
        let t = &(&d1 * &d1) + &(&d2 * &d2);
        let mut model = ConicModel::new();
        let g = GramBlock::equal_to(&mut model, &PolyExpr::from_poly(&t), monomial_basis(2, 1));
        let sol = ClarabelSolver::default().solve(&model).unwrap();
        assert!(sol.status.has_solution());
        let exp = g.expand(&sol.x);
        let want: BTreeMap<Monomial, f64> = t.terms().map(|(m, c)| (m.clone(), c)).collect();
        assert!(coeff_residual(&exp, &want) < 1e-12);
        assert!(g.min_eigenvalue(&sol.x) > -1e-8);
    }

    #[test]
    fn image_form_rejects_negative_polynomial() {
        let v = vars();
        let t = &Polynomial::var(&v, "x") * &Polynomial::var(&v, "y");
        let mut model = ConicModel::new();
        GramBlock::equal_to(&mut model, &PolyExpr::from_poly(&t), monomial_basis(2, 1));
        let sol = ClarabelSolver::default().solve(&model).unwrap();
        assert!(!sol.status.has_solution());
    }

    #[test]
    fn unreachable_monomial_is_forced_to_zero() {
        let v = vars();
        let x3 = Polynomial::from_terms(&v, [(Monomial::from_pairs([(0, 3)]), 1.0)]);
        let mut model = ConicModel::new();
        GramBlock::equal_to(&mut model, &PolyExpr::from_poly(&x3), monomial_basis(2, 1));
        assert_eq!(model.stats().zero_rows, 1);
    }
}
