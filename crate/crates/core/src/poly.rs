//! Sparse multivariate polynomials over named indeterminates.
//!
//! Monomials are stored sparsely as `(variable id, exponent)` pairs sorted by
//! id, with no zero exponents. Polynomials carry a registry of variable names;
//! binary operations on polynomials with different registries merge them by
//! name. Coefficients are `f64` and terms with magnitude below [`PRUNE_TOL`]
//! are dropped after every arithmetic operation.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Terms with |c| below this are treated as zero.
pub const PRUNE_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum PolyError {
    #[error("cross-correlation of an empty sequence")]
    EmptySequence,
    #[error("no value assigned to indeterminate `{0}`")]
    MissingAssignment(String),
    #[error("point has {got} coordinates, registry has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("malformed polynomial: {0}")]
    Malformed(String),
}

/// A monomial `x^alpha`, stored as sorted `(var, exponent)` pairs.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(usize, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(id: usize) -> Self {
        Monomial(vec![(id, 1)])
    }

    /// Build from `(var, exponent)` pairs in any order; zero exponents are
    /// dropped and repeated variables accumulate.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, u32)>) -> Self {
        let mut map: BTreeMap<usize, u32> = BTreeMap::new();
        for (v, e) in pairs {
            *map.entry(v).or_default() += e;
        }
        Monomial(map.into_iter().filter(|&(_, e)| e > 0).collect())
    }

    pub fn from_dense(exps: &[u32]) -> Self {
        Monomial(
            exps.iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(i, &e)| (i, e))
                .collect(),
        )
    }

    pub fn to_dense(&self, nvars: usize) -> Vec<u32> {
        let mut out = vec![0; nvars];
        for &(v, e) in &self.0 {
            out[v] = e;
        }
        out
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    pub fn exponent(&self, var: usize) -> u32 {
        self.0
            .binary_search_by_key(&var, |&(v, _)| v)
            .map(|i| self.0[i].1)
            .unwrap_or(0)
    }

    pub fn pairs(&self) -> &[(usize, u32)] {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest variable id referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        self.0.last().map(|&(v, _)| v)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    /// Rename variables through `map` (old id -> new id).
    pub fn remap(&self, map: &[usize]) -> Monomial {
        Monomial::from_pairs(self.0.iter().map(|&(v, e)| (map[v], e)))
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        self.0
            .iter()
            .map(|&(v, e)| point[v].powi(e as i32))
            .product()
    }
}

/// Graded order: total degree first, then lexicographic with variable 0 the
/// most significant (so `1 < x0 < x1 < x0^2 < x0 x1 < x1^2`).
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        loop {
            match (a.get(i), b.get(j)) {
                (None, None) => return Ordering::Equal,
                // same degree, so a longer tail on one side is impossible
                // without an earlier difference
                (Some(_), None) => return Ordering::Less,
                (None, Some(_)) => return Ordering::Greater,
                (Some(&(va, ea)), Some(&(vb, eb))) => {
                    if va < vb {
                        return Ordering::Less;
                    }
                    if vb < va {
                        return Ordering::Greater;
                    }
                    if ea != eb {
                        return eb.cmp(&ea);
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|&(v, e)| {
                if e == 1 {
                    format!("x{v}")
                } else {
                    format!("x{v}^{e}")
                }
            })
            .collect();
        write!(f, "{}", parts.join("*"))
    }
}

/// All monomials in `var_count` variables of total degree at most `degree`,
/// sorted in graded order. The count is `C(var_count + degree, degree)`.
pub fn monomial_basis(var_count: usize, degree: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    let mut exps = vec![0u32; var_count];
    fn rec(pos: usize, left: u32, exps: &mut Vec<u32>, out: &mut Vec<Monomial>) {
        if pos == exps.len() {
            out.push(Monomial::from_dense(exps));
            return;
        }
        for e in 0..=left {
            exps[pos] = e;
            rec(pos + 1, left - e, exps, out);
        }
        exps[pos] = 0;
    }
    rec(0, degree, &mut exps, &mut out);
    out.sort();
    out
}

/// Binomial coefficient `C(n, k)` in u128 (exact for all sizes used here).
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Sparse polynomial with real coefficients over a named variable registry.
#[derive(Clone, PartialEq, Default)]
pub struct Polynomial {
    vars: Vec<String>,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(vars: &[String]) -> Self {
        Polynomial {
            vars: vars.to_vec(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(vars: &[String], c: f64) -> Self {
        Self::from_terms(vars, [(Monomial::one(), c)])
    }

    /// The indeterminate `name`, which must be in `vars`.
    pub fn var(vars: &[String], name: &str) -> Self {
        let id = vars
            .iter()
            .position(|v| v == name)
            .unwrap_or_else(|| panic!("`{name}` is not in the registry"));
        Self::from_terms(vars, [(Monomial::var(id), 1.0)])
    }

    pub fn from_terms(vars: &[String], terms: impl IntoIterator<Item = (Monomial, f64)>) -> Self {
        let mut map: BTreeMap<Monomial, f64> = BTreeMap::new();
        for (m, c) in terms {
            if let Some(v) = m.max_var() {
                assert!(
                    v < vars.len(),
                    "monomial references unregistered variable {v}"
                );
            }
            *map.entry(m).or_default() += c;
        }
        let mut p = Polynomial {
            vars: vars.to_vec(),
            terms: map,
        };
        p.prune();
        p
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| c.abs() >= PRUNE_TOL);
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Largest absolute coefficient.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        Polynomial::from_terms(
            &self.vars,
            self.terms.iter().map(|(m, &c)| (m.clone(), c * s)),
        )
    }

    /// Express this polynomial over `registry`, which must contain every
    /// variable of `self`.
    pub fn with_vars(&self, registry: &[String]) -> Polynomial {
        let map: Vec<usize> = self
            .vars
            .iter()
            .map(|name| {
                registry
                    .iter()
                    .position(|r| r == name)
                    .unwrap_or_else(|| panic!("registry lacks `{name}`"))
            })
            .collect();
        Polynomial::from_terms(
            registry,
            self.terms.iter().map(|(m, &c)| (m.remap(&map), c)),
        )
    }

    fn aligned(&self, other: &Polynomial) -> (Polynomial, Polynomial) {
        if self.vars == other.vars {
            return (self.clone(), other.clone());
        }
        let mut merged = self.vars.clone();
        for v in &other.vars {
            if !merged.contains(v) {
                merged.push(v.clone());
            }
        }
        (self.with_vars(&merged), other.with_vars(&merged))
    }

    /// Evaluate with values given in registry order.
    pub fn eval_dense(&self, point: &[f64]) -> Result<f64, PolyError> {
        if point.len() != self.vars.len() {
            return Err(PolyError::DimensionMismatch {
                expected: self.vars.len(),
                got: point.len(),
            });
        }
        Ok(self.terms.iter().map(|(m, &c)| c * m.eval(point)).sum())
    }

    /// Evaluate with values given by variable name.
    pub fn eval(&self, point: &HashMap<String, f64>) -> Result<f64, PolyError> {
        let dense = self
            .vars
            .iter()
            .map(|v| {
                point
                    .get(v)
                    .copied()
                    .ok_or_else(|| PolyError::MissingAssignment(v.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.eval_dense(&dense)
    }

    /// Substitute values for the variables in `fixed` (by registry index),
    /// keeping the registry unchanged.
    pub fn partial_eval(&self, fixed: &HashMap<usize, f64>) -> Polynomial {
        Polynomial::from_terms(
            &self.vars,
            self.terms.iter().map(|(m, &c)| {
                let mut coef = c;
                let mut rest = Vec::new();
                for &(v, e) in m.pairs() {
                    match fixed.get(&v) {
                        Some(x) => coef *= x.powi(e as i32),
                        None => rest.push((v, e)),
                    }
                }
                (Monomial::from_pairs(rest), coef)
            }),
        )
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, &c) in &self.terms {
            let sign = if c < 0.0 {
                "-"
            } else if first {
                ""
            } else {
                "+"
            };
            if !first {
                write!(f, " ")?;
            }
            let mono: Vec<String> = m
                .pairs()
                .iter()
                .map(|&(v, e)| {
                    if e == 1 {
                        self.vars[v].clone()
                    } else {
                        format!("{}^{}", self.vars[v], e)
                    }
                })
                .collect();
            if mono.is_empty() {
                write!(f, "{sign}{}", c.abs())?;
            } else if (c.abs() - 1.0).abs() < PRUNE_TOL {
                write!(f, "{sign}{}", mono.join("*"))?;
            } else {
                write!(f, "{sign}{}*{}", c.abs(), mono.join("*"))?;
            }
            first = false;
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let (mut p, q) = self.aligned(rhs);
        for (m, c) in q.terms {
            *p.terms.entry(m).or_default() += c;
        }
        p.prune();
        p
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let (p, q) = self.aligned(rhs);
        let mut out: BTreeMap<Monomial, f64> = BTreeMap::new();
        for (mp, cp) in &p.terms {
            for (mq, cq) in &q.terms {
                *out.entry(mp.mul(mq)).or_default() += cp * cq;
            }
        }
        let mut r = Polynomial {
            vars: p.vars,
            terms: out,
        };
        r.prune();
        r
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: Polynomial) -> Polynomial {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

#[derive(Serialize, Deserialize)]
struct TermJson {
    exp: Vec<u32>,
    c: f64,
}

#[derive(Serialize, Deserialize)]
struct PolyJson {
    vars: Vec<String>,
    terms: Vec<TermJson>,
}

impl Serialize for Polynomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PolyJson {
            vars: self.vars.clone(),
            terms: self
                .terms
                .iter()
                .map(|(m, &c)| TermJson {
                    exp: m.to_dense(self.vars.len()),
                    c,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = PolyJson::deserialize(d)?;
        let n = raw.vars.len();
        for t in &raw.terms {
            if t.exp.len() != n {
                return Err(serde::de::Error::custom(PolyError::Malformed(format!(
                    "exponent vector of length {} for {} variables",
                    t.exp.len(),
                    n
                ))));
            }
        }
        Ok(Polynomial::from_terms(
            &raw.vars,
            raw.terms
                .iter()
                .map(|t| (Monomial::from_dense(&t.exp), t.c)),
        ))
    }
}

/// A finite sequence `{x_t}` over a contiguous index range `start..=end`.
/// Reads outside the range yield `None` (treated as zero by callers).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffSequence<T> {
    pub start: i64,
    pub values: Vec<T>,
}

impl<T> CoeffSequence<T> {
    pub fn new(start: i64, values: Vec<T>) -> Self {
        CoeffSequence { start, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Last valid index (`start - 1` when empty).
    pub fn end(&self) -> i64 {
        self.start + self.values.len() as i64 - 1
    }

    pub fn get(&self, t: i64) -> Option<&T> {
        if t < self.start {
            return None;
        }
        self.values.get((t - self.start) as usize)
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<i64> {
        self.start..=self.end()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &T)> {
        self.values
            .iter()
            .enumerate()
            .map(move |(k, v)| (self.start + k as i64, v))
    }
}

impl CoeffSequence<f64> {
    /// Zero-padded read.
    pub fn at(&self, t: i64) -> f64 {
        self.get(t).copied().unwrap_or(0.0)
    }
}

/// Cross-correlation with a caller-supplied multiply-accumulate.
///
/// For `x` over `l..=k` and `y` over `m..=n` the result is indexed
/// `l..=k+n-m` with `out_j = sum_{i=m}^{n} x_{i+j-n+m-1} * y_i`; entries of
/// `x` outside its range contribute nothing.
pub fn cross_correlate_with<X, Y, Z, F>(
    x: &CoeffSequence<X>,
    y: &CoeffSequence<Y>,
    mut mac: F,
) -> Result<CoeffSequence<Z>, PolyError>
where
    Z: Default,
    F: FnMut(&mut Z, &X, &Y),
{
    if x.is_empty() || y.is_empty() {
        return Err(PolyError::EmptySequence);
    }
    let (l, k) = (x.start, x.end());
    let (m, n) = (y.start, y.end());
    let mut out = Vec::with_capacity((k + n - m - l + 1) as usize);
    for j in l..=k + n - m {
        let mut acc = Z::default();
        for i in m..=n {
            if let Some(xv) = x.get(i + j - n + m - 1) {
                mac(&mut acc, xv, y.get(i).expect("index inside y range"));
            }
        }
        out.push(acc);
    }
    Ok(CoeffSequence::new(l, out))
}

pub fn cross_correlate(
    x: &CoeffSequence<f64>,
    y: &CoeffSequence<f64>,
) -> Result<CoeffSequence<f64>, PolyError> {
    cross_correlate_with(x, y, |acc: &mut f64, a, b| *acc += a * b)
}

/// Variable names `prefix1..prefixN`.
pub fn indexed_names(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}{i}")).collect()
}
