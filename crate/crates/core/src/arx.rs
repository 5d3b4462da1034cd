//! ARX plants, compensators and closed-loop coefficient algebra.
//!
//! Everything is in the lag operator: `A(λ) = Σ a_i λ^i`, `B(λ) = Σ b_i λ^i`,
//! both starting at `λ^1`. A compensator `B̃/(1 + Ã)` in negative feedback
//! with `B/(1 + A)` has closed-loop denominator
//! `(1 + A)(1 + Ã) + B·B̃`, and `a_cl` collects its `λ^1..` coefficients.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{indexed_names, CoeffSequence, Polynomial};

#[derive(Debug, Error, PartialEq)]
pub enum ArxError {
    #[error("invalid orders: need n_a > n_b >= 1, got n_a = {n_a}, n_b = {n_b}")]
    InvalidOrders { n_a: usize, n_b: usize },
    #[error("non-finite coefficient")]
    NonFinite,
    #[error("input sequence covers {have:?}, simulation needs {need:?}")]
    InputRange { need: (i64, i64), have: (i64, i64) },
    #[error("initial condition has length {got}, expected {expected}")]
    InitialCondition { expected: usize, got: usize },
    #[error("decay rate {0} is not in [0, 1)")]
    NotContractive(f64),
}

/// `y_t = -Σ a_i y_{t-i} + Σ b_i u_{t-i}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArxModel {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl ArxModel {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self, ArxError> {
        if b.is_empty() || a.len() <= b.len() {
            return Err(ArxError::InvalidOrders {
                n_a: a.len(),
                n_b: b.len(),
            });
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(ArxError::NonFinite);
        }
        Ok(ArxModel { a, b })
    }

    pub fn n_a(&self) -> usize {
        self.a.len()
    }

    pub fn n_b(&self) -> usize {
        self.b.len()
    }

    /// The example plant `λ² / (1 + 0.5λ − 1.21λ² − 0.605λ³)`.
    pub fn example_plant() -> Self {
        ArxModel::new(vec![0.5, -1.21, -0.605], vec![0.0, 1.0]).expect("valid orders")
    }
}

/// Dynamic output-feedback compensator `B̃(λ) / (1 + Ã(λ))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Compensator {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl Compensator {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self, ArxError> {
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(ArxError::NonFinite);
        }
        Ok(Compensator { a, b })
    }

    pub fn zero(n_a: usize, n_b: usize) -> Self {
        Compensator {
            a: vec![0.0; n_a],
            b: vec![0.0; n_b],
        }
    }

    pub fn n_a(&self) -> usize {
        self.a.len()
    }

    pub fn n_b(&self) -> usize {
        self.b.len()
    }
}

/// Length of `a_cl` for the given plant and compensator orders. Equal to
/// `ñ_a + n_a` whenever `ñ_b <= ñ_a + n_a - n_b`, which holds for every
/// order pair used in practice; otherwise the `B·B̃` product is longer and
/// sets the length.
pub fn closed_loop_len(n_a: usize, n_b: usize, ctrl_na: usize, ctrl_nb: usize) -> usize {
    (n_a + ctrl_na).max(n_b + ctrl_nb)
}

/// One additive contribution to a closed-loop coefficient. Indices are
/// 1-based lags, matching `a_i`, `ã_i`, `b_i`, `b̃_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClosedLoopTerm {
    PlantA(usize),
    CtrlA(usize),
    PlantACtrlA(usize, usize),
    PlantBCtrlB(usize, usize),
}

/// For each `k = 1..n_cl`, the terms whose sum is `a_cl_k`:
/// `a_k + ã_k + Σ_{i+j=k} a_i ã_j + Σ_{i+j=k} b_i b̃_j`.
pub fn closed_loop_stencil(
    n_a: usize,
    n_b: usize,
    ctrl_na: usize,
    ctrl_nb: usize,
) -> Vec<Vec<ClosedLoopTerm>> {
    let n_cl = closed_loop_len(n_a, n_b, ctrl_na, ctrl_nb);
    let mut out = vec![Vec::new(); n_cl];
    for (k, terms) in out.iter_mut().enumerate() {
        let k = k + 1;
        if k <= n_a {
            terms.push(ClosedLoopTerm::PlantA(k));
        }
        if k <= ctrl_na {
            terms.push(ClosedLoopTerm::CtrlA(k));
        }
        for i in 1..=n_a {
            if k > i && k - i <= ctrl_na {
                terms.push(ClosedLoopTerm::PlantACtrlA(i, k - i));
            }
        }
        for i in 1..=n_b {
            if k > i && k - i <= ctrl_nb {
                terms.push(ClosedLoopTerm::PlantBCtrlB(i, k - i));
            }
        }
    }
    out
}

/// Closed-loop coefficients `a_cl`, always of full length `n_cl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopCoeffs(pub Vec<f64>);

impl ClosedLoopCoeffs {
    pub fn l1_norm(&self) -> f64 {
        superstable_margin(&self.0)
    }
}

pub fn closed_loop_coefficients(plant: &ArxModel, ctrl: &Compensator) -> ClosedLoopCoeffs {
    let stencil = closed_loop_stencil(plant.n_a(), plant.n_b(), ctrl.n_a(), ctrl.n_b());
    ClosedLoopCoeffs(
        stencil
            .iter()
            .map(|terms| {
                terms
                    .iter()
                    .map(|t| match *t {
                        ClosedLoopTerm::PlantA(i) => plant.a[i - 1],
                        ClosedLoopTerm::CtrlA(j) => ctrl.a[j - 1],
                        ClosedLoopTerm::PlantACtrlA(i, j) => plant.a[i - 1] * ctrl.a[j - 1],
                        ClosedLoopTerm::PlantBCtrlB(i, j) => plant.b[i - 1] * ctrl.b[j - 1],
                    })
                    .sum()
            })
            .collect(),
    )
}

/// Plant indeterminate names `a1..a{n_a}, b1..b{n_b}`, in that order.
pub fn plant_vars(n_a: usize, n_b: usize) -> Vec<String> {
    let mut v = indexed_names("a", n_a);
    v.extend(indexed_names("b", n_b));
    v
}

/// `a_cl` with the plant left symbolic over [`plant_vars`]; each entry is
/// affine in `(a, b)`.
pub fn closed_loop_symbolic(n_a: usize, n_b: usize, ctrl: &Compensator) -> Vec<Polynomial> {
    let vars = plant_vars(n_a, n_b);
    let av = |i: usize| Polynomial::var(&vars, &format!("a{i}"));
    let bv = |i: usize| Polynomial::var(&vars, &format!("b{i}"));
    closed_loop_stencil(n_a, n_b, ctrl.n_a(), ctrl.n_b())
        .iter()
        .map(|terms| {
            terms.iter().fold(Polynomial::zero(&vars), |acc, t| {
                let term = match *t {
                    ClosedLoopTerm::PlantA(i) => av(i),
                    ClosedLoopTerm::CtrlA(j) => Polynomial::constant(&vars, ctrl.a[j - 1]),
                    ClosedLoopTerm::PlantACtrlA(i, j) => av(i).scale(ctrl.a[j - 1]),
                    ClosedLoopTerm::PlantBCtrlB(i, j) => bv(i).scale(ctrl.b[j - 1]),
                };
                &acc + &term
            })
        })
        .collect()
}

/// `‖coeffs‖₁`; the system is superstable iff this is `< 1`.
pub fn superstable_margin(coeffs: &[f64]) -> f64 {
    coeffs.iter().map(|c| c.abs()).sum()
}

/// Upper bound on `|y_t|` for `t >= 1` of a free response with `‖a‖₁ <= γ`:
/// `γ^{t/n} · max|y_hist|`.
///
/// Each sample is at most `γ` times the largest of the previous `n`, so
/// `|y_t| <= γ^{ceil(t/n)} max|y_hist|`, which is bounded by `γ^{t/n}`.
pub fn decay_envelope(gamma: f64, n: usize, y_hist: &[f64], t: usize) -> Result<f64, ArxError> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(ArxError::NotContractive(gamma));
    }
    let m = y_hist.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if t == 0 {
        return Ok(m);
    }
    Ok(gamma.powf(t as f64 / n.max(1) as f64) * m)
}

/// Open-loop simulation over `t = 1..T`.
///
/// `u` must cover `(1 - n_b)..=(T - 1)`; `y_init` holds `y_{1-n_a}..y_0` in
/// time order.
pub fn simulate(
    model: &ArxModel,
    u: &CoeffSequence<f64>,
    y_init: &[f64],
    horizon: usize,
) -> Result<CoeffSequence<f64>, ArxError> {
    let full = simulate_full(model, u, y_init, horizon)?;
    Ok(CoeffSequence::new(1, full.values[model.n_a()..].to_vec()))
}

/// As [`simulate`] but returns `y` over `(1 - n_a)..=T`, initial segment
/// included.
pub fn simulate_full(
    model: &ArxModel,
    u: &CoeffSequence<f64>,
    y_init: &[f64],
    horizon: usize,
) -> Result<CoeffSequence<f64>, ArxError> {
    let (n_a, n_b) = (model.n_a() as i64, model.n_b() as i64);
    let t_end = horizon as i64;
    let need = (1 - n_b, t_end - 1);
    if horizon > 0 && (u.start > need.0 || u.end() < need.1) {
        return Err(ArxError::InputRange {
            need,
            have: (u.start, u.end()),
        });
    }
    if y_init.len() != model.n_a() {
        return Err(ArxError::InitialCondition {
            expected: model.n_a(),
            got: y_init.len(),
        });
    }
    let mut y = y_init.to_vec();
    // y[k] holds y_{k + 1 - n_a}
    for t in 1..=t_end {
        let mut v = 0.0;
        for i in 1..=n_a {
            v -= model.a[(i - 1) as usize] * y[(t - i + n_a - 1) as usize];
        }
        for i in 1..=n_b {
            v += model.b[(i - 1) as usize] * u.at(t - i);
        }
        y.push(v);
    }
    Ok(CoeffSequence::new(1 - n_a, y))
}

/// Free response of the closed loop `y_t = -Σ a_cl_i y_{t-i}` for
/// `t = 1..horizon` from `y_hist = [y_{1-n}, .., y_0]`.
pub fn free_response(a_cl: &[f64], y_hist: &[f64], horizon: usize) -> Vec<f64> {
    let n = a_cl.len();
    assert_eq!(y_hist.len(), n, "history length must equal the loop order");
    let mut y = y_hist.to_vec();
    for t in 0..horizon {
        let k = n + t;
        let v: f64 = (1..=n).map(|i| -a_cl[i - 1] * y[k - i]).sum();
        y.push(v);
    }
    y.split_off(n)
}

/// Simulate plant and compensator in negative feedback with zero reference:
/// plant `(1 + A) y = B u`, compensator `(1 + Ã) u = -B̃ y`.
///
/// Histories are in time order ending at time 0 and must have length at
/// least `max(n_a, ñ_b)` for `y` and `max(n_b, ñ_a)` for `u`. Returns
/// `(y_1..y_T, u_1..u_T)`.
pub fn simulate_feedback(
    plant: &ArxModel,
    ctrl: &Compensator,
    y_hist: &[f64],
    u_hist: &[f64],
    horizon: usize,
) -> (Vec<f64>, Vec<f64>) {
    let hy = y_hist.len();
    let hu = u_hist.len();
    assert!(hy >= plant.n_a().max(ctrl.n_b()), "y history too short");
    assert!(hu >= plant.n_b().max(ctrl.n_a()), "u history too short");
    let mut y = y_hist.to_vec();
    let mut u = u_hist.to_vec();
    for t in 0..horizon {
        let (ky, ku) = (hy + t, hu + t);
        let yt: f64 = -(1..=plant.n_a())
            .map(|i| plant.a[i - 1] * y[ky - i])
            .sum::<f64>()
            + (1..=plant.n_b())
                .map(|i| plant.b[i - 1] * u[ku - i])
                .sum::<f64>();
        y.push(yt);
        let ut: f64 = -(1..=ctrl.n_a())
            .map(|i| ctrl.a[i - 1] * u[ku - i])
            .sum::<f64>()
            - (1..=ctrl.n_b())
                .map(|i| ctrl.b[i - 1] * y[ky - i])
                .sum::<f64>();
        u.push(ut);
    }
    (y.split_off(hy), u.split_off(hu))
}

/// Convert lag-domain coefficients `1 + Σ c_i λ^i` of order `n` into
/// descending powers of `z`: `z^n + c_1 z^{n-1} + .. + c_n`.
pub fn to_z_domain(coeffs: &[f64]) -> Vec<f64> {
    let mut out = vec![1.0];
    out.extend_from_slice(coeffs);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn low_order_ctrl() -> Compensator {
        Compensator::new(vec![-0.5, 1.46, -0.73], vec![0.0, 1.829]).unwrap()
    }

    #[test]
    fn orders_are_validated() {
        assert!(ArxModel::new(vec![0.1], vec![1.0]).is_err());
        assert!(ArxModel::new(vec![0.1, 0.2], vec![]).is_err());
        assert!(ArxModel::new(vec![0.1, f64::NAN], vec![1.0]).is_err());
        assert!(ArxModel::new(vec![0.1, 0.2], vec![1.0]).is_ok());
    }

    #[test]
    fn pure_delay() {
        let m = ArxModel::new(vec![0.0, 0.0], vec![1.0]).unwrap();
        let u = CoeffSequence::new(0, vec![3.0, -1.0, 2.0, 5.0]);
        let y = simulate(&m, &u, &[0.0, 0.0], 4).unwrap();
        assert_eq!(y.values, vec![3.0, -1.0, 2.0, 5.0]);
        assert_eq!(y.start, 1);
    }

    #[test]
    fn example_plant_first_step() {
        let m = ArxModel::example_plant();
        let u = CoeffSequence::new(-1, vec![0.0; 3]);
        let y = simulate(&m, &u, &[0.0, 0.0, 1.0], 1).unwrap();
        assert_eq!(y.values, vec![-0.5]);
    }

    #[test]
    fn zero_everything_stays_zero() {
        let m = ArxModel::example_plant();
        let u = CoeffSequence::new(-1, vec![0.0; 12]);
        let y = simulate(&m, &u, &[0.0; 3], 10).unwrap();
        assert!(y.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn simulate_checks_ranges() {
        let m = ArxModel::example_plant();
        let short = CoeffSequence::new(0, vec![0.0; 9]);
        assert!(matches!(
            simulate(&m, &short, &[0.0; 3], 10),
            Err(ArxError::InputRange { .. })
        ));
        let u = CoeffSequence::new(-1, vec![0.0; 11]);
        assert!(matches!(
            simulate(&m, &u, &[0.0; 2], 10),
            Err(ArxError::InitialCondition { .. })
        ));
    }

    #[test]
    fn low_order_controller_closed_loop() {
        let acl = closed_loop_coefficients(&ArxModel::example_plant(), &low_order_ctrl());
        assert_eq!(acl.0.len(), 6);
        assert_abs_diff_eq!(acl.l1_norm(), 0.4417, epsilon = 1e-3);
        assert_abs_diff_eq!(acl.0[5], 0.44165, epsilon = 1e-9);
        assert!(acl.0[..5].iter().all(|c| c.abs() < 2e-4));
    }

    #[test]
    fn degenerate_closed_loops() {
        let plant = ArxModel::example_plant();
        let acl = closed_loop_coefficients(&plant, &Compensator::zero(2, 1));
        assert_eq!(acl.0, vec![0.5, -1.21, -0.605, 0.0, 0.0]);

        let zero_plant = ArxModel {
            a: vec![0.0; 3],
            b: vec![0.0; 2],
        };
        let acl = closed_loop_coefficients(&zero_plant, &low_order_ctrl());
        assert_eq!(acl.0, vec![-0.5, 1.46, -0.73, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn printed_deadbeat_needs_flipped_numerator() {
        // The displayed deadbeat compensator cancels only with -B·B̃.
        let plant = ArxModel::example_plant();
        let printed = Compensator::new(vec![-0.5, 1.46], vec![0.73, -1.464, -0.8833]).unwrap();
        assert!(closed_loop_coefficients(&plant, &printed).l1_norm() > 1.0);
        let flipped = Compensator::new(vec![-0.5, 1.46], vec![-0.73, 1.464, 0.8833]).unwrap();
        assert!(closed_loop_coefficients(&plant, &flipped).l1_norm() < 1e-3);
    }

    #[test]
    fn symbolic_matches_numeric() {
        let ctrl = low_order_ctrl();
        let sym = closed_loop_symbolic(3, 2, &ctrl);
        let plant = ArxModel::example_plant();
        let num = closed_loop_coefficients(&plant, &ctrl);
        let point: Vec<f64> = plant.a.iter().chain(&plant.b).copied().collect();
        for (p, v) in sym.iter().zip(&num.0) {
            assert!(p.degree() <= 1);
            assert_abs_diff_eq!(p.eval_dense(&point).unwrap(), *v, epsilon = 1e-12);
        }
    }

    #[test]
    fn margin_values() {
        assert_eq!(superstable_margin(&[0.0; 4]), 0.0);
        assert_abs_diff_eq!(
            superstable_margin(&ArxModel::example_plant().a),
            2.315,
            epsilon = 1e-12
        );
    }

    #[test]
    fn envelope_values() {
        assert_eq!(decay_envelope(0.0, 3, &[1.0, -2.0], 1).unwrap(), 0.0);
        assert_eq!(decay_envelope(0.5, 1, &[1.0], 1).unwrap(), 0.5);
        assert_eq!(decay_envelope(0.5, 2, &[1.0, 0.5], 4).unwrap(), 0.25);
        assert!(decay_envelope(1.0, 1, &[1.0], 1).is_err());
        let mut prev = f64::INFINITY;
        for t in 0..50 {
            let e = decay_envelope(0.7, 3, &[1.0, 0.3, -0.2], t).unwrap();
            assert!(e <= prev);
            prev = e;
        }
    }

    #[test]
    fn single_lag_loop_attains_one_step_bound() {
        // y_1 = -a y_0 reaches exactly γ|y_0|; a γ^{t/n+1} envelope would
        // be violated here.
        let y = free_response(&[0.5], &[1.0], 1);
        assert_eq!(y[0].abs(), 0.5);
        assert!(y[0].abs() <= decay_envelope(0.5, 1, &[1.0], 1).unwrap());
        assert!(y[0].abs() > 0.5f64.powf(2.0));
    }

    #[test]
    fn feedback_output_follows_closed_loop_recursion() {
        let plant = ArxModel::example_plant();
        let ctrl = low_order_ctrl();
        let acl = closed_loop_coefficients(&plant, &ctrl).0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let yh: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let uh: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (y, _) = simulate_feedback(&plant, &ctrl, &yh, &uh, 40);
        let mut full = yh.clone();
        full.extend(&y);
        let start = 6 + ctrl.n_a().max(plant.n_b()) + 1;
        for k in start..full.len() {
            let rec: f64 = (1..=acl.len()).map(|i| -acl[i - 1] * full[k - i]).sum();
            assert_abs_diff_eq!(full[k], rec, epsilon = 1e-9);
        }
    }

    fn conv_oracle(p: &[f64], q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; p.len() + q.len() - 1];
        for (i, x) in p.iter().enumerate() {
            for (j, y) in q.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    }

    fn oracle_acl(plant: &ArxModel, ctrl: &Compensator) -> Vec<f64> {
        let with_one = |v: &[f64]| {
            let mut o = vec![1.0];
            o.extend_from_slice(v);
            o
        };
        let with_zero = |v: &[f64]| {
            let mut o = vec![0.0];
            o.extend_from_slice(v);
            o
        };
        let den = conv_oracle(&with_one(&plant.a), &with_one(&ctrl.a));
        let num = conv_oracle(&with_zero(&plant.b), &with_zero(&ctrl.b));
        let n = den.len().max(num.len());
        let mut total = vec![0.0; n];
        for (i, v) in den.iter().enumerate() {
            total[i] += v;
        }
        for (i, v) in num.iter().enumerate() {
            total[i] += v;
        }
        total[0] -= 1.0;
        let n_cl = closed_loop_len(plant.n_a(), plant.n_b(), ctrl.n_a(), ctrl.n_b());
        total.resize(n_cl + 1, 0.0);
        total[1..].to_vec()
    }

    fn arb_pair() -> impl Strategy<Value = (ArxModel, Compensator)> {
        (2usize..=5, 1usize..=4, 0usize..=5, 0usize..=5).prop_flat_map(|(na, nb, ca, cb)| {
            let nb = nb.min(na - 1);
            (
                prop::collection::vec(-2.0f64..2.0, na),
                prop::collection::vec(-2.0f64..2.0, nb),
                prop::collection::vec(-2.0f64..2.0, ca),
                prop::collection::vec(-2.0f64..2.0, cb),
            )
                .prop_map(|(a, b, ca, cb)| (ArxModel { a, b }, Compensator { a: ca, b: cb }))
        })
    }

    proptest! {
        #[test]
        fn closed_loop_matches_convolution((plant, ctrl) in arb_pair()) {
            let got = closed_loop_coefficients(&plant, &ctrl).0;
            let want = oracle_acl(&plant, &ctrl);
            prop_assert_eq!(got.len(), want.len());
            for (g, w) in got.iter().zip(&want) {
                prop_assert!((g - w).abs() <= 1e-10);
            }
        }

        #[test]
        fn closed_loop_is_affine_in_controller(
            (plant, c1) in arb_pair(),
            seed in 0u64..1000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c2 = Compensator {
                a: c1.a.iter().map(|_| rng.gen_range(-2.0..2.0)).collect(),
                b: c1.b.iter().map(|_| rng.gen_range(-2.0..2.0)).collect(),
            };
            let sum = Compensator {
                a: c1.a.iter().zip(&c2.a).map(|(x, y)| x + y).collect(),
                b: c1.b.iter().zip(&c2.b).map(|(x, y)| x + y).collect(),
            };
            let zero = Compensator::zero(c1.n_a(), c1.n_b());
            let l = closed_loop_coefficients(&plant, &sum).0;
            let z = closed_loop_coefficients(&plant, &zero).0;
            let x = closed_loop_coefficients(&plant, &c1).0;
            let y = closed_loop_coefficients(&plant, &c2).0;
            for k in 0..l.len() {
                prop_assert!((l[k] + z[k] - x[k] - y[k]).abs() < 1e-10);
            }
        }

        #[test]
        fn free_response_stays_under_envelope(
            raw in prop::collection::vec(-1.0f64..1.0, 1..8),
            hist_seed in 0u64..10_000,
            scale in 0.0f64..0.99,
        ) {
            let l1 = superstable_margin(&raw);
            let a_cl: Vec<f64> = if l1 > 0.0 { raw.iter().map(|v| v * scale / l1).collect() } else { raw.clone() };
            let gamma = superstable_margin(&a_cl);
            let mut rng = ChaCha8Rng::seed_from_u64(hist_seed);
            let hist: Vec<f64> = (0..a_cl.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = free_response(&a_cl, &hist, 100);
            for (t, v) in y.iter().enumerate() {
                let env = decay_envelope(gamma, a_cl.len(), &hist, t + 1).unwrap();
                prop_assert!(v.abs() <= env * (1.0 + 1e-9) + 1e-300);
            }
        }
    }

    #[test]
    fn eval_by_name_on_symbolic_entries() {
        let sym = closed_loop_symbolic(2, 1, &Compensator::new(vec![0.3], vec![-0.7]).unwrap());
        let mut pt = HashMap::new();
        for (k, v) in [("a1", 0.1), ("a2", 0.2), ("b1", 1.5)] {
            pt.insert(k.to_string(), v);
        }
        // a_cl_1 = a1 + ã1, a_cl_2 = a2 + a1 ã1 + b1 b̃1, a_cl_3 = a2 ã1
        let vals: Vec<f64> = sym.iter().map(|p| p.eval(&pt).unwrap()).collect();
        assert_abs_diff_eq!(vals[0], 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 0.2 + 0.03 - 1.05, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[2], 0.06, epsilon = 1e-12);
    }
}
