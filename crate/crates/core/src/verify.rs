//! Posterior checks of a synthesized compensator against the data:
//! sampled worst-case closed-loop norms, decay-envelope simulation, and a
//! grid oracle for small plants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arx::{
    closed_loop_coefficients, decay_envelope, simulate_feedback, ArxError, ArxModel, Compensator,
};
use crate::certify::box_bounds;
use crate::data::{membership, outer_box, passes_prefilter, sample_with_walk, DataError, Dataset};

/// Margin comparisons are made with this slack.
pub const MARGIN_TOL: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("closed loop is not superstable: ‖a_cl‖₁ = {0}")]
    NotSuperstable(f64),
    #[error("grid oracle needs n_a + n_b <= 3, got {0}")]
    TooManyParameters(usize),
    #[error("grid would have {0} points")]
    GridTooLarge(u128),
    #[error("no grid point is consistent with the data")]
    EmptyAccepted,
    #[error("grid step must be positive, got {0}")]
    BadStep(f64),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Arx(#[from] ArxError),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub samples: usize,
    pub trials: usize,
    pub horizon: usize,
    pub tolerance: f64,
    pub radius_a: f64,
    pub radius_b: f64,
    pub max_draws: usize,
    pub box_rounds: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            samples: 200,
            trials: 50,
            horizon: 100,
            tolerance: MARGIN_TOL,
            radius_a: 2.0,
            radius_b: 2.0,
            max_draws: 400_000,
            box_rounds: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub gamma: f64,
    pub n_cl: usize,
    pub trials: usize,
    pub violations: usize,
    /// Largest `|y_t| / bound_t` seen (0 when every bound is 0).
    pub worst_ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub gamma_claimed: f64,
    pub tolerance: f64,
    pub samples_requested: usize,
    pub sampled: usize,
    /// How many of `sampled` came from the hit-and-run top-up.
    pub walked: usize,
    pub draws: usize,
    pub acceptance_rate: f64,
    /// Largest `‖a_cl‖₁` over the sampled plants (null when none).
    pub max_margin: Option<f64>,
    pub worst_plant: Option<ArxModel>,
    pub envelope_trials: usize,
    pub envelope_violations: usize,
    pub worst_ratio: f64,
    /// Why sampling came back empty, if it did.
    pub sampler_error: Option<String>,
    pub pass: bool,
}

/// Simulates plant and compensator in feedback from random histories in
/// `[-1, 1]` and checks `|y_t| <= γ^{s/n_cl} max|history|`.
///
/// The closed-loop recursion only holds once both loop equations have run
/// for a few steps, so the history is taken after a warm-up.
pub fn closed_loop_check(
    plant: &ArxModel,
    ctrl: &Compensator,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<EnvelopeReport, VerifyError> {
    let a_cl = closed_loop_coefficients(plant, ctrl);
    let gamma = a_cl.l1_norm();
    if gamma >= 1.0 {
        return Err(VerifyError::NotSuperstable(gamma));
    }
    let n_cl = a_cl.0.len();
    let hy = plant.n_a().max(ctrl.n_b()).max(1);
    let hu = plant.n_b().max(ctrl.n_a()).max(1);
    let warm = ctrl.n_a().max(plant.n_b()) + n_cl;
    let results: Vec<(usize, f64)> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let yh: Vec<f64> = (0..hy).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let uh: Vec<f64> = (0..hu).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let (y, _) = simulate_feedback(plant, ctrl, &yh, &uh, warm + horizon);
            let hist = &y[warm - n_cl..warm];
            let mut bad = 0;
            let mut worst = 0.0f64;
            for s in 1..=horizon {
                let bound = decay_envelope(gamma, n_cl, hist, s).expect("gamma checked above");
                let v = y[warm + s - 1].abs();
                if v > bound * (1.0 + 1e-9) + 1e-12 {
                    bad += 1;
                }
                if bound > 0.0 {
                    worst = worst.max(v / bound);
                }
            }
            (bad, worst)
        })
        .collect();
    Ok(EnvelopeReport {
        gamma,
        n_cl,
        trials,
        violations: results.iter().map(|r| r.0).sum(),
        worst_ratio: results.iter().fold(0.0, |m, r| m.max(r.1)),
    })
}

/// Samples consistent plants and checks the compensator's closed-loop norm
/// on each against `gamma_claimed`, plus decay envelopes on the sampled
/// closed loops.
pub fn verify_controller(
    ctrl: &Compensator,
    data: &Dataset,
    gamma_claimed: f64,
    opts: &VerifyOptions,
    seed: u64,
) -> Result<VerificationReport, VerifyError> {
    let start = box_bounds(data.n_a, data.n_b, opts.radius_a, opts.radius_b);
    let mut report = VerificationReport {
        gamma_claimed,
        tolerance: opts.tolerance,
        samples_requested: opts.samples,
        sampled: 0,
        walked: 0,
        draws: 0,
        acceptance_rate: 0.0,
        max_margin: None,
        worst_plant: None,
        envelope_trials: 0,
        envelope_violations: 0,
        worst_ratio: 0.0,
        sampler_error: None,
        pass: false,
    };
    let bounds = match outer_box(data, &start, opts.box_rounds) {
        Ok(b) => b,
        Err(e) => {
            report.sampler_error = Some(e.to_string());
            return Ok(report);
        }
    };
    let sample = match sample_with_walk(data, opts.samples, &bounds, seed, opts.max_draws) {
        Ok(s) => s,
        Err(DataError::SamplerExhausted { draws }) => {
            report.draws = draws;
            report.sampler_error = Some(DataError::SamplerExhausted { draws }.to_string());
            return Ok(report);
        }
        Err(e) => return Err(e.into()),
    };
    report.sampled = sample.plants.len();
    report.walked = sample.walked;
    report.draws = sample.draws;
    report.acceptance_rate = sample.acceptance_rate;
    let mut worst = (f64::NEG_INFINITY, 0usize);
    for (k, p) in sample.plants.iter().enumerate() {
        let m = closed_loop_coefficients(p, ctrl).l1_norm();
        if m > worst.0 {
            worst = (m, k);
        }
    }
    report.max_margin = Some(worst.0);
    report.worst_plant = Some(sample.plants[worst.1].clone());

    // one trajectory per trial, cycling through the sampled plants
    let stable: Vec<&ArxModel> = sample
        .plants
        .iter()
        .filter(|p| closed_loop_coefficients(p, ctrl).l1_norm() < 1.0)
        .collect();
    if !stable.is_empty() {
        for k in 0..opts.trials {
            let p = stable[k % stable.len()];
            let r = closed_loop_check(p, ctrl, opts.horizon, 1, seed.wrapping_add(k as u64))?;
            report.envelope_trials += 1;
            report.envelope_violations += r.violations;
            report.worst_ratio = report.worst_ratio.max(r.worst_ratio);
        }
    }
    report.pass = worst.0 <= gamma_claimed + opts.tolerance && report.envelope_violations == 0;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BruteForce {
    pub value: f64,
    pub grid_points: usize,
    pub accepted: usize,
    pub worst_plant: ArxModel,
}

/// Largest `‖a_cl‖₁` over the grid points `k·step` inside the outer box of
/// the consistent plants that pass the membership LP. A lower bound on the
/// worst case over the consistency set. Coordinates whose box is narrower
/// than one step use the box midpoint.
pub fn brute_force_gamma(
    data: &Dataset,
    ctrl: &Compensator,
    grid_step: f64,
    radius: f64,
) -> Result<BruteForce, VerifyError> {
    let np = data.n_params();
    if np > 3 {
        return Err(VerifyError::TooManyParameters(np));
    }
    if !(grid_step > 0.0) {
        return Err(VerifyError::BadStep(grid_step));
    }
    let bounds = outer_box(data, &box_bounds(data.n_a, data.n_b, radius, radius), 2)?;
    let axes: Vec<Vec<f64>> = bounds
        .iter()
        .map(|&(lo, hi)| {
            let k0 = (lo / grid_step).ceil() as i64;
            let k1 = (hi / grid_step).floor() as i64;
            if k1 < k0 {
                vec![0.5 * (lo + hi)]
            } else {
                (k0..=k1).map(|k| k as f64 * grid_step).collect()
            }
        })
        .collect();
    let total: u128 = axes.iter().map(|a| a.len() as u128).product();
    if total > 5_000_000 {
        return Err(VerifyError::GridTooLarge(total));
    }
    let total = total as usize;
    let point = |mut idx: usize| -> Vec<f64> {
        axes.iter()
            .map(|ax| {
                let v = ax[idx % ax.len()];
                idx /= ax.len();
                v
            })
            .collect()
    };
    let hits: Vec<(f64, usize)> = (0..total)
        .into_par_iter()
        .filter_map(|i| {
            let theta = point(i);
            let (a, b) = theta.split_at(data.n_a);
            if !passes_prefilter(a, b, data) {
                return None;
            }
            let plant = ArxModel {
                a: a.to_vec(),
                b: b.to_vec(),
            };
            match membership(&plant, data) {
                Ok(m) if m.feasible => Some((closed_loop_coefficients(&plant, ctrl).l1_norm(), i)),
                _ => None,
            }
        })
        .collect();
    let best = hits
        .iter()
        .copied()
        .fold(None::<(f64, usize)>, |acc, h| match acc {
            Some(a) if a.0 >= h.0 => Some(a),
            _ => Some(h),
        })
        .ok_or(VerifyError::EmptyAccepted)?;
    let theta = point(best.1);
    let (a, b) = theta.split_at(data.n_a);
    Ok(BruteForce {
        value: best.0,
        grid_points: total,
        accepted: hits.len(),
        worst_plant: ArxModel {
            a: a.to_vec(),
            b: b.to_vec(),
        },
    })
}
