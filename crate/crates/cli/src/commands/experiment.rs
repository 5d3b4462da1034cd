use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, ValueEnum};
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use superstab::arx::ArxModel;
use superstab::conic::{solver_from_env, SolverOptions};
use superstab::data::{corrupt, excite, generate, Dataset};
use superstab::synth::{synthesize, Method, SynthStatus, SynthesisProblem, SynthesisResult};
use superstab::verify::{verify_controller, VerifyOptions};

use crate::config::{persist, resolve, write_json};
use crate::error::CliError;
use crate::plot::sweep_plot;

/// Slack for the order sweep: a higher-order controller contains the
/// lower-order ones, so any increase is solver round-off.
pub const ORDER_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Sweep {
    Horizon,
    Eps,
    Order,
}

impl Sweep {
    pub fn name(self) -> &'static str {
        match self {
            Sweep::Horizon => "horizon",
            Sweep::Eps => "eps",
            Sweep::Order => "order",
        }
    }

    fn axis(self) -> &'static str {
        match self {
            Sweep::Horizon => "T",
            Sweep::Eps => "eps",
            Sweep::Order => "controller order n_a",
        }
    }
}

#[derive(Args, Clone, Debug, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ExperimentArgs {
    /// JSON config file; flags override its entries.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub sweeps: Option<Vec<Sweep>>,
    /// Replicates per sweep.
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub base_seed: Option<u64>,
    #[arg(long)]
    pub d: Option<u32>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub plant_a: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub plant_b: Option<Vec<f64>>,
    #[arg(long)]
    pub na_ctrl: Option<usize>,
    #[arg(long)]
    pub nb_ctrl: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<usize>>,
    #[arg(long)]
    pub horizon_eps: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub eps_values: Option<Vec<f64>>,
    #[arg(long)]
    pub eps_horizon: Option<usize>,
    #[arg(long)]
    pub eps_cap: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub orders: Option<Vec<usize>>,
    #[arg(long)]
    pub order_horizon: Option<usize>,
    #[arg(long)]
    pub order_eps: Option<f64>,
    /// Skip sampling-based verification of the synthesized controllers.
    #[arg(long, default_value_t = false)]
    #[serde(skip)]
    pub no_verify: bool,
    #[arg(long)]
    pub verify_samples: Option<usize>,
    #[arg(long)]
    pub verify_trials: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(skip)]
    verify: Option<bool>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    pub sweeps: Vec<Sweep>,
    pub seeds: usize,
    pub base_seed: u64,
    pub d: u32,
    pub plant_a: Vec<f64>,
    pub plant_b: Vec<f64>,
    /// Controller orders for the horizon and eps sweeps.
    pub na_ctrl: usize,
    pub nb_ctrl: usize,
    pub horizons: Vec<usize>,
    pub horizon_eps: f64,
    pub eps_values: Vec<f64>,
    pub eps_horizon: usize,
    /// Upper bound the largest-eps γ must stay under.
    pub eps_cap: f64,
    /// Controller `n_a` values; `n_b = n_a - 1`.
    pub orders: Vec<usize>,
    pub order_horizon: usize,
    pub order_eps: f64,
    pub verify: bool,
    pub verify_samples: usize,
    pub verify_trials: usize,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let p = ArxModel::example_plant();
        let v = VerifyOptions::default();
        ExperimentConfig {
            sweeps: vec![Sweep::Horizon, Sweep::Eps, Sweep::Order],
            seeds: 5,
            base_seed: 1,
            d: 1,
            plant_a: p.a,
            plant_b: p.b,
            na_ctrl: 4,
            nb_ctrl: 3,
            horizons: vec![20, 40, 60, 80],
            horizon_eps: 0.02,
            eps_values: vec![0.02, 0.04, 0.06, 0.08],
            eps_horizon: 80,
            eps_cap: 1.2,
            orders: vec![4, 6, 8, 10],
            order_horizon: 10,
            order_eps: 0.01,
            verify: true,
            verify_samples: v.samples,
            verify_trials: v.trials,
            out: PathBuf::from("out/experiment"),
        }
    }
}

/// Seed of replicate `index`: one ChaCha stream per index.
pub fn cell_seed(base: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index);
    rng.next_u64()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellResult {
    pub replicate: usize,
    pub seed: u64,
    pub value: f64,
    pub gamma: Option<f64>,
    pub status: Option<SynthStatus>,
    /// Certificate re-expansion and coupling residuals.
    pub reconstruction: Option<f64>,
    pub coupling: Option<f64>,
    pub verified: Option<bool>,
    pub max_margin: Option<f64>,
    pub sampled: usize,
    pub error: Option<String>,
    #[serde(skip)]
    pub result: Option<Box<SynthesisResult>>,
    #[serde(skip)]
    pub data: Option<Dataset>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trend {
    pub sweep: Sweep,
    pub expected: String,
    pub per_replicate: Vec<bool>,
    pub verified: bool,
    pub holds: bool,
}

impl ExperimentConfig {
    fn plant(&self) -> Result<ArxModel, CliError> {
        ArxModel::new(self.plant_a.clone(), self.plant_b.clone())
            .map_err(|e| CliError::Usage(e.to_string()))
    }

    fn validate(&self) -> Result<(), CliError> {
        self.plant()?;
        let bad = |m: &str| Err(CliError::Usage(m.into()));
        if self.seeds == 0 {
            return bad("need at least one seed");
        }
        if self.horizons.contains(&0) || self.eps_horizon == 0 || self.order_horizon == 0 {
            return bad("horizons must be positive");
        }
        if self.orders.iter().any(|&n| n < 2) {
            return bad("order sweep needs controller n_a >= 2 (n_b = n_a - 1)");
        }
        let bounds = [self.horizon_eps, self.order_eps];
        if bounds
            .iter()
            .chain(&self.eps_values)
            .any(|e| !(e.is_finite() && *e >= 0.0))
        {
            return bad("noise bounds must be finite and nonnegative");
        }
        Ok(())
    }
}

/// Runs one replicate of a sweep; the sweep values share one trajectory.
pub fn run_replicate(sweep: Sweep, cfg: &ExperimentConfig, replicate: usize) -> Vec<CellResult> {
    let seed = cell_seed(cfg.base_seed, replicate as u64);
    let blank = |value: f64| CellResult {
        replicate,
        seed,
        value,
        gamma: None,
        status: None,
        reconstruction: None,
        coupling: None,
        verified: None,
        max_margin: None,
        sampled: 0,
        error: None,
        result: None,
        data: None,
    };
    let plant = match cfg.plant() {
        Ok(p) => p,
        Err(e) => {
            let mut c = blank(f64::NAN);
            c.error = Some(e.to_string());
            return vec![c];
        }
    };
    // (value, dataset or error, controller orders)
    let cells: Vec<(f64, Result<Dataset, String>, usize, usize)> = match sweep {
        Sweep::Horizon => {
            let t_max = cfg.horizons.iter().copied().max().unwrap_or(1);
            let data = generate(&plant, t_max, cfg.horizon_eps, cfg.horizon_eps, seed);
            cfg.horizons
                .iter()
                .map(|&t| {
                    let d = data
                        .as_ref()
                        .map(|(d, _, _)| d.truncated(t))
                        .map_err(|e| e.to_string());
                    (t as f64, d, cfg.na_ctrl, cfg.nb_ctrl)
                })
                .collect()
        }
        Sweep::Eps => {
            let traj = excite(&plant, cfg.eps_horizon, seed);
            cfg.eps_values
                .iter()
                .map(|&e| {
                    let d = match &traj {
                        Ok(t) => corrupt(t, e, e, seed)
                            .map(|(d, _)| d)
                            .map_err(|e| e.to_string()),
                        Err(err) => Err(err.to_string()),
                    };
                    (e, d, cfg.na_ctrl, cfg.nb_ctrl)
                })
                .collect()
        }
        Sweep::Order => {
            let data = generate(
                &plant,
                cfg.order_horizon,
                cfg.order_eps,
                cfg.order_eps,
                seed,
            )
            .map(|(d, _, _)| d)
            .map_err(|e| e.to_string());
            cfg.orders
                .iter()
                .map(|&n| (n as f64, data.clone(), n, n - 1))
                .collect()
        }
    };
    cells
        .into_iter()
        .map(|(value, data, na, nb)| {
            let mut cell = blank(value);
            match data.and_then(|d| solve_cell(cfg, d, na, nb, seed, &mut cell)) {
                Ok(()) => {}
                Err(e) => cell.error = Some(e),
            }
            cell
        })
        .collect()
}

fn solve_cell(
    cfg: &ExperimentConfig,
    data: Dataset,
    na: usize,
    nb: usize,
    seed: u64,
    cell: &mut CellResult,
) -> Result<(), String> {
    let problem = SynthesisProblem::new(data, na, nb, cfg.d, Method::Alternatives);
    let solver = solver_from_env(SolverOptions::default()).map_err(|e| e.to_string())?;
    let r = synthesize(&problem, solver.as_ref()).map_err(|e| e.to_string())?;
    cell.status = Some(r.status);
    if r.gamma.is_finite() {
        cell.gamma = Some(r.gamma);
        cell.reconstruction = Some(r.diagnostics.reconstruction);
        cell.coupling = Some(r.diagnostics.coupling);
    }
    if r.status == SynthStatus::Superstabilizing && cfg.verify {
        let opts = VerifyOptions {
            samples: cfg.verify_samples,
            trials: cfg.verify_trials,
            ..VerifyOptions::default()
        };
        let v = verify_controller(&r.compensator, &problem.data, r.gamma, &opts, seed)
            .map_err(|e| e.to_string())?;
        cell.verified = Some(v.pass);
        cell.max_margin = v.max_margin;
        cell.sampled = v.sampled;
    }
    cell.result = Some(Box::new(r));
    cell.data = Some(problem.data);
    Ok(())
}

pub fn run_sweep(sweep: Sweep, cfg: &ExperimentConfig) -> Vec<CellResult> {
    (0..cfg.seeds)
        .into_par_iter()
        .map(|k| run_replicate(sweep, cfg, k))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

pub fn check_trend(sweep: Sweep, cfg: &ExperimentConfig, cells: &[CellResult]) -> Trend {
    let expected = match sweep {
        Sweep::Horizon => "strictly decreasing in T".to_string(),
        Sweep::Eps => format!("strictly increasing in eps, last below {}", cfg.eps_cap),
        Sweep::Order => format!("nonincreasing in controller order (slack {ORDER_TOL:e})"),
    };
    let per_replicate: Vec<bool> = (0..cfg.seeds)
        .map(|k| {
            let gammas: Option<Vec<f64>> = cells
                .iter()
                .filter(|c| c.replicate == k)
                .map(|c| if c.error.is_none() { c.gamma } else { None })
                .collect();
            let Some(g) = gammas.filter(|g| !g.is_empty()) else {
                return false;
            };
            let pairs = || g.windows(2).map(|w| (w[0], w[1]));
            match sweep {
                Sweep::Horizon => pairs().all(|(a, b)| b < a),
                Sweep::Eps => pairs().all(|(a, b)| b > a) && g[g.len() - 1] < cfg.eps_cap,
                Sweep::Order => pairs().all(|(a, b)| b <= a + ORDER_TOL),
            }
        })
        .collect();
    let verified = cells
        .iter()
        .filter(|c| c.status == Some(SynthStatus::Superstabilizing) && cfg.verify)
        .all(|c| c.verified == Some(true));
    let holds = verified && per_replicate.iter().all(|&b| b);
    Trend {
        sweep,
        expected,
        per_replicate,
        verified,
        holds,
    }
}

fn csv_table(cells: &[CellResult]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut s = String::from("replicate,seed,value,gamma,status,reconstruction,coupling,verified,max_margin,sampled,error\n");
    for c in cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            c.replicate,
            c.seed,
            c.value,
            opt(c.gamma),
            c.status
                .map(|st| serde_json::to_value(st)
                    .unwrap()
                    .as_str()
                    .unwrap_or("")
                    .to_string())
                .unwrap_or_default(),
            opt(c.reconstruction),
            opt(c.coupling),
            c.verified.map(|b| b.to_string()).unwrap_or_default(),
            opt(c.max_margin),
            c.sampled,
            c.error.as_deref().unwrap_or("").replace([',', '\n'], ";"),
        );
    }
    s
}

pub fn run(args: &ExperimentArgs) -> Result<(), CliError> {
    let mut flags = args.clone();
    if args.no_verify {
        flags.verify = Some(false);
    }
    let cfg: ExperimentConfig = resolve(args.config.as_deref(), &flags)?;
    cfg.validate()?;
    persist(&cfg.out, &cfg)?;

    let mut trends = Vec::new();
    for &sweep in &cfg.sweeps {
        let start = Instant::now();
        let cells = run_sweep(sweep, &cfg);
        let trend = check_trend(sweep, &cfg, &cells);

        let csv = cfg.out.join(format!("{}.csv", sweep.name()));
        fs::write(&csv, csv_table(&cells)).map_err(|e| CliError::io(&csv, e))?;
        let svg = cfg.out.join(format!("{}.svg", sweep.name()));
        sweep_plot(&svg, sweep.axis(), &cells, cfg.seeds)
            .map_err(|e| CliError::Schema(format!("{}: {e}", svg.display())))?;

        for c in &cells {
            if let Some(e) = &c.error {
                println!(
                    "{} replicate {} value {}: {e}",
                    sweep.name(),
                    c.replicate,
                    c.value
                );
            }
        }
        println!(
            "{}: {} ({}), verified {} [{:.0}s]",
            sweep.name(),
            if trend.holds {
                "trend holds"
            } else {
                "TREND FAILS"
            },
            trend.expected,
            trend.verified,
            start.elapsed().as_secs_f64()
        );
        trends.push(trend);
    }
    write_json(&cfg.out.join("summary.json"), &trends)?;
    if trends.iter().all(|t| t.holds) {
        Ok(())
    } else {
        Err(CliError::Verdict("one or more sweep trends failed".into()))
    }
}
