use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;
use superstab::arx::{ArxModel, Compensator};
use superstab::conic::{solver_from_env, SolverOptions};
use superstab::data::load_dataset;
use superstab::synth::{
    hierarchy, model_based_superstab, synthesize, Method, SynthStatus, SynthesisProblem,
    SynthesisResult,
};

use crate::config::{persist, resolve, write_json};
use crate::error::CliError;

pub const RESULT_FILE: &str = "result.json";
pub const CONTROLLER_FILE: &str = "controller.json";
pub const CERTIFICATES_FILE: &str = "certificates.json";
pub const HIERARCHY_FILE: &str = "hierarchy.json";

#[derive(Args, Clone, Debug, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SynthArgs {
    /// JSON config file; flags override its entries.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Dataset CSV written by `simulate` (sidecar JSON alongside).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// `alt` (default) or `full`.
    #[arg(long)]
    pub method: Option<Method>,
    /// Relaxation degree (default 1 for alt, 2 for full).
    #[arg(long)]
    pub d: Option<u32>,
    /// Climb the hierarchy from `--d` up to this degree.
    #[arg(long)]
    pub d_max: Option<u32>,
    #[arg(long)]
    pub na_ctrl: Option<usize>,
    #[arg(long)]
    pub nb_ctrl: Option<usize>,
    #[arg(long)]
    pub radius_a: Option<f64>,
    #[arg(long)]
    pub radius_b: Option<f64>,
    #[arg(long)]
    pub gamma_cap: Option<f64>,
    /// Assemble even when the problem exceeds the size limits.
    #[arg(long, default_value_t = false)]
    #[serde(skip)]
    pub no_size_guard: bool,
    /// Solve the known-plant LP instead of the data-driven program.
    #[arg(long, default_value_t = false)]
    #[serde(skip)]
    pub model_based: bool,
    /// Plant for `--model-based` (defaults to the example plant).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub plant_a: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub plant_b: Option<Vec<f64>>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    // the two switches above, in config form
    #[arg(skip)]
    size_guard: Option<bool>,
    #[arg(skip)]
    #[serde(rename = "model-based")]
    model_based_cfg: Option<bool>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SynthConfig {
    pub data: Option<PathBuf>,
    pub method: Method,
    pub d: Option<u32>,
    pub d_max: Option<u32>,
    pub na_ctrl: usize,
    pub nb_ctrl: usize,
    pub radius_a: f64,
    pub radius_b: f64,
    pub gamma_cap: f64,
    pub size_guard: bool,
    pub model_based: bool,
    pub plant_a: Option<Vec<f64>>,
    pub plant_b: Option<Vec<f64>>,
    pub tol: f64,
    pub max_iter: u32,
    pub out: PathBuf,
}

impl SynthConfig {
    /// Smallest degree at which the method's certificate can use the data.
    pub fn degree(&self) -> u32 {
        self.d.unwrap_or(match self.method {
            Method::Alternatives => 1,
            Method::Full => 2,
        })
    }
}

impl Default for SynthConfig {
    fn default() -> Self {
        let opts = SolverOptions::default();
        SynthConfig {
            data: None,
            method: Method::Alternatives,
            d: None,
            d_max: None,
            na_ctrl: 4,
            nb_ctrl: 3,
            radius_a: 2.0,
            radius_b: 2.0,
            gamma_cap: 10.0,
            size_guard: true,
            model_based: false,
            plant_a: None,
            plant_b: None,
            tol: opts.tol,
            max_iter: opts.max_iter,
            out: PathBuf::from("out/synth"),
        }
    }
}

/// What `verify` reads back: the compensator and the claimed bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerFile {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub gamma: f64,
    pub source: String,
}

impl ControllerFile {
    pub fn compensator(&self) -> Result<Compensator, CliError> {
        Compensator::new(self.a.clone(), self.b.clone())
            .map_err(|e| CliError::Schema(e.to_string()))
    }
}

pub fn run(args: &SynthArgs) -> Result<(), CliError> {
    let mut flags = args.clone();
    if args.no_size_guard {
        flags.size_guard = Some(false);
    }
    if args.model_based {
        flags.model_based_cfg = Some(true);
    }
    let cfg: SynthConfig = resolve(args.config.as_deref(), &flags)?;
    persist(&cfg.out, &cfg)?;
    if cfg.model_based {
        return run_model_based(&cfg);
    }

    let path = cfg
        .data
        .as_ref()
        .ok_or_else(|| CliError::Usage("--data is required unless --model-based is set".into()))?;
    let data = load_dataset(path)?;
    let mut problem =
        SynthesisProblem::new(data, cfg.na_ctrl, cfg.nb_ctrl, cfg.degree(), cfg.method);
    problem.radius_a = cfg.radius_a;
    problem.radius_b = cfg.radius_b;
    problem.gamma_cap = cfg.gamma_cap;
    problem.guard.enabled = cfg.size_guard;
    problem.solver = SolverOptions {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        verbose: false,
    };
    let solver =
        solver_from_env(problem.solver.clone()).map_err(|e| CliError::Usage(e.to_string()))?;

    let result = match cfg.d_max.filter(|&m| m > cfg.degree()) {
        Some(d_max) => {
            let report = hierarchy(&problem, d_max, solver.as_ref());
            let levels: Vec<_> = report
                .levels
                .iter()
                .map(|(d, r)| match r {
                    Ok(r) => json!({"d": d, "gamma": r.gamma, "status": r.status}),
                    Err(e) => json!({"d": d, "error": e.to_string()}),
                })
                .collect();
            write_json(
                &cfg.out.join(HIERARCHY_FILE),
                &json!({"levels": levels, "monotone": report.monotone}),
            )?;
            for (d, r) in &report.levels {
                match r {
                    Ok(r) => println!("d={d}: gamma={:.6} ({:?})", r.gamma, r.status),
                    Err(e) => println!("d={d}: {e}"),
                }
            }
            match report.best() {
                Some(best) => best.clone(),
                None => {
                    let (_, last) = report
                        .levels
                        .into_iter()
                        .last()
                        .expect("at least one level");
                    last?
                }
            }
        }
        None => synthesize(&problem, solver.as_ref())?,
    };
    write_result(&cfg, &result)?;
    println!(
        "gamma* = {:.6}  status: {:?}  (method {:?}, d={}, {:.1}s)",
        result.gamma, result.status, result.method, result.degree, result.wall_seconds
    );
    match result.status {
        SynthStatus::Infeasible | SynthStatus::SolverError => Err(CliError::Solver(format!(
            "solver finished with {:?}",
            result.solver_status
        ))),
        _ => Ok(()),
    }
}

fn write_result(cfg: &SynthConfig, result: &SynthesisResult) -> Result<(), CliError> {
    write_json(&cfg.out.join(RESULT_FILE), result)?;
    write_json(
        &cfg.out.join(CERTIFICATES_FILE),
        &result.certificates_json(),
    )?;
    let ctrl = ControllerFile {
        a: result.compensator.a.clone(),
        b: result.compensator.b.clone(),
        gamma: result.gamma,
        source: format!("{:?} d={}", result.method, result.degree).to_lowercase(),
    };
    write_json(&cfg.out.join(CONTROLLER_FILE), &ctrl)
}

fn run_model_based(cfg: &SynthConfig) -> Result<(), CliError> {
    let example = ArxModel::example_plant();
    let plant = ArxModel::new(
        cfg.plant_a.clone().unwrap_or(example.a),
        cfg.plant_b.clone().unwrap_or(example.b),
    )
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let (gamma, ctrl) = model_based_superstab(&plant, cfg.na_ctrl, cfg.nb_ctrl)?;
    write_json(
        &cfg.out.join(RESULT_FILE),
        &json!({
            "method": "model_based",
            "plant": plant,
            "gamma": gamma,
            "compensator": ctrl,
        }),
    )?;
    write_json(
        &cfg.out.join(CONTROLLER_FILE),
        &ControllerFile {
            a: ctrl.a.clone(),
            b: ctrl.b.clone(),
            gamma,
            source: "model_based".into(),
        },
    )?;
    println!(
        "gamma* = {gamma:.6}  (model-based, controller orders {}/{})",
        cfg.na_ctrl, cfg.nb_ctrl
    );
    Ok(())
}
