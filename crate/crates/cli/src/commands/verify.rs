use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use superstab::arx::closed_loop_coefficients;
use superstab::data::load_dataset;
use superstab::verify::{closed_loop_check, verify_controller, VerifyOptions};

use crate::commands::synth::ControllerFile;
use crate::config::{persist, resolve, write_json};
use crate::error::CliError;

pub const REPORT_FILE: &str = "report.json";

#[derive(Args, Clone, Debug, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct VerifyArgs {
    /// JSON config file; flags override its entries.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// `controller.json` or `result.json` from `synth`.
    #[arg(long)]
    pub controller: Option<PathBuf>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Closed-loop simulation length for the envelope check.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub radius_a: Option<f64>,
    #[arg(long)]
    pub radius_b: Option<f64>,
    #[arg(long)]
    pub max_draws: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct VerifyConfig {
    pub data: Option<PathBuf>,
    pub controller: Option<PathBuf>,
    pub samples: usize,
    pub trials: usize,
    pub horizon: usize,
    pub tolerance: f64,
    pub radius_a: f64,
    pub radius_b: f64,
    pub max_draws: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        let o = VerifyOptions::default();
        VerifyConfig {
            data: None,
            controller: None,
            samples: o.samples,
            trials: o.trials,
            horizon: o.horizon,
            tolerance: o.tolerance,
            radius_a: o.radius_a,
            radius_b: o.radius_b,
            max_draws: o.max_draws,
            seed: 1,
            out: PathBuf::from("out/verify"),
        }
    }
}

impl VerifyConfig {
    pub fn options(&self) -> VerifyOptions {
        VerifyOptions {
            samples: self.samples,
            trials: self.trials,
            horizon: self.horizon,
            tolerance: self.tolerance,
            radius_a: self.radius_a,
            radius_b: self.radius_b,
            max_draws: self.max_draws,
            ..VerifyOptions::default()
        }
    }
}

/// Accepts either file `synth` writes.
pub fn read_controller(path: &Path) -> Result<ControllerFile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |msg: String| CliError::Schema(format!("{}: {msg}", path.display()));
    let v: Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    let parsed = match v.get("compensator") {
        Some(c) => {
            let mut c = c.clone();
            c["gamma"] = v.get("gamma").cloned().unwrap_or(Value::Null);
            c["source"] = json!(path.display().to_string());
            serde_json::from_value::<ControllerFile>(c)
        }
        None => serde_json::from_value::<ControllerFile>(v),
    };
    let ctrl = parsed.map_err(|e| bad(e.to_string()))?;
    if !ctrl.gamma.is_finite() {
        return Err(bad("claimed gamma is not a finite number".into()));
    }
    Ok(ctrl)
}

pub fn run(args: &VerifyArgs) -> Result<(), CliError> {
    let cfg: VerifyConfig = resolve(args.config.as_deref(), args)?;
    let data_path = cfg
        .data
        .as_ref()
        .ok_or_else(|| CliError::Usage("--data is required".into()))?;
    let ctrl_path = cfg
        .controller
        .as_ref()
        .ok_or_else(|| CliError::Usage("--controller is required".into()))?;
    let claimed = read_controller(ctrl_path)?;
    let ctrl = claimed.compensator()?;
    let data = load_dataset(data_path)?;
    persist(&cfg.out, &cfg)?;

    let report = verify_controller(&ctrl, &data, claimed.gamma, &cfg.options(), cfg.seed)
        .map_err(|e| CliError::Verdict(e.to_string()))?;
    let worst = report.worst_plant.as_ref().map(|p| {
        let margin = closed_loop_coefficients(p, &ctrl).l1_norm();
        match closed_loop_check(p, &ctrl, cfg.horizon, cfg.trials, cfg.seed) {
            Ok(r) => json!({"margin": margin, "envelope": r}),
            Err(e) => json!({"margin": margin, "error": e.to_string()}),
        }
    });
    write_json(
        &cfg.out.join(REPORT_FILE),
        &json!({"verification": report, "worst_plant_check": worst}),
    )?;

    println!(
        "sampled {} plants ({} by hit-and-run, {} draws, acceptance {:.2e}); max closed-loop norm {}; claimed {:.6}; envelope violations {}/{}",
        report.sampled,
        report.walked,
        report.draws,
        report.acceptance_rate,
        report
            .max_margin
            .map(|m| format!("{m:.6}"))
            .unwrap_or_else(|| "n/a".into()),
        report.gamma_claimed,
        report.envelope_violations,
        report.envelope_trials,
    );
    if let Some(e) = &report.sampler_error {
        println!("sampler: {e}");
    }
    if report.pass {
        println!("PASS");
        Ok(())
    } else {
        println!("FAIL");
        Err(CliError::Verdict("verification failed".into()))
    }
}
