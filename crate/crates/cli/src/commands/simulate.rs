use std::fs;
use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use superstab::arx::ArxModel;
use superstab::data::{corrupt, excite, save_dataset};

use crate::config::{persist, resolve};
use crate::error::CliError;

pub const DATA_FILE: &str = "data.csv";
pub const TRUTH_FILE: &str = "truth.csv";

#[derive(Args, Clone, Debug, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SimulateArgs {
    /// JSON config file; flags override its entries.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Plant denominator coefficients a_1..a_na, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub plant_a: Option<Vec<f64>>,
    /// Plant numerator coefficients b_1..b_nb, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub plant_b: Option<Vec<f64>>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Sets both input and output noise bounds.
    #[arg(long)]
    #[serde(skip)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub eps_u: Option<f64>,
    #[arg(long)]
    pub eps_y: Option<f64>,
    /// Process-noise bound recorded in the sidecar for synthesis. The
    /// simulated trajectory itself has no process noise.
    #[arg(long)]
    pub eps_w: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SimulateConfig {
    pub plant_a: Vec<f64>,
    pub plant_b: Vec<f64>,
    pub horizon: usize,
    pub eps_u: f64,
    pub eps_y: f64,
    pub eps_w: Option<f64>,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        let p = ArxModel::example_plant();
        SimulateConfig {
            plant_a: p.a,
            plant_b: p.b,
            horizon: 10,
            eps_u: 0.0,
            eps_y: 0.0,
            eps_w: None,
            seed: 1,
            out: PathBuf::from("out/simulate"),
        }
    }
}

pub fn run(args: &SimulateArgs) -> Result<(), CliError> {
    let mut flags = args.clone();
    if let Some(e) = args.eps {
        flags.eps_u = flags.eps_u.or(Some(e));
        flags.eps_y = flags.eps_y.or(Some(e));
    }
    let cfg: SimulateConfig = resolve(args.config.as_deref(), &flags)?;
    let plant = ArxModel::new(cfg.plant_a.clone(), cfg.plant_b.clone())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if cfg.horizon == 0 {
        return Err(CliError::Usage("horizon must be positive".into()));
    }
    if let Some(w) = cfg.eps_w {
        if !(w.is_finite() && w >= 0.0) {
            return Err(CliError::Usage(format!("bad process-noise bound {w}")));
        }
    }
    persist(&cfg.out, &cfg)?;

    let traj = excite(&plant, cfg.horizon, cfg.seed)?;
    let (mut data, noise) = corrupt(&traj, cfg.eps_u, cfg.eps_y, cfg.seed)?;
    data.eps_w = cfg.eps_w;
    save_dataset(&data, &cfg.out.join(DATA_FILE))?;

    let mut truth = String::from("t,u,y,du,dy\n");
    let t0 = traj.u.start.min(traj.y.start);
    let cell = |v: Option<&f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for t in t0..=cfg.horizon as i64 {
        truth.push_str(&format!(
            "{t},{},{},{},{}\n",
            cell(traj.u.get(t)),
            cell(traj.y.get(t)),
            cell(noise.du.get(t)),
            cell(noise.dy.get(t)),
        ));
    }
    let tp = cfg.out.join(TRUTH_FILE);
    fs::write(&tp, truth).map_err(|e| CliError::io(&tp, e))?;

    println!(
        "simulated T={} eps_u={} eps_y={} seed={} -> {}",
        cfg.horizon,
        cfg.eps_u,
        cfg.eps_y,
        cfg.seed,
        cfg.out.join(DATA_FILE).display()
    );
    Ok(())
}
