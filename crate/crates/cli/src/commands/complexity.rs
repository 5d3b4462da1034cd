use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use superstab::synth::{psatz_sizes, Method, SizeReport};

use crate::config::{persist, resolve, write_json};
use crate::error::CliError;

#[derive(Args, Clone, Debug, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ComplexityArgs {
    /// JSON config file; flags override its entries.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub na: Option<usize>,
    #[arg(long)]
    pub nb: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub d_full: Option<u32>,
    #[arg(long)]
    pub d_alt: Option<u32>,
    /// Also compare (3, 2, 10) at degrees 2/1 against the reference sizes.
    #[arg(long, default_value_t = false)]
    #[serde(skip)]
    pub check: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ComplexityConfig {
    pub na: usize,
    pub nb: usize,
    pub horizon: usize,
    pub d_full: u32,
    pub d_alt: u32,
    pub out: PathBuf,
}

impl Default for ComplexityConfig {
    fn default() -> Self {
        ComplexityConfig {
            na: 3,
            nb: 2,
            horizon: 10,
            d_full: 2,
            d_alt: 1,
            out: PathBuf::from("out/complexity"),
        }
    }
}

/// `(name, count, full dim, alternatives dim)` for `n_a=3, n_b=2, T=10`.
pub const GOLDEN: [(&str, usize, u128, u128); 4] = [
    ("sigma0", 1, 465, 6),
    ("psi", 22, 30, 6),
    ("zeta", 26, 30, 6),
    ("mu", 10, 465, 6),
];

/// Mismatches between the computed sizes and [`GOLDEN`].
pub fn check_golden() -> Vec<String> {
    let full = psatz_sizes(3, 2, 10, 2, Method::Full);
    let alt = psatz_sizes(3, 2, 10, 1, Method::Alternatives);
    let mut errs = Vec::new();
    for (name, count, fd, ad) in GOLDEN {
        for (report, dim) in [(&full, fd), (&alt, ad)] {
            match report.get(name) {
                Some(e) if e.count == count && e.dim == dim => {}
                Some(e) => errs.push(format!(
                    "{:?} {name}: got count {} dim {}, expected {count}/{dim}",
                    report.method, e.count, e.dim
                )),
                None => errs.push(format!("{:?}: missing {name}", report.method)),
            }
        }
    }
    errs
}

pub fn table(full: &SizeReport, alt: &SizeReport) -> String {
    let mut s = format!(
        "n_a={} n_b={} T={}  (full d={}, alternatives d={})\n{:<8} {:>6} {:>24} {:>14}\n",
        full.n_a,
        full.n_b,
        full.horizon,
        full.degree,
        alt.degree,
        "",
        "count",
        "full",
        "alternatives"
    );
    for (f, a) in full.entries.iter().zip(&alt.entries) {
        let _ = writeln!(
            s,
            "{:<8} {:>6} {:>24} {:>14}",
            f.name, f.count, f.dim, a.dim
        );
    }
    s
}

pub fn run(args: &ComplexityArgs) -> Result<(), CliError> {
    let cfg: ComplexityConfig = resolve(args.config.as_deref(), args)?;
    if cfg.na == 0 || cfg.nb == 0 || cfg.horizon == 0 || cfg.d_full == 0 || cfg.d_alt == 0 {
        return Err(CliError::Usage(
            "orders, horizon and degrees must be positive".into(),
        ));
    }
    persist(&cfg.out, &cfg)?;
    let full = psatz_sizes(cfg.na, cfg.nb, cfg.horizon, cfg.d_full, Method::Full);
    let alt = psatz_sizes(cfg.na, cfg.nb, cfg.horizon, cfg.d_alt, Method::Alternatives);
    print!("{}", table(&full, &alt));

    write_json(&cfg.out.join("sizes.json"), &[&full, &alt])?;
    let mut csv = String::from("method,degree,name,count,dim\n");
    for r in [&full, &alt] {
        for e in &r.entries {
            let _ = writeln!(
                csv,
                "{:?},{},{},{},{}",
                r.method, r.degree, e.name, e.count, e.dim
            );
        }
    }
    let path = cfg.out.join("sizes.csv");
    fs::write(&path, csv.to_lowercase()).map_err(|e| CliError::io(&path, e))?;

    if args.check {
        let errs = check_golden();
        if errs.is_empty() {
            println!("check: reference sizes reproduced");
        } else {
            for e in &errs {
                println!("check: {e}");
            }
            return Err(CliError::Verdict(format!("{} size mismatches", errs.len())));
        }
    }
    Ok(())
}
