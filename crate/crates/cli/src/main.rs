use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use phycache::analysis::dof::{max_sum_dof, RegionParams};
use phycache::baselines::Policy;
use phycache::harness::output::{summary_json, write_csv, write_csv_to, write_run};
use phycache::harness::validate::run_all;
use phycache::harness::{run_simulation, sweep, Axis, SimConfig};
use phycache::traffic::zipf_popularity;

#[derive(Parser)]
#[command(
    name = "phycache",
    version,
    about = "Dual-mode PHY caching simulator and DoF analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and print its summary.
    Simulate {
        /// JSON config; omitted fields take preset defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Start from a named preset (desk or hex7) instead of a file.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        policy: Option<Policy>,
        /// Directory for summary.json, timeseries.csv and delays.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Vary one parameter across all policies and write one CSV row per run.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// lambda, cache_size, skew, w or backhaul.
        #[arg(long)]
        axis: Axis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Policies to run; all four by default.
        #[arg(long, value_delimiter = ',')]
        policies: Vec<Policy>,
        /// Seeds shared by every policy; the config seed by default.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maximum symmetric DoF for each parameter set in a JSON file.
    AnalyzeDof {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the oracle-equivalence suites.
    Validate {
        #[arg(long, default_value_t = 1000)]
        oracle_trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

/// One row of an `analyze-dof` parameter file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DofInput {
    n: usize,
    library_size: usize,
    cache_size: usize,
    skewness: f64,
    backhaul: f64,
    d_a: f64,
    d_b: f64,
    /// Defaults to `n * d_a`, the smallest supported value.
    read_rate: Option<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DofFile {
    Many(Vec<DofInput>),
    One(DofInput),
}

#[derive(Serialize)]
struct DofRow {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "L_C")]
    l_c: usize,
    skewness: f64,
    #[serde(rename = "R_d")]
    r_d: f64,
    #[serde(rename = "D_A")]
    d_a: f64,
    #[serde(rename = "D_B")]
    d_b: f64,
    #[serde(rename = "D_star")]
    d_star: f64,
    alpha_star: f64,
    branch: &'static str,
}

fn base_config(config: Option<&Path>, preset: Option<&str>) -> Result<SimConfig> {
    Ok(match (config, preset) {
        (Some(path), _) => SimConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        (None, Some(name)) => SimConfig::preset(name)?,
        (None, None) => SimConfig::desk(),
    })
}

fn write_rows<T: Serialize>(out: Option<&Path>, rows: &[T]) -> Result<()> {
    match out {
        Some(p) => write_csv(p, rows).with_context(|| format!("writing {}", p.display()))?,
        None => write_csv_to(std::io::stdout().lock(), rows)?,
    }
    Ok(())
}

fn analyze_dof(path: &Path) -> Result<Vec<DofRow>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let inputs = match serde_json::from_str::<DofFile>(&text).context("parsing DoF parameter file")? {
        DofFile::Many(v) => v,
        DofFile::One(one) => vec![one],
    };
    inputs
        .into_iter()
        .map(|i| {
            let params = RegionParams {
                n: i.n,
                cache_size: i.cache_size,
                popularity: zipf_popularity(i.library_size, i.skewness)?,
                backhaul: i.backhaul,
                read_rate: i.read_rate.unwrap_or(i.n as f64 * i.d_a),
                d_a: i.d_a,
                d_b: i.d_b,
            };
            let s = max_sum_dof(&params)?;
            Ok(DofRow {
                n: i.n,
                k: i.library_size,
                l_c: i.cache_size,
                skewness: i.skewness,
                r_d: i.backhaul,
                d_a: i.d_a,
                d_b: i.d_b,
                d_star: s.d_star,
                alpha_star: s.alpha_star,
                branch: s.branch.name(),
            })
        })
        .collect()
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Simulate {
            config,
            preset,
            seed,
            policy,
            out,
        } => {
            let mut cfg = base_config(config.as_deref(), preset.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(p) = policy {
                cfg.policy = p;
            }
            let result = run_simulation(&cfg)?;
            if let Some(dir) = out {
                write_run(&dir, &result).with_context(|| format!("writing results to {}", dir.display()))?;
                log::info!("results written to {}", dir.display());
            }
            print!("{}", summary_json(&result.report)?);
        }
        Command::Sweep {
            config,
            preset,
            axis,
            values,
            policies,
            seeds,
            out,
        } => {
            let cfg = base_config(config.as_deref(), preset.as_deref())?;
            let policies = if policies.is_empty() {
                Policy::ALL.to_vec()
            } else {
                policies
            };
            let seeds = if seeds.is_empty() { vec![cfg.seed] } else { seeds };
            let rows = sweep(&cfg, axis, &values, &policies, &seeds)?;
            write_rows(out.as_deref(), &rows)?;
        }
        Command::AnalyzeDof { params, out } => {
            let rows = analyze_dof(&params)?;
            write_rows(out.as_deref(), &rows)?;
        }
        Command::Validate { oracle_trials, seed } => {
            if oracle_trials == 0 {
                bail!("--oracle-trials must be at least 1");
            }
            let suites = run_all(oracle_trials, seed)?;
            let mut failed = false;
            for s in &suites {
                println!(
                    "{} {} ({} trials, {} failures, worst {:.3e}, {:.2}s)",
                    if s.passed() { "PASS" } else { "FAIL" },
                    s.name,
                    s.trials,
                    s.failures,
                    s.worst,
                    s.elapsed_s
                );
                failed |= !s.passed();
            }
            if failed {
                bail!("validation failed");
            }
        }
    }
    Ok(())
}
