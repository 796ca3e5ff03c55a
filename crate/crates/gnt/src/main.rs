//! `gnt`: figure reproduction, power estimation, the sufficient-signal
//! condition and the interactive session server.

use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use gnt_harness::condition::{condition_surface, linear_grid, MIN_DRAWS};
use gnt_harness::figures::{run_figure_to, FigureId, FigureOptions};
use gnt_harness::{estimate_all, Method, Scenario};
use gnt_service::ServiceConfig;

#[derive(Debug, Parser)]
#[command(name = "gnt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reproduce one figure (or `all`) as CSV.
    Run {
        #[arg(long)]
        figure: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        reps: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Estimate power or detection time for a scenario and test configs.
    Power {
        /// Scenario JSON.
        #[arg(long)]
        scenario: PathBuf,
        /// One method or a list of methods, as JSON.
        #[arg(long)]
        test: PathBuf,
    },
    /// Smallest grid mean meeting the adaptive test's sufficient condition.
    Condition {
        /// Null counts, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        n0: Vec<u64>,
        /// Non-null counts, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        n1: Vec<u64>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0.2)]
        beta: f64,
        /// `lo:hi:step` or a comma-separated list.
        #[arg(long, default_value = "0.1:6:0.1")]
        grid: String,
        #[arg(long, default_value_t = MIN_DRAWS)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Host interactive sessions over HTTP.
    Serve {
        #[arg(long, env = "GNT_BIND", default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        #[arg(long, env = "GNT_DATA_DIR", default_value = "gnt-data")]
        data_dir: PathBuf,
        #[arg(long, env = "GNT_ALPHA", default_value_t = 0.05)]
        alpha: f64,
    },
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts.iter().map(|p| p.trim().parse()).collect::<Result<_, _>>().context("grid bounds")?;
        if !(v[2] > 0.0 && v[1] >= v[0]) {
            bail!("grid needs lo <= hi and a positive step");
        }
        return Ok(linear_grid(v[0], v[1], v[2]));
    }
    s.split(',').map(|p| p.trim().parse::<f64>().context("grid value")).collect()
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_methods(path: &PathBuf) -> Result<Vec<Method>> {
    let v: serde_json::Value = read_json(path)?;
    Ok(if v.is_array() { serde_json::from_value(v)? } else { vec![serde_json::from_value(v)?] })
}

fn run(figure: &str, seed: u64, reps: usize, out: &PathBuf) -> Result<()> {
    let ids: Vec<FigureId> =
        if figure.eq_ignore_ascii_case("all") { FigureId::ALL.to_vec() } else { vec![figure.parse()?] };
    for id in ids {
        let path = run_figure_to(id, &FigureOptions { seed, reps }, out)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn power(scenario: &PathBuf, test: &PathBuf) -> Result<()> {
    let scenario: Scenario = read_json(scenario)?;
    let methods = read_methods(test)?;
    let estimates = estimate_all(&scenario, &methods)?;
    let mut w = csv::Writer::from_writer(io::stdout());
    w.write_record(["method", "mean", "stderr", "reps", "censored"])?;
    for (m, e) in methods.iter().zip(estimates) {
        w.write_record([m.name().to_string(), e.mean.to_string(), e.stderr.to_string(), e.reps.to_string(), e.censored.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn condition(n0: &[u64], n1: &[u64], alpha: f64, beta: f64, grid: &str, draws: usize, seed: u64) -> Result<()> {
    let mu_grid = parse_grid(grid)?;
    let mut w = csv::Writer::from_writer(io::stdout());
    w.write_record(["n0", "n1", "required_mu"])?;
    for cell in condition_surface(n0, n1, alpha, beta, &mu_grid, draws, seed)? {
        w.write_record([cell.n0.to_string(), cell.n1.to_string(), cell.required.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt().with_writer(io::stderr).init();
    match Cli::parse().command {
        Command::Run { figure, seed, reps, out } => run(&figure, seed, reps, &out),
        Command::Power { scenario, test } => power(&scenario, &test),
        Command::Condition { n0, n1, alpha, beta, grid, draws, seed } => {
            condition(&n0, &n1, alpha, beta, &grid, draws, seed)
        }
        Command::Serve { bind, data_dir, alpha } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(gnt_service::serve(ServiceConfig { bind, data_dir, default_alpha: alpha }))?;
            Ok(())
        }
    }
}
