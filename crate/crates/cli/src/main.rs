//! `hysim`: run the two-case refrigeration hybrid model from the command line.
//!
//! Settings come from built-in defaults, then the `--config` JSON document,
//! then individual flags; later sources win. Every run writes the fully
//! resolved configuration to `config.json` in its output directory, and
//! `hysim <command> --config <out>/config.json` repeats the run exactly.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use hysim_core::intensity::Plane;

use config::{RunConfig, DESK_HORIZON};

#[derive(Debug, Parser)]
#[command(name = "hysim", version, about = "Two-display-case refrigeration hybrid-system simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Hysteresis-controlled run; writes trajectory.csv (and certificate.json).
    Deterministic,
    /// Seeded ensemble with ε-thickened switching; one CSV per trajectory.
    Stochastic,
    /// Curve-intensity grids in the T1-T2 and T1-P planes.
    Intensity {
        /// Count an ensemble written by `stochastic` instead of running one.
        #[arg(long)]
        ensemble: Option<PathBuf>,
    },
    /// Synchronization prevalence f(ε) for every ε in the list.
    Sweep,
    /// Reduce the plant parameters and compare with the built-in coefficients.
    DeriveParams,
}

#[derive(Debug, Args)]
struct Flags {
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Comma-separated ε values for `sweep`.
    #[arg(long, global = true, value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,
    #[arg(long, global = true)]
    horizon: Option<f64>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    n_traj: Option<usize>,
    /// Output directory [default: out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    detect_period: bool,
    #[arg(long, global = true, value_parser = parse_plane)]
    plane: Option<Plane>,
    #[arg(long, global = true)]
    bin_width: Option<f64>,
    /// Lower temperature bound of both cases.
    #[arg(long, global = true, allow_hyphen_values = true)]
    t_lower: Option<f64>,
    /// Upper temperature bound of both cases.
    #[arg(long, global = true, allow_hyphen_values = true)]
    t_upper: Option<f64>,
    /// Intensity window I as `start,end`.
    #[arg(long, global = true, value_delimiter = ',', num_args = 2)]
    interval: Option<Vec<f64>>,
    /// `desk` sets the horizon to 1e5 s unless given explicitly.
    #[arg(long, global = true)]
    preset: Option<Preset>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum Preset {
    Desk,
}

fn parse_plane(s: &str) -> Result<Plane, String> {
    s.parse().map_err(|e: hysim_core::SimError| e.to_string())
}

impl Flags {
    fn apply(&self, mut c: RunConfig) -> RunConfig {
        if let Some(Preset::Desk) = self.preset {
            c.horizon.get_or_insert(DESK_HORIZON);
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.eps {
            c.epsilon = v;
        }
        if let Some(v) = &self.eps_list {
            c.eps_list = v.clone();
        }
        if let Some(v) = self.horizon {
            c.horizon = Some(v);
        }
        if let Some(v) = self.dt {
            c.dt = v;
        }
        if let Some(v) = self.n_traj {
            c.n_traj = v;
        }
        if self.detect_period {
            c.detect_period = true;
        }
        if let Some(p) = self.plane {
            c.grid.planes = vec![p];
        }
        if let Some(w) = self.bin_width {
            c.grid.bin_width = w;
        }
        if let Some(lo) = self.t_lower {
            c.bounds.t1_bounds[0] = lo;
            c.bounds.t2_bounds[0] = lo;
        }
        if let Some(hi) = self.t_upper {
            c.bounds.t1_bounds[1] = hi;
            c.bounds.t2_bounds[1] = hi;
        }
        if let Some(i) = &self.interval {
            c.grid.interval = Some([i[0], i[1]]);
        }
        c
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("HYSIM_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("HYSIM_THREADS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            anyhow::bail!("HYSIM_THREADS must be a positive integer, got 0");
        }
        builder = builder.num_threads(n);
    }
    builder.build().context("starting worker pool")
}

fn run(cli: Cli) -> Result<()> {
    let base = match &cli.flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let config = cli.flags.apply(base);
    let out = cli.flags.out.clone();
    let default_out = || out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let pool = thread_pool()?;
    pool.install(|| match cli.command {
        Command::Deterministic => commands::deterministic(config, &default_out()),
        Command::Stochastic => commands::stochastic(config, &default_out()),
        Command::Intensity { ensemble } => {
            commands::intensity(config, &default_out(), ensemble.as_deref())
        }
        Command::Sweep => commands::sweep(config, &default_out()),
        Command::DeriveParams => commands::derive_params(config, out.as_deref()),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
