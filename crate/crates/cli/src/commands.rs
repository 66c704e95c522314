use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use hysim_core::dynamics::{reduce_physical, PhysicalParameters, ReducedCoefficients};
use hysim_core::export::{
    read_trajectory_csv, write_grid_csv, write_grid_pgm, write_sweep_csv, TrajectoryCsv,
};
use hysim_core::hybrid::{detect_period, DeterministicExecutor};
use hysim_core::intensity::{prevalence_sweep, GridSet, IntensityGrid, SweepPlan};
use hysim_core::stochastic::{NoiseModel, RandomSource, StochasticExecutor};
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Coefficients, Needs, RunConfig};

pub const CONFIG_ECHO: &str = "config.json";
pub const MANIFEST: &str = "manifest.json";

fn prepare(config: RunConfig, needs: Needs, out: &Path) -> Result<(RunConfig, ReducedCoefficients)> {
    let config = config.resolve(needs);
    let k = config.validate(needs)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_json(&out.join(CONFIG_ECHO), &config)?;
    Ok((config, k))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn horizon(c: &RunConfig) -> f64 {
    c.horizon.expect("resolved config has a horizon")
}

pub fn deterministic(config: RunConfig, out: &Path) -> Result<()> {
    let (config, k) = prepare(config, Needs::Deterministic, out)?;
    let exec = DeterministicExecutor::new(k, config.bounds).with_sample_dt(config.dt);
    let path = out.join("trajectory.csv");
    let mut csv = TrajectoryCsv::deterministic(create(&path)?)?;
    let traj = exec.run_with(config.x0, config.m0, horizon(&config), &mut csv)?;
    csv.finish().with_context(|| format!("writing {}", path.display()))?;
    println!(
        "{} events, termination {:?}, final state {:?}",
        traj.events.len(),
        traj.termination,
        traj.final_state.to_array()
    );
    if config.detect_period {
        let cert = detect_period(&traj).ok_or_else(|| {
            anyhow!(
                "no periodic orbit detected in {} events; try a longer horizon",
                traj.events.len()
            )
        })?;
        write_json(&out.join("certificate.json"), &cert)?;
        println!(
            "period T = {:.4} s, shift l = {}, anchor {:?}, error {:.3e}",
            cert.period,
            cert.shift,
            cert.anchor.to_array(),
            cert.error
        );
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub epsilon: f64,
    pub dt: f64,
    pub horizon: f64,
    pub trajectories: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub stream: u64,
    pub file: String,
    pub events: usize,
}

fn stochastic_executor(config: &RunConfig, k: ReducedCoefficients) -> Result<StochasticExecutor> {
    Ok(StochasticExecutor::new(NoiseModel::new(config.epsilon)?)
        .with_coefficients(k)
        .with_bounds(config.bounds)
        .with_dt(config.dt))
}

pub fn stochastic(config: RunConfig, out: &Path) -> Result<()> {
    let (config, k) = prepare(config, Needs::Stochastic, out)?;
    let exec = stochastic_executor(&config, k)?;
    // Each worker owns its trajectory and its file.
    let entries = (0..config.n_traj)
        .into_par_iter()
        .map(|j| -> Result<ManifestEntry> {
            let file = format!("trajectory_{j:04}.csv");
            let path = out.join(&file);
            let mut csv = TrajectoryCsv::stochastic(create(&path)?, config.bounds)?;
            let traj = exec
                .run_with(
                    config.x0,
                    config.m0,
                    horizon(&config),
                    RandomSource::new(config.seed, j as u64),
                    &mut csv,
                )
                .with_context(|| format!("trajectory {j}"))?;
            csv.finish().with_context(|| format!("writing {}", path.display()))?;
            info!("trajectory {j}: {} events", traj.events.len());
            Ok(ManifestEntry {
                index: j,
                stream: j as u64,
                file,
                events: traj.events.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        seed: config.seed,
        epsilon: config.epsilon,
        dt: config.dt,
        horizon: horizon(&config),
        trajectories: entries,
    };
    write_json(&out.join(MANIFEST), &manifest)?;
    println!("{} trajectories written to {}", manifest.trajectories.len(), out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct GridSummary<'a> {
    plane: &'a str,
    interval: [f64; 2],
    n_traj: u64,
    nx: usize,
    ny: usize,
    total_in_bounds: u64,
    overflow: u64,
    max_count: u64,
    spec: &'a hysim_core::intensity::GridSpec,
}

fn run_grids(config: &RunConfig, k: ReducedCoefficients) -> Result<GridSet> {
    let specs = config.grid.specs();
    let interval = config.interval();
    if config.epsilon == 0.0 {
        let mut set = GridSet::new(&specs, interval)?;
        DeterministicExecutor::new(k, config.bounds)
            .with_sample_dt(config.dt)
            .run_with(config.x0, config.m0, horizon(config), &mut set)?;
        set.finish_trajectory();
        return Ok(set);
    }
    let exec = stochastic_executor(config, k)?;
    let parts = (0..config.n_traj)
        .into_par_iter()
        .map(|j| -> Result<GridSet> {
            let mut set = GridSet::new(&specs, interval)?;
            exec.run_with(
                config.x0,
                config.m0,
                horizon(config),
                RandomSource::new(config.seed, j as u64),
                &mut set,
            )
            .with_context(|| format!("trajectory {j}"))?;
            set.finish_trajectory();
            Ok(set)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = GridSet::new(&specs, interval)?;
    for part in &parts {
        total.merge(part)?;
    }
    Ok(total)
}

fn read_grids(config: &RunConfig, dir: &Path) -> Result<GridSet> {
    let manifest_path = dir.join(MANIFEST);
    let text = fs::read_to_string(&manifest_path)
        .with_context(|| format!("missing ensemble: cannot read {}", manifest_path.display()))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", manifest_path.display()))?;
    if manifest.trajectories.is_empty() {
        return Err(anyhow!("missing ensemble: {} lists no trajectories", manifest_path.display()));
    }
    let [lo, hi] = config.interval();
    if hi > manifest.horizon {
        return Err(anyhow!(
            "invalid config field `grid.interval`: [{lo}, {hi}] exceeds the ensemble horizon {}",
            manifest.horizon
        ));
    }
    let specs = config.grid.specs();
    let mut total = GridSet::new(&specs, [lo, hi])?;
    for entry in &manifest.trajectories {
        let path = dir.join(&entry.file);
        let file = File::open(&path)
            .with_context(|| format!("missing ensemble member {}", path.display()))?;
        let mut set = GridSet::new(&specs, [lo, hi])?;
        read_trajectory_csv(BufReader::new(file), manifest.dt, &mut set)
            .with_context(|| format!("reading {}", path.display()))?;
        set.finish_trajectory();
        total.merge(&set)?;
    }
    Ok(total)
}

pub fn intensity(config: RunConfig, out: &Path, ensemble: Option<&Path>) -> Result<()> {
    let mut config = config;
    if let Some(dir) = ensemble {
        let text = fs::read_to_string(dir.join(MANIFEST)).with_context(|| {
            format!("missing ensemble: cannot read {}", dir.join(MANIFEST).display())
        })?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        config.horizon.get_or_insert(manifest.horizon);
    }
    let (config, k) = prepare(config, Needs::Intensity, out)?;
    let set = match ensemble {
        Some(dir) => read_grids(&config, dir)?,
        None => run_grids(&config, k)?,
    };
    for grid in &set.grids {
        write_grid(out, grid)?;
    }
    Ok(())
}

fn write_grid(out: &Path, grid: &IntensityGrid) -> Result<()> {
    let name = grid.spec.plane.as_str();
    let csv_path = out.join(format!("intensity_{name}.csv"));
    write_grid_csv(create(&csv_path)?, grid).with_context(|| format!("writing {}", csv_path.display()))?;
    let pgm_path = out.join(format!("intensity_{name}.pgm"));
    write_grid_pgm(create(&pgm_path)?, grid).with_context(|| format!("writing {}", pgm_path.display()))?;
    write_json(
        &out.join(format!("intensity_{name}.json")),
        &GridSummary {
            plane: name,
            interval: grid.interval,
            n_traj: grid.n_traj,
            nx: grid.nx,
            ny: grid.ny,
            total_in_bounds: grid.total_in_bounds(),
            overflow: grid.overflow,
            max_count: grid.max_count(),
            spec: &grid.spec,
        },
    )?;
    println!(
        "{name}: {} samples in bounds, {} outside, max bin {}",
        grid.total_in_bounds(),
        grid.overflow,
        grid.max_count()
    );
    Ok(())
}

pub fn sweep(config: RunConfig, out: &Path) -> Result<()> {
    let (config, k) = prepare(config, Needs::Sweep, out)?;
    let plan = SweepPlan {
        eps_list: config.eps_list.clone(),
        n_traj: config.n_traj,
        horizon: horizon(&config),
        seed: config.seed,
        x0: config.x0,
        m0: config.m0,
        dt: config.dt,
        coefficients: k,
        bounds: config.bounds,
        criteria: config.sync,
    };
    let rows = prevalence_sweep(&plan)?;
    let path = out.join("sweep.csv");
    write_sweep_csv(create(&path)?, &rows).with_context(|| format!("writing {}", path.display()))?;
    write_json(&out.join("sweep.json"), &rows)?;
    println!("{:>8}  {:>10}  {:>10}  {:>10}", "eps", "f(eps)", "stderr", "episodes");
    for r in &rows {
        println!(
            "{:>8}  {:>10.4}  {:>10.4}  {:>10.2}",
            r.eps, r.mean_prevalence, r.stderr, r.mean_episodes
        );
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct CoefficientRow {
    name: &'static str,
    derived: f64,
    canonical: f64,
    delta: f64,
}

fn coefficient_rows(derived: &ReducedCoefficients) -> Vec<CoefficientRow> {
    let c = ReducedCoefficients::CANONICAL;
    let d = derived;
    [
        ("a", d.a, c.a),
        ("b", d.b, c.b),
        ("c", d.c, c.c),
        ("d", d.d, c.d),
        ("e", d.e, c.e),
        ("alpha", d.alpha, c.alpha),
        ("beta", d.beta, c.beta),
        ("valve_gain", d.valve_gain, c.valve_gain),
    ]
    .into_iter()
    .map(|(name, derived, canonical)| CoefficientRow {
        name,
        derived,
        canonical,
        delta: derived - canonical,
    })
    .collect()
}

pub fn derive_params(config: RunConfig, out: Option<&Path>) -> Result<()> {
    let physical = match &config.coefficients {
        Coefficients::Physical(p) => *p,
        Coefficients::Reduced(_) => PhysicalParameters::TABLE,
    };
    let derived = reduce_physical(&physical)
        .map_err(|e| anyhow!("invalid config field `coefficients`: {e}"))?;
    let rows = coefficient_rows(&derived);
    println!("{:<12} {:>14} {:>14} {:>14}", "coefficient", "derived", "canonical", "delta");
    for r in &rows {
        println!(
            "{:<12} {:>14.6e} {:>14.6e} {:>14.6e}",
            r.name, r.derived, r.canonical, r.delta
        );
    }
    if let Some(out) = out {
        let echo = RunConfig {
            coefficients: Coefficients::Physical(physical),
            ..config
        };
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        write_json(&out.join(CONFIG_ECHO), &echo)?;
        write_json(&out.join("derive_params.json"), &rows)?;
    }
    std::io::stdout().flush()?;
    Ok(())
}
