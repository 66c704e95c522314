use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sync::{classify_synchronization, PressureHistogram, SyncCriteria};
use crate::dynamics::{Mode, ReducedCoefficients, State, DEFAULT_DT};
use crate::error::{invalid, Result};
use crate::hybrid::{ControlBox, DeterministicExecutor, Discard};
use crate::stochastic::{NoiseModel, RandomSource, StochasticExecutor};

/// Inputs of a prevalence sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub eps_list: Vec<f64>,
    pub n_traj: usize,
    pub horizon: f64,
    pub seed: u64,
    pub x0: State,
    pub m0: Mode,
    pub dt: f64,
    pub coefficients: ReducedCoefficients,
    pub bounds: ControlBox,
    pub criteria: SyncCriteria,
}

impl SweepPlan {
    pub fn new(eps_list: Vec<f64>, n_traj: usize, horizon: f64, seed: u64) -> Self {
        SweepPlan {
            eps_list,
            n_traj,
            horizon,
            seed,
            x0: State::new(2.5, 2.5, 5.0),
            m0: Mode::CLOSED,
            dt: DEFAULT_DT,
            coefficients: ReducedCoefficients::CANONICAL,
            bounds: ControlBox::CANONICAL,
            criteria: SyncCriteria::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_list.is_empty() {
            return Err(invalid("eps_list", "must not be empty"));
        }
        for &eps in &self.eps_list {
            NoiseModel::new(eps)?;
        }
        if self.n_traj == 0 {
            return Err(invalid("n_traj", "must be at least 1"));
        }
        self.criteria.validate()
    }
}

/// One line of the prevalence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// 0 marks the deterministic executor.
    pub eps: f64,
    pub mean_prevalence: f64,
    pub stderr: f64,
    pub n_traj: usize,
    pub horizon: f64,
    pub seed: u64,
    pub mean_episodes: f64,
    pub peak_histogram: PressureHistogram,
}

/// Estimates `f(ε)` for every ε in the plan plus the deterministic `f(0)`.
///
/// Trajectory `j` of every ε uses stream `(seed, j)`. Runs are spread over the
/// current rayon pool; results are collected in a fixed order, so the table
/// does not depend on the thread count.
pub fn prevalence_sweep(plan: &SweepPlan) -> Result<Vec<SweepRow>> {
    plan.validate()?;

    let det = DeterministicExecutor::new(plan.coefficients, plan.bounds)
        .with_sample_dt(plan.dt)
        .run_with(plan.x0, plan.m0, plan.horizon, Discard)?;
    let det_report = classify_synchronization(&det, &plan.criteria);
    let mut rows = vec![SweepRow {
        eps: 0.0,
        mean_prevalence: det_report.prevalence,
        stderr: 0.0,
        n_traj: 1,
        horizon: plan.horizon,
        seed: plan.seed,
        mean_episodes: det_report.episode_count as f64,
        peak_histogram: det_report.peak_histogram,
    }];

    let jobs: Vec<(usize, usize)> = (0..plan.eps_list.len())
        .flat_map(|e| (0..plan.n_traj).map(move |j| (e, j)))
        .collect();
    let reports = jobs
        .par_iter()
        .map(|&(e, j)| {
            let exec = StochasticExecutor::new(NoiseModel::new(plan.eps_list[e])?)
                .with_coefficients(plan.coefficients)
                .with_bounds(plan.bounds)
                .with_dt(plan.dt);
            let traj = exec.run_with(
                plan.x0,
                plan.m0,
                plan.horizon,
                RandomSource::new(plan.seed, j as u64),
                Discard,
            )?;
            Ok(classify_synchronization(&traj, &plan.criteria))
        })
        .collect::<Result<Vec<_>>>()?;

    for (e, chunk) in reports.chunks(plan.n_traj).enumerate() {
        let n = chunk.len() as f64;
        let mean = chunk.iter().fold(0.0, |acc, r| acc + r.prevalence) / n;
        let stderr = if chunk.len() > 1 {
            let var = chunk
                .iter()
                .fold(0.0, |acc, r| acc + (r.prevalence - mean).powi(2))
                / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        let mut hist = PressureHistogram::default();
        for r in chunk {
            hist.merge(&r.peak_histogram);
        }
        rows.push(SweepRow {
            eps: plan.eps_list[e],
            mean_prevalence: mean,
            stderr,
            n_traj: plan.n_traj,
            horizon: plan.horizon,
            seed: plan.seed,
            mean_episodes: chunk.iter().map(|r| r.episode_count).sum::<usize>() as f64 / n,
            peak_histogram: hist,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_nonpositive_eps() {
        assert!(prevalence_sweep(&SweepPlan::new(vec![], 2, 100.0, 1)).is_err());
        assert!(prevalence_sweep(&SweepPlan::new(vec![0.0], 2, 100.0, 1)).is_err());
        assert!(prevalence_sweep(&SweepPlan::new(vec![0.1], 0, 100.0, 1)).is_err());
    }

    #[test]
    fn deterministic_row_first_and_reproducible() {
        let plan = SweepPlan::new(vec![0.05], 3, 3000.0, 9);
        let a = prevalence_sweep(&plan).unwrap();
        let b = prevalence_sweep(&plan).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].eps, 0.0);
        assert_eq!(a[0].mean_prevalence, 1.0);
        assert_eq!(a.len(), 2);
        assert!((0.0..=1.0).contains(&a[1].mean_prevalence));
    }
}
