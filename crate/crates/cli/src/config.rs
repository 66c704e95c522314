//! Run configuration: one JSON document, overridden field by field by flags.

use std::path::Path;

use anyhow::{Context, Result};
use hysim_core::dynamics::{reduce_physical, Axis, Mode, PhysicalParameters, ReducedCoefficients, State};
use hysim_core::hybrid::ControlBox;
use hysim_core::intensity::{GridSpec, Plane, SyncCriteria};
use hysim_core::stochastic::NoiseModel;
use serde::{Deserialize, Serialize};

/// Horizon used by `deterministic` when neither config nor flags set one.
pub const DETERMINISTIC_HORIZON: f64 = 5e3;
/// Horizon of the ensemble commands, counted over `I = [0, 10^6]`.
pub const ENSEMBLE_HORIZON: f64 = 1e6;
/// Desk-scale ensemble horizon (`--preset desk`).
pub const DESK_HORIZON: f64 = 1e5;

/// Model coefficients, either directly or as plant parameters to reduce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coefficients {
    Reduced(ReducedCoefficients),
    Physical(PhysicalParameters),
}

impl Default for Coefficients {
    fn default() -> Self {
        Coefficients::Reduced(ReducedCoefficients::CANONICAL)
    }
}

impl Coefficients {
    pub fn resolve(&self) -> hysim_core::Result<ReducedCoefficients> {
        match self {
            Coefficients::Reduced(k) => {
                k.validate()?;
                Ok(*k)
            }
            Coefficients::Physical(p) => {
                let k = reduce_physical(p)?;
                k.validate()?;
                Ok(k)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub planes: Vec<Plane>,
    /// Bin width on both axes [°C or bar].
    pub bin_width: f64,
    /// Time window `I`; defaults to `[0, horizon]`.
    pub interval: Option<[f64; 2]>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            planes: vec![Plane::T1T2, Plane::T1P],
            bin_width: 0.05,
            interval: None,
        }
    }
}

impl GridConfig {
    pub fn specs(&self) -> Vec<GridSpec> {
        self.planes
            .iter()
            .map(|&p| GridSpec::default_for(p).with_bin_width(self.bin_width))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub coefficients: Coefficients,
    pub bounds: ControlBox,
    /// `[T1, T2, P]`.
    pub x0: State,
    /// `[delta1, delta2]`.
    pub m0: Mode,
    pub horizon: Option<f64>,
    pub dt: f64,
    pub epsilon: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub grid: GridConfig,
    pub sync: SyncCriteria,
    pub eps_list: Vec<f64>,
    pub detect_period: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            coefficients: Coefficients::default(),
            bounds: ControlBox::CANONICAL,
            x0: State::new(2.5, 2.5, 5.0),
            m0: Mode::CLOSED,
            horizon: None,
            dt: 0.1,
            epsilon: 0.1,
            n_traj: 10,
            seed: 0,
            grid: GridConfig::default(),
            sync: SyncCriteria::default(),
            eps_list: vec![0.01, 0.03, 0.1],
            detect_period: false,
        }
    }
}

/// What a command needs from the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Needs {
    Deterministic,
    Stochastic,
    Intensity,
    Sweep,
    Parameters,
}

fn field(name: &str, e: impl std::fmt::Display) -> anyhow::Error {
    anyhow::anyhow!("invalid config field `{name}`: {e}")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn horizon_or(&self, default: f64) -> f64 {
        self.horizon.unwrap_or(default)
    }

    pub fn interval(&self) -> [f64; 2] {
        self.grid
            .interval
            .unwrap_or([0.0, self.horizon.unwrap_or(ENSEMBLE_HORIZON)])
    }

    /// Fills every defaulted field that depends on the command.
    pub fn resolve(mut self, needs: Needs) -> Self {
        let default_horizon = match needs {
            Needs::Deterministic => DETERMINISTIC_HORIZON,
            _ => ENSEMBLE_HORIZON,
        };
        self.horizon = Some(self.horizon_or(default_horizon));
        if needs == Needs::Intensity {
            self.grid.interval = Some(self.interval());
        }
        self
    }

    /// Checks every precondition the command relies on.
    pub fn validate(&self, needs: Needs) -> Result<ReducedCoefficients> {
        let k = self
            .coefficients
            .resolve()
            .map_err(|e| field("coefficients", e))?;
        if needs == Needs::Parameters {
            return Ok(k);
        }
        self.bounds.validate().map_err(|e| field("bounds", e))?;
        if !self.x0.is_finite() {
            return Err(field("x0", "must be finite"));
        }
        if !self.bounds.contains_interior(&self.x0) {
            return Err(field(
                "x0",
                format!(
                    "temperatures ({}, {}) must lie strictly inside the bounds",
                    self.x0.t1, self.x0.t2
                ),
            ));
        }
        let horizon = self.horizon_or(ENSEMBLE_HORIZON);
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(field("horizon", format!("must be finite and > 0, got {horizon}")));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(field("dt", format!("must be finite and > 0, got {}", self.dt)));
        }
        match needs {
            Needs::Stochastic => {
                self.check_epsilon("epsilon", self.epsilon)?;
                self.check_n_traj()?;
            }
            Needs::Intensity => {
                if self.epsilon != 0.0 {
                    self.check_epsilon("epsilon", self.epsilon)?;
                }
                self.check_n_traj()?;
                if self.grid.planes.is_empty() {
                    return Err(field("grid.planes", "must not be empty"));
                }
                for spec in self.grid.specs() {
                    spec.validate().map_err(|e| field("grid", e))?;
                }
                let [lo, hi] = self.interval();
                if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi && hi <= horizon) {
                    return Err(field(
                        "grid.interval",
                        format!("need 0 <= t' <= t'' <= horizon ({horizon}), got [{lo}, {hi}]"),
                    ));
                }
            }
            Needs::Sweep => {
                if self.eps_list.is_empty() {
                    return Err(field("eps_list", "must not be empty"));
                }
                for &eps in &self.eps_list {
                    self.check_epsilon("eps_list", eps)?;
                }
                self.check_n_traj()?;
                self.sync.validate().map_err(|e| field("sync", e))?;
            }
            Needs::Deterministic | Needs::Parameters => {}
        }
        Ok(k)
    }

    fn check_epsilon(&self, name: &str, eps: f64) -> Result<()> {
        NoiseModel::new(eps).map_err(|e| field(name, e))?;
        let half = self.bounds.width(Axis::One).min(self.bounds.width(Axis::Two)) / 2.0;
        if eps >= half {
            return Err(field(
                name,
                format!("{eps} must be below half the deadband width ({half})"),
            ));
        }
        Ok(())
    }

    fn check_n_traj(&self) -> Result<()> {
        if self.n_traj == 0 {
            return Err(field("n_traj", "must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_json() {
        let c = RunConfig::default().resolve(Needs::Intensity);
        let text = serde_json::to_string_pretty(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.grid.interval, Some([0.0, ENSEMBLE_HORIZON]));
    }

    #[test]
    fn partial_document_fills_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"seed": 7, "x0": [1.0, 2.0, 3.0]}"#).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.x0, State::new(1.0, 2.0, 3.0));
        assert_eq!(c.n_traj, 10);
    }

    #[test]
    fn physical_coefficients_are_reduced() {
        let c = RunConfig {
            coefficients: Coefficients::Physical(PhysicalParameters::TABLE),
            ..Default::default()
        };
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains(r#""physical":{"UA_wall_ref_max""#));
        let k = c.validate(Needs::Parameters).unwrap();
        assert_eq!(k.alpha, 0.056);
    }

    #[test]
    fn field_level_errors() {
        let msg = |c: RunConfig, n| c.validate(n).unwrap_err().to_string();
        let c = RunConfig {
            horizon: Some(0.0),
            ..Default::default()
        };
        assert!(msg(c, Needs::Deterministic).contains("`horizon`"));
        let c = RunConfig {
            bounds: ControlBox {
                t1_bounds: [5.0, 5.0],
                t2_bounds: [5.0, 5.0],
            },
            ..Default::default()
        };
        assert!(msg(c, Needs::Deterministic).contains("`bounds`"));
        let c = RunConfig {
            n_traj: 0,
            ..Default::default()
        };
        assert!(msg(c, Needs::Stochastic).contains("`n_traj`"));
        let c = RunConfig {
            eps_list: vec![],
            ..Default::default()
        };
        assert!(msg(c, Needs::Sweep).contains("`eps_list`"));
        let c = RunConfig {
            epsilon: 3.0,
            ..Default::default()
        };
        assert!(msg(c, Needs::Stochastic).contains("`epsilon`"));
    }
}
