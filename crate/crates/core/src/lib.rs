//! Simulation engine for a two-display-case supermarket refrigeration system
//! modelled as a hybrid dynamical system.
//!
//! - [`dynamics`]: the four affine mode vector fields, exact and RK4 flows,
//!   and the reduction from plant parameters to model coefficients.
//! - [`hybrid`]: deadband box, facets, label/reset maps, hybrid trajectories,
//!   the deterministic hysteresis executor and period detection.
//! - [`stochastic`]: hazard-based switching on ε-thickened facets.
//! - [`intensity`]: curve-intensity grids, synchronization classification and
//!   prevalence sweeps.
//! - [`export`]: CSV and PGM writers.

pub mod dynamics;
pub mod error;
pub mod export;
pub mod hybrid;
pub mod intensity;
pub mod stochastic;

pub use error::{Result, SimError};
