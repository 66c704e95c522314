//! Curve-intensity estimation, synchronization classification and the
//! prevalence function `f(ε)`.
//!
//! Intensity grids count regular samples falling in each bin of a 2-D
//! projection of the state space; the mode is discarded, which identifies the
//! four copies of the deadband box. The estimate for a bin is the mean count
//! per trajectory.

mod grid;
mod sweep;
mod sync;

pub use grid::{accumulate_intensity, GridSet, GridSpec, IntensityGrid, Plane};
pub use sweep::{prevalence_sweep, SweepPlan, SweepRow};
pub use sync::{classify_synchronization, PressureHistogram, SyncCriteria, SyncReport};
