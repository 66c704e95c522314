//! Hybrid-system skeleton: the polyhedral mode domain, its switching facets,
//! label and reset maps, trajectories, the deterministic hysteresis executor
//! and periodic-orbit detection.
//!
//! The state space is four copies of the box
//! `Q = [T1_lo, T1_hi] × [T2_lo, T2_hi] × R+`, one per [`Mode`]. A trajectory
//! in mode `δ` switches on the facet returned by [`guard_facet`]; the reset
//! keeps the continuous state and replaces `δ` by [`label`]`(i, δ)`.

mod deterministic;
mod period;
mod trajectory;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Axis, Mode, State};
use crate::error::{invalid, Result};

pub use deterministic::{run_deterministic, DeterministicExecutor, EVENT_TOLERANCE};
pub use period::{detect_period, PeriodDetector, PeriodicCertificate};
pub use trajectory::{
    Discard, HybridTimeDomain, HybridTrajectory, Sample, SampleKind, SampleSink, SwitchEvent,
    Termination,
};

/// Temperature deadband `[T1_lo, T1_hi] × [T2_lo, T2_hi]`; pressure is unbounded above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlBox {
    pub t1_bounds: [f64; 2],
    pub t2_bounds: [f64; 2],
}

impl ControlBox {
    pub const CANONICAL: ControlBox = ControlBox {
        t1_bounds: [0.0, 5.0],
        t2_bounds: [0.0, 5.0],
    };

    pub fn new(t1_bounds: [f64; 2], t2_bounds: [f64; 2]) -> Result<Self> {
        let b = ControlBox {
            t1_bounds,
            t2_bounds,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, [lo, hi]) in [("t1_bounds", self.t1_bounds), ("t2_bounds", self.t2_bounds)] {
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(invalid(field, "bounds must be finite"));
            }
            if lo >= hi {
                return Err(invalid(field, format!("lower bound {lo} must be < upper bound {hi}")));
            }
        }
        Ok(())
    }

    pub fn bounds(&self, axis: Axis) -> [f64; 2] {
        match axis {
            Axis::One => self.t1_bounds,
            Axis::Two => self.t2_bounds,
        }
    }

    pub fn width(&self, axis: Axis) -> f64 {
        let [lo, hi] = self.bounds(axis);
        hi - lo
    }

    /// Coordinate of the affine hull of `facet`.
    pub fn level(&self, facet: Facet) -> f64 {
        self.bounds(facet.axis)[facet.side as usize]
    }

    /// Both temperatures strictly inside their deadbands.
    pub fn contains_interior(&self, x: &State) -> bool {
        Axis::BOTH.iter().all(|&axis| {
            let [lo, hi] = self.bounds(axis);
            let t = x.temperature(axis);
            lo < t && t < hi
        })
    }

    /// The box with its two temperature axes exchanged.
    pub fn swapped(&self) -> Self {
        ControlBox {
            t1_bounds: self.t2_bounds,
            t2_bounds: self.t1_bounds,
        }
    }
}

impl Default for ControlBox {
    fn default() -> Self {
        Self::CANONICAL
    }
}

/// Which bound of a temperature interval a facet sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower = 0,
    Upper = 1,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Lower => Side::Upper,
            Side::Upper => Side::Lower,
        }
    }
}

/// A facet `{T_axis = bound} ` of the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Facet {
    pub axis: Axis,
    pub side: Side,
}

impl Facet {
    pub const fn new(axis: Axis, side: Side) -> Self {
        Facet { axis, side }
    }

    /// Signed distance from `x` to the facet's hull, negative on the box side.
    pub fn signed_distance(&self, x: &State, bounds: &ControlBox) -> f64 {
        let level = bounds.level(*self);
        let t = x.temperature(self.axis);
        match self.side {
            Side::Upper => t - level,
            Side::Lower => level - t,
        }
    }
}

impl std::fmt::Display for Facet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let side = match self.side {
            Side::Lower => "lower",
            Side::Upper => "upper",
        };
        write!(f, "T{}-{}", self.axis.number(), side)
    }
}

/// Label map: flips valve flag `axis` of `m` (mod 2).
pub fn label(axis: Axis, m: Mode) -> Mode {
    m.with_flipped(axis)
}

/// Facet on which axis `axis` switches while in mode `m`: the upper bound
/// while the valve is closed, the lower bound while it is open.
pub fn guard_facet(m: Mode, axis: Axis) -> Facet {
    let side = if m.is_open(axis) {
        Side::Lower
    } else {
        Side::Upper
    };
    Facet::new(axis, side)
}

/// Reset map `R_axis(m)`: keeps the state, relabels the mode.
pub fn reset(axis: Axis, x: State, m: Mode) -> (State, Mode) {
    (x, label(axis, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_examples() {
        assert_eq!(label(Axis::One, Mode::CLOSED), Mode::new(1, 0).unwrap());
        assert_eq!(label(Axis::Two, Mode::OPEN), Mode::new(1, 0).unwrap());
        for m in Mode::ALL {
            for axis in Axis::BOTH {
                assert_eq!(label(axis, label(axis, m)), m);
                assert_eq!(
                    label(axis, m).is_open(axis.other()),
                    m.is_open(axis.other())
                );
            }
        }
    }

    #[test]
    fn guard_examples() {
        assert_eq!(
            guard_facet(Mode::CLOSED, Axis::One),
            Facet::new(Axis::One, Side::Upper)
        );
        assert_eq!(
            guard_facet(Mode::new(1, 0).unwrap(), Axis::One),
            Facet::new(Axis::One, Side::Lower)
        );
        for m in Mode::ALL {
            for axis in Axis::BOTH {
                let before = guard_facet(m, axis);
                let after = guard_facet(label(axis, m), axis);
                assert_eq!(after.axis, before.axis);
                assert_eq!(after.side, before.side.opposite());
            }
        }
    }

    #[test]
    fn reset_preserves_state_bits() {
        let x = State::new(4.999_999_999_9, 0.1 + 0.2, 15.233);
        for m in Mode::ALL {
            for axis in Axis::BOTH {
                let (y, m2) = reset(axis, x, m);
                assert_eq!(y.t1.to_bits(), x.t1.to_bits());
                assert_eq!(y.t2.to_bits(), x.t2.to_bits());
                assert_eq!(y.p.to_bits(), x.p.to_bits());
                assert_eq!(m2, label(axis, m));
            }
        }
    }

    #[test]
    fn box_validation() {
        assert!(ControlBox::new([5.0, 5.0], [0.0, 5.0]).is_err());
        assert!(ControlBox::new([0.0, 5.0], [1.0, f64::NAN]).is_err());
        assert!(ControlBox::new([0.0, 5.0], [0.0, 5.0]).is_ok());
    }

    #[test]
    fn facet_distance_sign() {
        let b = ControlBox::CANONICAL;
        let up = Facet::new(Axis::One, Side::Upper);
        assert!((up.signed_distance(&State::new(4.95, 2.0, 1.0), &b) + 0.05).abs() < 1e-12);
        assert!((up.signed_distance(&State::new(5.05, 2.0, 1.0), &b) - 0.05).abs() < 1e-12);
        let lo = Facet::new(Axis::Two, Side::Lower);
        assert!((lo.signed_distance(&State::new(2.0, 0.3, 1.0), &b) + 0.3).abs() < 1e-12);
    }
}
