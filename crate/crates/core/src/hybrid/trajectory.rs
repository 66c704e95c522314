use serde::{Deserialize, Serialize};

use super::{label, ControlBox, Facet};
use crate::dynamics::{Mode, State};

/// Whether a sample lies on the integration grid or marks an interval boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleKind {
    /// Regular sample at a multiple of the step; these are what intensity
    /// estimates count.
    Grid,
    /// End of an interval at a non-grid time, or the first point of the
    /// interval entered by a reset.
    Boundary,
}

/// A point of a hybrid trajectory. `interval` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub interval: usize,
    pub state: State,
    pub mode: Mode,
    pub kind: SampleKind,
}

/// Receives samples as an executor produces them.
pub trait SampleSink {
    fn sample(&mut self, s: &Sample);
}

impl SampleSink for Vec<Sample> {
    fn sample(&mut self, s: &Sample) {
        self.push(*s);
    }
}

impl<S: SampleSink + ?Sized> SampleSink for &mut S {
    fn sample(&mut self, s: &Sample) {
        (**self).sample(s)
    }
}

/// Drops every sample; for runs where only events matter.
#[derive(Debug, Default, Clone, Copy)]
pub struct Discard;

impl SampleSink for Discard {
    fn sample(&mut self, _: &Sample) {}
}

/// A discrete transition: interval `interval` ends on `facet` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub t: f64,
    pub interval: usize,
    pub facet: Facet,
    pub state: State,
    pub from: Mode,
    pub to: Mode,
    /// Signed distance to the facet when a stochastic clock fired.
    pub u_at_fire: Option<f64>,
}

/// Switching sequence `t_0 ≤ t_1 ≤ … ≤ t_k`; interval `i` is `[t_{i-1}, t_i]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HybridTimeDomain {
    switching: Vec<f64>,
    /// The last interval extends to infinity.
    open_ended: bool,
}

impl HybridTimeDomain {
    pub fn new(switching: Vec<f64>, open_ended: bool) -> Self {
        HybridTimeDomain {
            switching,
            open_ended,
        }
    }

    pub fn switching_sequence(&self) -> &[f64] {
        &self.switching
    }

    /// Number of intervals `k`.
    pub fn interval_count(&self) -> usize {
        self.switching.len().saturating_sub(1)
    }

    /// `[t_{i-1}, t_i]` for 1-based `i`.
    pub fn interval(&self, i: usize) -> Option<(f64, f64)> {
        if i == 0 || i >= self.switching.len() {
            return None;
        }
        let end = if self.open_ended && i + 1 == self.switching.len() {
            f64::INFINITY
        } else {
            self.switching[i]
        };
        Some((self.switching[i - 1], end))
    }

    pub fn is_infinite(&self) -> bool {
        self.open_ended || self.switching.last().is_some_and(|t| t.is_infinite())
    }

    pub fn start(&self) -> f64 {
        self.switching.first().copied().unwrap_or(0.0)
    }

    pub fn end(&self) -> f64 {
        if self.open_ended {
            f64::INFINITY
        } else {
            self.switching.last().copied().unwrap_or(0.0)
        }
    }

    /// The sequence is non-decreasing and has at least one interval.
    pub fn is_valid(&self) -> bool {
        self.switching.len() >= 2 && self.switching.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Why an executor stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// Reached the horizon while switches were still pending.
    Horizon,
    /// Reached the horizon in a mode whose equilibrium never reaches a guard.
    NoMoreEvents,
    /// Stopped after the configured number of events.
    EventLimit,
}

/// A hybrid trajectory: time domain, per-interval modes, events and
/// (optionally) the recorded samples of every arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridTrajectory {
    pub domain: HybridTimeDomain,
    /// `modes[i - 1]` is the mode on interval `i`.
    pub modes: Vec<Mode>,
    pub events: Vec<SwitchEvent>,
    /// Samples ordered by time; empty when the run discarded them.
    pub samples: Vec<Sample>,
    pub termination: Termination,
    /// Final state at the end of the domain.
    pub final_state: State,
}

impl HybridTrajectory {
    pub fn start_time(&self) -> f64 {
        self.domain.start()
    }

    pub fn end_time(&self) -> f64 {
        self.domain.end()
    }

    /// Samples of interval `i` (1-based).
    pub fn arc(&self, i: usize) -> &[Sample] {
        let lo = self.samples.partition_point(|s| s.interval < i);
        let hi = self.samples.partition_point(|s| s.interval <= i);
        &self.samples[lo..hi]
    }

    /// Trajectory with the two display cases exchanged.
    pub fn swapped(&self) -> HybridTrajectory {
        HybridTrajectory {
            domain: self.domain.clone(),
            modes: self.modes.iter().map(|m| m.swapped()).collect(),
            events: self
                .events
                .iter()
                .map(|e| SwitchEvent {
                    facet: Facet::new(e.facet.axis.other(), e.facet.side),
                    state: e.state.swapped(),
                    from: e.from.swapped(),
                    to: e.to.swapped(),
                    ..*e
                })
                .collect(),
            samples: self
                .samples
                .iter()
                .map(|s| Sample {
                    state: s.state.swapped(),
                    mode: s.mode.swapped(),
                    ..*s
                })
                .collect(),
            termination: self.termination,
            final_state: self.final_state.swapped(),
        }
    }

    /// Checks the structural trajectory conditions: a valid domain with one mode
    /// per interval, events at the interval boundaries that apply the label
    /// map of their facet, and samples inside their interval's time span.
    pub fn check_structure(&self, bounds: &ControlBox) -> Result<(), String> {
        if !self.domain.is_valid() {
            return Err("switching sequence is not a non-decreasing sequence".into());
        }
        let k = self.domain.interval_count();
        if self.modes.len() != k {
            return Err(format!("{} modes for {} intervals", self.modes.len(), k));
        }
        if self.events.len() + 1 != k {
            return Err(format!("{} events for {} intervals", self.events.len(), k));
        }
        let seq = self.domain.switching_sequence();
        for (j, ev) in self.events.iter().enumerate() {
            let i = j + 1;
            if ev.interval != i {
                return Err(format!("event {j} closes interval {} not {i}", ev.interval));
            }
            if ev.t != seq[i] {
                return Err(format!("event {j} at {} but t_{i} = {}", ev.t, seq[i]));
            }
            if ev.from != self.modes[i - 1] || ev.to != self.modes[i] {
                return Err(format!("event {j} modes do not match intervals"));
            }
            if ev.to != label(ev.facet.axis, ev.from) {
                return Err(format!("event {j} does not apply the label map"));
            }
            if !bounds.level(ev.facet).is_finite() {
                return Err(format!("event {j} facet has no finite level"));
            }
        }
        for s in &self.samples {
            let Some((lo, hi)) = self.domain.interval(s.interval) else {
                return Err(format!("sample at t={} in unknown interval {}", s.t, s.interval));
            };
            if s.t < lo || s.t > hi {
                return Err(format!(
                    "sample at t={} outside interval {} = [{lo}, {hi}]",
                    s.t, s.interval
                ));
            }
            if s.mode != self.modes[s.interval - 1] {
                return Err(format!("sample at t={} has the wrong mode", s.t));
            }
        }
        Ok(())
    }
}
