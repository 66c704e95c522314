use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hybrid::{HybridTrajectory, Side, SwitchEvent};

/// Thresholds that operationalize "synchronized".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyncCriteria {
    /// Maximum time between the two cases' valve closings [s].
    pub dt_sync: f64,
    /// Suction pressure at a synchronized closing [bar].
    pub p_ref: f64,
    pub p_tol: f64,
}

impl Default for SyncCriteria {
    fn default() -> Self {
        SyncCriteria {
            dt_sync: 1.0,
            p_ref: 15.23,
            p_tol: 0.5,
        }
    }
}

impl SyncCriteria {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_sync.is_finite() && self.dt_sync > 0.0) {
            return Err(invalid("dt_sync", format!("must be finite and > 0, got {}", self.dt_sync)));
        }
        if !self.p_ref.is_finite() {
            return Err(invalid("p_ref", "must be finite"));
        }
        if !(self.p_tol.is_finite() && self.p_tol >= 0.0) {
            return Err(invalid("p_tol", format!("must be finite and >= 0, got {}", self.p_tol)));
        }
        Ok(())
    }
}

/// Fixed-width histogram of suction pressure at valve closings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureHistogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<u64>,
    /// Values outside `[lo, lo + width * counts.len())`.
    pub outside: u64,
}

impl PressureHistogram {
    pub fn new(lo: f64, hi: f64, width: f64) -> Self {
        let n = (((hi - lo) / width).ceil() as usize).max(1);
        PressureHistogram {
            lo,
            width,
            counts: vec![0; n],
            outside: 0,
        }
    }

    pub fn add(&mut self, p: f64) {
        let rel = (p - self.lo) / self.width;
        if rel >= 0.0 && (rel as usize) < self.counts.len() {
            self.counts[rel as usize] += 1;
        } else {
            self.outside += 1;
        }
    }

    pub fn merge(&mut self, other: &PressureHistogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.outside += other.outside;
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width
    }

    /// Total count in bins whose centers lie in `[lo, hi]`.
    pub fn mass_between(&self, lo: f64, hi: f64) -> u64 {
        (0..self.counts.len())
            .filter(|&i| (lo..=hi).contains(&self.center(i)))
            .map(|i| self.counts[i])
            .sum()
    }
}

impl Default for PressureHistogram {
    fn default() -> Self {
        PressureHistogram::new(0.0, 20.0, 0.5)
    }
}

/// Synchronization summary of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncReport {
    /// Disjoint synchronized time spans, in order.
    pub episodes: Vec<(f64, f64)>,
    /// Fraction of the analysis window spent synchronized.
    pub prevalence: f64,
    pub episode_count: usize,
    /// `[start, end]` of the analysis window: from the first valve-closing
    /// instant to the end of the trajectory.
    pub window: [f64; 2],
    /// Pressure at every valve-closing event.
    pub peak_histogram: PressureHistogram,
}

/// A valve-closing instant: a closing pair or a lone closing.
struct Closing {
    t: f64,
    synchronized: bool,
}

fn closings(events: &[SwitchEvent], c: &SyncCriteria) -> Vec<Closing> {
    let lower: Vec<&SwitchEvent> = events
        .iter()
        .filter(|e| e.facet.side == Side::Lower)
        .collect();
    let mut out = Vec::with_capacity(lower.len());
    let mut i = 0;
    while i < lower.len() {
        let e = lower[i];
        match lower.get(i + 1) {
            Some(next) if next.facet.axis != e.facet.axis && next.t - e.t <= c.dt_sync => {
                // The later closing sees the pressure peak of the common cooling phase.
                let p = next.state.p;
                out.push(Closing {
                    t: next.t,
                    synchronized: (p - c.p_ref).abs() <= c.p_tol,
                });
                i += 2;
            }
            _ => {
                out.push(Closing {
                    t: e.t,
                    synchronized: false,
                });
                i += 1;
            }
        }
    }
    out
}

/// Classifies synchronized episodes of a trajectory.
///
/// Valve closings (lower-facet events) are paired greedily in time order when
/// they belong to different cases and lie within `dt_sync` of each other. A
/// pair whose later closing happens at pressure `p_ref ± p_tol` marks a
/// synchronized cycle, and that cycle owns the time up to the next closing
/// instant (or the end of the trajectory). Prevalence is the owned time over
/// the window from the first closing instant to the end.
pub fn classify_synchronization(traj: &HybridTrajectory, criteria: &SyncCriteria) -> SyncReport {
    let end = traj.end_time();
    let mut peak_histogram = PressureHistogram::default();
    for e in traj.events.iter().filter(|e| e.facet.side == Side::Lower) {
        peak_histogram.add(e.state.p);
    }
    let marks = closings(&traj.events, criteria);
    let Some(first) = marks.first() else {
        return SyncReport {
            episodes: Vec::new(),
            prevalence: 0.0,
            episode_count: 0,
            window: [end, end],
            peak_histogram,
        };
    };
    let window = [first.t, end];

    let mut episodes: Vec<(f64, f64)> = Vec::new();
    for (k, mark) in marks.iter().enumerate() {
        if !mark.synchronized {
            continue;
        }
        let until = marks.get(k + 1).map_or(end, |m| m.t);
        match episodes.last_mut() {
            Some(last) if last.1 == mark.t => last.1 = until,
            _ => episodes.push((mark.t, until)),
        }
    }
    let synced = episodes.iter().fold(0.0, |acc, (a, b)| acc + (b - a));
    let span = window[1] - window[0];
    let prevalence = if span > 0.0 {
        (synced / span).clamp(0.0, 1.0)
    } else if marks.iter().any(|m| m.synchronized) {
        1.0
    } else {
        0.0
    };
    SyncReport {
        episode_count: episodes.len(),
        episodes,
        prevalence,
        window,
        peak_histogram,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Axis, Mode, State};
    use crate::hybrid::{run_deterministic, Facet};

    #[test]
    fn deterministic_diagonal_is_fully_synchronized() {
        let traj = run_deterministic(State::new(2.5, 2.5, 5.0), Mode::CLOSED, 1e4).unwrap();
        let r = classify_synchronization(&traj, &SyncCriteria::default());
        assert_eq!(r.prevalence, 1.0);
        assert_eq!(r.episode_count, 1);
        assert!(r.window[0] > 150.0 && r.window[0] < 160.0);
        let near_peak = r.peak_histogram.mass_between(15.0, 15.5);
        assert_eq!(near_peak as usize, 2 * (traj.events.len() / 4));
    }

    fn closing(t: f64, axis: Axis, p: f64) -> SwitchEvent {
        SwitchEvent {
            t,
            interval: 1,
            facet: Facet::new(axis, Side::Lower),
            state: State::new(0.0, 0.0, p),
            from: Mode::OPEN,
            to: Mode::OPEN,
            u_at_fire: None,
        }
    }

    fn synthetic(events: Vec<SwitchEvent>, end: f64) -> HybridTrajectory {
        let mut seq = vec![0.0];
        seq.extend(events.iter().map(|e| e.t));
        seq.push(end);
        HybridTrajectory {
            domain: crate::hybrid::HybridTimeDomain::new(seq, false),
            modes: vec![Mode::CLOSED; events.len() + 1],
            events,
            samples: Vec::new(),
            termination: crate::hybrid::Termination::Horizon,
            final_state: State::default(),
        }
    }

    #[test]
    fn alternating_lone_closings_are_not_synchronized() {
        let events = (0..20)
            .map(|k| {
                let axis = if k % 2 == 0 { Axis::One } else { Axis::Two };
                closing(100.0 + 130.0 * k as f64, axis, 10.0)
            })
            .collect();
        let r = classify_synchronization(&synthetic(events, 3000.0), &SyncCriteria::default());
        assert_eq!(r.prevalence, 0.0);
        assert!(r.episodes.is_empty());
    }

    #[test]
    fn episodes_merge_and_split() {
        let c = SyncCriteria::default();
        let events = vec![
            closing(100.0, Axis::One, 15.2),
            closing(100.5, Axis::Two, 15.25),
            closing(370.0, Axis::Two, 15.2),
            closing(370.2, Axis::One, 15.3),
            // pressure too low: not synchronized
            closing(640.0, Axis::One, 12.0),
            closing(640.3, Axis::Two, 12.1),
            closing(910.0, Axis::One, 15.2),
            closing(910.9, Axis::Two, 15.2),
        ];
        let r = classify_synchronization(&synthetic(events, 1000.0), &c);
        assert_eq!(r.episodes, vec![(100.5, 640.3), (910.9, 1000.0)]);
        assert_eq!(r.window, [100.5, 1000.0]);
        let expected = ((640.3 - 100.5) + (1000.0 - 910.9)) / (1000.0 - 100.5);
        assert!((r.prevalence - expected).abs() < 1e-12);
    }

    #[test]
    fn invariant_under_axis_exchange() {
        let traj = run_deterministic(State::new(1.0, 3.5, 5.0), Mode::CLOSED, 2e4).unwrap();
        let c = SyncCriteria::default();
        assert_eq!(
            classify_synchronization(&traj, &c),
            classify_synchronization(&traj.swapped(), &c)
        );
    }

    #[test]
    fn criteria_validation() {
        assert!(SyncCriteria {
            dt_sync: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SyncCriteria::default().validate().is_ok());
    }
}
