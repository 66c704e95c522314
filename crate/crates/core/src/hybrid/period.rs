use serde::{Deserialize, Serialize};

use super::trajectory::{HybridTrajectory, SwitchEvent};
use super::{Facet, Side};
use crate::dynamics::State;

/// Evidence that a trajectory recurs after `period` seconds and `shift`
/// switching instants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicCertificate {
    #[serde(rename = "T")]
    pub period: f64,
    #[serde(rename = "l")]
    pub shift: usize,
    pub anchor: State,
    pub anchor_time: f64,
    pub error: f64,
}

/// A switching instant: all events sharing one time stamp.
#[derive(Debug, Clone, PartialEq)]
struct Instant {
    t: f64,
    state: State,
    facets: Vec<Facet>,
}

fn group_instants(events: &[SwitchEvent]) -> Vec<Instant> {
    let mut out: Vec<Instant> = Vec::new();
    for ev in events {
        match out.last_mut() {
            Some(last) if last.t == ev.t => last.facets.push(ev.facet),
            _ => out.push(Instant {
                t: ev.t,
                state: ev.state,
                facets: vec![ev.facet],
            }),
        }
    }
    for inst in &mut out {
        inst.facets.sort();
    }
    out
}

/// Tail-recurrence search over the event sequence.
///
/// Events that share a time stamp (simultaneous resets on both axes) count as
/// one switching instant, so the synchronized orbit, which crosses both upper
/// facets together and later both lower facets together, has shift 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodDetector {
    /// Maximum componentwise state mismatch between recurring instants.
    pub tolerance: f64,
    pub max_shift: usize,
    /// Minimum number of events required before attempting detection.
    pub min_events: usize,
}

impl Default for PeriodDetector {
    fn default() -> Self {
        PeriodDetector {
            tolerance: 1e-6,
            max_shift: 4,
            min_events: 6,
        }
    }
}

/// [`PeriodDetector::detect`] with default settings.
pub fn detect_period(traj: &HybridTrajectory) -> Option<PeriodicCertificate> {
    PeriodDetector::default().detect(traj)
}

impl PeriodDetector {
    pub fn detect(&self, traj: &HybridTrajectory) -> Option<PeriodicCertificate> {
        if traj.events.len() < self.min_events {
            return None;
        }
        let instants = group_instants(&traj.events);
        (1..=self.max_shift).find_map(|shift| self.try_shift(&instants, shift))
    }

    fn try_shift(&self, instants: &[Instant], shift: usize) -> Option<PeriodicCertificate> {
        // Compare the last two full periods' worth of instants with their
        // predecessors one shift earlier.
        let pairs = 2 * shift;
        if instants.len() < shift + pairs {
            return None;
        }
        let n = instants.len();
        let mut error: f64 = 0.0;
        let mut period_sum = 0.0;
        for j in n - pairs..n {
            let (cur, prev) = (&instants[j], &instants[j - shift]);
            if cur.facets != prev.facets {
                return None;
            }
            error = error.max(cur.state.max_abs_diff(&prev.state));
            if error > self.tolerance {
                return None;
            }
            period_sum += cur.t - prev.t;
        }
        let period = period_sum / pairs as f64;
        if period <= 0.0 {
            return None;
        }
        let tail = &instants[n - shift..];
        let anchor = tail
            .iter()
            .rev()
            .find(|inst| inst.facets.iter().all(|f| f.side == Side::Lower))
            .unwrap_or(&tail[shift - 1]);
        Some(PeriodicCertificate {
            period,
            shift,
            anchor: anchor.state,
            anchor_time: anchor.t,
            error,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Mode;
    use crate::hybrid::run_deterministic;

    #[test]
    fn diagonal_orbit_has_shift_two() {
        let traj = run_deterministic(State::new(2.5, 2.5, 5.0), Mode::CLOSED, 5000.0).unwrap();
        let cert = detect_period(&traj).expect("periodic");
        assert_eq!(cert.shift, 2);
        assert!(cert.error <= 1e-6);
        assert!(cert.anchor.t1.abs() < 1e-9 && cert.anchor.t2.abs() < 1e-9);
        assert!((cert.anchor.p - 15.23).abs() <= 0.1, "{}", cert.anchor.p);
    }

    #[test]
    fn transient_is_rejected() {
        // Desynchronized start, cut off before the orbit settles.
        let traj = run_deterministic(State::new(0.5, 4.5, 5.0), Mode::CLOSED, 1500.0).unwrap();
        assert!(traj.events.len() >= 6);
        assert_eq!(detect_period(&traj), None);
    }

    #[test]
    fn too_few_events() {
        let traj = run_deterministic(State::new(2.5, 2.5, 5.0), Mode::CLOSED, 300.0).unwrap();
        assert!(traj.events.len() < 6);
        assert_eq!(detect_period(&traj), None);
    }
}
