use log::warn;

use super::trajectory::{
    HybridTimeDomain, HybridTrajectory, Sample, SampleKind, SampleSink, SwitchEvent, Termination,
};
use super::{guard_facet, reset, ControlBox, Facet};
use crate::dynamics::{flow_unchecked, Axis, Mode, ReducedCoefficients, State, DEFAULT_DT};
use crate::error::{invalid, Result, SimError};

/// Accuracy of located switching instants, in °C on the crossed coordinate.
pub const EVENT_TOLERANCE: f64 = 1e-10;

const MAX_BISECTIONS: usize = 200;

/// Hysteresis executor using the closed-form mode flows.
///
/// Samples are emitted every `sample_dt` seconds of global time; switching
/// instants are located by bisection on the exact flow, not on the samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeterministicExecutor {
    pub coefficients: ReducedCoefficients,
    pub bounds: ControlBox,
    pub sample_dt: f64,
    pub max_events: Option<usize>,
}

impl Default for DeterministicExecutor {
    fn default() -> Self {
        DeterministicExecutor {
            coefficients: ReducedCoefficients::CANONICAL,
            bounds: ControlBox::CANONICAL,
            sample_dt: DEFAULT_DT,
            max_events: None,
        }
    }
}

/// Canonical-model run that records every sample.
pub fn run_deterministic(x0: State, m0: Mode, horizon: f64) -> Result<HybridTrajectory> {
    DeterministicExecutor::default().run(x0, m0, horizon)
}

impl DeterministicExecutor {
    pub fn new(coefficients: ReducedCoefficients, bounds: ControlBox) -> Self {
        DeterministicExecutor {
            coefficients,
            bounds,
            ..Default::default()
        }
    }

    pub fn with_sample_dt(mut self, dt: f64) -> Self {
        self.sample_dt = dt;
        self
    }

    pub fn with_max_events(mut self, n: usize) -> Self {
        self.max_events = Some(n);
        self
    }

    /// Runs and keeps all samples in the returned trajectory.
    pub fn run(&self, x0: State, m0: Mode, horizon: f64) -> Result<HybridTrajectory> {
        let mut samples = Vec::new();
        let mut traj = self.run_with(x0, m0, horizon, &mut samples)?;
        traj.samples = samples;
        Ok(traj)
    }

    fn validate(&self, x0: &State, horizon: f64) -> Result<()> {
        self.coefficients.validate()?;
        self.bounds.validate()?;
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(invalid("horizon", format!("must be finite and > 0, got {horizon}")));
        }
        if !(self.sample_dt.is_finite() && self.sample_dt > 0.0) {
            return Err(invalid("dt", format!("must be finite and > 0, got {}", self.sample_dt)));
        }
        if !x0.is_finite() {
            return Err(SimError::NonFinite {
                what: "initial state",
            });
        }
        if !self.bounds.contains_interior(x0) {
            return Err(invalid(
                "x0",
                format!("initial temperatures ({}, {}) must lie strictly inside the deadband", x0.t1, x0.t2),
            ));
        }
        Ok(())
    }

    /// Runs, streaming samples into `sink`; the returned trajectory has no samples.
    pub fn run_with<S: SampleSink>(
        &self,
        x0: State,
        m0: Mode,
        horizon: f64,
        mut sink: S,
    ) -> Result<HybridTrajectory> {
        self.validate(&x0, horizon)?;
        let k = &self.coefficients;
        let dt = self.sample_dt;

        let mut t = 0.0;
        let mut x = x0;
        let mut mode = m0;
        let mut interval = 1usize;
        let mut switching = vec![0.0];
        let mut modes = vec![m0];
        let mut events: Vec<SwitchEvent> = Vec::new();
        let mut warned_negative = false;
        let mut step_index: u64 = 0;

        sink.sample(&Sample {
            t,
            interval,
            state: x,
            mode,
            kind: SampleKind::Grid,
        });

        let termination = loop {
            let grid_t = (step_index + 1) as f64 * dt;
            let t_next = grid_t.min(horizon);
            let x_next = flow_unchecked(&x, mode, k, t_next - t);

            let crossed: Vec<Axis> = Axis::BOTH
                .into_iter()
                .filter(|&a| guard_facet(mode, a).signed_distance(&x_next, &self.bounds) >= 0.0)
                .collect();

            if crossed.is_empty() {
                t = t_next;
                x = x_next;
                if x.p < 0.0 && !warned_negative {
                    warn!("suction pressure became negative ({}) at t={t}", x.p);
                    warned_negative = true;
                }
                if t_next == grid_t {
                    step_index += 1;
                    sink.sample(&Sample {
                        t,
                        interval,
                        state: x,
                        mode,
                        kind: SampleKind::Grid,
                    });
                } else {
                    sink.sample(&Sample {
                        t,
                        interval,
                        state: x,
                        mode,
                        kind: SampleKind::Boundary,
                    });
                }
                if t >= horizon {
                    break if self.may_switch_again(&x, mode) {
                        Termination::Horizon
                    } else {
                        Termination::NoMoreEvents
                    };
                }
                continue;
            }

            let span = t_next - t;
            // Flow by the located offset itself; `t_event - t` would round it.
            let offset = crossed
                .iter()
                .map(|&a| self.locate(&x, mode, guard_facet(mode, a), span))
                .fold(f64::INFINITY, f64::min);
            let t_event = t + offset;
            let x_event = flow_unchecked(&x, mode, k, offset);
            let firing: Vec<Axis> = Axis::BOTH
                .into_iter()
                .filter(|&a| {
                    guard_facet(mode, a).signed_distance(&x_event, &self.bounds) >= -EVENT_TOLERANCE
                })
                .collect();

            t = t_event;
            x = x_event;
            sink.sample(&Sample {
                t,
                interval,
                state: x,
                mode,
                kind: SampleKind::Boundary,
            });

            let mut limit_hit = false;
            for axis in firing {
                let facet = guard_facet(mode, axis);
                let (x_after, next_mode) = reset(axis, x, mode);
                events.push(SwitchEvent {
                    t,
                    interval,
                    facet,
                    state: x,
                    from: mode,
                    to: next_mode,
                    u_at_fire: None,
                });
                switching.push(t);
                x = x_after;
                mode = next_mode;
                interval += 1;
                modes.push(mode);
                sink.sample(&Sample {
                    t,
                    interval,
                    state: x,
                    mode,
                    kind: SampleKind::Boundary,
                });
                if self.max_events.is_some_and(|n| events.len() >= n) {
                    limit_hit = true;
                    break;
                }
            }
            if limit_hit {
                break Termination::EventLimit;
            }
        };

        switching.push(t);
        Ok(HybridTrajectory {
            domain: HybridTimeDomain::new(switching, false),
            modes,
            events,
            samples: Vec::new(),
            termination,
            final_state: x,
        })
    }

    /// Offset in `[0, span]` at which the flow from `x` reaches `facet`,
    /// given that it has reached it by `span`.
    fn locate(&self, x: &State, mode: Mode, facet: Facet, span: f64) -> f64 {
        let g = |s: f64| {
            facet.signed_distance(&flow_unchecked(x, mode, &self.coefficients, s), &self.bounds)
        };
        let (mut lo, mut hi) = (0.0, span);
        for _ in 0..MAX_BISECTIONS {
            if g(hi).abs() <= EVENT_TOLERANCE {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// Whether the current mode's equilibrium lies on or beyond some guard.
    fn may_switch_again(&self, x: &State, mode: Mode) -> bool {
        match self.coefficients.fixed_point(mode) {
            Some(x_star) => Axis::BOTH.into_iter().any(|a| {
                let facet = guard_facet(mode, a);
                facet.signed_distance(&x_star, &self.bounds) >= 0.0
                    || facet.signed_distance(x, &self.bounds) >= 0.0
            }),
            None => true,
        }
    }
}
