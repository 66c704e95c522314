//! Stochastic switching on ε-thickened facets.
//!
//! The switching offset relative to a facet is modelled as `U ~ Uniform[-ε, ε]`.
//! Its hazard `h(u) = 1/(ε - u)` on `[-ε, ε)` drives one clock per axis: each
//! clock integrates the hazard of the signed distance along the sampled path
//! and fires once the integral exceeds an `Exp(1)` target. The first clock to
//! fire selects the reset. When the path crosses the neighborhood along the
//! facet normal, the firing position is uniform on `[-ε, ε]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::dynamics::{rk4_step, Axis, Mode, ReducedCoefficients, State, DEFAULT_DT};
use crate::error::{invalid, Result, SimError};
use crate::hybrid::{
    guard_facet, reset, ControlBox, Facet, HybridTimeDomain, HybridTrajectory, Sample, SampleKind,
    SampleSink, SwitchEvent, Termination,
};

/// Hazard values above `1 / (dt * HAZARD_CAP_FRACTION)` are clipped in the
/// trapezoid sum; a clock that close to the boundary fires regardless.
pub const HAZARD_CAP_FRACTION: f64 = 1e-3;

/// Half-width `ε` of the switching neighborhood [°C].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub epsilon: f64,
}

impl NoiseModel {
    pub fn new(epsilon: f64) -> Result<Self> {
        let n = NoiseModel { epsilon };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(invalid("epsilon", format!("must be finite and > 0, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// `P(U ≥ u)` for `U ~ Uniform[-ε, ε]`.
pub fn survivor(u: f64, eps: f64) -> f64 {
    if u < -eps {
        1.0
    } else if u > eps {
        0.0
    } else {
        1.0 - (u + eps) / (2.0 * eps)
    }
}

/// Conditional intensity of the uniform offset; `+∞` from `u = ε` on.
pub fn hazard(u: f64, eps: f64) -> f64 {
    if u < -eps {
        0.0
    } else if u < eps {
        1.0 / (eps - u)
    } else {
        f64::INFINITY
    }
}

/// Signed orthogonal distance to a switching facet: negative inside the
/// mode's box, positive outside.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SignedDistance(pub f64);

impl SignedDistance {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Distance from `x` to the facet on which axis `axis` switches in mode `m`.
pub fn signed_distance(x: &State, m: Mode, axis: Axis, bounds: &ControlBox) -> SignedDistance {
    SignedDistance(guard_facet(m, axis).signed_distance(x, bounds))
}

/// Seed and stream selecting one reproducible random sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomSource {
    pub seed: u64,
    pub stream: u64,
}

impl RandomSource {
    pub const fn new(seed: u64, stream: u64) -> Self {
        RandomSource { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Integrated-hazard clock for one switching surface.
///
/// The hazard is integrated against the signed distance `u`, not against
/// time, so the firing position does not depend on how fast the path moves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchClock {
    pub surface: Facet,
    pub epsilon: f64,
    pub target: f64,
    /// `∫ h(u) |du|` along the sampled path since the last draw.
    pub accumulated: f64,
    /// Signed distance at the most recent sample.
    pub last_u: f64,
    /// The last sample lay inside the neighborhood (`h > 0`).
    pub armed: bool,
}

impl SwitchClock {
    /// Fresh clock with an `Exp(1)` target, starting at signed distance `u_now`.
    pub fn draw<R: Rng + ?Sized>(surface: Facet, epsilon: f64, u_now: f64, rng: &mut R) -> Self {
        let mut target: f64 = rng.sample(Exp1);
        // Exp1 can return exactly 0 only with probability ~2^-64; keep the target positive.
        if target <= 0.0 {
            target = f64::MIN_POSITIVE;
        }
        SwitchClock {
            surface,
            epsilon,
            target,
            accumulated: 0.0,
            last_u: u_now,
            armed: hazard(u_now, epsilon) > 0.0,
        }
    }

    /// Adds the trapezoid integral of the hazard over `[last_u, u_new]` and
    /// returns whether the clock fires at the new sample. The part of the
    /// segment below `-ε`, where the hazard vanishes, is cut off. `dt` only
    /// sets the hazard cap.
    pub fn advance(&mut self, u_new: f64, dt: f64) -> bool {
        let eps = self.epsilon;
        let u_old = self.last_u;
        self.last_u = u_new;
        let h_new = hazard(u_new, eps);
        self.armed = h_new > 0.0;
        if h_new.is_infinite() {
            return true;
        }
        let (lo, hi) = if u_old <= u_new { (u_old, u_new) } else { (u_new, u_old) };
        if hi < -eps {
            return self.accumulated > self.target;
        }
        let lo = lo.max(-eps);
        let cap = 1.0 / (dt * HAZARD_CAP_FRACTION);
        let area = 0.5 * (hazard(lo, eps).min(cap) + hazard(hi, eps).min(cap)) * (hi - lo);
        self.accumulated += area;
        self.accumulated > self.target
    }
}

/// Fixed-step executor with hazard-driven switching.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticExecutor {
    pub coefficients: ReducedCoefficients,
    pub bounds: ControlBox,
    pub noise: NoiseModel,
    pub dt: f64,
    pub max_events: Option<usize>,
}

impl StochasticExecutor {
    pub fn new(noise: NoiseModel) -> Self {
        StochasticExecutor {
            coefficients: ReducedCoefficients::CANONICAL,
            bounds: ControlBox::CANONICAL,
            noise,
            dt: DEFAULT_DT,
            max_events: None,
        }
    }

    pub fn with_coefficients(mut self, k: ReducedCoefficients) -> Self {
        self.coefficients = k;
        self
    }

    pub fn with_bounds(mut self, bounds: ControlBox) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_max_events(mut self, n: usize) -> Self {
        self.max_events = Some(n);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.coefficients.validate()?;
        self.bounds.validate()?;
        self.noise.validate()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", format!("must be finite and > 0, got {}", self.dt)));
        }
        for axis in Axis::BOTH {
            let half = 0.5 * self.bounds.width(axis);
            if self.noise.epsilon >= half {
                return Err(invalid(
                    "epsilon",
                    format!(
                        "{} must be below half the T{} deadband width ({half})",
                        self.noise.epsilon,
                        axis.number()
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Runs and keeps all samples in the returned trajectory.
    pub fn run(
        &self,
        x0: State,
        m0: Mode,
        horizon: f64,
        source: RandomSource,
    ) -> Result<HybridTrajectory> {
        let mut samples = Vec::new();
        let mut traj = self.run_with(x0, m0, horizon, source, &mut samples)?;
        traj.samples = samples;
        Ok(traj)
    }

    fn distances(&self, x: &State, mode: Mode) -> [f64; 2] {
        Axis::BOTH.map(|a| signed_distance(x, mode, a, &self.bounds).value())
    }

    fn draw_clocks<R: Rng>(&self, x: &State, mode: Mode, rng: &mut R) -> [SwitchClock; 2] {
        let u = self.distances(x, mode);
        let eps = self.noise.epsilon;
        let c1 = SwitchClock::draw(guard_facet(mode, Axis::One), eps, u[0], rng);
        let c2 = SwitchClock::draw(guard_facet(mode, Axis::Two), eps, u[1], rng);
        [c1, c2]
    }

    /// Runs, streaming samples into `sink`; the returned trajectory has no samples.
    pub fn run_with<S: SampleSink>(
        &self,
        x0: State,
        m0: Mode,
        horizon: f64,
        source: RandomSource,
        mut sink: S,
    ) -> Result<HybridTrajectory> {
        self.validate()?;
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(invalid("horizon", format!("must be finite and > 0, got {horizon}")));
        }
        if !x0.is_finite() {
            return Err(SimError::NonFinite {
                what: "initial state",
            });
        }
        if !self.bounds.contains_interior(&x0) {
            return Err(invalid(
                "x0",
                format!(
                    "initial temperatures ({}, {}) must lie strictly inside the deadband",
                    x0.t1, x0.t2
                ),
            ));
        }

        let k = &self.coefficients;
        let eps = self.noise.epsilon;
        let mut rng = source.rng();

        let mut t = 0.0;
        let mut x = x0;
        let mut mode = m0;
        let mut interval = 1usize;
        let mut switching = vec![0.0];
        let mut modes = vec![m0];
        let mut events: Vec<SwitchEvent> = Vec::new();
        let mut clocks = self.draw_clocks(&x, mode, &mut rng);
        let mut step: u64 = 0;
        let mut prev_travel = [0.0; 2];

        sink.sample(&Sample {
            t,
            interval,
            state: x,
            mode,
            kind: SampleKind::Grid,
        });

        let termination = loop {
            if t >= horizon {
                break Termination::Horizon;
            }
            let grid_t = (step + 1) as f64 * self.dt;
            let (t_next, kind) = if grid_t <= horizon {
                (grid_t, SampleKind::Grid)
            } else {
                (horizon, SampleKind::Boundary)
            };
            let h_step = t_next - t;
            let x_next = rk4_step(&x, mode, k, h_step);
            if !x_next.is_finite() {
                return Err(SimError::NonFinite { what: "state" });
            }
            self.check_overshoot(&x, &x_next, &mut prev_travel, t_next)?;
            step += 1;
            t = t_next;
            x = x_next;
            sink.sample(&Sample {
                t,
                interval,
                state: x,
                mode,
                kind,
            });

            let u = self.distances(&x, mode);
            let h = u.map(|u| hazard(u, eps));
            let fired = [clocks[0].advance(u[0], h_step), clocks[1].advance(u[1], h_step)];
            let axis = match fired {
                [false, false] => continue,
                [true, false] => Axis::One,
                [false, true] => Axis::Two,
                [true, true] => {
                    let p_one = match (h[0].is_infinite(), h[1].is_infinite()) {
                        (true, true) => 0.5,
                        (true, false) => 1.0,
                        (false, true) => 0.0,
                        (false, false) => h[0] / (h[0] + h[1]),
                    };
                    if rng.random::<f64>() < p_one {
                        Axis::One
                    } else {
                        Axis::Two
                    }
                }
            };

            let facet = guard_facet(mode, axis);
            let u = facet.signed_distance(&x, &self.bounds);
            debug_assert!(u >= -eps);
            let (x_after, next_mode) = reset(axis, x, mode);
            events.push(SwitchEvent {
                t,
                interval,
                facet,
                state: x,
                from: mode,
                to: next_mode,
                u_at_fire: Some(u),
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
            clocks = self.draw_clocks(&x, mode, &mut rng);
            if self.max_events.is_some_and(|n| events.len() >= n) {
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

    /// A temperature may move out to ε plus the travel of the last two steps
    /// beyond its deadband (one step when its clock fires alone, two when it
    /// loses a simultaneous firing to the other axis). Moving further out
    /// means the step is too coarse.
    fn check_overshoot(
        &self,
        before: &State,
        after: &State,
        prev_travel: &mut [f64; 2],
        t: f64,
    ) -> Result<()> {
        let eps = self.noise.epsilon;
        for axis in Axis::BOTH {
            let [lo, hi] = self.bounds.bounds(axis);
            let (prev, value) = (before.temperature(axis), after.temperature(axis));
            let travel = (value - prev).abs();
            let limit = eps + travel + prev_travel[axis.index()] + 1e-12;
            prev_travel[axis.index()] = travel;
            let outside = (value - hi).max(lo - value);
            let moving_out = outside > (prev - hi).max(lo - prev);
            if outside > limit && moving_out {
                return Err(SimError::StepTooCoarse {
                    t,
                    axis: axis.number() as usize,
                    value,
                    limit: if value > hi { hi + limit } else { lo - limit },
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid::Side;

    #[test]
    fn survivor_boundaries() {
        let eps = 0.1;
        assert_eq!(survivor(-eps, eps), 1.0);
        assert_eq!(survivor(0.0, eps), 0.5);
        assert_eq!(survivor(eps, eps), 0.0);
        assert_eq!(survivor(-1.0, eps), 1.0);
        assert_eq!(survivor(1.0, eps), 0.0);
    }

    #[test]
    fn hazard_branches() {
        assert!((hazard(0.0, 0.1) - 10.0).abs() < 1e-12);
        assert_eq!(hazard(-0.2, 0.1), 0.0);
        assert!(hazard(0.1, 0.1).is_infinite());
        assert!(hazard(0.5, 0.1).is_infinite());
        assert!((hazard(-0.1, 0.1) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn hazard_is_density_over_survivor() {
        let eps = 0.05;
        for i in 0..99 {
            let u = -eps + 2.0 * eps * (i as f64 + 0.5) / 100.0;
            let density = 1.0 / (2.0 * eps);
            assert!((hazard(u, eps) - density / survivor(u, eps)).abs() < 1e-9);
        }
    }

    #[test]
    fn signed_distance_examples() {
        let b = ControlBox::CANONICAL;
        let u = signed_distance(&State::new(4.95, 2.0, 1.0), Mode::CLOSED, Axis::One, &b);
        assert!((u.value() + 0.05).abs() < 1e-12);
        let u = signed_distance(&State::new(5.05, 2.0, 1.0), Mode::CLOSED, Axis::One, &b);
        assert!((u.value() - 0.05).abs() < 1e-12);
        let u = signed_distance(&State::new(5.0, 2.0, 1.0), Mode::CLOSED, Axis::One, &b);
        assert_eq!(u.value(), 0.0);
        // Open valve: the lower facet is active.
        let u = signed_distance(&State::new(-0.02, 2.0, 1.0), Mode::OPEN, Axis::One, &b);
        assert!((u.value() - 0.02).abs() < 1e-12);
    }

    #[test]
    fn clock_fires_on_sentinel() {
        let mut rng = RandomSource::new(1, 0).rng();
        let mut clock = SwitchClock::draw(Facet::new(Axis::One, Side::Upper), 0.1, -0.5, &mut rng);
        assert!(!clock.armed);
        assert!(!clock.advance(-0.3, 0.1));
        assert_eq!(clock.accumulated, 0.0);
        assert!(clock.advance(0.1, 0.1));
    }

    #[test]
    fn clock_accumulates_trapezoid() {
        let mut rng = RandomSource::new(2, 0).rng();
        let eps = 0.1;
        let mut clock = SwitchClock::draw(Facet::new(Axis::One, Side::Upper), eps, -0.2, &mut rng);
        clock.target = 100.0;
        // Entering: only [-eps, -0.05] counts, hazards 5 and 1/0.15.
        clock.advance(-0.05, 0.1);
        let first = 0.5 * (5.0 + 1.0 / 0.15) * 0.05;
        assert!((clock.accumulated - first).abs() < 1e-12);
        // Moving back inward accumulates the same way.
        clock.advance(-0.07, 0.1);
        let second = 0.5 * (1.0 / 0.17 + 1.0 / 0.15) * 0.02;
        assert!((clock.accumulated - first - second).abs() < 1e-12);
        // Close to eps the hazard is capped at 1/(dt * 1e-3).
        clock.advance(eps - 1e-12, 0.1);
        let third = 0.5 * (1.0 / 0.17 + 1e4) * (eps - 1e-12 + 0.07);
        assert!((clock.accumulated - first - second - third).abs() < 1e-9);
    }

    #[test]
    fn random_source_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map({
            let mut r = RandomSource::new(7, 3).rng();
            move |_| r.random()
        }).collect();
        let b: Vec<u64> = (0..4).map({
            let mut r = RandomSource::new(7, 3).rng();
            move |_| r.random()
        }).collect();
        let c: Vec<u64> = (0..4).map({
            let mut r = RandomSource::new(7, 4).rng();
            move |_| r.random()
        }).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_wide_neighborhood() {
        let exec = StochasticExecutor::new(NoiseModel { epsilon: 2.5 });
        assert!(exec.validate().is_err());
        assert!(NoiseModel::new(0.0).is_err());
        let exec = StochasticExecutor::new(NoiseModel { epsilon: 0.1 }).with_dt(0.0);
        assert!(exec.validate().is_err());
    }

    #[test]
    fn coarse_step_is_diagnosed() {
        let exec = StochasticExecutor::new(NoiseModel::new(0.01).unwrap()).with_dt(200.0);
        let err = exec
            .run(State::new(4.0, 1.0, 5.0), Mode::CLOSED, 1000.0, RandomSource::new(0, 0))
            .unwrap_err();
        assert!(
            matches!(err, SimError::StepTooCoarse { .. } | SimError::NonFinite { .. }),
            "{err}"
        );
    }

    #[test]
    fn each_event_flips_one_flag_and_fires_near_facet() {
        let eps = 0.1;
        let exec = StochasticExecutor::new(NoiseModel::new(eps).unwrap());
        let traj = exec
            .run(State::new(2.5, 2.5, 5.0), Mode::CLOSED, 2e4, RandomSource::new(11, 0))
            .unwrap();
        assert!(traj.events.len() > 100);
        for ev in &traj.events {
            let changed = Axis::BOTH
                .iter()
                .filter(|&&a| ev.from.is_open(a) != ev.to.is_open(a))
                .count();
            assert_eq!(changed, 1);
            let u = ev.u_at_fire.unwrap();
            // Lower-facet approach runs at up to ~0.9 °C/s, so two steps of
            // travel stay below 0.2 °C.
            assert!(u >= -eps && u < eps + 0.2, "u = {u}");
        }
        traj.check_structure(&exec.bounds).unwrap();
    }
}
