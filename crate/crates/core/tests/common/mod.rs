//! Reference implementations and statistics shared by the integration and
//! acceptance tests. Nothing here calls into the switching code under test.

#![allow(dead_code)]

use hysim_core::dynamics::{rk4_step, Axis, Mode, ReducedCoefficients, State};
use hysim_core::hybrid::{ControlBox, HybridTrajectory, Side};
use hysim_core::stochastic::{NoiseModel, RandomSource, StochasticExecutor};
use rand::Rng;

/// Asymptotic Kolmogorov critical value at the 5% level.
pub const KS_CRITICAL_05: f64 = 1.358;

/// Kolmogorov distance between `samples` and the uniform law on `[lo, hi]`.
pub fn ks_uniform(samples: &[f64], lo: f64, hi: f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

pub fn ks_critical_one(n: usize) -> f64 {
    KS_CRITICAL_05 / (n as f64).sqrt()
}

pub fn ks_critical_two(n: usize, m: usize) -> f64 {
    KS_CRITICAL_05 * ((n + m) as f64 / (n * m) as f64).sqrt()
}

/// Signed distance of `x` to the facet mode `m` guards on `axis`.
fn distance(x: &State, m: Mode, axis: Axis, bounds: &ControlBox) -> f64 {
    let t = x.temperature(axis);
    let [lo, hi] = bounds.bounds(axis);
    if m.is_open(axis) {
        lo - t
    } else {
        t - hi
    }
}

/// Hazard of the uniform law on `[-eps, eps]`.
fn uniform_hazard(u: f64, eps: f64) -> f64 {
    if u < -eps {
        0.0
    } else if u >= eps {
        f64::INFINITY
    } else {
        1.0 / (eps - u)
    }
}

/// `∫ h(u) |du|` between two signed distances, in closed form.
fn integrated_hazard(u0: f64, u1: f64, eps: f64) -> f64 {
    let (lo, hi) = (u0.min(u1).max(-eps), u0.max(u1));
    if hi < -eps {
        return 0.0;
    }
    if hi >= eps {
        return f64::INFINITY;
    }
    ((eps - lo) / (eps - hi)).ln()
}

/// First switch of the summed-intensity construction: one Exp(1) threshold
/// against the integral of `h1 + h2`, then the axis is picked with
/// probability `h_i / (h1 + h2)` at the switching sample.
pub fn summed_intensity_first_switch<R: Rng>(
    x0: State,
    m0: Mode,
    eps: f64,
    dt: f64,
    horizon: f64,
    rng: &mut R,
) -> Option<(f64, Axis)> {
    let k = ReducedCoefficients::CANONICAL;
    let b = ControlBox::CANONICAL;
    let dist = |x: &State| [distance(x, m0, Axis::One, &b), distance(x, m0, Axis::Two, &b)];
    let threshold = -(1.0 - rng.random::<f64>()).ln();
    let mut x = x0;
    let mut u_prev = dist(&x);
    let mut acc = 0.0;
    let mut step = 0u64;
    loop {
        step += 1;
        let t = step as f64 * dt;
        if t > horizon {
            return None;
        }
        x = rk4_step(&x, m0, &k, dt);
        let u = dist(&x);
        acc += integrated_hazard(u_prev[0], u[0], eps) + integrated_hazard(u_prev[1], u[1], eps);
        if acc >= threshold {
            let h = u.map(|u| uniform_hazard(u, eps));
            let sum = h[0] + h[1];
            let p_one = match (h[0].is_infinite(), h[1].is_infinite()) {
                (true, true) => 0.5,
                (true, false) => 1.0,
                (false, true) => 0.0,
                _ => h[0] / sum,
            };
            let axis = if rng.random::<f64>() < p_one {
                Axis::One
            } else {
                Axis::Two
            };
            return Some((t, axis));
        }
        u_prev = u;
    }
}

/// First switch of the independent-clocks executor.
pub fn clocks_first_switch(
    x0: State,
    m0: Mode,
    eps: f64,
    dt: f64,
    horizon: f64,
    source: RandomSource,
) -> Option<(f64, Axis, f64)> {
    let traj = StochasticExecutor::new(NoiseModel::new(eps).unwrap())
        .with_dt(dt)
        .with_max_events(1)
        .run(x0, m0, horizon, source)
        .unwrap();
    traj.events
        .first()
        .map(|e| (e.t, e.facet.axis, e.u_at_fire.unwrap()))
}

/// Only case 1 approaches its upper facet; case 2 stays far inside.
pub const PERPENDICULAR_START: State = State::new(4.8, 1.0, 5.0);
/// Both cases approach their upper facets together.
pub const CORNER_START: State = State::new(4.85, 4.8, 5.0);

/// Signed distances at which case 1 fires when crossing its upper facet alone.
pub fn perpendicular_firings(n: usize, eps: f64, dt: f64, seed: u64) -> Vec<f64> {
    (0..n as u64)
        .map(|j| {
            let (_, axis, u) =
                clocks_first_switch(PERPENDICULAR_START, Mode::CLOSED, eps, dt, 500.0, RandomSource::new(seed, j))
                    .expect("fires before the horizon");
            assert_eq!(axis, Axis::One);
            u
        })
        .collect()
}

/// Structural checks on a trajectory: interval tiling, event placement and
/// hysteresis alternation. Returns the first violation found.
pub fn structural_violation(traj: &HybridTrajectory, bounds: &ControlBox, facet_tol: Option<f64>) -> Option<String> {
    let seq = traj.domain.switching_sequence();
    if seq.first() != Some(&0.0) {
        return Some(format!("domain starts at {:?}", seq.first()));
    }
    if seq.windows(2).any(|w| w[0] > w[1]) {
        return Some("switching times decrease".into());
    }
    if traj.domain.interval_count() != traj.events.len() + 1 || traj.modes.len() != traj.events.len() + 1 {
        return Some("interval, mode and event counts disagree".into());
    }
    for (i, e) in traj.events.iter().enumerate() {
        if e.t != seq[i + 1] || e.interval != i + 1 {
            return Some(format!("event {i} does not close interval {}", i + 1));
        }
        if e.from != traj.modes[i] || e.to != traj.modes[i + 1] {
            return Some(format!("event {i} modes disagree with the mode sequence"));
        }
        if e.from.is_open(e.facet.axis) == e.to.is_open(e.facet.axis)
            || e.from.is_open(e.facet.axis.other()) != e.to.is_open(e.facet.axis.other())
        {
            return Some(format!("event {i} does not flip exactly its own valve"));
        }
        if let Some(tol) = facet_tol {
            let level = bounds.bounds(e.facet.axis)[e.facet.side as usize];
            if (e.state.temperature(e.facet.axis) - level).abs() > tol {
                return Some(format!("event {i} is off its facet"));
            }
        }
    }
    for s in &traj.samples {
        match traj.domain.interval(s.interval) {
            Some((a, b)) if a <= s.t && s.t <= b => {}
            _ => return Some(format!("sample at t={} outside interval {}", s.t, s.interval)),
        }
        if traj.modes[s.interval - 1] != s.mode {
            return Some(format!("sample at t={} carries the wrong mode", s.t));
        }
    }
    for axis in Axis::BOTH {
        let sides: Vec<Side> = traj
            .events
            .iter()
            .filter(|e| e.facet.axis == axis)
            .map(|e| e.facet.side)
            .collect();
        if sides.windows(2).any(|w| w[0] == w[1]) {
            return Some(format!("facet sides do not alternate on axis {}", axis.number()));
        }
    }
    None
}
