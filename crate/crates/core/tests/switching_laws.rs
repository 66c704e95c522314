mod common;

use common::*;
use hysim_core::dynamics::{Axis, Mode};
use hysim_core::stochastic::RandomSource;

#[test]
fn perpendicular_firing_distance_is_uniform() {
    let eps = 0.1;
    let u = perpendicular_firings(2000, eps, 0.01, 11);
    let d = ks_uniform(&u, -eps, eps);
    assert!(d < ks_critical_one(u.len()), "D = {d}");
}

#[test]
fn firing_distance_is_uniform_for_small_eps() {
    let eps = 0.02;
    let u = perpendicular_firings(2000, eps, 0.01, 12);
    let d = ks_uniform(&u, -eps, eps);
    assert!(d < ks_critical_one(u.len()), "D = {d}");
}

#[test]
fn ks_statistics_detect_a_shift() {
    let a: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
    let b: Vec<f64> = a.iter().map(|x| x + 0.2).collect();
    assert!(ks_uniform(&a, 0.0, 1.0) < 0.002);
    assert!(ks_uniform(&b, 0.0, 1.0) > 0.19);
    assert!((ks_two_sample(&a, &b) - 0.2).abs() < 0.002);
    assert_eq!(ks_two_sample(&a, &a), 0.0);
}

#[test]
fn independent_clocks_match_summed_intensity_at_a_corner() {
    let (eps, dt, n) = (0.1, 0.01, 2000);
    let mut clocks = Vec::with_capacity(n);
    let mut clock_axis_one = 0usize;
    for j in 0..n as u64 {
        let (t, axis, _) =
            clocks_first_switch(CORNER_START, Mode::CLOSED, eps, dt, 500.0, RandomSource::new(21, j)).unwrap();
        clocks.push(t);
        clock_axis_one += (axis == Axis::One) as usize;
    }
    let mut rng = RandomSource::new(22, 0).rng();
    let mut summed = Vec::with_capacity(n);
    let mut summed_axis_one = 0usize;
    for _ in 0..n {
        let (t, axis) =
            summed_intensity_first_switch(CORNER_START, Mode::CLOSED, eps, dt, 500.0, &mut rng).unwrap();
        summed.push(t);
        summed_axis_one += (axis == Axis::One) as usize;
    }
    let d = ks_two_sample(&clocks, &summed);
    assert!(d < ks_critical_two(n, n), "D = {d}");
    // Winner frequencies agree within four binomial standard errors.
    let (p1, p2) = (clock_axis_one as f64 / n as f64, summed_axis_one as f64 / n as f64);
    let se = (p1 * (1.0 - p1) / n as f64 + p2 * (1.0 - p2) / n as f64).sqrt();
    assert!((p1 - p2).abs() < 4.0 * se.max(1e-3), "{p1} vs {p2}");
    assert!(p1 > 0.05 && p1 < 0.95, "corner scenario should make both axes win: {p1}");
}
