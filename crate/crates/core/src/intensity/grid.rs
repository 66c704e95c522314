use serde::{Deserialize, Serialize};

use crate::dynamics::State;
use crate::error::{invalid, Result, SimError};
use crate::hybrid::{HybridTrajectory, Sample, SampleKind, SampleSink};

/// Projection plane of an intensity grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    /// `(T1, T2)`
    T1T2,
    /// `(T1, P)`
    T1P,
}

impl Plane {
    pub fn project(self, x: &State) -> (f64, f64) {
        match self {
            Plane::T1T2 => (x.t1, x.t2),
            Plane::T1P => (x.t1, x.p),
        }
    }

    pub fn axis_names(self) -> (&'static str, &'static str) {
        match self {
            Plane::T1T2 => ("T1", "T2"),
            Plane::T1P => ("T1", "P"),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Plane::T1T2 => "t1t2",
            Plane::T1P => "t1p",
        }
    }
}

impl std::str::FromStr for Plane {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t1t2" => Ok(Plane::T1T2),
            "t1p" => Ok(Plane::T1P),
            _ => Err(invalid("plane", format!("expected t1t2 or t1p, got {s}"))),
        }
    }
}

/// Rectangle and bin widths of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub plane: Plane,
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub bin_width: [f64; 2],
}

impl GridSpec {
    /// Default window: the deadband plus a margin for ε-overshoot, pressure up to 20 bar.
    pub fn default_for(plane: Plane) -> Self {
        let t = [-0.25, 5.25];
        match plane {
            Plane::T1T2 => GridSpec {
                plane,
                x_range: t,
                y_range: t,
                bin_width: [0.05, 0.05],
            },
            Plane::T1P => GridSpec {
                plane,
                x_range: t,
                y_range: [0.0, 20.0],
                bin_width: [0.05, 0.05],
            },
        }
    }

    pub fn with_bin_width(mut self, w: f64) -> Self {
        self.bin_width = [w, w];
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (field, [lo, hi]) in [("x_range", self.x_range), ("y_range", self.y_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(invalid(field, format!("need finite lo < hi, got [{lo}, {hi}]")));
            }
        }
        for w in self.bin_width {
            if !(w.is_finite() && w > 0.0) {
                return Err(invalid("bin_width", format!("must be finite and > 0, got {w}")));
            }
        }
        Ok(())
    }

    fn bins(&self) -> (usize, usize) {
        let n = |[lo, hi]: [f64; 2], w: f64| (((hi - lo) / w).ceil() as usize).max(1);
        (n(self.x_range, self.bin_width[0]), n(self.y_range, self.bin_width[1]))
    }
}

/// 2-D histogram of sample points with an overflow counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityGrid {
    pub spec: GridSpec,
    /// Time window `I = [t', t'']` whose samples are counted.
    pub interval: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    /// Row-major by `y` then `x`: `counts[iy * nx + ix]`.
    pub counts: Vec<u64>,
    /// Samples in `I` that fell outside the rectangle.
    pub overflow: u64,
    pub n_traj: u64,
}

impl IntensityGrid {
    pub fn new(spec: GridSpec, interval: [f64; 2]) -> Result<Self> {
        spec.validate()?;
        if interval[0].partial_cmp(&interval[1]).is_none_or(|o| o.is_gt()) {
            return Err(invalid("interval", format!("need t' <= t'', got {interval:?}")));
        }
        let (nx, ny) = spec.bins();
        Ok(IntensityGrid {
            spec,
            interval,
            nx,
            ny,
            counts: vec![0; nx * ny],
            overflow: 0,
            n_traj: 0,
        })
    }

    fn bin_of(&self, v: f64, range: [f64; 2], w: f64, n: usize) -> Option<usize> {
        if !(v >= range[0] && v <= range[1]) {
            return None;
        }
        Some((((v - range[0]) / w).floor() as usize).min(n - 1))
    }

    /// Counts one regular sample if its time lies in the window.
    pub fn add(&mut self, s: &Sample) {
        if s.kind != SampleKind::Grid || s.t < self.interval[0] || s.t > self.interval[1] {
            return;
        }
        self.add_point(&s.state);
    }

    fn add_point(&mut self, x: &State) {
        let (px, py) = self.spec.plane.project(x);
        let ix = self.bin_of(px, self.spec.x_range, self.spec.bin_width[0], self.nx);
        let iy = self.bin_of(py, self.spec.y_range, self.spec.bin_width[1], self.ny);
        match (ix, iy) {
            (Some(ix), Some(iy)) => self.counts[iy * self.nx + ix] += 1,
            _ => self.overflow += 1,
        }
    }

    /// Marks the end of one trajectory's contribution.
    pub fn finish_trajectory(&mut self) {
        self.n_traj += 1;
    }

    pub fn count(&self, ix: usize, iy: usize) -> u64 {
        self.counts[iy * self.nx + ix]
    }

    /// Mean per-trajectory count in bin `(ix, iy)`.
    pub fn estimate(&self, ix: usize, iy: usize) -> f64 {
        if self.n_traj == 0 {
            0.0
        } else {
            self.count(ix, iy) as f64 / self.n_traj as f64
        }
    }

    pub fn total_in_bounds(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn max_count(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn x_center(&self, ix: usize) -> f64 {
        self.spec.x_range[0] + (ix as f64 + 0.5) * self.spec.bin_width[0]
    }

    pub fn y_center(&self, iy: usize) -> f64 {
        self.spec.y_range[0] + (iy as f64 + 0.5) * self.spec.bin_width[1]
    }

    /// Adds another grid over the same spec and window. Associative and commutative.
    pub fn merge(&mut self, other: &IntensityGrid) -> Result<()> {
        if self.spec != other.spec || self.interval != other.interval {
            return Err(invalid("grid", "cannot merge grids with different spec or window"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.overflow += other.overflow;
        self.n_traj += other.n_traj;
        Ok(())
    }
}

/// Several grids fed from one sample stream.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSet {
    pub grids: Vec<IntensityGrid>,
}

impl GridSet {
    pub fn new(specs: &[GridSpec], interval: [f64; 2]) -> Result<Self> {
        Ok(GridSet {
            grids: specs
                .iter()
                .map(|s| IntensityGrid::new(*s, interval))
                .collect::<Result<_>>()?,
        })
    }

    pub fn finish_trajectory(&mut self) {
        self.grids.iter_mut().for_each(IntensityGrid::finish_trajectory);
    }

    pub fn merge(&mut self, other: &GridSet) -> Result<()> {
        if self.grids.len() != other.grids.len() {
            return Err(invalid("grid", "grid sets differ in size"));
        }
        for (a, b) in self.grids.iter_mut().zip(&other.grids) {
            a.merge(b)?;
        }
        Ok(())
    }
}

impl SampleSink for IntensityGrid {
    fn sample(&mut self, s: &Sample) {
        self.add(s);
    }
}

impl SampleSink for GridSet {
    fn sample(&mut self, s: &Sample) {
        for g in &mut self.grids {
            g.add(s);
        }
    }
}

/// Builds a grid from recorded trajectories.
pub fn accumulate_intensity(
    trajs: &[HybridTrajectory],
    spec: GridSpec,
    interval: [f64; 2],
) -> Result<IntensityGrid> {
    if trajs.is_empty() {
        return Err(SimError::EmptyEnsemble);
    }
    let mut grid = IntensityGrid::new(spec, interval)?;
    for traj in trajs {
        if interval[0] < traj.start_time() || interval[1] > traj.end_time() {
            return Err(invalid(
                "interval",
                format!(
                    "[{}, {}] is not inside the trajectory domain [{}, {}]",
                    interval[0],
                    interval[1],
                    traj.start_time(),
                    traj.end_time()
                ),
            ));
        }
        for s in &traj.samples {
            grid.add(s);
        }
        grid.finish_trajectory();
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Mode;
    use crate::hybrid::run_deterministic;

    fn sample(t: f64, x: State) -> Sample {
        Sample {
            t,
            interval: 1,
            state: x,
            mode: Mode::CLOSED,
            kind: SampleKind::Grid,
        }
    }

    #[test]
    fn identical_trajectories_average_to_single() {
        let traj = run_deterministic(State::new(1.0, 3.0, 5.0), Mode::CLOSED, 800.0).unwrap();
        let spec = GridSpec::default_for(Plane::T1T2);
        let one = accumulate_intensity(std::slice::from_ref(&traj), spec, [0.0, 800.0]).unwrap();
        let many = accumulate_intensity(&vec![traj; 4], spec, [0.0, 800.0]).unwrap();
        for iy in 0..one.ny {
            for ix in 0..one.nx {
                assert_eq!(one.estimate(ix, iy), many.estimate(ix, iy));
            }
        }
    }

    #[test]
    fn empty_bins_and_empty_window() {
        let traj = run_deterministic(State::new(2.5, 2.5, 5.0), Mode::CLOSED, 500.0).unwrap();
        let spec = GridSpec::default_for(Plane::T1T2);
        let g = accumulate_intensity(std::slice::from_ref(&traj), spec, [0.0, 500.0]).unwrap();
        // Off-diagonal corner bin is never visited.
        assert_eq!(g.estimate(g.nx - 1, 0), 0.0);
        let g = accumulate_intensity(std::slice::from_ref(&traj), spec, [200.02, 200.07]).unwrap();
        assert_eq!(g.total_in_bounds() + g.overflow, 0);
    }

    #[test]
    fn rejects_empty_ensemble_and_bad_window() {
        let spec = GridSpec::default_for(Plane::T1P);
        assert_eq!(
            accumulate_intensity(&[], spec, [0.0, 1.0]).unwrap_err(),
            SimError::EmptyEnsemble
        );
        let traj = run_deterministic(State::new(2.5, 2.5, 5.0), Mode::CLOSED, 100.0).unwrap();
        assert!(accumulate_intensity(&[traj], spec, [0.0, 200.0]).is_err());
        assert!(IntensityGrid::new(spec.with_bin_width(0.0), [0.0, 1.0]).is_err());
    }

    #[test]
    fn overflow_and_edges() {
        let spec = GridSpec {
            plane: Plane::T1T2,
            x_range: [0.0, 1.0],
            y_range: [0.0, 1.0],
            bin_width: [0.5, 0.5],
        };
        let mut g = IntensityGrid::new(spec, [0.0, 10.0]).unwrap();
        g.add(&sample(1.0, State::new(1.0, 1.0, 0.0)));
        g.add(&sample(1.0, State::new(0.0, 0.0, 0.0)));
        g.add(&sample(1.0, State::new(-0.1, 0.5, 0.0)));
        g.add(&sample(11.0, State::new(0.2, 0.2, 0.0)));
        assert_eq!(g.count(1, 1), 1);
        assert_eq!(g.count(0, 0), 1);
        assert_eq!(g.overflow, 1);
        assert_eq!(g.total_in_bounds(), 2);
    }

    #[test]
    fn boundary_samples_are_not_counted() {
        let spec = GridSpec::default_for(Plane::T1T2);
        let mut g = IntensityGrid::new(spec, [0.0, 10.0]).unwrap();
        let mut s = sample(1.0, State::new(1.0, 1.0, 0.0));
        s.kind = SampleKind::Boundary;
        g.add(&s);
        assert_eq!(g.total_in_bounds() + g.overflow, 0);
    }
}
