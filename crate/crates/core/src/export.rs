//! Text formats for trajectories, intensity grids and prevalence tables.
//!
//! Trajectory CSV has one row per emitted sample. A reset shows up as a second
//! row with the same `t` and changed `delta` columns. Floats are written with
//! 17 significant digits, so a file read back gives the same `f64` values.

use std::io::{self, BufRead, Write};

use crate::dynamics::{Axis, Mode, State};
use crate::hybrid::{guard_facet, ControlBox, Sample, SampleKind, SampleSink};
use crate::intensity::{IntensityGrid, SweepRow};

pub const TRAJECTORY_HEADER: &str = "t,interval,T1,T2,P,delta1,delta2";
pub const STOCHASTIC_HEADER: &str = "t,interval,T1,T2,P,delta1,delta2,fired_axis,u_at_fire";
pub const SWEEP_HEADER: &str = "eps,mean_prevalence,stderr,n_traj,horizon,seed";

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Streams samples to trajectory CSV.
///
/// With a [`ControlBox`] the writer adds the stochastic annotation columns:
/// on the row that enters a new interval it records the axis that switched
/// and the signed distance to the facet that was left.
pub struct TrajectoryCsv<W: Write> {
    out: W,
    bounds: Option<ControlBox>,
    prev: Option<(usize, Mode)>,
    error: Option<io::Error>,
}

impl<W: Write> TrajectoryCsv<W> {
    pub fn deterministic(out: W) -> io::Result<Self> {
        Self::start(out, None)
    }

    pub fn stochastic(out: W, bounds: ControlBox) -> io::Result<Self> {
        Self::start(out, Some(bounds))
    }

    fn start(mut out: W, bounds: Option<ControlBox>) -> io::Result<Self> {
        let header = if bounds.is_some() {
            STOCHASTIC_HEADER
        } else {
            TRAJECTORY_HEADER
        };
        writeln!(out, "{header}")?;
        Ok(TrajectoryCsv {
            out,
            bounds,
            prev: None,
            error: None,
        })
    }

    fn write_row(&mut self, s: &Sample) -> io::Result<()> {
        write!(
            self.out,
            "{},{},{},{},{},{},{}",
            fmt_f64(s.t),
            s.interval,
            fmt_f64(s.state.t1),
            fmt_f64(s.state.t2),
            fmt_f64(s.state.p),
            s.mode.delta(Axis::One),
            s.mode.delta(Axis::Two)
        )?;
        if let Some(bounds) = self.bounds {
            match self.prev {
                Some((interval, from)) if s.interval > interval => {
                    let axis = if from.is_open(Axis::One) != s.mode.is_open(Axis::One) {
                        Axis::One
                    } else {
                        Axis::Two
                    };
                    let u = guard_facet(from, axis).signed_distance(&s.state, &bounds);
                    write!(self.out, ",{},{}", axis.number(), fmt_f64(u))?;
                }
                _ => write!(self.out, ",,")?,
            }
        }
        writeln!(self.out)
    }

    /// Flushes and returns the writer, or the first write error.
    pub fn finish(mut self) -> io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> SampleSink for TrajectoryCsv<W> {
    fn sample(&mut self, s: &Sample) {
        if self.error.is_some() {
            return;
        }
        if let Err(e) = self.write_row(s) {
            self.error = Some(e);
        }
        self.prev = Some((s.interval, s.mode));
    }
}

fn bad_data(line: usize, msg: impl std::fmt::Display) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, format!("line {line}: {msg}"))
}

/// Replays a trajectory CSV written with sample step `dt` into `sink`.
///
/// A row counts as a grid sample when its time differs from the previous row
/// and is an exact multiple of `dt`; every other row is a boundary sample.
/// Returns the number of rows read.
pub fn read_trajectory_csv<R: BufRead, S: SampleSink>(
    input: R,
    dt: f64,
    mut sink: S,
) -> io::Result<usize> {
    let mut lines = input.lines();
    match lines.next() {
        Some(header) => {
            let header = header?;
            if !header.starts_with(TRAJECTORY_HEADER) {
                return Err(bad_data(1, format!("unexpected header `{header}`")));
            }
        }
        None => return Err(bad_data(1, "empty file")),
    }
    let mut prev_t = f64::NAN;
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 7 {
            return Err(bad_data(lineno, "expected at least 7 columns"));
        }
        let num = |k: usize| -> io::Result<f64> {
            cols[k]
                .parse::<f64>()
                .map_err(|e| bad_data(lineno, format!("column {}: {e}", k + 1)))
        };
        let int = |k: usize| -> io::Result<u64> {
            cols[k]
                .parse::<u64>()
                .map_err(|e| bad_data(lineno, format!("column {}: {e}", k + 1)))
        };
        let t = num(0)?;
        let interval = int(1)? as usize;
        let state = State::new(num(2)?, num(3)?, num(4)?);
        let mode = Mode::new(int(5)? as u8, int(6)? as u8).map_err(|e| bad_data(lineno, e))?;
        let on_grid = (t / dt).round() * dt == t;
        let kind = if t != prev_t && on_grid {
            SampleKind::Grid
        } else {
            SampleKind::Boundary
        };
        sink.sample(&Sample {
            t,
            interval,
            state,
            mode,
            kind,
        });
        prev_t = t;
        rows += 1;
    }
    Ok(rows)
}

/// Grid counts as a CSV matrix: the header row holds the first-axis bin
/// centers, each following row starts with its second-axis center, rows run
/// from the largest second-axis value down.
pub fn write_grid_csv<W: Write>(mut out: W, grid: &IntensityGrid) -> io::Result<()> {
    let (xn, yn) = grid.spec.plane.axis_names();
    write!(out, "{yn}\\{xn}")?;
    for ix in 0..grid.nx {
        write!(out, ",{}", grid.x_center(ix))?;
    }
    writeln!(out)?;
    for iy in (0..grid.ny).rev() {
        write!(out, "{}", grid.y_center(iy))?;
        for ix in 0..grid.nx {
            write!(out, ",{}", grid.count(ix, iy))?;
        }
        writeln!(out)?;
    }
    out.flush()
}

/// Plain (P2) PGM, counts scaled linearly so the fullest bin is 255.
pub fn write_grid_pgm<W: Write>(mut out: W, grid: &IntensityGrid) -> io::Result<()> {
    let max = grid.max_count();
    writeln!(out, "P2")?;
    writeln!(out, "# max_count {max}")?;
    writeln!(out, "{} {}", grid.nx, grid.ny)?;
    writeln!(out, "255")?;
    for iy in (0..grid.ny).rev() {
        let row: Vec<String> = (0..grid.nx)
            .map(|ix| {
                let c = grid.count(ix, iy);
                let v = if max == 0 {
                    0
                } else {
                    ((c as f64 * 255.0 / max as f64).round() as u64).min(255)
                };
                v.to_string()
            })
            .collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    out.flush()
}

pub fn write_sweep_csv<W: Write>(mut out: W, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.eps,
            fmt_f64(r.mean_prevalence),
            fmt_f64(r.stderr),
            r.n_traj,
            r.horizon,
            r.seed
        )?;
    }
    out.flush()
}
