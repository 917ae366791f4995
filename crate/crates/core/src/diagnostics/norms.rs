//! Space-time `L^p(Ω × (t0, T))` norms: midpoint rule in space, trapezoid in time.

use super::DiagnosticsError;
use crate::grid::Grid;
use crate::trajectory::{State, Trajectory};

/// Streaming accumulator of `∬ |f|^p` over time levels pushed in increasing order.
#[derive(Debug, Clone)]
pub struct SpaceTimeAccumulator {
    p: f64,
    t0: f64,
    last: Option<(f64, f64)>,
    sum: f64,
    levels: usize,
}

impl SpaceTimeAccumulator {
    pub fn new(p: f64) -> Result<Self, DiagnosticsError> {
        Self::from_time(p, f64::NEG_INFINITY)
    }

    /// Only the part of the time axis after `t0` is integrated.
    pub fn from_time(p: f64, t0: f64) -> Result<Self, DiagnosticsError> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(DiagnosticsError::Exponent(p));
        }
        Ok(Self { p, t0, last: None, sum: 0.0, levels: 0 })
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    /// Adds the time level `t` with cell values `f` on `grid`.
    pub fn push(&mut self, t: f64, grid: &Grid, f: impl IntoIterator<Item = f64>) {
        let g: f64 = f.into_iter().map(|v| v.abs().powf(self.p)).sum::<f64>() * grid.cell_volume();
        self.push_spatial(t, g);
    }

    /// Adds a precomputed spatial integral `∫ |f(t)|^p`.
    pub fn push_spatial(&mut self, t: f64, g: f64) {
        if let Some((ta, ga)) = self.last {
            if t > self.t0 {
                if ta >= self.t0 {
                    self.sum += 0.5 * (t - ta) * (ga + g);
                } else {
                    let w = (self.t0 - ta) / (t - ta);
                    let g0 = ga + w * (g - ga);
                    self.sum += 0.5 * (t - self.t0) * (g0 + g);
                }
            }
        }
        self.last = Some((t, g));
        self.levels += 1;
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// `∬ |f|^p`.
    pub fn integral(&self) -> f64 {
        self.sum
    }

    pub fn norm(&self) -> Result<f64, DiagnosticsError> {
        if self.levels < 2 {
            return Err(DiagnosticsError::TooFewLevels { needed: 2, got: self.levels });
        }
        Ok(self.sum.powf(1.0 / self.p))
    }
}

/// `‖f‖_{L^p(Q_T)}` of the field functional `extract` along `traj`.
pub fn lp_norm_spacetime<S: State>(
    traj: &Trajectory<S>,
    extract: impl Fn(&S) -> Vec<f64>,
    p: f64,
) -> Result<f64, DiagnosticsError> {
    lp_norm_spacetime_from(traj, extract, p, f64::NEG_INFINITY)
}

/// As [`lp_norm_spacetime`], excluding times before `t0`.
pub fn lp_norm_spacetime_from<S: State>(
    traj: &Trajectory<S>,
    extract: impl Fn(&S) -> Vec<f64>,
    p: f64,
    t0: f64,
) -> Result<f64, DiagnosticsError> {
    if traj.is_empty() {
        return Err(DiagnosticsError::EmptyTrajectory);
    }
    let mut acc = SpaceTimeAccumulator::from_time(p, t0)?;
    for s in &traj.snapshots {
        let v = extract(s);
        if v.len() != s.grid().len() {
            return Err(DiagnosticsError::Mismatch(format!(
                "functional returned {} values on a grid of {} cells",
                v.len(),
                s.grid().len()
            )));
        }
        acc.push(s.time(), s.grid(), v);
    }
    acc.norm()
}
