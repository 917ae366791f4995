//! Time-stepping configuration and the generic integration loop shared by the
//! fast and limit solvers.

use crate::diffusion::DiffusionScheme;
use crate::trajectory::{IntegrationError, Observer, SolverError, State, Trajectory};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Splitting {
    /// Symmetric (second-order) composition of the sub-steps.
    #[default]
    Strang,
    /// Sequential first-order composition; kept for order studies.
    Lie,
}

impl Splitting {
    pub fn as_str(&self) -> &'static str {
        match self {
            Splitting::Strang => "strang",
            Splitting::Lie => "lie",
        }
    }
}

/// Treatment of the `1/eps` searching/handling exchange within a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Exchange {
    /// One backward-Euler solve per sub-step. First order in `dt`, but for
    /// `dt >> eps` the distance to the slow manifold at step ends keeps its
    /// `O(eps)` size.
    #[default]
    BackwardEuler,
    /// Exact flow of the exchange with `N` frozen. Keeps Strang splitting second
    /// order for resolved `eps`; for `dt >> eps` each step ends almost exactly on
    /// the manifold, so manifold residuals are not resolved there.
    ExactFlow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    /// Final time of the integration.
    pub t_end: f64,
    pub splitting: Splitting,
    pub diffusion: DiffusionScheme,
    pub exchange: Exchange,
    /// Emit a snapshot every this many steps (first and last are always kept).
    pub output_stride: usize,
    /// Upper bound on `∂φ/∂P` used by the cross-diffusion step restriction.
    pub cross_slope_bound: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 2e-4,
            t_end: 1.0,
            splitting: Splitting::Strang,
            diffusion: DiffusionScheme::CrankNicolson,
            exchange: Exchange::BackwardEuler,
            output_stride: 10,
            cross_slope_bound: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SolverError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt * (1.0 - 1e-12)) {
            return Err(SolverError::Config(format!(
                "t_end = {} must be at least dt = {}",
                self.t_end, self.dt
            )));
        }
        if self.output_stride == 0 {
            return Err(SolverError::Config("output_stride must be at least 1".into()));
        }
        if !(self.cross_slope_bound.is_finite() && self.cross_slope_bound > 0.0) {
            return Err(SolverError::Config(format!(
                "cross_slope_bound must be positive, got {}",
                self.cross_slope_bound
            )));
        }
        Ok(())
    }

    /// Same configuration with `dt` halved and the stride doubled, so that
    /// snapshots land on the same times.
    pub fn refined(&self) -> Self {
        Self { dt: 0.5 * self.dt, output_stride: 2 * self.output_stride, ..*self }
    }

    /// Number of steps needed to reach `t_end` from `t0`; the final step may be short.
    pub fn step_count(&self, t0: f64) -> usize {
        let span = self.t_end - t0;
        ((span / self.dt) - 1e-9).ceil().max(1.0) as usize
    }
}

/// Runs `advance` from `init` to `cfg.t_end`, feeding observers and keeping
/// snapshots at the output stride.
pub(crate) fn integrate<S, F>(
    init: S,
    cfg: &SolverConfig,
    observers: &mut [&mut dyn Observer<S>],
    mut advance: F,
) -> Result<Trajectory<S>, IntegrationError<S>>
where
    S: State,
    F: FnMut(&S, f64, f64) -> Result<S, SolverError>,
{
    let t0 = init.time();
    let steps = cfg.step_count(t0);
    let mut traj = Trajectory { snapshots: vec![init.clone()], steps: 0 };
    let fail = |error: SolverError, traj: Trajectory<S>, observers: &mut [&mut dyn Observer<S>]| {
        for o in observers.iter_mut() {
            let _ = o.finish();
        }
        IntegrationError { error, partial: traj }
    };
    for o in observers.iter_mut() {
        if let Err(e) = o.observe(0, &init) {
            return Err(fail(e, traj, observers));
        }
    }
    let mut state = init;
    for k in 1..=steps {
        let t_prev = state.time();
        let t_next = if k == steps { cfg.t_end } else { t0 + k as f64 * cfg.dt };
        let next = match advance(&state, t_next - t_prev, t_next) {
            Ok(s) => s,
            Err(e) => {
                if traj.snapshots.last().map(State::time) != Some(state.time()) {
                    traj.snapshots.push(state);
                }
                return Err(fail(e, traj, observers));
            }
        };
        state = next;
        traj.steps = k;
        for o in observers.iter_mut() {
            if let Err(e) = o.observe(k, &state) {
                traj.snapshots.push(state);
                return Err(fail(e, traj, observers));
            }
        }
        if k % cfg.output_stride == 0 || k == steps {
            traj.snapshots.push(state.clone());
        }
    }
    for o in observers.iter_mut() {
        if let Err(e) = o.finish() {
            return Err(IntegrationError { error: e, partial: traj });
        }
    }
    Ok(traj)
}
