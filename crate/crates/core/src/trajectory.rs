//! Time-indexed solver output and the per-step observer hook.

use crate::diffusion::DiffusionError;
use crate::grid::{Field, Grid};
use crate::kinetics::KineticsError;
use std::fmt;
use thiserror::Error;

/// A solution state at one time level: a set of named fields on one grid.
pub trait State: Clone + Send + Sync {
    /// Field names in storage order, e.g. `["N", "ps", "ph"]`.
    const FIELD_NAMES: &'static [&'static str];

    fn time(&self) -> f64;
    fn grid(&self) -> &Grid;
    fn fields(&self) -> Vec<&Field>;
    /// Reassembles a state from fields in [`State::FIELD_NAMES`] order.
    fn from_fields(t: f64, fields: Vec<Field>) -> Result<Self, SolverError>;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error(transparent)]
    Diffusion(#[from] DiffusionError),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("time step {dt:e} exceeds the {what} limit {limit:e}")]
    TimeStep { what: &'static str, dt: f64, limit: f64 },
    #[error("blow-up guard: {field} reached {value:e} at cell {index}, t = {t}")]
    BlowUp { field: &'static str, index: usize, value: f64, t: f64 },
    #[error("{field} became negative ({value:e}) at cell {index}, t = {t}")]
    Negative { field: &'static str, index: usize, value: f64, t: f64 },
    #[error("pointwise exchange solve failed: {0}")]
    ExchangeSolve(String),
    #[error("field shapes disagree: {0}")]
    Shape(String),
    #[error("observer failed: {0}")]
    Observer(String),
}

/// Receives every time level of an integration, including the initial state.
pub trait Observer<S> {
    fn observe(&mut self, step: usize, state: &S) -> Result<(), SolverError>;

    /// Called once when the integration ends, successfully or not.
    fn finish(&mut self) -> Result<(), SolverError> {
        Ok(())
    }
}

/// States emitted at the output stride, always including the first and last.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub snapshots: Vec<S>,
    /// Number of time steps taken.
    pub steps: usize,
}

impl<S: State> Trajectory<S> {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(State::time).collect()
    }

    pub fn grid(&self) -> Option<&Grid> {
        self.snapshots.first().map(State::grid)
    }

    pub fn last(&self) -> Option<&S> {
        self.snapshots.last()
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }
}

/// A failed integration together with everything produced before the failure.
#[derive(Debug, Clone)]
pub struct IntegrationError<S> {
    pub error: SolverError,
    pub partial: Trajectory<S>,
}

impl<S> fmt::Display for IntegrationError<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} steps)", self.error, self.partial.steps)
    }
}

impl<S: fmt::Debug> std::error::Error for IntegrationError<S> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Clamps round-off negatives and rejects real ones or runaway values.
pub(crate) fn guard_field(field: &'static str, values: &mut [f64], t: f64) -> Result<(), SolverError> {
    const BLOW_UP: f64 = 1e12;
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let floor = -1e-12 * scale;
    for (index, v) in values.iter_mut().enumerate() {
        if !v.is_finite() || *v > BLOW_UP {
            return Err(SolverError::BlowUp { field, index, value: *v, t });
        }
        if *v < 0.0 {
            if *v >= floor {
                *v = 0.0;
            } else {
                return Err(SolverError::Negative { field, index, value: *v, t });
            }
        }
    }
    Ok(())
}
