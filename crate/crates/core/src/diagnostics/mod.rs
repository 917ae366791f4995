//! Norms, energies, residuals and rate fits computed from solver output.

pub mod energy;
pub mod monitor;
pub mod norms;
pub mod quadrature;
pub mod rates;
pub mod weak;

pub use energy::{beta_schedule, dissipation, energy, energy_report, EnergyReport};
pub use monitor::{extremum_and_mass_monitor, DiagnosticRow, FastMonitor, FastSummary, LimitMonitor, LimitSummary, MonitorRecord};
pub use norms::{lp_norm_spacetime, lp_norm_spacetime_from, SpaceTimeAccumulator};
pub use rates::{fit_rate, RateReport};
pub use weak::{weak_residual, weak_residual_with, TimeTest, WeakResidual};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("need at least {needed} samples, got {got}")]
    TooFewLevels { needed: usize, got: usize },
    #[error("norm exponent must be finite and at least 1, got {0}")]
    Exponent(f64),
    #[error("{0}")]
    Input(String),
    #[error("mismatched inputs: {0}")]
    Mismatch(String),
    #[error("trajectory too coarse in time: {0}")]
    TooCoarse(String),
}
