//! Fast-reaction predator-prey systems with handling/searching predators and
//! their cross-diffusion limit: solvers, diagnostics and convergence sweeps.

pub mod diagnostics;
pub mod diffusion;
pub mod fast;
pub mod grid;
pub mod initial;
pub mod io;
pub mod kinetics;
pub mod limit;
pub mod solver;
pub mod sweep;
pub mod trajectory;

pub use diffusion::{diffusion_step, DiffusionError, DiffusionScheme};
pub use fast::{exchange_flow, fast_reaction_pointwise_solve, integrate_fast, step_fast, FastState};
pub use grid::{Field, Grid, GridError};
pub use initial::{InitialData, PredatorInit, Profile, Term};
pub use kinetics::{Parameters, PointState};
pub use limit::{integrate_limit, limit_rhs, step_limit, LimitState};
pub use solver::{Exchange, SolverConfig, Splitting};
pub use trajectory::{IntegrationError, Observer, SolverError, State, Trajectory};
pub use sweep::{compare_to_limit, run_sweep, write_sweep, ExperimentPlan, SweepReport};
