//! Initial data given as sums of simple expressions in the cell-centre
//! coordinates.

use crate::fast::FastState;
use crate::grid::{Field, Grid};
use crate::kinetics::{phi_unchecked, Parameters};
use crate::limit::LimitState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InitialError {
    #[error("initial {field} is negative ({value:e}) at cell {index}")]
    Negative { field: &'static str, index: usize, value: f64 },
    #[error("initial {field} is not finite at cell {index}")]
    NonFinite { field: &'static str, index: usize },
    #[error("initial {field}: {reason}")]
    Term { field: &'static str, reason: String },
}

/// One additive term of a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Term {
    Constant {
        value: f64,
    },
    /// `amplitude * prod_a cos(mode_a π x_a / L_a)`.
    Cosine {
        amplitude: f64,
        mode: u32,
        #[serde(default)]
        mode_y: u32,
    },
    /// `amplitude * exp(-|x - center|^2 / (2 width^2))`.
    Gaussian {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// Independent uniform values in `[-amplitude, amplitude]` per cell, from the run seed.
    Noise {
        amplitude: f64,
    },
}

/// Sum of [`Term`]s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct Profile(pub Vec<Term>);

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile(vec![Term::Constant { value }])
    }

    pub fn cosine(mean: f64, amplitude: f64, mode: u32) -> Self {
        Profile(vec![
            Term::Constant { value: mean },
            Term::Cosine { amplitude, mode, mode_y: 0 },
        ])
    }

    /// Samples the profile on `grid`. `stream` separates the noise streams of
    /// different fields drawn from the same seed.
    pub fn sample(&self, grid: &Grid, field: &'static str, seed: u64, stream: u64) -> Result<Field, InitialError> {
        let mut values = vec![0.0; grid.len()];
        for term in &self.0 {
            match term {
                Term::Constant { value } => values.iter_mut().for_each(|v| *v += value),
                Term::Cosine { amplitude, mode, mode_y } => {
                    for (k, v) in values.iter_mut().enumerate() {
                        let c = grid.center(k);
                        let mut s = (*mode as f64 * PI * c[0] / grid.extent()[0]).cos();
                        if grid.dim() == 2 {
                            s *= (*mode_y as f64 * PI * c[1] / grid.extent()[1]).cos();
                        }
                        *v += amplitude * s;
                    }
                }
                Term::Gaussian { amplitude, center, width } => {
                    if center.len() != grid.dim() {
                        return Err(InitialError::Term {
                            field,
                            reason: format!("gaussian centre has {} coordinates, grid has {}", center.len(), grid.dim()),
                        });
                    }
                    if !(*width > 0.0) {
                        return Err(InitialError::Term { field, reason: "gaussian width must be positive".into() });
                    }
                    for (k, v) in values.iter_mut().enumerate() {
                        let c = grid.center(k);
                        let r2: f64 = center.iter().enumerate().map(|(a, x0)| (c[a] - x0).powi(2)).sum();
                        *v += amplitude * (-r2 / (2.0 * width * width)).exp();
                    }
                }
                Term::Noise { amplitude } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(stream);
                    for v in values.iter_mut() {
                        *v += amplitude * rng.random_range(-1.0..=1.0);
                    }
                }
            }
        }
        for (index, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(InitialError::NonFinite { field, index });
            }
            if v < 0.0 {
                return Err(InitialError::Negative { field, index, value: v });
            }
        }
        Ok(Field::new(*grid, values).expect("sampled on the grid"))
    }
}

/// How the predator population is initialised.
#[derive(Debug, Clone, PartialEq)]
pub enum PredatorInit {
    /// Total predators `P`, split on the slow manifold (`ph = φ(N, P)`).
    Manifold { total: Profile },
    /// Searching and handling densities given separately.
    Explicit { ps: Profile, ph: Profile },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub prey: Profile,
    pub predators: PredatorInit,
}

impl InitialData {
    pub fn is_on_manifold(&self) -> bool {
        matches!(self.predators, PredatorInit::Manifold { .. })
    }

    pub fn fast_state(&self, grid: &Grid, prm: &Parameters, seed: u64) -> Result<FastState, InitialError> {
        let n = self.prey.sample(grid, "N", seed, 0)?;
        let (ps, ph) = match &self.predators {
            PredatorInit::Manifold { total } => {
                let p = total.sample(grid, "P", seed, 1)?;
                let ph: Vec<f64> = n
                    .values()
                    .iter()
                    .zip(p.values())
                    .map(|(&nv, &pv)| phi_unchecked(nv, pv, prm))
                    .collect();
                let ps: Vec<f64> = p.values().iter().zip(&ph).map(|(pv, hv)| (pv - hv).max(0.0)).collect();
                (Field::new(*grid, ps).unwrap(), Field::new(*grid, ph).unwrap())
            }
            PredatorInit::Explicit { ps, ph } => (ps.sample(grid, "ps", seed, 2)?, ph.sample(grid, "ph", seed, 3)?),
        };
        Ok(FastState { t: 0.0, n, ps, ph })
    }

    /// Limit-system data: `P = ps + ph` of the corresponding fast data.
    pub fn limit_state(&self, grid: &Grid, prm: &Parameters, seed: u64) -> Result<LimitState, InitialError> {
        let fast = self.fast_state(grid, prm, seed)?;
        Ok(LimitState::from_fast(&fast))
    }
}
