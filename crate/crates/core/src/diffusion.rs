//! Linear diffusion sub-steps `∂_t u = d Δu` with Neumann boundaries.
//!
//! Implicit variants solve one constant-coefficient tridiagonal system per
//! grid line (Thomas elimination). In 2-D the two directions are applied one
//! after the other; the axis operators commute on a tensor grid, so the
//! factorisation introduces no splitting error beyond that of each 1-D factor.
//! Every scheme preserves the discrete mean exactly (up to round-off).

use crate::grid::{Field, Grid};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DiffusionScheme {
    /// Backward Euler.
    Implicit,
    /// Forward Euler, subject to the parabolic CFL bound.
    Explicit,
    /// Trapezoidal rule; second order, positive while `d dt / h^2 <= 1`.
    #[default]
    CrankNicolson,
}

impl DiffusionScheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            DiffusionScheme::Implicit => "implicit",
            DiffusionScheme::Explicit => "explicit",
            DiffusionScheme::CrankNicolson => "crank-nicolson",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffusionError {
    #[error("explicit diffusion unstable: dt = {dt:e} exceeds h^2/(2 dim d) = {limit:e}")]
    Cfl { dt: f64, limit: f64 },
    #[error("Crank-Nicolson step loses positivity: dt = {dt:e} exceeds h^2/d = {limit:e}")]
    CrankNicolsonPositivity { dt: f64, limit: f64 },
    #[error("non-finite value in diffusion input at cell {index}")]
    NonFinite { index: usize },
    #[error("diffusivity must be finite and nonnegative, got {0}")]
    Diffusivity(f64),
}

/// Largest stable/positive sub-step for `scheme` with diffusivity `d`, if bounded.
pub fn step_limit(grid: &Grid, d: f64, scheme: DiffusionScheme) -> Option<f64> {
    if d == 0.0 {
        return None;
    }
    let h = grid.h_min();
    match scheme {
        DiffusionScheme::Implicit => None,
        DiffusionScheme::Explicit => Some(h * h / (2.0 * grid.dim() as f64 * d)),
        DiffusionScheme::CrankNicolson => Some(h * h / d),
    }
}

/// Checks the scheme's step restriction without touching any data.
pub fn check_step(grid: &Grid, d: f64, dt: f64, scheme: DiffusionScheme) -> Result<(), DiffusionError> {
    if !(d.is_finite() && d >= 0.0) {
        return Err(DiffusionError::Diffusivity(d));
    }
    if let Some(limit) = step_limit(grid, d, scheme) {
        // A hair of slack so that a step chosen exactly at the limit passes.
        if dt > limit * (1.0 + 1e-12) {
            return Err(match scheme {
                DiffusionScheme::Explicit => DiffusionError::Cfl { dt, limit },
                _ => DiffusionError::CrankNicolsonPositivity { dt, limit },
            });
        }
    }
    Ok(())
}

/// One diffusion step of length `dt` applied to `f`.
pub fn diffusion_step(f: &Field, d: f64, dt: f64, scheme: DiffusionScheme) -> Result<Field, DiffusionError> {
    let mut out = f.clone();
    diffuse_in_place(f.grid(), out.values_mut(), d, dt, scheme)?;
    Ok(out)
}

/// In-place form of [`diffusion_step`] on raw cell values.
pub fn diffuse_in_place(
    grid: &Grid,
    u: &mut [f64],
    d: f64,
    dt: f64,
    scheme: DiffusionScheme,
) -> Result<(), DiffusionError> {
    if let Some(index) = u.iter().position(|v| !v.is_finite()) {
        return Err(DiffusionError::NonFinite { index });
    }
    check_step(grid, d, dt, scheme)?;
    if d == 0.0 || dt == 0.0 {
        return Ok(());
    }
    match scheme {
        DiffusionScheme::Explicit => {
            let mut lap = vec![0.0; u.len()];
            grid.laplacian(u, &mut lap);
            for (v, l) in u.iter_mut().zip(&lap) {
                *v += dt * d * l;
            }
        }
        DiffusionScheme::Implicit => {
            for axis in 0..grid.dim() {
                sweep_axis(grid, u, axis, dt * d, 0.0);
            }
        }
        DiffusionScheme::CrankNicolson => {
            for axis in 0..grid.dim() {
                sweep_axis(grid, u, axis, 0.5 * dt * d, 0.5 * dt * d);
            }
        }
    }
    Ok(())
}

/// Applies `(I - a A)^{-1} (I + b A)` along every line of `axis`, where `A`
/// is the 1-D Neumann second difference.
fn sweep_axis(grid: &Grid, u: &mut [f64], axis: usize, implicit: f64, explicit: f64) {
    let h = grid.h(axis);
    let r_impl = implicit / (h * h);
    let r_expl = explicit / (h * h);
    let nx = grid.cells()[0];
    let (n, lines, stride) = if axis == 0 {
        (nx, u.len() / nx, 1)
    } else {
        (grid.cells()[1], nx, nx)
    };
    let mut line = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    for l in 0..lines {
        let base = if axis == 0 { l * nx } else { l };
        for k in 0..n {
            line[k] = u[base + k * stride];
        }
        for k in 0..n {
            let left = if k == 0 { line[0] } else { line[k - 1] };
            let right = if k + 1 == n { line[n - 1] } else { line[k + 1] };
            rhs[k] = line[k] + r_expl * (left - 2.0 * line[k] + right);
        }
        solve_neumann_tridiagonal(r_impl, &mut rhs, &mut scratch);
        for k in 0..n {
            u[base + k * stride] = rhs[k];
        }
    }
}

/// Solves `(I - r A) x = b` in place for the 1-D Neumann second difference `A`
/// (diagonal `1 + 2r`, `1 + r` in the two end rows, off-diagonals `-r`).
pub fn solve_neumann_tridiagonal(r: f64, b: &mut [f64], c_prime: &mut [f64]) {
    let n = b.len();
    if r == 0.0 {
        return;
    }
    let diag = |k: usize| if k == 0 || k + 1 == n { 1.0 + r } else { 1.0 + 2.0 * r };
    let off = -r;
    let mut denom = diag(0);
    c_prime[0] = off / denom;
    b[0] /= denom;
    for k in 1..n {
        denom = diag(k) - off * c_prime[k - 1];
        c_prime[k] = off / denom;
        b[k] = (b[k] - off * b[k - 1]) / denom;
    }
    for k in (0..n - 1).rev() {
        b[k] -= c_prime[k] * b[k + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in col + 1..n {
                let f = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
            x[row] = (b[row] - s) / a[row][row];
        }
        x
    }

    #[test]
    fn constant_and_zero_diffusivity_are_inert() {
        let g = Grid::new_2d([1.0, 1.0], [8, 8]).unwrap();
        let c = Field::constant(g, 2.5);
        for s in [DiffusionScheme::Implicit, DiffusionScheme::CrankNicolson] {
            let out = diffusion_step(&c, 0.7, 0.01, s).unwrap();
            assert!(out.values().iter().all(|v| (v - 2.5).abs() < 1e-14));
        }
        let f = Field::from_fn(g, |x| x[0] * x[1]);
        assert_eq!(diffusion_step(&f, 0.0, 0.1, DiffusionScheme::Implicit).unwrap(), f);
    }

    #[test]
    fn implicit_cosine_mode_matches_eigenvalue_and_dense_solve() {
        let l = 1.0;
        let n = 32;
        let g = Grid::new_1d(l, n).unwrap();
        let h = g.h(0);
        let (d, dt) = (0.3, 0.01);
        let u = Field::from_fn(g, |x| (PI * x[0] / l).cos());
        let out = diffusion_step(&u, d, dt, DiffusionScheme::Implicit).unwrap();
        let lam = 2.0 / (h * h) * (1.0 - (PI * h / l).cos());
        let factor = 1.0 / (1.0 + dt * d * lam);
        // Dense oracle for (I - dt d A) x = u.
        let r = dt * d / (h * h);
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = 1.0 + 2.0 * r;
            if i > 0 {
                a[i][i - 1] = -r;
            }
            if i + 1 < n {
                a[i][i + 1] = -r;
            }
        }
        a[0][0] = 1.0 + r;
        a[n - 1][n - 1] = 1.0 + r;
        let dense = dense_solve(a, u.values().to_vec());
        for ((o, x), v) in out.values().iter().zip(&dense).zip(u.values()) {
            assert!((o - factor * v).abs() < 1e-13);
            assert!((o - x).abs() < 1e-13);
        }
    }

    #[test]
    fn crank_nicolson_mode_factor() {
        let g = Grid::new_1d(1.0, 64).unwrap();
        let h = g.h(0);
        let (d, dt) = (0.1, 0.002);
        let u = Field::from_fn(g, |x| (2.0 * PI * x[0]).cos());
        let out = diffusion_step(&u, d, dt, DiffusionScheme::CrankNicolson).unwrap();
        let lam = 2.0 / (h * h) * (1.0 - (2.0 * PI * h).cos());
        let factor = (1.0 - 0.5 * dt * d * lam) / (1.0 + 0.5 * dt * d * lam);
        for (o, v) in out.values().iter().zip(u.values()) {
            assert!((o - factor * v).abs() < 1e-13);
        }
    }

    #[test]
    fn mean_and_positivity_preserved() {
        let g = Grid::new_2d([1.0, 0.5], [16, 8]).unwrap();
        let u = Field::from_fn(g, |x| ((x[0] - 0.3).powi(2) * 40.0 + x[1]).exp().recip());
        let m0 = u.integral();
        for s in [DiffusionScheme::Implicit, DiffusionScheme::CrankNicolson, DiffusionScheme::Explicit] {
            let dt = step_limit(&g, 0.2, s).unwrap_or(1.0) * 0.9;
            let out = diffusion_step(&u, 0.2, dt, s).unwrap();
            assert!((out.integral() - m0).abs() < 1e-13 * m0.max(1.0), "{s:?}");
            assert!(out.min() >= 0.0);
        }
    }

    #[test]
    fn step_restrictions_reported() {
        let g = Grid::new_1d(1.0, 10).unwrap();
        let u = Field::constant(g, 1.0);
        assert!(matches!(
            diffusion_step(&u, 1.0, 0.1, DiffusionScheme::Explicit),
            Err(DiffusionError::Cfl { .. })
        ));
        assert!(matches!(
            diffusion_step(&u, 1.0, 0.1, DiffusionScheme::CrankNicolson),
            Err(DiffusionError::CrankNicolsonPositivity { .. })
        ));
        assert!(diffusion_step(&u, 1.0, 0.1, DiffusionScheme::Implicit).is_ok());
        let mut bad = u.clone();
        bad.values_mut()[3] = f64::NAN;
        assert!(matches!(
            diffusion_step(&bad, 1.0, 0.001, DiffusionScheme::Implicit),
            Err(DiffusionError::NonFinite { index: 3 })
        ));
    }
}
