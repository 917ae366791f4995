//! Residuals of the weak formulation of the limit system against
//! Neumann-compatible test functions `ψ(x, t) = cos(kπx/L) θ(t)`.
//!
//! Space derivatives are moved onto `ψ` exactly (`Δψ = -(kπ/L)² ψ`), the
//! time derivative onto `θ`. Space integrals use the midpoint rule, time
//! integrals the trapezoid rule on the stored time levels.

use super::DiagnosticsError;
use crate::kinetics::{phi_unchecked, reaction_limit_unchecked, Parameters};
use crate::limit::LimitState;
use crate::trajectory::{State, Trajectory};
use std::f64::consts::PI;

/// Time factor of the test functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeTest {
    /// `θ ≡ 1`; the end-point terms `∫ u(T)ψ - ∫ u(0)ψ` are kept.
    Constant,
    /// Interior hat functions on `count + 1` equal intervals of the stored time levels.
    Hats { count: usize },
}

impl Default for TimeTest {
    fn default() -> Self {
        TimeTest::Hats { count: 9 }
    }
}

/// Largest normalized residual of each equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakResidual {
    pub n: f64,
    pub p: f64,
}

impl WeakResidual {
    pub fn max(&self) -> f64 {
        self.n.max(self.p)
    }
}

/// Weak residual over cosine modes `k = 0..=n_modes` and interior time hats.
pub fn weak_residual(traj: &Trajectory<LimitState>, prm: &Parameters, n_modes: usize) -> Result<WeakResidual, DiagnosticsError> {
    weak_residual_with(traj, prm, n_modes, TimeTest::default())
}

struct Projections {
    n: Vec<f64>,
    p: Vec<f64>,
    phi: Vec<f64>,
    fn_: Vec<f64>,
    fp: Vec<f64>,
}

fn project(traj: &Trajectory<LimitState>, prm: &Parameters, k: usize) -> (Projections, f64) {
    let grid = traj.snapshots[0].grid();
    let l = grid.extent()[0];
    let h = grid.cell_volume();
    let c: Vec<f64> = (0..grid.len()).map(|i| (k as f64 * PI * grid.center(i)[0] / l).cos()).collect();
    let c_norm = (c.iter().map(|v| v * v).sum::<f64>() * h).sqrt();
    let mut pr = Projections { n: vec![], p: vec![], phi: vec![], fn_: vec![], fp: vec![] };
    for s in &traj.snapshots {
        let (mut a, mut b, mut w, mut fa, mut fb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (i, ci) in c.iter().enumerate() {
            let (nv, pv) = (s.n.values()[i], s.p.values()[i]);
            let (rn, rp) = reaction_limit_unchecked(nv, pv, prm);
            a += nv * ci;
            b += pv * ci;
            w += phi_unchecked(nv, pv, prm) * ci;
            fa += rn * ci;
            fb += rp * ci;
        }
        pr.n.push(a * h);
        pr.p.push(b * h);
        pr.phi.push(w * h);
        pr.fn_.push(fa * h);
        pr.fp.push(fb * h);
    }
    (pr, c_norm)
}

/// `∫ u θ'` and `∫ g θ` by the trapezoid rule for a hat with nodes
/// `lo < mid < hi` (indices into the time levels).
fn hat_integrals(t: &[f64], u: &[f64], g: &[f64], lo: usize, mid: usize, hi: usize) -> (f64, f64) {
    let theta = |m: usize| -> f64 {
        if m <= mid {
            (t[m] - t[lo]) / (t[mid] - t[lo])
        } else {
            (t[hi] - t[m]) / (t[hi] - t[mid])
        }
    };
    let mut u_dtheta = 0.0;
    let mut g_theta = 0.0;
    for m in lo..hi {
        let dt = t[m + 1] - t[m];
        let slope = if m < mid { 1.0 / (t[mid] - t[lo]) } else { -1.0 / (t[hi] - t[mid]) };
        u_dtheta += 0.5 * dt * (u[m] + u[m + 1]) * slope;
        g_theta += 0.5 * dt * (g[m] * theta(m) + g[m + 1] * theta(m + 1));
    }
    (u_dtheta, g_theta)
}

pub fn weak_residual_with(
    traj: &Trajectory<LimitState>,
    prm: &Parameters,
    n_modes: usize,
    time: TimeTest,
) -> Result<WeakResidual, DiagnosticsError> {
    let Some(first) = traj.snapshots.first() else {
        return Err(DiagnosticsError::EmptyTrajectory);
    };
    if first.grid().dim() != 1 {
        return Err(DiagnosticsError::Input("weak residual is implemented for 1-D grids".into()));
    }
    let levels = traj.len();
    if levels < 2 {
        return Err(DiagnosticsError::TooFewLevels { needed: 2, got: levels });
    }
    let nodes: Vec<usize> = match time {
        TimeTest::Constant => vec![],
        TimeTest::Hats { count } => {
            let intervals = count + 1;
            if count == 0 || levels - 1 < 2 * intervals {
                return Err(DiagnosticsError::TooCoarse(format!(
                    "{levels} time levels cannot resolve {count} hat functions"
                )));
            }
            (0..=intervals).map(|j| (j * (levels - 1) + intervals / 2) / intervals).collect()
        }
    };
    let t = traj.times();
    let l = first.grid().extent()[0];
    let mut worst = WeakResidual { n: 0.0, p: 0.0 };
    for k in 0..=n_modes {
        let kappa = (k as f64 * PI / l).powi(2);
        let (pr, c_norm) = project(traj, prm, k);
        let gn: Vec<f64> = (0..levels).map(|m| prm.d1 * kappa * pr.n[m] - pr.fn_[m]).collect();
        let gp: Vec<f64> = (0..levels)
            .map(|m| prm.d2 * kappa * pr.p[m] + (prm.d3 - prm.d2) * kappa * pr.phi[m] - pr.fp[m])
            .collect();
        let mut record = |rn: f64, rp: f64, theta_norm: f64| {
            let norm = c_norm * theta_norm;
            worst.n = worst.n.max(rn.abs() / norm);
            worst.p = worst.p.max(rp.abs() / norm);
        };
        match time {
            TimeTest::Constant => {
                let rn = pr.n[levels - 1] - pr.n[0] + super::quadrature::trapezoid(&t, &gn);
                let rp = pr.p[levels - 1] - pr.p[0] + super::quadrature::trapezoid(&t, &gp);
                record(rn, rp, (t[levels - 1] - t[0]).sqrt());
            }
            TimeTest::Hats { .. } => {
                for w in nodes.windows(3) {
                    let (lo, mid, hi) = (w[0], w[1], w[2]);
                    let (an, bn) = hat_integrals(&t, &pr.n, &gn, lo, mid, hi);
                    let (ap, bp) = hat_integrals(&t, &pr.p, &gp, lo, mid, hi);
                    record(bn - an, bp - ap, ((t[hi] - t[lo]) / 3.0).sqrt());
                }
            }
        }
    }
    Ok(worst)
}

/// Defect of the integrated mass balances `∫u(T) - ∫u(0) - ∬ f_u` for `u = N, P`.
pub fn mass_balance_defect(traj: &Trajectory<LimitState>, prm: &Parameters) -> Result<(f64, f64), DiagnosticsError> {
    let (Some(first), Some(last)) = (traj.snapshots.first(), traj.snapshots.last()) else {
        return Err(DiagnosticsError::EmptyTrajectory);
    };
    let t = traj.times();
    let mut src_n = Vec::with_capacity(traj.len());
    let mut src_p = Vec::with_capacity(traj.len());
    for s in &traj.snapshots {
        let (mut a, mut b) = (0.0, 0.0);
        for (&nv, &pv) in s.n.values().iter().zip(s.p.values()) {
            let (rn, rp) = reaction_limit_unchecked(nv, pv, prm);
            a += rn;
            b += rp;
        }
        src_n.push(a * s.grid().cell_volume());
        src_p.push(b * s.grid().cell_volume());
    }
    let dn = last.n.integral() - first.n.integral() - super::quadrature::trapezoid(&t, &src_n);
    let dp = last.p.integral() - first.p.integral() - super::quadrature::trapezoid(&t, &src_p);
    Ok((dn, dp))
}
