//! Operator-split integrator for the stiff three-field system.
//!
//! The `1/eps` exchange between searching and handling predators leaves `N`
//! and `ps + ph` untouched, so it reduces to a scalar problem per cell: one
//! backward-Euler solve (default) or its exact flow, each a bracketed scalar
//! root-find. Slow reactions are advanced explicitly with a
//! two-stage strong-stability-preserving Runge-Kutta step, and diffusion
//! through [`crate::diffusion`].
//!
//! Strang order: exchange(dt/2), slow(dt/2), diffusion(dt), slow(dt/2),
//! exchange(dt/2). Every step ends with an exchange solve.

use crate::diffusion::diffuse_in_place;
use crate::grid::{Field, Grid};
use crate::kinetics::{phi_unchecked, Parameters};
use crate::solver::{integrate, Exchange, SolverConfig, Splitting};
use crate::trajectory::{guard_field, IntegrationError, Observer, SolverError, State, Trajectory};
use thiserror::Error;

/// Prey, searching and handling predators at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct FastState {
    pub t: f64,
    pub n: Field,
    pub ps: Field,
    pub ph: Field,
}

impl FastState {
    pub fn new(t: f64, n: Field, ps: Field, ph: Field) -> Result<Self, SolverError> {
        if n.grid() != ps.grid() || n.grid() != ph.grid() {
            return Err(SolverError::Shape("N, ps and ph live on different grids".into()));
        }
        Ok(Self { t, n, ps, ph })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { t: 0.0, n: Field::zeros(grid), ps: Field::zeros(grid), ph: Field::zeros(grid) }
    }

    /// Total predator density `ps + ph` per cell.
    pub fn total_predators(&self) -> Vec<f64> {
        self.ps.values().iter().zip(self.ph.values()).map(|(a, b)| a + b).collect()
    }

    fn check(&self) -> Result<(), SolverError> {
        let mut copy = self.clone();
        guard_field("N", copy.n.values_mut(), self.t)?;
        guard_field("ps", copy.ps.values_mut(), self.t)?;
        guard_field("ph", copy.ph.values_mut(), self.t)?;
        Ok(())
    }
}

impl State for FastState {
    const FIELD_NAMES: &'static [&'static str] = &["N", "ps", "ph"];

    fn time(&self) -> f64 {
        self.t
    }

    fn grid(&self) -> &Grid {
        self.n.grid()
    }

    fn fields(&self) -> Vec<&Field> {
        vec![&self.n, &self.ps, &self.ph]
    }

    fn from_fields(t: f64, fields: Vec<Field>) -> Result<Self, SolverError> {
        let [n, ps, ph]: [Field; 3] = fields
            .try_into()
            .map_err(|v: Vec<Field>| SolverError::Shape(format!("expected 3 fields, got {}", v.len())))?;
        FastState::new(t, n, ps, ph)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExchangeError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("no convergence after {iterations} iterations (bracket [{lo:e}, {hi:e}])")]
    NoConvergence { iterations: usize, lo: f64, hi: f64 },
}

/// Backward-Euler step of the fast exchange at one cell.
///
/// Solves `ph = ph_old + k (alpha (s - ph) N / (xi (s - ph) + 1) - gamma ph)`
/// for `ph` in `[0, s]`, where `s = ps + ph` and `k = dt / eps`. `k = ∞`
/// returns the slow-manifold value.
pub fn fast_reaction_pointwise_solve(
    s_total: f64,
    n: f64,
    ph_old: f64,
    dt_over_eps: f64,
    prm: &Parameters,
) -> Result<f64, ExchangeError> {
    let bad = |what: &str, v: f64| ExchangeError::Input(format!("{what} = {v}"));
    if !(s_total.is_finite() && s_total >= 0.0) {
        return Err(bad("s_total", s_total));
    }
    if !(n.is_finite() && n >= 0.0) {
        return Err(bad("N", n));
    }
    if !(ph_old.is_finite() && ph_old >= 0.0 && ph_old <= s_total * (1.0 + 1e-14)) {
        return Err(bad("ph_old", ph_old));
    }
    if dt_over_eps.is_nan() || dt_over_eps < 0.0 {
        return Err(bad("dt_over_eps", dt_over_eps));
    }
    solve_exchange(s_total, n, ph_old.min(s_total), dt_over_eps, prm)
}

pub(crate) fn solve_exchange(s: f64, n: f64, ph_old: f64, k: f64, prm: &Parameters) -> Result<f64, ExchangeError> {
    const MAX_ITER: usize = 200;
    if s == 0.0 {
        return Ok(0.0);
    }
    if k == 0.0 {
        return Ok(ph_old);
    }
    if k.is_infinite() {
        return Ok(phi_unchecked(n, s, prm));
    }
    // Scaled residual w (ph - ph_old) - v f(ph), increasing in ph, with
    // g(0) <= 0 <= g(s).
    let w = 1.0 / (1.0 + k);
    let v = k / (1.0 + k);
    let an = prm.alpha * n;
    let g = |x: f64| {
        let ps = s - x;
        w * (x - ph_old) - v * (an * ps / (prm.xi * ps + 1.0) - prm.gamma * x)
    };
    let dg = |x: f64| {
        let q = prm.xi * (s - x) + 1.0;
        w + v * (an / (q * q) + prm.gamma)
    };
    let tol = 1e-12 * (1.0 + s);
    let (mut lo, mut hi) = (0.0, s);
    let mut x = (w * ph_old + v * phi_unchecked(n, s, prm)).clamp(0.0, s);
    for _ in 0..MAX_ITER {
        let gx = g(x);
        if gx == 0.0 {
            return Ok(x);
        }
        if gx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let mut next = x - gx / dg(x);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= tol || hi - lo <= tol {
            return Ok(next);
        }
        x = next;
    }
    Err(ExchangeError::NoConvergence { iterations: MAX_ITER, lo, hi })
}

/// Exact flow over `dt_over_eps` of the exchange with `N` frozen.
///
/// With `s = ps + ph` fixed the exchange reads `eps ph' = q(ph) / (xi (s - ph) + 1)`,
/// `q` the manifold quadratic with roots `φ <= s < r2`. Separating variables
/// gives `A ln((ph - φ)/(ph0 - φ)) + B ln((r2 - ph)/(r2 - ph0)) = γ xi k`, solved
/// for `z = ln((ph - φ)/(ph0 - φ))`. For `xi = 0` the flow is linear and
/// explicit. The result lies between `ph_old` and `φ`.
pub fn exchange_flow(s_total: f64, n: f64, ph_old: f64, dt_over_eps: f64, prm: &Parameters) -> Result<f64, ExchangeError> {
    let bad = |what: &str, v: f64| ExchangeError::Input(format!("{what} = {v}"));
    if !(s_total.is_finite() && s_total >= 0.0) {
        return Err(bad("s_total", s_total));
    }
    if !(n.is_finite() && n >= 0.0) {
        return Err(bad("N", n));
    }
    if !(ph_old.is_finite() && ph_old >= 0.0 && ph_old <= s_total * (1.0 + 1e-14)) {
        return Err(bad("ph_old", ph_old));
    }
    if dt_over_eps.is_nan() || dt_over_eps < 0.0 {
        return Err(bad("dt_over_eps", dt_over_eps));
    }
    flow_exchange(s_total, n, ph_old.min(s_total), dt_over_eps, prm)
}

pub(crate) fn flow_exchange(s: f64, n: f64, ph0: f64, k: f64, prm: &Parameters) -> Result<f64, ExchangeError> {
    const MAX_ITER: usize = 200;
    if s == 0.0 {
        return Ok(0.0);
    }
    if k == 0.0 {
        return Ok(ph0);
    }
    let an = prm.alpha * n;
    if prm.xi == 0.0 {
        let rate = an + prm.gamma;
        let target = an * s / rate;
        return Ok((target + (ph0 - target) * (-rate * k).exp()).clamp(0.0, s));
    }
    let gx = prm.gamma * prm.xi;
    let a_sum = an + prm.gamma + gx * s;
    let b_diff = an + prm.gamma - gx * s;
    let root = (b_diff * b_diff + 4.0 * prm.gamma * gx * s).sqrt();
    let target = 2.0 * an * s / (a_sum + root);
    let far = (a_sum + root) / (2.0 * gx);
    let w0 = ph0 - target;
    if w0 == 0.0 || k.is_infinite() {
        return Ok(target);
    }
    let coef_a = (prm.xi * (s - target) + 1.0) / (target - far);
    let coef_b = (prm.xi * (s - far) + 1.0) / (far - target);
    let tau = gx * k;
    let span = far - ph0;
    // h(z) decreases from +∞ (z → -∞) to h(0) = -tau.
    let h = |z: f64| coef_a * z + coef_b * (-w0 * z.exp_m1() / span).ln_1p() - tau;
    let dh = |z: f64| {
        let e = w0 * z.exp();
        coef_a - coef_b * e / (far - target - e)
    };
    let mut lo = (2.0 * tau / coef_a).min(-1.0);
    while h(lo) <= 0.0 {
        lo *= 2.0;
        if lo < -1500.0 {
            return Ok(target);
        }
    }
    let mut hi = 0.0;
    let mut z = (tau / coef_a).clamp(lo, hi);
    for _ in 0..MAX_ITER {
        let hz = h(z);
        if hz == 0.0 {
            break;
        }
        if hz > 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        let mut next = z - hz / dh(z);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let done = (next - z).abs() <= 1e-14 * z.abs().max(1.0) || hi - lo <= 1e-14 * lo.abs().max(1.0);
        z = next;
        if done {
            return Ok((target + w0 * z.exp()).clamp(0.0, s));
        }
    }
    if h(z) == 0.0 {
        return Ok((target + w0 * z.exp()).clamp(0.0, s));
    }
    Err(ExchangeError::NoConvergence { iterations: MAX_ITER, lo, hi })
}

/// Largest admissible step for the explicit slow reactions at this state.
pub fn slow_step_limit(st: &FastState, prm: &Parameters) -> f64 {
    let max_n = st.n.max().max(0.0);
    let max_ps = st.ps.max().max(0.0);
    let rate = [
        prm.r0,
        prm.mu,
        prm.big_gamma,
        prm.alpha * max_n,
        prm.alpha * max_ps,
        prm.r0 * prm.eta * max_n,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    if rate == 0.0 {
        f64::INFINITY
    } else {
        0.1 / rate
    }
}

/// Checks configuration, grid and parameters before a run.
pub fn validate_fast(init: &FastState, cfg: &SolverConfig, prm: &Parameters) -> Result<(), SolverError> {
    prm.validate()?;
    cfg.validate()?;
    init.check()?;
    // Both splittings take one diffusion sub-step of length dt.
    for d in [prm.d1, prm.d2, prm.d3] {
        crate::diffusion::check_step(init.grid(), d, cfg.dt, cfg.diffusion)?;
    }
    Ok(())
}

fn exchange(st: &mut FastState, k: f64, kind: Exchange, prm: &Parameters) -> Result<(), SolverError> {
    let n = st.n.values();
    let ps = st.ps.values_mut();
    let ph = st.ph.values_mut();
    let solve = match kind {
        Exchange::ExactFlow => flow_exchange,
        Exchange::BackwardEuler => solve_exchange,
    };
    for i in 0..n.len() {
        let s = ps[i] + ph[i];
        let new_ph = solve(s, n[i], ph[i].min(s), k, prm)
            .map_err(|e| SolverError::ExchangeSolve(format!("cell {i}: {e}")))?;
        ph[i] = new_ph;
        ps[i] = s - new_ph;
    }
    Ok(())
}

#[inline]
fn slow_rhs(n: f64, ps: f64, ph: f64, prm: &Parameters) -> (f64, f64, f64) {
    (
        prm.r0 * (1.0 - prm.eta * n) * n - prm.predation(ps) * n,
        -prm.mu * ps + prm.big_gamma * ph,
        -prm.mu * ph,
    )
}

fn slow(st: &mut FastState, tau: f64, two_stage: bool, prm: &Parameters) {
    let n = st.n.values_mut();
    let ps = st.ps.values_mut();
    let ph = st.ph.values_mut();
    for i in 0..n.len() {
        let (a, b, c) = (n[i], ps[i], ph[i]);
        let (fa, fb, fc) = slow_rhs(a, b, c, prm);
        let (a1, b1, c1) = (a + tau * fa, b + tau * fb, c + tau * fc);
        if two_stage {
            let (ga, gb, gc) = slow_rhs(a1, b1, c1, prm);
            n[i] = 0.5 * a + 0.5 * (a1 + tau * ga);
            ps[i] = 0.5 * b + 0.5 * (b1 + tau * gb);
            ph[i] = 0.5 * c + 0.5 * (c1 + tau * gc);
        } else {
            n[i] = a1;
            ps[i] = b1;
            ph[i] = c1;
        }
    }
}

fn diffuse(st: &mut FastState, dt: f64, cfg: &SolverConfig, prm: &Parameters) -> Result<(), SolverError> {
    let grid = *st.n.grid();
    diffuse_in_place(&grid, st.n.values_mut(), prm.d1, dt, cfg.diffusion)?;
    diffuse_in_place(&grid, st.ps.values_mut(), prm.d2, dt, cfg.diffusion)?;
    diffuse_in_place(&grid, st.ph.values_mut(), prm.d3, dt, cfg.diffusion)?;
    Ok(())
}

/// Advances `st` by `dt` (the final step of a run may be shorter than `cfg.dt`).
pub fn step_fast_by(st: &FastState, dt: f64, cfg: &SolverConfig, prm: &Parameters) -> Result<FastState, SolverError> {
    let limit = slow_step_limit(st, prm);
    if dt > limit {
        return Err(SolverError::TimeStep { what: "slow-reaction positivity", dt, limit });
    }
    let mut next = st.clone();
    match cfg.splitting {
        Splitting::Strang => {
            let k_half = 0.5 * dt / prm.eps;
            exchange(&mut next, k_half, cfg.exchange, prm)?;
            slow(&mut next, 0.5 * dt, true, prm);
            diffuse(&mut next, dt, cfg, prm)?;
            slow(&mut next, 0.5 * dt, true, prm);
            exchange(&mut next, k_half, cfg.exchange, prm)?;
        }
        Splitting::Lie => {
            exchange(&mut next, dt / prm.eps, cfg.exchange, prm)?;
            slow(&mut next, dt, false, prm);
            diffuse(&mut next, dt, cfg, prm)?;
        }
    }
    next.t = st.t + dt;
    guard_field("N", next.n.values_mut(), next.t)?;
    guard_field("ps", next.ps.values_mut(), next.t)?;
    guard_field("ph", next.ph.values_mut(), next.t)?;
    Ok(next)
}

/// One step of length `cfg.dt`.
pub fn step_fast(st: &FastState, cfg: &SolverConfig, prm: &Parameters) -> Result<FastState, SolverError> {
    step_fast_by(st, cfg.dt, cfg, prm)
}

/// Integrates from `init` to `cfg.t_end`, streaming every time level to `observers`.
pub fn integrate_fast(
    init: FastState,
    cfg: &SolverConfig,
    prm: &Parameters,
    observers: &mut [&mut dyn Observer<FastState>],
) -> Result<Trajectory<FastState>, IntegrationError<FastState>> {
    if let Err(error) = validate_fast(&init, cfg, prm) {
        return Err(IntegrationError { error, partial: Trajectory { snapshots: vec![init], steps: 0 } });
    }
    integrate(init, cfg, observers, |s, dt, t| {
        let mut next = step_fast_by(s, dt, cfg, prm)?;
        next.t = t;
        Ok(next)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(xi: f64) -> Parameters {
        Parameters { alpha: 1.0, gamma: 1.0, xi, ..Parameters::default() }
    }

    #[test]
    fn exchange_examples() {
        let prm = unit(0.0);
        assert_eq!(fast_reaction_pointwise_solve(1.0, 1.0, 0.3, 0.0, &prm).unwrap(), 0.3);
        let x = fast_reaction_pointwise_solve(1.0, 1.0, 0.0, 1.0, &prm).unwrap();
        assert!((x - 1.0 / 3.0).abs() < 1e-14);
        let x = fast_reaction_pointwise_solve(1.0, 1.0, 0.0, 1e12, &prm).unwrap();
        assert!((x - 0.5).abs() < 1e-11);
        assert_eq!(fast_reaction_pointwise_solve(1.0, 1.0, 0.0, f64::INFINITY, &prm).unwrap(), 0.5);
        assert!(fast_reaction_pointwise_solve(1.0, 1.0, 2.0, 1.0, &prm).is_err());
        assert!(fast_reaction_pointwise_solve(1.0, -1.0, 0.0, 1.0, &prm).is_err());
    }

    #[test]
    fn exchange_stays_in_bracket() {
        let prm = unit(2.0);
        for &k in &[1e-6, 0.1, 10.0, 1e8] {
            for &s in &[0.0, 1e-9, 0.5, 40.0] {
                for &n in &[0.0, 0.2, 7.0] {
                    let x = fast_reaction_pointwise_solve(s, n, 0.5 * s, k, &prm).unwrap();
                    assert!((0.0..=s).contains(&x));
                }
            }
        }
    }

    fn rk4_exchange(s: f64, n: f64, ph0: f64, k: f64, prm: &Parameters) -> f64 {
        let f = |x: f64| {
            let ps = s - x;
            prm.alpha * ps * n / (prm.xi * ps + 1.0) - prm.gamma * x
        };
        let steps = 20_000;
        let h = k / steps as f64;
        let mut x = ph0;
        for _ in 0..steps {
            let k1 = f(x);
            let k2 = f(x + 0.5 * h * k1);
            let k3 = f(x + 0.5 * h * k2);
            let k4 = f(x + h * k3);
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        x
    }

    #[test]
    fn exchange_flow_matches_fine_ode_solve() {
        for xi in [0.0, 1e-8, 0.3, 1.0, 10.0] {
            let prm = Parameters { xi, ..Parameters::default() };
            for &(s, n, frac) in &[(1.0, 0.5, 0.0), (1.0, 0.5, 1.0), (3.0, 2.0, 0.3), (0.2, 0.0, 0.7), (5.0, 8.0, 0.9)] {
                for k in [1e-4, 0.1, 1.0, 4.0] {
                    let ph0 = frac * s;
                    let exact = exchange_flow(s, n, ph0, k, &prm).unwrap();
                    let oracle = rk4_exchange(s, n, ph0, k, &prm);
                    assert!((exact - oracle).abs() < 1e-12 * (1.0 + s), "xi {xi} s {s} n {n} k {k}: {exact} vs {oracle}");
                }
            }
        }
    }

    #[test]
    fn exchange_flow_limits() {
        let prm = Parameters::default();
        let target = phi_unchecked(0.7, 1.3, &prm);
        assert_eq!(exchange_flow(1.3, 0.7, 0.2, 0.0, &prm).unwrap(), 0.2);
        assert!((exchange_flow(1.3, 0.7, 0.2, f64::INFINITY, &prm).unwrap() - target).abs() < 1e-15);
        assert!((exchange_flow(1.3, 0.7, 0.2, 1e9, &prm).unwrap() - target).abs() < 1e-15);
        for k in [1e-3, 0.5, 30.0] {
            let x = exchange_flow(1.3, 0.7, 1.3, k, &prm).unwrap();
            assert!(x >= target && x <= 1.3);
        }
        // Both treatments agree to first order for small steps.
        let k = 1e-4;
        let be = fast_reaction_pointwise_solve(1.3, 0.7, 0.2, k, &prm).unwrap();
        let ex = exchange_flow(1.3, 0.7, 0.2, k, &prm).unwrap();
        assert!((be - ex).abs() < 1e-7);
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = Grid::new_1d(1.0, 16).unwrap();
        let st = FastState::zeros(g);
        let cfg = SolverConfig { dt: 1e-3, t_end: 1e-2, ..Default::default() };
        let next = step_fast(&st, &cfg, &Parameters::default()).unwrap();
        assert!(next.fields().iter().all(|f| f.values().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn oversized_step_rejected() {
        let g = Grid::new_1d(1.0, 16).unwrap();
        let mut st = FastState::zeros(g);
        st.n = Field::constant(g, 1.0);
        let cfg = SolverConfig { dt: 0.5, t_end: 1.0, diffusion: crate::DiffusionScheme::Implicit, ..Default::default() };
        assert!(matches!(step_fast(&st, &cfg, &Parameters::default()), Err(SolverError::TimeStep { .. })));
    }
}
