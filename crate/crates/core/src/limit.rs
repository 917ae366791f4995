//! Integrator for the reduced prey/total-predator systems with the
//! cross-diffusion term `(d3 - d2) Δ φ(N, P)`.
//!
//! The cross term is the discrete Neumann Laplacian of the pointwise
//! manifold value and is always treated explicitly. With Crank-Nicolson
//! diffusion and Strang splitting the step is second order in time: the
//! transport sub-step uses a Heun corrector for the cross term.

use crate::diffusion::{check_step, diffuse_in_place, DiffusionScheme};
use crate::fast::FastState;
use crate::grid::{Field, Grid};
use crate::kinetics::{phi_unchecked, reaction_limit_unchecked, Parameters};
use crate::solver::{integrate, Splitting, SolverConfig};
use crate::trajectory::{guard_field, IntegrationError, Observer, SolverError, State, Trajectory};

/// Prey and total predators at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitState {
    pub t: f64,
    pub n: Field,
    pub p: Field,
}

impl LimitState {
    pub fn new(t: f64, n: Field, p: Field) -> Result<Self, SolverError> {
        if n.grid() != p.grid() {
            return Err(SolverError::Shape("N and P live on different grids".into()));
        }
        Ok(Self { t, n, p })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { t: 0.0, n: Field::zeros(grid), p: Field::zeros(grid) }
    }

    /// `N` and `P = ps + ph` of a fast-system state.
    pub fn from_fast(st: &FastState) -> Self {
        let p = Field::new(*st.n.grid(), st.total_predators()).expect("same grid");
        Self { t: st.t, n: st.n.clone(), p }
    }

    /// Pointwise manifold value `φ(N, P)`.
    pub fn handling(&self, prm: &Parameters) -> Vec<f64> {
        handling_of(self.n.values(), self.p.values(), prm)
    }
}

impl State for LimitState {
    const FIELD_NAMES: &'static [&'static str] = &["N", "P"];

    fn time(&self) -> f64 {
        self.t
    }

    fn grid(&self) -> &Grid {
        self.n.grid()
    }

    fn fields(&self) -> Vec<&Field> {
        vec![&self.n, &self.p]
    }

    fn from_fields(t: f64, fields: Vec<Field>) -> Result<Self, SolverError> {
        let [n, p]: [Field; 2] = fields
            .try_into()
            .map_err(|v: Vec<Field>| SolverError::Shape(format!("expected 2 fields, got {}", v.len())))?;
        LimitState::new(t, n, p)
    }
}

fn handling_of(n: &[f64], p: &[f64], prm: &Parameters) -> Vec<f64> {
    n.iter().zip(p).map(|(&a, &b)| phi_unchecked(a, b, prm)).collect()
}

/// Method-of-lines right-hand side `(d1 ΔN + f_N, d2 ΔP + (d3 - d2) Δφ + f_P)`.
pub fn limit_rhs(st: &LimitState, prm: &Parameters) -> (Vec<f64>, Vec<f64>) {
    let grid = st.grid();
    let len = grid.len();
    let handling = st.handling(prm);
    let mut lap_n = vec![0.0; len];
    let mut lap_p = vec![0.0; len];
    let mut lap_phi = vec![0.0; len];
    grid.laplacian(st.n.values(), &mut lap_n);
    grid.laplacian(st.p.values(), &mut lap_p);
    grid.laplacian(&handling, &mut lap_phi);
    let cross = prm.d3 - prm.d2;
    let mut rn = Vec::with_capacity(len);
    let mut rp = Vec::with_capacity(len);
    for i in 0..len {
        let (fnr, fpr) = reaction_limit_unchecked(st.n.values()[i], st.p.values()[i], prm);
        rn.push(prm.d1 * lap_n[i] + fnr);
        rp.push(prm.d2 * lap_p[i] + cross * lap_phi[i] + fpr);
    }
    (rn, rp)
}

/// Step restriction of the explicit cross-diffusion term.
pub fn cross_step_limit(grid: &Grid, prm: &Parameters, cfg: &SolverConfig) -> f64 {
    let c = (prm.d3 - prm.d2).abs() * cfg.cross_slope_bound;
    if c == 0.0 {
        f64::INFINITY
    } else {
        let h = grid.h_min();
        h * h / (2.0 * grid.dim() as f64 * c)
    }
}

/// Step restriction of the explicit reaction sub-step at this state.
pub fn reaction_step_limit(st: &LimitState, prm: &Parameters) -> f64 {
    let max_n = st.n.max().max(0.0);
    let max_p = st.p.max().max(0.0);
    let rate = [
        prm.r0,
        prm.mu,
        prm.big_gamma,
        prm.alpha * max_n,
        prm.alpha * max_p,
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

pub fn validate_limit(init: &LimitState, cfg: &SolverConfig, prm: &Parameters) -> Result<(), SolverError> {
    prm.validate()?;
    cfg.validate()?;
    let mut copy = init.clone();
    guard_field("N", copy.n.values_mut(), init.t)?;
    guard_field("P", copy.p.values_mut(), init.t)?;
    let grid = init.grid();
    check_step(grid, prm.d1, cfg.dt, cfg.diffusion)?;
    check_step(grid, prm.d2, cfg.dt, cfg.diffusion)?;
    let limit = cross_step_limit(grid, prm, cfg);
    if cfg.dt > limit {
        return Err(SolverError::TimeStep { what: "cross-diffusion", dt: cfg.dt, limit });
    }
    Ok(())
}

fn react(st: &mut LimitState, tau: f64, two_stage: bool, prm: &Parameters) {
    let n = st.n.values_mut();
    let p = st.p.values_mut();
    for i in 0..n.len() {
        let (a, b) = (n[i], p[i]);
        let (fa, fb) = reaction_limit_unchecked(a, b, prm);
        let (a1, b1) = ((a + tau * fa).max(0.0), (b + tau * fb).max(0.0));
        if two_stage {
            let (ga, gb) = reaction_limit_unchecked(a1, b1, prm);
            n[i] = 0.5 * a + 0.5 * (a1 + tau * ga);
            p[i] = 0.5 * b + 0.5 * (b1 + tau * gb);
        } else {
            n[i] = a1;
            p[i] = b1;
        }
    }
}

fn cross_term(grid: &Grid, n: &[f64], p: &[f64], prm: &Parameters) -> Vec<f64> {
    let handling = handling_of(n, p, prm);
    let mut lap = vec![0.0; handling.len()];
    grid.laplacian(&handling, &mut lap);
    let c = prm.d3 - prm.d2;
    lap.iter_mut().for_each(|v| *v *= c);
    lap
}

/// Diffusion plus cross-diffusion over `dt`, reactions excluded.
fn transport(st: &mut LimitState, dt: f64, cfg: &SolverConfig, prm: &Parameters) -> Result<(), SolverError> {
    let grid = *st.grid();
    let g0 = if prm.d3 == prm.d2 {
        vec![0.0; grid.len()]
    } else {
        cross_term(&grid, st.n.values(), st.p.values(), prm)
    };
    let p0 = st.p.values().to_vec();
    diffuse_in_place(&grid, st.n.values_mut(), prm.d1, dt, cfg.diffusion)?;
    match cfg.diffusion {
        DiffusionScheme::Implicit => {
            let p = st.p.values_mut();
            p.iter_mut().zip(&g0).for_each(|(v, g)| *v += dt * g);
            diffuse_in_place(&grid, p, prm.d2, dt, DiffusionScheme::Implicit)?;
        }
        DiffusionScheme::Explicit => {
            let p = st.p.values_mut();
            diffuse_in_place(&grid, p, prm.d2, dt, DiffusionScheme::Explicit)?;
            p.iter_mut().zip(&g0).for_each(|(v, g)| *v += dt * g);
        }
        DiffusionScheme::CrankNicolson => {
            // P* = CN(P0) + dt M^{-1} G0,  P1 = CN(P0) + dt/2 M^{-1} (G0 + G*),
            // with M = I - (dt/2) d2 Δ.
            let mut base = p0;
            diffuse_in_place(&grid, &mut base, prm.d2, dt, DiffusionScheme::CrankNicolson)?;
            let mut src = g0.clone();
            diffuse_in_place(&grid, &mut src, prm.d2, 0.5 * dt, DiffusionScheme::Implicit)?;
            let predictor: Vec<f64> = base.iter().zip(&src).map(|(b, s)| (b + dt * s).max(0.0)).collect();
            let mut src = if prm.d3 == prm.d2 {
                vec![0.0; grid.len()]
            } else {
                let g1 = cross_term(&grid, st.n.values(), &predictor, prm);
                g0.iter().zip(&g1).map(|(a, b)| a + b).collect()
            };
            diffuse_in_place(&grid, &mut src, prm.d2, 0.5 * dt, DiffusionScheme::Implicit)?;
            let p = st.p.values_mut();
            for i in 0..p.len() {
                p[i] = base[i] + 0.5 * dt * src[i];
            }
        }
    }
    Ok(())
}

/// Advances `st` by `dt`.
pub fn step_limit_by(st: &LimitState, dt: f64, cfg: &SolverConfig, prm: &Parameters) -> Result<LimitState, SolverError> {
    let limit = reaction_step_limit(st, prm);
    if dt > limit {
        return Err(SolverError::TimeStep { what: "reaction positivity", dt, limit });
    }
    let mut next = st.clone();
    match (cfg.splitting, cfg.diffusion) {
        (Splitting::Lie, DiffusionScheme::Explicit) => {
            let (rn, rp) = limit_rhs(st, prm);
            next.n.values_mut().iter_mut().zip(&rn).for_each(|(v, r)| *v += dt * r);
            next.p.values_mut().iter_mut().zip(&rp).for_each(|(v, r)| *v += dt * r);
        }
        (Splitting::Lie, _) => {
            react(&mut next, dt, false, prm);
            transport(&mut next, dt, cfg, prm)?;
        }
        (Splitting::Strang, _) => {
            react(&mut next, 0.5 * dt, true, prm);
            transport(&mut next, dt, cfg, prm)?;
            react(&mut next, 0.5 * dt, true, prm);
        }
    }
    next.t = st.t + dt;
    guard_field("N", next.n.values_mut(), next.t)?;
    guard_field("P", next.p.values_mut(), next.t)?;
    Ok(next)
}

pub fn step_limit(st: &LimitState, cfg: &SolverConfig, prm: &Parameters) -> Result<LimitState, SolverError> {
    step_limit_by(st, cfg.dt, cfg, prm)
}

pub fn integrate_limit(
    init: LimitState,
    cfg: &SolverConfig,
    prm: &Parameters,
    observers: &mut [&mut dyn Observer<LimitState>],
) -> Result<Trajectory<LimitState>, IntegrationError<LimitState>> {
    if let Err(error) = validate_limit(&init, cfg, prm) {
        return Err(IntegrationError { error, partial: Trajectory { snapshots: vec![init], steps: 0 } });
    }
    integrate(init, cfg, observers, |s, dt, t| {
        let mut next = step_limit_by(s, dt, cfg, prm)?;
        next.t = t;
        Ok(next)
    })
}
