//! ε-sweeps of the fast system, comparison with the limit system and the
//! acceptance checks of a plan.

use crate::diagnostics::{
    extremum_and_mass_monitor, fit_rate, DiagnosticRow, FastMonitor, FastSummary, LimitMonitor,
    LimitSummary, RateReport,
};
use crate::fast::{integrate_fast, FastState};
use crate::grid::Grid;
use crate::initial::InitialData;
use crate::io::csv::{diagnostics_csv, fmt_f64, write_atomic, CsvError};
use crate::io::snapshot::write_snapshot;
use crate::io::svg::{rate_plot, series_plot, Series};
use crate::kinetics::{check_duality_condition, phi_unchecked, DualityCheck, Parameters};
use crate::limit::{integrate_limit, LimitState};
use crate::solver::SolverConfig;
use crate::trajectory::{State, Trajectory};
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Io(#[from] CsvError),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("{0}")]
    Compare(String),
}

/// User-supplied maximal-regularity constant for the duality condition.
#[derive(Debug, Clone, PartialEq)]
pub struct DualityInput {
    pub c_mr: f64,
    pub q0_prime: f64,
    pub provenance: String,
}

/// Pass/fail thresholds of a plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Acceptance {
    pub min_slope: f64,
    pub strictly_decreasing: bool,
    pub limit_monotone: bool,
    /// `‖N^ε - N‖` at the smallest ε must not exceed this multiple of the self-convergence estimate.
    pub self_convergence_factor: f64,
}

impl Acceptance {
    /// Slope thresholds 0.45 (`xi > 0`) and 0.15 (`xi = 0`).
    pub fn for_branch(xi: f64) -> Self {
        Self {
            min_slope: if xi > 0.0 { 0.45 } else { 0.15 },
            strictly_decreasing: true,
            limit_monotone: true,
            self_convergence_factor: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    /// Model parameters; `eps` is replaced per run.
    pub base: Parameters,
    /// Strictly decreasing, at least three values.
    pub eps: Vec<f64>,
    pub grid: Grid,
    pub solver: SolverConfig,
    pub initial: InitialData,
    pub seed: u64,
    pub compare_limit: bool,
    pub self_convergence: bool,
    pub drop_plateau: bool,
    /// Norms integrate only `t >= norm_start`.
    pub norm_start: f64,
    pub duality: Option<DualityInput>,
    pub acceptance: Acceptance,
    pub output_dir: PathBuf,
    pub warnings: Vec<String>,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<(), SweepError> {
        if self.eps.len() < 3 {
            return Err(SweepError::Plan(format!("need at least 3 eps values, got {}", self.eps.len())));
        }
        if self.eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(SweepError::Plan("eps values must be positive".into()));
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(SweepError::Plan("eps list must be strictly decreasing".into()));
        }
        self.base.validate().map_err(|e| SweepError::Plan(e.to_string()))?;
        self.solver.validate().map_err(|e| SweepError::Plan(e.to_string()))?;
        Ok(())
    }

    pub fn eps_min(&self) -> f64 {
        self.eps[self.eps.len() - 1]
    }
}

/// Exponent of the slow-manifold residual norm: 2 for `xi > 0`, 4/3 for `xi = 0`.
pub fn residual_exponent(xi: f64) -> f64 {
    if xi > 0.0 {
        2.0
    } else {
        4.0 / 3.0
    }
}

/// `L²(Q_T)` distances between a fast and a limit trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonTable {
    /// `‖N^ε - N‖`.
    pub n: f64,
    /// `‖(ps^ε + ph^ε) - P‖`.
    pub p: f64,
    /// `‖ph^ε - φ(N, P)‖`.
    pub ph: f64,
}

fn same_times<A: State, B: State>(a: &Trajectory<A>, b: &Trajectory<B>) -> Result<(), SweepError> {
    if a.len() != b.len() {
        return Err(SweepError::Compare(format!("{} vs {} time levels", a.len(), b.len())));
    }
    let scale = a.times().last().copied().unwrap_or(1.0).abs().max(1.0);
    for (ta, tb) in a.times().iter().zip(b.times()) {
        if (ta - tb).abs() > 1e-12 * scale {
            return Err(SweepError::Compare(format!("time levels differ ({ta} vs {tb})")));
        }
    }
    Ok(())
}

fn l2_over<F: Fn(usize) -> Vec<f64>>(times: &[f64], grid: &Grid, t0: f64, diff: F) -> f64 {
    let mut acc = crate::diagnostics::SpaceTimeAccumulator::from_time(2.0, t0).expect("valid exponent");
    for (k, &t) in times.iter().enumerate() {
        acc.push(t, grid, diff(k));
    }
    acc.norm().unwrap_or(0.0)
}

/// Compares trajectories on identical grids and emission times.
pub fn compare_to_limit(
    fast: &Trajectory<FastState>,
    limit: &Trajectory<LimitState>,
    prm: &Parameters,
    t0: f64,
) -> Result<ComparisonTable, SweepError> {
    let (Some(gf), Some(gl)) = (fast.grid(), limit.grid()) else {
        return Err(SweepError::Compare("empty trajectory".into()));
    };
    if gf != gl {
        return Err(SweepError::Compare("grids differ".into()));
    }
    same_times(fast, limit)?;
    let times = fast.times();
    let f = &fast.snapshots;
    let l = &limit.snapshots;
    let sub = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<f64>>();
    let n = l2_over(&times, gf, t0, |k| sub(f[k].n.values(), l[k].n.values()));
    let p = l2_over(&times, gf, t0, |k| sub(&f[k].total_predators(), l[k].p.values()));
    let ph = l2_over(&times, gf, t0, |k| {
        let w: Vec<f64> = l[k].n.values().iter().zip(l[k].p.values()).map(|(&a, &b)| phi_unchecked(a, b, prm)).collect();
        sub(f[k].ph.values(), &w)
    });
    Ok(ComparisonTable { n, p, ph })
}

/// `‖u_h - u_{h/2}‖_{L²(Q_T)}` of the prey field, the fine run restricted to the coarse cells.
fn refinement_difference<S: State>(coarse: &Trajectory<S>, fine: &Trajectory<S>, t0: f64) -> Result<f64, SweepError> {
    same_times(coarse, fine)?;
    let grid = *coarse.grid().expect("nonempty");
    let times = coarse.times();
    let mut restricted = Vec::with_capacity(fine.len());
    for s in &fine.snapshots {
        let c = s.fields()[0].coarsen().map_err(|e| SweepError::Compare(e.to_string()))?;
        if *c.grid() != grid {
            return Err(SweepError::Compare("fine grid is not a refinement of the coarse grid".into()));
        }
        restricted.push(c.into_values());
    }
    Ok(l2_over(&times, &grid, t0, |k| {
        coarse.snapshots[k].fields()[0].values().iter().zip(&restricted[k]).map(|(a, b)| a - b).collect()
    }))
}

/// Richardson estimates of the prey error from one joint `(h, dt)` halving,
/// assuming second order in both.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfConvergence {
    pub fast_eps: f64,
    pub fast_difference: f64,
    pub limit_difference: f64,
    /// `4/3 (fast_difference + limit_difference)`.
    pub estimate: f64,
}

/// Richardson factor `2^q / (2^q - 1)` for order `q = 2`.
pub const RICHARDSON_FACTOR: f64 = 4.0 / 3.0;

#[derive(Debug, Clone)]
pub struct EpsOutcome {
    pub eps: f64,
    pub result: Result<FastSummary, String>,
    /// Slow-manifold residual in the branch norm.
    pub residual: Option<f64>,
    pub comparison: Option<ComparisonTable>,
    pub rows: Vec<DiagnosticRow>,
    pub final_state: Option<FastState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub xi: f64,
    pub residual_exponent: f64,
    pub outcomes: Vec<EpsOutcome>,
    pub rate: Result<RateReport, String>,
    pub limit: Option<Result<LimitSummary, String>>,
    pub limit_rows: Vec<DiagnosticRow>,
    pub limit_final: Option<LimitState>,
    pub self_convergence: Option<Result<SelfConvergence, String>>,
    pub duality: Option<(DualityInput, Result<DualityCheck, String>)>,
    pub checks: Vec<Check>,
    pub initial_max_n: f64,
    pub base: Parameters,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

enum Job {
    Fast { index: usize, eps: f64 },
    Limit,
    LimitFine,
    FastFine,
}

enum JobResult {
    Fast { index: usize, traj: Result<Trajectory<FastState>, String>, monitor: FastMonitor },
    Limit(Result<Trajectory<LimitState>, String>, LimitMonitor),
    LimitFine(Result<Trajectory<LimitState>, String>),
    FastFine(Result<Trajectory<FastState>, String>),
}

fn run_fast(plan: &ExperimentPlan, eps: f64, grid: &Grid, cfg: &SolverConfig, monitor: Option<&mut FastMonitor>) -> Result<Trajectory<FastState>, String> {
    let prm = plan.base.with_eps(eps);
    let init = plan.initial.fast_state(grid, &prm, plan.seed).map_err(|e| e.to_string())?;
    let result = match monitor {
        Some(m) => integrate_fast(init, cfg, &prm, &mut [m]),
        None => integrate_fast(init, cfg, &prm, &mut []),
    };
    result.map_err(|e| e.to_string())
}

fn run_limit(plan: &ExperimentPlan, grid: &Grid, cfg: &SolverConfig, monitor: Option<&mut LimitMonitor>) -> Result<Trajectory<LimitState>, String> {
    let prm = plan.base.with_eps(plan.eps_min());
    let init = plan.initial.limit_state(grid, &prm, plan.seed).map_err(|e| e.to_string())?;
    let result = match monitor {
        Some(m) => integrate_limit(init, cfg, &prm, &mut [m]),
        None => integrate_limit(init, cfg, &prm, &mut []),
    };
    result.map_err(|e| e.to_string())
}

fn execute(plan: &ExperimentPlan, job: &Job) -> JobResult {
    let fine_grid = plan.grid.refined();
    let fine_cfg = plan.solver.refined();
    match *job {
        Job::Fast { index, eps } => {
            let prm = plan.base.with_eps(eps);
            let mut monitor = match FastMonitor::new(&prm, plan.norm_start) {
                Ok(m) => m.with_rows(),
                Err(e) => {
                    // The monitor needs a valid energy exponent; report through the run.
                    let m = FastMonitor::new(&Parameters { p_energy: 2.0, ..prm }, plan.norm_start).expect("p = 2 is valid");
                    return JobResult::Fast { index, traj: Err(e.to_string()), monitor: m };
                }
            };
            let traj = run_fast(plan, eps, &plan.grid, &plan.solver, Some(&mut monitor));
            JobResult::Fast { index, traj, monitor }
        }
        Job::Limit => {
            let mut monitor = LimitMonitor::new(&plan.base).with_rows();
            let traj = run_limit(plan, &plan.grid, &plan.solver, Some(&mut monitor));
            JobResult::Limit(traj, monitor)
        }
        Job::LimitFine => JobResult::LimitFine(run_limit(plan, &fine_grid, &fine_cfg, None)),
        Job::FastFine => JobResult::FastFine(run_fast(plan, plan.eps_min(), &fine_grid, &fine_cfg, None)),
    }
}

fn monotone_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Runs every ε job (and the limit and refinement runs) on `jobs` worker
/// threads and evaluates the plan's checks. Results do not depend on `jobs`.
pub fn run_sweep(plan: &ExperimentPlan, jobs: usize) -> Result<SweepReport, SweepError> {
    plan.validate()?;
    let mut work: Vec<Job> = plan.eps.iter().enumerate().map(|(index, &eps)| Job::Fast { index, eps }).collect();
    if plan.compare_limit {
        work.push(Job::Limit);
        if plan.self_convergence {
            work.push(Job::LimitFine);
            work.push(Job::FastFine);
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    let results: Vec<JobResult> = pool.install(|| work.par_iter().map(|j| execute(plan, j)).collect());

    let mut fast_trajs: Vec<Option<Trajectory<FastState>>> = vec![None; plan.eps.len()];
    let mut outcomes: Vec<EpsOutcome> = plan
        .eps
        .iter()
        .map(|&eps| EpsOutcome { eps, result: Err("not run".into()), residual: None, comparison: None, rows: vec![], final_state: None })
        .collect();
    let mut limit_traj = None;
    let mut limit_summary = None;
    let mut limit_rows = vec![];
    let mut limit_fine = None;
    let mut fast_fine = None;
    let exponent = residual_exponent(plan.base.xi);
    for r in results {
        match r {
            JobResult::Fast { index, traj, mut monitor } => {
                let out = &mut outcomes[index];
                out.rows = monitor.take_rows();
                match traj {
                    Ok(t) => {
                        let s = monitor.summary();
                        out.residual = Some(if exponent == 2.0 { s.residual_l2 } else { s.residual_l43 });
                        out.result = Ok(s);
                        out.final_state = t.last().cloned();
                        fast_trajs[index] = Some(t);
                    }
                    Err(e) => out.result = Err(e),
                }
            }
            JobResult::Limit(traj, mut monitor) => {
                limit_rows = monitor.take_rows();
                limit_summary = Some(traj.as_ref().map(|_| monitor.summary()).map_err(Clone::clone));
                limit_traj = Some(traj);
            }
            JobResult::LimitFine(t) => limit_fine = Some(t),
            JobResult::FastFine(t) => fast_fine = Some(t),
        }
    }

    let prm_min = plan.base.with_eps(plan.eps_min());
    if let Some(Ok(lt)) = &limit_traj {
        for (out, ft) in outcomes.iter_mut().zip(&fast_trajs) {
            if let Some(ft) = ft {
                out.comparison = Some(compare_to_limit(ft, lt, &prm_min, plan.norm_start)?);
            }
        }
    }

    let samples: Vec<(f64, f64)> = outcomes.iter().filter_map(|o| o.residual.map(|r| (o.eps, r))).collect();
    let rate = fit_rate(&samples, plan.drop_plateau).map_err(|e| e.to_string());

    let self_convergence = match (&limit_traj, &limit_fine, &fast_fine, fast_trajs.last()) {
        (Some(Ok(lc)), Some(lf), Some(ff), Some(Some(fc))) => Some((|| {
            let lf = lf.as_ref().map_err(Clone::clone)?;
            let ff = ff.as_ref().map_err(Clone::clone)?;
            let limit_difference = refinement_difference(lc, lf, plan.norm_start).map_err(|e| e.to_string())?;
            let fast_difference = refinement_difference(fc, ff, plan.norm_start).map_err(|e| e.to_string())?;
            Ok(SelfConvergence {
                fast_eps: plan.eps_min(),
                fast_difference,
                limit_difference,
                estimate: RICHARDSON_FACTOR * (fast_difference + limit_difference),
            })
        })()),
        (Some(_), Some(_), Some(_), _) => Some(Err("coarse runs failed".to_string())),
        _ => None,
    };

    let duality = plan.duality.as_ref().map(|d| {
        (d.clone(), check_duality_condition(&plan.base, d.c_mr, d.q0_prime).map_err(|e| e.to_string()))
    });

    let initial_max_n = plan
        .initial
        .fast_state(&plan.grid, &plan.base, plan.seed)
        .map(|s| extremum_and_mass_monitor(&s).extrema[0].2)
        .unwrap_or(f64::NAN);

    let limit_final = match &limit_traj {
        Some(Ok(t)) => t.last().cloned(),
        _ => None,
    };
    let mut report = SweepReport {
        xi: plan.base.xi,
        residual_exponent: exponent,
        outcomes,
        rate,
        limit: limit_summary,
        limit_rows,
        limit_final,
        self_convergence,
        duality,
        checks: vec![],
        initial_max_n,
        base: plan.base,
    };
    report.checks = evaluate(plan, &report);
    Ok(report)
}

fn check(name: &'static str, value: f64, threshold: f64, passed: bool) -> Check {
    Check { name, value, threshold, passed }
}

fn evaluate(plan: &ExperimentPlan, r: &SweepReport) -> Vec<Check> {
    let a = &plan.acceptance;
    let mut out = Vec::new();
    let failed = r.outcomes.iter().filter(|o| o.result.is_err()).count();
    out.push(check("all_runs_completed", failed as f64, 0.0, failed == 0));
    match &r.rate {
        Ok(rate) => out.push(check("rate_slope", rate.slope, a.min_slope, rate.slope >= a.min_slope)),
        Err(_) => out.push(check("rate_slope", f64::NAN, a.min_slope, false)),
    }
    if a.strictly_decreasing {
        let res: Vec<f64> = r.outcomes.iter().map(|o| o.residual.unwrap_or(f64::NAN)).collect();
        let ok = failed == 0 && monotone_decreasing(&res);
        out.push(check("residual_strictly_decreasing", ok as u8 as f64, 1.0, ok));
    }
    let summaries: Vec<&FastSummary> = r.outcomes.iter().filter_map(|o| o.result.as_ref().ok()).collect();
    let limit = r.limit.as_ref().and_then(|l| l.as_ref().ok());
    if plan.compare_limit {
        let ok = matches!(r.limit, Some(Ok(_)));
        out.push(check("limit_run_completed", ok as u8 as f64, 1.0, ok));
        let errs: Vec<f64> = r.outcomes.iter().map(|o| o.comparison.map_or(f64::NAN, |c| c.n)).collect();
        if a.limit_monotone {
            let ok = monotone_decreasing(&errs);
            out.push(check("limit_error_decreasing", ok as u8 as f64, 1.0, ok));
        }
        if let Some(sc) = &r.self_convergence {
            let last = *errs.last().unwrap_or(&f64::NAN);
            match sc {
                Ok(sc) => {
                    let bound = a.self_convergence_factor * sc.estimate;
                    out.push(check("limit_error_within_self_convergence", last, bound, last <= bound));
                }
                Err(_) => out.push(check("limit_error_within_self_convergence", last, f64::NAN, false)),
            }
        }
    }
    let mut min_field = summaries.iter().flat_map(|s| s.min_fields).fold(f64::INFINITY, f64::min);
    if let Some(l) = limit {
        min_field = min_field.min(l.min_fields[0]).min(l.min_fields[1]);
    }
    out.push(check("nonnegative", min_field, 0.0, min_field >= 0.0));
    let mut violations = summaries.iter().map(|s| s.mass.violations).sum::<usize>();
    if let Some(l) = limit {
        violations += l.mass.violations;
    }
    out.push(check("mass_inequality", violations as f64, 0.0, violations == 0));
    let d_min = summaries.iter().map(|s| s.dissipation_beta0_min).fold(f64::INFINITY, f64::min);
    let d_tol = -1e-12 * summaries.iter().map(|s| s.energy_max.abs()).fold(1.0, f64::max);
    out.push(check("dissipation_beta0_nonnegative", d_min, d_tol, d_min >= d_tol));
    let mut max_n = summaries.iter().map(|s| s.max_n).fold(f64::NEG_INFINITY, f64::max);
    if let Some(l) = limit {
        max_n = max_n.max(l.max_n);
    }
    let bound = r.initial_max_n.max(1.0 / plan.base.eta) + 1e-10;
    out.push(check("max_principle", max_n, bound, max_n <= bound));
    out
}

fn eps_label(eps: f64) -> String {
    format!("{eps:e}")
}

fn kv(rows: &[(&str, String)]) -> String {
    let mut s = String::from("key,value\n");
    for (k, v) in rows {
        s.push_str(&format!("{k},{v}\n"));
    }
    s
}

/// `key,value` summary of a rate fit; `intercept` is the natural-log intercept.
pub fn rate_summary_csv(rate: &RateReport, norm_exponent: Option<f64>) -> String {
    let (hi, lo) = rate.fit_range();
    let mut rows = Vec::new();
    if let Some(e) = norm_exponent {
        rows.push(("norm_exponent", fmt_f64(e)));
    }
    rows.extend([
        ("slope", fmt_f64(rate.slope)),
        ("intercept", fmt_f64(rate.intercept)),
        ("r_squared", fmt_f64(rate.r_squared)),
        ("plateau_detected", rate.plateau_detected.to_string()),
        ("points_used", rate.used.len().to_string()),
        ("fit_eps_max", fmt_f64(hi)),
        ("fit_eps_min", fmt_f64(lo)),
    ]);
    kv(&rows)
}

/// `eps,residual,used` rows of a rate fit, ε descending.
pub fn rate_samples_csv(rate: &RateReport) -> String {
    let mut s = String::from("eps,residual,used\n");
    for (i, (e, r)) in rate.samples.iter().enumerate() {
        s.push_str(&format!("{},{},{}\n", fmt_f64(*e), fmt_f64(*r), rate.used.contains(&i)));
    }
    s
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn sanitize(msg: &str) -> String {
    msg.replace([',', '\n', '"'], ";")
}

/// Writes all CSV/SVG artifacts of `report` below `dir`; returns the written paths.
pub fn write_sweep(report: &SweepReport, plan: &ExperimentPlan, dir: &Path) -> Result<Vec<PathBuf>, SweepError> {
    let mut written = Vec::new();
    let mut put = |rel: &str, contents: String| -> Result<(), SweepError> {
        let p = dir.join(rel);
        write_atomic(&p, &contents)?;
        written.push(p);
        Ok(())
    };

    let mut sweep = String::from(
        "eps,status,residual,residual_l2,residual_l43,max_N,min_N,min_ps,min_ph,mass_violations,energy_initial,energy_excess,dissipation_beta0_min,dissipation_beta_sign_failures,abs_dN_dt,signed_dN_dt,steps,message\n",
    );
    for o in &report.outcomes {
        match &o.result {
            Ok(s) => sweep.push_str(&format!(
                "{},ok,{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},\n",
                fmt_f64(o.eps),
                opt(o.residual),
                fmt_f64(s.residual_l2),
                fmt_f64(s.residual_l43),
                fmt_f64(s.max_n),
                fmt_f64(s.min_fields[0]),
                fmt_f64(s.min_fields[1]),
                fmt_f64(s.min_fields[2]),
                s.mass.violations,
                fmt_f64(s.energy_initial),
                fmt_f64(s.energy_excess),
                fmt_f64(s.dissipation_beta0_min),
                s.dissipation_beta_sign_failures,
                fmt_f64(s.abs_dn_dt),
                fmt_f64(s.signed_dn_dt),
                s.steps
            )),
            Err(e) => sweep.push_str(&format!("{},failed,,,,,,,,,,,,,,,,{}\n", fmt_f64(o.eps), sanitize(e))),
        }
    }
    put("sweep.csv", sweep)?;

    let mut rates = String::from("eps,residual,used\n");
    if let Ok(rate) = &report.rate {
        rates = rate_samples_csv(rate);
        put("rate_summary.csv", rate_summary_csv(rate, Some(report.residual_exponent)))?;
        let title = format!("slow-manifold residual, L^{:.3} norm, xi = {}", report.residual_exponent, report.xi);
        put("rates.svg", rate_plot(rate, &title).map_err(|e| SweepError::Compare(e.to_string()))?)?;
    } else {
        for o in &report.outcomes {
            if let Some(r) = o.residual {
                rates.push_str(&format!("{},{},false\n", fmt_f64(o.eps), fmt_f64(r)));
            }
        }
    }
    put("rates.csv", rates)?;

    let series: Vec<Series> = report
        .outcomes
        .iter()
        .filter(|o| o.result.is_ok())
        .map(|o| Series {
            label: format!("eps = {}", eps_label(o.eps)),
            points: o
                .rows
                .iter()
                .filter(|r| r.name == "residual_l2_sq" && r.value > 0.0)
                .map(|r| (r.t, r.value.sqrt()))
                .collect(),
        })
        .filter(|s| s.points.len() >= 2)
        .collect();
    if !series.is_empty() {
        let svg = series_plot(&series, "spatial L2 norm of the slow-manifold residual", "t", "residual", true)
            .map_err(|e| SweepError::Compare(e.to_string()))?;
        put("residual_series.svg", svg)?;
    }

    if plan.compare_limit {
        let mut cmp = String::from("eps,N_l2,P_l2,ph_phi_l2\n");
        for o in &report.outcomes {
            match o.comparison {
                Some(c) => cmp.push_str(&format!("{},{},{},{}\n", fmt_f64(o.eps), fmt_f64(c.n), fmt_f64(c.p), fmt_f64(c.ph))),
                None => cmp.push_str(&format!("{},,,\n", fmt_f64(o.eps))),
            }
        }
        put("comparison.csv", cmp)?;
    }
    if let Some(sc) = &report.self_convergence {
        let rows = match sc {
            Ok(sc) => vec![
                ("fast_eps", fmt_f64(sc.fast_eps)),
                ("fast_difference", fmt_f64(sc.fast_difference)),
                ("limit_difference", fmt_f64(sc.limit_difference)),
                ("richardson_factor", fmt_f64(RICHARDSON_FACTOR)),
                ("estimate", fmt_f64(sc.estimate)),
            ],
            Err(e) => vec![("error", sanitize(e))],
        };
        put("self_convergence.csv", kv(&rows))?;
    }
    if let Some((input, result)) = &report.duality {
        let mut rows = vec![
            ("c_mr", fmt_f64(input.c_mr)),
            ("q0_prime", fmt_f64(input.q0_prime)),
            ("provenance", sanitize(&input.provenance)),
        ];
        match result {
            Ok(d) => {
                rows.push(("q0", fmt_f64(d.q0)));
                rows.push(("ratio", fmt_f64(d.ratio)));
                rows.push(("margin", fmt_f64(d.margin)));
                rows.push(("holds", d.holds.to_string()));
            }
            Err(e) => rows.push(("error", sanitize(e))),
        }
        put("duality.csv", kv(&rows))?;
    }
    let mut acc = String::from("check,value,threshold,passed\n");
    for c in &report.checks {
        acc.push_str(&format!("{},{},{},{}\n", c.name, fmt_f64(c.value), fmt_f64(c.threshold), c.passed));
    }
    put("acceptance.csv", acc)?;

    for o in &report.outcomes {
        let sub = format!("eps_{}", eps_label(o.eps));
        put(&format!("{sub}/diagnostics.csv"), diagnostics_csv(&o.rows))?;
        if let Some(st) = &o.final_state {
            put(&format!("{sub}/final.csv"), write_snapshot(st, &report.base.with_eps(o.eps)))?;
        }
    }
    if plan.compare_limit {
        put("limit/diagnostics.csv", diagnostics_csv(&report.limit_rows))?;
        if let Some(st) = &report.limit_final {
            put("limit/final.csv", write_snapshot(st, &report.base.with_eps(plan.eps_min())))?;
        }
    }
    Ok(written)
}
