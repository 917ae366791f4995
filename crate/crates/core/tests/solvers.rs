use fastlim_core::diagnostics::weak::mass_balance_defect;
use fastlim_core::diagnostics::{weak_residual_with, TimeTest};
use fastlim_core::io::{load_config, load_plan};
use fastlim_core::{
    integrate_fast, integrate_limit, limit_rhs, run_sweep, step_fast, write_sweep, Exchange, FastState, Field, Grid,
    InitialData, LimitState, Parameters, PredatorInit, Profile, SolverConfig, Trajectory,
};
use std::path::Path;

// Reference ODE right-hand sides, written out from the model equations.

fn fast_ode(u: [f64; 3], prm: &Parameters) -> [f64; 3] {
    let [n, ps, ph] = u;
    let a = prm.alpha * ps / (prm.xi * ps + 1.0);
    let exchange = (a * n - prm.gamma * ph) / prm.eps;
    [
        prm.r0 * (1.0 - prm.eta * n) * n - a * n,
        -exchange - prm.mu * ps + prm.big_gamma * ph,
        exchange - prm.mu * ph,
    ]
}

/// Handling predators on the manifold by bisection of `α(P - h)N/(ξ(P - h) + 1) = γh`.
fn manifold(n: f64, p: f64, prm: &Parameters) -> f64 {
    let g = |h: f64| prm.alpha * (p - h) * n / (prm.xi * (p - h) + 1.0) - prm.gamma * h;
    let (mut lo, mut hi) = (0.0, p);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn limit_ode(u: [f64; 2], prm: &Parameters) -> [f64; 2] {
    let [n, p] = u;
    let h = manifold(n, p, prm);
    let ps = p - h;
    [
        prm.r0 * (1.0 - prm.eta * n) * n - prm.alpha * ps / (prm.xi * ps + 1.0) * n,
        prm.big_gamma * h - prm.mu * p,
    ]
}

fn rk4<const D: usize>(mut u: [f64; D], t_end: f64, steps: usize, f: impl Fn([f64; D]) -> [f64; D]) -> [f64; D] {
    let h = t_end / steps as f64;
    let axpy = |u: [f64; D], k: [f64; D], c: f64| std::array::from_fn(|i| u[i] + c * k[i]);
    for _ in 0..steps {
        let k1 = f(u);
        let k2 = f(axpy(u, k1, 0.5 * h));
        let k3 = f(axpy(u, k2, 0.5 * h));
        let k4 = f(axpy(u, k3, h));
        u = std::array::from_fn(|i| u[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    u
}

/// RK4 result with its own step-halving error check.
fn oracle<const D: usize>(u0: [f64; D], t_end: f64, f: impl Fn([f64; D]) -> [f64; D] + Copy) -> [f64; D] {
    let coarse = rk4(u0, t_end, 50_000, f);
    let fine = rk4(u0, t_end, 100_000, f);
    let gap = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-10, "oracle not converged: {gap:e}");
    fine
}

fn params(xi: f64, eps: f64) -> Parameters {
    Parameters { xi, eps, ..Parameters::default() }
}

fn constant_fast(grid: Grid, n: f64, p: f64, prm: &Parameters) -> FastState {
    let ph = manifold(n, p, prm);
    FastState { t: 0.0, n: Field::constant(grid, n), ps: Field::constant(grid, p - ph), ph: Field::constant(grid, ph) }
}

fn spread(f: &Field) -> f64 {
    f.max() - f.min()
}

fn max_diff(a: &Field, b: &Field) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn fast_final(init: &FastState, cfg: &SolverConfig, prm: &Parameters) -> FastState {
    integrate_fast(init.clone(), cfg, prm, &mut []).unwrap().last().unwrap().clone()
}

fn limit_final(init: &LimitState, cfg: &SolverConfig, prm: &Parameters) -> LimitState {
    integrate_limit(init.clone(), cfg, prm, &mut []).unwrap().last().unwrap().clone()
}

fn fast_state_error(st: &FastState, want: [f64; 3]) -> f64 {
    [&st.n, &st.ps, &st.ph]
        .iter()
        .zip(want)
        .map(|(f, w)| f.values().iter().map(|v| (v - w).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

fn default_data() -> InitialData {
    InitialData {
        prey: Profile::cosine(0.5, 0.3, 1),
        predators: PredatorInit::Manifold { total: Profile::cosine(0.8, 0.2, 2) },
    }
}

#[test]
fn fast_constant_data_matches_ode_oracle() {
    let g = Grid::new_1d(1.0, 8).unwrap();
    for xi in [1.0, 0.0] {
        let prm = params(xi, 1e-2);
        let init = constant_fast(g, 0.6, 0.9, &prm);
        let want = oracle([0.6, 0.9 - manifold(0.6, 0.9, &prm), manifold(0.6, 0.9, &prm)], 1.0, |u| fast_ode(u, &prm));

        // Exact-flow exchange: second order, meets the tolerance at the default step.
        let cfg = SolverConfig { exchange: Exchange::ExactFlow, ..Default::default() };
        let st = fast_final(&init, &cfg, &prm);
        let err = fast_state_error(&st, want);
        println!("xi = {xi}: exact flow, dt = {}: error {err:.3e}", cfg.dt);
        assert!(err <= 1e-6, "exact flow error {err:e}");
        // Diffusion is inert on constant data; only Thomas-solve round-off accumulates.
        let sp = spread(&st.n) + spread(&st.ps) + spread(&st.ph);
        println!("xi = {xi}: spatial spread {sp:.3e}");
        assert!(sp <= 1e-11, "spread {sp:e}");

        // Backward-Euler exchange is first order and needs a 128 times smaller step.
        let cfg = SolverConfig { dt: 2e-4 / 128.0, output_stride: 10_000, ..Default::default() };
        let err = fast_state_error(&fast_final(&init, &cfg, &prm), want);
        println!("xi = {xi}: backward Euler, dt = {:.3e}: error {err:.3e}", cfg.dt);
        assert!(err <= 1e-6, "backward Euler error {err:e}");
    }
}

#[test]
fn limit_constant_data_matches_ode_oracle() {
    let g = Grid::new_1d(1.0, 8).unwrap();
    for xi in [1.0, 0.0] {
        let prm = params(xi, 1e-3);
        let init = LimitState { t: 0.0, n: Field::constant(g, 0.6), p: Field::constant(g, 0.9) };
        let want = oracle([0.6, 0.9], 1.0, |u| limit_ode(u, &prm));
        let st = limit_final(&init, &SolverConfig::default(), &prm);
        let err = max_diff(&st.n, &Field::constant(g, want[0])).max(max_diff(&st.p, &Field::constant(g, want[1])));
        println!("xi = {xi}: limit error {err:.3e}");
        assert!(err <= 1e-6, "limit error {err:e}");
        let sp = spread(&st.n) + spread(&st.p);
        println!("xi = {xi}: spatial spread {sp:.3e}");
        assert!(sp <= 1e-11, "spread {sp:e}");
    }
}

/// Ratio of successive final-state differences under dt halving.
fn fast_halving_ratio(exchange: Exchange) -> f64 {
    let g = Grid::new_1d(1.0, 32).unwrap();
    let prm = params(1.0, 1e-2);
    let init = default_data().fast_state(&g, &prm, 0).unwrap();
    let run = |dt: f64| {
        let cfg = SolverConfig { dt, t_end: 0.2, exchange, output_stride: 1000, ..Default::default() };
        fast_final(&init, &cfg, &prm)
    };
    let (a, b, c) = (run(2e-3), run(1e-3), run(5e-4));
    let d = |x: &FastState, y: &FastState| max_diff(&x.n, &y.n).max(max_diff(&x.ps, &y.ps)).max(max_diff(&x.ph, &y.ph));
    d(&a, &b) / d(&b, &c)
}

#[test]
fn fast_dt_halving_ratio_matches_exchange_order() {
    let flow = fast_halving_ratio(Exchange::ExactFlow);
    let euler = fast_halving_ratio(Exchange::BackwardEuler);
    println!("dt-halving ratio: exact flow {flow:.3}, backward Euler {euler:.3}");
    assert!((3.5..4.5).contains(&flow), "exact flow ratio {flow}");
    assert!((1.7..2.3).contains(&euler), "backward Euler ratio {euler}");
}

#[test]
fn limit_dt_halving_ratio_is_second_order() {
    let g = Grid::new_1d(1.0, 32).unwrap();
    let prm = params(1.0, 1e-3);
    let init = default_data().limit_state(&g, &prm, 0).unwrap();
    let run = |dt: f64| limit_final(&init, &SolverConfig { dt, t_end: 0.2, output_stride: 1000, ..Default::default() }, &prm);
    let (a, b, c) = (run(2e-3), run(1e-3), run(5e-4));
    let d = |x: &LimitState, y: &LimitState| max_diff(&x.n, &y.n).max(max_diff(&x.p, &y.p));
    let ratio = d(&a, &b) / d(&b, &c);
    println!("limit dt-halving ratio {ratio:.3}");
    assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn eps_uniform_stability() {
    let g = Grid::new_1d(1.0, 64).unwrap();
    let cfg = SolverConfig { t_end: 0.5, output_stride: 100, ..Default::default() };
    for xi in [1.0, 0.0] {
        for k in 1..=6 {
            let prm = params(xi, 10f64.powi(-k));
            let init = default_data().fast_state(&g, &prm, 0).unwrap();
            let traj = integrate_fast(init, &cfg, &prm, &mut []).unwrap_or_else(|e| panic!("xi = {xi}, eps = {}: {e}", prm.eps));
            for s in &traj.snapshots {
                assert!(s.n.min() >= 0.0 && s.ps.min() >= 0.0 && s.ph.min() >= 0.0);
                assert!(s.n.max() <= 1.0 + 1e-10);
            }
        }
    }
}

#[test]
fn predator_free_data_stays_predator_free() {
    let g = Grid::new_1d(1.0, 16).unwrap();
    let prm = Parameters::default();
    let cfg = SolverConfig { t_end: 0.5, output_stride: 50, ..Default::default() };
    let zero = Field::zeros(g);

    let logistic = |n0: f64, t: f64| n0 * (prm.r0 * t).exp() / (1.0 + prm.eta * n0 * ((prm.r0 * t).exp() - 1.0));
    let want = Field::constant(g, logistic(0.3, 0.5));

    let fast = FastState { t: 0.0, n: Field::constant(g, 0.3), ps: zero.clone(), ph: zero.clone() };
    let st = fast_final(&fast, &cfg, &prm);
    assert!(st.ps.values().iter().chain(st.ph.values()).all(|&v| v == 0.0));
    assert!(max_diff(&st.n, &want) <= 1e-6, "fast logistic error {:e}", max_diff(&st.n, &want));

    let limit = LimitState { t: 0.0, n: Field::constant(g, 0.3), p: zero.clone() };
    let st = limit_final(&limit, &cfg, &prm);
    assert!(st.p.values().iter().all(|&v| v == 0.0));
    assert!(max_diff(&st.n, &want) <= 1e-6, "limit logistic error {:e}", max_diff(&st.n, &want));

    // Nonuniform prey: predators stay absent and both solvers evolve the same equation.
    let n0 = Field::from_fn(g, |x| 0.5 + 0.3 * (std::f64::consts::PI * x[0]).cos());
    let a = fast_final(&FastState { t: 0.0, n: n0.clone(), ps: zero.clone(), ph: zero.clone() }, &cfg, &prm);
    let b = limit_final(&LimitState { t: 0.0, n: n0, p: zero }, &cfg, &prm);
    assert!(a.ps.max() == 0.0 && a.ph.max() == 0.0 && b.p.max() == 0.0);
    assert!(max_diff(&a.n, &b.n) <= 1e-6, "fast vs limit prey {:e}", max_diff(&a.n, &b.n));
}

#[test]
fn reduced_predator_equation_assembly_is_bit_identical() {
    let g = Grid::new_1d(1.0, 24).unwrap();
    let prm = Parameters { xi: 0.0, d2: 0.1, d3: 0.1, ..Parameters::default() };
    let n = Field::from_fn(g, |x| 0.5 + 0.3 * (3.0 * x[0]).cos());
    let p = Field::from_fn(g, |x| 0.4 + 0.1 * (5.0 * x[0]).sin());
    let (_, rp) = limit_rhs(&LimitState { t: 0.0, n: n.clone(), p: p.clone() }, &prm);

    let (nv, pv) = (n.values(), p.values());
    let len = pv.len();
    let ih2 = 1.0 / (g.h(0) * g.h(0));
    for i in 0..len {
        let left = pv[i.saturating_sub(1)];
        let right = pv[(i + 1).min(len - 1)];
        let lap = (left - 2.0 * pv[i] + right) * ih2;
        let reduced = prm.d2 * lap
            + (prm.big_gamma * (prm.alpha * nv[i] * pv[i] / (prm.alpha * nv[i] + prm.gamma)) - prm.mu * pv[i]);
        assert_eq!(rp[i], reduced, "cell {i}");
    }
}

#[test]
fn step_counts_and_snapshot_strides() {
    let g = Grid::new_1d(1.0, 8).unwrap();
    let prm = Parameters::default();
    let fast = default_data().fast_state(&g, &prm, 0).unwrap();
    let limit = default_data().limit_state(&g, &prm, 0).unwrap();

    let one = SolverConfig { dt: 1e-3, t_end: 1e-3, ..Default::default() };
    let tf = integrate_fast(fast.clone(), &one, &prm, &mut []).unwrap();
    let tl = integrate_limit(limit.clone(), &one, &prm, &mut []).unwrap();
    assert_eq!((tf.steps, tf.len()), (1, 2));
    assert_eq!((tl.steps, tl.len()), (1, 2));
    assert_eq!(tf.last().unwrap(), &step_fast(&fast, &one, &prm).unwrap());

    let wide = SolverConfig { dt: 1e-3, t_end: 1e-2, output_stride: 1000, ..Default::default() };
    let tf = integrate_fast(fast, &wide, &prm, &mut []).unwrap();
    let tl = integrate_limit(limit, &wide, &prm, &mut []).unwrap();
    assert_eq!((tf.steps, tf.len()), (10, 2));
    assert_eq!((tl.steps, tl.len()), (10, 2));
    assert!((tf.times()[1] - 1e-2).abs() < 1e-15 && (tl.times()[1] - 1e-2).abs() < 1e-15);
}

#[test]
fn zero_state_stays_zero() {
    let g = Grid::new_2d([1.0, 1.0], [6, 5]).unwrap();
    let cfg = SolverConfig { dt: 1e-3, t_end: 1e-2, ..Default::default() };
    let st = fast_final(&FastState::zeros(g), &cfg, &Parameters::default());
    assert!(st.n.values().iter().chain(st.ps.values()).chain(st.ph.values()).all(|&v| v == 0.0));
}

#[test]
fn closed_predator_mass_is_conserved() {
    let g = Grid::new_2d([1.0, 1.5], [12, 10]).unwrap();
    let prm = Parameters { alpha: 0.0, mu: 0.0, big_gamma: 0.0, eps: 1e-4, ..Parameters::default() };
    let init = InitialData {
        prey: Profile::cosine(0.5, 0.3, 1),
        predators: PredatorInit::Explicit { ps: Profile::cosine(0.6, 0.3, 1), ph: Profile::cosine(0.4, 0.2, 2) },
    }
    .fast_state(&g, &prm, 0)
    .unwrap();
    let mass = |s: &FastState| s.total_predators().iter().sum::<f64>() * g.cell_volume();
    let m0 = mass(&init);
    let traj = integrate_fast(init, &SolverConfig { dt: 1e-3, t_end: 0.2, ..Default::default() }, &prm, &mut []).unwrap();
    for s in &traj.snapshots {
        assert!((mass(s) - m0).abs() <= 1e-12 * m0, "drift {:e}", (mass(s) - m0).abs() / m0);
    }
}

#[test]
fn constant_time_weak_residual_is_the_mass_defect() {
    let g = Grid::new_1d(1.0, 32).unwrap();
    let prm = Parameters::default();
    let init = default_data().limit_state(&g, &prm, 0).unwrap();
    let traj = integrate_limit(init, &SolverConfig { dt: 1e-3, t_end: 0.5, output_stride: 5, ..Default::default() }, &prm, &mut [])
        .unwrap();
    let (dn, dp) = mass_balance_defect(&traj, &prm).unwrap();
    let w = weak_residual_with(&traj, &prm, 0, TimeTest::Constant).unwrap();
    let scale = (g.volume() * 0.5).sqrt();
    assert!((w.n - dn.abs() / scale).abs() <= 1e-12 * (1.0 + w.n));
    assert!((w.p - dp.abs() / scale).abs() <= 1e-12 * (1.0 + w.p));
}

#[test]
fn repeated_runs_are_bit_identical() {
    let g = Grid::new_2d([1.0, 1.0], [10, 8]).unwrap();
    let prm = params(1.0, 1e-3);
    let init = default_data().fast_state(&g, &prm, 0).unwrap();
    let cfg = SolverConfig { dt: 1e-3, t_end: 0.05, output_stride: 5, ..Default::default() };
    let bits = |t: &Trajectory<FastState>| -> Vec<u64> {
        t.snapshots
            .iter()
            .flat_map(|s| s.n.values().iter().chain(s.ps.values()).chain(s.ph.values()).map(|v| v.to_bits()).collect::<Vec<_>>())
            .collect()
    };
    let a = integrate_fast(init.clone(), &cfg, &prm, &mut []).unwrap();
    let b = integrate_fast(init, &cfg, &prm, &mut []).unwrap();
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["default_xi1.toml", "default_xi0.toml"] {
        let plan = load_plan(&root.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(plan.eps.len() >= 3, "{name}");
        assert!(plan.compare_limit && plan.self_convergence, "{name}");
    }
    for name in ["run_fast.toml", "run_limit.toml"] {
        load_config(&root.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn sweep_writes_expected_files() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut plan = load_plan(&root.join("default_xi0.toml")).unwrap();
    plan.eps = vec![1e-1, 1e-2, 1e-3];
    plan.grid = Grid::new_1d(1.0, 16).unwrap();
    plan.solver = SolverConfig { dt: 1e-3, t_end: 0.05, output_stride: 5, ..plan.solver };
    let report = run_sweep(&plan, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let written = write_sweep(&report, &plan, dir.path()).unwrap();
    for p in &written {
        assert!(p.is_file(), "{}", p.display());
    }
    let header = |rel: &str| std::fs::read_to_string(dir.path().join(rel)).unwrap().lines().next().unwrap().to_string();
    assert!(header("sweep.csv").starts_with("eps,status,residual,"));
    assert_eq!(header("rates.csv"), "eps,residual,used");
    assert_eq!(header("comparison.csv"), "eps,N_l2,P_l2,ph_phi_l2");
    assert_eq!(header("acceptance.csv"), "check,value,threshold,passed");
    assert_eq!(header("limit/diagnostics.csv"), "t,name,value");
    for rel in ["rate_summary.csv", "self_convergence.csv", "duality.csv", "rates.svg", "limit/final.csv"] {
        assert!(dir.path().join(rel).is_file(), "{rel}");
    }
    let eps_dirs = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("eps_"))
        .count();
    assert_eq!(eps_dirs, 3);
}
