//! `fastlim`: sweeps, single runs and rate fits from the command line.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use fastlim_core::diagnostics::{fit_rate, DiagnosticRow, FastMonitor, LimitMonitor};
use fastlim_core::io::csv::{diagnostics_csv, fmt_f64, read_rate_samples, write_atomic};
use fastlim_core::io::{load_config, load_plan, rate_plot, write_snapshot, RunConfig};
use fastlim_core::sweep::{rate_samples_csv, rate_summary_csv, residual_exponent, run_sweep, write_sweep};
use fastlim_core::{integrate_fast, integrate_limit, State, Trajectory};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fastlim", version, about = "Fast-reaction predator-prey solver and convergence harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an ε-sweep; exits 0 iff every acceptance check passes.
    Sweep {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: FASTLIM_THREADS, then the number of cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Integrate the three-field fast system.
    RunFast {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the two-field limit system.
    RunLimit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a log-log rate to the `eps` and `residual` columns of a CSV file.
    Rates {
        #[arg(long = "in")]
        input: PathBuf,
        /// Output directory (default: next to the input).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Keep points on the small-ε plateau.
        #[arg(long)]
        keep_plateau: bool,
    },
}

fn job_count(flag: Option<usize>) -> Result<usize> {
    if let Some(j) = flag {
        if j == 0 {
            bail!("--jobs must be at least 1");
        }
        return Ok(j);
    }
    match std::env::var("FASTLIM_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(j) if j > 0 => Ok(j),
            _ => bail!("FASTLIM_THREADS must be a positive integer, got {v:?}"),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn sweep(plan_path: &Path, out: Option<PathBuf>, jobs: Option<usize>) -> Result<bool> {
    let plan = load_plan(plan_path)?;
    for w in &plan.warnings {
        eprintln!("warning: {w}");
    }
    let dir = out.unwrap_or_else(|| plan.output_dir.clone());
    let jobs = job_count(jobs)?;
    let report = run_sweep(&plan, jobs)?;
    write_sweep(&report, &plan, &dir)?;
    for o in &report.outcomes {
        match (&o.result, o.residual) {
            (Ok(_), Some(r)) => println!("eps {:e}: residual {}", o.eps, fmt_f64(r)),
            (Err(e), _) => println!("eps {:e}: FAILED ({e})", o.eps),
            _ => {}
        }
    }
    match &report.rate {
        Ok(r) => println!("slope {:.4} (r^2 {:.4}, {} points)", r.slope, r.r_squared, r.used.len()),
        Err(e) => println!("rate fit failed: {e}"),
    }
    if let Some((input, result)) = &report.duality {
        match result {
            Ok(d) => println!(
                "duality: ratio {:.4} vs 1/c_mr {:.4} -> {} (c_mr from: {})",
                d.ratio,
                1.0 / d.c_mr,
                if d.holds { "holds" } else { "fails" },
                input.provenance
            ),
            Err(e) => println!("duality: {e}"),
        }
    }
    for c in &report.checks {
        println!("{} {}: {:e} (threshold {:e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
    }
    println!("outputs in {}", dir.display());
    Ok(report.passed())
}

fn filtered(rows: Vec<DiagnosticRow>, cfg: &RunConfig) -> Vec<DiagnosticRow> {
    rows.into_iter().filter(|r| cfg.diagnostics.subscriptions.iter().any(|s| s.covers(r.name))).collect()
}

fn write_run<S: State>(dir: &Path, traj: &Trajectory<S>, cfg: &RunConfig, rows: Vec<DiagnosticRow>, summary: &[(&str, String)]) -> Result<()> {
    write_atomic(&dir.join("diagnostics.csv"), &diagnostics_csv(&filtered(rows, cfg)))?;
    if cfg.output.snapshots {
        for (k, s) in traj.snapshots.iter().enumerate() {
            write_atomic(&dir.join(format!("snapshots/snap_{k:05}.csv")), &write_snapshot(s, &cfg.parameters))?;
        }
    }
    if let Some(last) = traj.last() {
        write_atomic(&dir.join("final.csv"), &write_snapshot(last, &cfg.parameters))?;
    }
    let mut text = String::from("key,value\n");
    for (k, v) in summary {
        text.push_str(&format!("{k},{v}\n"));
    }
    write_atomic(&dir.join("summary.csv"), &text)?;
    Ok(())
}

fn load_run(path: &Path, out: Option<PathBuf>) -> Result<(RunConfig, PathBuf)> {
    let cfg = load_config(path)?;
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    let dir = out.unwrap_or_else(|| cfg.output.directory.clone());
    Ok((cfg, dir))
}

fn run_fast(path: &Path, out: Option<PathBuf>) -> Result<()> {
    let (cfg, dir) = load_run(path, out)?;
    let prm = cfg.parameters;
    let init = cfg.initial.fast_state(&cfg.grid, &prm, cfg.seed)?;
    let mut monitor = FastMonitor::new(&prm, cfg.diagnostics.norm_start)?
        .with_rows()
        .energy_every(cfg.diagnostics.energy_every);
    let traj = integrate_fast(init, &cfg.solver, &prm, &mut [&mut monitor]).map_err(|e| e.error)?;
    let s = monitor.summary();
    let norm = if residual_exponent(prm.xi) == 2.0 { s.residual_l2 } else { s.residual_l43 };
    println!("{} steps, residual {} (L^{:.3}), max N {}", s.steps, fmt_f64(norm), residual_exponent(prm.xi), fmt_f64(s.max_n));
    let summary = [
        ("steps", s.steps.to_string()),
        ("residual_l2", fmt_f64(s.residual_l2)),
        ("residual_l43", fmt_f64(s.residual_l43)),
        ("max_N", fmt_f64(s.max_n)),
        ("min_N", fmt_f64(s.min_fields[0])),
        ("min_ps", fmt_f64(s.min_fields[1])),
        ("min_ph", fmt_f64(s.min_fields[2])),
        ("beta", fmt_f64(s.beta)),
        ("p_energy", fmt_f64(s.p)),
        ("energy_initial", fmt_f64(s.energy_initial)),
        ("energy_max", fmt_f64(s.energy_max)),
        ("energy_excess", fmt_f64(s.energy_excess)),
        ("dissipation_beta0_min", fmt_f64(s.dissipation_beta0_min)),
        ("dissipation_beta_sign_failures", s.dissipation_beta_sign_failures.to_string()),
        ("mass_inequality_violations", s.mass.violations.to_string()),
        ("predator_mass_drift", fmt_f64(s.predator_mass_drift)),
        ("abs_dN_dt", fmt_f64(s.abs_dn_dt)),
        ("signed_dN_dt", fmt_f64(s.signed_dn_dt)),
    ];
    let rows = monitor.take_rows();
    write_run(&dir, &traj, &cfg, rows, &summary)?;
    println!("outputs in {}", dir.display());
    Ok(())
}

fn run_limit(path: &Path, out: Option<PathBuf>) -> Result<()> {
    let (cfg, dir) = load_run(path, out)?;
    let prm = cfg.parameters;
    let init = cfg.initial.limit_state(&cfg.grid, &prm, cfg.seed)?;
    let mut monitor = LimitMonitor::new(&prm).with_rows();
    let traj = integrate_limit(init, &cfg.solver, &prm, &mut [&mut monitor]).map_err(|e| e.error)?;
    let s = monitor.summary();
    println!("{} steps, max N {}, min P {}", s.steps, fmt_f64(s.max_n), fmt_f64(s.min_fields[1]));
    let summary = [
        ("steps", s.steps.to_string()),
        ("max_N", fmt_f64(s.max_n)),
        ("min_N", fmt_f64(s.min_fields[0])),
        ("min_P", fmt_f64(s.min_fields[1])),
        ("searching_deficit", fmt_f64(s.searching_deficit)),
        ("mass_inequality_violations", s.mass.violations.to_string()),
        ("abs_dN_dt", fmt_f64(s.abs_dn_dt)),
        ("signed_dN_dt", fmt_f64(s.signed_dn_dt)),
    ];
    let rows = monitor.take_rows();
    write_run(&dir, &traj, &cfg, rows, &summary)?;
    println!("outputs in {}", dir.display());
    Ok(())
}

fn rates(input: &Path, out: Option<PathBuf>, keep_plateau: bool) -> Result<()> {
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let samples = read_rate_samples(&text)?;
    let report = fit_rate(&samples, !keep_plateau)?;
    let dir = out.unwrap_or_else(|| input.parent().map(Path::to_path_buf).unwrap_or_default());
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("rates");
    write_atomic(&dir.join(format!("{stem}_fit.csv")), &rate_summary_csv(&report, None))?;
    write_atomic(&dir.join(format!("{stem}_used.csv")), &rate_samples_csv(&report))?;
    write_atomic(&dir.join(format!("{stem}.svg")), &rate_plot(&report, &format!("rate fit: {stem}"))?)?;
    println!(
        "slope {} intercept {} r^2 {} ({} of {} points{})",
        fmt_f64(report.slope),
        fmt_f64(report.intercept),
        fmt_f64(report.r_squared),
        report.used.len(),
        report.samples.len(),
        if report.plateau_detected { ", plateau dropped" } else { "" }
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep { plan, out, jobs } => sweep(&plan, out, jobs),
        Command::RunFast { config, out } => run_fast(&config, out).map(|_| true),
        Command::RunLimit { config, out } => run_limit(&config, out).map(|_| true),
        Command::Rates { input, out, keep_plateau } => rates(&input, out, keep_plateau).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
