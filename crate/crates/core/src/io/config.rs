//! TOML run configurations and experiment plans.
//!
//! Unknown keys are rejected, duplicate keys are reported with both line
//! numbers, and validation errors name the offending field and its line.

use crate::diffusion::DiffusionScheme;
use crate::grid::Grid;
use crate::initial::{InitialData, PredatorInit, Profile};
use crate::kinetics::{KineticsError, Parameters};
use crate::solver::{Exchange, SolverConfig, Splitting};
use crate::sweep::{Acceptance, DualityInput, ExperimentPlan};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{}: {message}", Line(*line))]
    Parse { line: Option<usize>, message: String },
    #[error("duplicate key `{key}` at lines {first} and {second}")]
    Duplicate { key: String, first: usize, second: usize },
    #[error("{}: {field}: {message}", Line(*line))]
    Invalid { line: Option<usize>, field: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

struct Line(Option<usize>);

impl fmt::Display for Line {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(l) => write!(f, "line {l}"),
            None => write!(f, "config"),
        }
    }
}

/// Line of each `table.key` assignment (1-based).
#[derive(Debug, Default)]
struct KeyIndex {
    lines: BTreeMap<String, usize>,
}

impl KeyIndex {
    fn line(&self, key: &str) -> Option<usize> {
        self.lines.get(key).copied()
    }

    /// Line of `key`, falling back to the line of its table header.
    fn anchor(&self, key: &str) -> Option<usize> {
        self.line(key).or_else(|| {
            let table = key.rsplit_once('.').map(|(t, _)| t)?;
            self.line(&format!("[{table}]"))
        })
    }
}

/// Removes a trailing comment and returns the bracket depth change of the
/// remaining text, ignoring brackets inside strings.
fn strip_and_depth(line: &str) -> (&str, i32) {
    let mut depth = 0;
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        if let Some(q) = quote {
            if escaped {
                escaped = false;
            } else if c == '\\' && q == '"' {
                escaped = true;
            } else if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '"' | '\'' => quote = Some(c),
            '#' => return (&line[..i], depth),
            '[' | '{' => depth += 1,
            ']' | '}' => depth -= 1,
            _ => {}
        }
    }
    (line, depth)
}

fn normalize_key(raw: &str) -> String {
    raw.split('.').map(|part| part.trim().trim_matches('"').trim_matches('\'')).collect::<Vec<_>>().join(".")
}

fn scan_keys(text: &str) -> Result<KeyIndex, ConfigError> {
    let mut index = KeyIndex::default();
    let mut prefix = String::new();
    let mut array_tables: BTreeMap<String, usize> = BTreeMap::new();
    let mut depth = 0i32;
    for (no, raw) in text.lines().enumerate() {
        let line_no = no + 1;
        let (code, delta) = strip_and_depth(raw);
        let code = code.trim();
        if depth > 0 || code.is_empty() {
            depth += delta;
            continue;
        }
        if let Some(rest) = code.strip_prefix("[[") {
            let name = normalize_key(rest.trim_end_matches(']'));
            let count = array_tables.entry(name.clone()).or_insert(0);
            prefix = format!("{name}#{count}");
            *count += 1;
            continue;
        }
        if let Some(rest) = code.strip_prefix('[') {
            let name = normalize_key(rest.trim_end_matches(']'));
            let header = format!("[{name}]");
            if let Some(first) = index.line(&header) {
                return Err(ConfigError::Duplicate { key: header, first, second: line_no });
            }
            index.lines.insert(header, line_no);
            prefix = name;
            continue;
        }
        if let Some((key, value)) = code.split_once('=') {
            let key = normalize_key(key);
            let full = if prefix.is_empty() { key } else { format!("{prefix}.{key}") };
            if let Some(first) = index.line(&full) {
                return Err(ConfigError::Duplicate { key: full, first, second: line_no });
            }
            index.lines.insert(full, line_no);
            depth += strip_and_depth(value).1;
        } else {
            depth += delta;
        }
    }
    Ok(index)
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str) -> Result<(T, KeyIndex), ConfigError> {
    let index = scan_keys(text)?;
    let value = toml::from_str::<T>(text).map_err(|e| ConfigError::Parse {
        line: e.span().map(|s| line_of_offset(text, s.start)),
        message: e.message().trim().to_string(),
    })?;
    Ok((value, index))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParametersSection {
    d1: f64,
    d2: f64,
    d3: f64,
    r0: f64,
    eta: f64,
    alpha: f64,
    xi: f64,
    gamma: f64,
    #[serde(rename = "Gamma")]
    big_gamma: f64,
    mu: f64,
    eps: Option<f64>,
    p_energy: Option<f64>,
    /// Silences the `d3 < d2` warning.
    #[serde(default)]
    allow_d3_above_d2: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    #[serde(default = "default_extent")]
    extent: Vec<f64>,
    #[serde(default = "default_cells")]
    cells: Vec<usize>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { extent: default_extent(), cells: default_cells() }
    }
}

fn default_extent() -> Vec<f64> {
    vec![1.0]
}

fn default_cells() -> Vec<usize> {
    vec![128]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    dt: Option<f64>,
    t_end: Option<f64>,
    splitting: Option<Splitting>,
    diffusion: Option<DiffusionScheme>,
    exchange: Option<Exchange>,
    output_stride: Option<usize>,
    cross_slope_bound: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct InitialSection {
    #[serde(default)]
    seed: u64,
    prey: Option<Profile>,
    #[serde(default)]
    predators: PredatorsSection,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct PredatorsSection {
    total: Option<Profile>,
    ps: Option<Profile>,
    ph: Option<Profile>,
}

/// Quantities that can be streamed to the diagnostics CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subscription {
    Residual,
    Energy,
    Masses,
    Extrema,
}

impl Subscription {
    pub const ALL: [Subscription; 4] = [Subscription::Residual, Subscription::Energy, Subscription::Masses, Subscription::Extrema];

    /// Whether the diagnostic row `name` belongs to this subscription.
    pub fn covers(&self, name: &str) -> bool {
        match self {
            Subscription::Residual => name.starts_with("residual"),
            Subscription::Energy => name.starts_with("energy") || name.starts_with("dissipation"),
            Subscription::Masses => name.ends_with("_mass"),
            Subscription::Extrema => name.starts_with("min_") || name.starts_with("max_"),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiagnosticsSection {
    subscriptions: Option<Vec<Subscription>>,
    norm_start: Option<f64>,
    energy_every: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    directory: Option<PathBuf>,
    snapshots: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    parameters: ParametersSection,
    grid: Option<GridSection>,
    solver: Option<SolverSection>,
    initial: Option<InitialSection>,
    diagnostics: Option<DiagnosticsSection>,
    output: Option<OutputSection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticSettings {
    pub subscriptions: Vec<Subscription>,
    /// Residual norms integrate only `t >= norm_start`.
    pub norm_start: f64,
    pub energy_every: usize,
}

impl Default for DiagnosticSettings {
    fn default() -> Self {
        Self { subscriptions: Subscription::ALL.to_vec(), norm_start: 0.0, energy_every: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSettings {
    pub directory: PathBuf,
    /// Write a snapshot CSV at every output stride.
    pub snapshots: bool,
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self { directory: PathBuf::from("out"), snapshots: true }
    }
}

/// A single fast or limit run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub parameters: Parameters,
    pub grid: Grid,
    pub solver: SolverConfig,
    pub initial: InitialData,
    pub seed: u64,
    pub diagnostics: DiagnosticSettings,
    pub output: OutputSettings,
    /// Non-fatal remarks (e.g. `d3 >= d2`).
    pub warnings: Vec<String>,
}

/// Default energy exponent: 2 for `xi > 0`, `1.1` for `xi = 0`.
pub fn default_energy_exponent(xi: f64) -> f64 {
    if xi > 0.0 {
        2.0
    } else {
        1.1
    }
}

fn invalid(index: &KeyIndex, key: &str, message: impl Into<String>) -> ConfigError {
    let field = key.rsplit('.').next().unwrap_or(key).to_string();
    ConfigError::Invalid { line: index.anchor(key), field, message: message.into() }
}

fn parameters(sec: &ParametersSection, eps: f64, index: &KeyIndex, warnings: &mut Vec<String>) -> Result<Parameters, ConfigError> {
    let prm = Parameters {
        d1: sec.d1,
        d2: sec.d2,
        d3: sec.d3,
        r0: sec.r0,
        eta: sec.eta,
        alpha: sec.alpha,
        xi: sec.xi,
        gamma: sec.gamma,
        big_gamma: sec.big_gamma,
        mu: sec.mu,
        eps,
        p_energy: sec.p_energy.unwrap_or_else(|| default_energy_exponent(sec.xi)),
    };
    prm.validate().map_err(|e| {
        let (name, message) = match &e {
            KineticsError::InvalidParameter { name, value, reason } => (*name, format!("{reason}, got {value}")),
            KineticsError::NonFinite { name, value } => (*name, format!("must be finite, got {value}")),
            KineticsError::Negative { name, value } => (*name, format!("must be nonnegative, got {value}")),
            KineticsError::DegenerateQuadratic => ("xi", e.to_string()),
        };
        invalid(index, &format!("parameters.{name}"), message)
    })?;
    if !sec.allow_d3_above_d2 {
        if let Some(w) = prm.diffusion_order_warning() {
            warnings.push(w);
        }
    }
    Ok(prm)
}

fn grid(sec: Option<&GridSection>, index: &KeyIndex) -> Result<Grid, ConfigError> {
    let default = GridSection::default();
    let sec = sec.unwrap_or(&default);
    Grid::new(&sec.extent, &sec.cells).map_err(|e| {
        let key = match e {
            crate::grid::GridError::Extent { .. } => "grid.extent",
            _ => "grid.cells",
        };
        invalid(index, key, e.to_string())
    })
}

fn solver(sec: Option<&SolverSection>, index: &KeyIndex) -> Result<SolverConfig, ConfigError> {
    let d = SolverConfig::default();
    let cfg = match sec {
        None => d,
        Some(s) => SolverConfig {
            dt: s.dt.unwrap_or(d.dt),
            t_end: s.t_end.unwrap_or(d.t_end),
            splitting: s.splitting.unwrap_or(d.splitting),
            diffusion: s.diffusion.unwrap_or(d.diffusion),
            exchange: s.exchange.unwrap_or(d.exchange),
            output_stride: s.output_stride.unwrap_or(d.output_stride),
            cross_slope_bound: s.cross_slope_bound.unwrap_or(d.cross_slope_bound),
        },
    };
    let checks: [(&str, bool, String); 4] = [
        ("solver.dt", cfg.dt.is_finite() && cfg.dt > 0.0, format!("must be positive, got {}", cfg.dt)),
        (
            "solver.t_end",
            cfg.t_end.is_finite() && cfg.t_end >= cfg.dt * (1.0 - 1e-12),
            format!("must be at least dt = {}, got {}", cfg.dt, cfg.t_end),
        ),
        ("solver.output_stride", cfg.output_stride > 0, "must be at least 1".to_string()),
        (
            "solver.cross_slope_bound",
            cfg.cross_slope_bound.is_finite() && cfg.cross_slope_bound > 0.0,
            format!("must be positive, got {}", cfg.cross_slope_bound),
        ),
    ];
    for (key, ok, message) in checks {
        if !ok {
            return Err(invalid(index, key, message));
        }
    }
    Ok(cfg)
}

/// Default initial data: `N = 0.5 + 0.3 cos(πx)`, `P = 0.8 + 0.2 cos(2πx)` split on the manifold.
pub fn default_initial_data() -> InitialData {
    InitialData {
        prey: Profile::cosine(0.5, 0.3, 1),
        predators: PredatorInit::Manifold { total: Profile::cosine(0.8, 0.2, 2) },
    }
}

fn initial(sec: Option<&InitialSection>, index: &KeyIndex) -> Result<(InitialData, u64), ConfigError> {
    let Some(sec) = sec else {
        return Ok((default_initial_data(), 0));
    };
    let defaults = default_initial_data();
    let prey = sec.prey.clone().unwrap_or(defaults.prey);
    let p = &sec.predators;
    let predators = match (&p.total, &p.ps, &p.ph) {
        (None, None, None) => defaults.predators,
        (Some(total), None, None) => PredatorInit::Manifold { total: total.clone() },
        (None, Some(ps), Some(ph)) => PredatorInit::Explicit { ps: ps.clone(), ph: ph.clone() },
        (Some(_), _, _) => {
            return Err(invalid(index, "initial.predators.total", "give either `total` or both `ps` and `ph`, not both"))
        }
        (None, Some(_), None) => return Err(invalid(index, "initial.predators.ps", "`ps` needs a matching `ph`")),
        (None, None, Some(_)) => return Err(invalid(index, "initial.predators.ph", "`ph` needs a matching `ps`")),
    };
    Ok((InitialData { prey, predators }, sec.seed))
}

fn diagnostics(sec: Option<&DiagnosticsSection>, index: &KeyIndex) -> Result<DiagnosticSettings, ConfigError> {
    let mut d = DiagnosticSettings::default();
    if let Some(s) = sec {
        if let Some(subs) = &s.subscriptions {
            let mut subs = subs.clone();
            subs.sort();
            subs.dedup();
            d.subscriptions = subs;
        }
        if let Some(t0) = s.norm_start {
            if !(t0.is_finite() && t0 >= 0.0) {
                return Err(invalid(index, "diagnostics.norm_start", format!("must be nonnegative, got {t0}")));
            }
            d.norm_start = t0;
        }
        if let Some(k) = s.energy_every {
            if k == 0 {
                return Err(invalid(index, "diagnostics.energy_every", "must be at least 1"));
            }
            d.energy_every = k;
        }
    }
    Ok(d)
}

fn output(sec: Option<&OutputSection>) -> OutputSettings {
    let d = OutputSettings::default();
    match sec {
        None => d,
        Some(s) => OutputSettings {
            directory: s.directory.clone().unwrap_or(d.directory),
            snapshots: s.snapshots.unwrap_or(d.snapshots),
        },
    }
}

/// Parses and validates a run configuration. Pure: paths are kept as written.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let (raw, index): (RawRun, KeyIndex) = parse_toml(text)?;
    let Some(eps) = raw.parameters.eps else {
        return Err(invalid(&index, "parameters.eps", "missing; a run needs eps"));
    };
    let mut warnings = Vec::new();
    let parameters = parameters(&raw.parameters, eps, &index, &mut warnings)?;
    let grid = grid(raw.grid.as_ref(), &index)?;
    let solver = solver(raw.solver.as_ref(), &index)?;
    let (initial, seed) = initial(raw.initial.as_ref(), &index)?;
    Ok(RunConfig {
        parameters,
        grid,
        solver,
        initial,
        seed,
        diagnostics: diagnostics(raw.diagnostics.as_ref(), &index)?,
        output: output(raw.output.as_ref()),
        warnings,
    })
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })
}

/// Resolves `dir` against `base` and checks that it exists or can be created
/// inside an existing parent.
fn resolve_dir(base: &Path, dir: &Path) -> Result<PathBuf, ConfigError> {
    let full = if dir.is_absolute() { dir.to_path_buf() } else { base.join(dir) };
    let parent_ok = full.is_dir() || full.parent().is_none_or(|p| p.as_os_str().is_empty() || p.is_dir());
    if !parent_ok {
        return Err(ConfigError::Io {
            path: full.display().to_string(),
            message: "output directory has no existing parent".into(),
        });
    }
    Ok(full)
}

/// Reads a run configuration and resolves its output directory relative to the file.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let mut cfg = parse_config(&read(path)?)?;
    let base = path.parent().unwrap_or(Path::new("."));
    cfg.output.directory = resolve_dir(base, &cfg.output.directory)?;
    Ok(cfg)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    eps: Vec<f64>,
    #[serde(default = "yes")]
    compare_limit: bool,
    #[serde(default)]
    off_manifold: bool,
    #[serde(default)]
    norm_start: f64,
    #[serde(default = "yes")]
    self_convergence: bool,
    #[serde(default = "yes")]
    drop_plateau: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DualitySection {
    c_mr: f64,
    q0_prime: f64,
    /// Where the maximal-regularity constant comes from.
    provenance: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AcceptanceSection {
    min_slope: Option<f64>,
    #[serde(default = "yes")]
    strictly_decreasing: bool,
    #[serde(default = "yes")]
    limit_monotone: bool,
    self_convergence_factor: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    parameters: ParametersSection,
    grid: Option<GridSection>,
    solver: Option<SolverSection>,
    initial: Option<InitialSection>,
    sweep: SweepSection,
    duality: Option<DualitySection>,
    acceptance: Option<AcceptanceSection>,
    output: Option<OutputSection>,
}

/// Parses and validates an experiment plan.
pub fn parse_plan(text: &str) -> Result<ExperimentPlan, ConfigError> {
    let (raw, index): (RawPlan, KeyIndex) = parse_toml(text)?;
    if raw.parameters.eps.is_some() {
        return Err(invalid(&index, "parameters.eps", "set the eps values in [sweep] eps"));
    }
    let eps = &raw.sweep.eps;
    if eps.len() < 3 {
        return Err(invalid(&index, "sweep.eps", format!("needs at least 3 values, got {}", eps.len())));
    }
    if let Some(bad) = eps.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(invalid(&index, "sweep.eps", format!("values must be positive, got {bad}")));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid(&index, "sweep.eps", "must be strictly decreasing"));
    }
    let mut warnings = Vec::new();
    let base = parameters(&raw.parameters, eps[0], &index, &mut warnings)?;
    let grid = grid(raw.grid.as_ref(), &index)?;
    let solver = solver(raw.solver.as_ref(), &index)?;
    let (initial, seed) = initial(raw.initial.as_ref(), &index)?;
    let s = &raw.sweep;
    if !(s.norm_start.is_finite() && s.norm_start >= 0.0 && s.norm_start < solver.t_end) {
        return Err(invalid(&index, "sweep.norm_start", format!("must lie in [0, t_end), got {}", s.norm_start)));
    }
    if s.compare_limit && !initial.is_on_manifold() && !s.off_manifold {
        return Err(invalid(
            &index,
            "sweep.compare_limit",
            "limit comparison needs predators split on the manifold or `off_manifold = true`",
        ));
    }
    let duality = match &raw.duality {
        None => None,
        Some(d) => {
            if !(d.c_mr.is_finite() && d.c_mr > 0.0) {
                return Err(invalid(&index, "duality.c_mr", format!("must be positive, got {}", d.c_mr)));
            }
            if !(d.q0_prime > 1.0 && d.q0_prime < 1.25) {
                return Err(invalid(&index, "duality.q0_prime", format!("must lie in (1, 5/4), got {}", d.q0_prime)));
            }
            if d.provenance.trim().is_empty() {
                return Err(invalid(&index, "duality.provenance", "must say where c_mr comes from"));
            }
            Some(DualityInput { c_mr: d.c_mr, q0_prime: d.q0_prime, provenance: d.provenance.clone() })
        }
    };
    let mut acceptance = Acceptance::for_branch(base.xi);
    if let Some(a) = &raw.acceptance {
        if let Some(m) = a.min_slope {
            acceptance.min_slope = m;
        }
        if let Some(f) = a.self_convergence_factor {
            if !(f.is_finite() && f > 0.0) {
                return Err(invalid(&index, "acceptance.self_convergence_factor", format!("must be positive, got {f}")));
            }
            acceptance.self_convergence_factor = f;
        }
        acceptance.strictly_decreasing = a.strictly_decreasing;
        acceptance.limit_monotone = a.limit_monotone;
    }
    let out = output(raw.output.as_ref());
    Ok(ExperimentPlan {
        base,
        eps: eps.clone(),
        grid,
        solver,
        initial,
        seed,
        compare_limit: s.compare_limit,
        self_convergence: s.self_convergence,
        drop_plateau: s.drop_plateau,
        norm_start: s.norm_start,
        duality,
        acceptance,
        output_dir: out.directory,
        warnings,
    })
}

pub fn load_plan(path: &Path) -> Result<ExperimentPlan, ConfigError> {
    let mut plan = parse_plan(&read(path)?)?;
    let base = path.parent().unwrap_or(Path::new("."));
    plan.output_dir = resolve_dir(base, &plan.output_dir)?;
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[parameters]
d1 = 0.05
d2 = 0.1
d3 = 0.03
r0 = 2.0
eta = 1.0
alpha = 3.0
xi = 0.0
gamma = 1.0
Gamma = 1.5
mu = 0.4
eps = 1e-3
";

    #[test]
    fn minimal_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.solver, SolverConfig::default());
        assert_eq!(cfg.grid, Grid::new_1d(1.0, 128).unwrap());
        assert_eq!(cfg.parameters.p_energy, 1.1);
        assert_eq!(cfg.initial, default_initial_data());
        assert_eq!(cfg.diagnostics, DiagnosticSettings::default());
        assert!(cfg.warnings.is_empty());
    }

    #[test]
    fn negative_xi_names_field_and_line() {
        let text = MINIMAL.replace("xi = 0.0", "xi = -1");
        let err = parse_config(&text).unwrap_err();
        match &err {
            ConfigError::Invalid { line, field, .. } => {
                assert_eq!(field, "xi");
                assert_eq!(*line, Some(8));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().starts_with("line 8: xi:"));
    }

    #[test]
    fn duplicate_key_reports_both_lines() {
        let text = format!("{MINIMAL}xi = 2.0\n");
        assert_eq!(
            parse_config(&text).unwrap_err(),
            ConfigError::Duplicate { key: "parameters.xi".into(), first: 8, second: 13 }
        );
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let text = format!("{MINIMAL}\n[solver]\ndtt = 1e-3\n");
        match parse_config(&text).unwrap_err() {
            ConfigError::Parse { line, message } => {
                assert_eq!(line, Some(15));
                assert!(message.contains("dtt"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn multiline_arrays_do_not_confuse_the_scan() {
        let text = format!(
            "{MINIMAL}\n[initial]\nprey = [\n  {{ kind = \"constant\", value = 0.5 }},\n  {{ kind = \"cosine\", amplitude = 0.1, mode = 2 }},\n]\n[initial.predators]\nps = [{{ kind = \"constant\", value = 0.3 }}]\nph = [{{ kind = \"constant\", value = 0.2 }}]\n"
        );
        let cfg = parse_config(&text).unwrap();
        assert!(!cfg.initial.is_on_manifold());
    }

    #[test]
    fn d3_above_d2_warns_unless_allowed() {
        let text = MINIMAL.replace("d3 = 0.03", "d3 = 0.3");
        assert_eq!(parse_config(&text).unwrap().warnings.len(), 1);
        let text = format!("{text}allow_d3_above_d2 = true\n");
        assert!(parse_config(&text).unwrap().warnings.is_empty());
    }

    fn plan_text(eps: &str) -> String {
        format!("{}\n[sweep]\neps = {eps}\n", MINIMAL.replace("eps = 1e-3\n", ""))
    }

    #[test]
    fn plan_eps_must_decrease() {
        let err = parse_plan(&plan_text("[1.0, 1.0, 1.0]")).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref field, .. } if field == "eps"), "{err}");
        assert!(parse_plan(&plan_text("[1e-2, 1e-3]")).is_err());
        let plan = parse_plan(&plan_text("[1e-2, 1e-3, 1e-4]")).unwrap();
        assert_eq!(plan.acceptance.min_slope, 0.15);
    }

    #[test]
    fn duality_needs_provenance_and_range() {
        let base = plan_text("[1e-2, 1e-3, 1e-4]");
        let ok = format!("{base}\n[duality]\nc_mr = 2.0\nq0_prime = 1.1\nprovenance = \"user estimate\"\n");
        assert!(parse_plan(&ok).unwrap().duality.is_some());
        let bad = ok.replace("q0_prime = 1.1", "q0_prime = 1.3");
        assert!(parse_plan(&bad).is_err());
        let missing = ok.replace("provenance = \"user estimate\"\n", "");
        assert!(parse_plan(&missing).is_err());
    }
}
