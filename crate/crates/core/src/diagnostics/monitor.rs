//! Pure measurements of single states and the per-step observers built on them.

use super::energy::{beta_schedule, dissipation_with_sign_failures, energy};
use super::norms::SpaceTimeAccumulator;
use super::DiagnosticsError;
use crate::fast::FastState;
use crate::kinetics::{phi_unchecked, residual_unchecked, Parameters};
use crate::limit::LimitState;
use crate::trajectory::{Observer, SolverError, State};

/// Extrema per field and masses of one state.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorRecord {
    pub t: f64,
    /// `(field, min, max)` in storage order.
    pub extrema: Vec<(&'static str, f64, f64)>,
    pub prey_mass: f64,
    /// Mass of all predator fields together.
    pub predator_mass: f64,
    /// `min_cells N`.
    pub m_estimate: f64,
}

pub fn extremum_and_mass_monitor<S: State>(st: &S) -> MonitorRecord {
    let fields = st.fields();
    let extrema = S::FIELD_NAMES.iter().zip(&fields).map(|(&name, f)| (name, f.min(), f.max())).collect();
    MonitorRecord {
        t: st.time(),
        extrema,
        prey_mass: fields[0].integral(),
        predator_mass: fields[1..].iter().map(|f| f.integral()).sum(),
        m_estimate: fields[0].min(),
    }
}

/// One line of the diagnostic stream.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRow {
    pub t: f64,
    pub name: &'static str,
    pub value: f64,
}

/// Tracks the discrete predator mass inequality
/// `M(t+dt) - M(t) ≤ dt · max(R(t), R(t+dt))`, with `R = Γ ∫ph - μ ∫(ps+ph)`
/// in the fast system and `R = Γ ∫φ - μ ∫P` in the limit system.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MassInequality {
    last: Option<(f64, f64, f64)>,
    pub checks: usize,
    pub violations: usize,
    /// Largest value of `ΔM - dt · max(R)` relative to the mass scale.
    pub worst_excess: f64,
}

impl MassInequality {
    const TOLERANCE: f64 = 1e-12;

    fn push(&mut self, t: f64, mass: f64, rate: f64) {
        if let Some((t0, m0, r0)) = self.last {
            let excess = (mass - m0) - (t - t0) * r0.max(rate);
            let rel = excess / m0.abs().max(mass.abs()).max(f64::MIN_POSITIVE);
            self.checks += 1;
            self.worst_excess = if self.checks == 1 { rel } else { self.worst_excess.max(rel) };
            if rel > Self::TOLERANCE {
                self.violations += 1;
            }
        }
        self.last = Some((t, mass, rate));
    }

    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Aggregates of a fast run.
#[derive(Debug, Clone, PartialEq)]
pub struct FastSummary {
    pub steps: usize,
    pub residual_l2: f64,
    pub residual_l43: f64,
    pub max_n: f64,
    /// Minimum over all time levels of each field.
    pub min_fields: [f64; 3],
    pub beta: f64,
    pub p: f64,
    pub energy_initial: f64,
    pub energy_max: f64,
    /// `max_t H(t) - H(0)`, at least 0.
    pub energy_excess: f64,
    pub dissipation_beta0_min: f64,
    pub dissipation_beta0_negative_cells: usize,
    /// Cells (summed over time levels) where the β-shifted dissipation density is negative.
    pub dissipation_beta_sign_failures: usize,
    pub mass: MassInequality,
    pub initial_predator_mass: f64,
    pub final_predator_mass: f64,
    /// Largest relative deviation of the predator mass from its initial value.
    pub predator_mass_drift: f64,
    /// `∬ |∂t N|` and `∬ ∂t N` from differences of consecutive levels.
    pub abs_dn_dt: f64,
    pub signed_dn_dt: f64,
}

/// Observer collecting the fast-run diagnostics at every time level.
pub struct FastMonitor {
    prm: Parameters,
    energy_every: usize,
    l2: SpaceTimeAccumulator,
    l43: SpaceTimeAccumulator,
    summary: FastSummary,
    prev_n: Option<Vec<f64>>,
    rows: Option<Vec<DiagnosticRow>>,
}

impl FastMonitor {
    /// Energy exponent from `prm.p_energy`, β from the ε schedule; residual
    /// norms only integrate times after `t0`.
    pub fn new(prm: &Parameters, t0: f64) -> Result<Self, DiagnosticsError> {
        let p = prm.p_energy;
        let beta = beta_schedule(prm.eps, p)?;
        let summary = FastSummary {
            steps: 0,
            residual_l2: 0.0,
            residual_l43: 0.0,
            max_n: f64::NEG_INFINITY,
            min_fields: [f64::INFINITY; 3],
            beta,
            p,
            energy_initial: 0.0,
            energy_max: f64::NEG_INFINITY,
            energy_excess: 0.0,
            dissipation_beta0_min: f64::INFINITY,
            dissipation_beta0_negative_cells: 0,
            dissipation_beta_sign_failures: 0,
            mass: MassInequality::default(),
            initial_predator_mass: 0.0,
            final_predator_mass: 0.0,
            predator_mass_drift: 0.0,
            abs_dn_dt: 0.0,
            signed_dn_dt: 0.0,
        };
        Ok(Self {
            prm: *prm,
            energy_every: 1,
            l2: SpaceTimeAccumulator::from_time(2.0, t0)?,
            l43: SpaceTimeAccumulator::from_time(4.0 / 3.0, t0)?,
            summary,
            prev_n: None,
            rows: None,
        })
    }

    /// Keeps every diagnostic as a `(t, name, value)` row.
    pub fn with_rows(mut self) -> Self {
        self.rows = Some(Vec::new());
        self
    }

    /// Evaluates energy and dissipation only every `every` steps (and at step 0).
    pub fn energy_every(mut self, every: usize) -> Self {
        self.energy_every = every.max(1);
        self
    }

    pub fn summary(&self) -> FastSummary {
        let mut s = self.summary.clone();
        s.residual_l2 = self.l2.norm().unwrap_or(0.0);
        s.residual_l43 = self.l43.norm().unwrap_or(0.0);
        s
    }

    pub fn take_rows(&mut self) -> Vec<DiagnosticRow> {
        self.rows.as_mut().map(std::mem::take).unwrap_or_default()
    }

    fn row(&mut self, t: f64, name: &'static str, value: f64) {
        if let Some(rows) = self.rows.as_mut() {
            rows.push(DiagnosticRow { t, name, value });
        }
    }
}

impl Observer<FastState> for FastMonitor {
    fn observe(&mut self, step: usize, st: &FastState) -> Result<(), SolverError> {
        let prm = self.prm;
        let grid = *st.n.grid();
        let vol = grid.cell_volume();
        let (n, ps, ph) = (st.n.values(), st.ps.values(), st.ph.values());
        let t = st.t;

        let (mut g2, mut g43) = (0.0, 0.0);
        for i in 0..n.len() {
            let r = residual_unchecked(n[i], ps[i], ph[i], &prm).abs();
            g2 += r * r;
            g43 += r.powf(4.0 / 3.0);
        }
        self.l2.push_spatial(t, g2 * vol);
        self.l43.push_spatial(t, g43 * vol);
        self.row(t, "residual_l2_sq", g2 * vol);

        let rec = extremum_and_mass_monitor(st);
        let s = &mut self.summary;
        s.steps = step;
        s.max_n = s.max_n.max(rec.extrema[0].2);
        for (m, e) in s.min_fields.iter_mut().zip(&rec.extrema) {
            *m = m.min(e.1);
        }
        let handling_mass = st.ph.integral();
        let rate = prm.big_gamma * handling_mass - prm.mu * rec.predator_mass;
        s.mass.push(t, rec.predator_mass, rate);
        if step == 0 {
            s.initial_predator_mass = rec.predator_mass;
        }
        s.final_predator_mass = rec.predator_mass;
        let drift = (rec.predator_mass - s.initial_predator_mass).abs() / s.initial_predator_mass.abs().max(f64::MIN_POSITIVE);
        s.predator_mass_drift = s.predator_mass_drift.max(drift);

        if let Some(prev) = &self.prev_n {
            let (mut a, mut b) = (0.0, 0.0);
            for (x, y) in n.iter().zip(prev) {
                a += (x - y).abs();
                b += x - y;
            }
            s.abs_dn_dt += a * vol;
            s.signed_dn_dt += b * vol;
        }
        self.prev_n = Some(n.to_vec());

        let mut energy_row = None;
        if step % self.energy_every == 0 {
            let h = energy(st, &prm, s.beta, s.p).map_err(|e| SolverError::Observer(e.to_string()))?;
            let (d0, neg0) =
                dissipation_with_sign_failures(st, &prm, 0.0, s.p).map_err(|e| SolverError::Observer(e.to_string()))?;
            let (db, negb) =
                dissipation_with_sign_failures(st, &prm, s.beta, s.p).map_err(|e| SolverError::Observer(e.to_string()))?;
            if step == 0 {
                s.energy_initial = h;
            }
            s.energy_max = s.energy_max.max(h);
            s.energy_excess = (s.energy_max - s.energy_initial).max(0.0);
            s.dissipation_beta0_min = s.dissipation_beta0_min.min(d0);
            s.dissipation_beta0_negative_cells += neg0;
            s.dissipation_beta_sign_failures += negb;
            energy_row = Some((h, d0, db));
        }

        let predator_mass = rec.predator_mass;
        self.row(t, "prey_mass", rec.prey_mass);
        self.row(t, "predator_mass", predator_mass);
        for (name, lo, hi) in rec.extrema {
            let (min_name, max_name) = match name {
                "N" => ("min_N", "max_N"),
                "ps" => ("min_ps", "max_ps"),
                _ => ("min_ph", "max_ph"),
            };
            self.row(t, min_name, lo);
            self.row(t, max_name, hi);
        }
        if let Some((h, d0, db)) = energy_row {
            self.row(t, "energy", h);
            self.row(t, "dissipation_beta0", d0);
            self.row(t, "dissipation_beta", db);
        }
        Ok(())
    }
}

/// Aggregates of a limit run.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitSummary {
    pub steps: usize,
    pub max_n: f64,
    pub min_fields: [f64; 2],
    /// Largest value of `P - φ(N, P)` violation, i.e. `max(φ - P, 0)`.
    pub searching_deficit: f64,
    pub mass: MassInequality,
    pub abs_dn_dt: f64,
    pub signed_dn_dt: f64,
}

pub struct LimitMonitor {
    prm: Parameters,
    summary: LimitSummary,
    prev_n: Option<Vec<f64>>,
    rows: Option<Vec<DiagnosticRow>>,
}

impl LimitMonitor {
    pub fn new(prm: &Parameters) -> Self {
        Self {
            prm: *prm,
            summary: LimitSummary {
                steps: 0,
                max_n: f64::NEG_INFINITY,
                min_fields: [f64::INFINITY; 2],
                searching_deficit: 0.0,
                mass: MassInequality::default(),
                abs_dn_dt: 0.0,
                signed_dn_dt: 0.0,
            },
            prev_n: None,
            rows: None,
        }
    }

    pub fn with_rows(mut self) -> Self {
        self.rows = Some(Vec::new());
        self
    }

    pub fn summary(&self) -> LimitSummary {
        self.summary.clone()
    }

    pub fn take_rows(&mut self) -> Vec<DiagnosticRow> {
        self.rows.as_mut().map(std::mem::take).unwrap_or_default()
    }
}

impl Observer<LimitState> for LimitMonitor {
    fn observe(&mut self, step: usize, st: &LimitState) -> Result<(), SolverError> {
        let prm = self.prm;
        let rec = extremum_and_mass_monitor(st);
        let vol = st.grid().cell_volume();
        let (n, p) = (st.n.values(), st.p.values());
        let mut handling = 0.0;
        let s = &mut self.summary;
        for i in 0..n.len() {
            let w = phi_unchecked(n[i], p[i], &prm);
            handling += w;
            s.searching_deficit = s.searching_deficit.max(w - p[i]);
        }
        s.steps = step;
        s.max_n = s.max_n.max(rec.extrema[0].2);
        s.min_fields[0] = s.min_fields[0].min(rec.extrema[0].1);
        s.min_fields[1] = s.min_fields[1].min(rec.extrema[1].1);
        s.mass.push(st.t, rec.predator_mass, prm.big_gamma * handling * vol - prm.mu * rec.predator_mass);
        if let Some(prev) = &self.prev_n {
            let (mut a, mut b) = (0.0, 0.0);
            for (x, y) in n.iter().zip(prev) {
                a += (x - y).abs();
                b += x - y;
            }
            s.abs_dn_dt += a * vol;
            s.signed_dn_dt += b * vol;
        }
        self.prev_n = Some(n.to_vec());
        if let Some(rows) = self.rows.as_mut() {
            let t = st.t;
            rows.push(DiagnosticRow { t, name: "prey_mass", value: rec.prey_mass });
            rows.push(DiagnosticRow { t, name: "predator_mass", value: rec.predator_mass });
            rows.push(DiagnosticRow { t, name: "min_N", value: rec.extrema[0].1 });
            rows.push(DiagnosticRow { t, name: "max_N", value: rec.extrema[0].2 });
            rows.push(DiagnosticRow { t, name: "min_P", value: rec.extrema[1].1 });
            rows.push(DiagnosticRow { t, name: "max_P", value: rec.extrema[1].2 });
        }
        Ok(())
    }
}
