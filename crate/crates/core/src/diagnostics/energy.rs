//! The shifted entropy-type energy of the fast system and its exchange dissipation.

use super::quadrature::integrate_adaptive;
use super::DiagnosticsError;
use crate::fast::FastState;
use crate::kinetics::Parameters;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub t: f64,
    /// Energy value.
    pub h: f64,
    pub beta: f64,
    pub p: f64,
    pub dissipation: f64,
}

/// `β(ε) = ε^{1/(4-p)}`.
pub fn beta_schedule(eps: f64, p: f64) -> Result<f64, DiagnosticsError> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(DiagnosticsError::Input(format!("eps must be positive, got {eps}")));
    }
    if !(p > 1.0 && p <= 2.0) {
        return Err(DiagnosticsError::Input(format!("beta schedule needs 1 < p <= 2, got {p}")));
    }
    Ok(eps.powf(1.0 / (4.0 - p)))
}

fn check(p: f64, beta: f64) -> Result<(), DiagnosticsError> {
    if !(p.is_finite() && p > 1.0) {
        return Err(DiagnosticsError::Exponent(p));
    }
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(DiagnosticsError::Input(format!("beta must be nonnegative, got {beta}")));
    }
    Ok(())
}

/// `∫_0^{ps} (α r / (ξ r + 1))^{p-1} dr`.
///
/// With `r = ps u^{1/p}` this is `(ps^p / p) ∫_0^1 (α / (ξ ps u^{1/p} + 1))^{p-1} du`,
/// which removes the `r^{p-1}` endpoint behaviour.
pub fn searching_potential(ps: f64, p: f64, prm: &Parameters) -> f64 {
    if ps <= 0.0 {
        return 0.0;
    }
    let lead = ps.powf(p) / p;
    if prm.xi == 0.0 {
        return prm.alpha.powf(p - 1.0) * lead;
    }
    if (p - 1.0).fract() == 0.0 {
        // Integer power: the integrand is smooth in r.
        let (v, _) = integrate_adaptive(|r| (prm.alpha * r / (prm.xi * r + 1.0)).powf(p - 1.0), 0.0, ps, 1e-13, 40);
        return v;
    }
    let inv_p = 1.0 / p;
    let (v, _) = integrate_adaptive(
        |u| (prm.alpha / (prm.xi * ps * u.powf(inv_p) + 1.0)).powf(p - 1.0),
        0.0,
        1.0,
        1e-13,
        40,
    );
    lead * v
}

/// `H = ∫ (N + β)^{p-1} Φ(ps) + (1/p) ∫ γ^{p-1} ph^p`.
pub fn energy(st: &FastState, prm: &Parameters, beta: f64, p: f64) -> Result<f64, DiagnosticsError> {
    check(p, beta)?;
    let vol = st.n.grid().cell_volume();
    let (n, ps, ph) = (st.n.values(), st.ps.values(), st.ph.values());
    let mut h = 0.0;
    for i in 0..n.len() {
        h += (n[i] + beta).powf(p - 1.0) * searching_potential(ps[i], p, prm)
            + prm.gamma.powf(p - 1.0) * ph[i].powf(p) / p;
    }
    Ok(h * vol)
}

/// Pointwise dissipation density `(a - b)(a_β^{p-1} - b^{p-1})`.
pub fn dissipation_density(n: f64, ps: f64, ph: f64, prm: &Parameters, beta: f64, p: f64) -> f64 {
    let rate = prm.alpha * ps / (prm.xi * ps + 1.0);
    let a = rate * n;
    let a_beta = rate * (n + beta);
    let b = prm.gamma * ph;
    (a - b) * (a_beta.powf(p - 1.0) - b.powf(p - 1.0))
}

/// `∫ (a - b)(a_β^{p-1} - b^{p-1})` with `a = α ps N/(ξ ps + 1)`,
/// `a_β = α ps (N + β)/(ξ ps + 1)`, `b = γ ph`.
pub fn dissipation(st: &FastState, prm: &Parameters, beta: f64, p: f64) -> Result<f64, DiagnosticsError> {
    Ok(dissipation_with_sign_failures(st, prm, beta, p)?.0)
}

/// Dissipation together with the number of cells where the density is negative.
/// For `β = 0` the density is nonnegative; for `β > 0` it can only be negative
/// where `b` lies between `a` and `a_β`.
pub fn dissipation_with_sign_failures(
    st: &FastState,
    prm: &Parameters,
    beta: f64,
    p: f64,
) -> Result<(f64, usize), DiagnosticsError> {
    check(p, beta)?;
    let (n, ps, ph) = (st.n.values(), st.ps.values(), st.ph.values());
    let mut total = 0.0;
    let mut failures = 0;
    for i in 0..n.len() {
        let d = dissipation_density(n[i], ps[i], ph[i], prm, beta, p);
        if d < 0.0 {
            failures += 1;
        }
        total += d;
    }
    Ok((total * st.n.grid().cell_volume(), failures))
}

pub fn energy_report(st: &FastState, prm: &Parameters, beta: f64, p: f64) -> Result<EnergyReport, DiagnosticsError> {
    Ok(EnergyReport {
        t: st.t,
        h: energy(st, prm, beta, p)?,
        beta,
        p,
        dissipation: dissipation(st, prm, beta, p)?,
    })
}
