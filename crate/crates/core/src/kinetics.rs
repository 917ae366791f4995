//! Pointwise model algebra: reaction terms of the three-field system, the
//! searching/handling slow manifold, the reduced (N, P) kinetics and the
//! diffusion-ratio duality check.
//!
//! Everything here is a pure function of its arguments.

use thiserror::Error;

/// Values in `[-ROUNDOFF_FLOOR, 0)` are treated as solver round-off and clamped to zero.
pub const ROUNDOFF_FLOOR: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KineticsError {
    #[error("{name} = {value:e} is negative")]
    Negative { name: &'static str, value: f64 },
    #[error("{name} is not finite ({value})")]
    NonFinite { name: &'static str, value: f64 },
    #[error("parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("the manifold quadratic degenerates for xi = 0; use the linear branch")]
    DegenerateQuadratic,
}

/// Model constants of the fast-reaction system plus the time-scale ratio and
/// the exponent of the energy functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parameters {
    /// Prey diffusivity.
    pub d1: f64,
    /// Searching-predator diffusivity.
    pub d2: f64,
    /// Handling-predator diffusivity.
    pub d3: f64,
    /// Prey growth rate.
    pub r0: f64,
    /// Inverse carrying capacity.
    pub eta: f64,
    /// Attack rate.
    pub alpha: f64,
    /// Predator competition coefficient; `0` selects the linear (Lotka-Volterra) switching.
    pub xi: f64,
    /// Handling-to-searching return rate.
    pub gamma: f64,
    /// Predator birth rate (`Gamma`).
    pub big_gamma: f64,
    /// Predator mortality.
    pub mu: f64,
    /// Time-scale separation of the switching dynamics.
    pub eps: f64,
    /// Exponent of the modified energy functional.
    pub p_energy: f64,
}

impl Default for Parameters {
    fn default() -> Self {
        Self {
            d1: 0.05,
            d2: 0.1,
            d3: 0.03,
            r0: 2.0,
            eta: 1.0,
            alpha: 3.0,
            xi: 1.0,
            gamma: 1.0,
            big_gamma: 1.5,
            mu: 0.4,
            eps: 1e-3,
            p_energy: 2.0,
        }
    }
}

impl Parameters {
    /// Named fields in canonical order, used for hashing and CSV headers.
    pub fn named(&self) -> [(&'static str, f64); 12] {
        [
            ("d1", self.d1),
            ("d2", self.d2),
            ("d3", self.d3),
            ("r0", self.r0),
            ("eta", self.eta),
            ("alpha", self.alpha),
            ("xi", self.xi),
            ("gamma", self.gamma),
            ("Gamma", self.big_gamma),
            ("mu", self.mu),
            ("eps", self.eps),
            ("p_energy", self.p_energy),
        ]
    }

    pub fn validate(&self) -> Result<(), KineticsError> {
        for (name, value) in self.named() {
            if !value.is_finite() {
                return Err(KineticsError::NonFinite { name, value });
            }
        }
        let positive = [
            ("d1", self.d1),
            ("d2", self.d2),
            ("d3", self.d3),
            ("r0", self.r0),
            ("eta", self.eta),
            ("gamma", self.gamma),
            ("eps", self.eps),
        ];
        for (name, value) in positive {
            if value <= 0.0 {
                return Err(KineticsError::InvalidParameter {
                    name,
                    value,
                    reason: "must be strictly positive",
                });
            }
        }
        // Zero attack, birth or mortality rates switch off a mechanism; conservation
        // studies rely on that.
        let nonnegative = [
            ("alpha", self.alpha),
            ("xi", self.xi),
            ("Gamma", self.big_gamma),
            ("mu", self.mu),
        ];
        for (name, value) in nonnegative {
            if value < 0.0 {
                return Err(KineticsError::InvalidParameter {
                    name,
                    value,
                    reason: "must be nonnegative",
                });
            }
        }
        if self.p_energy <= 1.0 {
            return Err(KineticsError::InvalidParameter {
                name: "p_energy",
                value: self.p_energy,
                reason: "must exceed 1",
            });
        }
        Ok(())
    }

    /// Warning-level check: handling predators are expected to diffuse less
    /// than searching ones. The mathematics does not need it.
    pub fn diffusion_order_warning(&self) -> Option<String> {
        (self.d3 >= self.d2).then(|| {
            format!(
                "d3 = {} is not below d2 = {}; handling predators are expected to move less",
                self.d3, self.d2
            )
        })
    }

    /// Copy of `self` with a different `eps`.
    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    #[inline]
    pub(crate) fn predation(&self, ps: f64) -> f64 {
        self.alpha * ps / (self.xi * ps + 1.0)
    }
}

/// Densities at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointState {
    pub n: f64,
    pub ps: f64,
    pub ph: f64,
}

impl PointState {
    pub fn new(n: f64, ps: f64, ph: f64) -> Self {
        Self { n, ps, ph }
    }

    fn checked(self) -> Result<Self, KineticsError> {
        Ok(Self {
            n: density("N", self.n)?,
            ps: density("ps", self.ps)?,
            ph: density("ph", self.ph)?,
        })
    }
}

/// Accepts a density, clamping round-off negatives to exactly zero.
pub fn density(name: &'static str, value: f64) -> Result<f64, KineticsError> {
    if !value.is_finite() {
        Err(KineticsError::NonFinite { name, value })
    } else if value >= 0.0 {
        Ok(value)
    } else if value >= -ROUNDOFF_FLOOR {
        Ok(0.0)
    } else {
        Err(KineticsError::Negative { name, value })
    }
}

/// Reaction right-hand sides `(dN, dps, dph)` of the fast-reaction system,
/// including the `1/eps` switching terms.
pub fn reaction_fast(s: PointState, prm: &Parameters) -> Result<(f64, f64, f64), KineticsError> {
    prm.validate()?;
    let s = s.checked()?;
    Ok(reaction_fast_unchecked(s, prm))
}

#[inline]
pub(crate) fn reaction_fast_unchecked(s: PointState, prm: &Parameters) -> (f64, f64, f64) {
    let capture = prm.predation(s.ps) * s.n;
    let switching = (prm.gamma * s.ph - capture) / prm.eps;
    let dn = prm.r0 * (1.0 - prm.eta * s.n) * s.n - capture;
    let dps = switching - prm.mu * s.ps + prm.big_gamma * s.ph;
    let dph = -switching - prm.mu * s.ph;
    (dn, dps, dph)
}

/// `alpha ps N / (xi ps + 1) - gamma ph`: positive when capture exceeds return.
pub fn slow_manifold_residual(s: PointState, prm: &Parameters) -> Result<f64, KineticsError> {
    let s = s.checked()?;
    Ok(residual_unchecked(s.n, s.ps, s.ph, prm))
}

#[inline]
pub(crate) fn residual_unchecked(n: f64, ps: f64, ph: f64, prm: &Parameters) -> f64 {
    prm.predation(ps) * n - prm.gamma * ph
}

/// Handling-predator density on the slow manifold for prey `n` and total predators `p`.
pub fn phi(n: f64, p: f64, prm: &Parameters) -> Result<f64, KineticsError> {
    let n = density("N", n)?;
    let p = density("P", p)?;
    Ok(phi_unchecked(n, p, prm))
}

#[inline]
pub(crate) fn phi_unchecked(n: f64, p: f64, prm: &Parameters) -> f64 {
    let an = prm.alpha * n;
    if prm.xi == 0.0 {
        let denom = an + prm.gamma;
        return an * p / denom;
    }
    let gxp = prm.gamma * prm.xi * p;
    let a = an + prm.gamma + gxp;
    let b = an + prm.gamma - gxp;
    let root = (b * b + 4.0 * prm.gamma * prm.gamma * prm.xi * p).sqrt();
    // Rationalized smaller root; `a - root` cancels both for small P and for small N.
    let value = 2.0 * an * p / (a + root);
    value.clamp(0.0, p.min(an / (prm.gamma * prm.xi)))
}

/// `gamma xi ph^2 - (alpha N + gamma + gamma xi P) ph + alpha N P`.
pub fn quadratic_residual(ph: f64, n: f64, p: f64, prm: &Parameters) -> Result<f64, KineticsError> {
    if prm.xi == 0.0 {
        return Err(KineticsError::DegenerateQuadratic);
    }
    let ph = density("ph", ph)?;
    let n = density("N", n)?;
    let p = density("P", p)?;
    let an = prm.alpha * n;
    Ok(prm.gamma * prm.xi * ph * ph - (an + prm.gamma + prm.gamma * prm.xi * p) * ph + an * p)
}

/// Reaction part `(dN, dP)` of the reduced cross-diffusion system.
pub fn reaction_limit(n: f64, p: f64, prm: &Parameters) -> Result<(f64, f64), KineticsError> {
    let n = density("N", n)?;
    let p = density("P", p)?;
    Ok(reaction_limit_unchecked(n, p, prm))
}

#[inline]
pub(crate) fn reaction_limit_unchecked(n: f64, p: f64, prm: &Parameters) -> (f64, f64) {
    let handling = phi_unchecked(n, p, prm);
    (
        prm.r0 * (1.0 - prm.eta * n) * n - prm.gamma * handling,
        prm.big_gamma * handling - prm.mu * p,
    )
}

/// Outcome of the diffusion-ratio smallness condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityCheck {
    pub holds: bool,
    /// `(d2 - d3) / (d2 + d3)`.
    pub ratio: f64,
    /// `1 / c_mr - ratio`; positive iff the condition holds.
    pub margin: f64,
    /// Conjugate exponent `q0' / (q0' - 1)`.
    pub q0: f64,
    pub c_mr: f64,
}

/// Checks `(d2 - d3)/(d2 + d3) < 1/c_mr` for a user-supplied maximal-regularity
/// constant `c_mr` at exponent `q0_prime` in `(1, 5/4)`.
pub fn check_duality_condition(
    prm: &Parameters,
    c_mr: f64,
    q0_prime: f64,
) -> Result<DualityCheck, KineticsError> {
    if !(c_mr.is_finite() && c_mr > 0.0) {
        return Err(KineticsError::InvalidParameter {
            name: "c_mr",
            value: c_mr,
            reason: "must be a finite positive constant",
        });
    }
    if !(q0_prime > 1.0 && q0_prime < 1.25) {
        return Err(KineticsError::InvalidParameter {
            name: "q0_prime",
            value: q0_prime,
            reason: "must lie in the open interval (1, 5/4)",
        });
    }
    let ratio = (prm.d2 - prm.d3) / (prm.d2 + prm.d3);
    let margin = 1.0 / c_mr - ratio;
    Ok(DualityCheck {
        holds: ratio < 1.0 / c_mr,
        ratio,
        margin,
        q0: q0_prime / (q0_prime - 1.0),
        c_mr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Parameters {
        Parameters {
            alpha: 1.0,
            gamma: 1.0,
            xi: 0.0,
            mu: 0.0,
            big_gamma: 0.0,
            eps: 1.0,
            ..Parameters::default()
        }
    }

    #[test]
    fn extinction_and_carrying_capacity_are_fixed_points() {
        let prm = Parameters::default();
        assert_eq!(reaction_fast(PointState::new(0.0, 0.0, 0.0), &prm).unwrap(), (0.0, 0.0, 0.0));
        let (a, b, c) = reaction_fast(PointState::new(1.0 / prm.eta, 0.0, 0.0), &prm).unwrap();
        assert_eq!((a, b, c), (0.0, 0.0, 0.0));
    }

    #[test]
    fn hand_evaluated_switching() {
        let prm = unit();
        let (dn, dps, dph) = reaction_fast(PointState::new(1.0, 2.0, 3.0), &prm).unwrap();
        assert_eq!(dps, 1.0);
        assert_eq!(dph, -1.0);
        assert_eq!(dn, prm.r0 * (1.0 - prm.eta) - 2.0);
        assert_eq!(slow_manifold_residual(PointState::new(1.0, 2.0, 3.0), &prm).unwrap(), -1.0);
    }

    #[test]
    fn residual_vanishes_on_manifold_and_without_searchers() {
        let prm = Parameters::default();
        let (n, ps) = (0.7, 0.4);
        let ph = prm.alpha * ps * n / (prm.gamma * (prm.xi * ps + 1.0));
        let r = slow_manifold_residual(PointState::new(n, ps, ph), &prm).unwrap();
        assert!(r.abs() < 1e-15);
        let r = slow_manifold_residual(PointState::new(n, 0.0, 0.3), &prm).unwrap();
        assert_eq!(r, -prm.gamma * 0.3);
    }

    #[test]
    fn phi_examples() {
        let mut prm = Parameters { alpha: 1.0, gamma: 1.0, xi: 1.0, ..Parameters::default() };
        assert_eq!(phi(3.0, 0.0, &prm).unwrap(), 0.0);
        assert_eq!(phi(0.0, 3.0, &prm).unwrap(), 0.0);
        let expected = (3.0 - 5f64.sqrt()) / 2.0;
        assert!((phi(1.0, 1.0, &prm).unwrap() - expected).abs() < 1e-15);
        prm.alpha = 2.0;
        prm.xi = 0.0;
        assert_eq!(phi(1.0, 3.0, &prm).unwrap(), 2.0);
    }

    #[test]
    fn quadratic_residual_examples() {
        let prm = Parameters { alpha: 1.0, gamma: 1.0, xi: 1.0, ..Parameters::default() };
        assert_eq!(quadratic_residual(1.0, 1.0, 1.0, &prm).unwrap(), -1.0);
        assert_eq!(quadratic_residual(0.0, 0.0, 2.0, &prm).unwrap(), 0.0);
        let zero = Parameters { xi: 0.0, ..prm };
        assert_eq!(quadratic_residual(0.1, 1.0, 1.0, &zero), Err(KineticsError::DegenerateQuadratic));
    }

    #[test]
    fn reaction_limit_examples() {
        let prm = Parameters {
            xi: 0.0,
            alpha: 1.0,
            gamma: 1.0,
            r0: 1.0,
            eta: 1.0,
            mu: 1.0,
            big_gamma: 1.0,
            ..Parameters::default()
        };
        assert_eq!(reaction_limit(0.0, 0.0, &prm).unwrap(), (0.0, 0.0));
        assert_eq!(reaction_limit(1.0, 2.0, &prm).unwrap(), (-1.0, -1.0));
        for &n in &[0.0, 0.3, 2.0, 10.0] {
            for &p in &[0.0, 0.5, 4.0] {
                assert!(reaction_limit(n, p, &prm).unwrap().1 <= 0.0);
            }
        }
    }

    #[test]
    fn roundoff_negatives_clamp_but_real_negatives_fail() {
        let prm = Parameters::default();
        assert_eq!(phi(-1e-15, 1.0, &prm).unwrap(), 0.0);
        assert!(matches!(phi(-1e-10, 1.0, &prm), Err(KineticsError::Negative { name: "N", .. })));
        assert!(matches!(phi(f64::NAN, 1.0, &prm), Err(KineticsError::NonFinite { .. })));
    }

    #[test]
    fn parameter_validation() {
        let mut prm = Parameters::default();
        assert!(prm.validate().is_ok());
        prm.xi = -1.0;
        assert!(matches!(prm.validate(), Err(KineticsError::InvalidParameter { name: "xi", .. })));
        prm.xi = 0.0;
        prm.p_energy = 1.0;
        assert!(prm.validate().is_err());
        let swapped = Parameters { d2: 0.01, d3: 0.02, ..Parameters::default() };
        assert!(swapped.diffusion_order_warning().is_some());
        assert!(Parameters::default().diffusion_order_warning().is_none());
    }

    #[test]
    fn duality_examples() {
        let prm = Parameters { d2: 3.0, d3: 3.0, ..Parameters::default() };
        let c = check_duality_condition(&prm, 1e6, 1.1).unwrap();
        assert!(c.holds);
        assert_eq!(c.ratio, 0.0);
        let prm = Parameters { d2: 3.0, d3: 1.0, ..Parameters::default() };
        let c = check_duality_condition(&prm, 1.0, 1.1).unwrap();
        assert!(c.holds);
        assert_eq!(c.margin, 0.5);
        assert!((c.q0 - 11.0).abs() < 1e-12);
        let c = check_duality_condition(&prm, 3.0, 1.1).unwrap();
        assert!(!c.holds);
        assert!(c.margin < 0.0);
        assert!(check_duality_condition(&prm, 1.0, 1.25).is_err());
        assert!(check_duality_condition(&prm, 1.0, 1.0).is_err());
        assert!(check_duality_condition(&prm, 0.0, 1.1).is_err());
    }
}
