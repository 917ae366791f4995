//! Least-squares log-log rate fits of residual norms against ε.

use super::DiagnosticsError;

/// Per-decade decrease below which the residual is considered flat.
const PLATEAU_DECREASE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// `(ε, residual)` sorted by ε descending.
    pub samples: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub plateau_detected: bool,
    /// Indices into `samples` used by the fit.
    pub used: Vec<usize>,
}

impl RateReport {
    /// Largest and smallest ε entering the fit.
    pub fn fit_range(&self) -> (f64, f64) {
        let first = self.used[0];
        let last = self.used[self.used.len() - 1];
        (self.samples[first].0, self.samples[last].0)
    }

    /// Whether the residual decreases strictly with ε across all samples.
    pub fn strictly_decreasing(&self) -> bool {
        self.samples.windows(2).all(|w| w[1].1 < w[0].1)
    }
}

/// Fits `log residual = slope · log ε + intercept`. With `drop_plateau`, the
/// small-ε tail starting where the residual decreases by less than 5% per
/// decade is excluded.
pub fn fit_rate(samples: &[(f64, f64)], drop_plateau: bool) -> Result<RateReport, DiagnosticsError> {
    for &(e, r) in samples {
        if !(e.is_finite() && e > 0.0 && r.is_finite() && r > 0.0) {
            return Err(DiagnosticsError::Input(format!("rate samples must be positive and finite, got ({e}, {r})")));
        }
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(DiagnosticsError::Input("rate samples contain a repeated eps".into()));
    }
    let mut keep = sorted.len();
    if drop_plateau {
        for i in 0..sorted.len().saturating_sub(1) {
            let decades = (sorted[i].0 / sorted[i + 1].0).log10();
            let per_decade = (sorted[i + 1].1 / sorted[i].1).powf(1.0 / decades);
            if per_decade > 1.0 - PLATEAU_DECREASE {
                keep = i + 1;
                break;
            }
        }
    }
    if keep < 3 {
        return Err(DiagnosticsError::TooFewLevels { needed: 3, got: keep });
    }
    let used: Vec<usize> = (0..keep).collect();
    let xs: Vec<f64> = used.iter().map(|&i| sorted[i].0.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|&i| sorted[i].1.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).min(1.0) };
    Ok(RateReport {
        samples: sorted,
        slope,
        intercept,
        r_squared,
        plateau_detected: keep < samples.len(),
        used,
    })
}
