//! Numerical time derivatives of logged functionals and the report type every
//! dissipation/passivity monitor returns.

use std::fmt;

use crate::error::{Error, Result};

/// Centered finite-difference derivative of a uniformly sampled series.
///
/// Five-point centered stencil where it fits, three-point next to the ends,
/// one-sided first-order at the ends. [`interior_range`] gives the indices
/// that carry the widest centered stencil; monitors take their maxima there.
pub fn time_derivative(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    out[0] = (values[1] - values[0]) / dt;
    out[n - 1] = (values[n - 1] - values[n - 2]) / dt;
    for k in 1..n - 1 {
        out[k] = if k >= 2 && k + 2 < n {
            (values[k - 2] - 8.0 * values[k - 1] + 8.0 * values[k + 1] - values[k + 2]) / (12.0 * dt)
        } else {
            (values[k + 1] - values[k - 1]) / (2.0 * dt)
        };
    }
    out
}

/// Indices whose derivative uses a full centered stencil.
pub fn interior_range(n: usize) -> std::ops::Range<usize> {
    if n >= 5 {
        2..n - 2
    } else if n >= 3 {
        1..n - 1
    } else {
        0..0
    }
}

pub(crate) fn require_samples(n: usize, needed: usize) -> Result<()> {
    if n < needed {
        return Err(Error::TrajectoryTooShort { needed, got: n });
    }
    Ok(())
}

/// Value series of a functional, its measured rate, and the worst excess of
/// the rate over the bound it must respect.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalReport {
    pub name: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub rates: Vec<f64>,
    /// Right-hand side of the inequality at each sample (supply rate, or 0).
    pub bounds: Vec<f64>,
    /// `max_k (rate_k - bound_k)` over interior samples.
    pub max_violation: f64,
    pub tol: f64,
}

impl FunctionalReport {
    /// Build a report for `rate <= bound`. `tol = rel_tol * scale`, with the
    /// scale being the largest measured |rate| (1 if the run is static).
    pub fn new(
        name: impl Into<String>,
        times: Vec<f64>,
        values: Vec<f64>,
        rates: Vec<f64>,
        bounds: Vec<f64>,
        rel_tol: f64,
    ) -> Self {
        let range = interior_range(times.len());
        let max_violation = range
            .clone()
            .map(|k| rates[k] - bounds[k])
            .fold(f64::NEG_INFINITY, f64::max);
        let scale = range.map(|k| rates[k].abs()).fold(0.0, f64::max);
        let scale = if scale > 0.0 { scale } else { 1.0 };
        Self {
            name: name.into(),
            times,
            values,
            rates,
            bounds,
            max_violation: if max_violation.is_finite() { max_violation } else { 0.0 },
            tol: rel_tol * scale,
        }
    }

    pub fn holds(&self) -> bool {
        self.max_violation <= self.tol
    }

    /// Largest increase between consecutive logged values.
    pub fn max_increase(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0)
    }
}

impl fmt::Display for FunctionalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: max_violation={:.6e} tol={:.6e} holds={}",
            self.name,
            self.max_violation,
            self.tol,
            self.holds()
        )
    }
}
