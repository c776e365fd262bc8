//! Empirical convergence order of an error sequence.

use serde::Serialize;
use thiserror::Error;

/// Errors at or below this are treated as converged to roundoff.
pub const DEFAULT_FLOOR: f64 = 1e-10;
/// Errors at or above this are outside the local regime.
pub const DEFAULT_CEILING: f64 = 1e-2;
/// Number of `(e_k, e_{k+1})` pairs used by the fit.
pub const DEFAULT_PAIRS: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("need at least 3 consecutive errors in ({floor:e}, {ceiling:e}), found {found}")]
    InsufficientData {
        floor: f64,
        ceiling: f64,
        found: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    /// Slope ρ of `log e_{k+1} = ρ log e_k + c`.
    pub order: f64,
    pub intercept: f64,
    /// Sweep indices (into the input) of the errors used.
    pub sweeps: Vec<usize>,
}

/// Least-squares fit of `log e_{k+1}` against `log e_k` over the last run of
/// consecutive errors inside `(floor, ceiling)`, using at most `max_pairs` pairs.
pub fn fit_order(
    errors: &[f64],
    floor: f64,
    ceiling: f64,
    max_pairs: usize,
) -> Result<RateFit, AnalysisError> {
    let inside = |e: f64| e.is_finite() && e > floor && e < ceiling;
    let end = errors.iter().rposition(|&e| inside(e));
    let Some(end) = end else {
        return Err(AnalysisError::InsufficientData {
            floor,
            ceiling,
            found: 0,
        });
    };
    let mut start = end;
    while start > 0 && inside(errors[start - 1]) && end - (start - 1) <= max_pairs {
        start -= 1;
    }
    let found = end - start + 1;
    if found < 3 {
        return Err(AnalysisError::InsufficientData {
            floor,
            ceiling,
            found,
        });
    }
    let xs: Vec<f64> = (start..end).map(|k| errors[k].ln()).collect();
    let ys: Vec<f64> = (start + 1..=end).map(|k| errors[k].ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return Err(AnalysisError::InsufficientData {
            floor,
            ceiling,
            found: 1,
        });
    }
    let order = sxy / sxx;
    Ok(RateFit {
        order,
        intercept: my - order * mx,
        sweeps: (start..=end).collect(),
    })
}

/// [`fit_order`] with the default window.
pub fn fit_order_default(errors: &[f64]) -> Result<RateFit, AnalysisError> {
    fit_order(errors, DEFAULT_FLOOR, DEFAULT_CEILING, DEFAULT_PAIRS)
}
