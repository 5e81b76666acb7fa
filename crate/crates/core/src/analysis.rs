//! Linear fits of splitting versus Rabi frequency and their ratios.

use serde::{Deserialize, Serialize};

use crate::spectroscopy::BandCurve;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    /// Exactly zero for origin-constrained fits.
    pub intercept: f64,
    /// `None` when there are no residual degrees of freedom.
    pub slope_std_err: Option<f64>,
    /// Unweighted root-mean-square residual.
    pub residual_rms: f64,
    pub point_count: usize,
    pub constrained: bool,
}

/// Ordinary least squares, optionally through the origin.
pub fn fit_linear(points: &[(f64, f64)], constrain_origin: bool) -> Result<LinearFit> {
    fit_linear_weighted(points, &vec![1.0; points.len()], constrain_origin)
}

/// Weights `1 / x^2`, appropriate when the noise on `y` is proportional to
/// `y` itself (multiplicative noise on a line through the origin).
pub fn relative_weights(points: &[(f64, f64)]) -> Result<Vec<f64>> {
    points
        .iter()
        .map(|&(x, _)| {
            if x == 0.0 || !x.is_finite() {
                Err(Error::Fit("relative weighting needs non-zero x".into()))
            } else {
                Ok(1.0 / (x * x))
            }
        })
        .collect()
}

/// Weighted least squares. The slope error is scaled by the observed
/// weighted residual variance, so only relative weights matter.
pub fn fit_linear_weighted(points: &[(f64, f64)], weights: &[f64], constrain_origin: bool) -> Result<LinearFit> {
    let n = points.len();
    if weights.len() != n {
        return Err(Error::Fit(format!("{} weights for {n} points", weights.len())));
    }
    if n < 2 {
        return Err(Error::Fit(format!("need at least 2 points, got {n}")));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::Fit("non-finite data point".into()));
    }
    if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::Fit("weights must be positive and finite".into()));
    }
    let x0 = points[0].0;
    if points.iter().all(|p| p.0 == x0) {
        return Err(Error::Fit("degenerate design: all x values equal".into()));
    }

    let sw: f64 = weights.iter().sum();
    let (slope, intercept, sxx) = if constrain_origin {
        let sxx: f64 = points.iter().zip(weights).map(|(p, w)| w * p.0 * p.0).sum();
        let sxy: f64 = points.iter().zip(weights).map(|(p, w)| w * p.0 * p.1).sum();
        (sxy / sxx, 0.0, sxx)
    } else {
        let mx = points.iter().zip(weights).map(|(p, w)| w * p.0).sum::<f64>() / sw;
        let my = points.iter().zip(weights).map(|(p, w)| w * p.1).sum::<f64>() / sw;
        let sxx: f64 = points.iter().zip(weights).map(|(p, w)| w * (p.0 - mx).powi(2)).sum();
        let sxy: f64 = points.iter().zip(weights).map(|(p, w)| w * (p.0 - mx) * (p.1 - my)).sum();
        let slope = sxy / sxx;
        (slope, my - slope * mx, sxx)
    };

    let residuals: Vec<f64> = points.iter().map(|&(x, y)| y - (intercept + slope * x)).collect();
    let residual_rms = (residuals.iter().map(|r| r * r).sum::<f64>() / n as f64).sqrt();
    let params = if constrain_origin { 1 } else { 2 };
    let dof = n - params;
    let slope_std_err = (dof > 0).then(|| {
        let ssr: f64 = residuals.iter().zip(weights).map(|(r, w)| w * r * r).sum();
        (ssr / dof as f64 / sxx).sqrt()
    });
    Ok(LinearFit {
        slope,
        intercept,
        slope_std_err,
        residual_rms,
        point_count: n,
        constrained: constrain_origin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub ratio: f64,
    /// First-order propagated error; `None` if either fit has none.
    pub std_err: Option<f64>,
}

/// `slope_2 / slope_1` with delta-method uncertainty, treating the two fits
/// as independent.
pub fn slope_ratio(fit_two_atom: &LinearFit, fit_single: &LinearFit) -> Result<RatioEstimate> {
    let (a, b) = (fit_two_atom.slope, fit_single.slope);
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::Domain(format!("slopes must be positive, got {a} and {b}")));
    }
    let ratio = a / b;
    let std_err = match (fit_two_atom.slope_std_err, fit_single.slope_std_err) {
        (Some(ea), Some(eb)) => Some(ratio * ((ea / a).powi(2) + (eb / b).powi(2)).sqrt()),
        _ => None,
    };
    Ok(RatioEstimate { ratio, std_err })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    pub max_half_width: f64,
    pub mean_half_width: f64,
    /// Largest half-width relative to `|nominal|`, over points with non-zero nominal.
    pub max_relative_half_width: f64,
}

pub fn summarize_band(curve: &BandCurve) -> Result<BandSummary> {
    let len = curve.nominal.len();
    if len == 0 || curve.lower.len() != len || curve.upper.len() != len {
        return Err(Error::Domain("band curve arrays are empty or mismatched".into()));
    }
    let half: Vec<f64> = curve.lower.iter().zip(&curve.upper).map(|(lo, hi)| 0.5 * (hi - lo)).collect();
    let relative = half
        .iter()
        .zip(&curve.nominal)
        .filter(|(_, nominal)| **nominal != 0.0)
        .map(|(h, nominal)| h / nominal.abs())
        .fold(0.0f64, f64::max);
    Ok(BandSummary {
        max_half_width: half.iter().copied().fold(0.0f64, f64::max),
        mean_half_width: half.iter().sum::<f64>() / len as f64,
        max_relative_half_width: relative,
    })
}
