//! Order-fixed reductions and log-log rate fitting.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Pairwise (cascade) summation in a fixed order, independent of how the
/// inputs were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl MeanEstimate {
    /// Sample mean and standard error; the standard error is zero for fewer than two values.
    pub fn from_values(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
                samples: 0,
            };
        }
        let mean = pairwise_sum(xs) / n as f64;
        let stderr = if n < 2 {
            0.0
        } else {
            let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
            (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
        };
        Self {
            mean,
            stderr,
            samples: n,
        }
    }
}

/// Ordinary least squares of `log2 y` on `log2 δ` with a 95% Student-t
/// interval for the slope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some(&(d, e)) = points.iter().find(|&&(d, e)| !(d > 0.0 && e > 0.0) || !d.is_finite() || !e.is_finite()) {
        return Err(Error::Fit(format!("non-positive or non-finite point ({d}, {e})")));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.log2()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log2()).collect();
    let mx = pairwise_sum(&xs) / n;
    let my = pairwise_sum(&ys) / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all mesh sizes are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let dof = n - 2.0;
    let se = (sse / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::Fit(e.to_string()))?
        .inverse_cdf(0.975);
    let half = t * se;
    Ok(RateFit {
        slope,
        intercept,
        ci_low: slope - half,
        ci_high: slope + half,
        r_squared: if syy > 0.0 { 1.0 - sse / syy } else { 1.0 },
        points: points.len(),
    })
}
