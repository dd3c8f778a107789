//! Weighted power-law regression and normal fits with 95 % confidence intervals.
//!
//! Power-law fits regress a dB-domain value on `log10(d)`:
//! `value = alpha + 10 * beta * log10(d) + eps`. With log-distance bin weighting
//! each sample is weighted by the inverse population of its bin, so every
//! occupied bin carries the same total weight. Weights are rescaled to sum to
//! the Kish effective sample size `n_eff = (Σw)² / Σw²`, and the interval
//! estimates use `n_eff − 2` degrees of freedom.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

const CONFIDENCE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightingScheme {
    Uniform,
    #[serde(alias = "logdistancebins")]
    LogBins,
}

impl FromStr for WeightingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(WeightingScheme::Uniform),
            "logbins" => Ok(WeightingScheme::LogBins),
            other => Err(Error::invalid("weighting", format!("unknown scheme `{other}`"))),
        }
    }
}

impl fmt::Display for WeightingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightingScheme::Uniform => "uniform",
            WeightingScheme::LogBins => "logbins",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceWeighting {
    pub scheme: WeightingScheme,
    /// Bin width in decades of distance.
    pub bin_width: f64,
}

impl Default for DistanceWeighting {
    fn default() -> Self {
        Self {
            scheme: WeightingScheme::LogBins,
            bin_width: 0.1,
        }
    }
}

impl DistanceWeighting {
    pub fn uniform() -> Self {
        Self {
            scheme: WeightingScheme::Uniform,
            bin_width: 0.1,
        }
    }

    /// Raw (unnormalized) weight per sample.
    pub fn weights(&self, distances: &[f64]) -> Result<Vec<f64>> {
        if !(self.bin_width.is_finite() && self.bin_width > 0.0) {
            return Err(Error::invalid("weighting", "bin width must be positive"));
        }
        match self.scheme {
            WeightingScheme::Uniform => Ok(vec![1.0; distances.len()]),
            WeightingScheme::LogBins => {
                let logs: Vec<f64> = distances.iter().map(|d| d.log10()).collect();
                let anchor = logs.iter().copied().fold(f64::INFINITY, f64::min);
                let bins: Vec<i64> = logs
                    .iter()
                    .map(|l| ((l - anchor) / self.bin_width + 1e-9).floor() as i64)
                    .collect();
                Ok(bins
                    .iter()
                    .map(|b| 1.0 / bins.iter().filter(|x| *x == b).count() as f64)
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawCi {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub beta: f64,
    pub sigma_shadow: f64,
    /// Absent when the effective degrees of freedom are not positive.
    pub ci95: Option<PowerLawCi>,
    pub n_points: usize,
    pub n_eff: f64,
    pub weighting: DistanceWeighting,
    /// Normalized weights (summing to `n_eff`) in sample order.
    pub weights: Vec<f64>,
}

impl PowerLawFit {
    pub fn predict(&self, distance_m: f64) -> f64 {
        self.alpha + 10.0 * self.beta * distance_m.log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalCi {
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalFit {
    pub mu: f64,
    pub sigma: f64,
    pub ci95: NormalCi,
    pub n: usize,
}

fn t_quantile(dof: f64) -> f64 {
    StudentsT::new(0.0, 1.0, dof)
        .expect("positive dof")
        .inverse_cdf(0.5 + CONFIDENCE / 2.0)
}

/// Multiplicative bounds `(lo, hi)` on a standard deviation from the chi-square interval.
fn sigma_ci_factors(dof: f64) -> (f64, f64) {
    let chi = ChiSquared::new(dof).expect("positive dof");
    let tail = (1.0 - CONFIDENCE) / 2.0;
    let upper = chi.inverse_cdf(1.0 - tail);
    let lower = chi.inverse_cdf(tail);
    ((dof / upper).sqrt(), (dof / lower).sqrt())
}

/// Weighted least squares of `value_db` on `log10(distance)`.
pub fn fit_power_law(samples: &[(f64, f64)], weighting: &DistanceWeighting) -> Result<PowerLawFit> {
    if samples.len() < 2 {
        return Err(Error::invalid(
            "power-law fit",
            format!("need at least 2 samples, got {}", samples.len()),
        ));
    }
    if let Some((d, v)) = samples
        .iter()
        .find(|(d, v)| !(d.is_finite() && *d > 0.0 && v.is_finite()))
    {
        return Err(Error::invalid("power-law fit", format!("bad sample ({d} m, {v})")));
    }
    let d0 = samples[0].0;
    if samples.iter().all(|(d, _)| *d == d0) {
        return Err(Error::invalid("power-law fit", "all samples share one distance"));
    }

    let distances: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let raw = weighting.weights(&distances)?;
    let sum_w: f64 = raw.iter().sum();
    let n_eff = sum_w * sum_w / raw.iter().map(|w| w * w).sum::<f64>();
    let weights: Vec<f64> = raw.iter().map(|w| w * n_eff / sum_w).collect();

    let xs: Vec<f64> = distances.iter().map(|d| d.log10()).collect();
    let sw: f64 = weights.iter().sum();
    let x_bar = weights.iter().zip(&xs).map(|(w, x)| w * x).sum::<f64>() / sw;
    let y_bar = weights.iter().zip(samples).map(|(w, s)| w * s.1).sum::<f64>() / sw;
    let sxx: f64 = weights.iter().zip(&xs).map(|(w, x)| w * (x - x_bar).powi(2)).sum();
    let sxy: f64 = weights
        .iter()
        .zip(&xs)
        .zip(samples)
        .map(|((w, x), s)| w * (x - x_bar) * (s.1 - y_bar))
        .sum();
    if !(sxx > 0.0) {
        return Err(Error::invalid("power-law fit", "degenerate distances"));
    }
    let slope = sxy / sxx;
    let alpha = y_bar - slope * x_bar;
    let beta = slope / 10.0;

    let ssr: f64 = weights
        .iter()
        .zip(&xs)
        .zip(samples)
        .map(|((w, x), s)| w * (s.1 - alpha - slope * x).powi(2))
        .sum();
    let dof = n_eff - 2.0;
    let (sigma_shadow, ci95) = if dof > 1e-9 {
        let var = ssr / dof;
        let sigma = var.sqrt();
        let se_slope = (var / sxx).sqrt();
        let se_alpha = (var * (1.0 / sw + x_bar * x_bar / sxx)).sqrt();
        let t = t_quantile(dof);
        let (flo, fhi) = sigma_ci_factors(dof);
        (
            sigma,
            Some(PowerLawCi {
                alpha_lo: alpha - t * se_alpha,
                alpha_hi: alpha + t * se_alpha,
                beta_lo: beta - t * se_slope / 10.0,
                beta_hi: beta + t * se_slope / 10.0,
                sigma_lo: sigma * flo,
                sigma_hi: sigma * fhi,
            }),
        )
    } else {
        (0.0, None)
    };

    Ok(PowerLawFit {
        alpha,
        beta,
        sigma_shadow,
        ci95,
        n_points: samples.len(),
        n_eff,
        weighting: *weighting,
        weights,
    })
}

/// Residuals `value − (alpha + 10 beta log10 d)` in sample order.
pub fn shadowing_residuals(samples: &[(f64, f64)], fit: &PowerLawFit) -> Vec<f64> {
    samples.iter().map(|(d, v)| v - fit.predict(*d)).collect()
}

/// Sample mean and (n−1) standard deviation, with t and chi-square intervals.
pub fn fit_normal(values: &[f64]) -> Result<NormalFit> {
    let n = values.len();
    if n < 2 {
        return Err(Error::invalid("normal fit", format!("need at least 2 values, got {n}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("normal fit", "non-finite value"));
    }
    let mu = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sigma = var.sqrt();
    let dof = (n - 1) as f64;
    let half = t_quantile(dof) * sigma / (n as f64).sqrt();
    let (flo, fhi) = sigma_ci_factors(dof);
    Ok(NormalFit {
        mu,
        sigma,
        ci95: NormalCi {
            mu_lo: mu - half,
            mu_hi: mu + half,
            sigma_lo: sigma * flo,
            sigma_hi: sigma * fhi,
        },
        n,
    })
}
