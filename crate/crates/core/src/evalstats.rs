//! Maxima statistics: correlation, R², Gaussian kernel density, most
//! probable maximum and percentiles, assembled into method-vs-truth reports.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("samples have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} samples, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("correlation is undefined for a zero-variance sample")]
    UndefinedCorrelation,
    #[error("R² is undefined when the truth sample has zero variance")]
    ZeroTruthVariance,
    #[error("all samples are identical ({0}); report a point mass instead of a density")]
    PointMass(f64),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooFew {
            needed: 2,
            got: x.len(),
        });
    }
    Ok(())
}

/// Pearson correlation ρ = cov(x, y)/(σx·σy).
pub fn correlation(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::UndefinedCorrelation);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Coefficient of determination of `estimate` against `truth`:
/// 1 − Σ(yᵢ − fᵢ)²/Σ(yᵢ − ȳ)².
pub fn r_squared(truth: &[f64], estimate: &[f64]) -> Result<f64, StatsError> {
    check_pair(truth, estimate)?;
    let m = mean(truth);
    let ss_tot: f64 = truth.iter().map(|y| (y - m).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(StatsError::ZeroTruthVariance);
    }
    let ss_res: f64 = truth.iter().zip(estimate).map(|(y, f)| (y - f).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Sample standard deviation with n − 1 in the denominator.
pub fn std_dev(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)).sqrt()
}

/// Silverman's rule of thumb, 1.06·σ̂·n^(−1/5).
pub fn silverman_bandwidth(x: &[f64]) -> f64 {
    1.06 * std_dev(x) * (x.len() as f64).powf(-0.2)
}

/// Gaussian kernel density estimate.
#[derive(Debug, Clone)]
pub struct GaussianKde<'a> {
    samples: &'a [f64],
    bandwidth: f64,
}

impl<'a> GaussianKde<'a> {
    /// Uses Silverman's bandwidth when `bandwidth` is `None`.
    pub fn new(samples: &'a [f64], bandwidth: Option<f64>) -> Result<Self, StatsError> {
        if samples.len() < 2 {
            return Err(StatsError::TooFew {
                needed: 2,
                got: samples.len(),
            });
        }
        if samples.iter().all(|&v| v == samples[0]) {
            return Err(StatsError::PointMass(samples[0]));
        }
        let bandwidth = bandwidth.unwrap_or_else(|| silverman_bandwidth(samples));
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(StatsError::Invalid(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(Self { samples, bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn density_at(&self, x: f64) -> f64 {
        let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * self.bandwidth);
        self.samples
            .iter()
            .map(|s| {
                let u = (x - s) / self.bandwidth;
                (-0.5 * u * u).exp()
            })
            .sum::<f64>()
            * norm
            / self.samples.len() as f64
    }

    /// Density on `points` uniformly spaced nodes over [min − 3h, max + 3h].
    pub fn curve(&self, points: usize) -> PdfCurve {
        let lo = self.samples.iter().cloned().fold(f64::INFINITY, f64::min) - 3.0 * self.bandwidth;
        let hi = self.samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0 * self.bandwidth;
        let step = (hi - lo) / (points - 1) as f64;
        let support: Vec<f64> = (0..points).map(|i| lo + i as f64 * step).collect();
        let density = support.iter().map(|&x| self.density_at(x)).collect();
        PdfCurve { support, density }
    }
}

/// Density on a uniform support grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdfCurve {
    pub support: Vec<f64>,
    pub density: Vec<f64>,
}

impl PdfCurve {
    pub fn integral(&self) -> f64 {
        self.support
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, d)| 0.5 * (x[1] - x[0]) * (d[0] + d[1]))
            .sum()
    }
}

pub const DEFAULT_KDE_POINTS: usize = 1024;

pub fn kde(maxima: &[f64], bandwidth: Option<f64>, points: usize) -> Result<PdfCurve, StatsError> {
    if points < 2 {
        return Err(StatsError::Invalid("grid needs at least two points".into()));
    }
    Ok(GaussianKde::new(maxima, bandwidth)?.curve(points))
}

/// Support point of maximum density; ties go to the lowest support value.
pub fn most_probable_maximum(pdf: &PdfCurve) -> f64 {
    let mut best = 0;
    for (i, &d) in pdf.density.iter().enumerate() {
        if d > pdf.density[best] {
            best = i;
        }
    }
    pdf.support[best]
}

/// Empirical quantile with linear interpolation between order statistics:
/// position (n − 1)·p in the sorted sample.
pub fn percentile(maxima: &[f64], p: f64) -> Result<f64, StatsError> {
    if maxima.is_empty() {
        return Err(StatsError::TooFew { needed: 1, got: 0 });
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(StatsError::Invalid(format!("percentile fraction must lie in (0, 1), got {p}")));
    }
    let mut sorted = maxima.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Per-realization maxima of one method paired with the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaximaSample {
    pub realization_id: usize,
    pub method_max: f64,
    pub truth_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub n: usize,
    pub correlation: f64,
    pub r_squared: f64,
    pub mpm_method: f64,
    pub mpm_truth: f64,
    pub mpm_relative_error: f64,
    pub p95_method: f64,
    pub p95_truth: f64,
    pub p95_relative_error: f64,
}

/// Report plus the plot-ready curves it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportData {
    pub report: MetricsReport,
    pub pdf_method: PdfCurve,
    pub pdf_truth: PdfCurve,
}

pub const MIN_REPORT_PAIRS: usize = 10;

pub fn build_report(method: &str, pairs: &[MaximaSample]) -> Result<ReportData, StatsError> {
    if pairs.len() < MIN_REPORT_PAIRS {
        return Err(StatsError::TooFew {
            needed: MIN_REPORT_PAIRS,
            got: pairs.len(),
        });
    }
    if let Some(bad) = pairs
        .iter()
        .find(|p| !(p.method_max.is_finite() && p.truth_max.is_finite()))
    {
        return Err(StatsError::Invalid(format!(
            "non-finite maximum in realization {}",
            bad.realization_id
        )));
    }
    let x: Vec<f64> = pairs.iter().map(|p| p.method_max).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.truth_max).collect();
    let pdf_method = kde(&x, None, DEFAULT_KDE_POINTS)?;
    let pdf_truth = kde(&y, None, DEFAULT_KDE_POINTS)?;
    let mpm_method = most_probable_maximum(&pdf_method);
    let mpm_truth = most_probable_maximum(&pdf_truth);
    let p95_method = percentile(&x, 0.95)?;
    let p95_truth = percentile(&y, 0.95)?;
    let report = MetricsReport {
        method: method.to_string(),
        n: pairs.len(),
        correlation: correlation(&x, &y)?,
        r_squared: r_squared(&y, &x)?,
        mpm_method,
        mpm_truth,
        mpm_relative_error: (mpm_method - mpm_truth).abs() / mpm_truth,
        p95_method,
        p95_truth,
        p95_relative_error: (p95_method - p95_truth).abs() / p95_truth,
    };
    Ok(ReportData {
        report,
        pdf_method,
        pdf_truth,
    })
}
