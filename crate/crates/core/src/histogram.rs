//! Gaussian soft histograms.
//!
//! Each sample contributes a Gaussian kernel of width `sigma`, integrated
//! over a bin by the midpoint rule, to every bin center:
//!
//! ```text
//! m_k = Σ_i φ_σ(x_i − μ_k) · Δw,      Δw = (max − min) / bins
//! h_k = (m_k + ε) / Σ_j (m_j + ε)
//! ```
//!
//! so `h` is differentiable in every sample. Samples outside `[min, max]`
//! are not clamped; the kernel tails keep their gradients alive.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// Additive smoothing applied to every bin before normalizing.
pub const HIST_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct HistogramSpec {
    max: f64,
    min: f64,
    bins: usize,
    sigma: f64,
}

#[derive(Deserialize)]
struct RawSpec {
    max: f64,
    min: f64,
    bins: usize,
    sigma: f64,
}

impl TryFrom<RawSpec> for HistogramSpec {
    type Error = Error;

    fn try_from(r: RawSpec) -> Result<Self> {
        HistogramSpec::new(r.max, r.min, r.bins, r.sigma)
    }
}

impl Default for HistogramSpec {
    /// Range `[−10, 10]`, 50 bins, kernel width 0.2.
    fn default() -> Self {
        Self {
            max: 10.0,
            min: -10.0,
            bins: 50,
            sigma: 0.2,
        }
    }
}

impl HistogramSpec {
    pub fn new(max: f64, min: f64, bins: usize, sigma: f64) -> Result<Self> {
        if !(max.is_finite() && min.is_finite() && max > min) {
            return Err(Error::invalid(format!(
                "histogram range needs max > min, got max={max}, min={min}"
            )));
        }
        if bins < 2 {
            return Err(Error::invalid(format!("histogram needs >= 2 bins, got {bins}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self {
            max,
            min,
            bins,
            sigma,
        })
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn bin_width(&self) -> f64 {
        (self.max - self.min) / self.bins as f64
    }
}

/// `μ_k = min + (k + ½)·Δw`.
pub fn bin_centers(spec: &HistogramSpec) -> Vec<f64> {
    let w = spec.bin_width();
    (0..spec.bins)
        .map(|k| spec.min + (k as f64 + 0.5) * w)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftHistogram {
    pub spec: HistogramSpec,
    pub centers: Vec<f64>,
    /// Normalized, smoothed probability mass per bin.
    pub freqs: Vec<f64>,
    /// Total mass before smoothing and normalization.
    pub raw_mass: f64,
}

impl SoftHistogram {
    fn from_mass(spec: &HistogramSpec, centers: Vec<f64>, mass: &[f64]) -> Self {
        let raw_mass: f64 = mass.iter().sum();
        let total: f64 = mass.iter().map(|m| m + HIST_EPS).sum();
        let freqs = mass.iter().map(|m| (m + HIST_EPS) / total).collect();
        Self {
            spec: *spec,
            centers,
            freqs,
            raw_mass,
        }
    }

    pub fn argmax(&self) -> usize {
        self.freqs
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, &f)| {
                if f > best.1 {
                    (k, f)
                } else {
                    best
                }
            })
            .0
    }
}

fn check_samples(samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::invalid("soft histogram needs at least one sample"));
    }
    if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { row: i, col: 0 });
    }
    Ok(())
}

#[inline]
fn kernel(x: f64, center: f64, sigma: f64, norm: f64) -> f64 {
    let u = (x - center) / sigma;
    norm * (-0.5 * u * u).exp()
}

pub fn soft_hist(samples: &[f64], spec: &HistogramSpec) -> Result<SoftHistogram> {
    check_samples(samples)?;
    let centers = bin_centers(spec);
    let w = spec.bin_width();
    let norm = w / (spec.sigma * (2.0 * PI).sqrt());
    let mass: Vec<f64> = centers
        .iter()
        .map(|&c| samples.iter().map(|&x| kernel(x, c, spec.sigma, norm)).sum())
        .collect();
    Ok(SoftHistogram::from_mass(spec, centers, &mass))
}

/// Soft histogram plus the `bins × n` Jacobian `∂freq_k / ∂x_i`.
pub fn soft_hist_with_grad(
    samples: &[f64],
    spec: &HistogramSpec,
) -> Result<(SoftHistogram, Matrix)> {
    check_samples(samples)?;
    let n = samples.len();
    let bins = spec.bins;
    let centers = bin_centers(spec);
    let w = spec.bin_width();
    let sigma = spec.sigma;
    let norm = w / (sigma * (2.0 * PI).sqrt());
    let inv_var = 1.0 / (sigma * sigma);

    // dmass[k, i] = ∂m_k/∂x_i
    let mut dmass = Matrix::zeros(bins, n);
    let mut mass = vec![0.0; bins];
    for (k, &c) in centers.iter().enumerate() {
        let row = dmass.row_mut(k);
        let mut acc = 0.0;
        for (i, &x) in samples.iter().enumerate() {
            let kv = kernel(x, c, sigma, norm);
            acc += kv;
            row[i] = -kv * (x - c) * inv_var;
        }
        mass[k] = acc;
    }
    let hist = SoftHistogram::from_mass(spec, centers, &mass);
    let total: f64 = mass.iter().map(|m| m + HIST_EPS).sum();

    let mut dtotal = vec![0.0; n];
    for k in 0..bins {
        for (t, d) in dtotal.iter_mut().zip(dmass.row(k)) {
            *t += d;
        }
    }
    let mut jac = Matrix::zeros(bins, n);
    for k in 0..bins {
        let f = hist.freqs[k];
        let src = dmass.row(k);
        let dst = jac.row_mut(k);
        for i in 0..n {
            dst[i] = (src[i] - f * dtotal[i]) / total;
        }
    }
    Ok((hist, jac))
}

/// Expected soft histogram of N(0, 1) under `spec`: the standard normal
/// convolved with the N(0, σ²) kernel, sampled at the bin centers.
pub fn gaussian_reference(spec: &HistogramSpec) -> SoftHistogram {
    let centers = bin_centers(spec);
    let var = 1.0 + spec.sigma * spec.sigma;
    let norm = spec.bin_width() / (2.0 * PI * var).sqrt();
    let mass: Vec<f64> = centers
        .iter()
        .map(|&c| norm * (-c * c / (2.0 * var)).exp())
        .collect();
    SoftHistogram::from_mass(spec, centers, &mass)
}

fn check_compatible(p: &SoftHistogram, q: &SoftHistogram) -> Result<()> {
    if p.spec != q.spec || p.freqs.len() != q.freqs.len() {
        return Err(Error::SpecMismatch);
    }
    Ok(())
}

/// `KL(p ‖ q) = Σ_k p_k ln(p_k / q_k)`.
pub fn hist_kl(p: &SoftHistogram, q: &SoftHistogram) -> Result<f64> {
    check_compatible(p, q)?;
    let kl: f64 = p
        .freqs
        .iter()
        .zip(&q.freqs)
        .map(|(&a, &b)| a * (a / b).ln())
        .sum();
    // Rounding can leave a tiny negative residue when p ≈ q.
    Ok(kl.max(0.0))
}

/// `∂KL(p ‖ q)/∂p_k = ln(p_k / q_k) + 1`.
pub(crate) fn hist_kl_grad_p(p: &SoftHistogram, q: &SoftHistogram) -> Result<Vec<f64>> {
    check_compatible(p, q)?;
    Ok(p.freqs
        .iter()
        .zip(&q.freqs)
        .map(|(&a, &b)| (a / b).ln() + 1.0)
        .collect())
}
