//! Gaussian kernel primitives: the information potential field (IPF), the
//! scalar information potential (IP) and Renyi's quadratic entropy.
//!
//! The kernel is the unnormalized exponential `exp(-u²/2σ²)`, so every field
//! value lies in `(0, 1]`. [`parzen_scale`] recovers the Parzen density
//! normalization when a true density is needed.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite real-valued sample sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    samples: Vec<f64>,
    pub sample_rate_hz: Option<f64>,
    pub label: String,
}

impl Signal {
    /// Builds a signal, rejecting NaN and infinite samples.
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("signal samples"));
        }
        Ok(Signal {
            samples,
            sample_rate_hz: None,
            label: String::new(),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_sample_rate(mut self, hz: f64) -> Result<Self> {
        if !(hz.is_finite() && hz > 0.0) {
            return Err(Error::param("sample_rate_hz", "must be positive"));
        }
        self.sample_rate_hz = Some(hz);
        Ok(self)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Replaces the samples while keeping rate and label.
    pub(crate) fn map_samples(&self, samples: Vec<f64>) -> Signal {
        Signal {
            samples,
            sample_rate_hz: self.sample_rate_hz,
            label: self.label.clone(),
        }
    }
}

impl AsRef<[f64]> for Signal {
    fn as_ref(&self) -> &[f64] {
        &self.samples
    }
}

/// Kernel width plus the numerical guards used downstream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub sigma: f64,
    /// Division guard for near-zero mode wave-functions.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Step used by finite-difference oracles.
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
}

fn default_epsilon() -> f64 {
    1e-8
}

fn default_fd_step() -> f64 {
    1e-4
}

impl KernelConfig {
    pub fn new(sigma: f64) -> Result<Self> {
        let cfg = KernelConfig {
            sigma,
            epsilon: default_epsilon(),
            fd_step: default_fd_step(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::param("sigma", "must be positive and finite"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::param("epsilon", "must be positive and finite"));
        }
        if !(self.fd_step.is_finite() && self.fd_step > 0.0) {
            return Err(Error::param("fd_step", "must be positive and finite"));
        }
        Ok(())
    }

    /// Same guards, different width.
    pub fn with_sigma(&self, sigma: f64) -> Self {
        KernelConfig { sigma, ..*self }
    }
}

/// `exp(-u²/2σ²)`.
pub fn gaussian_kernel(u: f64, sigma: f64) -> Result<f64> {
    if !u.is_finite() || !sigma.is_finite() {
        return Err(Error::NonFinite("kernel argument"));
    }
    if sigma <= 0.0 {
        return Err(Error::param("sigma", "must be positive"));
    }
    Ok(kernel_unchecked(u, two_sigma_sq(sigma)))
}

#[inline]
pub(crate) fn two_sigma_sq(sigma: f64) -> f64 {
    2.0 * sigma * sigma
}

#[inline]
pub(crate) fn kernel_unchecked(u: f64, two_sigma_sq: f64) -> f64 {
    (-(u * u) / two_sigma_sq).exp()
}

/// Factor turning the unnormalized kernel into a unit-mass Parzen window,
/// `1/(σ√(2π))`.
pub fn parzen_scale(sigma: f64) -> f64 {
    1.0 / (sigma * (2.0 * PI).sqrt())
}

/// Information potential field `(1/N) Σ_i G_σ(x − x_i)`.
pub fn ipf(x: f64, samples: &[f64], cfg: &KernelConfig) -> Result<f64> {
    check_inputs(x, samples, cfg)?;
    Ok(mean_kernel(x, samples, two_sigma_sq(cfg.sigma)))
}

/// Mean kernel sum with no validation. Shared by [`ipf`] and the streaming
/// engine so both produce identical bits.
#[inline]
pub(crate) fn mean_kernel(x: f64, samples: &[f64], two_sigma_sq: f64) -> f64 {
    let mut sum = 0.0;
    for &xi in samples {
        sum += kernel_unchecked(x - xi, two_sigma_sq);
    }
    sum / samples.len() as f64
}

/// Mean kernel sum and its first two spatial derivatives at `x`.
///
/// Returns `(S, S′, S″)` with `S` bit-identical to [`mean_kernel`].
pub(crate) fn kernel_moments(x: f64, samples: &[f64], sigma: f64) -> (f64, f64, f64) {
    let tss = two_sigma_sq(sigma);
    let inv_var = 1.0 / (sigma * sigma);
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for &xi in samples {
        let d = x - xi;
        let g = kernel_unchecked(d, tss);
        s0 += g;
        s1 += -d * inv_var * g;
        s2 += (d * d * inv_var * inv_var - inv_var) * g;
    }
    let n = samples.len() as f64;
    (s0 / n, s1 / n, s2 / n)
}

/// Information potential `(1/N²) Σ_i Σ_j G_{σ√2}(x_i − x_j)`.
pub fn information_potential(samples: &[f64], cfg: &KernelConfig) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    cfg.validate()?;
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("samples"));
    }
    // G_{σ√2} has 2(σ√2)² = 4σ² in the exponent denominator.
    let tss = 4.0 * cfg.sigma * cfg.sigma;
    let n = samples.len();
    let mut total = 0.0;
    for (i, &xi) in samples.iter().enumerate() {
        // diagonal terms are exactly one; off-diagonal pairs counted twice
        total += 1.0;
        for &xj in &samples[i + 1..] {
            total += 2.0 * kernel_unchecked(xi - xj, tss);
        }
    }
    Ok(total / (n * n) as f64)
}

/// Renyi's quadratic entropy estimate `−log V(X)`.
pub fn renyi_quadratic_entropy(samples: &[f64], cfg: &KernelConfig) -> Result<f64> {
    let ip = information_potential(samples, cfg)?;
    // IP ≤ 1 up to rounding; clamp so the estimate is never negative zero or below.
    Ok((-ip.ln()).max(0.0))
}

fn check_inputs(x: f64, samples: &[f64], cfg: &KernelConfig) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    cfg.validate()?;
    if !x.is_finite() {
        return Err(Error::NonFinite("evaluation point"));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("samples"));
    }
    Ok(())
}
