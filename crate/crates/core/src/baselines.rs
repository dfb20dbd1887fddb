//! Comparison quantifiers: Bayesian surprise over a gridded Parzen model,
//! interval entropy differences, and the classical IPF evaluated causally.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::engine::fmt_f64;
use crate::error::{Error, Result};
use crate::kernel::{
    kernel_unchecked, mean_kernel, renyi_quadratic_entropy, two_sigma_sq, KernelConfig,
};

/// Gridded model space for the surprise baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurpriseConfig {
    pub grid: Vec<f64>,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub window: Option<usize>,
}

pub const DEFAULT_GRID_POINTS: usize = 256;
pub const MIN_GRID_POINTS: usize = 16;

impl SurpriseConfig {
    /// `points` evenly spaced values over `[min − 3σ, max + 3σ]` of `reference`.
    pub fn spanning(reference: &[f64], kernel: KernelConfig, points: usize) -> Result<Self> {
        if reference.is_empty() {
            return Err(Error::EmptySamples);
        }
        let lo = reference.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * kernel.sigma;
        let hi = reference.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * kernel.sigma;
        let step = (hi - lo) / (points.max(2) - 1) as f64;
        let grid = (0..points).map(|j| lo + j as f64 * step).collect();
        let cfg = SurpriseConfig {
            grid,
            kernel,
            window: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if self.grid.len() < MIN_GRID_POINTS {
            return Err(Error::param(
                "grid",
                format!(
                    "need at least {MIN_GRID_POINTS} points, got {}",
                    self.grid.len()
                ),
            ));
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("grid", "must be strictly increasing"));
        }
        if matches!(self.window, Some(0)) {
            return Err(Error::param("window", "must be positive"));
        }
        Ok(())
    }

    /// Trapezoidal quadrature weights of the grid.
    fn trapezoid_weights(&self) -> Vec<f64> {
        let g = &self.grid;
        let n = g.len();
        (0..n)
            .map(|j| {
                let left = if j > 0 { g[j] - g[j - 1] } else { 0.0 };
                let right = if j + 1 < n { g[j + 1] - g[j] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect()
    }
}

/// Per-sample surprise values plus the samples at which the prior had to be
/// floored before taking logarithms.
#[derive(Debug, Clone, PartialEq)]
pub struct SurpriseTrace {
    pub values: Vec<f64>,
    pub floored: Vec<usize>,
}

/// KL divergence between the gridded Parzen posterior (samples up to and
/// including `i`) and prior (samples before `i`), each renormalized to unit
/// mass under trapezoidal weights. Sample 0 has surprise 0.
pub fn bayesian_surprise(signal: &[f64], cfg: &SurpriseConfig) -> Result<SurpriseTrace> {
    cfg.validate()?;
    if signal.len() < 2 {
        return Err(Error::TooShort {
            required: 2,
            actual: signal.len(),
        });
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("signal"));
    }
    let tss = two_sigma_sq(cfg.kernel.sigma);
    let weights = cfg.trapezoid_weights();
    let floor = cfg.kernel.epsilon;
    let g = cfg.grid.len();

    let mut values = Vec::with_capacity(signal.len());
    let mut floored = Vec::new();
    values.push(0.0);

    // running kernel sums over the grid, used when there is no window
    let mut sums = vec![0.0; g];
    accumulate(&mut sums, &cfg.grid, signal[0], tss);

    let mut prior = vec![0.0; g];
    let mut posterior = vec![0.0; g];
    for i in 1..signal.len() {
        match cfg.window {
            None => {
                prior.copy_from_slice(&sums);
                accumulate(&mut sums, &cfg.grid, signal[i], tss);
                posterior.copy_from_slice(&sums);
            }
            Some(w) => {
                // rebuilt each step so no cancellation error builds up
                prior.fill(0.0);
                for &x in &signal[i.saturating_sub(w)..i] {
                    accumulate(&mut prior, &cfg.grid, x, tss);
                }
                posterior.fill(0.0);
                for &x in &signal[(i + 1).saturating_sub(w)..=i] {
                    accumulate(&mut posterior, &cfg.grid, x, tss);
                }
            }
        }
        let mut was_floored = false;
        let kl = kl_on_grid(&posterior, &prior, &weights, floor, &mut was_floored);
        if was_floored {
            floored.push(i);
        }
        values.push(kl);
    }
    Ok(SurpriseTrace { values, floored })
}

fn accumulate(sums: &mut [f64], grid: &[f64], x: f64, tss: f64) {
    for (s, &gj) in sums.iter_mut().zip(grid) {
        *s += kernel_unchecked(gj - x, tss);
    }
}

fn kl_on_grid(post: &[f64], prior: &[f64], weights: &[f64], floor: f64, floored: &mut bool) -> f64 {
    let zp: f64 = post.iter().zip(weights).map(|(v, w)| v * w).sum();
    let zq: f64 = prior.iter().zip(weights).map(|(v, w)| v * w).sum();
    let mut kl = 0.0;
    for ((&p, &q), &w) in post.iter().zip(prior).zip(weights) {
        let p = p * w / zp;
        if p <= 0.0 {
            continue;
        }
        let mut q = q * w / zq;
        if q <= 0.0 {
            q = floor;
            *floored = true;
        }
        kl += p * (p / q).ln();
    }
    kl.max(0.0)
}

/// Renyi quadratic entropy of each consecutive, non-overlapping interval.
pub fn interval_entropies(
    signal: &[f64],
    interval_length: usize,
    cfg: &KernelConfig,
) -> Result<Vec<f64>> {
    if interval_length == 0 {
        return Err(Error::param("interval_length", "must be positive"));
    }
    signal
        .chunks_exact(interval_length)
        .map(|chunk| renyi_quadratic_entropy(chunk, cfg))
        .collect()
}

/// `H(R+1) − H(R)` over consecutive intervals of `interval_length` samples.
/// A trailing partial interval is ignored.
pub fn entropy_difference(
    signal: &[f64],
    interval_length: usize,
    cfg: &KernelConfig,
) -> Result<Vec<f64>> {
    if interval_length == 0 {
        return Err(Error::param("interval_length", "must be positive"));
    }
    if signal.len() < 2 * interval_length {
        return Err(Error::TooShort {
            required: 2 * interval_length,
            actual: signal.len(),
        });
    }
    let h = interval_entropies(signal, interval_length, cfg)?;
    Ok(h.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Classical IPF at each sample from the samples before it (optionally only
/// the last `window`). Entry `r` describes sample `r + 1`, aligned with the
/// rows of a decomposition trace.
pub fn classical_ip_stream(
    signal: &[f64],
    cfg: &KernelConfig,
    window: Option<usize>,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if signal.len() < 2 {
        return Err(Error::TooShort {
            required: 2,
            actual: signal.len(),
        });
    }
    if matches!(window, Some(0)) {
        return Err(Error::param("window", "must be positive"));
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("signal"));
    }
    let tss = two_sigma_sq(cfg.sigma);
    Ok((1..signal.len())
        .map(|i| {
            let lo = window.map_or(0, |w| i.saturating_sub(w));
            mean_kernel(signal[i], &signal[lo..i], tss)
        })
        .collect())
}

/// `index,value` rows with the caller's index offset (first sample index).
pub fn write_series_csv<W: Write>(
    name: &str,
    first_index: usize,
    values: &[f64],
    mut w: W,
) -> io::Result<()> {
    writeln!(w, "index,{name}")?;
    for (r, v) in values.iter().enumerate() {
        writeln!(w, "{},{}", first_index + r, fmt_f64(*v))?;
    }
    Ok(())
}
