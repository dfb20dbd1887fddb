//! The QIPF wave-function `ψ = √IPF`, its analytic derivatives, and the
//! even-order Hermite mode wave-functions `ψ^k = H_{2k}(ψ)` with their
//! Laplacians.

pub mod hermite;

use serde::{Deserialize, Serialize};

pub use hermite::{hermite_normalized, hermite_sequence, normalization_constant};

use crate::error::{Error, Result};
use crate::kernel::{kernel_moments, KernelConfig};

/// ψ and its first two spatial derivatives at `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiEval {
    pub x: f64,
    pub psi: f64,
    pub dpsi: f64,
    pub d2psi: f64,
}

/// Evaluates ψ(x) from the samples together with ψ′ and ψ″.
pub fn psi_eval(x: f64, samples: &[f64], cfg: &KernelConfig) -> Result<PsiEval> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    cfg.validate()?;
    if !x.is_finite() || samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("psi_eval input"));
    }
    Ok(psi_eval_unchecked(x, samples, cfg.sigma))
}

pub(crate) fn psi_eval_unchecked(x: f64, samples: &[f64], sigma: f64) -> PsiEval {
    let (s, s1, s2) = kernel_moments(x, samples, sigma);
    psi_from_moments(x, s, s1, s2)
}

/// ψ = √S, ψ′ = S′/(2√S), ψ″ = (S″ − S′·(S′/S)/2)/(2√S).
///
/// The second form keeps ψ″ finite when S is close to the subnormal range.
pub(crate) fn psi_from_moments(x: f64, s: f64, s1: f64, s2: f64) -> PsiEval {
    let psi = s.sqrt();
    PsiEval {
        x,
        psi,
        dpsi: s1 / (2.0 * psi),
        d2psi: (s2 - 0.5 * s1 * (s1 / s)) / (2.0 * psi),
    }
}

/// Which modes are extracted and whether the Hermite values are normalized.
///
/// Mode `k` (1-based) uses the Hermite polynomial of order `2k`; the constant
/// order-0 term carries no information and is never extracted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub num_modes: usize,
    #[serde(default = "default_normalize")]
    pub normalize: bool,
}

fn default_normalize() -> bool {
    true
}

impl ModeSpec {
    pub fn new(num_modes: usize) -> Self {
        ModeSpec {
            num_modes,
            normalize: true,
        }
    }

    pub fn unnormalized(num_modes: usize) -> Self {
        ModeSpec {
            num_modes,
            normalize: false,
        }
    }

    pub fn hermite_order(&self, k: usize) -> usize {
        2 * k
    }

    pub fn max_order(&self) -> usize {
        2 * self.num_modes
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_modes == 0 {
            return Err(Error::param("num_modes", "must be at least 1"));
        }
        if self.normalize && self.max_order() > hermite::MAX_NORMALIZED_ORDER {
            return Err(Error::OrderOverflow(self.max_order()));
        }
        Ok(())
    }
}

/// Mode wave-function value and its Laplacian at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModeValue {
    pub psi_k: f64,
    pub lap_psi_k: f64,
}

/// Precomputed per-mode constants plus scratch space for repeated evaluation.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    spec: ModeSpec,
    scale: Vec<f64>,
    scratch: Vec<f64>,
}

impl ModeBasis {
    pub fn new(spec: ModeSpec) -> Result<Self> {
        spec.validate()?;
        let scale = (1..=spec.num_modes)
            .map(|k| {
                if spec.normalize {
                    normalization_constant(spec.hermite_order(k)).map(|c| 1.0 / c)
                } else {
                    Ok(1.0)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModeBasis {
            spec,
            scale,
            scratch: Vec::with_capacity(spec.max_order() + 1),
        })
    }

    pub fn spec(&self) -> &ModeSpec {
        &self.spec
    }

    /// Writes `(ψ^k, ∇²ψ^k)` for k = 1..m into `out`.
    ///
    /// `∇²ψ^k = H″_n(ψ)·ψ′² + H′_n(ψ)·ψ″` with `H′_n = 2nH_{n−1}` and
    /// `H″_n = 4n(n−1)H_{n−2}`.
    pub fn evaluate_into(&mut self, pe: &PsiEval, out: &mut [ModeValue]) {
        debug_assert_eq!(out.len(), self.spec.num_modes);
        hermite::hermite_into(pe.psi, self.spec.max_order(), &mut self.scratch);
        let h = &self.scratch;
        let dpsi_sq = pe.dpsi * pe.dpsi;
        for (idx, slot) in out.iter_mut().enumerate() {
            let n = 2 * (idx + 1);
            let nf = n as f64;
            let d1 = 2.0 * nf * h[n - 1];
            let d2 = 4.0 * nf * (nf - 1.0) * h[n - 2];
            let c = self.scale[idx];
            *slot = ModeValue {
                psi_k: h[n] * c,
                lap_psi_k: (d2 * dpsi_sq + d1 * pe.d2psi) * c,
            };
        }
    }

    pub fn evaluate(&mut self, pe: &PsiEval) -> Vec<ModeValue> {
        let mut out = vec![ModeValue::default(); self.spec.num_modes];
        self.evaluate_into(pe, &mut out);
        out
    }
}

/// `(ψ^k, ∇²ψ^k)` for a single mode `k` in `1..=spec.num_modes`.
pub fn mode_wavefunction(pe: &PsiEval, k: usize, spec: &ModeSpec) -> Result<(f64, f64)> {
    if k == 0 || k > spec.num_modes {
        return Err(Error::param(
            "mode",
            format!("index {k} outside 1..={}", spec.num_modes),
        ));
    }
    let single = ModeSpec {
        num_modes: k,
        normalize: spec.normalize,
    };
    let values = ModeBasis::new(single)?.evaluate(pe);
    let v = values[k - 1];
    Ok((v.psi_k, v.lap_psi_k))
}

/// Laplacian ratio `σ²/2 · ∇²ψ/ψ` of the fundamental (ground-state) path.
pub fn ground_state_ratio(pe: &PsiEval, sigma: f64) -> f64 {
    0.5 * sigma * sigma * pe.d2psi / pe.psi
}
