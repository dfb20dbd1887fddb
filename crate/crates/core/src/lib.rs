//! Streaming decomposition of a real-valued signal into the Hermite modes of
//! the quantum description of its Gaussian-kernel information potential
//! field (QIPF), with the baseline quantifiers and reports used to study it.

pub mod analysis;
pub mod baselines;
pub mod engine;
pub mod error;
pub mod kernel;
pub mod signals;
pub mod wavefunction;

pub use engine::{
    decompose_at, decompose_stream, mode_average, spatial_qipf, DecompositionTrace, EigenScope,
    EngineConfig, QipfStream, QipfTable, SpatialQipf,
};
pub use error::{Error, Result};
pub use kernel::{
    gaussian_kernel, information_potential, ipf, renyi_quadratic_entropy, KernelConfig, Signal,
};
pub use wavefunction::{psi_eval, ModeSpec, PsiEval};

/// Library version recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
