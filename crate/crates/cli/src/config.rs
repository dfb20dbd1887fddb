//! Experiment configuration files (TOML).

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use qipf::analysis::SensitivityConfig;
use qipf::signals::{
    gen_lorenz, gen_mackey_glass, gen_sine, gen_sine_mixture, normalize, read_signal_csv,
    read_signal_raw, scale, LorenzParams, MackeyGlassParams, NoiseSchedule,
};
use qipf::{EigenScope, EngineConfig, KernelConfig, ModeSpec, Signal};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Spatial,
    CausalCompare,
    Dominance,
    Eigencurve,
    Heatmap,
    Sensitivity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub kernel: KernelSection,
    #[serde(default)]
    pub modes: ModeSection,
    #[serde(default)]
    pub engine: EngineSection,
    pub signals: Vec<SignalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSection>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub spatial: SpatialSection,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub heatmap: HeatmapSection,
    #[serde(default)]
    pub eigencurve: EigencurveSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<SensitivityConfig>,
    #[serde(default)]
    pub plots: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub widths: Vec<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
}

fn default_epsilon() -> f64 {
    1e-8
}

fn default_fd_step() -> f64 {
    1e-4
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSection {
    #[serde(default = "default_num_modes")]
    pub num_modes: usize,
    #[serde(default = "default_true")]
    pub normalize: bool,
}

fn default_num_modes() -> usize {
    6
}

fn default_true() -> bool {
    true
}

impl Default for ModeSection {
    fn default() -> Self {
        ModeSection {
            num_modes: default_num_modes(),
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default)]
    pub eigen_scope: EigenScope,
    #[serde(default)]
    pub include_current: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub name: String,
    #[serde(flatten)]
    pub source: Source,
    #[serde(default = "default_true")]
    pub normalize: bool,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum Source {
    Sine {
        f0: f64,
        fs: f64,
        duration: f64,
    },
    SineMixture {
        freqs: Vec<f64>,
        fs: f64,
        duration: f64,
    },
    Lorenz(LorenzParams),
    MackeyGlass(MackeyGlassParams),
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSection {
    /// The heteroscedastic Lorenz table, from sample 500 in 100-sample steps.
    LorenzTable,
    Intervals {
        start: usize,
        length: usize,
        snr_db: Vec<f64>,
    },
}

impl NoiseSection {
    pub fn schedule(&self, seed: u64) -> NoiseSchedule {
        match self {
            NoiseSection::LorenzTable => NoiseSchedule::lorenz_table(seed),
            NoiseSection::Intervals {
                start,
                length,
                snr_db,
            } => NoiseSchedule::uniform_intervals(*start, *length, snr_db, seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialSection {
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points: usize,
}

impl Default for SpatialSection {
    fn default() -> Self {
        SpatialSection {
            grid_lo: -4.0,
            grid_hi: 4.0,
            grid_points: 801,
        }
    }
}

impl SpatialSection {
    pub fn grid(&self) -> Vec<f64> {
        let n = self.grid_points;
        if n == 1 {
            return vec![self.grid_lo];
        }
        let step = (self.grid_hi - self.grid_lo) / (n - 1) as f64;
        (0..n).map(|j| self.grid_lo + j as f64 * step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    /// Factor applied to the signal to form the kernel samples; the
    /// evaluation points keep the original amplitude.
    pub sample_scale: f64,
    pub average_ranges: Vec<(usize, usize)>,
}

impl Default for CompareSection {
    fn default() -> Self {
        CompareSection {
            sample_scale: 0.5,
            average_ranges: vec![(1, 5), (1, 10)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatmapSection {
    pub groups: Vec<(usize, usize)>,
}

impl Default for HeatmapSection {
    fn default() -> Self {
        HeatmapSection {
            groups: vec![(1, 4), (10, 13), (22, 25)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenRoute {
    /// Final eigenvalues of the causal stream.
    #[default]
    Stream,
    /// One joint evaluation with every sample as both grid point and kernel center.
    Spatial,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigencurveSection {
    #[serde(default)]
    pub route: EigenRoute,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Kernel widths the experiment sweeps: `kernel.widths`, or the single `kernel.sigma`.
    pub fn widths(&self) -> Vec<f64> {
        if self.kernel.widths.is_empty() {
            self.kernel.sigma.into_iter().collect()
        } else {
            self.kernel.widths.clone()
        }
    }

    pub fn kernel_config(&self, sigma: f64) -> KernelConfig {
        KernelConfig {
            sigma,
            epsilon: self.kernel.epsilon,
            fd_step: self.kernel.fd_step,
        }
    }

    pub fn engine_config(&self, sigma: f64) -> EngineConfig {
        EngineConfig {
            kernel: self.kernel_config(sigma),
            modes: ModeSpec {
                num_modes: self.modes.num_modes,
                normalize: self.modes.normalize,
            },
            window: self.engine.window,
            eigen_scope: self.engine.eigen_scope,
            include_current: self.engine.include_current,
        }
    }

    /// Checks every field the chosen experiment depends on.
    pub fn validate(&self) -> CliResult<()> {
        let kind = self.experiment;
        let multi_width = matches!(kind, ExperimentKind::Spatial | ExperimentKind::Sensitivity);
        if let Some(s) = self.kernel.sigma {
            check_positive("kernel.sigma", s)?;
        }
        for (i, w) in self.kernel.widths.iter().enumerate() {
            check_positive(&format!("kernel.widths[{i}]"), *w)?;
        }
        if multi_width {
            if self.widths().is_empty() {
                return Err(CliError::config(
                    "kernel.widths",
                    "need `widths` or `sigma`",
                ));
            }
        } else if self.kernel.sigma.is_none() {
            return Err(CliError::config("kernel.sigma", "missing"));
        }
        check_positive("kernel.epsilon", self.kernel.epsilon)?;
        check_positive("kernel.fd_step", self.kernel.fd_step)?;
        if kind != ExperimentKind::Sensitivity {
            self.engine_config(self.widths()[0])
                .validate()
                .map_err(map_engine_error)?;
        }

        if self.signals.is_empty() {
            return Err(CliError::config(
                "signals",
                "at least one signal is required",
            ));
        }
        for (i, s) in self.signals.iter().enumerate() {
            s.validate(&format!("signals[{i}]"))?;
        }

        match kind {
            ExperimentKind::Spatial => {
                let sp = &self.spatial;
                if sp.grid_points == 0 {
                    return Err(CliError::config("spatial.grid_points", "must be positive"));
                }
                if !(sp.grid_lo.is_finite() && sp.grid_hi.is_finite() && sp.grid_lo < sp.grid_hi) {
                    return Err(CliError::config(
                        "spatial.grid_lo",
                        "need finite grid_lo < grid_hi",
                    ));
                }
            }
            ExperimentKind::CausalCompare => {
                if !self.compare.sample_scale.is_finite() {
                    return Err(CliError::config("compare.sample_scale", "must be finite"));
                }
                check_ranges(
                    "compare.average_ranges",
                    &self.compare.average_ranges,
                    self.modes.num_modes,
                )?;
            }
            ExperimentKind::Heatmap => {
                check_ranges("heatmap.groups", &self.heatmap.groups, self.modes.num_modes)?;
                if self.noise.is_none() {
                    return Err(CliError::config(
                        "noise",
                        "heatmap experiment needs a noise schedule",
                    ));
                }
                if self.seeds.is_empty() {
                    return Err(CliError::config("seeds", "need at least one seed"));
                }
            }
            ExperimentKind::Sensitivity => {
                let sc = self
                    .sensitivity
                    .as_ref()
                    .ok_or_else(|| CliError::config("sensitivity", "missing section"))?;
                sc.validate()
                    .map_err(|e| CliError::from_lib(e, "sensitivity"))?;
                if self.seeds.len() != 1 {
                    return Err(CliError::config(
                        "seeds",
                        "sensitivity takes exactly one base seed; run r uses base + r",
                    ));
                }
                if self.signals.len() != 1 {
                    return Err(CliError::config(
                        "signals",
                        "sensitivity uses exactly one signal",
                    ));
                }
            }
            ExperimentKind::Dominance | ExperimentKind::Eigencurve => {}
        }
        if let Some(NoiseSection::Intervals { length, snr_db, .. }) = &self.noise {
            if *length == 0 {
                return Err(CliError::config("noise.length", "must be positive"));
            }
            if snr_db.is_empty() {
                return Err(CliError::config("noise.snr_db", "need at least one level"));
            }
        }
        Ok(())
    }
}

fn map_engine_error(e: qipf::Error) -> CliError {
    match &e {
        qipf::Error::InvalidParameter { field, .. } => {
            let section = match *field {
                "sigma" | "epsilon" | "fd_step" => "kernel",
                "num_modes" => "modes",
                _ => "engine",
            };
            CliError::from_lib(e, section)
        }
        qipf::Error::OrderOverflow(_) => CliError::from_lib(e, "modes"),
        _ => CliError::from_lib(e, "engine"),
    }
}

fn check_positive(field: &str, v: f64) -> CliResult<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::config(
            field,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

fn check_ranges(field: &str, ranges: &[(usize, usize)], m: usize) -> CliResult<()> {
    if ranges.is_empty() {
        return Err(CliError::config(field, "need at least one range"));
    }
    for (lo, hi) in ranges {
        if *lo == 0 || lo > hi || *hi > m {
            return Err(CliError::config(
                field,
                format!("range ({lo}, {hi}) not within 1..={m}"),
            ));
        }
    }
    Ok(())
}

impl SignalSpec {
    pub fn validate(&self, context: &str) -> CliResult<()> {
        if !self.scale.is_finite() {
            return Err(CliError::config(
                &format!("{context}.scale"),
                "must be finite",
            ));
        }
        match &self.source {
            Source::Lorenz(p) => p.validate().map_err(|e| CliError::from_lib(e, context)),
            Source::MackeyGlass(p) => p.validate().map_err(|e| CliError::from_lib(e, context)),
            Source::Sine { fs, duration, .. } | Source::SineMixture { fs, duration, .. } => {
                check_positive(&format!("{context}.fs"), *fs)?;
                check_positive(&format!("{context}.duration"), *duration)
            }
            Source::File { path } => {
                if path.exists() {
                    Ok(())
                } else {
                    Err(CliError::config(
                        &format!("{context}.path"),
                        format!("{} does not exist", path.display()),
                    ))
                }
            }
        }
    }

    /// Generates or loads the signal, then normalizes and scales it as configured.
    pub fn build(&self) -> CliResult<Signal> {
        let lib = |e| CliError::from_lib(e, &self.name);
        let raw = match &self.source {
            Source::Sine { f0, fs, duration } => gen_sine(*f0, *fs, *duration).map_err(lib)?,
            Source::SineMixture {
                freqs,
                fs,
                duration,
            } => gen_sine_mixture(freqs, *fs, *duration).map_err(lib)?,
            Source::Lorenz(p) => gen_lorenz(p).map_err(lib)?,
            Source::MackeyGlass(p) => gen_mackey_glass(p).map_err(lib)?,
            Source::File { path } => read_signal_file(path)?,
        };
        let normed = if self.normalize {
            normalize(&raw).map_err(lib)?
        } else {
            raw
        };
        let scaled = if self.scale == 1.0 {
            normed
        } else {
            scale(&normed, self.scale).map_err(lib)?
        };
        Ok(scaled.with_label(self.name.clone()))
    }
}

/// Reads a signal as raw little-endian f64 (`.raw`, `.bin`, `.f64`) or CSV.
pub fn read_signal_file(path: &Path) -> CliResult<Signal> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let sig = if matches!(ext, "raw" | "bin" | "f64") {
        read_signal_raw(file)
    } else {
        read_signal_csv(BufReader::new(file))
    };
    sig.map_err(|e| CliError::config(&path.display().to_string(), e))
}
