//! Shipped experiment configurations, one per study.

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const PRESETS: [(&str, &str); 6] = [
    (
        "spatial-modes",
        include_str!("../presets/spatial-modes.toml"),
    ),
    (
        "causal-compare",
        include_str!("../presets/causal-compare.toml"),
    ),
    ("dominance", include_str!("../presets/dominance.toml")),
    ("eigencurve", include_str!("../presets/eigencurve.toml")),
    (
        "noise-heatmap",
        include_str!("../presets/noise-heatmap.toml"),
    ),
    ("sensitivity", include_str!("../presets/sensitivity.toml")),
];

pub fn preset_text(name: &str) -> CliResult<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            let known: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            CliError::config(
                "preset",
                format!("unknown `{name}`, expected one of {}", known.join(", ")),
            )
        })
}

pub fn preset(name: &str) -> CliResult<ExperimentConfig> {
    ExperimentConfig::from_toml(preset_text(name)?)
}
