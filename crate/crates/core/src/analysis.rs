//! Reports built on decomposition traces: dominance histograms, row-normalized
//! heat-maps, eigenvalue curves, and the interval sensitivity metric ζ with
//! the cross-framework comparison table.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    bayesian_surprise, classical_ip_stream, entropy_difference, SurpriseConfig, DEFAULT_GRID_POINTS,
};
use crate::engine::{
    decompose_stream, fmt_f64, mode_average, DecompositionTrace, EngineConfig, QipfTable,
};
use crate::error::{Error, Result};
use crate::kernel::{KernelConfig, Signal};
use crate::signals::{add_noise, mean_var, NoiseSchedule};
use crate::wavefunction::ModeSpec;

/// Per-mode counts of the samples at which each mode's QIPF was largest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceHistogram {
    pub counts: Vec<usize>,
    /// Samples at which two or more modes shared the maximum.
    pub ties: usize,
}

impl DominanceHistogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn proportions(&self) -> Vec<f64> {
        let total = self.total().max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }

    /// Mode indices (1-based) holding at least `share` of the mass.
    pub fn modes_above(&self, share: f64) -> Vec<usize> {
        self.proportions()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p >= share)
            .map(|(j, _)| j + 1)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "mode,count,proportion")?;
        for (j, (c, p)) in self.counts.iter().zip(self.proportions()).enumerate() {
            writeln!(w, "{},{},{}", j + 1, c, fmt_f64(p))?;
        }
        Ok(())
    }
}

/// Argmax vote per row; ties go to the lowest mode and are also counted.
pub fn dominance_histogram<T: QipfTable + ?Sized>(table: &T) -> Result<DominanceHistogram> {
    if table.rows() == 0 {
        return Err(Error::EmptySamples);
    }
    let mut counts = vec![0; table.num_modes()];
    let mut ties = 0;
    for r in 0..table.rows() {
        let row = table.qipf_row(r);
        let mut best = 0;
        let mut tied = false;
        for (k, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = k;
                tied = false;
            } else if v == row[best] {
                tied = true;
            }
        }
        counts[best] += 1;
        if tied {
            ties += 1;
        }
    }
    Ok(DominanceHistogram { counts, ties })
}

/// Total-variation distance between two proportion vectors of equal length.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Modes × samples matrix with each row min-max scaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub modes: usize,
    pub samples: usize,
    data: Vec<f64>,
    /// Rows (1-based modes) that were constant and were set to zero.
    pub constant_rows: Vec<usize>,
}

impl Heatmap {
    pub fn get(&self, k: usize, sample: usize) -> f64 {
        self.data[(k - 1) * self.samples + sample]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[(k - 1) * self.samples..k * self.samples]
    }

    /// One line per mode, samples as columns.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for k in 1..=self.modes {
            let line: Vec<String> = self.row(k).iter().map(|v| fmt_f64(*v)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Binary 16-bit grayscale PGM (row = mode, column = sample).
    pub fn write_pgm<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "P5\n{} {}\n65535\n", self.samples, self.modes)?;
        let mut buf = Vec::with_capacity(self.data.len() * 2);
        for v in &self.data {
            let level = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
            buf.extend_from_slice(&level.to_be_bytes());
        }
        w.write_all(&buf)
    }
}

pub fn heatmap_matrix<T: QipfTable + ?Sized>(table: &T) -> Result<Heatmap> {
    let n = table.rows();
    let m = table.num_modes();
    if n == 0 {
        return Err(Error::EmptySamples);
    }
    let mut data = vec![0.0; m * n];
    let mut constant_rows = Vec::new();
    for k in 0..m {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for r in 0..n {
            let v = table.qipf_row(r)[k];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let span = hi - lo;
        if !(span > 0.0) {
            constant_rows.push(k + 1);
            continue;
        }
        for r in 0..n {
            data[k * n + r] = (table.qipf_row(r)[k] - lo) / span;
        }
    }
    Ok(Heatmap {
        modes: m,
        samples: n,
        data,
        constant_rows,
    })
}

/// Eigenvalues divided by their maximum.
pub fn normalized_eigenvalues(eigs: &[f64]) -> Result<Vec<f64>> {
    let max = eigs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::Domain(format!(
            "eigenvalues cannot be normalized: maximum is {max}"
        )));
    }
    Ok(eigs.iter().map(|e| e / max).collect())
}

/// Final-sample eigenvalues of a trace, normalized to a maximum of one.
pub fn eigenvalue_curve(trace: &DecompositionTrace) -> Result<Vec<f64>> {
    let eigs = trace.final_eigenvalues().ok_or(Error::EmptySamples)?;
    normalized_eigenvalues(eigs)
}

/// Mean of `values` over each half-open sample range, where `values[0]`
/// belongs to sample `first_index`.
pub fn interval_means(
    values: &[f64],
    first_index: usize,
    ranges: &[(usize, usize)],
) -> Result<Vec<f64>> {
    ranges
        .iter()
        .map(|&(start, end)| {
            if start < first_index || end > first_index + values.len() || start >= end {
                return Err(Error::param(
                    "ranges",
                    format!(
                        "[{start}, {end}) not covered by samples {first_index}..{}",
                        first_index + values.len()
                    ),
                ));
            }
            let seg = &values[start - first_index..end - first_index];
            Ok(seg.iter().sum::<f64>() / seg.len() as f64)
        })
        .collect()
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    if !(va > 0.0 && vb > 0.0) {
        return None;
    }
    let cov = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / a.len() as f64;
    Some(cov / (va * vb).sqrt())
}

/// Inputs to the interval sensitivity metric and the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityConfig {
    pub interval_length: usize,
    /// Inclusive 1-based mode ranges averaged into one quantity each.
    pub state_groups: Vec<(usize, usize)>,
    /// Noise level of each interval, in the order they occur.
    pub noise_db: Vec<f64>,
    pub runs: usize,
    #[serde(default = "default_true")]
    pub normalize_per_framework: bool,
    /// When set, each run draws its interval dB levels uniformly from this
    /// range instead of using `noise_db`.
    #[serde(default)]
    pub db_draw: Option<(f64, f64)>,
    #[serde(default = "default_grid_points")]
    pub surprise_grid_points: usize,
}

fn default_true() -> bool {
    true
}

fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

impl SensitivityConfig {
    /// Mackey-Glass protocol: five 500-sample intervals, groups 1–3, 4–6,
    /// 7–10, ten runs with levels drawn from 0–20 dB.
    pub fn mackey_glass_protocol() -> Self {
        SensitivityConfig {
            interval_length: 500,
            state_groups: vec![(1, 3), (4, 6), (7, 10)],
            noise_db: vec![0.0; 5],
            runs: 10,
            normalize_per_framework: true,
            db_draw: Some((0.0, 20.0)),
            surprise_grid_points: DEFAULT_GRID_POINTS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.interval_length == 0 {
            return Err(Error::param("interval_length", "must be positive"));
        }
        if self.noise_db.len() < 2 {
            return Err(Error::param("noise_db", "need at least two intervals"));
        }
        if self.noise_db.iter().any(|d| !d.is_finite()) {
            return Err(Error::param("noise_db", "levels must be finite"));
        }
        if self.runs == 0 {
            return Err(Error::param("runs", "must be positive"));
        }
        for &(lo, hi) in &self.state_groups {
            if lo == 0 || lo > hi {
                return Err(Error::param(
                    "state_groups",
                    format!("bad range ({lo}, {hi})"),
                ));
            }
        }
        if let Some((lo, hi)) = self.db_draw {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::param("db_draw", "need finite lo < hi"));
            }
        }
        Ok(())
    }

    /// Covered span in samples.
    pub fn span(&self) -> usize {
        self.interval_length * self.noise_db.len()
    }

    pub fn max_mode(&self) -> usize {
        self.state_groups.iter().map(|g| g.1).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub zeta: f64,
    pub interval_norms: Vec<f64>,
    /// Interval pairs `(R, R+1)` skipped because their levels were equal.
    pub excluded_pairs: Vec<usize>,
}

/// Zero-mean, unit-variance copy; a constant sequence becomes all zeros.
pub fn standardize(values: &[f64]) -> Vec<f64> {
    let (mean, var) = mean_var(values);
    let sd = var.sqrt();
    if sd > 0.0 {
        values.iter().map(|v| (v - mean) / sd).collect()
    } else {
        vec![0.0; values.len()]
    }
}

/// ζ = mean over consecutive intervals of `|(‖V_R‖ − ‖V_{R+1}‖)/(D_R − D_{R+1})|`.
///
/// The intervals cover the last `cfg.span()` values; normalization, when
/// enabled, uses the whole sequence.
pub fn sensitivity(values: &[f64], cfg: &SensitivityConfig) -> Result<SensitivityReport> {
    cfg.validate()?;
    if values.len() < cfg.span() {
        return Err(Error::TooShort {
            required: cfg.span(),
            actual: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sensitivity values"));
    }
    let owned;
    let values = if cfg.normalize_per_framework {
        owned = standardize(values);
        &owned[..]
    } else {
        values
    };
    let tail = &values[values.len() - cfg.span()..];
    let norms: Vec<f64> = tail
        .chunks_exact(cfg.interval_length)
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mut total = 0.0;
    let mut used = 0usize;
    let mut excluded = Vec::new();
    for r in 0..norms.len() - 1 {
        let dd = cfg.noise_db[r] - cfg.noise_db[r + 1];
        if dd == 0.0 {
            excluded.push(r);
            continue;
        }
        total += ((norms[r] - norms[r + 1]) / dd).abs();
        used += 1;
    }
    if used == 0 {
        return Err(Error::Domain(
            "every interval pair has equal noise level".into(),
        ));
    }
    Ok(SensitivityReport {
        zeta: total / used as f64,
        interval_norms: norms,
        excluded_pairs: excluded,
    })
}

/// Rows of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Framework {
    QipfGroup(usize, usize),
    BayesianSurprise,
    EntropyDifference,
    ClassicalIp,
}

impl Framework {
    pub fn label(&self) -> String {
        match self {
            Framework::QipfGroup(lo, hi) => format!("qipf_states_{lo}-{hi}"),
            Framework::BayesianSurprise => "bayesian_surprise".into(),
            Framework::EntropyDifference => "entropy_difference".into(),
            Framework::ClassicalIp => "classical_ip".into(),
        }
    }
}

pub const DEFAULT_KERNEL_WIDTHS: [f64; 6] = [0.2, 0.4, 0.5, 0.6, 0.8, 1.0];

/// Framework × kernel-width matrix of ζ averaged over runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityTable {
    pub frameworks: Vec<Framework>,
    pub widths: Vec<f64>,
    /// `cells[f][w]`, mean over runs.
    pub cells: Vec<Vec<f64>>,
    /// `per_run[f][w][run]`.
    pub per_run: Vec<Vec<Vec<f64>>>,
    pub seeds: Vec<u64>,
    /// dB levels used by each run.
    pub run_db: Vec<Vec<f64>>,
}

impl SensitivityTable {
    pub fn cell(&self, framework: &Framework, width_index: usize) -> Option<f64> {
        let f = self.frameworks.iter().position(|x| x == framework)?;
        Some(self.cells[f][width_index])
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let head: Vec<String> = self.widths.iter().map(|s| format!("sigma_{s}")).collect();
        writeln!(w, "framework,{}", head.join(","))?;
        for (f, row) in self.frameworks.iter().zip(&self.cells) {
            let vals: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
            writeln!(w, "{},{}", f.label(), vals.join(","))?;
        }
        Ok(())
    }
}

/// Noise levels for one run: the configured sequence, or a uniform draw.
pub fn run_noise_db(cfg: &SensitivityConfig, seed: u64) -> Vec<f64> {
    match cfg.db_draw {
        None => cfg.noise_db.clone(),
        Some((lo, hi)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // separate stream from the one that draws the noise samples
            rng.set_stream(1);
            (0..cfg.noise_db.len())
                .map(|_| rng.random_range(lo..hi))
                .collect()
        }
    }
}

/// The noise schedule of one run, covering the last `cfg.span()` samples.
pub fn run_schedule(len: usize, cfg: &SensitivityConfig, seed: u64) -> Result<NoiseSchedule> {
    if len < cfg.span() {
        return Err(Error::TooShort {
            required: cfg.span(),
            actual: len,
        });
    }
    let db = run_noise_db(cfg, seed);
    Ok(NoiseSchedule::uniform_intervals(
        len - cfg.span(),
        cfg.interval_length,
        &db,
        seed,
    ))
}

/// ζ of every framework for one noisy realization at one kernel width.
pub fn sensitivity_cell(
    clean: &Signal,
    noisy: &[f64],
    sigma: f64,
    cfg: &SensitivityConfig,
) -> Result<Vec<(Framework, f64)>> {
    let kernel = KernelConfig::new(sigma)?;
    let mut out = Vec::new();

    let engine = EngineConfig::new(kernel, ModeSpec::new(cfg.max_mode()));
    let trace = decompose_stream(noisy, &engine)?;
    for &(lo, hi) in &cfg.state_groups {
        let v = mode_average(&trace, (lo, hi))?;
        out.push((Framework::QipfGroup(lo, hi), sensitivity(&v, cfg)?.zeta));
    }

    let grid = SurpriseConfig::spanning(clean.samples(), kernel, cfg.surprise_grid_points)?;
    let surprise = bayesian_surprise(noisy, &grid)?;
    out.push((
        Framework::BayesianSurprise,
        sensitivity(&surprise.values, cfg)?.zeta,
    ));

    // one value per interval: the entropy change into that interval
    let diffs = entropy_difference(noisy, cfg.interval_length, &kernel)?;
    let per_interval = SensitivityConfig {
        interval_length: 1,
        ..cfg.clone()
    };
    out.push((
        Framework::EntropyDifference,
        sensitivity(&diffs, &per_interval)?.zeta,
    ));

    let ip = classical_ip_stream(noisy, &kernel, None)?;
    out.push((Framework::ClassicalIp, sensitivity(&ip, cfg)?.zeta));
    Ok(out)
}

/// Runs every (width, seed) cell in parallel and averages over seeds.
///
/// Run `r` uses seed `base_seed + r` for both its noise levels and samples.
pub fn sensitivity_table(
    clean: &Signal,
    base_seed: u64,
    widths: &[f64],
    cfg: &SensitivityConfig,
) -> Result<SensitivityTable> {
    cfg.validate()?;
    if widths.is_empty() {
        return Err(Error::param("kernel_widths", "need at least one width"));
    }
    if cfg.state_groups.is_empty() {
        return Err(Error::param("state_groups", "need at least one group"));
    }
    // the first entropy difference inside the noisy span needs one clean
    // interval in front of it
    let required = cfg.span() + cfg.interval_length;
    if clean.len() < required {
        return Err(Error::TooShort {
            required,
            actual: clean.len(),
        });
    }
    if !clean.len().is_multiple_of(cfg.interval_length) {
        return Err(Error::param(
            "interval_length",
            "must divide the signal length so intervals line up with the noise",
        ));
    }
    let seeds: Vec<u64> = (0..cfg.runs as u64).map(|r| base_seed + r).collect();

    let runs: Vec<(Vec<f64>, Vec<f64>)> = seeds
        .iter()
        .map(|&seed| {
            let schedule = run_schedule(clean.len(), cfg, seed)?;
            let noisy = add_noise(clean, &schedule)?.into_samples();
            Ok((schedule.snr_db(), noisy))
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..widths.len())
        .flat_map(|w| (0..seeds.len()).map(move |r| (w, r)))
        .collect();
    let results: Vec<Vec<(Framework, f64)>> = jobs
        .par_iter()
        .map(|&(w, r)| {
            let run_cfg = SensitivityConfig {
                noise_db: runs[r].0.clone(),
                db_draw: None,
                ..cfg.clone()
            };
            sensitivity_cell(clean, &runs[r].1, widths[w], &run_cfg)
        })
        .collect::<Result<_>>()?;

    let frameworks: Vec<Framework> = results[0].iter().map(|(f, _)| f.clone()).collect();
    let nf = frameworks.len();
    let mut per_run = vec![vec![vec![0.0; seeds.len()]; widths.len()]; nf];
    for (&(w, r), cell) in jobs.iter().zip(&results) {
        for (f, (_, z)) in cell.iter().enumerate() {
            per_run[f][w][r] = *z;
        }
    }
    let cells = per_run
        .iter()
        .map(|row| {
            row.iter()
                .map(|zs| zs.iter().sum::<f64>() / zs.len() as f64)
                .collect()
        })
        .collect();
    Ok(SensitivityTable {
        frameworks,
        widths: widths.to_vec(),
        cells,
        per_run,
        seeds,
        run_db: runs.into_iter().map(|(db, _)| db).collect(),
    })
}
