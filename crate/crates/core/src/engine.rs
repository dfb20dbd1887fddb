//! Sample-by-sample quantum decomposition of the information potential field.
//!
//! For every incoming sample the engine builds ψ from the past samples,
//! projects it onto the even Hermite modes, forms the Laplacian ratios
//! `σ²/2 · ∇²ψ^k/ψ^k`, tracks the per-mode eigenvalue `E^k = −min ratio`, and
//! reports the mode potentials `V^k = E^k + ratio`.

use std::collections::VecDeque;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{kernel_moments, KernelConfig};
use crate::wavefunction::{ground_state_ratio, psi_from_moments, ModeBasis, ModeSpec, ModeValue};

/// Range of past ratios that the eigenvalue minimum runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenScope {
    /// All processed samples.
    #[default]
    History,
    /// Only the trailing window of trace rows.
    Window,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub kernel: KernelConfig,
    pub modes: ModeSpec,
    /// Number of samples entering the kernel sum; `None` uses every past sample.
    #[serde(default)]
    pub window: Option<usize>,
    #[serde(default)]
    pub eigen_scope: EigenScope,
    /// Whether sample `i` contributes to its own ψ.
    #[serde(default)]
    pub include_current: bool,
}

impl EngineConfig {
    pub fn new(kernel: KernelConfig, modes: ModeSpec) -> Self {
        EngineConfig {
            kernel,
            modes,
            window: None,
            eigen_scope: EigenScope::History,
            include_current: false,
        }
    }

    pub fn with_window(mut self, window: usize, scope: EigenScope) -> Self {
        self.window = Some(window);
        self.eigen_scope = scope;
        self
    }

    pub fn with_include_current(mut self, include: bool) -> Self {
        self.include_current = include;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        self.modes.validate()?;
        match (self.window, self.eigen_scope) {
            (Some(w), _) if w < 2 => Err(Error::param("window", "must be at least 2")),
            (None, EigenScope::Window) => Err(Error::param(
                "eigen_scope",
                "window scope requires a window length",
            )),
            _ => Ok(()),
        }
    }
}

/// Running eigenvalue of one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeState {
    pub k: usize,
    pub running_min_ratio: f64,
    pub eigenvalue: f64,
}

impl ModeState {
    pub fn new(k: usize) -> Self {
        ModeState {
            k,
            running_min_ratio: f64::INFINITY,
            eigenvalue: f64::NEG_INFINITY,
        }
    }

    /// True once at least one ratio has been admitted.
    pub fn is_seeded(&self) -> bool {
        self.running_min_ratio.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOutcome {
    Admitted,
    SkippedNonFinite,
}

/// Folds one ratio into the running minimum. Non-finite ratios leave the
/// state untouched.
pub fn eigen_update(state: ModeState, ratio: f64) -> (ModeState, UpdateOutcome) {
    if !ratio.is_finite() {
        return (state, UpdateOutcome::SkippedNonFinite);
    }
    let min = state.running_min_ratio.min(ratio);
    (
        ModeState {
            k: state.k,
            running_min_ratio: min,
            eigenvalue: -min,
        },
        UpdateOutcome::Admitted,
    )
}

/// Why a trace cell was flagged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// `|ψ^k|` fell below epsilon; the ratio was guarded and kept out of the minimum.
    GuardedDivision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub sample: usize,
    pub mode: usize,
    pub kind: EventKind,
}

/// Read access to a table of per-row, per-mode QIPF values.
pub trait QipfTable {
    fn rows(&self) -> usize;
    fn num_modes(&self) -> usize;
    /// Values of modes 1..=m at `row`.
    fn qipf_row(&self, row: usize) -> &[f64];
}

/// Per-sample output of [`decompose_stream`].
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionTrace {
    num_modes: usize,
    pub index: Vec<usize>,
    pub x: Vec<f64>,
    pub psi: Vec<f64>,
    /// Classical IPF at `x`, i.e. ψ².
    pub ipf: Vec<f64>,
    ratio: Vec<f64>,
    eigen: Vec<f64>,
    qipf: Vec<f64>,
    flagged: Vec<bool>,
    pub events: Vec<TraceEvent>,
}

impl DecompositionTrace {
    fn with_capacity(num_modes: usize, rows: usize) -> Self {
        DecompositionTrace {
            num_modes,
            index: Vec::with_capacity(rows),
            x: Vec::with_capacity(rows),
            psi: Vec::with_capacity(rows),
            ipf: Vec::with_capacity(rows),
            ratio: Vec::with_capacity(rows * num_modes),
            eigen: Vec::with_capacity(rows * num_modes),
            qipf: Vec::with_capacity(rows * num_modes),
            flagged: Vec::with_capacity(rows * num_modes),
            events: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    fn cell(&self, row: usize, k: usize) -> usize {
        assert!(k >= 1 && k <= self.num_modes, "mode {k} out of range");
        row * self.num_modes + (k - 1)
    }

    pub fn qipf(&self, row: usize, k: usize) -> f64 {
        self.qipf[self.cell(row, k)]
    }

    pub fn ratio(&self, row: usize, k: usize) -> f64 {
        self.ratio[self.cell(row, k)]
    }

    pub fn eigen(&self, row: usize, k: usize) -> f64 {
        self.eigen[self.cell(row, k)]
    }

    pub fn is_flagged(&self, row: usize, k: usize) -> bool {
        self.flagged[self.cell(row, k)]
    }

    pub fn ratio_row(&self, row: usize) -> &[f64] {
        &self.ratio[row * self.num_modes..(row + 1) * self.num_modes]
    }

    pub fn eigen_row(&self, row: usize) -> &[f64] {
        &self.eigen[row * self.num_modes..(row + 1) * self.num_modes]
    }

    /// Column of mode `k` over all rows.
    pub fn qipf_mode(&self, k: usize) -> Vec<f64> {
        (0..self.len()).map(|r| self.qipf(r, k)).collect()
    }

    /// Eigenvalues after the last processed sample.
    pub fn final_eigenvalues(&self) -> Option<&[f64]> {
        self.len().checked_sub(1).map(|r| self.eigen_row(r))
    }

    /// One row per sample: `index,x,psi` then `ratio_k,eigen_k,qipf_k` per mode.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = String::from("index,x,psi");
        for k in 1..=self.num_modes {
            header.push_str(&format!(",ratio_{k},eigen_{k},qipf_{k}"));
        }
        writeln!(w, "{header}")?;
        for r in 0..self.len() {
            write!(
                w,
                "{},{},{}",
                self.index[r],
                fmt_f64(self.x[r]),
                fmt_f64(self.psi[r])
            )?;
            for k in 1..=self.num_modes {
                write!(
                    w,
                    ",{},{},{}",
                    fmt_f64(self.ratio(r, k)),
                    fmt_f64(self.eigen(r, k)),
                    fmt_f64(self.qipf(r, k))
                )?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

impl QipfTable for DecompositionTrace {
    fn rows(&self) -> usize {
        self.len()
    }

    fn num_modes(&self) -> usize {
        self.num_modes
    }

    fn qipf_row(&self, row: usize) -> &[f64] {
        &self.qipf[row * self.num_modes..(row + 1) * self.num_modes]
    }
}

/// Seventeen significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Trailing-window minimum over admitted ratios (monotone deque).
#[derive(Debug, Clone, Default)]
struct WindowMin {
    deque: VecDeque<(usize, f64)>,
}

impl WindowMin {
    fn push(&mut self, row: usize, ratio: f64) {
        while matches!(self.deque.back(), Some(&(_, v)) if v >= ratio) {
            self.deque.pop_back();
        }
        self.deque.push_back((row, ratio));
    }

    fn expire(&mut self, oldest_kept: usize) {
        while matches!(self.deque.front(), Some(&(r, _)) if r < oldest_kept) {
            self.deque.pop_front();
        }
    }

    fn min(&self) -> f64 {
        self.deque.front().map_or(f64::INFINITY, |&(_, v)| v)
    }
}

/// Incremental engine. Feed samples with [`QipfStream::push`]; rows are
/// appended to the internal trace once a past sample exists.
#[derive(Debug, Clone)]
pub struct QipfStream {
    cfg: EngineConfig,
    basis: ModeBasis,
    samples: Vec<f64>,
    states: Vec<ModeState>,
    windows: Vec<WindowMin>,
    scratch: Vec<ModeValue>,
    trace: DecompositionTrace,
}

impl QipfStream {
    pub fn new(cfg: EngineConfig) -> Result<Self> {
        cfg.validate()?;
        let m = cfg.modes.num_modes;
        Ok(QipfStream {
            cfg,
            basis: ModeBasis::new(cfg.modes)?,
            samples: Vec::new(),
            states: (1..=m).map(ModeState::new).collect(),
            windows: vec![WindowMin::default(); m],
            scratch: vec![ModeValue::default(); m],
            trace: DecompositionTrace::with_capacity(m, 0),
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn states(&self) -> &[ModeState] {
        &self.states
    }

    pub fn trace(&self) -> &DecompositionTrace {
        &self.trace
    }

    pub fn into_trace(self) -> DecompositionTrace {
        self.trace
    }

    /// Adds a sample and evaluates the decomposition at it.
    pub fn push(&mut self, x: f64) -> Result<()> {
        self.push_at(x, x)
    }

    /// Adds `sample` to the data and evaluates at `point` using the data
    /// before it (plus `sample` itself when `include_current` is set).
    pub fn push_at(&mut self, point: f64, sample: f64) -> Result<()> {
        if !point.is_finite() || !sample.is_finite() {
            return Err(Error::NonFinite("stream input"));
        }
        let i = self.samples.len();
        self.samples.push(sample);
        if i == 0 {
            return Ok(());
        }
        let end = if self.cfg.include_current { i + 1 } else { i };
        let lo = self.cfg.window.map_or(0, |w| end.saturating_sub(w));
        let past = &self.samples[lo..end];
        let sigma = self.cfg.kernel.sigma;
        let (s, s1, s2) = kernel_moments(point, past, sigma);
        if !(s > 0.0) {
            return Err(Error::Numerical {
                sample: i,
                mode: 0,
                reason: "kernel sum underflowed to zero; sample is isolated from its past".into(),
            });
        }
        let pe = psi_from_moments(point, s, s1, s2);
        self.basis.evaluate_into(&pe, &mut self.scratch);

        let row = self.trace.len();
        let half_var = 0.5 * sigma * sigma;
        let eps = self.cfg.kernel.epsilon;
        let windowed = self.cfg.eigen_scope == EigenScope::Window;
        let eigen_window = self.cfg.window.unwrap_or(usize::MAX);

        self.trace.index.push(i);
        self.trace.x.push(point);
        self.trace.psi.push(pe.psi);
        self.trace.ipf.push(s);

        for (idx, mv) in self.scratch.iter().enumerate() {
            let k = idx + 1;
            let guarded = mv.psi_k.abs() < eps;
            let denom = if guarded {
                let sign = if mv.psi_k < 0.0 { -1.0 } else { 1.0 };
                sign * mv.psi_k.abs().max(eps)
            } else {
                mv.psi_k
            };
            let mut ratio = half_var * mv.lap_psi_k / denom;
            if !ratio.is_finite() {
                return Err(Error::Numerical {
                    sample: i,
                    mode: k,
                    reason: format!("non-finite laplacian ratio {ratio}"),
                });
            }

            let state = &mut self.states[idx];
            if windowed {
                let win = &mut self.windows[idx];
                win.expire((row + 1).saturating_sub(eigen_window));
                let current = win.min();
                if guarded && current.is_finite() {
                    ratio = ratio.max(current);
                } else {
                    win.push(row, ratio);
                }
                let min = win.min();
                *state = ModeState {
                    k,
                    running_min_ratio: min,
                    eigenvalue: -min,
                };
            } else if guarded && state.is_seeded() {
                ratio = ratio.max(state.running_min_ratio);
            } else {
                *state = eigen_update(*state, ratio).0;
            }

            if guarded {
                self.trace.events.push(TraceEvent {
                    sample: i,
                    mode: k,
                    kind: EventKind::GuardedDivision,
                });
            }
            self.trace.ratio.push(ratio);
            self.trace.eigen.push(state.eigenvalue);
            self.trace.qipf.push(state.eigenvalue + ratio);
            self.trace.flagged.push(guarded);
        }
        Ok(())
    }
}

/// Decomposes a whole signal causally; row `r` describes sample `r + 1`.
pub fn decompose_stream(signal: &[f64], cfg: &EngineConfig) -> Result<DecompositionTrace> {
    decompose_at(signal, signal, cfg)
}

/// Causal decomposition where row `i` evaluates `points[i]` against
/// `samples[..i]` (or `..=i` when `include_current`).
pub fn decompose_at(
    points: &[f64],
    samples: &[f64],
    cfg: &EngineConfig,
) -> Result<DecompositionTrace> {
    if samples.len() < 2 {
        return Err(Error::TooShort {
            required: 2,
            actual: samples.len(),
        });
    }
    if points.len() != samples.len() {
        return Err(Error::Domain(format!(
            "{} evaluation points for {} samples",
            points.len(),
            samples.len()
        )));
    }
    let mut stream = QipfStream::new(*cfg)?;
    stream.trace = DecompositionTrace::with_capacity(cfg.modes.num_modes, samples.len() - 1);
    for (&p, &s) in points.iter().zip(samples) {
        stream.push_at(p, s)?;
    }
    Ok(stream.into_trace())
}

/// Non-causal evaluation of every mode over a grid of locations.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialQipf {
    num_modes: usize,
    pub grid: Vec<f64>,
    pub psi: Vec<f64>,
    pub ipf: Vec<f64>,
    ratio: Vec<f64>,
    qipf: Vec<f64>,
    flagged: Vec<bool>,
    /// `E^k = −min` over the grid, per mode.
    pub eigenvalues: Vec<f64>,
    /// Fundamental path: ratio `σ²/2 ψ″/ψ`, its eigenvalue and potential.
    pub ground_ratio: Vec<f64>,
    pub ground_eigenvalue: f64,
    pub ground_qipf: Vec<f64>,
}

impl SpatialQipf {
    pub fn qipf(&self, point: usize, k: usize) -> f64 {
        self.qipf[point * self.num_modes + k - 1]
    }

    pub fn ratio(&self, point: usize, k: usize) -> f64 {
        self.ratio[point * self.num_modes + k - 1]
    }

    pub fn is_flagged(&self, point: usize, k: usize) -> bool {
        self.flagged[point * self.num_modes + k - 1]
    }

    pub fn qipf_mode(&self, k: usize) -> Vec<f64> {
        (0..self.grid.len()).map(|p| self.qipf(p, k)).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = String::from("index,x,psi,ipf,ground_qipf");
        for k in 1..=self.num_modes {
            header.push_str(&format!(",ratio_{k},eigen_{k},qipf_{k}"));
        }
        writeln!(w, "{header}")?;
        for p in 0..self.grid.len() {
            write!(
                w,
                "{p},{},{},{},{}",
                fmt_f64(self.grid[p]),
                fmt_f64(self.psi[p]),
                fmt_f64(self.ipf[p]),
                fmt_f64(self.ground_qipf[p])
            )?;
            for k in 1..=self.num_modes {
                write!(
                    w,
                    ",{},{},{}",
                    fmt_f64(self.ratio(p, k)),
                    fmt_f64(self.eigenvalues[k - 1]),
                    fmt_f64(self.qipf(p, k))
                )?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

impl QipfTable for SpatialQipf {
    fn rows(&self) -> usize {
        self.grid.len()
    }

    fn num_modes(&self) -> usize {
        self.num_modes
    }

    fn qipf_row(&self, row: usize) -> &[f64] {
        &self.qipf[row * self.num_modes..(row + 1) * self.num_modes]
    }
}

struct GridPoint {
    psi: f64,
    ipf: f64,
    ground: f64,
    ratios: Vec<f64>,
    guarded: Vec<bool>,
}

/// Evaluates ψ, the mode ratios and `V^k` at each grid point using every
/// sample. Eigenvalues come from the minimum over the grid, so each mode's
/// potential touches zero somewhere on it.
pub fn spatial_qipf(grid: &[f64], samples: &[f64], cfg: &EngineConfig) -> Result<SpatialQipf> {
    if grid.is_empty() || samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    cfg.validate()?;
    if grid.iter().chain(samples).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spatial input"));
    }
    let sigma = cfg.kernel.sigma;
    let eps = cfg.kernel.epsilon;
    let half_var = 0.5 * sigma * sigma;
    let m = cfg.modes.num_modes;
    let basis = ModeBasis::new(cfg.modes)?;

    let points: Vec<GridPoint> = grid
        .par_iter()
        .map_init(
            || (basis.clone(), vec![ModeValue::default(); m]),
            |(basis, scratch), &x| {
                let (s, s1, s2) = kernel_moments(x, samples, sigma);
                let pe = psi_from_moments(x, s, s1, s2);
                basis.evaluate_into(&pe, scratch);
                let mut ratios = Vec::with_capacity(m);
                let mut guarded = Vec::with_capacity(m);
                for mv in scratch.iter() {
                    let g = mv.psi_k.abs() < eps;
                    let denom = if g {
                        let sign = if mv.psi_k < 0.0 { -1.0 } else { 1.0 };
                        sign * mv.psi_k.abs().max(eps)
                    } else {
                        mv.psi_k
                    };
                    ratios.push(half_var * mv.lap_psi_k / denom);
                    guarded.push(g);
                }
                GridPoint {
                    psi: pe.psi,
                    ipf: s,
                    ground: ground_state_ratio(&pe, sigma),
                    ratios,
                    guarded,
                }
            },
        )
        .collect();

    for (p, gp) in points.iter().enumerate() {
        if !(gp.ipf > 0.0) {
            return Err(Error::Numerical {
                sample: p,
                mode: 0,
                reason: "kernel sum underflowed to zero at grid point".into(),
            });
        }
        if let Some(k) = gp.ratios.iter().position(|r| !r.is_finite()) {
            return Err(Error::Numerical {
                sample: p,
                mode: k + 1,
                reason: "non-finite laplacian ratio".into(),
            });
        }
    }

    // deterministic reduction in grid order
    let mut mins = vec![f64::INFINITY; m];
    for gp in &points {
        for k in 0..m {
            if !gp.guarded[k] {
                mins[k] = mins[k].min(gp.ratios[k]);
            }
        }
    }
    for (k, min) in mins.iter_mut().enumerate() {
        if min.is_infinite() {
            // every point guarded: fall back to the guarded ratios
            *min = points
                .iter()
                .map(|gp| gp.ratios[k])
                .fold(f64::INFINITY, f64::min);
        }
    }

    let n = grid.len();
    let mut out = SpatialQipf {
        num_modes: m,
        grid: grid.to_vec(),
        psi: Vec::with_capacity(n),
        ipf: Vec::with_capacity(n),
        ratio: Vec::with_capacity(n * m),
        qipf: Vec::with_capacity(n * m),
        flagged: Vec::with_capacity(n * m),
        eigenvalues: mins.iter().map(|v| -v).collect(),
        ground_ratio: Vec::with_capacity(n),
        ground_eigenvalue: 0.0,
        ground_qipf: Vec::with_capacity(n),
    };
    let ground_min = points
        .iter()
        .map(|gp| gp.ground)
        .fold(f64::INFINITY, f64::min);
    out.ground_eigenvalue = -ground_min;
    for gp in points {
        out.psi.push(gp.psi);
        out.ipf.push(gp.ipf);
        out.ground_ratio.push(gp.ground);
        out.ground_qipf.push(out.ground_eigenvalue + gp.ground);
        for k in 0..m {
            let r = if gp.guarded[k] {
                gp.ratios[k].max(mins[k])
            } else {
                gp.ratios[k]
            };
            out.ratio.push(r);
            out.qipf.push(out.eigenvalues[k] + r);
            out.flagged.push(gp.guarded[k]);
        }
    }
    Ok(out)
}

/// Mean of `V^k` over `k` in `lo..=hi` at every row.
pub fn mode_average<T: QipfTable + ?Sized>(table: &T, range: (usize, usize)) -> Result<Vec<f64>> {
    let (lo, hi) = range;
    if lo == 0 || lo > hi || hi > table.num_modes() {
        return Err(Error::param(
            "mode_range",
            format!("({lo}, {hi}) not within 1..={}", table.num_modes()),
        ));
    }
    let count = (hi - lo + 1) as f64;
    Ok((0..table.rows())
        .map(|r| table.qipf_row(r)[lo - 1..hi].iter().sum::<f64>() / count)
        .collect())
}
