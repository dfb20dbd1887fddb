//! Deterministic test-signal generators, normalization and heteroscedastic
//! noise injection.

use std::f64::consts::PI;
use std::io::{self, BufRead, Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::engine::fmt_f64;
use crate::error::{Error, Result};
use crate::kernel::Signal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LorenzComponent {
    #[default]
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LorenzParams {
    pub sigma_l: f64,
    pub rho: f64,
    pub beta: f64,
    pub init: [f64; 3],
    pub dt: f64,
    pub n_samples: usize,
    pub component: LorenzComponent,
}

impl Default for LorenzParams {
    fn default() -> Self {
        LorenzParams {
            sigma_l: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
            init: [0.0, 1.0, 1.05],
            dt: 0.01,
            n_samples: 500,
            component: LorenzComponent::X,
        }
    }
}

impl LorenzParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::param("dt", "must be positive"));
        }
        if self.n_samples == 0 {
            return Err(Error::param("n_samples", "must be at least 1"));
        }
        let all = [self.sigma_l, self.rho, self.beta];
        if all.iter().chain(&self.init).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("lorenz parameters"));
        }
        Ok(())
    }

    /// Right-hand side of the Lorenz system.
    pub fn derivative(&self, s: [f64; 3]) -> [f64; 3] {
        [
            self.sigma_l * (s[1] - s[0]),
            s[0] * (self.rho - s[2]) - s[1],
            s[0] * s[1] - self.beta * s[2],
        ]
    }

    /// One classical RK4 step.
    pub fn rk4_step(&self, s: [f64; 3]) -> [f64; 3] {
        let h = self.dt;
        let add =
            |a: [f64; 3], b: [f64; 3], f: f64| [a[0] + f * b[0], a[1] + f * b[1], a[2] + f * b[2]];
        let k1 = self.derivative(s);
        let k2 = self.derivative(add(s, k1, h / 2.0));
        let k3 = self.derivative(add(s, k2, h / 2.0));
        let k4 = self.derivative(add(s, k3, h));
        [
            s[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            s[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            s[2] + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        ]
    }
}

/// Integrates the Lorenz system with RK4 and emits one component per step,
/// starting with the initial condition.
pub fn gen_lorenz(p: &LorenzParams) -> Result<Signal> {
    p.validate()?;
    let idx = match p.component {
        LorenzComponent::X => 0,
        LorenzComponent::Y => 1,
        LorenzComponent::Z => 2,
    };
    let mut state = p.init;
    let mut out = Vec::with_capacity(p.n_samples);
    for step in 0..p.n_samples {
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration { step });
        }
        out.push(state[idx]);
        state = p.rk4_step(state);
    }
    Ok(Signal::new(out)?.with_label("lorenz"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MackeyGlassParams {
    pub alpha: f64,
    pub beta_mg: f64,
    pub tau: f64,
    pub n_exp: f64,
    pub dt: f64,
    /// Time between emitted samples; a multiple of `dt`.
    pub sample_interval: f64,
    pub n_samples: usize,
    pub history_init: f64,
}

impl Default for MackeyGlassParams {
    fn default() -> Self {
        MackeyGlassParams {
            alpha: 0.2,
            beta_mg: 0.1,
            tau: 30.0,
            n_exp: 10.0,
            dt: 0.1,
            sample_interval: 1.0,
            n_samples: 5000,
            history_init: 1.2,
        }
    }
}

impl MackeyGlassParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("beta_mg", self.beta_mg),
            ("tau", self.tau),
            ("n_exp", self.n_exp),
            ("dt", self.dt),
            ("sample_interval", self.sample_interval),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(field, "must be positive"));
            }
        }
        if !self.history_init.is_finite() {
            return Err(Error::NonFinite("history_init"));
        }
        if self.tau < self.dt {
            return Err(Error::param("tau", "must be at least dt"));
        }
        if self.n_samples == 0 {
            return Err(Error::param("n_samples", "must be at least 1"));
        }
        self.steps_per_sample()?;
        Ok(())
    }

    fn steps_per_sample(&self) -> Result<usize> {
        let ratio = self.sample_interval / self.dt;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::param(
                "sample_interval",
                "must be a whole multiple of dt",
            ));
        }
        Ok(steps as usize)
    }

    /// Delayed-drive term `α·x_τ/(1 + x_τⁿ)`.
    pub fn drive(&self, delayed: f64) -> f64 {
        self.alpha * delayed / (1.0 + delayed.powf(self.n_exp))
    }

    fn rhs(&self, x: f64, delayed: f64) -> f64 {
        self.drive(delayed) - self.beta_mg * x
    }
}

/// Integrates the Mackey-Glass delay equation with RK4, reading the delayed
/// term from the stored trajectory by linear interpolation. The pre-history
/// is the constant `history_init`.
pub fn gen_mackey_glass(p: &MackeyGlassParams) -> Result<Signal> {
    p.validate()?;
    let every = p.steps_per_sample()?;
    let total_steps = (p.n_samples - 1) * every;
    // trajectory[j] = x(j·dt)
    let mut traj = Vec::with_capacity(total_steps + 1);
    traj.push(p.history_init);
    let delayed = |traj: &[f64], t: f64| -> f64 {
        let td = t - p.tau;
        if td <= 0.0 {
            return p.history_init;
        }
        let pos = td / p.dt;
        let j = pos.floor() as usize;
        let frac = pos - j as f64;
        if j + 1 >= traj.len() {
            return traj[traj.len() - 1];
        }
        traj[j] + frac * (traj[j + 1] - traj[j])
    };
    for step in 0..total_steps {
        let t = step as f64 * p.dt;
        let h = p.dt;
        let x = traj[step];
        let d0 = delayed(&traj, t);
        let dm = delayed(&traj, t + h / 2.0);
        let d1 = delayed(&traj, t + h);
        let k1 = p.rhs(x, d0);
        let k2 = p.rhs(x + h / 2.0 * k1, dm);
        let k3 = p.rhs(x + h / 2.0 * k2, dm);
        let k4 = p.rhs(x + h * k3, d1);
        let next = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() {
            return Err(Error::Integration { step: step + 1 });
        }
        traj.push(next);
    }
    let out = traj.iter().step_by(every).copied().collect();
    Ok(Signal::new(out)?.with_label("mackey-glass"))
}

fn sample_count(fs: f64, duration: f64) -> Result<usize> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::param("fs", "must be positive"));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::param("duration", "must be positive"));
    }
    // tolerate products like 8000·0.16 = 1279.9999…
    Ok((fs * duration + 1e-9).floor() as usize)
}

/// `sin(2π f₀ n/fs)` for `n = 0..⌊fs·duration⌋`.
pub fn gen_sine(f0: f64, fs: f64, duration: f64) -> Result<Signal> {
    gen_sine_mixture(&[f0], fs, duration)
}

/// Unweighted sum of sines.
pub fn gen_sine_mixture(freqs: &[f64], fs: f64, duration: f64) -> Result<Signal> {
    if freqs.is_empty() {
        return Err(Error::param("freqs", "need at least one frequency"));
    }
    if freqs.iter().any(|f| !f.is_finite()) {
        return Err(Error::NonFinite("frequency"));
    }
    let n = sample_count(fs, duration)?;
    let out = (0..n)
        .map(|i| {
            freqs
                .iter()
                .map(|f| (2.0 * PI * f * i as f64 / fs).sin())
                .sum()
        })
        .collect();
    let label = if freqs.len() == 1 {
        "sine"
    } else {
        "sine-mixture"
    };
    Signal::new(out)?.with_label(label).with_sample_rate(fs)
}

/// Population mean and variance.
pub fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Zero mean, unit population variance.
pub fn normalize(signal: &Signal) -> Result<Signal> {
    let v = signal.samples();
    if v.len() < 2 {
        return Err(Error::TooShort {
            required: 2,
            actual: v.len(),
        });
    }
    let (mean, var) = mean_var(v);
    if !(var > 0.0) {
        return Err(Error::Domain(
            "cannot normalize a zero-variance signal".into(),
        ));
    }
    let sd = var.sqrt();
    Ok(signal.map_samples(v.iter().map(|x| (x - mean) / sd).collect()))
}

pub fn scale(signal: &Signal, factor: f64) -> Result<Signal> {
    if !factor.is_finite() {
        return Err(Error::NonFinite("scale factor"));
    }
    Ok(signal.map_samples(signal.samples().iter().map(|x| x * factor).collect()))
}

/// One half-open interval `[start, end)` of constant noise SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseInterval {
    pub start: usize,
    pub end: usize,
    /// `f64::INFINITY` leaves the interval clean.
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub intervals: Vec<NoiseInterval>,
    pub rng_seed: u64,
}

impl NoiseSchedule {
    /// Seven 100-sample intervals of the heteroscedastic Lorenz study, noisy from sample 500.
    pub fn lorenz_table(rng_seed: u64) -> Self {
        let db = [16.7, 20.4, 14.2, 16.3, 14.5, 5.5, 10.3];
        NoiseSchedule::uniform_intervals(500, 100, &db, rng_seed)
    }

    /// Back-to-back intervals of `length` samples starting at `start`.
    pub fn uniform_intervals(start: usize, length: usize, snr_db: &[f64], rng_seed: u64) -> Self {
        NoiseSchedule {
            intervals: snr_db
                .iter()
                .enumerate()
                .map(|(j, &snr_db)| NoiseInterval {
                    start: start + j * length,
                    end: start + (j + 1) * length,
                    snr_db,
                })
                .collect(),
            rng_seed,
        }
    }

    pub fn snr_db(&self) -> Vec<f64> {
        self.intervals.iter().map(|iv| iv.snr_db).collect()
    }

    pub fn validate(&self, len: usize) -> Result<()> {
        for (j, iv) in self.intervals.iter().enumerate() {
            if iv.start >= iv.end {
                return Err(Error::param("schedule", format!("interval {j} is empty")));
            }
            if iv.end > len {
                return Err(Error::param(
                    "schedule",
                    format!("interval {j} ends at {} beyond signal length {len}", iv.end),
                ));
            }
            if iv.snr_db.is_nan() || iv.snr_db == f64::NEG_INFINITY {
                return Err(Error::param(
                    "schedule",
                    format!("interval {j} has invalid snr"),
                ));
            }
            if j > 0 && self.intervals[j - 1].end != iv.start {
                return Err(Error::param(
                    "schedule",
                    format!("interval {j} does not start where interval {} ends", j - 1),
                ));
            }
        }
        Ok(())
    }
}

/// Adds zero-mean Gaussian noise per interval with variance
/// `P_interval / 10^{snr/10}`, where `P_interval` is the clean mean-square
/// power inside the interval. Samples outside every interval are untouched.
pub fn add_noise(signal: &Signal, schedule: &NoiseSchedule) -> Result<Signal> {
    let clean = signal.samples();
    schedule.validate(clean.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.rng_seed);
    let mut out = clean.to_vec();
    for iv in &schedule.intervals {
        if iv.snr_db == f64::INFINITY {
            continue;
        }
        let seg = &clean[iv.start..iv.end];
        let power = seg.iter().map(|v| v * v).sum::<f64>() / seg.len() as f64;
        let variance = power / 10f64.powf(iv.snr_db / 10.0);
        let normal = Normal::new(0.0, variance.sqrt())
            .map_err(|e| Error::Domain(format!("noise distribution: {e}")))?;
        for v in &mut out[iv.start..iv.end] {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(signal.map_samples(out))
}

/// Injected noise variance of each interval, `P_interval / 10^{snr/10}`
/// (zero for clean intervals).
pub fn interval_noise_variance(signal: &Signal, schedule: &NoiseSchedule) -> Result<Vec<f64>> {
    let clean = signal.samples();
    schedule.validate(clean.len())?;
    Ok(schedule
        .intervals
        .iter()
        .map(|iv| {
            if iv.snr_db == f64::INFINITY {
                return 0.0;
            }
            let seg = &clean[iv.start..iv.end];
            let power = seg.iter().map(|v| v * v).sum::<f64>() / seg.len() as f64;
            power / 10f64.powf(iv.snr_db / 10.0)
        })
        .collect())
}

/// `index,value` CSV with a header row.
pub fn write_signal_csv<W: Write>(signal: &Signal, mut w: W) -> io::Result<()> {
    writeln!(w, "index,value")?;
    for (i, v) in signal.samples().iter().enumerate() {
        writeln!(w, "{i},{}", fmt_f64(*v))?;
    }
    Ok(())
}

pub fn read_signal_csv<R: BufRead>(r: R) -> Result<Signal> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::Domain(format!("reading signal: {e}")))?;
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("index")) {
            continue;
        }
        let value = line.rsplit(',').next().unwrap_or(line);
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Domain(format!("line {}: cannot parse `{value}`", lineno + 1)))?;
        out.push(v);
    }
    Signal::new(out)
}

/// Raw little-endian f64 array.
pub fn write_signal_raw<W: Write>(signal: &Signal, mut w: W) -> io::Result<()> {
    for v in signal.samples() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_signal_raw<R: Read>(mut r: R) -> Result<Signal> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::Domain(format!("reading raw signal: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Domain(format!(
            "raw signal length {} is not a multiple of 8",
            bytes.len()
        )));
    }
    let out = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Signal::new(out)
}
