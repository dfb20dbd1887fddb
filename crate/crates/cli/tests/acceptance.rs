//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p qipf-cli --test acceptance`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use qipf::analysis::{
    dominance_histogram, eigenvalue_curve, interval_means, pearson, sensitivity_table,
    total_variation, Framework, SensitivityConfig,
};
use qipf::baselines::{bayesian_surprise, entropy_difference, SurpriseConfig, DEFAULT_GRID_POINTS};
use qipf::signals::{
    add_noise, gen_lorenz, gen_mackey_glass, gen_sine, interval_noise_variance, normalize,
    LorenzParams, MackeyGlassParams, NoiseSchedule,
};
use qipf::wavefunction::{hermite_normalized, hermite_sequence, mode_wavefunction};
use qipf::{
    decompose_stream, mode_average, psi_eval, spatial_qipf, EigenScope, EngineConfig, KernelConfig,
    ModeSpec, Signal,
};
use qipf_cli::presets::{preset, PRESETS};
use qipf_cli::run_experiment;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    check: fn() -> Outcome,
}

fn engine(sigma: f64, modes: usize) -> EngineConfig {
    EngineConfig::new(KernelConfig::new(sigma).unwrap(), ModeSpec::new(modes))
}

fn normalized(sig: Signal) -> Vec<f64> {
    normalize(&sig).unwrap().into_samples()
}

fn sine(f0: f64) -> Vec<f64> {
    normalized(gen_sine(f0, 8000.0, 0.16).unwrap())
}

fn lorenz(n: usize) -> Vec<f64> {
    normalized(
        gen_lorenz(&LorenzParams {
            n_samples: n,
            ..LorenzParams::default()
        })
        .unwrap(),
    )
}

fn gaussian_set(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Explicit polynomials H₀…H₆ as (value, sum of absolute term values).
fn explicit_hermite(n: usize, y: f64) -> (f64, f64) {
    let coeffs: &[f64] = match n {
        0 => &[1.0],
        1 => &[0.0, 2.0],
        2 => &[-2.0, 0.0, 4.0],
        3 => &[0.0, -12.0, 0.0, 8.0],
        4 => &[12.0, 0.0, -48.0, 0.0, 16.0],
        5 => &[0.0, 120.0, 0.0, -160.0, 0.0, 32.0],
        6 => &[-120.0, 0.0, 720.0, 0.0, -480.0, 0.0, 64.0],
        _ => unreachable!(),
    };
    let terms: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .map(|(p, c)| c * y.powi(p as i32))
        .collect();
    (terms.iter().sum(), terms.iter().map(|t| t.abs()).sum())
}

fn hermite_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let y = rng.random_range(-4.0..4.0);
        let h = hermite_sequence(y, 6);
        for (n, &got) in h.iter().enumerate() {
            let (want, scale) = explicit_hermite(n, y);
            worst = worst.max((got - want).abs() / scale.max(f64::MIN_POSITIVE));
        }
    }
    if worst > 1e-9 {
        return Err(format!("explicit polynomial mismatch {worst:.3e}"));
    }

    let orders: Vec<usize> = (0..=10).map(|j| 2 * j).collect();
    let step = 1e-3;
    let n_pts = (24.0 / step) as usize + 1;
    let mut gram = vec![vec![0.0; orders.len()]; orders.len()];
    for p in 0..n_pts {
        let y = -12.0 + p as f64 * step;
        let w = if p == 0 || p == n_pts - 1 { 0.5 } else { 1.0 } * step * (-y * y).exp();
        let all = hermite_sequence(y, 20);
        let even: Vec<f64> = orders.iter().map(|&o| all[o]).collect();
        let hn = hermite_normalized(&even, &orders).unwrap();
        for i in 0..orders.len() {
            for j in 0..orders.len() {
                gram[i][j] += w * hn[i] * hn[j];
            }
        }
    }
    let mut gram_err: f64 = 0.0;
    for (i, row) in gram.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            gram_err = gram_err.max((v - target).abs());
        }
    }
    if gram_err > 1e-6 {
        return Err(format!("gram deviation {gram_err:.3e}"));
    }
    Ok(format!(
        "max rel err {worst:.1e}, gram deviation {gram_err:.1e}"
    ))
}

/// Richardson-extrapolated central differences of order 1 or 2.
fn central_diff(f: &dyn Fn(f64) -> f64, x: f64, order: u32, h: f64) -> f64 {
    let d = |h: f64| match order {
        1 => (f(x + h) - f(x - h)) / (2.0 * h),
        _ => (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h),
    };
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

fn derivative_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let spec = ModeSpec::new(10);
    let mut worst: f64 = 0.0;
    let mut checks = 0usize;
    for _ in 0..50 {
        let n = rng.random_range(1..=30);
        let scale = rng.random_range(0.5..2.0);
        let samples = gaussian_set(&mut rng, n, scale);
        let sigma = rng.random_range(0.3..1.5);
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - sigma;
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + sigma;
        let x = rng.random_range(lo..hi);
        let kc = KernelConfig::new(sigma).unwrap();
        let pe = psi_eval(x, &samples, &kc).unwrap();
        let psi = |t: f64| psi_eval(t, &samples, &kc).unwrap().psi;

        let mut compare = |analytic: f64, numeric: f64| {
            worst = worst.max((analytic - numeric).abs() / analytic.abs().max(1e-6));
            checks += 1;
        };
        compare(pe.dpsi, central_diff(&psi, x, 1, 1e-3));
        compare(pe.d2psi, central_diff(&psi, x, 2, 1e-3));
        for k in 1..=10 {
            let lap = mode_wavefunction(&pe, k, &spec).unwrap().1;
            let mode = |t: f64| {
                mode_wavefunction(&psi_eval(t, &samples, &kc).unwrap(), k, &spec)
                    .unwrap()
                    .0
            };
            compare(lap, central_diff(&mode, x, 2, 1e-3));
        }
    }
    if worst > 1e-4 {
        return Err(format!(
            "max relative error {worst:.3e} over {checks} checks"
        ));
    }
    Ok(format!("{checks} checks, max relative error {worst:.1e}"))
}

fn operator_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut e_range = (f64::INFINITY, f64::NEG_INFINITY);
    for set in 0..20 {
        let n = rng.random_range(5..60);
        let scale = rng.random_range(0.5..2.0);
        let samples = gaussian_set(&mut rng, n, scale);
        let sigma = rng.random_range(0.2..1.2);
        let cfg = engine(sigma, 10);

        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - 4.0 * sigma;
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 4.0 * sigma;
        let mut grid: Vec<f64> = (0..4001)
            .map(|p| lo + (hi - lo) * p as f64 / 4000.0)
            .collect();
        grid.extend_from_slice(&samples);
        grid.sort_by(f64::total_cmp);

        let sp = spatial_qipf(&grid, &samples, &cfg).map_err(|e| format!("set {set}: {e}"))?;
        let e = sp.ground_eigenvalue;
        e_range = (e_range.0.min(e), e_range.1.max(e));
        if !(0.0..=0.5).contains(&e) {
            return Err(format!("set {set}: ground eigenvalue {e}"));
        }
        for k in 1..=10 {
            let min = sp.qipf_mode(k).into_iter().fold(f64::INFINITY, f64::min);
            if min != 0.0 {
                return Err(format!("set {set}: spatial min of mode {k} is {min:e}"));
            }
        }

        let trace = decompose_stream(&samples, &cfg).map_err(|e| format!("set {set}: {e}"))?;
        for r in 0..trace.len() {
            for k in 1..=10 {
                let v = trace.qipf(r, k);
                if !(v >= 0.0) {
                    return Err(format!("set {set}: streaming qipf({r},{k}) = {v:e}"));
                }
            }
        }
    }
    Ok(format!("ground E in [{:.4}, {:.4}]", e_range.0, e_range.1))
}

fn csv_lines(trace: &qipf::DecompositionTrace) -> Vec<String> {
    let mut buf = Vec::new();
    trace.write_csv(&mut buf).unwrap();
    String::from_utf8(buf)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

fn streaming_prefix() -> Outcome {
    let sig = lorenz(600);
    let cfg = engine(0.3, 18);
    let full = decompose_stream(&sig, &cfg).map_err(|e| e.to_string())?;
    let full_lines = csv_lines(&full);
    for i in [50usize, 200, 599] {
        let part = decompose_stream(&sig[..i], &cfg).map_err(|e| e.to_string())?;
        let part_lines = csv_lines(&part);
        if part_lines[..] != full_lines[..part_lines.len()] {
            return Err(format!("prefix {i} diverges from the full run"));
        }
        for r in 0..part.len() {
            let same = (1..=18).all(|k| {
                part.qipf(r, k).to_bits() == full.qipf(r, k).to_bits()
                    && part.eigen(r, k).to_bits() == full.eigen(r, k).to_bits()
            });
            if !same || part.psi[r].to_bits() != full.psi[r].to_bits() {
                return Err(format!("prefix {i}: row {r} differs"));
            }
        }
    }
    Ok("prefixes 50, 200, 599 bit-identical".into())
}

/// Largest mass on two adjacent modes, with the lower mode (1-based).
fn best_adjacent_pair(p: &[f64]) -> (usize, f64) {
    (0..p.len() - 1)
        .map(|k| (k + 1, p[k] + p[k + 1]))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
}

fn dominance(sig: &[f64]) -> Result<qipf::analysis::DominanceHistogram, String> {
    let trace = decompose_stream(sig, &engine(0.3, 18)).map_err(|e| e.to_string())?;
    dominance_histogram(&trace).map_err(|e| e.to_string())
}

/// Modes up to this index count as low-order out of 18.
const LOW_ORDER_LIMIT: usize = 9;

fn dominance_spread() -> Outcome {
    let sine_h = dominance(&sine(100.0))?;
    let lorenz_h = dominance(&lorenz(500))?;
    let (pair, mass) = best_adjacent_pair(&sine_h.proportions());
    let sine_spread = sine_h.modes_above(0.05);
    let lorenz_spread = lorenz_h.modes_above(0.05);
    let detail = format!(
        "sine modes {pair}-{} carry {:.1}%, modes >= 5%: sine {:?}, lorenz {:?}",
        pair + 1,
        100.0 * mass,
        sine_spread,
        lorenz_spread
    );
    let ok = mass >= 0.8 && pair < LOW_ORDER_LIMIT && lorenz_spread.len() > sine_spread.len();
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn dominance_frequency() -> Outcome {
    let a = dominance(&sine(100.0))?.proportions();
    let b = dominance(&sine(300.0))?.proportions();
    let (pa, ma) = best_adjacent_pair(&a);
    let (pb, mb) = best_adjacent_pair(&b);
    let tv = total_variation(&a, &b);
    let detail = format!(
        "100 Hz modes {pa}-{} ({:.1}%), 300 Hz modes {pb}-{} ({:.1}%), TV {tv:.3}",
        pa + 1,
        100.0 * ma,
        pb + 1,
        100.0 * mb
    );
    if pa == pb && tv < 0.15 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn eigencurve_shape() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, sig) in [("sine", sine(100.0)), ("lorenz", lorenz(500))] {
        let trace = decompose_stream(&sig, &engine(0.3, 18)).map_err(|e| e.to_string())?;
        let eig = trace.final_eigenvalues().ok_or("empty trace")?.to_vec();
        let drops: Vec<usize> = (1..eig.len())
            .filter(|&k| eig[k] < eig[k - 1] - 1e-9)
            .map(|k| k + 1)
            .collect();
        if !drops.is_empty() {
            ok = false;
            notes.push(format!("{name} decreases at modes {drops:?}"));
        }
        if name == "sine" {
            let c = eigenvalue_curve(&trace).map_err(|e| e.to_string())?;
            let inc: Vec<f64> = c.windows(2).map(|w| w[1] - w[0]).collect();
            let early = inc[..4].iter().sum::<f64>() / 4.0;
            let late = inc[4..].iter().sum::<f64>() / (inc.len() - 4) as f64;
            notes.push(format!(
                "sine mean increment modes 1-5 {early:.4}, beyond 5 {late:.4}"
            ));
            ok &= late < early;
        }
    }
    let detail = notes.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn noise_tracking() -> Outcome {
    let clean = normalize(
        &gen_lorenz(&LorenzParams {
            n_samples: 1200,
            ..LorenzParams::default()
        })
        .unwrap(),
    )
    .unwrap();
    let cfg = engine(0.4, 25).with_window(100, EigenScope::History);
    let mut wins = 0;
    let mut pairs = Vec::new();
    for seed in 0..10u64 {
        let schedule = NoiseSchedule::lorenz_table(seed);
        let noisy = add_noise(&clean, &schedule).map_err(|e| e.to_string())?;
        let variance = interval_noise_variance(&clean, &schedule).map_err(|e| e.to_string())?;
        let trace = decompose_stream(noisy.samples(), &cfg).map_err(|e| e.to_string())?;
        let ranges: Vec<(usize, usize)> = schedule
            .intervals
            .iter()
            .map(|iv| (iv.start, iv.end))
            .collect();
        let corr = |g: (usize, usize)| -> Result<f64, String> {
            let avg = mode_average(&trace, g).map_err(|e| e.to_string())?;
            let means = interval_means(&avg, trace.index[0], &ranges).map_err(|e| e.to_string())?;
            Ok(pearson(&means, &variance).unwrap_or(f64::NAN))
        };
        let (low, high) = (corr((1, 4))?, corr((22, 25))?);
        if high > low {
            wins += 1;
        }
        pairs.push(format!("{low:.2}/{high:.2}"));
    }
    let detail = format!(
        "22-25 beats 1-4 in {wins}/10 seeds (r 1-4/22-25: {})",
        pairs.join(" ")
    );
    if wins >= 8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sensitivity_ordering() -> Outcome {
    let clean = normalize(
        &gen_mackey_glass(&MackeyGlassParams {
            n_samples: 5000,
            tau: 30.0,
            alpha: 0.2,
            beta_mg: 0.1,
            ..MackeyGlassParams::default()
        })
        .unwrap(),
    )
    .unwrap();
    let widths = [0.4, 0.5, 0.6, 0.8, 1.0];
    let cfg = SensitivityConfig::mackey_glass_protocol();
    let table = sensitivity_table(&clean, 0, &widths, &cfg).map_err(|e| e.to_string())?;
    let mut failures = Vec::new();
    for (w, sigma) in widths.iter().enumerate() {
        let best_qipf = table
            .frameworks
            .iter()
            .zip(&table.cells)
            .filter(|(f, _)| matches!(f, Framework::QipfGroup(..)))
            .map(|(_, row)| row[w])
            .fold(f64::NEG_INFINITY, f64::max);
        let cell = |f: Framework| table.cell(&f, w).unwrap();
        let surprise = cell(Framework::BayesianSurprise);
        let entropy = cell(Framework::EntropyDifference);
        let ip = cell(Framework::ClassicalIp);
        if !(best_qipf > surprise && best_qipf > entropy && best_qipf > ip) {
            failures.push(format!("sigma {sigma}: best qipf {best_qipf:.3} vs surprise {surprise:.3e}, entropy {entropy:.3}, ip {ip:.3}"));
        }
        let others_min = table
            .frameworks
            .iter()
            .zip(&table.cells)
            .filter(|(f, _)| **f != Framework::ClassicalIp)
            .map(|(_, row)| row[w])
            .fold(f64::INFINITY, f64::min);
        if !(ip < others_min) {
            failures.push(format!(
                "sigma {sigma}: classical ip {ip:.3} not below minimum {others_min:.3e}"
            ));
        }
    }
    if failures.is_empty() {
        Ok("ordering holds at all five widths".into())
    } else {
        Err(failures.join("; "))
    }
}

fn baseline_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let kc = KernelConfig::new(0.3).unwrap();
    for trial in 0..20 {
        let sig = gaussian_set(&mut rng, 200, 1.0);
        let grid =
            SurpriseConfig::spanning(&sig, kc, DEFAULT_GRID_POINTS).map_err(|e| e.to_string())?;
        let s = bayesian_surprise(&sig, &grid).map_err(|e| e.to_string())?;
        if let Some(v) = s.values.iter().find(|v| !(**v >= 0.0)) {
            return Err(format!("trial {trial}: negative surprise {v:e}"));
        }
    }

    let dup = vec![0.37; 1000];
    let grid =
        SurpriseConfig::spanning(&dup, kc, DEFAULT_GRID_POINTS).map_err(|e| e.to_string())?;
    let s = bayesian_surprise(&dup, &grid).map_err(|e| e.to_string())?;
    let last = *s.values.last().unwrap();
    if last.abs() > 1e-10 {
        return Err(format!("duplicate update at N = 1000 gives {last:e}"));
    }

    for _ in 0..20 {
        let a = gaussian_set(&mut rng, 50, 1.0);
        let b = gaussian_set(&mut rng, 50, 2.0);
        let ab: Vec<f64> = a.iter().chain(&b).copied().collect();
        let ba: Vec<f64> = b.iter().chain(&a).copied().collect();
        let d1 = entropy_difference(&ab, 50, &kc).map_err(|e| e.to_string())?;
        let d2 = entropy_difference(&ba, 50, &kc).map_err(|e| e.to_string())?;
        if d1[0] != -d2[0] {
            return Err(format!("antisymmetry broken: {} vs {}", d1[0], d2[0]));
        }
    }
    Ok(format!("duplicate surprise {last:.1e}, antisymmetry exact"))
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect()
}

fn preset_determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut total = 0;
    for (name, _) in PRESETS {
        let cfg = preset(name).map_err(|e| e.to_string())?;
        let a = root.path().join(format!("{name}-a"));
        let b = root.path().join(format!("{name}-b"));
        run_experiment(&cfg, &a).map_err(|e| format!("{name}: {e}"))?;
        run_experiment(&cfg, &b).map_err(|e| format!("{name}: {e}"))?;
        let (fa, fb) = (csv_files(&a), csv_files(&b));
        if fa.is_empty() || fa != fb {
            return Err(format!("preset {name} differs between runs"));
        }
        total += fa.len();
    }
    Ok(format!(
        "{} presets, {total} CSV files identical",
        PRESETS.len()
    ))
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let criteria = [
        Criterion {
            id: 1,
            name: "hermite correctness",
            limit: Some(secs(1)),
            check: hermite_correctness,
        },
        Criterion {
            id: 2,
            name: "derivative oracles",
            limit: Some(secs(5)),
            check: derivative_oracles,
        },
        Criterion {
            id: 3,
            name: "operator invariants",
            limit: Some(secs(5)),
            check: operator_invariants,
        },
        Criterion {
            id: 4,
            name: "streaming equals batch prefix",
            limit: Some(secs(10)),
            check: streaming_prefix,
        },
        Criterion {
            id: 5,
            name: "dominance concentration vs spread",
            limit: Some(secs(30)),
            check: dominance_spread,
        },
        Criterion {
            id: 6,
            name: "dominance frequency invariance",
            limit: Some(secs(30)),
            check: dominance_frequency,
        },
        Criterion {
            id: 7,
            name: "eigenvalue curve",
            limit: Some(secs(30)),
            check: eigencurve_shape,
        },
        Criterion {
            id: 8,
            name: "higher states track noise",
            limit: Some(secs(120)),
            check: noise_tracking,
        },
        Criterion {
            id: 9,
            name: "sensitivity ordering",
            limit: Some(secs(600)),
            check: sensitivity_ordering,
        },
        Criterion {
            id: 10,
            name: "baseline correctness",
            limit: Some(secs(10)),
            check: baseline_correctness,
        },
        Criterion {
            id: 11,
            name: "preset determinism",
            limit: None,
            check: preset_determinism,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.check)();
        let took = start.elapsed();
        let outcome = match (outcome, c.limit) {
            (Ok(d), Some(limit)) if took > limit => {
                Err(format!("{d}; took {took:.2?}, limit {limit:?}"))
            }
            (o, _) => o,
        };
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{tag} criterion {:>2} {}: {detail} [{took:.2?}]",
            c.id, c.name
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
