//! Runs a validated [`ExperimentConfig`] and writes its artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use qipf::analysis::{
    dominance_histogram, eigenvalue_curve, heatmap_matrix, interval_means, normalized_eigenvalues,
    pearson, sensitivity_table,
};
use qipf::engine::fmt_f64;
use qipf::signals::{add_noise, interval_noise_variance, scale, write_signal_csv};
use qipf::{decompose_at, decompose_stream, mode_average, spatial_qipf, Signal};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{EigenRoute, ExperimentConfig, ExperimentKind};
use crate::error::{CliError, CliResult};
use crate::plot;

pub const OUT_DIR_ENV: &str = "QIPF_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "qipf-out";

/// `explicit`, else the config's `out_dir`, else `$QIPF_OUT_DIR`, else `qipf-out`.
pub fn resolve_out_dir(cfg: &ExperimentConfig, explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| cfg.out_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub out_dir: PathBuf,
    /// Written files relative to `out_dir`, in write order (manifest last).
    pub files: Vec<String>,
    pub summary: Value,
}

struct Sink {
    dir: PathBuf,
    files: Vec<String>,
}

impl Sink {
    fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Sink {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> CliResult<()> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| CliError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn text(&mut self, name: &str, text: &str) -> CliResult<()> {
        self.write(name, |w| w.write_all(text.as_bytes()))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let text =
            serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
        self.text(name, &(text + "\n"))
    }
}

fn lib(context: &str) -> impl Fn(qipf::Error) -> CliError + '_ {
    move |e| CliError::from_lib(e, context)
}

/// Validates, runs and writes all artifacts plus `manifest.json`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> CliResult<RunOutput> {
    cfg.validate()?;
    let mut sink = Sink::new(out_dir)?;
    let (summary, seeds) = match cfg.experiment {
        ExperimentKind::Spatial => (run_spatial(cfg, &mut sink)?, vec![]),
        ExperimentKind::CausalCompare => (run_compare(cfg, &mut sink)?, vec![]),
        ExperimentKind::Dominance => (run_dominance(cfg, &mut sink)?, vec![]),
        ExperimentKind::Eigencurve => (run_eigencurve(cfg, &mut sink)?, vec![]),
        ExperimentKind::Heatmap => (run_heatmap(cfg, &mut sink)?, cfg.seeds.clone()),
        ExperimentKind::Sensitivity => run_sensitivity(cfg, &mut sink)?,
    };
    let manifest = json!({
        "tool": "qipf-cli",
        "tool_version": env!("CARGO_PKG_VERSION"),
        "library_version": qipf::VERSION,
        "experiment": cfg.experiment,
        "seeds": seeds,
        "config": cfg,
        "outputs": sink.files,
        "summary": summary,
    });
    sink.json("manifest.json", &manifest)?;
    Ok(RunOutput {
        out_dir: out_dir.to_path_buf(),
        files: sink.files,
        summary,
    })
}

fn build_signals(cfg: &ExperimentConfig) -> CliResult<Vec<Signal>> {
    cfg.signals.iter().map(|s| s.build()).collect()
}

fn run_spatial(cfg: &ExperimentConfig, sink: &mut Sink) -> CliResult<Value> {
    let grid = cfg.spatial.grid();
    let mut summary = serde_json::Map::new();
    for sig in build_signals(cfg)? {
        for w in cfg.widths() {
            let sp = spatial_qipf(&grid, sig.samples(), &cfg.engine_config(w))
                .map_err(lib(&sig.label))?;
            let stem = format!("spatial_{}_sigma{w}", sig.label);
            sink.write(&format!("{stem}.csv"), |f| sp.write_csv(f))?;
            if cfg.plots {
                let series: Vec<(String, Vec<f64>)> = (1..=cfg.modes.num_modes)
                    .map(|k| (format!("mode {k}"), sp.qipf_mode(k)))
                    .collect();
                sink.text(
                    &format!("{stem}.svg"),
                    &plot::line_chart(
                        &format!("{} QIPF modes, sigma {w}", sig.label),
                        &grid,
                        &series,
                    ),
                )?;
            }
            summary.insert(
                stem,
                json!({ "eigenvalues": sp.eigenvalues, "ground_eigenvalue": sp.ground_eigenvalue }),
            );
        }
    }
    Ok(Value::Object(summary))
}

fn run_compare(cfg: &ExperimentConfig, sink: &mut Sink) -> CliResult<Value> {
    let ecfg = cfg.engine_config(cfg.widths()[0]);
    let ranges = &cfg.compare.average_ranges;
    let mut summary = serde_json::Map::new();
    for points in build_signals(cfg)? {
        let name = points.label.clone();
        let samples = scale(&points, cfg.compare.sample_scale).map_err(lib(&name))?;
        let trace = decompose_at(points.samples(), samples.samples(), &ecfg).map_err(lib(&name))?;
        let averages = ranges
            .iter()
            .map(|&r| mode_average(&trace, r))
            .collect::<qipf::Result<Vec<_>>>()
            .map_err(lib("compare"))?;
        sink.write(&format!("trace_{name}.csv"), |f| trace.write_csv(f))?;
        sink.write(&format!("compare_{name}.csv"), |f| {
            let cols: Vec<String> = ranges
                .iter()
                .map(|(a, b)| format!("qipf_avg_{a}-{b}"))
                .collect();
            writeln!(f, "index,x,classical_ipf,{}", cols.join(","))?;
            for r in 0..trace.len() {
                let avg: Vec<String> = averages.iter().map(|a| fmt_f64(a[r])).collect();
                writeln!(
                    f,
                    "{},{},{},{}",
                    trace.index[r],
                    fmt_f64(trace.x[r]),
                    fmt_f64(trace.ipf[r]),
                    avg.join(",")
                )?;
            }
            Ok(())
        })?;
        if cfg.plots {
            let x: Vec<f64> = trace.index.iter().map(|&i| i as f64).collect();
            let mut series = vec![("classical ipf".to_string(), trace.ipf.clone())];
            for ((a, b), v) in ranges.iter().zip(&averages) {
                series.push((format!("qipf modes {a}-{b}"), v.clone()));
            }
            sink.text(
                &format!("compare_{name}.svg"),
                &plot::line_chart(
                    &format!("{name}: classical IPF vs QIPF averages"),
                    &x,
                    &series,
                ),
            )?;
        }
        summary.insert(
            name,
            json!({ "rows": trace.len(), "guarded_events": trace.events.len() }),
        );
    }
    Ok(Value::Object(summary))
}

fn run_dominance(cfg: &ExperimentConfig, sink: &mut Sink) -> CliResult<Value> {
    let ecfg = cfg.engine_config(cfg.widths()[0]);
    let mut summary = serde_json::Map::new();
    for sig in build_signals(cfg)? {
        let name = sig.label.clone();
        let trace = decompose_stream(sig.samples(), &ecfg).map_err(lib(&name))?;
        let hist = dominance_histogram(&trace).map_err(lib(&name))?;
        sink.write(&format!("trace_{name}.csv"), |f| trace.write_csv(f))?;
        sink.write(&format!("dominance_{name}.csv"), |f| hist.write_csv(f))?;
        if cfg.plots {
            sink.text(
                &format!("dominance_{name}.svg"),
                &plot::bar_chart(
                    &format!("{name}: dominant QIPF mode counts"),
                    &hist.proportions(),
                ),
            )?;
        }
        summary.insert(
            name,
            json!({ "counts": hist.counts, "ties": hist.ties, "proportions": hist.proportions() }),
        );
    }
    Ok(Value::Object(summary))
}

fn run_eigencurve(cfg: &ExperimentConfig, sink: &mut Sink) -> CliResult<Value> {
    let ecfg = cfg.engine_config(cfg.widths()[0]);
    let mut names = Vec::new();
    let mut raw = Vec::new();
    let mut curves = Vec::new();
    for sig in build_signals(cfg)? {
        let name = sig.label.clone();
        let (eigs, curve) = match cfg.eigencurve.route {
            EigenRoute::Stream => {
                let trace = decompose_stream(sig.samples(), &ecfg).map_err(lib(&name))?;
                let eigs = trace
                    .final_eigenvalues()
                    .map(<[f64]>::to_vec)
                    .unwrap_or_default();
                (eigs, eigenvalue_curve(&trace).map_err(lib(&name))?)
            }
            EigenRoute::Spatial => {
                let sp = spatial_qipf(sig.samples(), sig.samples(), &ecfg).map_err(lib(&name))?;
                let curve = normalized_eigenvalues(&sp.eigenvalues).map_err(lib(&name))?;
                (sp.eigenvalues, curve)
            }
        };
        names.push(name);
        raw.push(eigs);
        curves.push(curve);
    }
    let table = |values: &Vec<Vec<f64>>, f: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(f, "mode,{}", names.join(","))?;
        for k in 0..cfg.modes.num_modes {
            let row: Vec<String> = values.iter().map(|v| fmt_f64(v[k])).collect();
            writeln!(f, "{},{}", k + 1, row.join(","))?;
        }
        Ok(())
    };
    sink.write("eigencurve.csv", |f| table(&curves, f))?;
    sink.write("eigenvalues.csv", |f| table(&raw, f))?;
    if cfg.plots {
        let x: Vec<f64> = (1..=cfg.modes.num_modes).map(|k| k as f64).collect();
        let series: Vec<(String, Vec<f64>)> =
            names.iter().cloned().zip(curves.iter().cloned()).collect();
        sink.text(
            "eigencurve.svg",
            &plot::line_chart("Normalized eigenvalues", &x, &series),
        )?;
    }
    let summary: serde_json::Map<String, Value> = names
        .into_iter()
        .zip(curves)
        .map(|(n, c)| (n, json!(c)))
        .collect();
    Ok(Value::Object(summary))
}

fn run_heatmap(cfg: &ExperimentConfig, sink: &mut Sink) -> CliResult<Value> {
    let ecfg = cfg.engine_config(cfg.widths()[0]);
    let noise = cfg.noise.as_ref().expect("validated");
    let clean = build_signals(cfg)?.remove(0);
    let groups = &cfg.heatmap.groups;
    let mut per_seed = Vec::new();
    for &seed in &cfg.seeds {
        let schedule = noise.schedule(seed);
        let noisy = add_noise(&clean, &schedule).map_err(lib("noise"))?;
        let variance = interval_noise_variance(&clean, &schedule).map_err(lib("noise"))?;
        let trace = decompose_stream(noisy.samples(), &ecfg).map_err(lib(&clean.label))?;
        let heat = heatmap_matrix(&trace).map_err(lib(&clean.label))?;
        let averages = groups
            .iter()
            .map(|&g| mode_average(&trace, g))
            .collect::<qipf::Result<Vec<_>>>()
            .map_err(lib("heatmap.groups"))?;
        let ranges: Vec<(usize, usize)> = schedule
            .intervals
            .iter()
            .map(|iv| (iv.start, iv.end))
            .collect();
        let mut correlations = Vec::new();
        for avg in &averages {
            let means = interval_means(avg, trace.index[0], &ranges).map_err(lib("noise"))?;
            correlations.push(pearson(&means, &variance));
        }

        sink.write(&format!("noisy_seed{seed}.csv"), |f| {
            write_signal_csv(&noisy, f)
        })?;
        sink.write(&format!("trace_seed{seed}.csv"), |f| trace.write_csv(f))?;
        sink.write(&format!("heatmap_seed{seed}.csv"), |f| heat.write_csv(f))?;
        sink.write(&format!("heatmap_seed{seed}.pgm"), |f| heat.write_pgm(f))?;
        sink.write(&format!("groups_seed{seed}.csv"), |f| {
            let cols: Vec<String> = groups
                .iter()
                .map(|(a, b)| format!("states_{a}-{b}"))
                .collect();
            writeln!(f, "index,{}", cols.join(","))?;
            for r in 0..trace.len() {
                let vals: Vec<String> = averages.iter().map(|a| fmt_f64(a[r])).collect();
                writeln!(f, "{},{}", trace.index[r], vals.join(","))?;
            }
            Ok(())
        })?;
        if cfg.plots {
            sink.text(
                &format!("heatmap_seed{seed}.svg"),
                &plot::heatmap_svg(&format!("Row-normalized QIPF states, seed {seed}"), &heat),
            )?;
            let x: Vec<f64> = trace.index.iter().map(|&i| i as f64).collect();
            let series: Vec<(String, Vec<f64>)> = groups
                .iter()
                .zip(&averages)
                .map(|((a, b), v)| (format!("states {a}-{b}"), v.clone()))
                .collect();
            sink.text(
                &format!("groups_seed{seed}.svg"),
                &plot::line_chart("Expected value of QIPF state groups", &x, &series),
            )?;
        }
        per_seed.push(json!({
            "seed": seed,
            "snr_db": schedule.snr_db(),
            "noise_variance": variance,
            "constant_rows": heat.constant_rows,
            "group_variance_correlation": groups.iter().zip(&correlations)
                .map(|((a, b), c)| json!({ "group": [a, b], "pearson": c }))
                .collect::<Vec<_>>(),
        }));
    }
    Ok(json!({ "runs": per_seed }))
}

fn run_sensitivity(cfg: &ExperimentConfig, sink: &mut Sink) -> CliResult<(Value, Vec<u64>)> {
    let sc = cfg.sensitivity.as_ref().expect("validated");
    let clean = build_signals(cfg)?.remove(0);
    let table =
        sensitivity_table(&clean, cfg.seeds[0], &cfg.widths(), sc).map_err(lib("sensitivity"))?;
    sink.write("sensitivity.csv", |f| table.write_csv(f))?;
    sink.json("sensitivity.json", &table)?;
    let rows: serde_json::Map<String, Value> = table
        .frameworks
        .iter()
        .zip(&table.cells)
        .map(|(f, c)| (f.label(), json!(c)))
        .collect();
    Ok((
        json!({ "widths": table.widths, "zeta": rows }),
        table.seeds.clone(),
    ))
}
