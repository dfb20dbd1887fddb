use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qipf::analysis::{dominance_histogram, eigenvalue_curve, heatmap_matrix};
use qipf::signals::{
    gen_lorenz, gen_mackey_glass, gen_sine, gen_sine_mixture, normalize, write_signal_csv,
    write_signal_raw, LorenzComponent, LorenzParams, MackeyGlassParams,
};
use qipf::{decompose_stream, EigenScope, Signal};
use qipf_cli::config::{read_signal_file, EngineSection, KernelSection, ModeSection};
use qipf_cli::config::{CompareSection, ExperimentKind, SignalSpec, Source, SpatialSection};
use qipf_cli::presets::{preset, preset_text, PRESETS};
use qipf_cli::{resolve_out_dir, run_experiment, CliError, CliResult, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "qipf",
    version,
    about = "Quantum information potential field decomposition of signals"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a test signal.
    Generate(GenerateArgs),
    /// Streaming decomposition of a signal file into a trace CSV.
    Decompose(DecomposeArgs),
    /// Mode QIPF values over a grid of the input space.
    Spatial(SpatialArgs),
    /// Causal QIPF mode averages next to the classical IPF.
    Compare(CompareArgs),
    /// Dominance histogram, eigenvalue curve or heat-map of a signal file.
    Report(ReportArgs),
    /// Run an experiment config file or a shipped preset.
    Run(RunArgs),
    /// List the shipped presets, or print one.
    Presets { name: Option<String> },
}

#[derive(Copy, Clone, ValueEnum)]
enum Format {
    Csv,
    Raw,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(subcommand)]
    kind: GenKind,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Standardize to zero mean and unit variance.
    #[arg(long, global = true)]
    normalize: bool,
}

#[derive(Subcommand)]
enum GenKind {
    Lorenz {
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, default_value_t = 10.0)]
        sigma_l: f64,
        #[arg(long, default_value_t = 28.0)]
        rho: f64,
        #[arg(long, default_value_t = 8.0 / 3.0)]
        beta: f64,
        #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.0, 1.0, 1.05])]
        init: Vec<f64>,
        #[arg(long, value_enum, default_value = "x")]
        component: Component,
    },
    MackeyGlass {
        #[arg(long, default_value_t = 5000)]
        n: usize,
        #[arg(long, default_value_t = 30.0)]
        tau: f64,
        #[arg(long, default_value_t = 0.2)]
        alpha: f64,
        #[arg(long, default_value_t = 0.1)]
        beta: f64,
        #[arg(long, default_value_t = 10.0)]
        n_exp: f64,
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
        #[arg(long, default_value_t = 1.0)]
        sample_interval: f64,
        #[arg(long, default_value_t = 1.2)]
        history_init: f64,
    },
    Sine {
        #[arg(long)]
        f0: f64,
        #[arg(long)]
        fs: f64,
        #[arg(long)]
        dur: f64,
    },
    SineMixture {
        #[arg(long, value_delimiter = ',', required = true)]
        freqs: Vec<f64>,
        #[arg(long)]
        fs: f64,
        #[arg(long)]
        dur: f64,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum Component {
    X,
    Y,
    Z,
}

#[derive(Copy, Clone, ValueEnum)]
enum Scope {
    History,
    Window,
}

#[derive(Args)]
struct EngineArgs {
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 6)]
    modes: usize,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, value_enum, default_value = "history")]
    eigen_scope: Scope,
    /// Let sample i contribute to its own kernel sum.
    #[arg(long)]
    include_current: bool,
    /// Use raw rather than normalized Hermite polynomials.
    #[arg(long)]
    unnormalized: bool,
    #[arg(long, default_value_t = 1e-8)]
    epsilon: f64,
}

impl EngineArgs {
    fn sections(&self) -> (KernelSection, ModeSection, EngineSection) {
        (
            KernelSection {
                sigma: Some(self.sigma),
                widths: Vec::new(),
                epsilon: self.epsilon,
                fd_step: 1e-4,
            },
            ModeSection {
                num_modes: self.modes,
                normalize: !self.unnormalized,
            },
            EngineSection {
                window: self.window,
                eigen_scope: match self.eigen_scope {
                    Scope::History => EigenScope::History,
                    Scope::Window => EigenScope::Window,
                },
                include_current: self.include_current,
            },
        )
    }
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
    /// Trace CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpatialArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value_t = -4.0, allow_hyphen_values = true)]
    grid_lo: f64,
    #[arg(long, default_value_t = 4.0, allow_hyphen_values = true)]
    grid_hi: f64,
    #[arg(long, default_value_t = 801)]
    grid_points: usize,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    plots: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Evaluation points; the kernel samples are these scaled by `--sample-scale`.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value_t = 0.5)]
    sample_scale: f64,
    /// Inclusive mode ranges such as `1-5`.
    #[arg(long = "average", value_parser = parse_range, default_values = ["1-5"])]
    averages: Vec<(usize, usize)>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    plots: bool,
}

#[derive(Copy, Clone, ValueEnum)]
enum ReportKind {
    Dominance,
    Eigencurve,
    Heatmap,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(value_enum)]
    kind: ReportKind,
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Config file (TOML).
    config: Option<PathBuf>,
    /// Run a shipped preset instead of a file.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Overrides the config's `out_dir` and the QIPF_OUT_DIR variable.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once('-')
        .ok_or_else(|| format!("`{s}` is not of the form lo-hi"))?;
    let lo = a
        .trim()
        .parse()
        .map_err(|_| format!("bad range start in `{s}`"))?;
    let hi = b
        .trim()
        .parse()
        .map_err(|_| format!("bad range end in `{s}`"))?;
    Ok((lo, hi))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cmd: Cmd) -> CliResult<()> {
    match cmd {
        Cmd::Generate(args) => generate(args),
        Cmd::Decompose(args) => decompose(args),
        Cmd::Spatial(args) => {
            let (kernel, modes, engine) = args.engine.sections();
            let cfg = file_config(
                ExperimentKind::Spatial,
                &args.input,
                kernel,
                modes,
                engine,
                args.plots,
                |c| {
                    c.spatial = SpatialSection {
                        grid_lo: args.grid_lo,
                        grid_hi: args.grid_hi,
                        grid_points: args.grid_points,
                    }
                },
            );
            run_and_report(&cfg, args.out_dir.as_deref())
        }
        Cmd::Compare(args) => {
            let (kernel, modes, engine) = args.engine.sections();
            let cfg = file_config(
                ExperimentKind::CausalCompare,
                &args.input,
                kernel,
                modes,
                engine,
                args.plots,
                |c| {
                    c.compare = CompareSection {
                        sample_scale: args.sample_scale,
                        average_ranges: args.averages.clone(),
                    }
                },
            );
            run_and_report(&cfg, args.out_dir.as_deref())
        }
        Cmd::Report(args) => report(args),
        Cmd::Run(args) => {
            let cfg = match (&args.config, &args.preset) {
                (Some(path), None) => ExperimentConfig::load(path)?,
                (None, Some(name)) => preset(name)?,
                _ => return Err(CliError::config("config", "give a config file or --preset")),
            };
            run_and_report(&cfg, args.out_dir.as_deref())
        }
        Cmd::Presets { name } => {
            match name {
                Some(n) => {
                    let _ = io::stdout().lock().write_all(preset_text(&n)?.as_bytes());
                }
                None => {
                    let mut out = io::stdout().lock();
                    for (n, _) in PRESETS {
                        if writeln!(out, "{n}").is_err() {
                            break;
                        }
                    }
                }
            }
            Ok(())
        }
    }
}

fn file_config(
    experiment: ExperimentKind,
    input: &Path,
    kernel: KernelSection,
    modes: ModeSection,
    engine: EngineSection,
    plots: bool,
    tweak: impl FnOnce(&mut ExperimentConfig),
) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        experiment,
        out_dir: None,
        kernel,
        modes,
        engine,
        signals: vec![SignalSpec {
            name: input
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("input")
                .to_string(),
            source: Source::File {
                path: input.to_path_buf(),
            },
            normalize: false,
            scale: 1.0,
        }],
        noise: None,
        seeds: Vec::new(),
        spatial: Default::default(),
        compare: Default::default(),
        heatmap: Default::default(),
        eigencurve: Default::default(),
        sensitivity: None,
        plots,
    };
    tweak(&mut cfg);
    cfg
}

fn run_and_report(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> CliResult<()> {
    let dir = resolve_out_dir(cfg, out_dir);
    let out = run_experiment(cfg, &dir)?;
    list_paths(out.files.iter().map(|f| out.out_dir.join(f)));
    Ok(())
}

/// Prints one path per line; a closed stdout is not an error.
fn list_paths(paths: impl IntoIterator<Item = PathBuf>) {
    let mut out = io::stdout().lock();
    for p in paths {
        if writeln!(out, "{}", p.display()).is_err() {
            return;
        }
    }
}

fn lib(context: &str) -> impl Fn(qipf::Error) -> CliError + '_ {
    move |e| CliError::from_lib(e, context)
}

fn generate(args: GenerateArgs) -> CliResult<()> {
    let sig = match args.kind {
        GenKind::Lorenz {
            n,
            dt,
            sigma_l,
            rho,
            beta,
            init,
            component,
        } => gen_lorenz(&LorenzParams {
            sigma_l,
            rho,
            beta,
            init: [init[0], init[1], init[2]],
            dt,
            n_samples: n,
            component: match component {
                Component::X => LorenzComponent::X,
                Component::Y => LorenzComponent::Y,
                Component::Z => LorenzComponent::Z,
            },
        })
        .map_err(lib("lorenz"))?,
        GenKind::MackeyGlass {
            n,
            tau,
            alpha,
            beta,
            n_exp,
            dt,
            sample_interval,
            history_init,
        } => gen_mackey_glass(&MackeyGlassParams {
            alpha,
            beta_mg: beta,
            tau,
            n_exp,
            dt,
            sample_interval,
            n_samples: n,
            history_init,
        })
        .map_err(lib("mackey_glass"))?,
        GenKind::Sine { f0, fs, dur } => gen_sine(f0, fs, dur).map_err(lib("sine"))?,
        GenKind::SineMixture { freqs, fs, dur } => {
            gen_sine_mixture(&freqs, fs, dur).map_err(lib("sine_mixture"))?
        }
    };
    let sig = if args.normalize {
        normalize(&sig).map_err(lib("normalize"))?
    } else {
        sig
    };
    emit(args.out.as_deref(), |w| match args.format {
        Format::Csv => write_signal_csv(&sig, w),
        Format::Raw => write_signal_raw(&sig, w),
    })
}

/// Writes to `path`, or to stdout when absent.
fn emit(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> CliResult<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            }
            let file = File::create(p).map_err(|e| CliError::io(p, e))?;
            let mut w = BufWriter::new(file);
            body(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| CliError::io(p, e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            body(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

fn engine_for(args: &EngineArgs) -> CliResult<qipf::EngineConfig> {
    let (kernel, modes, engine) = args.sections();
    let cfg = file_config(
        ExperimentKind::Dominance,
        Path::new(""),
        kernel,
        modes,
        engine,
        false,
        |_| {},
    );
    let ecfg = cfg.engine_config(args.sigma);
    if !(args.sigma.is_finite() && args.sigma > 0.0) {
        return Err(CliError::config(
            "kernel.sigma",
            format!("must be positive and finite, got {}", args.sigma),
        ));
    }
    ecfg.validate().map_err(lib("engine"))?;
    Ok(ecfg)
}

fn load(input: &Path) -> CliResult<Signal> {
    read_signal_file(input)
}

fn decompose(args: DecomposeArgs) -> CliResult<()> {
    let ecfg = engine_for(&args.engine)?;
    let sig = load(&args.input)?;
    let trace = decompose_stream(sig.samples(), &ecfg).map_err(lib("input"))?;
    emit(args.out.as_deref(), |w| trace.write_csv(w))
}

fn report(args: ReportArgs) -> CliResult<()> {
    let ecfg = engine_for(&args.engine)?;
    let sig = load(&args.input)?;
    let trace = decompose_stream(sig.samples(), &ecfg).map_err(lib("input"))?;
    let dir = args
        .out_dir
        .clone()
        .or_else(|| std::env::var_os(qipf_cli::OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("qipf-out"));
    let mut written = Vec::new();
    match args.kind {
        ReportKind::Dominance => {
            let h = dominance_histogram(&trace).map_err(lib("input"))?;
            let p = dir.join("dominance.csv");
            emit(Some(&p), |w| h.write_csv(w))?;
            written.push(p);
        }
        ReportKind::Eigencurve => {
            let c = eigenvalue_curve(&trace).map_err(lib("input"))?;
            let p = dir.join("eigencurve.csv");
            emit(Some(&p), |w| {
                writeln!(w, "mode,normalized_eigenvalue")?;
                for (k, v) in c.iter().enumerate() {
                    writeln!(w, "{},{}", k + 1, qipf::engine::fmt_f64(*v))?;
                }
                Ok(())
            })?;
            written.push(p);
        }
        ReportKind::Heatmap => {
            let h = heatmap_matrix(&trace).map_err(lib("input"))?;
            let csv = dir.join("heatmap.csv");
            emit(Some(&csv), |w| h.write_csv(w))?;
            let pgm = dir.join("heatmap.pgm");
            emit(Some(&pgm), |w| h.write_pgm(w))?;
            written.push(csv);
            written.push(pgm);
        }
    }
    list_paths(written);
    Ok(())
}
