use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use krom::kmd::{compute_dmd_with, DmdVariant, KoopmanDecomposition};
use krom::modeselect::{select_min_modes, ModalSet, DEFAULT_THRESHOLD};
use krom::noise::{load_trace_csv, NoiseDecomposition, NoiseFile};
use krom::pipeline::{
    band_csv, reconstruction_csv, run_pipeline, score_model, simulate, ExperimentConfig,
    ScoreOptions, SystemConfig,
};
use krom::rom::{fit_coefficients, ReducedOrderModel};
use krom::snapshots::{complexify_angles, hankel_embed, load_snapshots, save_snapshots, Representation};
use krom::KromError;

/// Koopman reduced order models with modal-noise confidence bands.
#[derive(Parser)]
#[command(name = "krom", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the system of a config and save its snapshots.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output path stem (`<out>.csv` plus manifest).
        #[arg(long, default_value = "signal")]
        out: PathBuf,
    },
    /// Delay-embed snapshots, optionally complexifying angles first.
    Embed {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        delay: usize,
        /// Treat every coordinate as an angle of this period.
        #[arg(long)]
        complexify: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute a Koopman mode decomposition of snapshots.
    Decompose {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        rank: Option<usize>,
        /// Column window `start:end`.
        #[arg(long, value_parser = parse_window)]
        window: Option<Range<usize>>,
        #[arg(long, value_enum, default_value_t = Variant::Exact)]
        variant: Variant,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a reduced order model on the leading modes of a decomposition.
    Rom {
        #[arg(long)]
        kmd: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        modes: usize,
        /// Training window `start:end` (default: all but the last column).
        #[arg(long, value_parser = parse_window)]
        train: Option<Range<usize>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split the residual of a model into modal noise and innovation.
    Noise {
        #[arg(long)]
        rom: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Evaluation window `start:end` (default: the training window).
        #[arg(long, value_parser = parse_window)]
        window: Option<Range<usize>>,
        /// Output directory for `model.noise.json` and traces.
        #[arg(long)]
        out: PathBuf,
    },
    /// Pick the smallest model whose modal noise looks Gaussian.
    Heuristic {
        /// `*.noise.json` files, one per model size.
        #[arg(long = "noise", required = true)]
        noise: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value = "normality.json")]
        out: PathBuf,
    },
    /// Score a model against the signal it was built from.
    Metrics {
        #[arg(long)]
        rom: PathBuf,
        /// `*.noise.json` of the model.
        #[arg(long)]
        noise: PathBuf,
        /// Base signal snapshots (before complexifying or embedding).
        #[arg(long)]
        signal: PathBuf,
        /// Period of raw angular coordinates; all coordinates are angles.
        #[arg(long)]
        angle_period: Option<f64>,
        #[arg(long, default_value_t = 2.0)]
        band_k: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a whole experiment and write its output tree.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated model sizes.
        #[arg(long, value_delimiter = ',')]
        modes: Option<Vec<usize>>,
        #[arg(long)]
        delay: Option<usize>,
        /// Output root (the run lands in `<out>/<run-id>/`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Exact,
    Projected,
}

fn parse_window(s: &str) -> Result<Range<usize>, String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected start:end, got {s:?}"))?;
    let a = a.trim().parse::<usize>().map_err(|e| e.to_string())?;
    let b = b.trim().parse::<usize>().map_err(|e| e.to_string())?;
    Ok(a..b)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let numerical = err
                .chain()
                .any(|e| matches!(e.downcast_ref::<KromError>(), Some(KromError::Numerical(_))));
            ExitCode::from(if numerical { 3 } else { 2 })
        }
    }
}

fn load_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("reading config {}", path.display()))
}

fn write(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Simulate { config, seed, out } => {
            let mut cfg = load_config(&config)?;
            cfg.seed = seed.or(cfg.seed);
            let data = simulate(&cfg.resolved().system)?;
            save_snapshots(&data.signal, &out)?;
            println!("{} coordinates x {} steps -> {}", data.signal.n_obs(), data.signal.n_t(), out.display());
        }
        Command::Embed {
            input,
            delay,
            complexify,
            out,
        } => {
            let mut x = load_snapshots(&input)?;
            if let Some(period) = complexify {
                x = complexify_angles(&x, period)?;
            }
            if delay > 1 {
                x = hankel_embed(&x, delay)?;
            }
            save_snapshots(&x, &out)?;
            println!("{} x {} -> {}", x.n_obs(), x.n_t(), out.display());
        }
        Command::Decompose {
            input,
            rank,
            window,
            variant,
            out,
        } => {
            let x = load_snapshots(&input)?;
            let x = match window {
                Some(w) => x.columns(w)?,
                None => x,
            };
            let variant = match variant {
                Variant::Exact => DmdVariant::Exact,
                Variant::Projected => DmdVariant::Projected,
            };
            let d = compute_dmd_with(&x, rank, variant)?;
            d.save(&out)?;
            println!("rank {} -> {}", d.rank_used(), out.display());
        }
        Command::Rom {
            kmd,
            input,
            modes,
            train,
            out,
        } => {
            let d = KoopmanDecomposition::load(&kmd)?.truncate(modes)?;
            let x = load_snapshots(&input)?;
            let train = train.unwrap_or(0..x.n_t().saturating_sub(1));
            let rom = fit_coefficients(&d, &x, train)?;
            rom.save(&out)?;
            println!("{} modes -> {}", rom.n_modes(), out.display());
        }
        Command::Noise {
            rom,
            input,
            window,
            out,
        } => {
            let rom = ReducedOrderModel::load(&rom)?;
            let x = load_snapshots(&input)?;
            let window = window.unwrap_or_else(|| rom.train_window());
            let noise = NoiseDecomposition::compute(&rom, &x, window)?;
            let rows = 0..x.base_rows();
            let names = &x.meta().coord_names[rows.clone()];
            noise.save(&out, "model", rows, names, x.meta().t0, x.dt())?;
            for (name, fit) in names.iter().zip(noise.fits()) {
                println!("{name}: mean {:.6e} std {:.6e}", fit.mean_re, fit.std_re);
            }
        }
        Command::Heuristic {
            noise,
            threshold,
            out,
        } => {
            let mut sets = Vec::with_capacity(noise.len());
            for path in &noise {
                let file = NoiseFile::load(path)?;
                let (_, _, modal) = load_trace_csv(&modal_trace_path(path)?)?;
                sets.push(ModalSet {
                    modes: file.n_modes,
                    coordinates: modal
                        .row_iter()
                        .map(|row| row.iter().map(|z| z.re).collect())
                        .collect(),
                });
            }
            sets.sort_by_key(|s| s.modes);
            let report = select_min_modes(&sets, threshold)?;
            write(&out, &serde_json::to_string_pretty(&report)?)?;
            match report.selected_j {
                Some(j) => println!("selected {j} modes"),
                None => println!("no model passed at threshold {threshold}"),
            }
        }
        Command::Metrics {
            rom,
            noise,
            signal,
            angle_period,
            band_k,
            out,
        } => {
            let rom = ReducedOrderModel::load(&rom)?;
            let noise = NoiseFile::load(&noise)?;
            let signal = load_snapshots(&signal)?;
            let meta = rom.decomposition().source_meta();
            let delays = match meta.representation {
                Representation::Hankel { delays, .. } => delays,
                _ => 1,
            };
            let period = meta.period.or(angle_period);
            let periods = vec![period; signal.n_obs()];
            let score = score_model(
                &rom,
                &noise.gaussian_fits,
                &signal,
                &periods,
                &ScoreOptions {
                    delays,
                    complexified: meta.period.is_some(),
                    apply_offset: false,
                    true_eigenvalues: None,
                },
            )?;
            let half_width: Vec<f64> = score.sigma.iter().map(|s| band_k * s).collect();
            let names = &signal.meta().coord_names;
            write(&out.join("metrics.json"), &serde_json::to_string_pretty(&score.metrics)?)?;
            write(&out.join("band.csv"), &band_csv(names, &score.sigma, band_k))?;
            write(
                &out.join("reconstruction.csv"),
                &reconstruction_csv(&signal, &score.reconstruction, &half_width),
            )?;
            for ((name, e), r) in names
                .iter()
                .zip(&score.metrics.per_coordinate_error)
                .zip(&score.metrics.residence_fraction)
            {
                println!("{name}: error {e:.6e} residence {r:.4}");
            }
        }
        Command::Pipeline {
            config,
            seed,
            modes,
            delay,
            out,
            svg,
        } => {
            let mut cfg = load_config(&config)?;
            cfg.seed = seed.or(cfg.seed);
            if let Some(modes) = modes {
                cfg.mode_sweep = modes;
            }
            if let Some(delay) = delay {
                cfg.delay = delay;
            }
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            cfg.svg |= svg;
            if let SystemConfig::ExternalCsv { path, .. } = &mut cfg.system {
                if path.is_relative() {
                    if let Some(base) = config.parent() {
                        *path = base.join(&*path);
                    }
                }
            }
            let dir = run_pipeline(&cfg)?;
            println!("{}", dir.display());
        }
    }
    Ok(())
}

fn modal_trace_path(noise_json: &Path) -> anyhow::Result<PathBuf> {
    let name = noise_json.to_string_lossy();
    match name.strip_suffix(".noise.json") {
        Some(stem) => Ok(PathBuf::from(format!("{stem}.modal.csv"))),
        None => bail!("expected a *.noise.json file, got {name}"),
    }
}
