//! End-to-end experiments: simulate or load a signal, embed it, decompose,
//! sweep model sizes, split the noise, pick a minimum model size and score
//! every reconstruction against the signal.

use std::f64::consts::TAU;
use std::ops::Range;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KromError, Result};
use crate::kmd::{compute_dmd_with, DmdVariant, KoopmanDecomposition};
use crate::metrics::{
    eigenvalue_discrepancy, euclidean_error, geodesic_error, residence_time, residence_time_linear,
    MetricReport,
};
use crate::modeselect::{select_min_modes, ModalSet, NormalityReport, DEFAULT_THRESHOLD};
use crate::noise::{GaussianFit, NoiseDecomposition};
use crate::rom::{fit_coefficients, ReducedOrderModel};
use crate::snapshots::{
    angle_of, complexify_angles, fmt_f64, hankel_embed, load_snapshots, save_snapshots, unembed, write_file,
    SnapshotMatrix,
};
use crate::systems::{
    simulate_anharmonic, simulate_kuramoto, simulate_linear_modal, AnharmonicConfig, KuramotoConfig,
    LinearModalConfig,
};

const KMD_FILE: &str = "kmd/decomposition.kmd.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemConfig {
    LinearModal(LinearModalConfig),
    Anharmonic(AnharmonicConfig),
    Kuramoto(KuramotoConfig),
    /// A snapshot file written by this crate (`<stem>.csv` plus manifest).
    ExternalCsv {
        path: PathBuf,
        /// Indices of coordinates that are angles.
        #[serde(default)]
        angle_coords: Vec<usize>,
        #[serde(default)]
        angle_period: Option<f64>,
    },
}

impl SystemConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            SystemConfig::LinearModal(_) => "linear_modal",
            SystemConfig::Anharmonic(_) => "anharmonic",
            SystemConfig::Kuramoto(_) => "kuramoto",
            SystemConfig::ExternalCsv { .. } => "external_csv",
        }
    }

    fn seed(&self) -> Option<u64> {
        match self {
            SystemConfig::LinearModal(c) => Some(c.seed),
            SystemConfig::Anharmonic(c) => Some(c.seed),
            SystemConfig::Kuramoto(c) => Some(c.seed),
            SystemConfig::ExternalCsv { .. } => None,
        }
    }

    fn set_seed(&mut self, seed: u64) {
        match self {
            SystemConfig::LinearModal(c) => c.seed = seed,
            SystemConfig::Anharmonic(c) => c.seed = seed,
            SystemConfig::Kuramoto(c) => c.seed = seed,
            SystemConfig::ExternalCsv { .. } => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleHandling {
    #[default]
    Raw,
    Complexify,
}

fn default_delay() -> usize {
    1
}

fn default_band_k() -> f64 {
    2.0
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// One experiment. Windows index columns of the embedded data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub system: SystemConfig,
    /// Hankel delay count; 1 keeps the signal as is.
    #[serde(default = "default_delay")]
    pub delay: usize,
    pub mode_sweep: Vec<usize>,
    /// Columns the decomposition is computed from (default: all).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kmd_window: Option<[usize; 2]>,
    /// Columns the coefficients are fitted on (default: all but the last).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_window: Option<[usize; 2]>,
    /// Columns the noise sequences cover (default: the training window).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_window: Option<[usize; 2]>,
    #[serde(default = "default_band_k")]
    pub band_k: f64,
    #[serde(default)]
    pub angle_handling: AngleHandling,
    /// Overrides the seed inside `system`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dmd_rank: Option<usize>,
    #[serde(default)]
    pub dmd_variant: DmdVariant,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Add the modal-noise mean to emitted reconstructions.
    #[serde(default)]
    pub apply_offset: bool,
    #[serde(default)]
    pub svg: bool,
}

impl ExperimentConfig {
    pub fn new(system: SystemConfig, delay: usize, mode_sweep: Vec<usize>) -> Self {
        Self {
            name: None,
            system,
            delay,
            mode_sweep,
            kmd_window: None,
            train_window: None,
            eval_window: None,
            band_k: default_band_k(),
            angle_handling: AngleHandling::Raw,
            seed: None,
            output_dir: default_output_dir(),
            dmd_rank: None,
            dmd_variant: DmdVariant::Exact,
            threshold: default_threshold(),
            apply_offset: false,
            svg: false,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| KromError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Copy with the seed override folded into the system config.
    pub fn resolved(&self) -> Self {
        let mut cfg = self.clone();
        if let Some(seed) = cfg.seed {
            cfg.system.set_seed(seed);
        }
        cfg.seed = cfg.system.seed();
        cfg
    }

    pub fn run_id(&self) -> String {
        let cfg = self.resolved();
        let name = cfg.name.clone().unwrap_or_else(|| cfg.system.kind().to_string());
        match cfg.seed {
            Some(seed) => format!("{name}-seed{seed}"),
            None => name,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(KromError::InvalidArgument(m));
        if self.delay < 1 {
            return bad("delay must be at least 1".into());
        }
        if self.mode_sweep.is_empty() || self.mode_sweep[0] < 1 {
            return bad("mode sweep must be non-empty with sizes >= 1".into());
        }
        if self.mode_sweep.windows(2).any(|w| w[0] >= w[1]) {
            return bad("mode sweep must be strictly ascending".into());
        }
        if !(self.band_k > 0.0 && self.band_k.is_finite()) {
            return bad(format!("band_k must be positive, got {}", self.band_k));
        }
        if !(self.threshold >= 0.0 && self.threshold <= 1.0) {
            return bad(format!("threshold must lie in [0, 1], got {}", self.threshold));
        }
        if let Some(name) = &self.name {
            if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
                return bad(format!("invalid run name {name:?}"));
            }
        }
        Ok(())
    }
}

/// The signal under study and what is known about it.
#[derive(Debug, Clone)]
pub struct SystemData {
    pub signal: SnapshotMatrix,
    /// Angle period per coordinate, `None` for non-angular coordinates.
    pub angle_periods: Vec<Option<f64>>,
    pub true_eigenvalues: Option<Vec<Complex64>>,
}

pub fn simulate(system: &SystemConfig) -> Result<SystemData> {
    match system {
        SystemConfig::LinearModal(c) => {
            let (signal, truth) = simulate_linear_modal(c)?;
            Ok(SystemData {
                angle_periods: vec![None; signal.n_obs()],
                signal,
                true_eigenvalues: Some(truth.eigenvalues),
            })
        }
        SystemConfig::Anharmonic(c) => {
            let signal = simulate_anharmonic(c)?;
            let n = c.n_osc;
            Ok(SystemData {
                signal,
                angle_periods: (0..2 * n).map(|i| (i >= n).then_some(1.0)).collect(),
                true_eigenvalues: None,
            })
        }
        SystemConfig::Kuramoto(c) => {
            let signal = simulate_kuramoto(c)?;
            Ok(SystemData {
                signal,
                angle_periods: vec![Some(TAU); c.n_osc],
                true_eigenvalues: None,
            })
        }
        SystemConfig::ExternalCsv {
            path,
            angle_coords,
            angle_period,
        } => {
            let signal = load_snapshots(path)?;
            let mut angle_periods = vec![None; signal.n_obs()];
            if !angle_coords.is_empty() {
                let period = angle_period.ok_or_else(|| {
                    KromError::InvalidArgument("angle_coords given without angle_period".into())
                })?;
                for &i in angle_coords {
                    let slot = angle_periods.get_mut(i).ok_or_else(|| {
                        KromError::InvalidArgument(format!("angle coordinate {i} out of range"))
                    })?;
                    *slot = Some(period);
                }
            }
            Ok(SystemData {
                signal,
                angle_periods,
                true_eigenvalues: None,
            })
        }
    }
}

/// Complexify (if requested) and delay-embed the signal.
pub fn prepare(cfg: &ExperimentConfig, data: &SystemData) -> Result<SnapshotMatrix> {
    let base = match cfg.angle_handling {
        AngleHandling::Raw => data.signal.clone(),
        AngleHandling::Complexify => {
            let period = data.angle_periods.first().copied().flatten();
            match period {
                Some(p) if data.angle_periods.iter().all(|q| *q == Some(p)) => {
                    complexify_angles(&data.signal, p)?
                }
                _ => {
                    return Err(KromError::InvalidArgument(
                        "complexify needs every coordinate to be an angle with one period".into(),
                    ))
                }
            }
        }
    };
    if cfg.delay == 1 {
        Ok(base)
    } else {
        hankel_embed(&base, cfg.delay)
    }
}

/// One model of the sweep.
#[derive(Debug, Clone)]
pub struct ModelResult {
    pub modes: usize,
    pub rom: ReducedOrderModel,
    pub noise: NoiseDecomposition,
    /// Reconstructed signal (angles for angular coordinates), one row per
    /// base coordinate over the whole signal length.
    pub reconstruction: DMatrix<f64>,
    /// Modal-noise scale per base coordinate, in signal units.
    pub sigma: Vec<f64>,
    pub metrics: MetricReport,
}

impl ModelResult {
    pub fn band_half_width(&self, k: f64) -> Vec<f64> {
        self.sigma.iter().map(|s| k * s).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub data: SystemData,
    pub embedded: SnapshotMatrix,
    pub decomposition: KoopmanDecomposition,
    pub models: Vec<ModelResult>,
    pub normality: NormalityReport,
}

fn window(spec: Option<[usize; 2]>, default: Range<usize>, n_t: usize, what: &str) -> Result<Range<usize>> {
    let w = spec.map_or(default, |[a, b]| a..b);
    if w.is_empty() || w.end > n_t {
        return Err(KromError::InvalidArgument(format!(
            "{what} window {w:?} outside 0..{n_t}"
        )));
    }
    Ok(w)
}

/// Run every computation of an experiment in memory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let cfg = cfg.resolved();
    let data = simulate(&cfg.system)?;
    let embedded = prepare(&cfg, &data)?;
    let k = embedded.n_t();
    let kmd_window = window(cfg.kmd_window, 0..k, k, "decomposition")?;
    let train = window(cfg.train_window, 0..k - 1, k, "training")?;
    let eval = window(cfg.eval_window, train.clone(), k, "evaluation")?;
    if eval.len() < 3 {
        return Err(KromError::InvalidArgument(format!(
            "evaluation window {eval:?} needs at least 3 columns"
        )));
    }

    let decomposition = compute_dmd_with(&embedded.columns(kmd_window)?, cfg.dmd_rank, cfg.dmd_variant)?;
    if let Some(&too_many) = cfg.mode_sweep.iter().find(|&&j| j > decomposition.n_modes()) {
        return Err(KromError::InvalidArgument(format!(
            "requested {too_many} modes but the decomposition has rank {}",
            decomposition.n_modes()
        )));
    }

    let models = cfg
        .mode_sweep
        .par_iter()
        .map(|&j| model_for(&cfg, &data, &embedded, &decomposition, j, train.clone(), eval.clone()))
        .collect::<Result<Vec<_>>>()?;

    let n_base = data.signal.n_obs();
    let sets: Vec<ModalSet> = models
        .iter()
        .map(|m| ModalSet {
            modes: m.modes,
            coordinates: (0..n_base)
                .map(|i| m.noise.modal().row(i).iter().map(|z| z.re).collect())
                .collect(),
        })
        .collect();
    let normality = select_min_modes(&sets, cfg.threshold)?;

    Ok(ExperimentResult {
        config: cfg,
        data,
        embedded,
        decomposition,
        models,
        normality,
    })
}

fn model_for(
    cfg: &ExperimentConfig,
    data: &SystemData,
    embedded: &SnapshotMatrix,
    decomposition: &KoopmanDecomposition,
    j: usize,
    train: Range<usize>,
    eval: Range<usize>,
) -> Result<ModelResult> {
    let rom = fit_coefficients(&decomposition.truncate(j)?, embedded, train)?;
    let noise = NoiseDecomposition::compute(&rom, embedded, eval)?;
    let score = score_model(
        &rom,
        noise.fits(),
        &data.signal,
        &data.angle_periods,
        &ScoreOptions {
            delays: cfg.delay,
            complexified: cfg.angle_handling == AngleHandling::Complexify,
            apply_offset: cfg.apply_offset,
            true_eigenvalues: data.true_eigenvalues.as_deref(),
        },
    )?;
    Ok(ModelResult {
        modes: j,
        rom,
        noise,
        reconstruction: score.reconstruction,
        sigma: score.sigma,
        metrics: score.metrics,
    })
}

/// How a model's output relates to the signal it is scored against.
#[derive(Debug, Clone, Copy)]
pub struct ScoreOptions<'a> {
    /// Hankel delay count of the data the model was fitted on.
    pub delays: usize,
    /// Whether the model sees angles as points on the unit circle.
    pub complexified: bool,
    pub apply_offset: bool,
    pub true_eigenvalues: Option<&'a [Complex64]>,
}

#[derive(Debug, Clone)]
pub struct ModelScore {
    pub reconstruction: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub metrics: MetricReport,
}

/// Reconstruct `signal` over its whole length from `rom` and score it.
///
/// `fits` are the per-row modal-noise fits of the model; only the first
/// `signal.n_obs()` are used. Angular coordinates (those with a period) use
/// circle distances.
pub fn score_model(
    rom: &ReducedOrderModel,
    fits: &[GaussianFit],
    signal: &SnapshotMatrix,
    angle_periods: &[Option<f64>],
    opts: &ScoreOptions,
) -> Result<ModelScore> {
    let n_base = signal.n_obs();
    if angle_periods.len() != n_base || fits.len() < n_base {
        return Err(KromError::Dimension(format!(
            "{n_base} coordinates but {} periods and {} noise fits",
            angle_periods.len(),
            fits.len()
        )));
    }
    let n_cols = signal.n_t() + 1 - opts.delays;
    let mut values = rom.reconstruct_values(0..n_cols)?;
    if opts.apply_offset {
        for (mut row, fit) in values.row_iter_mut().zip(fits) {
            row.add_scalar_mut(Complex64::new(fit.mean_re, fit.mean_im));
        }
    }
    let signal_values = unembed(&values, opts.delays, n_base)?;
    let reconstruction = DMatrix::from_fn(n_base, signal_values.ncols(), |i, s| {
        let z = signal_values[(i, s)];
        match (opts.complexified, angle_periods[i]) {
            (true, Some(p)) => angle_of(z, p),
            _ => z.re,
        }
    });
    let sigma: Vec<f64> = (0..n_base)
        .map(|i| match (opts.complexified, angle_periods[i]) {
            (true, Some(p)) => fits[i].pooled_std() * p / TAU,
            _ => fits[i].std_re,
        })
        .collect();

    let mut errors = Vec::with_capacity(n_base);
    let mut residence = Vec::with_capacity(n_base);
    for i in 0..n_base {
        let truth = signal.real_row(i);
        let rec: Vec<f64> = reconstruction.row(i).iter().copied().collect();
        match angle_periods[i] {
            Some(p) => {
                errors.push(geodesic_error(&truth, &rec, p)?);
                residence.push(residence_time(&truth, &rec, sigma[i], p)?);
            }
            None => {
                errors.push(euclidean_error(&truth, &rec)?);
                residence.push(residence_time_linear(&truth, &rec, sigma[i])?);
            }
        }
    }
    let eigenvalue_discrepancy = opts
        .true_eigenvalues
        .map(|truth| eigenvalue_discrepancy(truth, rom.decomposition().eigenvalues()))
        .transpose()?;
    Ok(ModelScore {
        reconstruction,
        sigma,
        metrics: MetricReport {
            modes_used: rom.n_modes(),
            coord_names: signal.meta().coord_names.clone(),
            per_coordinate_error: errors,
            residence_fraction: residence,
            eigenvalue_discrepancy,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub seed: Option<u64>,
    pub krom_version: String,
    pub config: ExperimentConfig,
    pub embedded_shape: [usize; 2],
    pub rank_used: usize,
    pub selected_modes: Option<usize>,
}

/// Run an experiment and write its output tree under
/// `<output_dir>/<run-id>/`; returns that directory.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let result = run_experiment(cfg)?;
    let dir = cfg.output_dir.join(cfg.run_id());
    write_outputs(&result, &dir)?;
    Ok(dir)
}

pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<()> {
    let cfg = &result.config;
    let signal = &result.data.signal;
    let names = &signal.meta().coord_names;

    save_snapshots(signal, &dir.join("snapshots/signal"))?;
    result.decomposition.save(&dir.join(KMD_FILE))?;
    write_file(
        &dir.join("kmd/eigenvalues.csv"),
        result.decomposition.eigenvalues_csv().as_bytes(),
    )?;

    let mut metrics_csv = String::from(MetricReport::CSV_HEADER);
    for m in &result.models {
        let mdir = dir.join(format!("roms/J{}", m.modes));
        m.rom.save_linked(&mdir.join("model.rom.json"), &format!("../../{KMD_FILE}"))?;
        m.noise.save(&mdir, "model", 0..signal.n_obs(), names, signal.meta().t0, signal.dt())?;
        write_file(&mdir.join("eigenvalues.csv"), m.rom.decomposition().eigenvalues_csv().as_bytes())?;
        write_file(&mdir.join("band.csv"), band_csv(names, &m.sigma, cfg.band_k).as_bytes())?;
        write_file(
            &mdir.join("reconstruction.csv"),
            reconstruction_csv(signal, &m.reconstruction, &m.band_half_width(cfg.band_k)).as_bytes(),
        )?;
        let coord0: Vec<f64> = m.noise.modal().row(0).iter().map(|z| z.re).collect();
        write_file(&mdir.join("qq_coord0.csv"), qq_csv(&qq_pairs(&coord0)?).as_bytes())?;
        write_file(
            &mdir.join("metrics.json"),
            serde_json::to_string_pretty(&m.metrics)?.as_bytes(),
        )?;
        if cfg.svg {
            let svg = band_svg(signal, &m.reconstruction, &m.band_half_width(cfg.band_k), 0);
            write_file(&mdir.join("coord0.svg"), svg.as_bytes())?;
        }
        metrics_csv.push_str(&m.metrics.csv_rows());
    }
    write_file(&dir.join("metrics.csv"), metrics_csv.as_bytes())?;
    write_file(
        &dir.join("normality.json"),
        serde_json::to_string_pretty(&result.normality)?.as_bytes(),
    )?;
    write_file(&dir.join("normality_summary.csv"), result.normality.summary_csv().as_bytes())?;
    write_file(&dir.join("normality_pvalues.csv"), result.normality.p_values_csv().as_bytes())?;

    let manifest = RunManifest {
        run_id: cfg.run_id(),
        seed: cfg.seed,
        krom_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        embedded_shape: [result.embedded.n_obs(), result.embedded.n_t()],
        rank_used: result.decomposition.rank_used(),
        selected_modes: result.normality.selected_j,
    };
    write_file(
        &dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )
}

pub fn band_csv(names: &[String], sigma: &[f64], k: f64) -> String {
    let mut out = String::from("coordinate,sigma,k,half_width\n");
    for (name, s) in names.iter().zip(sigma) {
        out.push_str(&format!("{name},{},{},{}\n", fmt_f64(*s), fmt_f64(k), fmt_f64(k * s)));
    }
    out
}

/// Columns `t`, then `<c>_true,<c>_rom,<c>_lo,<c>_hi` per coordinate.
pub fn reconstruction_csv(signal: &SnapshotMatrix, rec: &DMatrix<f64>, half_width: &[f64]) -> String {
    let names = &signal.meta().coord_names;
    let mut out = String::from("t");
    for c in names {
        out.push_str(&format!(",{c}_true,{c}_rom,{c}_lo,{c}_hi"));
    }
    out.push('\n');
    for s in 0..signal.n_t() {
        out.push_str(&fmt_f64(signal.meta().t0 + s as f64 * signal.dt()));
        for (i, h) in half_width.iter().enumerate() {
            let r = rec[(i, s)];
            for v in [signal.values()[(i, s)].re, r, r - h, r + h] {
                out.push(',');
                out.push_str(&fmt_f64(v));
            }
        }
        out.push('\n');
    }
    out
}

/// Inverse of the standard normal CDF (Wichura's AS 241, PPND16; relative
/// accuracy about 1e-16).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * rational(r, &AS241_A, &AS241_B);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        rational(r - 1.6, &AS241_C, &AS241_D)
    } else {
        rational(r - 5.0, &AS241_E, &AS241_F)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

fn rational(x: f64, num: &[f64; 8], den: &[f64; 8]) -> f64 {
    let n = num.iter().rev().fold(0.0, |acc, c| acc * x + c);
    let d = den.iter().rev().fold(0.0, |acc, c| acc * x + c);
    n / d
}

const AS241_A: [f64; 8] = [
    3.387_132_872_796_366_5,
    1.331_416_678_917_843_8e2,
    1.971_590_950_306_551_3e3,
    1.373_169_376_550_946e4,
    4.592_195_393_154_987e4,
    6.726_577_092_700_87e4,
    3.343_057_558_358_813e4,
    2.509_080_928_730_122_7e3,
];
const AS241_B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091e1,
    6.871_870_074_920_579e2,
    5.394_196_021_424_751e3,
    2.121_379_430_158_659_7e4,
    3.930_789_580_009_271e4,
    2.872_908_573_572_194_3e4,
    5.226_495_278_852_545e3,
];
const AS241_C: [f64; 8] = [
    1.423_437_110_749_683_5,
    4.630_337_846_156_546,
    5.769_497_221_460_691,
    3.647_848_324_763_204_5,
    1.270_458_252_452_368_4,
    2.417_807_251_774_506e-1,
    2.272_384_498_926_918_4e-2,
    7.745_450_142_783_414e-4,
];
const AS241_D: [f64; 8] = [
    1.0,
    2.053_191_626_637_759,
    1.676_384_830_183_803_8,
    6.897_673_349_851e-1,
    1.481_039_764_274_800_8e-1,
    1.519_866_656_361_645_7e-2,
    5.475_938_084_995_345e-4,
    1.050_750_071_644_416_9e-9,
];
const AS241_E: [f64; 8] = [
    6.657_904_643_501_103,
    5.463_784_911_164_114,
    1.784_826_539_917_291_3,
    2.965_605_718_285_048_7e-1,
    2.653_218_952_657_612_4e-2,
    1.242_660_947_388_078_4e-3,
    2.711_555_568_743_487_6e-5,
    2.010_334_399_292_288_1e-7,
];
const AS241_F: [f64; 8] = [
    1.0,
    5.998_322_065_558_88e-1,
    1.369_298_809_227_358e-1,
    1.487_536_129_085_061_5e-2,
    7.868_691_311_456_133e-4,
    1.846_318_317_510_054_8e-5,
    1.421_511_758_316_446e-7,
    2.044_263_103_389_939_7e-15,
];

/// Normal QQ pairs `(Phi^-1((i - 0.5)/n), x_(i))`.
pub fn qq_pairs(sample: &[f64]) -> Result<Vec<(f64, f64)>> {
    let n = sample.len();
    if n < 3 {
        return Err(KromError::InvalidArgument(format!("QQ data needs at least 3 points, got {n}")));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, x)| (inverse_normal_cdf((i as f64 + 0.5) / n as f64), x))
        .collect())
}

pub fn qq_csv(pairs: &[(f64, f64)]) -> String {
    let mut out = String::from("theoretical,sample\n");
    for (q, x) in pairs {
        out.push_str(&format!("{},{}\n", fmt_f64(*q), fmt_f64(*x)));
    }
    out
}

/// Line plot of one coordinate: signal, reconstruction and band.
fn band_svg(signal: &SnapshotMatrix, rec: &DMatrix<f64>, half_width: &[f64], coord: usize) -> String {
    let (w, h, pad) = (800.0, 300.0, 30.0);
    let n = signal.n_t();
    let truth = signal.real_row(coord);
    let model: Vec<f64> = rec.row(coord).iter().copied().collect();
    let hw = half_width[coord];
    let lo = truth.iter().chain(&model).fold(f64::INFINITY, |a, &b| a.min(b)) - hw;
    let hi = truth.iter().chain(&model).fold(f64::NEG_INFINITY, |a, &b| a.max(b)) + hw;
    let span = if hi > lo { hi - lo } else { 1.0 };
    let px = |s: usize| pad + (w - 2.0 * pad) * s as f64 / (n - 1).max(1) as f64;
    let py = |v: f64| h - pad - (h - 2.0 * pad) * (v - lo) / span;
    let path = |ys: &[f64]| {
        ys.iter()
            .enumerate()
            .map(|(s, &y)| format!("{}{:.2},{:.2}", if s == 0 { "M" } else { " L" }, px(s), py(y)))
            .collect::<String>()
    };
    let upper: Vec<f64> = model.iter().map(|m| m + hw).collect();
    let lower: Vec<f64> = model.iter().map(|m| m - hw).collect();
    let mut band = path(&upper);
    for s in (0..n).rev() {
        band.push_str(&format!(" L{:.2},{:.2}", px(s), py(lower[s])));
    }
    band.push_str(" Z");
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n\
         <path d=\"{band}\" fill=\"#2ca02c\" fill-opacity=\"0.3\" stroke=\"none\"/>\n\
         <path d=\"{}\" fill=\"none\" stroke=\"#1f77b4\"/>\n\
         <path d=\"{}\" fill=\"none\" stroke=\"#ff7f0e\"/>\n\
         </svg>\n",
        path(&truth),
        path(&model)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_normal_known_values() {
        assert_eq!(inverse_normal_cdf(0.5), 0.0);
        assert!((inverse_normal_cdf(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((inverse_normal_cdf(1e-10) + 6.361_340_902_404_056).abs() < 1e-9);
        assert!((inverse_normal_cdf(1.0 / 6.0) + inverse_normal_cdf(5.0 / 6.0)).abs() < 1e-15);
    }

    #[test]
    fn qq_three_points() {
        let pairs = qq_pairs(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(pairs.iter().map(|p| p.1).collect::<Vec<_>>(), vec![1.0, 2.0, 3.0]);
        assert_eq!(pairs[1].0, 0.0);
        assert!((pairs[0].0 + 0.967_421_566_101_701).abs() < 1e-12);
        assert!(qq_pairs(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn config_validation() {
        let sys = SystemConfig::LinearModal(LinearModalConfig::reference(1));
        let mut cfg = ExperimentConfig::new(sys, 1, vec![5, 3]);
        assert!(run_experiment(&cfg).is_err());
        cfg.mode_sweep = vec![5];
        cfg.band_k = 0.0;
        assert!(run_experiment(&cfg).is_err());
        cfg.band_k = 2.0;
        cfg.mode_sweep = vec![50];
        assert!(run_experiment(&cfg).is_err());
    }

    #[test]
    fn seed_override_and_run_id() {
        let sys = SystemConfig::Kuramoto(KuramotoConfig::reference(3));
        let mut cfg = ExperimentConfig::new(sys, 1, vec![5]);
        assert_eq!(cfg.run_id(), "kuramoto-seed3");
        cfg.seed = Some(9);
        cfg.name = Some("k".into());
        assert_eq!(cfg.run_id(), "k-seed9");
        assert_eq!(cfg.resolved().system.seed(), Some(9));
    }
}
